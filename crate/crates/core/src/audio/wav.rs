//! RIFF/WAVE reader and writer (PCM 8/16/24/32-bit integer, IEEE float).

use super::{AudioClip, AudioError, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encodings supported by [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm8,
    Pcm16,
    Pcm24,
    Float32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::Pcm8 => 8,
            SampleFormat::Pcm16 => 16,
            SampleFormat::Pcm24 => 24,
            SampleFormat::Float32 => 32,
        }
    }
}

struct Fmt {
    tag: u16,
    channels: u16,
    rate: u32,
    block_align: u16,
    bits: u16,
}

fn malformed(offset: usize, msg: impl Into<String>) -> AudioError {
    AudioError::Decode {
        offset,
        msg: msg.into(),
    }
}

fn u16_at(b: &[u8], at: usize) -> Result<u16> {
    b.get(at..at + 2)
        .map(|s| u16::from_le_bytes([s[0], s[1]]))
        .ok_or_else(|| malformed(at, "unexpected end of file"))
}

fn u32_at(b: &[u8], at: usize) -> Result<u32> {
    b.get(at..at + 4)
        .map(|s| u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
        .ok_or_else(|| malformed(at, "unexpected end of file"))
}

fn parse_fmt(b: &[u8], at: usize, size: usize) -> Result<Fmt> {
    if size < 16 {
        return Err(malformed(at, format!("fmt chunk too small ({size} bytes)")));
    }
    let mut tag = u16_at(b, at)?;
    let channels = u16_at(b, at + 2)?;
    let rate = u32_at(b, at + 4)?;
    let block_align = u16_at(b, at + 12)?;
    let bits = u16_at(b, at + 14)?;
    if tag == FORMAT_EXTENSIBLE {
        if size < 40 {
            return Err(malformed(at, "extensible fmt chunk too small"));
        }
        // first two bytes of the sub-format GUID carry the real format tag
        tag = u16_at(b, at + 24)?;
    }
    if channels == 0 {
        return Err(malformed(at + 2, "zero channels"));
    }
    if rate == 0 {
        return Err(malformed(at + 4, "zero sample rate"));
    }
    Ok(Fmt {
        tag,
        channels,
        rate,
        block_align,
        bits,
    })
}

/// Decodes a WAV file into a mono clip. Channels are averaged; integer PCM is
/// scaled by its full-scale value so samples land in [-1, 1].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(malformed(bytes.len(), "file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed(0, "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed(8, "missing WAVE tag"));
    }

    let mut fmt = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4)? as usize;
        let body = at + 8;
        match id {
            b"fmt " => fmt = Some(parse_fmt(bytes, body, size)?),
            b"data" => {
                if body + size > bytes.len() {
                    return Err(malformed(
                        body,
                        format!(
                            "data chunk declares {size} bytes but only {} remain",
                            bytes.len() - body
                        ),
                    ));
                }
                data = Some((body, size));
                break;
            }
            _ => {}
        }
        at = body + size + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed(12, "no fmt chunk"))?;
    let (data_at, data_len) = data.ok_or_else(|| malformed(at, "no data chunk"))?;

    let bytes_per_sample = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_FLOAT, 32 | 64) => fmt.bits as usize / 8,
        (FORMAT_PCM | FORMAT_FLOAT, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{bits}-bit samples for format tag {}",
                fmt.tag
            )))
        }
        (tag, _) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "format tag {tag:#06x} is not PCM or IEEE float"
            )))
        }
    };
    let channels = fmt.channels as usize;
    let frame = bytes_per_sample * channels;
    if fmt.block_align as usize != frame {
        return Err(malformed(
            data_at,
            format!("block align {} does not match {frame}", fmt.block_align),
        ));
    }
    let frames = data_len / frame;
    if frames == 0 {
        return Err(AudioError::EmptyAudio);
    }

    let data = &bytes[data_at..data_at + frames * frame];
    let read = |s: &[u8]| -> f64 {
        match (fmt.tag, bytes_per_sample) {
            (FORMAT_PCM, 1) => (s[0] as f64 - 128.0) / 128.0,
            (FORMAT_PCM, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
            (FORMAT_PCM, 3) => {
                let v = i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            (FORMAT_PCM, 4) => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0,
            (_, 4) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
            _ => f64::from_le_bytes(s.try_into().expect("8-byte sample")),
        }
    };
    let samples: Vec<f64> = data
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(bytes_per_sample).map(read).sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, fmt.rate)
}

/// Encodes mono samples as a canonical 44-byte-header WAV file. Integer
/// formats round to the nearest code and saturate at full scale.
pub fn encode_wav(samples: &[f64], sample_rate: u32, format: SampleFormat) -> Vec<u8> {
    let bits = format.bits();
    let bytes_per_sample = bits as usize / 8;
    let data_len = samples.len() * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len + 1);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len + (data_len & 1)) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    let tag = if format == SampleFormat::Float32 {
        FORMAT_FLOAT
    } else {
        FORMAT_PCM
    };
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * bytes_per_sample as u32).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    let quantize = |s: f64, full: f64| (s * full).round().clamp(-full, full - 1.0);
    for &s in samples {
        match format {
            SampleFormat::Pcm8 => out.push((quantize(s, 128.0) + 128.0) as u8),
            SampleFormat::Pcm16 => out.extend_from_slice(&(quantize(s, 32768.0) as i16).to_le_bytes()),
            SampleFormat::Pcm24 => {
                let v = quantize(s, 8_388_608.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            SampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pcm16(channels: u16, rate: u32, frames: &[i16]) -> Vec<u8> {
        let data: Vec<u8> = frames.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        b.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        b.extend_from_slice(&(2 * channels).to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(&data);
        b
    }

    #[test]
    fn decodes_pcm16_mono() {
        let clip = decode_wav(&pcm16(1, 8000, &[0, 16384, -16384])).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -0.5]);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn averages_stereo() {
        // left at full scale, right silent
        let clip = decode_wav(&pcm16(2, 8000, &[32767, 0, 32767, 0])).unwrap();
        for &s in clip.samples() {
            assert!((s - 0.5).abs() < 1e-4);
        }
        let clip = decode_wav(&encode_stereo_float(&[1.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(clip.samples(), &[0.5, 0.5]);
    }

    fn encode_stereo_float(interleaved: &[f32]) -> Vec<u8> {
        let mut b = encode_wav(&[0.0; 2], 8000, SampleFormat::Float32);
        // patch to two channels, same data length
        b[22..24].copy_from_slice(&2u16.to_le_bytes());
        b[28..32].copy_from_slice(&(8000u32 * 8).to_le_bytes());
        b[32..34].copy_from_slice(&8u16.to_le_bytes());
        b.truncate(36);
        b.extend_from_slice(b"data");
        b.extend_from_slice(&((interleaved.len() * 4) as u32).to_le_bytes());
        for v in interleaved {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn truncated_data_is_an_error() {
        let mut b = pcm16(1, 8000, &[1, 2, 3, 4]);
        b.truncate(b.len() - 3);
        match decode_wav(&b) {
            Err(AudioError::Decode { offset, .. }) => assert_eq!(offset, 44),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn header_errors_name_offsets() {
        assert!(matches!(decode_wav(b"RIFF"), Err(AudioError::Decode { offset: 4, .. })));
        let mut b = pcm16(1, 8000, &[1]);
        b[8] = b'X';
        assert!(matches!(decode_wav(&b), Err(AudioError::Decode { offset: 8, .. })));
    }

    #[test]
    fn empty_data_chunk() {
        assert!(matches!(decode_wav(&pcm16(1, 8000, &[])), Err(AudioError::EmptyAudio)));
    }

    #[test]
    fn non_pcm_is_unsupported() {
        let mut b = pcm16(1, 8000, &[1, 2]);
        b[20..22].copy_from_slice(&6u16.to_le_bytes()); // A-law
        assert!(matches!(decode_wav(&b), Err(AudioError::UnsupportedFormat(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let b = pcm16(1, 8000, &[16384]);
        let mut with_list = b[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]); // odd size plus pad byte
        with_list.extend_from_slice(&b[36..]);
        assert_eq!(decode_wav(&with_list).unwrap().samples(), &[0.5]);
    }

    proptest! {
        #[test]
        fn reencode_within_one_step(v in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            for (fmt, step) in [
                (SampleFormat::Pcm8, 1.0 / 128.0),
                (SampleFormat::Pcm16, 1.0 / 32768.0),
                (SampleFormat::Pcm24, 1.0 / 8_388_608.0),
            ] {
                let once = decode_wav(&encode_wav(&v, 8000, fmt)).unwrap();
                let twice = decode_wav(&encode_wav(once.samples(), 8000, fmt)).unwrap();
                prop_assert_eq!(once.samples(), twice.samples());
                for (a, b) in v.iter().zip(once.samples()) {
                    prop_assert!((a - b).abs() <= step);
                }
            }
        }
    }
}
