//! Band-limited sample-rate conversion with a Kaiser-windowed sinc kernel.
//!
//! For a rational ratio `up/down` (reduced by the gcd of the two rates), output
//! sample `n` sits at input position `n * down / up`. Its fractional part can
//! take only `up` distinct values, so the kernel taps for every phase are
//! tabulated once and reused (polyphase form). Very large `up` factors fall
//! back to evaluating the kernel per output sample.

use super::{AudioClip, AudioError, Result};

/// Tunables for the windowed-sinc kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplerParams {
    /// Kaiser window shape parameter.
    pub beta: f64,
    /// Kernel zero-crossings on each side of the centre tap.
    pub zero_crossings: usize,
    /// Passband edge as a fraction of the lower of the two Nyquist rates.
    pub cutoff: f64,
}

impl Default for ResamplerParams {
    fn default() -> Self {
        Self {
            beta: 8.6,
            zero_crossings: 64,
            cutoff: 0.95,
        }
    }
}

// Polyphase tables larger than this many taps are not cached.
const MAX_TABLE_TAPS: usize = 1 << 21;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample, relative to the input Nyquist.
    fc: f64,
    /// Half-width in input samples.
    half_width: f64,
    beta: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(in_rate: u32, out_rate: u32, p: &ResamplerParams) -> Self {
        let fc = p.cutoff * (out_rate as f64 / in_rate as f64).min(1.0);
        Self {
            fc,
            half_width: p.zero_crossings as f64 / fc,
            beta: p.beta,
            i0_beta: bessel_i0(p.beta),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let r = x / self.half_width;
        if r.abs() >= 1.0 {
            return 0.0;
        }
        let window = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / self.i0_beta;
        let u = self.fc * x;
        let sinc = if u == 0.0 {
            1.0
        } else {
            (std::f64::consts::PI * u).sin() / (std::f64::consts::PI * u)
        };
        self.fc * sinc * window
    }
}

/// Converts `clip` to `target_rate`. Output length is
/// `round(len * target_rate / rate)`; equal rates return the input unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    resample_with(clip, target_rate, &ResamplerParams::default())
}

pub fn resample_with(clip: &AudioClip, target_rate: u32, params: &ResamplerParams) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(AudioError::Argument("target rate must be positive".into()));
    }
    let in_rate = clip.sample_rate();
    if in_rate == target_rate {
        return Ok(clip.clone());
    }
    let g = gcd(in_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = in_rate as u64 / g;
    let input = clip.samples();
    let in_len = input.len() as u64;
    let out_len = ((2 * in_len * target_rate as u64 + in_rate as u64) / (2 * in_rate as u64)) as usize;

    let kernel = Kernel::new(in_rate, target_rate, params);
    // taps j in [i - reach + 1, i + reach] around the integer position i
    let reach = kernel.half_width.ceil() as i64;
    let taps = (2 * reach) as usize;

    let table: Option<Vec<f64>> = (up as usize * taps <= MAX_TABLE_TAPS).then(|| {
        let mut t = Vec::with_capacity(up as usize * taps);
        for phase in 0..up {
            let frac = phase as f64 / up as f64;
            for k in 0..taps as i64 {
                let offset = k - reach + 1;
                t.push(kernel.eval(frac - offset as f64));
            }
        }
        t
    });

    let mut out = Vec::with_capacity(out_len.max(1));
    for n in 0..out_len as u64 {
        let pos = n * down;
        let i = (pos / up) as i64;
        let phase = pos % up;
        let first = i - reach + 1;
        let lo = first.max(0);
        let hi = (first + taps as i64).min(in_len as i64);
        let mut acc = 0.0;
        match &table {
            Some(t) => {
                let row = &t[phase as usize * taps..(phase as usize + 1) * taps];
                for j in lo..hi {
                    acc += input[j as usize] * row[(j - first) as usize];
                }
            }
            None => {
                let frac = phase as f64 / up as f64;
                for j in lo..hi {
                    acc += input[j as usize] * kernel.eval(frac + (i - j) as f64);
                }
            }
        }
        out.push(acc);
    }
    if out.is_empty() {
        // a clip too short to produce one output sample still yields a sample
        out.push(0.0);
    }
    let mut res = AudioClip::new(out, target_rate)?;
    res.source_id = clip.source_id.clone();
    Ok(res)
}
