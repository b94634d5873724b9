//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kws_core::audio::resample;
use kws_core::corpus::{
    split_manifest, synth_dataset, synth_stream, Language, Split, SplitMode, SynthSpec, UtteranceRecord,
};
use kws_core::detector::{detect, frequency_report, SpotConfig};
use kws_core::model::{build_dense_baseline, build_kws_cnn, decode_checkpoint, encode_checkpoint, TrainingMetadata};
use kws_core::nn::{conv1d, grad_check, grad_check_softmax_cross_entropy, maxpool1d, Layer, LayerSpec, Scalar, Tensor};
use kws_core::training::{evaluate, load_dataset, simulate_early_stopping, train, Dataset, EvalReport, TrainConfig};
use kws_core::{AudioClip, ModelGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

type Verdict = Result<String, String>;

const GRAD_TOL: f64 = 1e-4;
const GRAD_SEEDS: u64 = 25;
const ORACLE_SHAPES: u64 = 100;
const STREAM_TOLERANCE_S: f64 = 0.5;
// keeps the inclusive ±0.5 s bound robust to the binary representation of window times
const TIME_SLACK: f64 = 1e-9;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, started: Instant) -> Result<(), String> {
    let spent = started.elapsed();
    ensure(spent < budget, || format!("took {spent:.1?}, budget {budget:?}"))
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_layer(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Layer<f64> {
    let params = spec.param_shapes().iter().map(|s| random_tensor(s, rng)).collect();
    Layer::with_params(spec, params).unwrap()
}

/// Values separated by at least `gap` in magnitude order, so no finite
/// difference step can swap a max or cross zero.
fn separated(shape: &[usize], gap: f64, signed: bool, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut ranks: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ranks.swap(i, rng.gen_range(0..=i));
    }
    let data = ranks
        .iter()
        .map(|&r| {
            let mag = gap * (r as f64 + 1.0) + rng.gen_range(0.0..gap * 0.25);
            if signed && rng.gen_bool(0.5) {
                -mag
            } else {
                mag
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

fn gradient_correctness() -> Verdict {
    let started = Instant::now();
    let eps = 1e-6;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for seed in 0..GRAD_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let batch = rng.gen_range(1..=2);

        let (cin, cout, k, stride) = (
            rng.gen_range(1..=3),
            rng.gen_range(1..=4),
            rng.gen_range(1..=5),
            rng.gen_range(1..=2),
        );
        let len = k + rng.gen_range(0..12);
        let conv = random_layer(
            LayerSpec::Conv1d {
                in_channels: cin,
                out_channels: cout,
                kernel: k,
                stride,
            },
            &mut rng,
        );
        let x = random_tensor(&[batch, cin, len], &mut rng);
        note("conv1d", grad_check(&conv, &x, eps, seed).map_err(|e| e.to_string())?);

        let (width, pstride) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let len = width + rng.gen_range(0..12);
        let pool = Layer::zeros(LayerSpec::MaxPool1d { width, stride: pstride });
        let x = separated(&[batch, rng.gen_range(1..=3), len], 0.05, true, &mut rng);
        note(
            "maxpool1d",
            grad_check(&pool, &x, eps, seed).map_err(|e| e.to_string())?,
        );

        let (fin, fout) = (rng.gen_range(1..=12), rng.gen_range(1..=8));
        let dense = random_layer(
            LayerSpec::Dense {
                in_features: fin,
                out_features: fout,
            },
            &mut rng,
        );
        let x = random_tensor(&[batch, fin], &mut rng);
        note("dense", grad_check(&dense, &x, eps, seed).map_err(|e| e.to_string())?);

        let relu = Layer::zeros(LayerSpec::Relu);
        let x = separated(&[batch, rng.gen_range(1..=16)], 0.05, true, &mut rng);
        note("relu", grad_check(&relu, &x, eps, seed).map_err(|e| e.to_string())?);

        let classes = rng.gen_range(2..=10);
        let logits = random_tensor(&[batch, classes], &mut rng).cast::<f64>();
        let logits = Tensor::new(logits.shape(), logits.data().iter().map(|v| 4.0 * v).collect()).unwrap();
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        note(
            "softmax-ce",
            grad_check_softmax_cross_entropy(&logits, &labels, eps).map_err(|e| e.to_string())?,
        );
    }
    let summary = worst
        .iter()
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let bad: Vec<_> = worst
        .iter()
        .filter(|(_, &v)| v.is_nan() || v >= GRAD_TOL)
        .map(|(k, _)| *k)
        .collect();
    ensure(bad.is_empty(), || format!("{bad:?} above {GRAD_TOL:e}: {summary}"))?;
    within(Duration::from_secs(60), started)?;
    Ok(format!("{GRAD_SEEDS} seeds each, worst relative error: {summary}"))
}

fn naive_conv<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, stride: usize) -> Vec<T> {
    let (batch, cin, len) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kw) = (w.shape()[0], w.shape()[2]);
    let lout = (len - kw) / stride + 1;
    let mut out = Vec::new();
    for bi in 0..batch {
        for co in 0..cout {
            for t in 0..lout {
                let mut acc = b.data()[co];
                for ci in 0..cin {
                    for k in 0..kw {
                        acc += w.data()[(co * cin + ci) * kw + k] * x.data()[(bi * cin + ci) * len + t * stride + k];
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn naive_pool<T: Scalar>(x: &Tensor<T>, width: usize, stride: usize) -> Vec<T> {
    let (rows, len) = (x.shape()[0] * x.shape()[1], x.shape()[2]);
    let lout = (len - width) / stride + 1;
    let mut out = Vec::new();
    for r in 0..rows {
        for t in 0..lout {
            let window = &x.data()[r * len + t * stride..][..width];
            out.push(window.iter().copied().fold(window[0], |m, v| if v > m { v } else { m }));
        }
    }
    out
}

fn oracle_case<T: Scalar>(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let batch = rng.gen_range(1..=3);
    let (cin, cout, k, stride) = (
        rng.gen_range(1..=4),
        rng.gen_range(1..=6),
        rng.gen_range(1..=13),
        rng.gen_range(1..=3),
    );
    let len = k + rng.gen_range(0..64);
    let x = random_tensor(&[batch, cin, len], rng).cast::<T>();
    let w = random_tensor(&[cout, cin, k], rng).cast::<T>();
    let b = random_tensor(&[cout], rng).cast::<T>();
    let got = conv1d(&x, &w, &b, stride).map_err(|e| e.to_string())?;
    ensure(got.data() == naive_conv(&x, &w, &b, stride).as_slice(), || {
        format!("conv1d mismatch for x{:?} w{:?} stride {stride}", x.shape(), w.shape())
    })?;

    let (width, pstride) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
    let len = width + rng.gen_range(0..64);
    // coarse values make ties common, which the oracle must also agree on
    let x = Tensor::new(
        &[batch, cin, len],
        (0..batch * cin * len).map(|_| rng.gen_range(-4i32..4) as f64).collect(),
    )
    .unwrap()
    .cast::<T>();
    let (got, _) = maxpool1d(&x, width, pstride).map_err(|e| e.to_string())?;
    ensure(got.data() == naive_pool(&x, width, pstride).as_slice(), || {
        format!("maxpool1d mismatch for x{:?} width {width} stride {pstride}", x.shape())
    })
}

fn oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..ORACLE_SHAPES {
        oracle_case::<f64>(&mut rng)?;
        oracle_case::<f32>(&mut rng)?;
    }
    within(Duration::from_secs(30), started)?;
    Ok(format!("{ORACLE_SHAPES} random shapes at f64 and f32, bitwise equal"))
}

struct Synthetic {
    _dir: tempfile::TempDir,
    spec: SynthSpec,
    train: Dataset,
    val: Dataset,
    test: Dataset,
}

const DATA_SEED: u64 = 42;
const MODEL_SEED: u64 = 1;

fn synthetic_split() -> Result<Synthetic, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec::default();
    let records = synth_dataset(&spec, DATA_SEED, dir.path()).map_err(|e| e.to_string())?;
    let records =
        split_manifest(&records, [0.64, 0.16, 0.20], SplitMode::ByUtterance, DATA_SEED).map_err(|e| e.to_string())?;
    let label_map = spec.label_map();
    let part = |s: Split| {
        let chosen: Vec<_> = records.iter().filter(|r| r.split == Some(s)).cloned().collect();
        load_dataset(&chosen, dir.path(), &label_map, spec.frame_len).map_err(|e| e.to_string())
    };
    let (train, val, test) = (part(Split::Train)?, part(Split::Val)?, part(Split::Test)?);
    Ok(Synthetic {
        _dir: dir,
        spec,
        train,
        val,
        test,
    })
}

fn synthetic_table(cnn_slot: &mut Option<(ModelGraph<f32>, SynthSpec)>) -> Verdict {
    let started = Instant::now();
    let data = synthetic_split()?;
    let cfg = TrainConfig {
        seed: MODEL_SEED,
        ..TrainConfig::default()
    };
    let label_map = data.spec.label_map();
    let fit = |mut model: ModelGraph<f32>| -> Result<(ModelGraph<f32>, f64, usize), String> {
        let history = train(&mut model, &data.train, &data.val, &cfg).map_err(|e| e.to_string())?;
        let acc = evaluate(&model, &data.test).map_err(|e| e.to_string())?.accuracy;
        Ok((model, acc, history.epochs.len()))
    };
    let cnn = build_kws_cnn(data.spec.frame_len, &label_map, MODEL_SEED).map_err(|e| e.to_string())?;
    let (cnn, cnn_acc, cnn_epochs) = fit(cnn)?;
    let dense = build_dense_baseline(data.spec.frame_len, &label_map, MODEL_SEED).map_err(|e| e.to_string())?;
    let (_, dense_acc, dense_epochs) = fit(dense)?;
    *cnn_slot = Some((cnn, data.spec.clone()));

    let detail = format!(
        "kws-cnn test acc {cnn_acc:.4} ({cnn_epochs} epochs), dense {dense_acc:.4} ({dense_epochs} epochs), \
         gap {:.4}, {} test clips, {:.0?}",
        cnn_acc - dense_acc,
        data.test.len(),
        started.elapsed()
    );
    ensure(cnn_acc >= 0.95, || format!("kws-cnn below 0.95: {detail}"))?;
    ensure(cnn_acc - dense_acc >= 0.05, || {
        format!("dense baseline not worse by 0.05: {detail}")
    })?;
    within(Duration::from_secs(15 * 60), started)?;
    Ok(detail)
}

/// Independent statement of the rule: the run stops `patience` epochs after
/// the last strict improvement, if the sequence is long enough.
fn expected_stop(losses: &[f64], patience: usize) -> (Option<usize>, usize) {
    let mut best = 1;
    for (i, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best - 1] {
            best = i + 1;
        }
        if i + 1 - best >= patience {
            return (Some(i + 1), best);
        }
    }
    if losses.len() >= best + patience {
        (Some(best + patience), best)
    } else {
        (None, best)
    }
}

fn early_stopping() -> Verdict {
    let started = Instant::now();
    let mut shaped: Vec<f64> = (1..=20).map(|e| 1.0 / e as f64).collect();
    shaped.extend((0..10).map(|i| 0.05 + 0.001 * i as f64));
    shaped.extend([0.01, 0.001]);
    type Script = (Vec<f64>, usize, (Option<usize>, usize));
    let scripted: Vec<Script> = vec![
        (shaped, 10, (Some(30), 20)),
        (vec![1.0; 15], 10, (Some(11), 1)),
        (vec![3.0, 2.0, 1.0], 10, (None, 3)),
        (vec![1.0, 0.5, 0.5, 0.5, 0.4, 0.4, 0.4, 0.4], 3, (Some(8), 5)),
        (vec![5.0, 4.0, 6.0, 3.0, 7.0, 7.0], 2, (Some(6), 4)),
    ];
    for (losses, patience, want) in &scripted {
        let got = simulate_early_stopping(losses, *patience).map_err(|e| e.to_string())?;
        ensure(got == *want && expected_stop(losses, *patience) == *want, || {
            format!("patience {patience} on {losses:?}: got {got:?}, want {want:?}")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let patience = rng.gen_range(1..=12);
        let len = rng.gen_range(1..=60);
        let losses: Vec<f64> = (0..len).map(|_| rng.gen_range(0..20) as f64 / 10.0).collect();
        let got = simulate_early_stopping(&losses, patience).map_err(|e| e.to_string())?;
        let want = expected_stop(&losses, patience);
        ensure(got == want, || {
            format!("patience {patience} on {losses:?}: got {got:?}, want {want:?}")
        })?;
        if let (Some(stop), best) = got {
            ensure(stop == best + patience, || {
                format!("stop {stop} != best {best} + {patience}")
            })?;
        }
    }
    within(Duration::from_secs(1), started)?;
    Ok(format!(
        "{} scripted sequences (30-epoch run stops at 30, best 20) and 1000 random ones",
        scripted.len()
    ))
}

fn streaming_detection(cnn: Option<&(ModelGraph<f32>, SynthSpec)>) -> Verdict {
    let (model, spec) = cnn.ok_or("no trained kws-cnn available from the synthetic training run")?;
    let started = Instant::now();
    let plants: Vec<(usize, f64)> = (0..12).map(|i| (i % 10, 10.0 + 24.0 * i as f64)).collect();
    let (clip, truth) = synth_stream(spec, 300.0, &plants, 7).map_err(|e| e.to_string())?;
    let config = SpotConfig {
        threshold: 0.7,
        ..SpotConfig::default()
    };
    let events = detect(model, &clip, &config).map_err(|e| e.to_string())?;

    let mut used = vec![false; events.len()];
    let mut correct = 0;
    let mut worst_offset = 0.0f64;
    for p in &truth {
        let hit = events.iter().enumerate().position(|(i, e)| {
            !used[i] && e.keyword == p.keyword && (e.start_time - p.start_s).abs() <= STREAM_TOLERANCE_S + TIME_SLACK
        });
        if let Some(i) = hit {
            used[i] = true;
            correct += 1;
            worst_offset = worst_offset.max((events[i].start_time - p.start_s).abs());
        }
    }
    let false_events = used.iter().filter(|u| !**u).count();

    let report = frequency_report("stream", &events);
    let mut expected: BTreeMap<String, usize> = BTreeMap::new();
    for e in &events {
        *expected.entry(e.keyword.clone()).or_default() += 1;
    }
    let detail = format!(
        "{correct}/12 correct (worst offset {worst_offset:.2} s), {false_events} false, {} debounced events, {:.1?}",
        events.len(),
        started.elapsed()
    );
    ensure(correct >= 11, || format!("too few detections: {detail}"))?;
    ensure(false_events <= 1, || format!("too many false events: {detail}"))?;
    ensure(report.counts == expected && report.total() == events.len(), || {
        format!("report counts {:?} disagree with events {expected:?}", report.counts)
    })?;

    let silence = AudioClip::new(vec![0.0; 10 * 8000], 8000).map_err(|e| e.to_string())?;
    let quiet = detect(
        model,
        &silence,
        &SpotConfig {
            threshold: 0.99,
            ..config
        },
    )
    .map_err(|e| e.to_string())?;
    within(Duration::from_secs(120), started)?;
    Ok(format!(
        "{detail}; 10 s of silence gives {} events at 0.99",
        quiet.len()
    ))
}

fn bits(m: &ModelGraph<f32>) -> Vec<u32> {
    m.params()
        .iter()
        .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
        .collect()
}

fn small_dense_run() -> Result<(String, Vec<u32>), String> {
    let spec = SynthSpec {
        classes: 3,
        per_class: 12,
        ..SynthSpec::default()
    };
    let set = kws_core::corpus::synth_clips(&spec, 9).map_err(|e| e.to_string())?;
    let (mut train_set, mut val_set) = (Dataset::new(spec.frame_len), Dataset::new(spec.frame_len));
    for (i, c) in set.clips.iter().enumerate() {
        let clip = AudioClip::new(c.samples.clone(), 8000).map_err(|e| e.to_string())?;
        let target = if i % 4 == 0 { &mut val_set } else { &mut train_set };
        target.push_clip(&clip, c.label).map_err(|e| e.to_string())?;
    }
    let mut model = build_dense_baseline(spec.frame_len, &set.label_map, 3).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 8,
        seed: 11,
        ..TrainConfig::default()
    };
    let history = train(&mut model, &train_set, &val_set, &cfg).map_err(|e| e.to_string())?;
    Ok((history.to_csv(), bits(&model)))
}

fn fft_peak_bin(x: &[f64]) -> usize {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    (0..buf.len() / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap()
}

fn random_manifest(rng: &mut ChaCha8Rng) -> Vec<UtteranceRecord> {
    let speakers = rng.gen_range(3..=25);
    let keywords = rng.gen_range(1..=6);
    (0..rng.gen_range(speakers..=240))
        .map(|i| {
            let kw = format!("k{}", rng.gen_range(0..keywords));
            let spk = if i < speakers { i } else { rng.gen_range(0..speakers) };
            UtteranceRecord {
                path: format!("{kw}/s{spk}_{i}.wav"),
                keyword: kw,
                speaker_id: format!("s{spk}"),
                language: Language::Luganda,
                split: None,
            }
        })
        .collect()
}

fn check_split(records: &[UtteranceRecord], ratios: [f64; 3], mode: SplitMode, seed: u64) -> Result<(), String> {
    let out = split_manifest(records, ratios, mode, seed).map_err(|e| e.to_string())?;
    ensure(out.len() == records.len(), || "split changed the record count".into())?;
    for (a, b) in records.iter().zip(&out) {
        ensure(a.path == b.path && b.split.is_some(), || {
            format!("{} lost or reordered", a.path)
        })?;
    }
    let mut counts = [0usize; 3];
    let mut home: HashMap<&str, Split> = HashMap::new();
    for r in &out {
        let s = r.split.unwrap();
        counts[s.index()] += 1;
        if mode == SplitMode::BySpeaker {
            let prev = *home.entry(r.speaker_id.as_str()).or_insert(s);
            ensure(prev == s, || format!("speaker {} in both {prev} and {s}", r.speaker_id))?;
        }
    }
    match mode {
        SplitMode::ByUtterance => {
            for s in 0..3 {
                let exact = records.len() as f64 * ratios[s];
                ensure((counts[s] as f64 - exact).abs() < 1.0 + 1e-9, || {
                    format!("split {s} has {} records, exact share {exact}", counts[s])
                })?;
            }
        }
        SplitMode::BySpeaker => {
            let used: HashSet<Split> = home.values().copied().collect();
            ensure(used.len() == 3, || "a speaker-disjoint split is empty".into())?;
        }
    }
    Ok(())
}

fn determinism_and_round_trips() -> Verdict {
    let started = Instant::now();
    let (h1, p1) = small_dense_run()?;
    let (h2, p2) = small_dense_run()?;
    ensure(h1 == h2 && p1 == p2, || "two seeded runs diverged".into())?;

    let spec = SynthSpec::default();
    let cnn = build_kws_cnn(spec.frame_len, &spec.label_map(), 77).map_err(|e| e.to_string())?;
    let meta = TrainingMetadata {
        epochs_run: 3,
        best_epoch: Some(2),
        best_val_loss: Some(0.25),
        seed: Some(77),
    };
    let back = decode_checkpoint(&encode_checkpoint(&cnn, &meta)).map_err(|e| e.to_string())?;
    ensure(bits(&back.model) == bits(&cnn) && back.metadata == meta, || {
        "checkpoint round trip changed bits".into()
    })?;
    ensure(
        back.model.label_map == cnn.label_map && back.model.specs() == cnn.specs(),
        || "checkpoint round trip changed the graph".into(),
    )?;

    let mut tones = 0;
    for (rate, freq) in [
        (16000u32, 440.0),
        (44100, 440.0),
        (22050, 1000.0),
        (11025, 3000.0),
        (48000, 2500.0),
        (8000, 440.0),
    ] {
        let n = rate as usize;
        let s = (0..n)
            .map(|i| 0.8 * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        let out = resample(&AudioClip::new(s, rate).unwrap(), 8000).map_err(|e| e.to_string())?;
        let bin = fft_peak_bin(out.samples());
        let expected = freq * out.len() as f64 / 8000.0;
        ensure((bin as f64 - expected).abs() <= 1.0, || {
            format!("{freq} Hz at {rate} Hz landed in bin {bin}, expected {expected}")
        })?;
        tones += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..1000u64 {
        let records = random_manifest(&mut rng);
        let a = rng.gen_range(0.3..0.9);
        let b = rng.gen_range(0.0..1.0 - a) * 0.9 + 0.01;
        let ratios = [a, b, 1.0 - a - b];
        let mode = if i % 2 == 0 {
            SplitMode::BySpeaker
        } else {
            SplitMode::ByUtterance
        };
        check_split(&records, ratios, mode, i)?;
    }
    Ok(format!(
        "identical histories and weights, bitwise checkpoint, {tones} tones within one bin, 1000 manifests split exactly ({:.1?})",
        started.elapsed()
    ))
}

fn metric_definitions() -> Verdict {
    let names: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
    let truth: Vec<usize> = (0..100).map(|i| i / 10).collect();
    let r = EvalReport::from_predictions(&names, &truth, &[0; 100]).map_err(|e| e.to_string())?;
    let got = (r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1);
    let want = (0.1, 0.01, 0.1, 0.01818181818181818);
    ensure(got == want, || {
        format!("constant predictor: got {got:?}, want {want:?}")
    })?;

    let truth = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2];
    let pred = [0, 0, 1, 2, 1, 1, 0, 2, 2, 1];
    let r = EvalReport::from_predictions(&names[..3], &truth, &pred).map_err(|e| e.to_string())?;
    let got = (r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1);
    let want = (0.6, 0.611111111111111, 0.611111111111111, 0.6031746031746033);
    ensure(got == want, || format!("three-class set: got {got:?}, want {want:?}"))?;
    ensure(r.confusion == vec![vec![2, 1, 1], vec![1, 2, 0], vec![0, 1, 2]], || {
        "confusion matrix differs".into()
    })?;

    let truth = [0, 1, 2, 3];
    let r = EvalReport::from_predictions(&names[..4], &truth, &truth).map_err(|e| e.to_string())?;
    ensure(
        (r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1) == (1.0, 1.0, 1.0, 1.0),
        || "perfect predictor not 1.0".into(),
    )?;
    Ok("constant predictor acc 0.1 macro-P 0.01, three-class and perfect sets exact".into())
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &outcome {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(detail) => println!("FAIL {name}: {detail}"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let mut cnn = None;
    let results = [
        run("1 gradient correctness", gradient_correctness),
        run("2 oracle equivalence", oracle_equivalence),
        run("3 synthetic model comparison", || synthetic_table(&mut cnn)),
        run("4 early stopping", early_stopping),
        run("5 streaming detection", || streaming_detection(cnn.as_ref())),
        run("6 determinism and round trips", determinism_and_round_trips),
        run("7 metric definitions", metric_definitions),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
