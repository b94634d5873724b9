//! Shared inputs for the benchmarks.

use kws_core::corpus::SynthSpec;
use kws_core::model::build_kws_cnn;
use kws_core::{AudioClip, ModelGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// White noise in [-1, 1).
pub fn noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn noise_clip(secs: f64, rate: u32, seed: u64) -> AudioClip {
    AudioClip::new(noise((secs * rate as f64) as usize, seed), rate).expect("finite samples")
}

/// Untrained ten-class network on one-second frames; inference cost does not
/// depend on the weights.
pub fn cnn() -> ModelGraph<f32> {
    let spec = SynthSpec::default();
    build_kws_cnn(spec.frame_len, &spec.label_map(), 0).expect("default frame fits the network")
}
