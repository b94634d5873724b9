//! Central finite-difference checks of analytic gradients (64-bit only).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{softmax_cross_entropy, Layer, Mode, Result, Tensor};

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Maximum relative error between the layer's backward pass and central
/// differences of `sum(forward(x) * r)` for a fixed random projection `r`,
/// over every input and parameter coordinate. Dropout layers are checked in
/// train mode with a mask frozen by `seed`.
pub fn grad_check(layer: &Layer<f64>, input: &Tensor<f64>, eps: f64, seed: u64) -> Result<f64> {
    let forward = |l: &Layer<f64>, x: &Tensor<f64>| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        l.forward(x, Mode::Train, &mut rng)
    };
    let (out, cache) = forward(layer, input)?;
    let mut proj_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let proj: Vec<f64> = (0..out.len()).map(|_| proj_rng.gen_range(-1.0..1.0)).collect();
    let grad_out = Tensor::new(out.shape(), proj.clone())?;
    let (grad_in, grad_params) = layer.backward(&cache, &grad_out, true)?;

    let objective = |l: &Layer<f64>, x: &Tensor<f64>| -> Result<f64> {
        let (y, _) = forward(l, x)?;
        Ok(y.data().iter().zip(&proj).map(|(a, b)| a * b).sum())
    };

    let mut worst = 0.0f64;
    if let Some(gi) = grad_in {
        let mut x = input.clone();
        for i in 0..x.len() {
            let orig = x.data()[i];
            x.data_mut()[i] = orig + eps;
            let plus = objective(layer, &x)?;
            x.data_mut()[i] = orig - eps;
            let minus = objective(layer, &x)?;
            x.data_mut()[i] = orig;
            worst = worst.max(relative_error(gi.data()[i], (plus - minus) / (2.0 * eps)));
        }
    }
    let mut probe = layer.clone();
    for (p, gp) in grad_params.iter().enumerate() {
        for i in 0..gp.len() {
            let orig = probe.params[p].data()[i];
            probe.params[p].data_mut()[i] = orig + eps;
            let plus = objective(&probe, input)?;
            probe.params[p].data_mut()[i] = orig - eps;
            let minus = objective(&probe, input)?;
            probe.params[p].data_mut()[i] = orig;
            worst = worst.max(relative_error(gp.data()[i], (plus - minus) / (2.0 * eps)));
        }
    }
    Ok(worst)
}

/// Same check for the softmax cross-entropy gradient with respect to logits.
pub fn grad_check_softmax_cross_entropy(logits: &Tensor<f64>, labels: &[usize], eps: f64) -> Result<f64> {
    let (_, grad) = softmax_cross_entropy(logits, labels)?;
    let mut z = logits.clone();
    let mut worst = 0.0f64;
    for i in 0..z.len() {
        let orig = z.data()[i];
        z.data_mut()[i] = orig + eps;
        let (plus, _) = softmax_cross_entropy(&z, labels)?;
        z.data_mut()[i] = orig - eps;
        let (minus, _) = softmax_cross_entropy(&z, labels)?;
        z.data_mut()[i] = orig;
        worst = worst.max(relative_error(grad.data()[i], (plus - minus) / (2.0 * eps)));
    }
    Ok(worst)
}
