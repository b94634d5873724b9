//! Layer kernels and the `Layer` wrapper used by models.
//!
//! Convolutions are valid (no padding) cross-correlations: the kernel is not
//! flipped. Output length for both conv and pooling is
//! `floor((L - width) / stride) + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot};
use super::{NnError, Result, Scalar, Tensor};

fn shape_err(msg: impl Into<String>) -> NnError {
    NnError::Shape(msg.into())
}

fn dims3<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [b, c, l] => Ok((b, c, l)),
        ref s => Err(shape_err(format!(
            "{what} must be (batch, channels, length), got {s:?}"
        ))),
    }
}

fn dims2<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [b, f] => Ok((b, f)),
        ref s => Err(shape_err(format!("{what} must be (batch, features), got {s:?}"))),
    }
}

fn window_count(len: usize, width: usize, stride: usize) -> Result<usize> {
    if stride == 0 {
        return Err(NnError::Argument("stride must be at least 1".into()));
    }
    if width == 0 || width > len {
        return Err(shape_err(format!("window {width} does not fit length {len}")));
    }
    Ok((len - width) / stride + 1)
}

/// Valid 1D cross-correlation. `weight` is `(out, in, kernel)`, `bias` is `(out)`.
pub fn conv1d<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>, stride: usize) -> Result<Tensor<T>> {
    let (batch, cin, len) = dims3(input, "conv1d input")?;
    let (cout, wcin, kw) = dims3(weight, "conv1d weight")?;
    if wcin != cin {
        return Err(shape_err(format!("conv1d expects {wcin} input channels, got {cin}")));
    }
    if bias.shape() != [cout] {
        return Err(shape_err(format!(
            "conv1d bias must be ({cout}), got {:?}",
            bias.shape()
        )));
    }
    let lout = window_count(len, kw, stride)?;
    let x = input.data();
    let w = weight.data();
    let mut out = vec![T::zero(); batch * cout * lout];
    for b in 0..batch {
        for co in 0..cout {
            let row = &mut out[(b * cout + co) * lout..][..lout];
            row.fill(bias.data()[co]);
            for ci in 0..cin {
                let xr = &x[(b * cin + ci) * len..][..len];
                let wr = &w[(co * cin + ci) * kw..][..kw];
                for (k, &wk) in wr.iter().enumerate() {
                    if stride == 1 {
                        axpy(row, wk, &xr[k..k + lout]);
                    } else {
                        for (t, o) in row.iter_mut().enumerate() {
                            *o += wk * xr[t * stride + k];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[batch, cout, lout], out)
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv1d`]. The input gradient is skipped when
/// `need_input_grad` is false (first layer of a network).
pub fn conv1d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    need_input_grad: bool,
) -> Result<Conv1dGrads<T>> {
    let (batch, cin, len) = dims3(input, "conv1d input")?;
    let (cout, _, kw) = dims3(weight, "conv1d weight")?;
    let lout = window_count(len, kw, stride)?;
    if grad_out.shape() != [batch, cout, lout] {
        return Err(shape_err(format!(
            "conv1d grad_out must be {:?}, got {:?}",
            [batch, cout, lout],
            grad_out.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); cout];
    let mut gx = if need_input_grad {
        vec![T::zero(); x.len()]
    } else {
        Vec::new()
    };
    let mut strided = vec![T::zero(); lout];

    for b in 0..batch {
        for co in 0..cout {
            let gr = &g[(b * cout + co) * lout..][..lout];
            gb[co] += gr.iter().copied().sum::<T>();
            for ci in 0..cin {
                let xr = &x[(b * cin + ci) * len..][..len];
                let base = (co * cin + ci) * kw;
                for k in 0..kw {
                    let xs: &[T] = if stride == 1 {
                        &xr[k..k + lout]
                    } else {
                        for (t, s) in strided.iter_mut().enumerate() {
                            *s = xr[t * stride + k];
                        }
                        &strided
                    };
                    gw[base + k] += dot(gr, xs);
                }
                if need_input_grad {
                    let gxr = &mut gx[(b * cin + ci) * len..][..len];
                    for k in 0..kw {
                        let wk = w[base + k];
                        if stride == 1 {
                            axpy(&mut gxr[k..k + lout], wk, gr);
                        } else {
                            for (t, &gt) in gr.iter().enumerate() {
                                gxr[t * stride + k] += wk * gt;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Conv1dGrads {
        input: if need_input_grad {
            Some(Tensor::new(input.shape(), gx)?)
        } else {
            None
        },
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(&[cout], gb)?,
    })
}

/// Max-pooling over the length axis. Returns the pooled tensor and, for each
/// output element, the flat input index of the winning sample (earliest on ties).
pub fn maxpool1d<T: Scalar>(input: &Tensor<T>, width: usize, stride: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let (batch, ch, len) = dims3(input, "maxpool1d input")?;
    let lout = window_count(len, width, stride)?;
    let x = input.data();
    let mut out = Vec::with_capacity(batch * ch * lout);
    let mut arg = Vec::with_capacity(batch * ch * lout);
    for row in 0..batch * ch {
        let base = row * len;
        for t in 0..lout {
            let start = base + t * stride;
            let mut best = start;
            for i in start + 1..start + width {
                if x[i] > x[best] {
                    best = i;
                }
            }
            out.push(x[best]);
            arg.push(best);
        }
    }
    Ok((Tensor::new(&[batch, ch, lout], out)?, arg))
}

pub fn maxpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(shape_err("maxpool1d grad_out does not match forward output"));
    }
    let mut gx = Tensor::zeros(input_shape);
    let d = gx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(gx)
}

/// `input · weightᵀ + bias` with `weight` shaped `(out, in)`.
pub fn dense<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, fin) = dims2(input, "dense input")?;
    let (fout, win) = dims2(weight, "dense weight")?;
    if win != fin {
        return Err(shape_err(format!("dense expects {win} input features, got {fin}")));
    }
    if bias.shape() != [fout] {
        return Err(shape_err(format!(
            "dense bias must be ({fout}), got {:?}",
            bias.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let mut out = Vec::with_capacity(batch * fout);
    for b in 0..batch {
        let xr = &x[b * fin..][..fin];
        for o in 0..fout {
            out.push(bias.data()[o] + dot(xr, &w[o * fin..][..fin]));
        }
    }
    Tensor::new(&[batch, fout], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Result<DenseGrads<T>> {
    let (batch, fin) = dims2(input, "dense input")?;
    let (fout, _) = dims2(weight, "dense weight")?;
    if grad_out.shape() != [batch, fout] {
        return Err(shape_err(format!(
            "dense grad_out must be {:?}, got {:?}",
            [batch, fout],
            grad_out.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gw = vec![T::zero(); w.len()];
    let mut gb = vec![T::zero(); fout];
    let mut gx = if need_input_grad {
        vec![T::zero(); x.len()]
    } else {
        Vec::new()
    };
    for b in 0..batch {
        let xr = &x[b * fin..][..fin];
        for o in 0..fout {
            let go = g[b * fout + o];
            gb[o] += go;
            if go == T::zero() {
                continue;
            }
            axpy(&mut gw[o * fin..][..fin], go, xr);
            if need_input_grad {
                axpy(&mut gx[b * fin..][..fin], go, &w[o * fin..][..fin]);
            }
        }
    }
    Ok(DenseGrads {
        input: if need_input_grad {
            Some(Tensor::new(input.shape(), gx)?)
        } else {
            None
        },
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(&[fout], gb)?,
    })
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let data = input
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data).expect("same shape")
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(shape_err("relu grad_out shape mismatch"));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (0 or `1 / (1 - rate)`), which is also the backward mask.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::Argument(format!("dropout rate {rate} not in [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..input.len())
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let data = input.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
    Ok((Tensor::new(input.shape(), data)?, Some(mask)))
}

/// Kind and hyperparameters of one layer, without its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool1d {
        width: usize,
        stride: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

impl LayerSpec {
    /// Per-example output shape for a per-example input shape (batch axis
    /// omitted): `[channels, length]` or `[features]`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match (self, input) {
            (
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                },
                &[c, l],
            ) => {
                if c != *in_channels {
                    return Err(shape_err(format!("conv1d expects {in_channels} channels, got {c}")));
                }
                Ok(vec![*out_channels, window_count(l, *kernel, *stride)?])
            }
            (LayerSpec::MaxPool1d { width, stride }, &[c, l]) => Ok(vec![c, window_count(l, *width, *stride)?]),
            (LayerSpec::Relu | LayerSpec::Dropout { .. }, s) => Ok(s.to_vec()),
            (LayerSpec::Flatten, s) => Ok(vec![s.iter().product()]),
            (
                LayerSpec::Dense {
                    in_features,
                    out_features,
                },
                &[f],
            ) => {
                if f != *in_features {
                    return Err(shape_err(format!("dense expects {in_features} features, got {f}")));
                }
                Ok(vec![*out_features])
            }
            (spec, s) => Err(shape_err(format!("{} cannot take input shape {s:?}", spec.name()))),
        }
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![out_channels, in_channels, kernel], vec![out_channels]],
            LayerSpec::Dense {
                in_features,
                out_features,
            } => vec![vec![out_features, in_features], vec![out_features]],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool1d { .. } => "maxpool1d",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }
}

/// Input gradient (when requested) and parameter gradients.
pub type LayerGrads<T> = (Option<Tensor<T>>, Vec<Tensor<T>>);

/// Whatever a layer's backward pass needs from its forward pass.
#[derive(Debug, Clone)]
pub enum Cache<T> {
    Input(Tensor<T>),
    Argmax {
        input_shape: Vec<usize>,
        argmax: Vec<usize>,
    },
    Mask(Option<Vec<T>>),
    Shape(Vec<usize>),
}

/// A layer with its parameters: `[weight, bias]` for conv and dense, empty
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    pub params: Vec<Tensor<T>>,
}

impl<T: Scalar> Layer<T> {
    /// Builds a layer with zero-valued parameters of the right shapes.
    pub fn zeros(spec: LayerSpec) -> Self {
        let params = spec.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Self { spec, params }
    }

    pub fn with_params(spec: LayerSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() || shapes.iter().zip(&params).any(|(s, p)| p.shape() != &s[..]) {
            return Err(shape_err(format!("parameters do not match {}", spec.name())));
        }
        Ok(Self { spec, params })
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, Cache<T>)> {
        input.check_finite(&format!("{} input", self.spec.name()))?;
        let (out, cache) = match self.spec {
            LayerSpec::Conv1d { stride, .. } => (
                conv1d(input, &self.params[0], &self.params[1], stride)?,
                Cache::Input(input.clone()),
            ),
            LayerSpec::MaxPool1d { width, stride } => {
                let (out, argmax) = maxpool1d(input, width, stride)?;
                (
                    out,
                    Cache::Argmax {
                        input_shape: input.shape().to_vec(),
                        argmax,
                    },
                )
            }
            LayerSpec::Relu => (relu(input), Cache::Input(input.clone())),
            LayerSpec::Dropout { rate } => {
                let (out, mask) = dropout(input, rate, mode, rng)?;
                (out, Cache::Mask(mask))
            }
            LayerSpec::Flatten => {
                let batch = *input.shape().first().ok_or_else(|| shape_err("empty shape"))?;
                let per = input.len() / batch.max(1);
                (
                    input.clone().reshape(&[batch, per])?,
                    Cache::Shape(input.shape().to_vec()),
                )
            }
            LayerSpec::Dense { .. } => (
                dense(input, &self.params[0], &self.params[1])?,
                Cache::Input(input.clone()),
            ),
        };
        out.check_finite(&format!("{} output", self.spec.name()))?;
        Ok((out, cache))
    }

    /// Returns the input gradient (when requested) and parameter gradients in
    /// the same order as `params`.
    pub fn backward(&self, cache: &Cache<T>, grad_out: &Tensor<T>, need_input_grad: bool) -> Result<LayerGrads<T>> {
        match (&self.spec, cache) {
            (LayerSpec::Conv1d { stride, .. }, Cache::Input(x)) => {
                let g = conv1d_backward(x, &self.params[0], grad_out, *stride, need_input_grad)?;
                Ok((g.input, vec![g.weight, g.bias]))
            }
            (LayerSpec::Dense { .. }, Cache::Input(x)) => {
                let g = dense_backward(x, &self.params[0], grad_out, need_input_grad)?;
                Ok((g.input, vec![g.weight, g.bias]))
            }
            (LayerSpec::MaxPool1d { .. }, Cache::Argmax { input_shape, argmax }) => {
                Ok((Some(maxpool1d_backward(input_shape, argmax, grad_out)?), Vec::new()))
            }
            (LayerSpec::Relu, Cache::Input(x)) => Ok((Some(relu_backward(x, grad_out)?), Vec::new())),
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                let g = match mask {
                    None => grad_out.clone(),
                    Some(m) => {
                        let d = grad_out.data().iter().zip(m).map(|(&g, &m)| g * m).collect();
                        Tensor::new(grad_out.shape(), d)?
                    }
                };
                Ok((Some(g), Vec::new()))
            }
            (LayerSpec::Flatten, Cache::Shape(s)) => Ok((Some(grad_out.clone().reshape(s)?), Vec::new())),
            (spec, _) => Err(NnError::Argument(format!("cache does not belong to {}", spec.name()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn conv1d_examples() {
        let x = t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let y = conv1d(&x, &t(&[1, 1, 3], &[1.0, 0.0, -1.0]), &t(&[1], &[0.0]), 1).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0]);
        let id = conv1d(&x, &t(&[1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1).unwrap();
        assert_eq!(id.data(), x.data());
        let s2 = conv1d(&x, &t(&[1, 1, 2], &[1.0, 1.0]), &t(&[1], &[0.5]), 2).unwrap();
        assert_eq!(s2.data(), &[3.5, 7.5]);
    }

    #[test]
    fn conv1d_shape_errors() {
        let x = t(&[1, 2, 4], &[0.0; 8]);
        let w = t(&[1, 1, 3], &[0.0; 3]);
        assert!(matches!(conv1d(&x, &w, &t(&[1], &[0.0]), 1), Err(NnError::Shape(_))));
        let wide = t(&[1, 2, 5], &[0.0; 10]);
        assert!(matches!(conv1d(&x, &wide, &t(&[1], &[0.0]), 1), Err(NnError::Shape(_))));
        let ok = t(&[1, 2, 3], &[0.0; 6]);
        assert!(matches!(
            conv1d(&x, &ok, &t(&[1], &[0.0]), 0),
            Err(NnError::Argument(_))
        ));
    }

    #[test]
    fn maxpool_examples() {
        let (y, arg) = maxpool1d(&t(&[1, 1, 4], &[1.0, 3.0, 2.0, 5.0]), 2, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        assert_eq!(arg, vec![1, 3]);

        // ties go to the earliest index
        let x = t(&[1, 1, 6], &[2.0; 6]);
        let (y, arg) = maxpool1d(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[2.0; 3]);
        let g = maxpool1d_backward(x.shape(), &arg, &t(&[1, 1, 3], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);

        // trailing remainder dropped
        let (y, _) = maxpool1d(&t(&[1, 1, 5], &[0.0, 1.0, 2.0, 3.0, 9.0]), 2, 2).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0]);
        assert!(matches!(
            maxpool1d(&t(&[1, 1, 2], &[0.0; 2]), 3, 1),
            Err(NnError::Shape(_))
        ));
    }

    #[test]
    fn dense_examples() {
        let y = dense(
            &t(&[1, 2], &[1.0, 1.0]),
            &t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]),
            &t(&[2], &[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
        let x = t(&[2, 2], &[0.3, -0.7, 1.5, 2.0]);
        let y = dense(&x, &t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), &t(&[2], &[0.0, 0.0])).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(matches!(
            dense(&x, &t(&[2, 3], &[0.0; 6]), &t(&[2], &[0.0; 2])),
            Err(NnError::Shape(_))
        ));
    }

    #[test]
    fn relu_examples() {
        let x = t(&[3], &[-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&x, &t(&[3], &[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
        let neg = t(&[2], &[-3.0, -0.1]);
        assert_eq!(relu(&neg).data(), &[0.0, 0.0]);
        assert_eq!(relu_backward(&neg, &t(&[2], &[1.0, 1.0])).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t(&[1, 100], &vec![1.5; 100]);
        for mode in [Mode::Train, Mode::Infer] {
            assert_eq!(dropout(&x, 0.0, mode, &mut rng).unwrap().0, x);
        }
        assert_eq!(dropout(&x, 0.5, Mode::Infer, &mut rng).unwrap().0, x);
        assert!(matches!(
            dropout(&x, 1.0, Mode::Train, &mut rng),
            Err(NnError::Argument(_))
        ));
        assert!(matches!(
            dropout(&x, -0.1, Mode::Train, &mut rng),
            Err(NnError::Argument(_))
        ));
    }

    #[test]
    fn dropout_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let x = t(&[1, n], &vec![1.0; n]);
        let (y, _) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((kept - 0.5).abs() < 0.01, "kept {kept}");
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn dropout_seeded() {
        let x = t(&[1, 64], &vec![1.0; 64]);
        let a = dropout(&x, 0.5, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap()
            .0;
        let b = dropout(&x, 0.5, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap()
            .0;
        assert_eq!(a, b);
    }

    #[test]
    fn spec_shapes_and_counts() {
        let conv = LayerSpec::Conv1d {
            in_channels: 2,
            out_channels: 4,
            kernel: 3,
            stride: 2,
        };
        assert_eq!(conv.output_shape(&[2, 11]).unwrap(), vec![4, 5]);
        assert_eq!(conv.param_count(), 4 * 2 * 3 + 4);
        assert!(conv.output_shape(&[3, 11]).is_err());
        assert!(conv.output_shape(&[8]).is_err());
        assert_eq!(LayerSpec::Flatten.output_shape(&[4, 5]).unwrap(), vec![20]);
        let d = LayerSpec::Dense {
            in_features: 20,
            out_features: 3,
        };
        assert_eq!(d.output_shape(&[20]).unwrap(), vec![3]);
        assert_eq!(d.param_count(), 63);
    }

    #[test]
    fn forward_rejects_non_finite() {
        let layer = Layer::<f64>::zeros(LayerSpec::Relu);
        let x = t(&[1, 2], &[1.0, f64::NAN]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            layer.forward(&x, Mode::Infer, &mut rng),
            Err(NnError::NonFinite(_))
        ));
    }
}
