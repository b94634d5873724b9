use super::{NnError, Result, Scalar, Tensor};

/// Row-wise softmax of a `(batch, classes)` tensor, with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let &[batch, k] = logits.shape() else {
        return Err(NnError::Shape(format!(
            "softmax expects (batch, classes), got {:?}",
            logits.shape()
        )));
    };
    let mut out = Vec::with_capacity(batch * k);
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    Tensor::new(&[batch, k], out)
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`), and its
/// gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let &[batch, k] = logits.shape() else {
        return Err(NnError::Shape(format!(
            "cross-entropy expects (batch, classes), got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != batch {
        return Err(NnError::Shape(format!("{} labels for batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(NnError::Argument(format!("label {bad} out of range for {k} classes")));
    }
    logits.check_finite("logits")?;
    let scale = T::one() / T::of(batch as f64);
    let mut grad = Vec::with_capacity(batch * k);
    let mut loss = T::zero();
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[label];
        for (j, &z) in row.iter().enumerate() {
            let p = (z - log_z).exp();
            let target = if j == label { T::one() } else { T::zero() };
            grad.push((p - target) * scale);
        }
    }
    Ok((loss * scale, Tensor::new(&[batch, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let z = Tensor::<f64>::zeros(&[1, 10]);
        let (loss, _) = softmax_cross_entropy(&z, &[3]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_logit_gives_zero_loss() {
        let mut v = vec![0.0; 10];
        v[4] = 50.0;
        let (loss, _) = softmax_cross_entropy(&Tensor::<f64>::from_f64(&[1, 10], &v).unwrap(), &[4]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn label_out_of_range() {
        let z = Tensor::<f64>::zeros(&[2, 3]);
        assert!(matches!(softmax_cross_entropy(&z, &[0, 3]), Err(NnError::Argument(_))));
        assert!(matches!(softmax_cross_entropy(&z, &[0]), Err(NnError::Shape(_))));
    }

    #[test]
    fn gradient_is_scaled_residual() {
        let z = Tensor::<f64>::from_f64(&[2, 2], &[0.0, 0.0, 1.0, -1.0]).unwrap();
        let (_, g) = softmax_cross_entropy(&z, &[0, 1]).unwrap();
        let p = softmax(&z).unwrap();
        let expect = [
            (p.data()[0] - 1.0) / 2.0,
            p.data()[1] / 2.0,
            p.data()[2] / 2.0,
            (p.data()[3] - 1.0) / 2.0,
        ];
        for (a, b) in g.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(v in proptest::collection::vec(-40.0f64..40.0, 12)) {
            let p = softmax(&Tensor::from_f64(&[3, 4], &v).unwrap()).unwrap();
            for row in p.data().chunks(4) {
                prop_assert!(row.iter().all(|&x| x >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
