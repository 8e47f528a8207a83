use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor4};

/// Mean softmax cross-entropy over the batch.
///
/// `logits` is `(batch, classes, 1, 1)`. Returns the loss and its gradient
/// `(softmax - onehot) / batch` in the logits' shape.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor4<T>, labels: &[usize]) -> Result<(T, Tensor4<T>)> {
    let s = logits.shape();
    if s.h != 1 || s.w != 1 {
        return Err(Error::Shape(format!("cross-entropy: logits must be (n, k, 1, 1), got {s}")));
    }
    if labels.len() != s.n {
        return Err(Error::Shape(format!(
            "cross-entropy: {} labels for a batch of {}",
            labels.len(),
            s.n
        )));
    }
    let k = s.c;
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let inv_n = T::ONE / T::from_usize(s.n);
    let mut grad = logits.zeros_like();
    let mut loss = T::ZERO;
    for (n, &label) in labels.iter().enumerate() {
        let row = &logits.data()[n * k..(n + 1) * k];
        let max = row.iter().copied().fold(T::NEG_INFINITY, T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let z: T = exps.iter().copied().sum();
        loss += z.ln() - (row[label] - max);
        let g = &mut grad.data_mut()[n * k..(n + 1) * k];
        for (j, (gj, &e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / z;
            *gj = (if j == label { p - T::ONE } else { p }) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// Index of the largest logit per sample; ties resolve to the lowest class.
pub fn argmax_rows<T: Scalar>(logits: &Tensor4<T>) -> Vec<usize> {
    let k = logits.shape().c;
    logits
        .data()
        .chunks(k)
        .map(|row| {
            let mut best = 0;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor4::<f64>::full((3, 10, 1, 1), 0.3).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 4, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((loss - 2.302585).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_is_near_zero() {
        let mut logits = Tensor4::<f64>::zeros((1, 10, 1, 1)).unwrap();
        logits.set(0, 3, 0, 0, 1e6);
        let (loss, _) = softmax_cross_entropy(&logits, &[3]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor4::from_vec((2, 4, 1, 1), vec![0.1f64, -2.0, 3.0, 0.7, 1.0, 1.5, -0.5, 0.0]).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[2, 0]).unwrap();
        for row in g.data().chunks(4) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor4::<f32>::zeros((1, 10, 1, 1)).unwrap();
        assert!(matches!(softmax_cross_entropy(&logits, &[10]), Err(Error::Data(_))));
    }

    #[test]
    fn argmax() {
        let logits = Tensor4::from_vec((2, 3, 1, 1), vec![0.0f32, 2.0, 2.0, 5.0, 1.0, 0.0]).unwrap();
        assert_eq!(argmax_rows(&logits), vec![1, 0]);
    }
}
