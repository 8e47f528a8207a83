use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor4};

pub fn relu<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Gradient of [`relu`] given the forward input `x`. The subgradient at 0 is 0.
pub fn relu_backward<T: Scalar>(x: &Tensor4<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    x.zip_map(dy, |v, g| if v > T::ZERO { g } else { T::ZERO })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must lie in [0,1), got {rate}")));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Inverted dropout. Returns the output and the per-element scale mask
    /// (0 or `1 / (1 - rate)`), which is `None` when the op is an identity.
    pub fn forward_train<T: Scalar, R: Rng + ?Sized>(
        &self,
        x: &Tensor4<T>,
        rng: &mut R,
    ) -> (Tensor4<T>, Option<Tensor4<T>>) {
        if self.rate == 0.0 {
            return (x.clone(), None);
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mut mask = x.zeros_like();
        for m in mask.data_mut() {
            if rng.gen::<f64>() >= self.rate {
                *m = keep;
            }
        }
        let y = x.zip_map(&mask, |a, b| a * b).expect("mask shares the input shape");
        (y, Some(mask))
    }

    pub fn backward<T: Scalar>(mask: Option<&Tensor4<T>>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        match mask {
            Some(m) => dy.zip_map(m, |g, s| g * s),
            None => Ok(dy.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(v: &[f64]) -> Tensor4<f64> {
        Tensor4::from_vec((1, v.len(), 1, 1), v.to_vec()).unwrap()
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(&t(&[-1.0, 0.0, 2.0])).data(), &[0.0, 0.0, 2.0]);
        assert!(relu(&t(&[-3.0, -0.5])).data().iter().all(|&v| v == 0.0));
        let x = t(&[-2.0, 1.0, 0.3, -0.1]);
        assert_eq!(relu(&relu(&x)), relu(&x));
    }

    #[test]
    fn relu_grad() {
        let x = t(&[-1.0, 2.0]);
        let dy = t(&[1.0, 1.0]);
        assert_eq!(relu_backward(&x, &dy).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = t(&[1.0, -2.0, 3.0]);
        let (y, mask) = Dropout::new(0.0).unwrap().forward_train(&x, &mut rng);
        assert_eq!(y, x);
        assert!(mask.is_none());
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = Tensor4::<f64>::full((1, 1, 400, 500), 1.0).unwrap();
        let (y, mask) = Dropout::new(0.5).unwrap().forward_train(&x, &mut rng);
        let mean = y.sum() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let dx = Dropout::backward(mask.as_ref(), &x).unwrap();
        assert_eq!(dx, y);
    }
}
