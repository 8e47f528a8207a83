use serde::{Deserialize, Serialize};

use crate::arch::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Momentum SGD with L2 weight decay folded into the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for Sgd {
    fn default() -> Self {
        Sgd {
            momentum: 0.9,
            weight_decay: 5e-4,
        }
    }
}

impl Sgd {
    /// For every parameter, BN scale and shift included:
    /// `g = grad + wd*w; v = momentum*v + g; w -= lr*v`. Gradients are zeroed
    /// afterwards.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>, lr: f64) -> Result<()> {
        if !store.grads_ready() {
            return Err(Error::State("optimizer step without gradients from a backward pass".into()));
        }
        let (mu, wd, lr) = (T::from_f64(self.momentum), T::from_f64(self.weight_decay), T::from_f64(lr));
        for (_, p) in store.params_mut() {
            let values = p.value.data_mut().iter_mut();
            for ((w, g), v) in values.zip(p.grad.data()).zip(p.momentum.data_mut()) {
                let g = *g + wd * *w;
                *v = mu * *v + g;
                *w -= lr * *v;
            }
        }
        store.zero_grads();
        Ok(())
    }
}

pub fn sgd_step<T: Scalar>(store: &mut ParamStore<T>, sgd: &Sgd, lr: f64) -> Result<()> {
    sgd.step(store, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    fn store(w: &[f64], g: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let i = s.add_param("p.weight", Shape4::new(w.len(), 1, 1, 1)).unwrap();
        s.param_mut(i).value.data_mut().copy_from_slice(w);
        s.param_mut(i).grad.data_mut().copy_from_slice(g);
        s.mark_grads_ready();
        s
    }

    #[test]
    fn plain_gradient_step() {
        let mut s = store(&[1.0, -2.0], &[0.25, 0.5]);
        Sgd { momentum: 0.0, weight_decay: 0.0 }.step(&mut s, 1.0).unwrap();
        assert_eq!(s.param(0).value.data(), &[0.75, -2.5]);
        assert!(s.param(0).grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn pure_decay() {
        let mut s = store(&[2.0], &[0.0]);
        Sgd { momentum: 0.0, weight_decay: 5e-4 }.step(&mut s, 0.1).unwrap();
        assert!((s.param(0).value.data()[0] - 2.0 * (1.0 - 5e-5)).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates() {
        let mut s = store(&[0.0], &[1.0]);
        let sgd = Sgd { momentum: 0.9, weight_decay: 0.0 };
        sgd.step(&mut s, 1.0).unwrap();
        s.param_mut(0).grad.data_mut()[0] = 1.0;
        s.mark_grads_ready();
        sgd.step(&mut s, 1.0).unwrap();
        assert!((s.param(0).value.data()[0] + 2.9).abs() < 1e-12);
    }

    #[test]
    fn step_without_backward_is_state_error() {
        let mut s = store(&[1.0], &[1.0]);
        s.zero_grads();
        assert!(matches!(Sgd::default().step(&mut s, 0.1), Err(Error::State(_))));
    }

    #[test]
    fn descends_on_quadratic() {
        // loss = 0.5 * |w - t|^2, grad = w - t
        let t = [0.3, -1.2, 2.0];
        let mut s = store(&[0.0; 3], &[0.0; 3]);
        let loss = |s: &ParamStore<f64>| s.param(0).value.data().iter().zip(&t).map(|(w, t)| 0.5 * (w - t).powi(2)).sum::<f64>();
        let before = loss(&s);
        let grad: Vec<f64> = s.param(0).value.data().iter().zip(&t).map(|(w, t)| w - t).collect();
        s.param_mut(0).grad.data_mut().copy_from_slice(&grad);
        Sgd { momentum: 0.0, weight_decay: 0.0 }.step(&mut s, 0.05).unwrap();
        assert!(loss(&s) < before);
    }
}
