//! Per-channel batch normalization over `(batch, height, width)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    pub eps: f64,
    /// Weight of the current batch in the running-statistics update.
    pub momentum: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        BatchNormConfig {
            eps: 1e-5,
            momentum: 0.1,
        }
    }
}

impl BatchNormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("batchnorm eps must be positive, got {}", self.eps)));
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return Err(Error::Config(format!(
                "batchnorm momentum must lie in (0,1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Borrowed view of one BN layer's affine parameters and running statistics.
pub struct BnParams<'a, T> {
    pub gamma: &'a [T],
    pub beta: &'a [T],
    pub running_mean: &'a [T],
    pub running_var: &'a [T],
}

/// Activations saved by a train-mode forward pass.
#[derive(Clone, Debug)]
pub struct BnCache<T> {
    pub x_hat: Tensor4<T>,
    pub inv_std: Vec<T>,
}

/// Batch statistics produced by a train-mode forward pass; feed them to
/// [`update_running_stats`].
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance.
    pub var: Vec<T>,
    pub count: usize,
}

fn check_channels<T: Scalar>(x: &Tensor4<T>, p: &BnParams<'_, T>) -> Result<()> {
    let c = x.shape().c;
    if p.gamma.len() != c || p.beta.len() != c || p.running_mean.len() != c || p.running_var.len() != c {
        return Err(Error::Shape(format!(
            "batchnorm: {} channels but parameters of length {}/{}/{}/{}",
            x.shape(),
            p.gamma.len(),
            p.beta.len(),
            p.running_mean.len(),
            p.running_var.len()
        )));
    }
    Ok(())
}

pub fn batchnorm_forward_train<T: Scalar>(
    x: &Tensor4<T>,
    p: &BnParams<'_, T>,
    cfg: &BatchNormConfig,
) -> Result<(Tensor4<T>, BnCache<T>, BatchStats<T>)> {
    check_channels(x, p)?;
    let s = x.shape();
    let count = s.n * s.plane();
    if count < 2 {
        return Err(Error::Shape(format!(
            "batchnorm: degenerate statistics, only {count} value per channel in {s}"
        )));
    }
    let m = T::from_usize(count);
    let eps = T::from_f64(cfg.eps);
    let mut mean = vec![T::ZERO; s.c];
    let mut var = vec![T::ZERO; s.c];
    for c in 0..s.c {
        let mut acc = T::ZERO;
        for n in 0..s.n {
            acc += x.plane(n, c).iter().copied().sum::<T>();
        }
        let mu = acc / m;
        let mut sq = T::ZERO;
        for n in 0..s.n {
            for &v in x.plane(n, c) {
                let d = v - mu;
                sq += d * d;
            }
        }
        mean[c] = mu;
        var[c] = sq / m;
    }
    let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + eps).sqrt()).collect();
    let mut x_hat = x.zeros_like();
    let mut y = x.zeros_like();
    for n in 0..s.n {
        for c in 0..s.c {
            let (mu, is, g, b) = (mean[c], inv_std[c], p.gamma[c], p.beta[c]);
            let src = x.plane(n, c);
            for (h, &v) in x_hat.plane_mut(n, c).iter_mut().zip(src) {
                *h = (v - mu) * is;
            }
            let hp = x_hat.plane(n, c).to_vec();
            for (o, h) in y.plane_mut(n, c).iter_mut().zip(hp) {
                *o = g * h + b;
            }
        }
    }
    Ok((y, BnCache { x_hat, inv_std }, BatchStats { mean, var, count }))
}

/// `running <- (1 - momentum) * running + momentum * batch`; the variance
/// update uses the unbiased batch estimate.
pub fn update_running_stats<T: Scalar>(
    running_mean: &mut [T],
    running_var: &mut [T],
    stats: &BatchStats<T>,
    cfg: &BatchNormConfig,
) {
    let mom = T::from_f64(cfg.momentum);
    let keep = T::ONE - mom;
    let unbias = T::from_usize(stats.count) / T::from_usize(stats.count - 1);
    for c in 0..running_mean.len() {
        running_mean[c] = keep * running_mean[c] + mom * stats.mean[c];
        running_var[c] = keep * running_var[c] + mom * stats.var[c] * unbias;
    }
}

pub fn batchnorm_forward_eval<T: Scalar>(x: &Tensor4<T>, p: &BnParams<'_, T>, cfg: &BatchNormConfig) -> Result<Tensor4<T>> {
    check_channels(x, p)?;
    let s = x.shape();
    let eps = T::from_f64(cfg.eps);
    let mut y = x.zeros_like();
    for c in 0..s.c {
        let scale = p.gamma[c] / (p.running_var[c] + eps).sqrt();
        let shift = p.beta[c] - p.running_mean[c] * scale;
        for n in 0..s.n {
            let src = x.plane(n, c);
            for (o, &v) in y.plane_mut(n, c).iter_mut().zip(src) {
                *o = v * scale + shift;
            }
        }
    }
    Ok(y)
}

/// Returns `(dx, dgamma, dbeta)` for a train-mode forward pass.
pub fn batchnorm_backward<T: Scalar>(
    cache: &BnCache<T>,
    gamma: &[T],
    dy: &Tensor4<T>,
) -> Result<(Tensor4<T>, Vec<T>, Vec<T>)> {
    cache.x_hat.expect_same_shape(dy, "batchnorm backward")?;
    let s = dy.shape();
    if gamma.len() != s.c {
        return Err(Error::Shape(format!(
            "batchnorm backward: {} channels, gamma of length {}",
            s.c,
            gamma.len()
        )));
    }
    let m = T::from_usize(s.n * s.plane());
    let mut dgamma = vec![T::ZERO; s.c];
    let mut dbeta = vec![T::ZERO; s.c];
    for c in 0..s.c {
        for n in 0..s.n {
            for (&g, &h) in dy.plane(n, c).iter().zip(cache.x_hat.plane(n, c)) {
                dbeta[c] += g;
                dgamma[c] += g * h;
            }
        }
    }
    let mut dx = dy.zeros_like();
    for c in 0..s.c {
        // dx = gamma * inv_std / m * (m * dy - sum(dy) - x_hat * sum(dy * x_hat))
        let k = gamma[c] * cache.inv_std[c] / m;
        let (sum_dy, sum_dyx) = (dbeta[c], dgamma[c]);
        for n in 0..s.n {
            let g = dy.plane(n, c);
            let h = cache.x_hat.plane(n, c);
            for ((d, &gv), &hv) in dx.plane_mut(n, c).iter_mut().zip(g).zip(h) {
                *d = k * (m * gv - sum_dy - hv * sum_dyx);
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}
