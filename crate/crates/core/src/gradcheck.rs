//! Central finite-difference checks of every backward pass, in `f64`.
//!
//! Each op is wrapped into a scalar objective `L(x) = sum(op(x) * R)` for a
//! fixed random cotangent `R`; the analytic gradient from the op's backward
//! function is compared elementwise against `(L(x + h) - L(x - h)) / 2h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{InputShape, Network, NetworkSpec};
use crate::error::Result;
use crate::ops::{self, BatchNormConfig, BnParams, ChannelShuffle, ConvGeometry, Dropout, MaxPool};
use crate::tensor::{Shape4, Tensor4};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub op_tolerance: f64,
    pub network_tolerance: f64,
    pub seeds: Vec<u64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            op_tolerance: 1e-4,
            network_tolerance: 1e-3,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

/// Deliberate corruption of one backward pass, used as a negative control.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Apply the forward permutation instead of its inverse.
    ShuffleBackward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub worst_rel_err: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst_rel_err < self.tolerance
    }
}

/// Below this magnitude both gradients are treated as zero-ish and the error
/// is measured absolutely.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn random(shape: impl Into<Shape4>, rng: &mut ChaCha8Rng) -> Tensor4<f64> {
    let shape = shape.into();
    Tensor4::from_vec(shape, (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("valid shape")
}

/// Values bounded away from zero, so ReLU kinks are never straddled.
fn random_off_zero(shape: impl Into<Shape4>, rng: &mut ChaCha8Rng) -> Tensor4<f64> {
    let mut t = random(shape, rng);
    for v in t.data_mut() {
        *v = v.signum() * (0.1 + v.abs());
    }
    t
}

/// Worst relative error between `analytic` and the central difference of
/// `f` around `x`.
pub fn compare_numeric(
    x: &Tensor4<f64>,
    analytic: &Tensor4<f64>,
    step: f64,
    mut f: impl FnMut(&Tensor4<f64>) -> Result<f64>,
) -> Result<f64> {
    x.expect_same_shape(analytic, "gradcheck")?;
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let up = f(&probe)?;
        probe.data_mut()[i] = orig - step;
        let down = f(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

type OpCheck = fn(&mut ChaCha8Rng, f64, Fault) -> Result<f64>;

fn check_conv_like(rng: &mut ChaCha8Rng, step: f64, x_shape: Shape4, geom: ConvGeometry) -> Result<f64> {
    let x = random(x_shape, rng);
    let w = random(geom.weight_shape(), rng);
    let r = random(geom.output_shape(x_shape)?, rng);
    let (dx, dw) = ops::conv2d_backward(&x, &w, &geom, &r)?;
    let ex = compare_numeric(&x, &dx, step, |x| ops::conv2d_forward(x, &w, &geom)?.dot(&r))?;
    let ew = compare_numeric(&w, &dw, step, |w| ops::conv2d_forward(&x, w, &geom)?.dot(&r))?;
    Ok(ex.max(ew))
}

fn check_conv2d(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    check_conv_like(rng, step, Shape4::new(2, 3, 6, 6), ConvGeometry::new(3, 4, 3, 2, 1, 1)?)
}

fn check_depthwise(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let geom = ConvGeometry::depthwise(3)?;
    let x = random((2, 3, 5, 5), rng);
    let w = random(geom.weight_shape(), rng);
    let r = random(geom.output_shape(x.shape())?, rng);
    let (dx, dw) = ops::depthwise_conv_backward(&x, &w, &geom, &r)?;
    let ex = compare_numeric(&x, &dx, step, |x| ops::depthwise_conv_forward(x, &w, &geom)?.dot(&r))?;
    let ew = compare_numeric(&w, &dw, step, |w| ops::depthwise_conv_forward(&x, w, &geom)?.dot(&r))?;
    Ok(ex.max(ew))
}

fn check_pointwise(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let geom = ConvGeometry::pointwise(16, 8, 8)?;
    let x = random((2, 16, 3, 3), rng);
    let w = random(geom.weight_shape(), rng);
    let r = random(geom.output_shape(x.shape())?, rng);
    let (dx, dw) = ops::pointwise_group_conv_backward(&x, &w, &geom, &r)?;
    let ex = compare_numeric(&x, &dx, step, |x| ops::pointwise_group_conv_forward(x, &w, &geom)?.dot(&r))?;
    let ew = compare_numeric(&w, &dw, step, |w| ops::pointwise_group_conv_forward(&x, w, &geom)?.dot(&r))?;
    Ok(ex.max(ew))
}

fn check_batchnorm(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let c = 3;
    let x = random((2, c, 3, 3), rng);
    let gamma = random((c, 1, 1, 1), rng);
    let beta = random((c, 1, 1, 1), rng);
    let (rm, rv) = (vec![0.0; c], vec![1.0; c]);
    let r = random(x.shape(), rng);
    let cfg = BatchNormConfig::default();
    let eval = |x: &Tensor4<f64>, g: &Tensor4<f64>, b: &Tensor4<f64>| -> Result<f64> {
        let p = BnParams { gamma: g.data(), beta: b.data(), running_mean: &rm, running_var: &rv };
        ops::batchnorm_forward_train(x, &p, &cfg)?.0.dot(&r)
    };
    let p = BnParams { gamma: gamma.data(), beta: beta.data(), running_mean: &rm, running_var: &rv };
    let (_, cache, _) = ops::batchnorm_forward_train(&x, &p, &cfg)?;
    let (dx, dg, db) = ops::batchnorm_backward(&cache, gamma.data(), &r)?;
    let dg = Tensor4::from_vec(gamma.shape(), dg)?;
    let db = Tensor4::from_vec(beta.shape(), db)?;
    let ex = compare_numeric(&x, &dx, step, |x| eval(x, &gamma, &beta))?;
    let eg = compare_numeric(&gamma, &dg, step, |g| eval(&x, g, &beta))?;
    let eb = compare_numeric(&beta, &db, step, |b| eval(&x, &gamma, b))?;
    Ok(ex.max(eg).max(eb))
}

fn check_relu(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let x = random_off_zero((2, 3, 4, 4), rng);
    let r = random(x.shape(), rng);
    let dx = ops::relu_backward(&x, &r)?;
    compare_numeric(&x, &dx, step, |x| ops::relu(x).dot(&r))
}

fn check_maxpool(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let x = random((2, 2, 7, 7), rng);
    let pool = MaxPool::STAGE;
    let (y, argmax) = pool.forward(&x)?;
    let r = random(y.shape(), rng);
    let dx = pool.backward(x.shape(), &argmax, &r)?;
    compare_numeric(&x, &dx, step, |x| pool.forward(x)?.0.dot(&r))
}

fn check_avgpool(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let x = random((2, 5, 2, 2), rng);
    let r = random((2, 5, 1, 1), rng);
    let dx = ops::global_avgpool_backward(x.shape(), &r)?;
    compare_numeric(&x, &dx, step, |x| ops::global_avgpool(x, (2, 2))?.dot(&r))
}

fn check_shuffle(rng: &mut ChaCha8Rng, step: f64, fault: Fault) -> Result<f64> {
    let s = ChannelShuffle::half_swap(16, 8)?;
    let x = random((2, 16, 2, 2), rng);
    let r = random(x.shape(), rng);
    let dx = match fault {
        Fault::ShuffleBackward => s.forward(&r)?,
        Fault::None => s.backward(&r)?,
    };
    compare_numeric(&x, &dx, step, |x| s.forward(x)?.dot(&r))
}

fn check_dropout(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let d = Dropout::new(0.5)?;
    let x = random((2, 4, 3, 3), rng);
    let r = random(x.shape(), rng);
    let mask_seed: u64 = rng.gen();
    let (_, mask) = d.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed));
    let dx = Dropout::backward(mask.as_ref(), &r)?;
    compare_numeric(&x, &dx, step, |x| {
        d.forward_train(x, &mut ChaCha8Rng::seed_from_u64(mask_seed)).0.dot(&r)
    })
}

fn check_cross_entropy(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let logits = random((4, 10, 1, 1), rng);
    let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..10)).collect();
    let (_, g) = ops::softmax_cross_entropy(&logits, &labels)?;
    compare_numeric(&logits, &g, step, |l| Ok(ops::softmax_cross_entropy(l, &labels)?.0))
}

fn check_concat(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    // self-concatenation: the input feeds both halves, so gradients sum
    let x = random((2, 3, 2, 2), rng);
    let r = random((2, 6, 2, 2), rng);
    let (a, b) = r.split_channels(3)?;
    let dx = a.add(&b)?;
    compare_numeric(&x, &dx, step, |x| Tensor4::concat_channels(x, x)?.dot(&r))
}

fn check_add(rng: &mut ChaCha8Rng, step: f64, _: Fault) -> Result<f64> {
    let x = random((2, 3, 2, 2), rng);
    let y = random(x.shape(), rng);
    let r = random(x.shape(), rng);
    compare_numeric(&x, &r, step, |x| x.add(&y)?.dot(&r))
}

pub const OP_CHECKS: [(&str, OpCheck); 12] = [
    ("conv2d", check_conv2d),
    ("depthwise_conv", check_depthwise),
    ("pointwise_group_conv", check_pointwise),
    ("batchnorm", check_batchnorm),
    ("relu", check_relu),
    ("maxpool", check_maxpool),
    ("global_avgpool", check_avgpool),
    ("channel_shuffle_halfswap", check_shuffle),
    ("dropout", check_dropout),
    ("softmax_cross_entropy", check_cross_entropy),
    ("concat_channels", check_concat),
    ("elementwise_add", check_add),
];

/// Runs every op check over all configured seeds; one result per op.
pub fn check_ops(cfg: &GradCheckConfig, fault: Fault) -> Result<Vec<CheckResult>> {
    OP_CHECKS
        .iter()
        .map(|&(name, check)| {
            let mut worst = 0.0f64;
            for &seed in &cfg.seeds {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                worst = worst.max(check(&mut rng, cfg.step, fault)?);
            }
            Ok(CheckResult {
                name: name.to_string(),
                worst_rel_err: worst,
                tolerance: cfg.op_tolerance,
            })
        })
        .collect()
}

/// The small network used for whole-network checks: block widths 8..64,
/// `3x16x16` input, two reuses, no dropout.
pub fn toy_spec(reuse: usize) -> NetworkSpec {
    NetworkSpec::cifar10(reuse, 0.125)
        .with_input(InputShape { channels: 3, height: 16, width: 16 })
        .with_dropout(0.0)
}

/// Finite-difference check of every parameter gradient and of the input
/// gradient of a whole train-mode network under cross-entropy loss.
pub fn check_network(spec: NetworkSpec, seed: u64, cfg: &GradCheckConfig) -> Result<CheckResult> {
    let mut net = Network::<f64>::new(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
    let i = spec.input;
    let batch = 2;
    let x = random((batch, i.channels, i.height, i.width), &mut rng);
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..spec.num_classes)).collect();

    let logits = net.forward_train(&x)?;
    let (_, dlogits) = ops::softmax_cross_entropy(&logits, &labels)?;
    let dx = net.backward(&dlogits)?;

    let loss = |net: &mut Network<f64>, x: &Tensor4<f64>| -> Result<f64> {
        let logits = net.forward_train(x)?;
        Ok(ops::softmax_cross_entropy(&logits, &labels)?.0)
    };

    let mut worst = compare_numeric(&x, &dx, cfg.step, |x| loss(&mut net, x))?;
    let names: Vec<String> = net.store().params().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let p = net.store().get(&name).expect("listed name");
        let (value, grad) = (p.value.clone(), p.grad.clone());
        let err = compare_numeric(&value, &grad, cfg.step, |v| {
            net.store_mut().get_mut(&name).expect("listed name").value = v.clone();
            loss(&mut net, &x)
        })?;
        net.store_mut().get_mut(&name).expect("listed name").value = value;
        worst = worst.max(err);
    }
    Ok(CheckResult {
        name: format!("network {}", spec.name()),
        worst_rel_err: worst,
        tolerance: cfg.network_tolerance,
    })
}
