//! The executable network: stem, four reusable blocks with their stage tails,
//! and the classification head.
//!
//! A block applies `depthwise(F -> 2F) -> BN -> grouped pointwise(2F -> F) ->
//! BN -> + shortcut -> ReLU -> half-swap shuffle` and then feeds its output back
//! into itself, `N` times in total. The shuffle is skipped at the last
//! application. Each application owns its two BN layers; the conv pair is one
//! shared set of weights (or one set per application in unrolled mode).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::params::ParamStore;
use super::spec::{NetworkSpec, ReuseMode, StageTail, POINTWISE_GROUPS, STAGE_TAILS};
use crate::error::{Error, Result};
use crate::ops::{
    batchnorm_backward, batchnorm_forward_eval, batchnorm_forward_train, depthwise_conv_backward,
    depthwise_conv_forward, global_avgpool, global_avgpool_backward, pointwise_group_conv_backward,
    pointwise_group_conv_forward, relu, relu_backward, update_running_stats, BatchStats, BnCache, BnParams,
    ChannelShuffle, ConvGeometry, Dropout, MaxPool,
};
use crate::ops::{conv2d_backward, conv2d_forward};
use crate::tensor::{Scalar, Shape4, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug)]
struct BnSlot {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Clone, Copy, Debug)]
struct ConvSlot {
    geom: ConvGeometry,
    weight: usize,
}

#[derive(Clone, Debug)]
struct Block {
    /// One entry in shared mode, `N` in unrolled mode.
    convs: Vec<(ConvSlot, ConvSlot)>,
    bns: Vec<(BnSlot, BnSlot)>,
    shuffle: ChannelShuffle,
    tail: StageTail,
}

impl Block {
    fn convs_at(&self, reuse: usize) -> (ConvSlot, ConvSlot) {
        if self.convs.len() == 1 {
            self.convs[0]
        } else {
            self.convs[reuse]
        }
    }
}

#[derive(Clone, Debug)]
struct Head {
    pw1: ConvSlot,
    pw2: ConvSlot,
    dropout: Dropout,
    window: (usize, usize),
}

struct SiteCache<T> {
    input: Tensor4<T>,
    bn1: BnCache<T>,
    hidden: Tensor4<T>,
    bn2: BnCache<T>,
    pre_relu: Tensor4<T>,
    shuffled: bool,
}

struct TailCache {
    pool: Option<(Shape4, Vec<usize>)>,
    concat_at: Option<usize>,
}

struct StemCache<T> {
    input: Tensor4<T>,
    bn: BnCache<T>,
    pre_relu: Tensor4<T>,
}

struct HeadCache<T> {
    input: Tensor4<T>,
    pre_relu: Tensor4<T>,
    mask: Option<Tensor4<T>>,
    dropped: Tensor4<T>,
    out_shape: Shape4,
}

struct ForwardCache<T> {
    stem: StemCache<T>,
    blocks: Vec<(Vec<SiteCache<T>>, TailCache)>,
    head: HeadCache<T>,
}

/// One named intermediate activation recorded by [`Network::forward_trace`].
#[derive(Clone, Debug)]
pub struct TraceEntry<T> {
    pub name: String,
    pub value: Tensor4<T>,
}

/// State threaded through one forward pass.
struct Pass<'a, T> {
    rng: Option<&'a mut ChaCha8Rng>,
    stats: Vec<(BnSlot, BatchStats<T>)>,
    trace: Option<&'a mut Vec<TraceEntry<T>>>,
}

impl<T: Scalar> Pass<'_, T> {
    fn train(&self) -> bool {
        self.rng.is_some()
    }

    fn record(&mut self, name: impl FnOnce() -> String, value: &Tensor4<T>) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TraceEntry {
                name: name(),
                value: value.clone(),
            });
        }
    }
}

pub struct Network<T: Scalar> {
    spec: NetworkSpec,
    store: ParamStore<T>,
    stem: (ConvSlot, BnSlot),
    blocks: Vec<Block>,
    head: Head,
    rng: ChaCha8Rng,
    cache: Option<ForwardCache<T>>,
}

fn add_bn<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, channels: usize) -> Result<BnSlot> {
    let shape = Shape4::new(channels, 1, 1, 1);
    Ok(BnSlot {
        gamma: store.add_param(format!("{prefix}.gamma"), shape)?,
        beta: store.add_param(format!("{prefix}.beta"), shape)?,
        mean: store.add_buffer(format!("{prefix}.running_mean"), Tensor4::zeros(shape)?)?,
        var: store.add_buffer(format!("{prefix}.running_var"), Tensor4::full(shape, T::ONE)?)?,
    })
}

fn add_conv<T: Scalar>(store: &mut ParamStore<T>, name: String, geom: ConvGeometry) -> Result<ConvSlot> {
    Ok(ConvSlot {
        weight: store.add_param(name, geom.weight_shape())?,
        geom,
    })
}

impl<T: Scalar> Network<T> {
    /// Builds the network and initialises its parameters from `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Self::build(spec)?;
        net.init_parameters(seed);
        Ok(net)
    }

    /// Builds the layer graph with every parameter zeroed and BN statistics at
    /// their identity values.
    pub fn build(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        let mut store = ParamStore::new();

        let stem_geom = ConvGeometry::new(spec.input.channels, widths.stem, 3, 2, 1, 1)?;
        let stem_conv = add_conv(&mut store, "stem.conv.weight".into(), stem_geom)?;
        let stem_bn = add_bn(&mut store, "stem.bn", widths.stem)?;

        let mut blocks = Vec::with_capacity(4);
        let mut channels = widths.stem;
        for (b, (&f, &tail)) in widths.stages.iter().zip(STAGE_TAILS.iter()).enumerate() {
            if channels != f {
                return Err(Error::Config(format!(
                    "block {b} expects {f} channels but receives {channels}"
                )));
            }
            let dw = ConvGeometry::depthwise(f)?;
            let pw = ConvGeometry::pointwise(2 * f, f, POINTWISE_GROUPS)?;
            let mut convs = Vec::new();
            let mut bns = Vec::with_capacity(spec.reuse);
            if spec.reuse_mode == ReuseMode::Shared {
                convs.push((
                    add_conv(&mut store, format!("block{b}.dw.weight"), dw)?,
                    add_conv(&mut store, format!("block{b}.pw.weight"), pw)?,
                ));
            }
            for r in 0..spec.reuse {
                if spec.reuse_mode == ReuseMode::Unrolled {
                    convs.push((
                        add_conv(&mut store, format!("block{b}.reuse{r}.dw.weight"), dw)?,
                        add_conv(&mut store, format!("block{b}.reuse{r}.pw.weight"), pw)?,
                    ));
                }
                bns.push((
                    add_bn(&mut store, &format!("block{b}.reuse{r}.bn1"), 2 * f)?,
                    add_bn(&mut store, &format!("block{b}.reuse{r}.bn2"), f)?,
                ));
            }
            blocks.push(Block {
                convs,
                bns,
                shuffle: ChannelShuffle::half_swap(f, spec.shuffle_groups)?,
                tail,
            });
            channels = match tail {
                StageTail::PoolThenConcat | StageTail::Concat => 2 * f,
                StageTail::Pool => f,
            };
        }

        let pw1 = ConvGeometry::pointwise(channels, widths.head, POINTWISE_GROUPS)?;
        let pw2 = ConvGeometry::pointwise(widths.head, spec.num_classes, 1)?;
        let head = Head {
            pw1: add_conv(&mut store, "head.pw1.weight".into(), pw1)?,
            pw2: add_conv(&mut store, "head.pw2.weight".into(), pw2)?,
            dropout: Dropout::new(spec.dropout)?,
            window: spec.final_map(),
        };

        Ok(Network {
            spec,
            store,
            stem: (stem_conv, stem_bn),
            blocks,
            head,
            rng: ChaCha8Rng::seed_from_u64(0),
            cache: None,
        })
    }

    /// He-normal conv weights (`std = sqrt(2 / fan_in)`), BN `gamma = 1`,
    /// `beta = 0`, running statistics reset, optimizer state cleared. The
    /// dropout stream is reseeded from the same seed.
    pub fn init_parameters(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, p) in self.store.params_mut() {
            let s = p.value.shape();
            if name.ends_with(".weight") {
                let std = (2.0 / (s.c * s.h * s.w) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                for v in p.value.data_mut() {
                    *v = T::from_f64(normal.sample(&mut rng));
                }
            } else if name.ends_with(".gamma") {
                p.value.fill(T::ONE);
            } else {
                p.value.fill(T::ZERO);
            }
            p.grad.fill(T::ZERO);
            p.momentum.fill(T::ZERO);
        }
        for (name, b) in self.store.buffers_mut() {
            b.fill(if name.ends_with(".running_var") { T::ONE } else { T::ZERO });
        }
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD0_0D_5EED);
        self.cache = None;
    }

    pub fn reseed_dropout(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Conv layers applied on a forward pass.
    pub fn depth(&self) -> usize {
        1 + self.blocks.len() * self.spec.reuse * 2 + 2
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let s = x.shape();
        let i = self.spec.input;
        if (s.c, s.h, s.w) != (i.channels, i.height, i.width) {
            return Err(Error::Shape(format!(
                "network expects (n,{},{},{}) input, got {s}",
                i.channels, i.height, i.width
            )));
        }
        Ok(())
    }

    fn bn_forward(&self, slot: BnSlot, x: &Tensor4<T>, pass: &mut Pass<'_, T>) -> Result<(Tensor4<T>, Option<BnCache<T>>)> {
        let p = BnParams {
            gamma: self.store.param(slot.gamma).value.data(),
            beta: self.store.param(slot.beta).value.data(),
            running_mean: self.store.buffer(slot.mean).data(),
            running_var: self.store.buffer(slot.var).data(),
        };
        if pass.train() {
            let (y, cache, stats) = batchnorm_forward_train(x, &p, &self.spec.batchnorm)?;
            pass.stats.push((slot, stats));
            Ok((y, Some(cache)))
        } else {
            Ok((batchnorm_forward_eval(x, &p, &self.spec.batchnorm)?, None))
        }
    }

    fn weight(&self, slot: ConvSlot) -> &Tensor4<T> {
        &self.store.param(slot.weight).value
    }

    fn site_forward(
        &self,
        b: usize,
        r: usize,
        x: Tensor4<T>,
        pass: &mut Pass<'_, T>,
    ) -> Result<(Tensor4<T>, Option<SiteCache<T>>)> {
        let block = &self.blocks[b];
        let n = self.spec.reuse;
        if r >= n {
            return Err(Error::Config(format!("reuse index {r} out of range for N={n}")));
        }
        let (dw, pw) = block.convs_at(r);
        let (bn1, bn2) = block.bns[r];
        let d = depthwise_conv_forward(&x, self.weight(dw), &dw.geom)?;
        let (hidden, c1) = self.bn_forward(bn1, &d, pass)?;
        let p = pointwise_group_conv_forward(&hidden, self.weight(pw), &pw.geom)?;
        let (path, c2) = self.bn_forward(bn2, &p, pass)?;
        let pre_relu = path.add(&x)?;
        let mut y = relu(&pre_relu);
        let shuffled = r + 1 < n;
        if shuffled {
            pass.record(|| format!("block{b}.reuse{r}.unshuffled"), &y);
            y = block.shuffle.forward(&y)?;
        }
        pass.record(|| format!("block{b}.reuse{r}"), &y);
        let cache = match (c1, c2) {
            (Some(bn1), Some(bn2)) => Some(SiteCache {
                input: x,
                bn1,
                hidden,
                bn2,
                pre_relu,
                shuffled,
            }),
            _ => None,
        };
        Ok((y, cache))
    }

    fn run(&self, x: &Tensor4<T>, pass: &mut Pass<'_, T>) -> Result<(Tensor4<T>, Option<ForwardCache<T>>)> {
        self.check_input(x)?;
        let train = pass.train();

        let (stem_conv, stem_bn) = self.stem;
        let s = conv2d_forward(x, self.weight(stem_conv), &stem_conv.geom)?;
        let (s_bn, s_cache) = self.bn_forward(stem_bn, &s, pass)?;
        let mut h = relu(&s_bn);
        pass.record(|| "stem".into(), &h);

        let mut block_caches = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let mut sites = Vec::new();
            for r in 0..self.spec.reuse {
                let (y, c) = self.site_forward(b, r, h, pass)?;
                h = y;
                sites.extend(c);
            }
            let mut tail = TailCache {
                pool: None,
                concat_at: None,
            };
            if matches!(block.tail, StageTail::PoolThenConcat | StageTail::Pool) {
                let in_shape = h.shape();
                let (y, argmax) = MaxPool::STAGE.forward(&h)?;
                h = y;
                pass.record(|| format!("block{b}.pool"), &h);
                if train {
                    tail.pool = Some((in_shape, argmax));
                }
            }
            if matches!(block.tail, StageTail::PoolThenConcat | StageTail::Concat) {
                tail.concat_at = Some(h.shape().c);
                h = Tensor4::concat_channels(&h, &h)?;
                pass.record(|| format!("block{b}.concat"), &h);
            }
            block_caches.push((sites, tail));
        }

        let head = &self.head;
        let pw1_out = pointwise_group_conv_forward(&h, self.weight(head.pw1), &head.pw1.geom)?;
        let act = relu(&pw1_out);
        pass.record(|| "head.pw1".into(), &act);
        let (dropped, mask) = match pass.rng.as_deref_mut() {
            Some(rng) => head.dropout.forward_train(&act, rng),
            None => (act, None),
        };
        let out = pointwise_group_conv_forward(&dropped, self.weight(head.pw2), &head.pw2.geom)?;
        pass.record(|| "head.pw2".into(), &out);
        let logits = global_avgpool(&out, head.window)?;
        pass.record(|| "head.avgpool".into(), &logits);

        let cache = match s_cache {
            Some(bn) if train => Some(ForwardCache {
                stem: StemCache {
                    input: x.clone(),
                    bn,
                    pre_relu: s_bn,
                },
                blocks: block_caches,
                head: HeadCache {
                    input: h,
                    pre_relu: pw1_out,
                    mask,
                    dropped,
                    out_shape: out.shape(),
                },
            }),
            _ => None,
        };
        Ok((logits, cache))
    }

    /// Logits of shape `(batch, classes, 1, 1)`.
    pub fn forward(&mut self, x: &Tensor4<T>, mode: Mode) -> Result<Tensor4<T>> {
        match mode {
            Mode::Train => self.forward_train(x),
            Mode::Eval => self.forward_eval(x),
        }
    }

    /// Train-mode pass: batch statistics, dropout, running-stat updates, and
    /// cached activations for [`Network::backward`].
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut rng = self.rng.clone();
        let mut pass = Pass {
            rng: Some(&mut rng),
            stats: Vec::new(),
            trace: None,
        };
        let (logits, cache) = self.run(x, &mut pass)?;
        let stats = pass.stats;
        self.rng = rng;
        let cfg = self.spec.batchnorm;
        for (slot, st) in stats {
            let mut mean = self.store.buffer(slot.mean).clone();
            let mut var = self.store.buffer(slot.var).clone();
            update_running_stats(mean.data_mut(), var.data_mut(), &st, &cfg);
            *self.store.buffer_mut(slot.mean) = mean;
            *self.store.buffer_mut(slot.var) = var;
        }
        self.cache = cache;
        Ok(logits)
    }

    /// Eval-mode pass using running statistics; dropout is the identity.
    pub fn forward_eval(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut pass = Pass {
            rng: None,
            stats: Vec::new(),
            trace: None,
        };
        Ok(self.run(x, &mut pass)?.0)
    }

    /// Eval-mode pass that records every intermediate activation in order:
    /// `stem`, `block{b}.reuse{r}[.unshuffled]`, `block{b}.pool`,
    /// `block{b}.concat`, `head.pw1`, `head.pw2`, `head.avgpool`.
    pub fn forward_trace(&self, x: &Tensor4<T>) -> Result<Vec<TraceEntry<T>>> {
        let mut trace = Vec::new();
        let mut pass = Pass {
            rng: None,
            stats: Vec::new(),
            trace: Some(&mut trace),
        };
        self.run(x, &mut pass)?;
        Ok(trace)
    }

    /// One eval-mode application of block `block` at reuse site `reuse`.
    pub fn block_forward(&self, block: usize, reuse: usize, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        if block >= self.blocks.len() {
            return Err(Error::Config(format!("block index {block} out of range")));
        }
        let f = self.spec.widths().stages[block];
        if x.shape().c != f {
            return Err(Error::Shape(format!("block {block} expects {f} channels, got {}", x.shape())));
        }
        let mut pass = Pass {
            rng: None,
            stats: Vec::new(),
            trace: None,
        };
        Ok(self.site_forward(block, reuse, x.clone(), &mut pass)?.0)
    }

    fn add_grad(&mut self, index: usize, g: &Tensor4<T>) -> Result<()> {
        self.store.param_mut(index).grad.add_assign(g)
    }

    fn add_bn_grads(&mut self, slot: BnSlot, dgamma: &[T], dbeta: &[T]) {
        for (a, &g) in self.store.param_mut(slot.gamma).grad.data_mut().iter_mut().zip(dgamma) {
            *a += g;
        }
        for (a, &g) in self.store.param_mut(slot.beta).grad.data_mut().iter_mut().zip(dbeta) {
            *a += g;
        }
    }

    fn bn_backward(&mut self, slot: BnSlot, cache: &BnCache<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let (dx, dg, db) = batchnorm_backward(cache, self.store.param(slot.gamma).value.data(), dy)?;
        self.add_bn_grads(slot, &dg, &db);
        Ok(dx)
    }

    /// Back-propagates `dlogits` through the last train-mode forward pass,
    /// accumulating into the store's gradients. Shared conv weights collect
    /// the sum of their contributions from all reuse sites. Returns the
    /// gradient with respect to the network input.
    pub fn backward(&mut self, dlogits: &Tensor4<T>) -> Result<Tensor4<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding train-mode forward".into()))?;

        let head = self.head.clone();
        let hc = cache.head;
        let expected = Shape4::new(hc.out_shape.n, hc.out_shape.c, 1, 1);
        if dlogits.shape() != expected {
            return Err(Error::Shape(format!(
                "backward: dlogits {} but logits are {expected}",
                dlogits.shape()
            )));
        }
        let d = global_avgpool_backward(hc.out_shape, dlogits)?;
        let (d, dw2) = pointwise_group_conv_backward(&hc.dropped, self.weight(head.pw2), &head.pw2.geom, &d)?;
        self.add_grad(head.pw2.weight, &dw2)?;
        let d = Dropout::backward(hc.mask.as_ref(), &d)?;
        let d = relu_backward(&hc.pre_relu, &d)?;
        let (mut d, dw1) = pointwise_group_conv_backward(&hc.input, self.weight(head.pw1), &head.pw1.geom, &d)?;
        self.add_grad(head.pw1.weight, &dw1)?;

        for (b, (sites, tail)) in cache.blocks.into_iter().enumerate().rev() {
            if let Some(at) = tail.concat_at {
                let (a, c) = d.split_channels(at)?;
                d = a.add(&c)?;
            }
            if let Some((shape, argmax)) = tail.pool {
                d = MaxPool::STAGE.backward(shape, &argmax, &d)?;
            }
            let block = self.blocks[b].clone();
            for (r, site) in sites.into_iter().enumerate().rev() {
                if site.shuffled {
                    d = block.shuffle.backward(&d)?;
                }
                let d_sum = relu_backward(&site.pre_relu, &d)?;
                let (dw, pw) = block.convs_at(r);
                let (bn1, bn2) = block.bns[r];
                let d_path = self.bn_backward(bn2, &site.bn2, &d_sum)?;
                let (d_hidden, g_pw) = pointwise_group_conv_backward(&site.hidden, self.weight(pw), &pw.geom, &d_path)?;
                self.add_grad(pw.weight, &g_pw)?;
                let d_dw = self.bn_backward(bn1, &site.bn1, &d_hidden)?;
                let (d_in, g_dw) = depthwise_conv_backward(&site.input, self.weight(dw), &dw.geom, &d_dw)?;
                self.add_grad(dw.weight, &g_dw)?;
                d = d_in.add(&d_sum)?;
            }
        }

        let (stem_conv, stem_bn) = self.stem;
        let sc = cache.stem;
        let d = relu_backward(&sc.pre_relu, &d)?;
        let d = self.bn_backward(stem_bn, &sc.bn, &d)?;
        let (dx, g) = conv2d_backward(&sc.input, self.weight(stem_conv), &stem_conv.geom, &d)?;
        self.add_grad(stem_conv.weight, &g)?;
        self.store.mark_grads_ready();
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.store.zero_grads();
    }

    /// Copy of this network in another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            store: self.store.cast(),
            stem: self.stem,
            blocks: self.blocks.clone(),
            head: self.head.clone(),
            rng: self.rng.clone(),
            cache: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::spec::InputShape;

    fn toy(reuse: usize) -> NetworkSpec {
        NetworkSpec::cifar10(reuse, 0.125)
            .with_input(InputShape { channels: 3, height: 16, width: 16 })
            .with_dropout(0.0)
    }

    #[test]
    fn param_names_follow_scheme() {
        let net = Network::<f32>::build(toy(2)).unwrap();
        let names: Vec<&str> = net.store().params().map(|(n, _)| n).collect();
        assert_eq!(&names[..5], &[
            "stem.conv.weight",
            "stem.bn.gamma",
            "stem.bn.beta",
            "block0.dw.weight",
            "block0.pw.weight"
        ]);
        assert!(names.contains(&"block3.reuse1.bn2.beta"));
        assert_eq!(names.last(), Some(&"head.pw2.weight"));

        let unrolled = Network::<f32>::build(toy(2).with_mode(ReuseMode::Unrolled)).unwrap();
        assert!(unrolled.store().get("block0.reuse1.dw.weight").is_some());
        assert!(unrolled.store().get("block0.dw.weight").is_none());
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut net = Network::<f64>::new(toy(1), 0).unwrap();
        let d = Tensor4::zeros((1, 10, 1, 1)).unwrap();
        assert!(matches!(net.backward(&d), Err(Error::State(_))));
    }

    #[test]
    fn wrong_input_shape() {
        let net = Network::<f32>::new(toy(1), 0).unwrap();
        let x = Tensor4::zeros((1, 3, 32, 32)).unwrap();
        assert!(matches!(net.forward_eval(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Network::<f32>::new(toy(2), 5).unwrap();
        let b = Network::<f32>::new(toy(2), 5).unwrap();
        assert_eq!(a.store(), b.store());
        let c = Network::<f32>::new(toy(2), 6).unwrap();
        assert_ne!(a.store(), c.store());
        for (name, p) in a.store().params() {
            if name.ends_with(".gamma") {
                assert!(p.value.data().iter().all(|&v| v == 1.0));
            }
            if name.ends_with(".beta") {
                assert!(p.value.data().iter().all(|&v| v == 0.0));
            }
        }
    }
}
