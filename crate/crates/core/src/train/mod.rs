//! Mini-batch SGD training, evaluation and the learning-rate schedule.

pub mod augment;
pub mod sgd;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{Network, NetworkSpec};
use crate::data::{Checkpoint, LabeledImageSet, Normalization};
use crate::error::{Error, Result};
use crate::ops::{argmax_rows, softmax_cross_entropy};
use crate::tensor::{Shape4, Tensor4};

pub use augment::{augment, AugmentConfig, AugmentParams};
pub use sgd::{sgd_step, Sgd};

/// A run of `epochs` epochs at a fixed learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub epochs: usize,
    pub lr: f64,
}

/// Piecewise-constant learning rate stepped at epoch boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule(pub Vec<Phase>);

impl Default for Schedule {
    fn default() -> Self {
        Schedule(vec![
            Phase { epochs: 200, lr: 0.1 },
            Phase { epochs: 50, lr: 0.01 },
            Phase { epochs: 50, lr: 0.001 },
        ])
    }
}

impl Schedule {
    pub fn constant(epochs: usize, lr: f64) -> Self {
        Schedule(vec![Phase { epochs, lr }])
    }

    pub fn total_epochs(&self) -> usize {
        self.0.iter().map(|p| p.epochs).sum()
    }

    /// Learning rate of 1-based `epoch`; epochs past the end keep the last rate.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut end = 0;
        for p in &self.0 {
            end += p.epochs;
            if epoch <= end {
                return p.lr;
            }
        }
        self.0.last().map_or(0.0, |p| p.lr)
    }

    /// The same rates over exactly `epochs` epochs: later phases are cut off,
    /// or the final phase is extended.
    pub fn with_total_epochs(&self, epochs: usize) -> Self {
        let mut out = Vec::new();
        let mut left = epochs;
        for p in &self.0 {
            if left == 0 {
                break;
            }
            let take = p.epochs.min(left);
            out.push(Phase { epochs: take, lr: p.lr });
            left -= take;
        }
        if left > 0 {
            if let Some(last) = out.last_mut() {
                last.epochs += left;
            }
        }
        Schedule(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() || self.total_epochs() == 0 {
            return Err(Error::Config("schedule has no epochs".into()));
        }
        if let Some(p) = self.0.iter().find(|p| !(p.lr > 0.0 && p.lr.is_finite())) {
            return Err(Error::Config(format!("learning rate {} must be positive", p.lr)));
        }
        Ok(())
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `"200:0.1,50:0.01,50:0.001"`
    fn from_str(s: &str) -> Result<Self> {
        let phases = s
            .split(',')
            .map(|part| {
                let (e, lr) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("schedule phase `{part}` is not EPOCHS:LR")))?;
                let epochs = e.trim().parse().map_err(|_| Error::Config(format!("bad epoch count `{e}`")))?;
                let lr = lr.trim().parse().map_err(|_| Error::Config(format!("bad learning rate `{lr}`")))?;
                Ok(Phase { epochs, lr })
            })
            .collect::<Result<Vec<_>>>()?;
        let sched = Schedule(phases);
        sched.validate()?;
        Ok(sched)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| format!("{}:{}", p.epochs, p.lr)).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub sgd: Sgd,
    pub schedule: Schedule,
    /// Overrides the network spec's dropout rate when set.
    pub dropout: Option<f64>,
    pub seed: u64,
    pub augment: AugmentConfig,
    /// Stop after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Stop at the end of the first epoch whose train accuracy reaches this.
    pub target_train_acc: Option<f64>,
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            sgd: Sgd::default(),
            schedule: Schedule::default(),
            dropout: None,
            seed: 0,
            augment: AugmentConfig::default(),
            max_steps: None,
            target_train_acc: None,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size {} too small; batch norm needs at least 2 samples",
                self.batch_size
            )));
        }
        if self.eval_batch_size == 0 {
            return Err(Error::Config("eval batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sgd.momentum) || self.sgd.weight_decay < 0.0 {
            return Err(Error::Config("momentum must be in [0,1) and weight decay non-negative".into()));
        }
        if let Some(d) = self.dropout {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Config(format!("dropout rate {d} outside [0,1)")));
            }
        }
        self.schedule.validate()
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub steps: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Where a run writes its artifacts; `None` entries are skipped.
#[derive(Clone, Debug, Default)]
pub struct RunFiles {
    pub metrics: Option<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
    pub best_checkpoint: Option<PathBuf>,
    /// Leave wall-clock seconds out of the metrics so reruns are byte-identical.
    pub omit_timing: bool,
}

impl RunFiles {
    /// `metrics.jsonl`, `final.ckpt` and `best.ckpt` under `dir`.
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        RunFiles {
            metrics: Some(dir.join("metrics.jsonl")),
            final_checkpoint: Some(dir.join("final.ckpt")),
            best_checkpoint: Some(dir.join("best.ckpt")),
            omit_timing: false,
        }
    }
}

pub struct TrainOutcome {
    pub network: Network<f32>,
    pub normalization: Normalization,
    pub history: Vec<EpochMetrics>,
    pub steps: usize,
    /// Best validation accuracy, or best train accuracy without a validation set.
    pub best_acc: f64,
}

impl TrainOutcome {
    pub fn final_metrics(&self) -> Option<&EpochMetrics> {
        self.history.last()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_network(&self.network, self.normalization.clone())
    }
}

/// Builds a normalized `(n, C, H, W)` batch, optionally augmented.
pub fn make_batch(
    set: &LabeledImageSet,
    indices: &[usize],
    norm: &Normalization,
    augment: Option<(&AugmentConfig, &mut ChaCha8Rng)>,
) -> Result<(Tensor4<f32>, Vec<usize>)> {
    let (c, h, w) = (set.channels, set.height, set.width);
    let per = set.image_len();
    let mut data = Vec::with_capacity(indices.len() * per);
    let mut aug = augment;
    for &i in indices {
        let start = data.len();
        data.extend(set.image(i).iter().map(|&p| p as f32 / 255.0));
        let img = &mut data[start..];
        if let Some((cfg, rng)) = aug.as_mut() {
            if !cfg.is_identity() {
                augment::augment(img, c, h, w, cfg, &mut **rng);
            }
        }
        norm.apply(img);
    }
    let labels = indices.iter().map(|&i| set.labels[i]).collect();
    Ok((Tensor4::from_vec(Shape4::new(indices.len(), c, h, w), data)?, labels))
}

fn check_compat(spec: &NetworkSpec, set: &LabeledImageSet) -> Result<()> {
    let i = spec.input;
    if (i.channels, i.height, i.width) != (set.channels, set.height, set.width) {
        return Err(Error::Config(format!(
            "network expects {}x{}x{} images but the dataset holds {}x{}x{}",
            i.channels, i.height, i.width, set.channels, set.height, set.width
        )));
    }
    if spec.num_classes != set.num_classes {
        return Err(Error::Config(format!(
            "network has {} outputs but the dataset has {} classes",
            spec.num_classes, set.num_classes
        )));
    }
    Ok(())
}

/// Top-1 accuracy in eval mode. The result does not depend on `batch_size`.
pub fn evaluate(net: &Network<f32>, set: &LabeledImageSet, norm: &Normalization, batch_size: usize) -> Result<f64> {
    check_compat(net.spec(), set)?;
    let predictions = predict(net, set, norm, batch_size)?;
    Ok(accuracy(&predictions, &set.labels))
}

pub fn predict(net: &Network<f32>, set: &LabeledImageSet, norm: &Normalization, batch_size: usize) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return Err(Error::Config("eval batch size must be positive".into()));
    }
    let all: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in all.chunks(batch_size) {
        let (x, _) = make_batch(set, chunk, norm, None)?;
        out.extend(argmax_rows(&net.forward_eval(&x)?));
    }
    Ok(out)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Trains a freshly initialised network on `train_set`.
///
/// Each epoch reshuffles the sample order from the seeded stream. A final
/// short batch of one sample is dropped since batch norm cannot normalize it.
/// If `val_set` is given its eval-mode accuracy is logged per epoch and picks
/// the best checkpoint; otherwise the train accuracy does.
pub fn train(
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    train_set: &LabeledImageSet,
    val_set: Option<&LabeledImageSet>,
    files: &RunFiles,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut spec = spec.clone();
    if let Some(d) = cfg.dropout {
        spec.dropout = d;
    }
    spec.validate()?;
    train_set.validate()?;
    check_compat(&spec, train_set)?;
    if let Some(v) = val_set {
        check_compat(&spec, v)?;
    }
    if train_set.len() < 2 {
        return Err(Error::Data("training needs at least 2 samples".into()));
    }

    let norm = Normalization::from_dataset(train_set);
    let mut net = Network::<f32>::new(spec, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED_0F_DA7A));
    let mut metrics = match &files.metrics {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            Some((BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?), p.clone()))
        }
        None => None,
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut steps = 0usize;
    let mut best = f64::NEG_INFINITY;
    let started = Instant::now();

    'epochs: for epoch in 1..=cfg.schedule.total_epochs() {
        let lr = cfg.schedule.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits, mut seen) = (0.0f64, 0usize, 0usize);
        let mut stop = false;
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let (x, labels) = make_batch(train_set, batch, &norm, Some((&cfg.augment, &mut rng)))?;
            let logits = net.forward_train(&x)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
            net.backward(&dlogits)?;
            cfg.sgd.step(net.store_mut(), lr)?;
            steps += 1;
            loss_sum += loss as f64 * batch.len() as f64;
            hits += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
            seen += batch.len();
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                stop = true;
                break;
            }
        }
        let train_acc = hits as f64 / seen.max(1) as f64;
        let val_acc = match val_set {
            Some(v) => Some(evaluate(&net, v, &norm, cfg.eval_batch_size)?),
            None => None,
        };
        let m = EpochMetrics {
            epoch,
            lr,
            steps,
            train_loss: loss_sum / seen.max(1) as f64,
            train_acc,
            val_acc,
            seconds: (!files.omit_timing).then(|| started.elapsed().as_secs_f64()),
        };
        if let Some((w, p)) = metrics.as_mut() {
            let line = serde_json::to_string(&m).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(|e| Error::io(p.as_path(), e))?;
        }
        let score = val_acc.unwrap_or(train_acc);
        if score > best {
            best = score;
            if let Some(p) = &files.best_checkpoint {
                Checkpoint::from_network(&net, norm.clone()).save(p)?;
            }
        }
        history.push(m);
        if stop || cfg.target_train_acc.is_some_and(|t| train_acc >= t) {
            break 'epochs;
        }
    }

    if let Some(p) = &files.final_checkpoint {
        Checkpoint::from_network(&net, norm.clone()).save(p)?;
    }
    Ok(TrainOutcome {
        network: net,
        normalization: norm,
        history,
        steps,
        best_acc: best,
    })
}
