//! Command-line front end. [`run`] parses arguments, dispatches a subcommand
//! and returns the process exit code: 0 success, 1 invalid input, 2 runtime
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::accounting::cost_report;
use crate::arch::{ArchName, Network, NetworkSpec, ReuseMode};
use crate::data::{self, load_checkpoint, LabeledImageSet, DATA_DIR_ENV};
use crate::error::{Error, Result};
use crate::gradcheck::{check_network, check_ops, toy_spec, Fault, GradCheckConfig};
use crate::tensor::{Shape4, Tensor4};
use crate::train::{self, mean_std, AugmentConfig, RunFiles, Schedule, Sgd, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "lrunet", version, about = "Layer-reuse CNNs: counting, training, evaluation, checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-layer parameter and FLOP table with totals.
    Count(CountArgs),
    /// Train with SGD and write metrics plus final/best checkpoints.
    Train(TrainArgs),
    /// Top-1 accuracy of a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Finite-difference gradient checks in 64-bit precision.
    Gradcheck(GradcheckArgs),
    /// Wall time per forward pass as a function of the reuse count.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    Cifar10,
    Cifar100,
    FashionMnist,
}

impl Dataset {
    pub fn spec(self, reuse: usize, width: f64) -> NetworkSpec {
        match self {
            Dataset::Cifar10 => NetworkSpec::cifar10(reuse, width),
            Dataset::Cifar100 => NetworkSpec::cifar100(reuse, width),
            Dataset::FashionMnist => NetworkSpec::fashion_mnist(reuse, width),
        }
    }

    pub fn load(self, dir: &Path) -> Result<(LabeledImageSet, LabeledImageSet)> {
        match self {
            Dataset::Cifar10 => data::load_cifar10(dir),
            Dataset::Cifar100 => data::load_cifar100(dir),
            Dataset::FashionMnist => data::load_fashion_mnist(dir),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Records,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Corruption {
    ShuffleBackward,
}

#[derive(Args, Debug, Clone)]
pub struct ArchArgs {
    #[arg(long, value_enum, default_value = "cifar10")]
    pub dataset: Dataset,
    /// Number of times each block is applied (N).
    #[arg(long, default_value_t = 1)]
    pub reuse: usize,
    /// Width multiplier (alpha).
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Architecture name such as "14-LruNet-1x"; overrides --reuse and --width.
    #[arg(long)]
    pub arch: Option<String>,
    /// Separate weights at every reuse site instead of sharing them.
    #[arg(long)]
    pub unrolled: bool,
}

impl ArchArgs {
    pub fn spec(&self) -> Result<NetworkSpec> {
        let (reuse, width) = match &self.arch {
            Some(name) => {
                let a: ArchName = name.parse()?;
                (a.reuse, a.width)
            }
            None => (self.reuse, self.width),
        };
        let mode = if self.unrolled { ReuseMode::Unrolled } else { ReuseMode::Shared };
        let spec = self.dataset.spec(reuse, width).with_mode(mode);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
pub struct CountArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Dataset root directory.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
}

impl DataArgs {
    fn dir(&self) -> Result<&Path> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| Error::Config(format!("no data directory: pass --data-dir or set {DATA_DIR_ENV}")))
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for metrics.jsonl, final.ckpt and best.ckpt.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repetitions with seeds seed, seed+1, ...; each writes to OUT/trial{k}.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Learning-rate schedule as EPOCHS:LR pairs.
    #[arg(long, default_value = "200:0.1,50:0.01,50:0.001")]
    pub schedule: String,
    /// Total epochs; truncates the schedule or extends its last phase.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Constant learning rate, replacing the schedule's rates.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    /// Dropout before the classifier; defaults to 0.7 on CIFAR-100, else 0.5.
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Disable crop, flip and rotation.
    #[arg(long)]
    pub no_augment: bool,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Use only the first K training samples.
    #[arg(long)]
    pub limit_train: Option<usize>,
    /// Use only the first K test samples for validation.
    #[arg(long)]
    pub limit_test: Option<usize>,
    /// Skip per-epoch test-set evaluation.
    #[arg(long)]
    pub no_val: bool,
    /// Leave wall time out of the metrics so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "cifar10")]
    pub dataset: Dataset,
    /// Expected architecture name; an explicit error is raised if the checkpoint differs.
    #[arg(long)]
    pub arch: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Seed of the whole-network check.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Skip the whole-network check.
    #[arg(long)]
    pub ops_only: bool,
    #[arg(long, value_enum, hide = true)]
    pub corrupt: Option<Corruption>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "cifar10")]
    pub dataset: Dataset,
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Comma-separated reuse counts.
    #[arg(long, default_value = "1,2,4,8")]
    pub reuse: String,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Timed forward passes per reuse count, after one warm-up pass.
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Count(a) => cmd_count(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

pub fn cmd_count(a: &CountArgs, out: &mut dyn Write) -> Result<i32> {
    let report = cost_report(&a.arch.spec()?);
    let text = match a.format {
        Format::Text => report.to_text(),
        Format::Records => report.to_records(),
    };
    emit(out, &text)?;
    Ok(0)
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut schedule: Schedule = a.schedule.parse()?;
    if let Some(lr) = a.lr {
        for p in &mut schedule.0 {
            p.lr = lr;
        }
    }
    if let Some(e) = a.epochs {
        if e == 0 {
            return Err(Error::Config("--epochs must be positive".into()));
        }
        schedule = schedule.with_total_epochs(e);
    }
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        sgd: Sgd {
            momentum: a.momentum,
            weight_decay: a.weight_decay,
        },
        schedule,
        dropout: a.dropout,
        seed: a.seed,
        augment: if a.no_augment { AugmentConfig::none() } else { AugmentConfig::default() },
        max_steps: a.max_steps,
        target_train_acc: None,
        eval_batch_size: 256,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn limit(set: LabeledImageSet, k: Option<usize>) -> LabeledImageSet {
    match k {
        Some(k) if k < set.len() => set.subset(&(0..k).collect::<Vec<_>>()),
        _ => set,
    }
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = a.arch.spec()?;
    let cfg = train_config(a)?;
    if a.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let dir = a.data.dir()?;
    let (train_set, test_set) = a.arch.dataset.load(dir)?;
    let train_set = limit(train_set, a.limit_train);
    let test_set = limit(test_set, a.limit_test);
    let val = (!a.no_val).then_some(&test_set);

    emit(out, &format!("{} | {} train / {} test | schedule {}\n", spec.name(), train_set.len(), test_set.len(), cfg.schedule))?;
    let mut finals = Vec::with_capacity(a.trials);
    for t in 0..a.trials {
        let run_dir = if a.trials == 1 { a.out.clone() } else { a.out.join(format!("trial{t}")) };
        std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
        let files = RunFiles {
            omit_timing: a.no_timing,
            ..RunFiles::in_dir(&run_dir)
        };
        let trial_cfg = TrainConfig {
            seed: a.seed + t as u64,
            ..cfg.clone()
        };
        let outcome = train::train(&spec, &trial_cfg, &train_set, val, &files)?;
        let last = outcome.final_metrics().expect("at least one epoch");
        let acc = last.val_acc.unwrap_or(last.train_acc);
        finals.push(acc * 100.0);
        emit(
            out,
            &format!(
                "trial {t}: epochs {} steps {} train_loss {:.4} train_acc {:.2} {} {:.2} -> {}\n",
                last.epoch,
                outcome.steps,
                last.train_loss,
                last.train_acc * 100.0,
                if last.val_acc.is_some() { "test_acc" } else { "final_acc" },
                acc * 100.0,
                run_dir.display()
            ),
        )?;
    }
    let (m, s) = mean_std(&finals);
    emit(out, &format!("accuracy over {} trial(s): {m:.2} ± {s:.2}\n", a.trials))?;
    Ok(0)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    if a.batch_size == 0 {
        return Err(Error::Config("--batch-size must be positive".into()));
    }
    let dir = a.data.dir()?.to_path_buf();
    let expected = a.arch.as_deref().map(str::parse::<ArchName>).transpose()?;
    if !a.checkpoint.exists() {
        return Err(Error::Config(format!("checkpoint {} does not exist", a.checkpoint.display())));
    }
    let (net, norm) = load_checkpoint(&a.checkpoint)?;
    if let Some(want) = expected {
        let have = net.spec();
        if have.reuse != want.reuse || have.width != want.width {
            return Err(Error::State(format!(
                "checkpoint holds {} but {} was requested",
                have.name(),
                want
            )));
        }
    }
    let (train_set, test_set) = a.dataset.load(&dir)?;
    let set = match a.split {
        SplitArg::Train => train_set,
        SplitArg::Test => test_set,
    };
    let set = limit(set, a.limit);
    let i = net.spec().input;
    if (i.channels, i.height, i.width, net.spec().num_classes) != (set.channels, set.height, set.width, set.num_classes) {
        return Err(Error::State(format!(
            "checkpoint {} expects {}x{}x{} inputs and {} classes; dataset has {}x{}x{} and {}",
            net.spec().name(),
            i.channels,
            i.height,
            i.width,
            net.spec().num_classes,
            set.channels,
            set.height,
            set.width,
            set.num_classes
        )));
    }
    let acc = train::evaluate(&net, &set, &norm, a.batch_size)?;
    emit(out, &format!("{:.2}\n", acc * 100.0))?;
    Ok(0)
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = GradCheckConfig::default();
    let fault = match a.corrupt {
        Some(Corruption::ShuffleBackward) => Fault::ShuffleBackward,
        None => Fault::None,
    };
    let mut results = check_ops(&cfg, fault)?;
    if !a.ops_only {
        let mut net = check_network(toy_spec(2), a.seed, &cfg)?;
        net.name = "network".into();
        results.push(net);
    }
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut failed = 0;
    for r in &results {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        failed += usize::from(!r.passed());
        emit(out, &format!("{:<width$}  {:.3e}  < {:.0e}  {verdict}\n", r.name, r.worst_rel_err, r.tolerance))?;
    }
    emit(out, &format!("{} checks, {failed} failed\n", results.len()))?;
    Ok(if failed == 0 { 0 } else { 2 })
}

pub fn parse_reuse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("bad reuse count `{p}`")))
        })
        .collect()
}

/// Least-squares line `y = a + b x`; returns `(a, b, r^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (my - b * mx, b, r2)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let counts = parse_reuse_list(&a.reuse)?;
    if a.batch == 0 || a.iters == 0 {
        return Err(Error::Config("--batch and --iters must be positive".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    emit(out, "reuse  mflops     ms/forward\n")?;
    for &n in &counts {
        let spec = a.dataset.spec(n, a.width);
        spec.validate()?;
        let net = Network::<f32>::new(spec.clone(), 0)?;
        let i = spec.input;
        let x = Tensor4::full(Shape4::new(a.batch, i.channels, i.height, i.width), 0.5f32)?;
        net.forward_eval(&x)?;
        let t = Instant::now();
        for _ in 0..a.iters {
            net.forward_eval(&x)?;
        }
        let ms = t.elapsed().as_secs_f64() * 1e3 / a.iters as f64;
        emit(out, &format!("{n:>5}  {:>9.2}  {ms:>10.2}\n", cost_report(&spec).mflops()))?;
        xs.push(n as f64);
        ys.push(ms);
    }
    if xs.len() >= 2 {
        let (a0, b, r2) = linear_fit(&xs, &ys);
        emit(out, &format!("fit: ms = {a0:.2} + {b:.2} * N  (r^2 = {r2:.4})\n"))?;
    }
    Ok(0)
}
