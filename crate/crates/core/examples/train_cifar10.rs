//! The full CIFAR-10 recipe: batch 256, momentum 0.9, weight decay 5e-4,
//! 200 epochs at 0.1 then 50 each at 0.01 and 0.001, crop/flip/rotate
//! augmentation, dropout 0.5. Pass a smaller epoch count to try it out.
//!
//! LRUNET_DATA=/data cargo run --release --example train_cifar10 -- 14 1.0 300

use lrunet::arch::NetworkSpec;
use lrunet::data::{load_cifar10, DATA_DIR_ENV};
use lrunet::train::{train, RunFiles, Schedule, TrainConfig};

fn main() -> lrunet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let reuse = args.first().and_then(|s| s.parse().ok()).unwrap_or(14);
    let width = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let dir = std::env::var_os(DATA_DIR_ENV)
        .ok_or_else(|| lrunet::Error::Config(format!("set {DATA_DIR_ENV} to the CIFAR-10 directory")))?;
    let (train_set, test_set) = load_cifar10(&dir)?;

    let spec = NetworkSpec::cifar10(reuse, width);
    let cfg = TrainConfig {
        schedule: Schedule::default().with_total_epochs(epochs),
        ..TrainConfig::default()
    };
    let run = format!("runs/{}", spec.name());
    std::fs::create_dir_all(&run).map_err(|e| lrunet::Error::Config(e.to_string()))?;
    let out = train(&spec, &cfg, &train_set, Some(&test_set), &RunFiles::in_dir(&run))?;
    let last = out.final_metrics().expect("at least one epoch");
    println!("{}: test accuracy {:.2}% (best {:.2}%), metrics in {run}", spec.name(), last.val_acc.unwrap_or(0.0) * 100.0, out.best_acc * 100.0);
    Ok(())
}
