//! Ten epochs of 1-LruNet-0.5x on Fashion-MNIST at a constant learning rate
//! of 0.1, reporting test accuracy after every epoch.
//!
//! LRUNET_DATA=/data/fashion-mnist cargo run --release --example train_fashion_mnist

use lrunet::arch::NetworkSpec;
use lrunet::data::{load_fashion_mnist, DATA_DIR_ENV};
use lrunet::train::{train, RunFiles, Schedule, TrainConfig};

fn main() -> lrunet::Result<()> {
    let dir = std::env::var_os(DATA_DIR_ENV)
        .ok_or_else(|| lrunet::Error::Config(format!("set {DATA_DIR_ENV} to the Fashion-MNIST directory")))?;
    let (train_set, test_set) = load_fashion_mnist(&dir)?;
    let cfg = TrainConfig {
        schedule: Schedule::constant(10, 0.1),
        ..TrainConfig::default()
    };
    let files = RunFiles::in_dir("runs/fashion-1x-0.5");
    std::fs::create_dir_all("runs/fashion-1x-0.5").map_err(|e| lrunet::Error::Config(e.to_string()))?;
    let out = train(&NetworkSpec::fashion_mnist(1, 0.5), &cfg, &train_set, Some(&test_set), &files)?;
    for m in &out.history {
        println!(
            "epoch {:>2}  loss {:.4}  train {:.2}%  test {:.2}%  {:.0}s",
            m.epoch,
            m.train_loss,
            m.train_acc * 100.0,
            m.val_acc.unwrap_or(0.0) * 100.0,
            m.seconds.unwrap_or(0.0)
        );
    }
    Ok(())
}
