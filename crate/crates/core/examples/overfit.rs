//! Memorizes 32 random CIFAR-format images with random labels, then scores
//! them in eval mode.

use lrunet::arch::NetworkSpec;
use lrunet::data::{parse_cifar10, Split};
use lrunet::train::{evaluate, train, AugmentConfig, RunFiles, Schedule, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lrunet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bytes = Vec::new();
    for _ in 0..32 {
        bytes.push(rng.gen_range(0..10u8));
        bytes.extend((0..3072).map(|_| rng.gen::<u8>()));
    }
    let set = parse_cifar10(&bytes, Split::Train)?;

    let cfg = TrainConfig {
        batch_size: 32,
        schedule: Schedule::constant(200, 0.05),
        dropout: Some(0.0),
        augment: AugmentConfig::none(),
        ..TrainConfig::default()
    };
    let out = train(&NetworkSpec::cifar10(2, 0.25), &cfg, &set, None, &RunFiles::default())?;
    for m in out.history.iter().filter(|m| m.epoch % 20 == 0 || m.epoch == 1) {
        println!("step {:>3}  loss {:>8.4}  batch acc {:>6.2}%", m.steps, m.train_loss, m.train_acc * 100.0);
    }
    println!("eval-mode accuracy: {:.2}%", 100.0 * evaluate(&out.network, &set, &out.normalization, 32)?);
    Ok(())
}
