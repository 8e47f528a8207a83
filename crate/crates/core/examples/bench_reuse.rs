//! Forward-pass wall time against the reuse count.

use std::time::Instant;

use lrunet::accounting::cost_report;
use lrunet::arch::{Network, NetworkSpec};
use lrunet::{Shape4, Tensor4};

fn main() -> lrunet::Result<()> {
    let width: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let x = Tensor4::full(Shape4::new(8, 3, 32, 32), 0.5f32)?;
    println!("reuse  MFLOPs  ms/batch of 8");
    for n in [1, 2, 4, 8, 12, 16] {
        let spec = NetworkSpec::cifar10(n, width);
        let net = Network::<f32>::new(spec.clone(), 0)?;
        net.forward_eval(&x)?;
        let t = Instant::now();
        for _ in 0..3 {
            net.forward_eval(&x)?;
        }
        let ms = t.elapsed().as_secs_f64() * 1e3 / 3.0;
        println!("{n:>5}  {:>6.2}  {ms:>8.1}", cost_report(&spec).mflops());
    }
    Ok(())
}
