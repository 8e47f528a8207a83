//! Per-layer parameter and FLOP table for one architecture.
//!
//! cargo run --example count_params -- 14-LruNet-1x
//! cargo run --example count_params -- 8-LruNet-1x unrolled

use lrunet::accounting::cost_report;
use lrunet::arch::{ArchName, NetworkSpec, ReuseMode};

fn main() -> lrunet::Result<()> {
    let mut args = std::env::args().skip(1);
    let name: ArchName = args.next().as_deref().unwrap_or("14-LruNet-1x").parse()?;
    let mode = match args.next().as_deref() {
        Some("unrolled") => ReuseMode::Unrolled,
        _ => ReuseMode::Shared,
    };
    let spec = NetworkSpec::cifar10(name.reuse, name.width).with_mode(mode);
    spec.validate()?;
    print!("{}", cost_report(&spec).to_text());
    Ok(())
}
