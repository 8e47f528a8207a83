//! Parameters, FLOPs and depth as the reuse count grows, for shared and
//! unrolled weights side by side.

use lrunet::accounting::{ceil_k, cost_report};
use lrunet::arch::{NetworkSpec, ReuseMode};

fn main() {
    println!("{:<14} {:>7} {:>9} {:>9} {:>8} {:>6}", "arch", "conv", "shared", "unrolled", "MFLOPs", "depth");
    for n in [1, 2, 4, 6, 8, 10, 12, 14, 16] {
        let shared = cost_report(&NetworkSpec::cifar10(n, 1.0));
        let unrolled = cost_report(&NetworkSpec::cifar10(n, 1.0).with_mode(ReuseMode::Unrolled));
        println!(
            "{:<14} {:>6}k {:>8}k {:>8}k {:>8.2} {:>6}",
            shared.arch,
            ceil_k(shared.conv_params),
            ceil_k(shared.total_params),
            ceil_k(unrolled.total_params),
            shared.mflops(),
            shared.depth
        );
    }
}
