//! Finite-difference gradient checks in 64-bit precision, op by op and for a
//! small whole network.

use lrunet::gradcheck::{check_network, check_ops, toy_spec, Fault, GradCheckConfig};

fn main() -> lrunet::Result<()> {
    let cfg = GradCheckConfig::default();
    for r in check_ops(&cfg, Fault::None)? {
        println!("{:<26} {:.2e}  {}", r.name, r.worst_rel_err, if r.passed() { "ok" } else { "FAIL" });
    }
    let net = check_network(toy_spec(2), 7, &cfg)?;
    println!("{:<26} {:.2e}  {}", "network (N=2, F=8)", net.worst_rel_err, if net.passed() { "ok" } else { "FAIL" });

    // The same suite with a deliberately wrong shuffle backward.
    let broken = check_ops(&cfg, Fault::ShuffleBackward)?;
    let caught = broken.iter().any(|r| r.name == "channel_shuffle_halfswap" && !r.passed());
    println!("corrupted shuffle detected: {caught}");
    Ok(())
}
