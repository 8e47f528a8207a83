//! Every intermediate activation shape of a forward pass.
//!
//! cargo run --example shape_trace -- fashion-mnist

use lrunet::arch::{Network, NetworkSpec};
use lrunet::{Shape4, Tensor4};

fn main() -> lrunet::Result<()> {
    let spec = match std::env::args().nth(1).as_deref() {
        Some("fashion-mnist") => NetworkSpec::fashion_mnist(2, 1.0),
        _ => NetworkSpec::cifar10(2, 1.0),
    };
    let i = spec.input;
    let net = Network::<f32>::new(spec, 0)?;
    let x = Tensor4::full(Shape4::new(1, i.channels, i.height, i.width), 0.5)?;
    println!("{:<26} ({}x{}x{})", "input", i.channels, i.height, i.width);
    for entry in net.forward_trace(&x)? {
        let s = entry.value.shape();
        println!("{:<26} {}x{}x{}", entry.name, s.c, s.h, s.w);
    }
    Ok(())
}
