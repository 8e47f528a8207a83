//! Save a network, load it back, and confirm bytes and predictions are unchanged.

use lrunet::arch::{Network, NetworkSpec};
use lrunet::data::{Checkpoint, Normalization};
use lrunet::{Shape4, Tensor4};

fn main() -> lrunet::Result<()> {
    let net = Network::<f32>::new(NetworkSpec::cifar10(4, 0.5), 42)?;
    let norm = Normalization { mean: vec![0.49, 0.48, 0.45], std: vec![0.25, 0.24, 0.26] };
    let path = std::env::temp_dir().join("lrunet-example.ckpt");

    let ck = Checkpoint::from_network(&net, norm);
    ck.save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    let restored = loaded.to_network()?;

    let x = Tensor4::full(Shape4::new(2, 3, 32, 32), 0.3)?;
    let same_logits = net.forward_eval(&x)?.data() == restored.forward_eval(&x)?.data();
    println!("{}: {} tensors, {} bytes", loaded.spec.name(), loaded.tensors.len(), std::fs::metadata(&path).map_or(0, |m| m.len()));
    println!("re-encoded bytes identical: {}", loaded.to_bytes()? == ck.to_bytes()?);
    println!("eval logits identical: {same_logits}");

    let mut deeper = Network::<f32>::build(NetworkSpec::cifar10(5, 0.5))?;
    if let Err(e) = loaded.apply_to(&mut deeper) {
        println!("loading into 5-LruNet-0.5x: {e}");
    }
    std::fs::remove_file(&path).ok();
    Ok(())
}
