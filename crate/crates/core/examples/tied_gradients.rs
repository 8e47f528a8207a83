//! Gradient of a shared weight versus the per-site gradients of an unrolled
//! copy initialised with the same values.

use lrunet::arch::{Mode, Network, ReuseMode};
use lrunet::gradcheck::toy_spec;
use lrunet::ops::softmax_cross_entropy;
use lrunet::{Shape4, Tensor4};

fn main() -> lrunet::Result<()> {
    let spec = toy_spec(3);
    let mut shared = Network::<f64>::new(spec.clone(), 1)?;
    let mut unrolled = Network::<f64>::build(spec.with_mode(ReuseMode::Unrolled))?;
    let names: Vec<String> = unrolled.store().params().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let src = name.replace(".reuse0.dw", ".dw").replace(".reuse1.dw", ".dw").replace(".reuse2.dw", ".dw");
        let src = src.replace(".reuse0.pw", ".pw").replace(".reuse1.pw", ".pw").replace(".reuse2.pw", ".pw");
        unrolled.store_mut().get_mut(name).unwrap().value = shared.store().get(&src).unwrap().value.clone();
    }

    let x = Tensor4::from_vec(Shape4::new(2, 3, 16, 16), (0..1536).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect())?;
    for net in [&mut shared, &mut unrolled] {
        let logits = net.forward(&x, Mode::Train)?;
        let (_, d) = softmax_cross_entropy(&logits, &[2, 5])?;
        net.backward(&d)?;
    }

    let total = shared.store().get("block1.pw.weight").unwrap().grad.clone();
    let mut sum = total.zeros_like();
    for r in 0..3 {
        let g = &unrolled.store().get(&format!("block1.reuse{r}.pw.weight")).unwrap().grad;
        println!("site {r}: |grad| = {:.6}", g.dot(g)?.sqrt());
        sum.add_assign(g)?;
    }
    println!("shared |grad| = {:.6}, max diff to site sum = {:.2e}", total.dot(&total)?.sqrt(), total.max_abs_diff(&sum)?);
    Ok(())
}
