//! The half-swap channel shuffle on a small channel count, and the check
//! that its backward pass undoes it.

use lrunet::ops::ChannelShuffle;
use lrunet::{Shape4, Tensor4};

fn main() -> lrunet::Result<()> {
    let (c, g) = (16, 8);
    let plain = ChannelShuffle::plain(c, g)?;
    let swap = ChannelShuffle::half_swap(c, g)?;
    println!("out  plain  half-swap");
    for o in 0..c {
        println!("{o:>3}  {:>5}  {:>9}", plain.source()[o], swap.source()[o]);
    }

    for c in [64, 128, 256, 512] {
        let s = ChannelShuffle::half_swap(c, g)?;
        let x = Tensor4::from_vec(Shape4::new(1, c, 1, 1), (0..c).map(|v| v as f32).collect())?;
        let round_trip = s.backward(&s.forward(&x)?)?;
        println!(
            "C={c:<3} bijection={} inverse exact={} source[0]={}",
            s.is_bijection(),
            round_trip.data() == x.data(),
            s.source()[0]
        );
    }
    Ok(())
}
