//! The train-time augmentation pipeline on a synthetic bar image, drawn as
//! ASCII art.

use lrunet::train::{AugmentConfig, AugmentParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SIDE: usize = 24;

fn show(title: &str, img: &[f32]) {
    println!("{title} (sum {:.1})", img.iter().sum::<f32>());
    for row in img.chunks(SIDE) {
        let line: String = row.iter().map(|&v| if v > 0.66 { '#' } else if v > 0.33 { '+' } else if v > 0.05 { '.' } else { ' ' }).collect();
        println!("  |{line}|");
    }
}

fn main() {
    let c = (SIDE as f32 - 1.0) / 2.0;
    let bar: Vec<f32> = (0..SIDE * SIDE)
        .map(|i| {
            let (y, x) = ((i / SIDE) as f32 - c, (i % SIDE) as f32 - c + 3.0);
            if y.abs() < 8.0 && x.abs() < 4.0 { 1.0 } else { 0.0 }
        })
        .collect();
    show("original", &bar);

    let mut img = bar.clone();
    AugmentParams { padding: 4, crop_y: 4, crop_x: 4, flip: false, angle_deg: 10.0 }.apply(&mut img, 1, SIDE, SIDE);
    show("rotated +10 degrees", &img);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..2 {
        let p = AugmentConfig::default().sample(&mut rng);
        let mut img = bar.clone();
        p.apply(&mut img, 1, SIDE, SIDE);
        show(&format!("random draw {k}: {p:?}"), &img);
    }
}
