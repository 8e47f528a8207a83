//! Train-time image augmentation on `(C, H, W)` float images in `[0, 1]`.
//!
//! Order: zero-pad and random crop, horizontal flip, then a small rotation
//! about the image centre with bilinear sampling. Reads outside the image are 0.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Zero padding before the random crop; 0 disables cropping.
    pub crop_padding: usize,
    pub flip: bool,
    /// Rotation angle is drawn uniformly from `[-max, +max]` degrees; 0 disables it.
    pub max_rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            crop_padding: 4,
            flip: true,
            max_rotation_deg: 10.0,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        AugmentConfig {
            crop_padding: 0,
            flip: false,
            max_rotation_deg: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.crop_padding == 0 && !self.flip && self.max_rotation_deg == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentParams {
        let p = self.crop_padding;
        let (dy, dx) = if p > 0 {
            (rng.gen_range(0..=2 * p), rng.gen_range(0..=2 * p))
        } else {
            (0, 0)
        };
        let flip = self.flip && rng.gen_bool(0.5);
        let angle = if self.max_rotation_deg > 0.0 {
            rng.gen_range(-self.max_rotation_deg..=self.max_rotation_deg)
        } else {
            0.0
        };
        AugmentParams {
            padding: p,
            crop_y: dy,
            crop_x: dx,
            flip,
            angle_deg: angle,
        }
    }
}

/// One concrete draw of the augmentation pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub padding: usize,
    /// Crop offsets into the padded image; `padding` on both means no shift.
    pub crop_y: usize,
    pub crop_x: usize,
    pub flip: bool,
    pub angle_deg: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams {
            padding: 0,
            crop_y: 0,
            crop_x: 0,
            flip: false,
            angle_deg: 0.0,
        }
    }

    pub fn apply(&self, image: &mut [f32], channels: usize, height: usize, width: usize) {
        if self.padding > 0 {
            pad_crop(image, channels, height, width, self.padding, self.crop_y, self.crop_x);
        }
        if self.flip {
            hflip(image, channels, height, width);
        }
        if self.angle_deg != 0.0 {
            rotate(image, channels, height, width, self.angle_deg);
        }
    }
}

pub fn augment<R: Rng + ?Sized>(
    image: &mut [f32],
    channels: usize,
    height: usize,
    width: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) {
    cfg.sample(rng).apply(image, channels, height, width);
}

/// Crops an `H x W` window at `(y0, x0)` out of the image zero-padded by `pad`.
pub fn pad_crop(image: &mut [f32], channels: usize, height: usize, width: usize, pad: usize, y0: usize, x0: usize) {
    let src = image.to_vec();
    let plane = height * width;
    for c in 0..channels {
        let sp = &src[c * plane..(c + 1) * plane];
        let dp = &mut image[c * plane..(c + 1) * plane];
        for y in 0..height {
            let sy = (y + y0) as isize - pad as isize;
            for x in 0..width {
                let sx = (x + x0) as isize - pad as isize;
                dp[y * width + x] = if sy >= 0 && sx >= 0 && (sy as usize) < height && (sx as usize) < width {
                    sp[sy as usize * width + sx as usize]
                } else {
                    0.0
                };
            }
        }
    }
}

pub fn hflip(image: &mut [f32], channels: usize, height: usize, width: usize) {
    for row in image[..channels * height * width].chunks_mut(width) {
        row.reverse();
    }
}

/// Counter-clockwise rotation by `degrees` about the centre, bilinear, zero fill.
pub fn rotate(image: &mut [f32], channels: usize, height: usize, width: usize, degrees: f64) {
    let src = image.to_vec();
    let (s, c) = degrees.to_radians().sin_cos();
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let plane = height * width;
    let sample = |p: &[f32], y: isize, x: isize| -> f64 {
        if y < 0 || x < 0 || y as usize >= height || x as usize >= width {
            0.0
        } else {
            p[y as usize * width + x as usize] as f64
        }
    };
    for ch in 0..channels {
        let sp = &src[ch * plane..(ch + 1) * plane];
        let dp = &mut image[ch * plane..(ch + 1) * plane];
        for y in 0..height {
            for x in 0..width {
                // Inverse map: rotate the output coordinate back by -angle.
                let (ry, rx) = (y as f64 - cy, x as f64 - cx);
                let sx = c * rx - s * ry + cx;
                let sy = s * rx + c * ry + cy;
                let (fx, fy) = (sx.floor(), sy.floor());
                let (ax, ay) = (sx - fx, sy - fy);
                let (x0, y0) = (fx as isize, fy as isize);
                let v = (1.0 - ay) * ((1.0 - ax) * sample(sp, y0, x0) + ax * sample(sp, y0, x0 + 1))
                    + ay * ((1.0 - ax) * sample(sp, y0 + 1, x0) + ax * sample(sp, y0 + 1, x0 + 1));
                dp[y * width + x] = v as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(c: usize, h: usize, w: usize) -> Vec<f32> {
        (0..c * h * w).map(|i| (i % 97) as f32 / 97.0).collect()
    }

    #[test]
    fn centred_crop_no_flip_no_angle_is_identity() {
        let orig = ramp(3, 8, 8);
        let mut img = orig.clone();
        AugmentParams { padding: 4, crop_y: 4, crop_x: 4, flip: false, angle_deg: 0.0 }.apply(&mut img, 3, 8, 8);
        assert_eq!(img, orig);
    }

    #[test]
    fn flip_twice_is_identity() {
        let orig = ramp(2, 5, 7);
        let mut img = orig.clone();
        hflip(&mut img, 2, 5, 7);
        assert_ne!(img, orig);
        hflip(&mut img, 2, 5, 7);
        assert_eq!(img, orig);
    }

    #[test]
    fn crop_shift_moves_content_and_fills_zero() {
        let mut img: Vec<f32> = (1..=16).map(|v| v as f32).collect();
        pad_crop(&mut img, 1, 4, 4, 4, 5, 4);
        assert_eq!(&img[..4], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(&img[12..], &[0.0; 4]);
    }

    #[test]
    fn rotation_preserves_disk_mass() {
        let (h, w) = (32, 32);
        let img: Vec<f32> = (0..h * w)
            .map(|i| {
                let (y, x) = ((i / w) as f64 - 15.5, (i % w) as f64 - 15.5);
                if (x * x + y * y).sqrt() < 10.0 { 1.0 } else { 0.0 }
            })
            .collect();
        let before: f32 = img.iter().sum();
        for angle in [-10.0, -4.5, 3.0, 10.0] {
            let mut r = img.clone();
            rotate(&mut r, 1, h, w, angle);
            let after: f32 = r.iter().sum();
            assert!(((after - before) / before).abs() < 0.03, "{angle}: {before} -> {after}");
        }
    }

    #[test]
    fn quarter_turn_is_exact_on_square() {
        let mut img = vec![0.0f32; 9];
        img[1] = 1.0; // top middle
        rotate(&mut img, 1, 3, 3, 90.0);
        let hot: Vec<usize> = img.iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(i, _)| i).collect();
        assert_eq!(hot, vec![3]);
    }

    proptest! {
        #[test]
        fn shape_and_range_preserved(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut img = ramp(3, 12, 12);
            augment(&mut img, 3, 12, 12, &AugmentConfig::default(), &mut rng);
            prop_assert_eq!(img.len(), 3 * 12 * 12);
            prop_assert!(img.iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)));
        }
    }
}
