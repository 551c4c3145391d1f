#![allow(dead_code)]

use otnw_core::ImageF;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Rotates a colour about the grey axis by `deg` degrees (Rodrigues).
pub fn hue_rotate(c: [f64; 3], deg: f64) -> [f64; 3] {
    let (s, co) = deg.to_radians().sin_cos();
    let k = 1.0 / 3.0f64.sqrt();
    let mean = (c[0] + c[1] + c[2]) / 3.0;
    let v = [c[0] - mean, c[1] - mean, c[2] - mean];
    let cross = [k * (v[1] - v[2]), k * (v[2] - v[0]), k * (v[0] - v[1])];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (v[i] * co + cross[i] * s + mean).clamp(0.0, 255.0);
    }
    out
}

/// Smooth three-channel pattern, hue-rotated by `deg`.
pub fn scene(w: usize, h: usize, deg: f64) -> ImageF {
    ImageF::from_fn(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let a = (fx / 7.0).sin() * (fy / 9.0).cos();
        let base = [
            128.0 + 90.0 * a,
            100.0 + 60.0 * (fy / 11.0).sin(),
            60.0 + 50.0 * (fx / 13.0).cos(),
        ];
        hue_rotate(base, deg)
    })
    .unwrap()
}

pub fn add_noise(img: &ImageF, sigma: f64, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let data = img
        .data()
        .iter()
        .map(|v| (v + noise.sample(&mut rng)).clamp(0.0, 255.0))
        .collect();
    ImageF::new(img.width(), img.height(), data).unwrap()
}

/// Rounds every sample to the 8-bit grid, as a PNG round trip would.
pub fn quantized(img: &ImageF) -> ImageF {
    ImageF::from_bytes(img.width(), img.height(), &img.to_bytes()).unwrap()
}
