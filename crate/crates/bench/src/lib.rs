//! Deterministic inputs shared by the benchmarks.

use otnw_core::{augment_positions, extract_patches, FeatureCloud, ImageF, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-500.0..500.0)).collect()
}

pub fn textured_image(width: usize, height: usize, seed: u64) -> ImageF {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageF::from_fn(width, height, |x, y| {
        let base = 128.0 + 60.0 * ((x as f64 / 5.0).sin() + (y as f64 / 7.0).cos());
        let jitter: f64 = rng.random_range(-10.0..10.0);
        [base + jitter, 255.0 - base, 0.5 * base + jitter]
    })
    .unwrap()
}

pub fn patch_cloud(side: usize, k: usize, seed: u64) -> FeatureCloud {
    let field = augment_positions(&textured_image(side, side, seed), None, 10.0).unwrap();
    extract_patches(&field, k).unwrap()
}

pub fn point_cloud(n: usize, dim: usize, offset: f64, seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointSet::new(
        dim,
        (0..n * dim)
            .map(|_| offset + rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}
