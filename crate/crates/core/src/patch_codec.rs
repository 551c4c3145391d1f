//! Per-pixel colour+position features, overlapping patch vectors, and the
//! inverse that averages transported patches back into an image.
//!
//! Patch vectors are flattened row-major over the `k x k` window, with the
//! `dim` components of each pixel contiguous:
//! `[r, g, b, px, py]` of window pixel `(0,0)`, then `(1,0)`, ... `(k-1,k-1)`.
//! Patches are ordered by the row-major position of their upper-left corner.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::image_io::{FlowField, ImageF, CHANNELS};
use crate::points::PointSet;

/// Components per pixel feature: three colour channels and two positions.
pub const FEATURE_DIM: usize = 5;

/// Per-pixel `(r, g, b, px, py)` vectors after position normalization and stretching.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureField {
    width: usize,
    height: usize,
    w_stretch: f64,
    data: Vec<f64>,
}

impl PixelFeatureField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        FEATURE_DIM
    }

    pub fn w_stretch(&self) -> f64 {
        self.w_stretch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn feature(&self, x: usize, y: usize) -> &[f64] {
        let i = FEATURE_DIM * (y * self.width + x);
        &self.data[i..i + FEATURE_DIM]
    }

    pub fn position(&self, x: usize, y: usize) -> (f64, f64) {
        let f = self.feature(x, y);
        (f[3], f[4])
    }
}

/// Maps a (possibly flow-displaced) grid coordinate onto `[0, 255]` scaled by `w_stretch`.
fn normalize_coord(coord: f64, extent: usize, w_stretch: f64) -> f64 {
    let denom = extent.saturating_sub(1).max(1) as f64;
    w_stretch * (255.0 * coord / denom)
}

/// Concatenates each pixel's colour with its normalized, stretched position.
///
/// With a flow field, pixel `p` is placed at `p + flow(p)`. Displaced positions
/// are not clamped to the frame.
pub fn augment_positions(
    img: &ImageF,
    flow: Option<&FlowField>,
    w_stretch: f64,
) -> Result<PixelFeatureField> {
    let (width, height) = (img.width(), img.height());
    if let Some(f) = flow {
        if f.width() != width || f.height() != height {
            return Err(Error::DimensionMismatch(format!(
                "flow is {}x{}, image is {width}x{height}",
                f.width(),
                f.height()
            )));
        }
    }
    if !w_stretch.is_finite() {
        return Err(Error::InvalidInput(format!("stretch factor {w_stretch}")));
    }

    let mut data = Vec::with_capacity(width * height * FEATURE_DIM);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = flow.map_or((0.0, 0.0), |f| f.at(x, y));
            data.extend_from_slice(&img.pixel(x, y));
            data.push(normalize_coord(x as f64 + u, width, w_stretch));
            data.push(normalize_coord(y as f64 + v, height, w_stretch));
        }
    }
    Ok(PixelFeatureField {
        width,
        height,
        w_stretch,
        data,
    })
}

/// Image geometry a [`FeatureCloud`] was extracted from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudGeometry {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub dim: usize,
    pub w_stretch: f64,
}

impl CloudGeometry {
    pub fn patches_x(&self) -> usize {
        self.width + 1 - self.k
    }

    pub fn patches_y(&self) -> usize {
        self.height + 1 - self.k
    }

    pub fn patch_count(&self) -> usize {
        self.patches_x() * self.patches_y()
    }

    pub fn patch_dim(&self) -> usize {
        self.dim * self.k * self.k
    }

    fn check(&self) -> Result<()> {
        if self.k == 0 || self.k > self.width.min(self.height) {
            return Err(Error::DimensionMismatch(format!(
                "patch size {} does not fit a {}x{} image",
                self.k, self.width, self.height
            )));
        }
        if self.dim < CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "feature dimension {} has no room for {CHANNELS} colour channels",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Patch vectors in `R^(dim * k * k)` plus the geometry needed to invert them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    geometry: CloudGeometry,
    points: PointSet,
}

impl FeatureCloud {
    pub fn new(geometry: CloudGeometry, points: PointSet) -> Result<Self> {
        geometry.check()?;
        if points.dim() != geometry.patch_dim() || points.len() != geometry.patch_count() {
            return Err(Error::DimensionMismatch(format!(
                "geometry expects {} vectors of dimension {}, cloud has {} of dimension {}",
                geometry.patch_count(),
                geometry.patch_dim(),
                points.len(),
                points.dim()
            )));
        }
        Ok(Self { geometry, points })
    }

    pub fn geometry(&self) -> &CloudGeometry {
        &self.geometry
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut PointSet {
        &mut self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn patch_dim(&self) -> usize {
        self.points.dim()
    }

    /// Replaces the vectors, keeping the geometry.
    pub fn with_points(&self, points: PointSet) -> Result<Self> {
        Self::new(self.geometry, points)
    }
}

/// Stride-1 `k x k` sliding window from the upper-left corner, no padding.
pub fn extract_patches(field: &PixelFeatureField, k: usize) -> Result<FeatureCloud> {
    let geometry = CloudGeometry {
        width: field.width,
        height: field.height,
        k,
        dim: FEATURE_DIM,
        w_stretch: field.w_stretch,
    };
    geometry.check()?;

    let row_len = k * FEATURE_DIM;
    let mut data = Vec::with_capacity(geometry.patch_count() * geometry.patch_dim());
    for py in 0..geometry.patches_y() {
        for px in 0..geometry.patches_x() {
            for dy in 0..k {
                let start = FEATURE_DIM * ((py + dy) * field.width + px);
                data.extend_from_slice(&field.data[start..start + row_len]);
            }
        }
    }
    FeatureCloud::new(geometry, PointSet::new(geometry.patch_dim(), data)?)
}

/// Per-pixel mean of the colour components of every patch covering it,
/// without clamping.
pub fn average_colours(cloud: &FeatureCloud) -> Result<Vec<f64>> {
    let g = cloud.geometry;
    g.check()?;
    let mut sums = vec![0.0; g.width * g.height * CHANNELS];
    let mut counts = vec![0u32; g.width * g.height];

    let mut patches = cloud.points.rows();
    for py in 0..g.patches_y() {
        for px in 0..g.patches_x() {
            let patch = patches.next().expect("patch count checked at construction");
            for (slot, feature) in patch.chunks_exact(g.dim).enumerate() {
                let (dx, dy) = (slot % g.k, slot / g.k);
                let pixel = (py + dy) * g.width + px + dx;
                counts[pixel] += 1;
                for c in 0..CHANNELS {
                    sums[CHANNELS * pixel + c] += feature[c];
                }
            }
        }
    }
    for (i, s) in sums.iter_mut().enumerate() {
        *s /= f64::from(counts[i / CHANNELS]);
    }
    Ok(sums)
}

/// Averages overlapping patches back into an image, clamped to `[0, 255]`.
pub fn reconstruct_image(cloud: &FeatureCloud) -> Result<ImageF> {
    let g = cloud.geometry;
    let mut colours = average_colours(cloud)?;
    colours.iter_mut().for_each(|c| *c = c.clamp(0.0, 255.0));
    ImageF::new(g.width, g.height, colours)
}

/// Debug dump: a geometry comment line, then one comma-separated vector per line.
pub fn write_cloud_csv<W: Write>(cloud: &FeatureCloud, mut out: W) -> io::Result<()> {
    let g = cloud.geometry;
    writeln!(
        out,
        "# width={} height={} k={} dim={} w_stretch={}",
        g.width, g.height, g.k, g.dim, g.w_stretch
    )?;
    for row in cloud.points.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::identity_flow;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageF::from_fn(w, h, |_, _| {
            [
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
            ]
        })
        .unwrap()
    }

    fn corner_positions(f: &PixelFeatureField) -> [(f64, f64); 4] {
        [
            f.position(0, 0),
            f.position(1, 0),
            f.position(0, 1),
            f.position(1, 1),
        ]
    }

    #[test]
    fn normalization_endpoints() {
        let img = random_image(2, 2, 1);
        let f = augment_positions(&img, None, 1.0).unwrap();
        assert_eq!(
            corner_positions(&f),
            [(0.0, 0.0), (255.0, 0.0), (0.0, 255.0), (255.0, 255.0)]
        );
        let f = augment_positions(&img, None, 10.0).unwrap();
        assert_eq!(
            corner_positions(&f),
            [(0.0, 0.0), (2550.0, 0.0), (0.0, 2550.0), (2550.0, 2550.0)]
        );
        assert_eq!(&f.feature(1, 1)[..3], &img.pixel(1, 1));
    }

    #[test]
    fn uniform_flow_shifts_one_grid_step() {
        let img = random_image(2, 2, 2);
        let flow = FlowField::new(2, 2, vec![1.0; 4], vec![0.0; 4]).unwrap();
        let f = augment_positions(&img, Some(&flow), 1.0).unwrap();
        // (a + 1) * 255 / (2 - 1), b * 255 / (2 - 1)
        assert_eq!(
            corner_positions(&f),
            [(255.0, 0.0), (510.0, 0.0), (255.0, 255.0), (510.0, 255.0)]
        );
    }

    #[test]
    fn single_pixel_extent_maps_to_zero() {
        let img = random_image(1, 3, 3);
        let f = augment_positions(&img, None, 10.0).unwrap();
        assert_eq!(f.position(0, 0), (0.0, 0.0));
        assert_eq!(f.position(0, 2), (0.0, 2550.0));
    }

    #[test]
    fn flow_dimension_mismatch() {
        let img = random_image(3, 3, 4);
        let flow = identity_flow(3, 2).unwrap();
        assert!(matches!(
            augment_positions(&img, Some(&flow), 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn identity_flow_matches_grid() {
        let img = random_image(7, 4, 5);
        let flow = identity_flow(7, 4).unwrap();
        assert_eq!(
            augment_positions(&img, None, 10.0).unwrap(),
            augment_positions(&img, Some(&flow), 10.0).unwrap()
        );
    }

    #[test]
    fn patch_counts() {
        let f = augment_positions(&random_image(5, 5, 6), None, 10.0).unwrap();
        let c = extract_patches(&f, 5).unwrap();
        assert_eq!((c.len(), c.patch_dim()), (1, 125));

        let f = augment_positions(&random_image(6, 5, 7), None, 10.0).unwrap();
        let c = extract_patches(&f, 5).unwrap();
        assert_eq!(c.len(), 2);
        // The second patch starts one column to the right; the shared
        // columns 1..5 of the first are columns 0..4 of the second.
        let (a, b) = (c.points().row(0), c.points().row(1));
        for dy in 0..5 {
            let row =
                |p: &[f64], dx: usize| p[FEATURE_DIM * (dy * 5 + dx)..][..FEATURE_DIM].to_vec();
            for dx in 0..4 {
                assert_eq!(row(a, dx + 1), row(b, dx));
            }
        }
        assert_eq!(c.geometry().w_stretch, 10.0);
    }

    #[test]
    fn flattening_order() {
        let f = augment_positions(&random_image(4, 3, 8), None, 1.0).unwrap();
        let c = extract_patches(&f, 3).unwrap();
        // Patch 1 has its upper-left corner at (1, 0); slot 4 is window pixel (1, 1).
        let patch = c.points().row(1);
        assert_eq!(&patch[4 * FEATURE_DIM..5 * FEATURE_DIM], f.feature(2, 1));
    }

    #[test]
    fn oversized_patch_rejected() {
        let f = augment_positions(&random_image(6, 4, 9), None, 1.0).unwrap();
        assert!(matches!(
            extract_patches(&f, 5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn inconsistent_geometry_rejected() {
        let f = augment_positions(&random_image(6, 6, 10), None, 1.0).unwrap();
        let c = extract_patches(&f, 3).unwrap();
        let short = PointSet::new(
            c.patch_dim(),
            c.points().as_slice()[..c.patch_dim()].to_vec(),
        )
        .unwrap();
        assert!(matches!(
            c.with_points(short),
            Err(Error::DimensionMismatch(_))
        ));
        let g = CloudGeometry {
            k: 5,
            ..*c.geometry()
        };
        assert!(FeatureCloud::new(g, c.points().clone()).is_err());
    }

    #[test]
    fn single_patch_written_verbatim() {
        let img = random_image(3, 3, 11);
        let f = augment_positions(&img, None, 1.0).unwrap();
        let mut c = extract_patches(&f, 3).unwrap();
        let vals: Vec<f64> = (0..c.patch_dim()).map(|i| (i % 200) as f64).collect();
        c.points_mut().as_mut_slice().copy_from_slice(&vals);
        let out = reconstruct_image(&c).unwrap();
        for slot in 0..9 {
            let px = out.pixel(slot % 3, slot / 3);
            assert_eq!(&px[..], &vals[slot * FEATURE_DIM..slot * FEATURE_DIM + 3]);
        }
    }

    #[test]
    fn perturbation_spreads_by_coverage() {
        let (w, h, k) = (7, 6, 3);
        let img = random_image(w, h, 12);
        let f = augment_positions(&img, None, 1.0).unwrap();
        let mut c = extract_patches(&f, k).unwrap();
        // Coverage of pixel (3, 2): number of patch corners (px, py) with
        // px <= 3 <= px + k - 1 and py <= 2 <= py + k - 1, inside the valid corner range.
        let coverage = |x: usize, y: usize| {
            let cx = (0..=w - k).filter(|&p| p <= x && x < p + k).count();
            let cy = (0..=h - k).filter(|&p| p <= y && y < p + k).count();
            (cx * cy) as f64
        };
        assert_eq!(coverage(3, 2), 9.0);
        assert_eq!(coverage(0, 0), 1.0);

        let eps = 0.75;
        // Patch with corner (2, 1) covers (3, 2) at window slot (1, 1).
        let (row, col) = (1, 2);
        let patch = row * (w - k + 1) + col;
        let slot = k + 1;
        let at = patch * c.patch_dim() + slot * FEATURE_DIM + 1;
        c.points_mut().as_mut_slice()[at] += eps;
        let out = average_colours(&c).unwrap();
        let base = img.pixel(3, 2)[1];
        let got = out[CHANNELS * (2 * w + 3) + 1];
        assert!((got - base - eps / coverage(3, 2)).abs() < 1e-12);
    }

    #[test]
    fn positions_do_not_affect_colour() {
        let f = augment_positions(&random_image(8, 7, 13), None, 10.0).unwrap();
        let c = extract_patches(&f, 3).unwrap();
        let mut moved = c.clone();
        let dim = moved.geometry().dim;
        for (i, v) in moved.points_mut().as_mut_slice().iter_mut().enumerate() {
            if i % dim >= CHANNELS {
                *v += 1234.5;
            }
        }
        let a = reconstruct_image(&c).unwrap();
        let b = reconstruct_image(&moved).unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn csv_dump() {
        let f = augment_positions(&random_image(3, 3, 14), None, 2.0).unwrap();
        let c = extract_patches(&f, 3).unwrap();
        let mut buf = Vec::new();
        write_cloud_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# width=3 height=3 k=3 dim=5 w_stretch=2"
        );
        let parsed: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(parsed, c.points().row(0));
        assert!(lines.next().is_none());
    }

    proptest! {
        #[test]
        fn round_trip(w in 5usize..14, h in 5usize..14, k in prop::sample::select(vec![1usize, 3, 5]),
                      stretch in 0.0f64..20.0, seed in any::<u64>()) {
            let img = random_image(w, h, seed);
            let f = augment_positions(&img, None, stretch).unwrap();
            let c = extract_patches(&f, k).unwrap();
            prop_assert_eq!(c.len(), (h - k + 1) * (w - k + 1));
            let back = average_colours(&c).unwrap();
            for (a, b) in back.iter().zip(img.data()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn positions_scale_linearly(w in 1usize..9, h in 1usize..9, stretch in 0.1f64..50.0) {
            let img = random_image(w, h, 0);
            let a = augment_positions(&img, None, stretch).unwrap();
            let b = augment_positions(&img, None, 2.0 * stretch).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let (ax, ay) = a.position(x, y);
                    prop_assert_eq!(b.position(x, y), (2.0 * ax, 2.0 * ay));
                }
            }
        }
    }
}
