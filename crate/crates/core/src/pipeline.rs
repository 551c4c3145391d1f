//! End-to-end recolouring and the column mosaic used for visual inspection.

use crate::config::TransferConfig;
use crate::error::{Error, Result};
use crate::image_io::{FlowField, ImageF, CHANNELS};
use crate::patch_codec::{augment_positions, extract_patches, reconstruct_image};
use crate::sliced::{run_sliced_transport, IterationTrace};

#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub image: ImageF,
    pub trace: Vec<IterationTrace>,
}

/// Recolours `source` toward `target`.
///
/// The flow, when given, displaces the *target* positions; the source keeps
/// its grid positions.
pub fn transfer_images(
    source: &ImageF,
    target: &ImageF,
    target_flow: Option<&FlowField>,
    cfg: &TransferConfig,
) -> Result<TransferOutput> {
    cfg.validate()?;
    let k = cfg.k;
    for (name, img) in [("source", source), ("target", target)] {
        if k > img.width().min(img.height()) {
            return Err(Error::DimensionMismatch(format!(
                "patch size {k} exceeds the {}x{} {name} image",
                img.width(),
                img.height()
            )));
        }
    }

    let src_field = augment_positions(source, None, cfg.w_stretch)?;
    let tgt_field = augment_positions(target, target_flow, cfg.w_stretch)?;
    let src_cloud = extract_patches(&src_field, k)?;
    let tgt_cloud = extract_patches(&tgt_field, k)?;
    let (moved, trace) = run_sliced_transport(&src_cloud, &tgt_cloud, cfg)?;
    Ok(TransferOutput {
        image: reconstruct_image(&moved)?,
        trace,
    })
}

/// Interleaves column blocks of width `strip`: block 0 from `a`, block 1
/// from `b`, and so on.
pub fn column_mosaic(a: &ImageF, b: &ImageF, strip: usize) -> Result<ImageF> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if strip == 0 {
        return Err(Error::InvalidInput("strip width must be >= 1".into()));
    }
    ImageF::from_fn(a.width(), a.height(), |x, y| {
        if (x / strip).is_multiple_of(2) {
            a.pixel(x, y)
        } else {
            b.pixel(x, y)
        }
    })
}

/// Sum of absolute differences between horizontally and vertically adjacent
/// samples, over all channels.
pub fn total_variation(img: &ImageF) -> f64 {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let at = |x: usize, y: usize, c: usize| d[CHANNELS * (y * w + x) + c];
    let mut tv = 0.0;
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                if x + 1 < w {
                    tv += (at(x + 1, y, c) - at(x, y, c)).abs();
                }
                if y + 1 < h {
                    tv += (at(x, y + 1, c) - at(x, y, c)).abs();
                }
            }
        }
    }
    tv
}
