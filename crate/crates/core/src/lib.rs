//! Patch-based colour transfer with sliced optimal transport.
//!
//! A source image is recoloured toward a target image of the same scene.
//! Every overlapping `k x k` patch becomes one vector that concatenates pixel
//! colours with normalized, stretched pixel positions (the target's positions
//! optionally displaced by a dense correspondence flow). The source patch
//! cloud is then transported onto the target cloud by iterated 1D optimal
//! transport along random orthonormal directions, each 1D map optionally
//! smoothed with a Gaussian Nadaraya-Watson estimator, and the moved patches
//! are averaged back into an image.
//!
//! ```no_run
//! use otnw_core::{load_image, save_image, transfer_images, TransferConfig};
//!
//! let source = load_image("source.png")?;
//! let target = load_image("target.png")?;
//! let out = transfer_images(&source, &target, None, &TransferConfig::default())?;
//! save_image(&out.image, "out.png")?;
//! # Ok::<(), otnw_core::Error>(())
//! ```

pub mod config;
pub mod error;
pub mod image_io;
pub mod metrics;
pub mod ot1d;
pub mod patch_codec;
pub mod pipeline;
pub mod points;
pub mod sliced;

pub use config::{Mode, SmoothTarget, TransferConfig};
pub use error::{Error, ErrorKind, Result};
pub use image_io::{identity_flow, load_flo, load_image, save_image, write_flo, FlowField, ImageF};
pub use metrics::{psnr, ssim, MetricReport};
pub use ot1d::{nw_smooth, solve_1d_histogram, solve_1d_quantile, Transfer1D};
pub use patch_codec::{
    augment_positions, extract_patches, reconstruct_image, CloudGeometry, FeatureCloud,
    PixelFeatureField,
};
pub use pipeline::{column_mosaic, total_variation, transfer_images, TransferOutput};
pub use points::PointSet;
pub use sliced::{
    run_sliced_transport, sample_directions, sliced_distance, sliced_step, transport_points,
    DirectionBatch, IterationTrace, StepOutcome,
};
