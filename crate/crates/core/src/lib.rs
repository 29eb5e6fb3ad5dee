//! Fixation prediction from scene similarity and an ensemble of extreme
//! learning machines.
//!
//! One small randomly-weighted regressor is trained per training image and
//! stored next to that image's scene descriptor in a [`bank::SceneBank`]. To
//! predict a new image, the regressors of its nearest neighbours in descriptor
//! space are evaluated on its features, their clamped outputs are summed and
//! sharpened, and the result is multiplied by a learned spatial prior.
//!
//! The crate is organized bottom-up:
//!
//! - [`raster`], [`fixation`], [`io`]: images, grids, fixation records, file formats
//! - [`features`]: per-cell feature maps and scene descriptors
//! - [`elm`]: extreme learning machine training and inference
//! - [`bank`]: the scene bank and nearest-neighbour retrieval
//! - [`predictor`]: ensemble aggregation, spatial prior, full pipeline, tuning
//! - [`metrics`]: NSS, AUC variants, SIM, CC, KL and EMD
//! - [`synth`]: synthetic blob corpora for testing and demos

pub mod bank;
pub mod corpus;
pub mod elm;
pub mod error;
pub mod features;
pub mod fixation;
pub mod io;
pub mod metrics;
pub mod predictor;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use raster::{DensityMap, Grid, ImageBuffer, Normalization};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rasters.md")]
    mod rasters {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/elm.md")]
    mod elm {}
    #[doc = include_str!("../../../book/src/scene-bank.md")]
    mod scene_bank {}
    #[doc = include_str!("../../../book/src/prediction.md")]
    mod prediction {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
