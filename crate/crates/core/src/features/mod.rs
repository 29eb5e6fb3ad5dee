//! Per-cell feature maps and global scene descriptors.
//!
//! Feature maps come either from files produced by an external deep network
//! ([`ingest_features`]) or from a deterministic oriented-gradient and color
//! filter bank ([`extract_standin_features`]). Scene descriptors pair a
//! probability-like class vector with a gist vector.

mod classemes;
mod descriptor;
mod file;
mod gist;
mod standin;

pub use classemes::{classemes_flip_permutation, compute_standin_classemes, CLASSEMES_DIM};
pub use descriptor::{
    descriptor_flip_permutation, make_descriptor, DescriptorWeights, SceneDescriptor,
    Standardization,
};
pub use file::{
    decode_descriptor, decode_features, encode_descriptor, encode_features, ingest_descriptor,
    ingest_features, save_descriptor, save_features, DESC_MAGIC, FEAT_MAGIC,
};
pub use gist::{compute_gist, gist_flip_permutation, GIST_DIM};
pub use standin::{
    extract_standin_features, feature_flip_permutation, CHANNELS_PER_SCALE, DEFAULT_SCALES,
    MIN_IMAGE_SIDE, STANDIN_STRIDE,
};

use crate::error::{Error, Result};
use crate::raster::{Grid, ImageBuffer};

/// Feature vectors on a spatial grid laid over a source image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    grid_w: usize,
    grid_h: usize,
    dim: usize,
    stride: usize,
    source_w: usize,
    source_h: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        grid_w: usize,
        grid_h: usize,
        dim: usize,
        stride: usize,
        source_w: usize,
        source_h: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if grid_w == 0 || grid_h == 0 || dim == 0 || stride == 0 {
            return Err(Error::InvalidData("feature map has a zero extent".into()));
        }
        let expected = grid_w * grid_h * dim;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        if stride * grid_w + stride < source_w || stride * grid_h + stride < source_h {
            return Err(Error::InvalidData(format!(
                "{grid_w}x{grid_h} grid at stride {stride} does not cover {source_w}x{source_h}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(FeatureMap {
            grid_w,
            grid_h,
            dim,
            stride,
            source_w,
            source_h,
            data,
        })
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn source_w(&self) -> usize {
        self.source_w
    }

    pub fn source_h(&self) -> usize {
        self.source_h
    }

    pub fn cells(&self) -> usize {
        self.grid_w * self.grid_h
    }

    /// Cell-major storage: the vector of cell `i` is `data[i * dim..(i + 1) * dim]`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.grid_w + x) * self.dim;
        &self.data[i..i + self.dim]
    }

    /// One feature channel as a grid.
    pub fn channel(&self, c: usize) -> Grid {
        Grid::from_fn(self.grid_w, self.grid_h, |x, y| self.cell(x, y)[c])
    }

    /// Pixel coordinates of cell `(cx, cy)`'s center in the source image.
    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        let sx = self.source_w as f64 / self.grid_w as f64;
        let sy = self.source_h as f64 / self.grid_h as f64;
        ((cx as f64 + 0.5) * sx - 0.5, (cy as f64 + 0.5) * sy - 0.5)
    }

    /// Mirrors the grid left-right and reorders each vector by `perm`
    /// (`out[c] = in[perm[c]]`).
    pub fn flip_horizontal(&self, perm: &[usize]) -> FeatureMap {
        assert_eq!(perm.len(), self.dim);
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.grid_h {
            for x in (0..self.grid_w).rev() {
                let cell = self.cell(x, y);
                data.extend(perm.iter().map(|&p| cell[p]));
            }
        }
        FeatureMap {
            data,
            ..self.clone()
        }
    }
}

/// Where per-cell features and descriptors come from.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureSource {
    /// Built-in filter bank over a dyadic pyramid with this many scales.
    Standin { scales: usize },
    /// `<image_id>.iseelfeat` (and optionally `<image_id>.iseeldesc`) in a directory.
    Ingest { dir: std::path::PathBuf },
}

impl Default for FeatureSource {
    fn default() -> Self {
        FeatureSource::Standin {
            scales: DEFAULT_SCALES,
        }
    }
}

/// Raw (unstandardized) classemes and gist of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDescriptor {
    pub classemes: Vec<f64>,
    pub gist: Vec<f64>,
}

impl RawDescriptor {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.classemes.clone();
        v.extend_from_slice(&self.gist);
        v
    }

    pub fn len(&self) -> usize {
        self.classemes.len() + self.gist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl FeatureSource {
    /// Feature map for an image.
    pub fn features(&self, image_id: &str, img: &ImageBuffer) -> Result<FeatureMap> {
        match self {
            FeatureSource::Standin { scales } => extract_standin_features(img, *scales),
            FeatureSource::Ingest { dir } => {
                ingest_features(&dir.join(format!("{image_id}.iseelfeat")))
            }
        }
    }

    /// Raw descriptor for an image: a sidecar file when ingesting and one exists,
    /// otherwise the built-in classemes and gist.
    pub fn descriptor(&self, image_id: &str, img: &ImageBuffer) -> Result<RawDescriptor> {
        if let FeatureSource::Ingest { dir } = self {
            let path = dir.join(format!("{image_id}.iseeldesc"));
            if path.exists() {
                return ingest_descriptor(&path);
            }
        }
        Ok(RawDescriptor {
            classemes: compute_standin_classemes(img)?,
            gist: compute_gist(img)?,
        })
    }
}

/// Oriented central-difference gradients with replicated borders.
pub(crate) fn gradients(g: &Grid) -> (Grid, Grid) {
    let (w, h) = g.shape();
    let gx = Grid::from_fn(w, h, |x, y| {
        let l = g.get(x.saturating_sub(1), y);
        let r = g.get((x + 1).min(w - 1), y);
        (r - l) / 2.0
    });
    let gy = Grid::from_fn(w, h, |x, y| {
        let u = g.get(x, y.saturating_sub(1));
        let d = g.get(x, (y + 1).min(h - 1));
        (d - u) / 2.0
    });
    (gx, gy)
}

pub(crate) fn check_min_side(img: &ImageBuffer) -> Result<()> {
    if img.width() < MIN_IMAGE_SIDE || img.height() < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: MIN_IMAGE_SIDE,
        });
    }
    Ok(())
}

/// Halves a grid's extent (rounding up) with bilinear resampling.
pub(crate) fn half(g: &Grid) -> Grid {
    crate::raster::resize_bilinear(g, g.width().div_ceil(2), g.height().div_ceil(2))
}
