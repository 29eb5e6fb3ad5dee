use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fixation::FixationSet;
use crate::io::{read_file, write_atomic, Decoder, Encoder};
use crate::raster::{normalize, DensityMap, Grid, Normalization};

pub const PRIOR_MAGIC: &[u8] = b"ISEELPRI";
pub const PRIOR_VERSION: u32 = 1;

/// Kernel bandwidth in normalized image coordinates.
pub const PRIOR_STD: f64 = 0.08;

const WEIGHT_TOL: f64 = 1e-4;

/// One isotropic Gaussian of the mixture, in normalized `[0, 1]` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorKernel {
    pub cx: f64,
    pub cy: f64,
    pub std: f64,
    pub weight: f64,
}

/// Location-only fixation density: a Gaussian mixture with one kernel per
/// training fixation. Rendered maps are cached per resolution.
pub struct SpatialPrior {
    kernels: Vec<PriorKernel>,
    cache: Mutex<HashMap<(usize, usize), Arc<DensityMap>>>,
}

impl SpatialPrior {
    pub fn from_kernels(kernels: Vec<PriorKernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::NoFixations);
        }
        for k in &kernels {
            let finite = [k.cx, k.cy, k.std, k.weight].iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::NonFinite("prior kernel"));
            }
            if k.std <= 0.0 || k.weight <= 0.0 {
                return Err(Error::InvalidData("prior kernels need positive std and weight".into()));
            }
        }
        let total: f64 = kernels.iter().map(|k| k.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidData(format!("prior weights sum to {total}, not 1")));
        }
        Ok(SpatialPrior {
            kernels,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn kernels(&self) -> &[PriorKernel] {
        &self.kernels
    }

    /// The mixture at pixel centers of a `width` x `height` image, max-one.
    pub fn render(&self, width: usize, height: usize) -> Result<Arc<DensityMap>> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("prior extent must be non-empty".into()));
        }
        if let Some(hit) = self.cache.lock().expect("prior cache").get(&(width, height)) {
            return Ok(Arc::clone(hit));
        }
        let map = Arc::new(self.evaluate(width, height)?);
        // first writer wins so every caller sees the same map
        let mut cache = self.cache.lock().expect("prior cache");
        Ok(Arc::clone(cache.entry((width, height)).or_insert(map)))
    }

    fn evaluate(&self, width: usize, height: usize) -> Result<DensityMap> {
        let k = self.kernels.len();
        // separable: value(y, x) = sum_k w_k gy_k(y) gx_k(x)
        let gy = DMatrix::from_fn(height, k, |y, j| {
            let kern = &self.kernels[j];
            let d = (y as f64 + 0.5) / height as f64 - kern.cy;
            kern.weight * (-d * d / (2.0 * kern.std * kern.std)).exp()
        });
        let gx = DMatrix::from_fn(k, width, |j, x| {
            let kern = &self.kernels[j];
            let d = (x as f64 + 0.5) / width as f64 - kern.cx;
            (-d * d / (2.0 * kern.std * kern.std)).exp()
        });
        let values = gy * gx;
        let grid = Grid::from_fn(width, height, |x, y| values[(y, x)]);
        let map = normalize(&grid, Normalization::MaxOne)
            .map_err(|_| Error::Numerical("prior underflows everywhere".into()))?;
        // keep the map strictly positive even where every kernel underflows
        let floored = map.grid().map(|v| v.max(f64::MIN_POSITIVE));
        DensityMap::new(floored, Normalization::MaxOne)
    }
}

impl Clone for SpatialPrior {
    fn clone(&self) -> Self {
        SpatialPrior {
            kernels: self.kernels.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl PartialEq for SpatialPrior {
    fn eq(&self, other: &Self) -> bool {
        self.kernels == other.kernels
    }
}

impl fmt::Debug for SpatialPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialPrior")
            .field("kernels", &self.kernels.len())
            .finish()
    }
}

/// One equally weighted kernel of std [`PRIOR_STD`] per fixation, centered at
/// the fixation's pixel center in normalized coordinates of its own image.
pub fn fit_prior(sets: &[FixationSet]) -> Result<SpatialPrior> {
    let total: usize = sets.iter().map(|s| s.len()).sum();
    if total == 0 {
        return Err(Error::NoFixations);
    }
    let weight = 1.0 / total as f64;
    let kernels = sets
        .iter()
        .flat_map(|s| {
            let (w, h) = (s.width() as f64, s.height() as f64);
            s.points().iter().map(move |p| PriorKernel {
                cx: (p.x as f64 + 0.5) / w,
                cy: (p.y as f64 + 0.5) / h,
                std: PRIOR_STD,
                weight,
            })
        })
        .collect();
    SpatialPrior::from_kernels(kernels)
}

/// Renders the prior at `width` x `height`, normalized max-one.
pub fn eval_prior(prior: &SpatialPrior, width: usize, height: usize) -> Result<DensityMap> {
    Ok(prior.render(width, height)?.as_ref().clone())
}

pub fn encode_prior(prior: &SpatialPrior) -> Result<Vec<u8>> {
    let count = u32::try_from(prior.kernels.len())
        .map_err(|_| Error::InvalidData("too many prior kernels".into()))?;
    let mut enc = Encoder::new(PRIOR_MAGIC, PRIOR_VERSION);
    enc.u32(count);
    for k in &prior.kernels {
        enc.f32s(&[k.cx, k.cy, k.std, k.weight]);
    }
    Ok(enc.finish())
}

pub fn decode_prior(bytes: &[u8]) -> Result<SpatialPrior> {
    let mut dec = Decoder::open(bytes, PRIOR_MAGIC, PRIOR_VERSION)?;
    let count = dec.u32()? as usize;
    dec.expect_remaining(count * 16)?;
    let kernels = (0..count)
        .map(|_| {
            let v = dec.f32s(4, "prior kernel")?;
            Ok(PriorKernel {
                cx: v[0],
                cy: v[1],
                std: v[2],
                weight: v[3],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    dec.finish()?;
    SpatialPrior::from_kernels(kernels)
}

pub fn save_prior(prior: &SpatialPrior, path: &Path) -> Result<()> {
    write_atomic(path, &encode_prior(prior)?)
}

pub fn load_prior(path: &Path) -> Result<SpatialPrior> {
    decode_prior(&read_file(path)?).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixation::Fixation;
    use crate::raster::resize_bilinear;

    fn set(w: usize, h: usize, pts: &[(u32, u32)]) -> FixationSet {
        FixationSet::new("t", w, h, pts.iter().map(|&(x, y)| Fixation::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn centered_fixations_peak_at_center() {
        let p = fit_prior(&[set(21, 15, &[(10, 7), (10, 7)])]).unwrap();
        let m = eval_prior(&p, 21, 15).unwrap();
        assert_eq!(m.grid().argmax(), (10, 7));
        assert!(m.grid().data().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn mirrored_sets_give_mirrored_priors() {
        let pts = [(3, 4), (17, 2), (9, 11)];
        let mirrored: Vec<(u32, u32)> = pts.iter().map(|&(x, y)| (19 - x, y)).collect();
        let a = eval_prior(&fit_prior(&[set(20, 12, &pts)]).unwrap(), 20, 12).unwrap();
        let b = eval_prior(&fit_prior(&[set(20, 12, &mirrored)]).unwrap(), 20, 12).unwrap();
        for (x, y) in a.grid().data().iter().zip(b.grid().flip_horizontal().data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn two_fixations_match_direct_evaluation() {
        let p = fit_prior(&[set(8, 8, &[(1, 2)]), set(16, 16, &[(11, 12)])]).unwrap();
        let got = eval_prior(&p, 8, 8).unwrap().renormalize(Normalization::SumsToOne).unwrap();
        let centers = [(1.5 / 8.0, 2.5 / 8.0), (11.5 / 16.0, 12.5 / 16.0)];
        let mut direct = vec![0.0; 64];
        for y in 0..8 {
            for x in 0..8 {
                let (u, v) = ((x as f64 + 0.5) / 8.0, (y as f64 + 0.5) / 8.0);
                direct[y * 8 + x] = centers
                    .iter()
                    .map(|(cx, cy)| {
                        0.5 * (-((u - cx).powi(2) + (v - cy).powi(2)) / (2.0 * PRIOR_STD * PRIOR_STD)).exp()
                    })
                    .sum::<f64>();
            }
        }
        let total: f64 = direct.iter().sum();
        for (g, d) in got.grid().data().iter().zip(&direct) {
            assert!((g - d / total).abs() < 1e-12);
        }
    }

    #[test]
    fn resolutions_agree_up_to_resampling() {
        let p = fit_prior(&[set(40, 30, &[(10, 10), (30, 20), (20, 15)])]).unwrap();
        let small = eval_prior(&p, 40, 30).unwrap();
        let large = eval_prior(&p, 80, 60).unwrap();
        let down = resize_bilinear(large.grid(), 40, 30);
        let n = small.grid().data().len() as f64;
        let rms = (small
            .grid()
            .data()
            .iter()
            .zip(down.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
            .sqrt();
        assert!(rms <= 0.02, "rms {rms}");
    }

    #[test]
    fn render_is_cached() {
        let p = fit_prior(&[set(10, 10, &[(2, 3)])]).unwrap();
        let a = p.render(10, 10).unwrap();
        let b = p.render(10, 10).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn empty_and_file_errors() {
        assert!(matches!(fit_prior(&[set(4, 4, &[])]), Err(Error::NoFixations)));
        let p = fit_prior(&[set(10, 10, &[(2, 3), (7, 7)])]).unwrap();
        let bytes = encode_prior(&p).unwrap();
        let back = decode_prior(&bytes).unwrap();
        assert_eq!(encode_prior(&back).unwrap(), bytes);
        assert!(decode_prior(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'Z';
        assert!(decode_prior(&bad).unwrap_err().to_string().contains("bad magic"));
    }
}
