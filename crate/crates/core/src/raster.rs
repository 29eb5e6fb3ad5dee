//! Raster carriers shared by every stage: images, scalar grids and density maps,
//! plus the resampling and smoothing primitives that operate on them.

use crate::error::{Error, Result};

/// A gray or RGB image with row-major, channel-interleaved samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image has zero extent".into()));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidData("image samples must be finite and in [0, 1]".into()));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        ImageBuffer::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Red, green and blue at a pixel; gray images replicate their single channel.
    pub fn rgb(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            let v = self.data[i];
            [v, v, v]
        } else {
            [self.data[i], self.data[i + 1], self.data[i + 2]]
        }
    }

    /// One channel as a grid; channel indices past the last replicate it.
    pub fn channel(&self, c: usize) -> Grid {
        let c = c.min(self.channels - 1);
        let data = (0..self.width * self.height)
            .map(|i| self.data[i * self.channels + c])
            .collect();
        Grid::from_vec(self.width, self.height, data).expect("channel extent")
    }

    /// Channel mean as a grid.
    pub fn luminance(&self) -> Grid {
        let n = self.channels as f64;
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / n)
            .collect();
        Grid::from_vec(self.width, self.height, data).expect("luminance extent")
    }

    pub fn flip_horizontal(&self) -> ImageBuffer {
        let (w, c) = (self.width, self.channels);
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..w).rev() {
                let i = (y * w + x) * c;
                data.extend_from_slice(&self.data[i..i + c]);
            }
        }
        ImageBuffer { data, ..self.clone() }
    }

    /// Rotates by 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> ImageBuffer {
        let (w, h, c) = (self.width, self.height, self.channels);
        // new(x, y) = old(w - 1 - y, x); new extent is h x w
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..w {
            for x in 0..h {
                let i = (x * w + (w - 1 - y)) * c;
                data.extend_from_slice(&self.data[i..i + c]);
            }
        }
        ImageBuffer {
            width: h,
            height: w,
            channels: c,
            data,
        }
    }
}

/// A row-major grid of finite scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid has zero extent".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid"));
        }
        Ok(Grid { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "grid has zero extent");
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Grid::filled(width, height, 0.0)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Grid { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Position of the first maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Cell-wise product with another grid of the same shape.
    pub fn mul(&self, other: &Grid) -> Result<Grid> {
        self.ensure_same_shape(other)?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub(crate) fn ensure_same_shape(&self, other: &Grid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    pub fn flip_horizontal(&self) -> Grid {
        Grid::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Grid {
        Grid::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }

    /// Bilinear lookup at continuous pixel-center coordinates, clamped to the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, fx) = bracket(x, self.width);
        let (y0, y1, fy) = bracket(y, self.height);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn bracket(pos: f64, len: usize) -> (usize, usize, f64) {
    let pos = pos.clamp(0.0, (len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(len - 1);
    (lo, hi, pos - lo as f64)
}

/// Which invariant a [`DensityMap`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    SumsToOne,
    MaxOne,
    Raw,
}

/// A non-negative map tagged with its normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    grid: Grid,
    normalization: Normalization,
}

const NORM_TOL: f64 = 1e-9;

impl DensityMap {
    /// Wraps a grid, checking non-negativity and the tag's invariant.
    pub fn new(grid: Grid, normalization: Normalization) -> Result<Self> {
        if grid.data.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidData("density map has negative values".into()));
        }
        let ok = match normalization {
            Normalization::SumsToOne => (grid.sum() - 1.0).abs() <= NORM_TOL,
            Normalization::MaxOne => (grid.max() - 1.0).abs() <= NORM_TOL,
            Normalization::Raw => true,
        };
        if !ok {
            return Err(Error::InvalidData(format!(
                "grid does not satisfy {normalization:?}"
            )));
        }
        Ok(DensityMap { grid, normalization })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn renormalize(&self, mode: Normalization) -> Result<DensityMap> {
        normalize(&self.grid, mode)
    }
}

/// Rescales a non-negative grid so it satisfies `mode`.
pub fn normalize(g: &Grid, mode: Normalization) -> Result<DensityMap> {
    if g.data.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidData("cannot normalize negative values".into()));
    }
    let scale = match mode {
        Normalization::SumsToOne => g.sum(),
        Normalization::MaxOne => g.max(),
        Normalization::Raw => 1.0,
    };
    if scale <= 0.0 {
        return Err(Error::DegenerateMap("all-zero grid"));
    }
    let grid = g.map(|v| v / scale);
    Ok(DensityMap {
        grid,
        normalization: mode,
    })
}

/// Bilinear resize with pixel-center alignment.
pub fn resize_bilinear(g: &Grid, out_w: usize, out_h: usize) -> Grid {
    assert!(out_w >= 1 && out_h >= 1, "resize target must be non-empty");
    if g.shape() == (out_w, out_h) {
        return g.clone();
    }
    let sx = g.width as f64 / out_w as f64;
    let sy = g.height as f64 / out_h as f64;
    let xs: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|x| bracket((x as f64 + 0.5) * sx - 0.5, g.width))
        .collect();
    let ys: Vec<(usize, usize, f64)> = (0..out_h)
        .map(|y| bracket((y as f64 + 0.5) * sy - 0.5, g.height))
        .collect();
    let mut data = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = g.get(x0, y0) * (1.0 - fx) + g.get(x1, y0) * fx;
            let bottom = g.get(x0, y1) * (1.0 - fx) + g.get(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Grid {
        width: out_w,
        height: out_h,
        data,
    }
}

/// Area-weighted pooling onto a coarser `out_w` x `out_h` partition of the grid.
///
/// Cell `c` along an axis of length `n` averages the continuous interval
/// `[c n / out, (c + 1) n / out)`, with fractional pixel overlaps weighted by
/// their length. The partition is mirror-symmetric, so pooling commutes with flips.
pub fn pool_area(g: &Grid, out_w: usize, out_h: usize) -> Grid {
    let wx = area_weights(g.width, out_w);
    let wy = area_weights(g.height, out_h);
    // rows first: (out_w x height)
    let mut tmp = vec![0.0; out_w * g.height];
    for y in 0..g.height {
        let row = &g.data[y * g.width..(y + 1) * g.width];
        for (c, weights) in wx.iter().enumerate() {
            tmp[y * out_w + c] = weights.iter().map(|&(p, w)| row[p] * w).sum();
        }
    }
    let mut data = vec![0.0; out_w * out_h];
    for (r, weights) in wy.iter().enumerate() {
        for c in 0..out_w {
            data[r * out_w + c] = weights.iter().map(|&(p, w)| tmp[p * out_w + c] * w).sum();
        }
    }
    Grid {
        width: out_w,
        height: out_h,
        data,
    }
}

fn area_weights(n: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let cell = n as f64 / out as f64;
    (0..out)
        .map(|c| {
            let lo = c as f64 * cell;
            let hi = (c + 1) as f64 * cell;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n);
            (first..last)
                .filter_map(|p| {
                    let overlap = (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0);
                    (overlap > 0.0).then_some((p, overlap / cell))
                })
                .collect()
        })
        .collect()
}

/// Half-sample symmetric reflection of an index into `[0, n)`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Normalized 1-D Gaussian taps out to six standard deviations.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (6.0 * sigma).ceil().max(1.0) as usize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / denom).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable Gaussian blur with reflective borders; `sigma == 0` is the identity.
pub fn gaussian_smooth(g: &Grid, sigma: f64) -> Grid {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and non-negative");
    if sigma == 0.0 {
        return g.clone();
    }
    let taps = gaussian_kernel(sigma);
    let radius = (taps.len() / 2) as isize;
    let (w, h) = g.shape();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &g.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, k) in taps.iter().enumerate() {
                acc += k * row[reflect(x as isize + t as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for (t, k) in taps.iter().enumerate() {
            let src = reflect(y as isize + t as isize - radius, h);
            let src_row = &tmp[src * w..(src + 1) * w];
            let dst_row = &mut data[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += k * s;
            }
        }
    }
    Grid {
        width: w,
        height: h,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normalize_examples() {
        let g = Grid::from_vec(4, 1, vec![1.0; 4]).unwrap();
        let d = normalize(&g, Normalization::SumsToOne).unwrap();
        assert_eq!(d.grid().data(), &[0.25; 4]);

        let g = Grid::from_vec(2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(normalize(&g, Normalization::MaxOne).unwrap().grid().data(), &[0.0, 1.0]);

        let g = Grid::from_vec(2, 1, vec![1.0, 3.0]).unwrap();
        assert_eq!(normalize(&g, Normalization::SumsToOne).unwrap().grid().data(), &[0.25, 0.75]);
    }

    #[test]
    fn normalize_rejects_zero_grid() {
        let err = normalize(&Grid::zeros(3, 3), Normalization::SumsToOne).unwrap_err();
        assert!(err.to_string().contains("degenerate map"));
    }

    #[test]
    fn resize_constant_and_identity() {
        let g = Grid::filled(5, 3, 0.7);
        for (w, h) in [(1, 1), (7, 2), (20, 11)] {
            let r = resize_bilinear(&g, w, h);
            assert!(r.data().iter().all(|v| (v - 0.7).abs() < 1e-15));
        }
        let g = Grid::from_fn(6, 4, |x, y| (x * 7 + y) as f64);
        assert_eq!(resize_bilinear(&g, 6, 4), g);
    }

    #[test]
    fn resize_hand_bilinear() {
        // source x for output column c is (c + 0.5) / 2 - 0.5, clamped to [0, 1]
        let g = Grid::from_vec(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = resize_bilinear(&g, 4, 2);
        let expected = [0.0, 0.25, 0.75, 1.0];
        for y in 0..2 {
            for x in 0..4 {
                assert_abs_diff_eq!(r.get(x, y), expected[x], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn smooth_identity_and_constant() {
        let g = Grid::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 11) as f64);
        assert_eq!(gaussian_smooth(&g, 0.0), g);
        let c = Grid::filled(9, 7, 0.3);
        let s = gaussian_smooth(&c, 2.5);
        assert!(s.data().iter().all(|v| (v - 0.3).abs() < 1e-9));
    }

    #[test]
    fn smooth_impulse_matches_direct_gaussian() {
        let (n, c, sigma) = (41usize, 20usize, 2.0f64);
        let mut g = Grid::zeros(n, n);
        g.set(c, c, 1.0);
        let s = gaussian_smooth(&g, sigma);

        // oracle: sampled 2-D Gaussian over the whole grid, renormalized
        let oracle = Grid::from_fn(n, n, |x, y| {
            let dx = x as f64 - c as f64;
            let dy = y as f64 - c as f64;
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        });
        let total = oracle.sum();
        for (a, b) in s.data().iter().zip(oracle.data()) {
            assert_abs_diff_eq!(*a, b / total, epsilon = 1e-6);
        }
    }

    #[test]
    fn smooth_preserves_mass_near_borders() {
        let mut g = Grid::zeros(12, 9);
        g.set(0, 0, 1.0);
        g.set(11, 4, 2.0);
        for sigma in [0.5, 2.0, 13.0] {
            assert_abs_diff_eq!(gaussian_smooth(&g, sigma).sum(), 3.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn pool_area_preserves_mean() {
        let g = Grid::from_fn(13, 7, |x, y| (x as f64).sin() + y as f64);
        let p = pool_area(&g, 4, 3);
        let mean_in = g.sum() / 91.0;
        let mean_out = p.sum() / 12.0;
        assert_abs_diff_eq!(mean_in, mean_out, epsilon = 1e-12);
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let img = ImageBuffer::from_fn(5, 3, 3, |x, y, c| (x + 2 * y + c) as f64 / 20.0).unwrap();
        let back = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(back, img);
        assert_eq!(img.rotate90().width(), 3);
    }

    #[test]
    fn density_map_checks_tag() {
        let g = Grid::from_vec(2, 1, vec![0.5, 0.6]).unwrap();
        assert!(DensityMap::new(g.clone(), Normalization::SumsToOne).is_err());
        assert!(DensityMap::new(g, Normalization::Raw).is_ok());
    }
}
