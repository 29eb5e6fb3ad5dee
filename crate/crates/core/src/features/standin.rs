use std::f64::consts::FRAC_1_SQRT_2;

use super::{check_min_side, gradients, half, FeatureMap};
use crate::error::{Error, Result};
use crate::raster::{pool_area, resize_bilinear, Grid, ImageBuffer};

/// Finest-scale cell size in pixels.
pub const STANDIN_STRIDE: usize = 8;
/// Eight rectified directional derivatives followed by R, G, B contrast
/// against the level's mean color.
pub const CHANNELS_PER_SCALE: usize = 11;
pub const DEFAULT_SCALES: usize = 3;
pub const MIN_IMAGE_SIDE: usize = 32;

const S: f64 = FRAC_1_SQRT_2;

/// Unit directions at 0, 45, ..., 315 degrees.
pub(crate) const DIRECTIONS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (S, S),
    (0.0, 1.0),
    (-S, S),
    (-1.0, 0.0),
    (-S, -S),
    (0.0, -1.0),
    (S, -S),
];

/// Mirroring x negates the horizontal component of every direction.
const MIRROR: [usize; 8] = [4, 3, 2, 1, 0, 7, 6, 5];

/// Per-pixel channel responses of one pyramid level.
fn responses(rgb: &[Grid; 3]) -> Vec<Grid> {
    let (w, h) = rgb[0].shape();
    let lum = Grid::from_fn(w, h, |x, y| {
        (rgb[0].get(x, y) + rgb[1].get(x, y) + rgb[2].get(x, y)) / 3.0
    });
    let (gx, gy) = gradients(&lum);
    let mut out: Vec<Grid> = DIRECTIONS
        .iter()
        .map(|&(dx, dy)| {
            Grid::from_fn(w, h, |x, y| (dx * gx.get(x, y) + dy * gy.get(x, y)).max(0.0))
        })
        .collect();
    out.extend(rgb.iter().map(|c| {
        let mean = c.sum() / c.data().len() as f64;
        c.map(|v| v - mean)
    }));
    out
}

/// Multi-scale filter-bank features: for each level of a dyadic pyramid the
/// eleven channel responses are area-pooled on a stride-8 partition of that
/// level, bilinearly upsampled to the finest cell grid, and concatenated.
pub fn extract_standin_features(img: &ImageBuffer, scales: usize) -> Result<FeatureMap> {
    if scales == 0 {
        return Err(Error::InvalidArgument("scales must be at least 1".into()));
    }
    check_min_side(img)?;
    let (w, h) = (img.width(), img.height());
    let gw = w.div_ceil(STANDIN_STRIDE);
    let gh = h.div_ceil(STANDIN_STRIDE);

    let mut level = [img.channel(0), img.channel(1), img.channel(2)];
    let mut per_scale: Vec<Vec<Grid>> = Vec::with_capacity(scales);
    for s in 0..scales {
        if s > 0 {
            level = [half(&level[0]), half(&level[1]), half(&level[2])];
        }
        let (lw, lh) = level[0].shape();
        let cw = lw.div_ceil(STANDIN_STRIDE);
        let ch = lh.div_ceil(STANDIN_STRIDE);
        let pooled = responses(&level)
            .iter()
            .map(|r| resize_bilinear(&pool_area(r, cw, ch), gw, gh))
            .collect();
        per_scale.push(pooled);
    }

    let dim = scales * CHANNELS_PER_SCALE;
    let mut data = Vec::with_capacity(gw * gh * dim);
    for y in 0..gh {
        for x in 0..gw {
            for channels in &per_scale {
                data.extend(channels.iter().map(|c| c.get(x, y)));
            }
        }
    }
    FeatureMap::new(gw, gh, dim, STANDIN_STRIDE, w, h, data)
}

/// Channel permutation that accompanies a left-right mirror of the image.
pub fn feature_flip_permutation(scales: usize) -> Vec<usize> {
    (0..scales)
        .flat_map(|s| {
            let base = s * CHANNELS_PER_SCALE;
            MIRROR
                .iter()
                .map(move |&m| base + m)
                .chain((8..CHANNELS_PER_SCALE).map(move |c| base + c))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |x, y, c| {
            let v = ((x * 73 + y * 151 + c * 29) % 97) as f64 / 96.0;
            0.2 + 0.6 * v
        })
        .unwrap()
    }

    #[test]
    fn constant_image_has_no_gradient_energy() {
        let img = ImageBuffer::from_fn(40, 48, 1, |_, _, _| 0.4).unwrap();
        let f = extract_standin_features(&img, 3).unwrap();
        for s in 0..3 {
            for c in 0..8 {
                assert!(f.channel(s * CHANNELS_PER_SCALE + c).data().iter().all(|v| *v == 0.0));
            }
            let gray = f.channel(s * CHANNELS_PER_SCALE + 8);
            assert!(gray.data().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn dim_scales_with_pyramid_depth() {
        let img = noise_image(64, 40);
        let one = extract_standin_features(&img, 1).unwrap();
        let two = extract_standin_features(&img, 2).unwrap();
        assert_eq!(two.dim(), 2 * one.dim());
        assert_eq!((one.grid_w(), one.grid_h()), (8, 5));
    }

    #[test]
    fn small_image_rejected() {
        let img = ImageBuffer::from_fn(31, 64, 1, |_, _, _| 0.0).unwrap();
        assert!(matches!(
            extract_standin_features(&img, 1),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn vertical_step_edge_excites_horizontal_gradient_near_edge() {
        // dark left half, bright right half: the +x derivative fires along x = 31/32
        let img = ImageBuffer::from_fn(64, 32, 1, |x, _, _| if x < 32 { 0.1 } else { 0.9 }).unwrap();
        let f = extract_standin_features(&img, 1).unwrap();
        let horiz = f.channel(0);

        // oracle: the +x derivative is 0.4 on the two pixels straddling the step,
        // so pooled over an 8-wide cell it is 0.05 in cells 3 and 4 and 0 elsewhere
        for y in 0..f.grid_h() {
            for x in 0..f.grid_w() {
                let expected = if x == 3 || x == 4 { 0.4 / 8.0 } else { 0.0 };
                assert!((horiz.get(x, y) - expected).abs() < 1e-12);
            }
            assert!(horiz.get(3, y) > horiz.get(0, y));
            assert!(horiz.get(4, y) > horiz.get(7, y));
        }
        // the opposite direction never fires on a rising edge
        assert!(f.channel(4).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic() {
        let img = noise_image(48, 56);
        let a = extract_standin_features(&img, 3).unwrap();
        let b = extract_standin_features(&img, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mirror_flips_grid_and_swaps_orientation_pairs() {
        let img = noise_image(72, 40);
        let f = extract_standin_features(&img, 3).unwrap();
        let g = extract_standin_features(&img.flip_horizontal(), 3).unwrap();
        let expected = f.flip_horizontal(&feature_flip_permutation(3));
        for (a, b) in g.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
