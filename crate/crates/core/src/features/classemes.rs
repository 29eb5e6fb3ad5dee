use std::f64::consts::PI;

use super::{check_min_side, gradients};
use crate::error::Result;
use crate::raster::ImageBuffer;

const COLOR_BINS: usize = 8;
const ORIENT_BINS: usize = 4;
const TEXTURE_BINS: usize = ORIENT_BINS * 2;
/// Soft knee of the gradient-magnitude split.
const MAGNITUDE_KNEE: f64 = 0.05;

pub const CLASSEMES_DIM: usize = COLOR_BINS * TEXTURE_BINS;

/// Probability-like stand-in for class scores: a soft joint histogram of
/// color (one soft bit per RGB channel) and texture (unsigned gradient
/// orientation in four bins times a soft low/high magnitude split).
///
/// Index is `color * 8 + orientation * 2 + magnitude`. The result sums to one.
pub fn compute_standin_classemes(img: &ImageBuffer) -> Result<Vec<f64>> {
    check_min_side(img)?;
    let (gx, gy) = gradients(&img.luminance());
    let mut hist = vec![0.0; CLASSEMES_DIM];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let rgb = img.rgb(x, y);
            let mut color = [1.0; COLOR_BINS];
            for (bin, w) in color.iter_mut().enumerate() {
                for (ch, v) in rgb.iter().enumerate() {
                    *w *= if bin >> ch & 1 == 1 { *v } else { 1.0 - v };
                }
            }
            let texture = texture_weights(gx.get(x, y), gy.get(x, y));
            for (c, cw) in color.iter().enumerate() {
                for (t, tw) in texture.iter().enumerate() {
                    hist[c * TEXTURE_BINS + t] += cw * tw;
                }
            }
        }
    }
    let total: f64 = hist.iter().sum();
    hist.iter_mut().for_each(|h| *h /= total);
    Ok(hist)
}

fn texture_weights(gx: f64, gy: f64) -> [f64; TEXTURE_BINS] {
    let magnitude = gx.hypot(gy);
    let high = magnitude / (magnitude + MAGNITUDE_KNEE);
    let mut orient = [0.0; ORIENT_BINS];
    if magnitude == 0.0 {
        orient = [1.0 / ORIENT_BINS as f64; ORIENT_BINS];
    } else {
        // unsigned angle in bin units, linearly shared between neighbouring bins
        let angle = gy.atan2(gx).rem_euclid(PI);
        let pos = angle / (PI / ORIENT_BINS as f64);
        let lo = pos.floor() as usize % ORIENT_BINS;
        let frac = pos - pos.floor();
        orient[lo] += 1.0 - frac;
        orient[(lo + 1) % ORIENT_BINS] += frac;
    }
    let mut out = [0.0; TEXTURE_BINS];
    for (o, ow) in orient.iter().enumerate() {
        out[o * 2] = ow * (1.0 - high);
        out[o * 2 + 1] = ow * high;
    }
    out
}

/// Index permutation under a left-right mirror: the 45 and 135 degree
/// orientation bins trade places.
pub fn classemes_flip_permutation() -> Vec<usize> {
    const ORIENT: [usize; ORIENT_BINS] = [0, 3, 2, 1];
    (0..COLOR_BINS)
        .flat_map(|c| {
            ORIENT
                .iter()
                .flat_map(move |&o| [c * TEXTURE_BINS + o * 2, c * TEXTURE_BINS + o * 2 + 1])
        })
        .collect()
}
