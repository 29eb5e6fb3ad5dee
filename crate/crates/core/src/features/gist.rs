use std::f64::consts::FRAC_1_SQRT_2;

use super::{check_min_side, gradients, half};
use crate::error::Result;
use crate::raster::{pool_area, Grid, ImageBuffer};

const S: f64 = FRAC_1_SQRT_2;
const ORIENTATIONS: [(f64, f64); 4] = [(1.0, 0.0), (S, S), (0.0, 1.0), (-S, S)];
const GIST_SCALES: usize = 2;
const BLOCKS: usize = 4;
const ENERGY_DIM: usize = GIST_SCALES * ORIENTATIONS.len() * BLOCKS * BLOCKS;

/// 128 pooled orientation energies followed by 16 block color means.
pub const GIST_DIM: usize = ENERGY_DIM + BLOCKS * BLOCKS;

/// Global scene layout: unsigned directional-derivative energy at four
/// orientations and two scales, average-pooled on a 4x4 block partition,
/// then the mean color of each block.
///
/// Layout is `[scale][orientation][block_y][block_x]`, then `[block_y][block_x]`.
pub fn compute_gist(img: &ImageBuffer) -> Result<Vec<f64>> {
    check_min_side(img)?;
    let mut level = img.luminance();
    let mut out = Vec::with_capacity(GIST_DIM);
    for s in 0..GIST_SCALES {
        if s > 0 {
            level = half(&level);
        }
        let (gx, gy) = gradients(&level);
        for &(dx, dy) in &ORIENTATIONS {
            let energy = Grid::from_fn(gx.width(), gx.height(), |x, y| {
                (dx * gx.get(x, y) + dy * gy.get(x, y)).abs()
            });
            out.extend_from_slice(pool_area(&energy, BLOCKS, BLOCKS).data());
        }
    }
    out.extend_from_slice(pool_area(&img.luminance(), BLOCKS, BLOCKS).data());
    Ok(out)
}

/// Index permutation of the gist under a left-right mirror
/// (`mirrored[i] = original[perm[i]]`).
pub fn gist_flip_permutation() -> Vec<usize> {
    // mirroring swaps the 45 and 135 degree orientations and reverses block columns
    const ORIENT: [usize; 4] = [0, 3, 2, 1];
    let mut perm = Vec::with_capacity(GIST_DIM);
    for s in 0..GIST_SCALES {
        for o in ORIENT {
            for by in 0..BLOCKS {
                for bx in 0..BLOCKS {
                    perm.push(((s * 4 + o) * BLOCKS + by) * BLOCKS + (BLOCKS - 1 - bx));
                }
            }
        }
    }
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            perm.push(ENERGY_DIM + by * BLOCKS + (BLOCKS - 1 - bx));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripes(w: usize, h: usize) -> ImageBuffer {
        // vertical stripes with a diagonal accent so every orientation has energy
        ImageBuffer::from_fn(w, h, 1, |x, y, _| {
            let base = if (x / 3) % 2 == 0 { 0.2 } else { 0.8 };
            if x + y < 20 {
                base * 0.5
            } else {
                base
            }
        })
        .unwrap()
    }

    #[test]
    fn length_and_determinism() {
        let img = stripes(48, 40);
        let a = compute_gist(&img).unwrap();
        assert_eq!(a.len(), 144);
        assert_eq!(a, compute_gist(&img).unwrap());
    }

    #[test]
    fn constant_image_has_zero_orientation_energy() {
        let img = ImageBuffer::from_fn(40, 40, 3, |_, _, c| 0.1 * (c + 1) as f64).unwrap();
        let g = compute_gist(&img).unwrap();
        assert!(g[..ENERGY_DIM].iter().all(|v| *v == 0.0));
        assert!(g[ENERGY_DIM..].iter().all(|v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn rotation_permutes_orientation_channels() {
        let img = stripes(64, 64);
        let g = compute_gist(&img).unwrap();
        let r = compute_gist(&img.rotate90()).unwrap();

        // Oracle: rotating counter-clockwise maps (gx, gy) to (gy, -gx) at the
        // source pixel, so orientation o of the rotated image is orientation
        // ROT[o] of the original, and block (bx, by) came from block (3 - by, bx).
        const ROT: [usize; 4] = [2, 3, 0, 1];
        for s in 0..GIST_SCALES {
            for o in 0..4 {
                for by in 0..4 {
                    for bx in 0..4 {
                        let rotated = r[((s * 4 + o) * 4 + by) * 4 + bx];
                        let original = g[((s * 4 + ROT[o]) * 4 + bx) * 4 + (3 - by)];
                        assert!((rotated - original).abs() < 1e-12);
                    }
                }
            }
        }
        // vertical stripes: 0-degree energy dominates before, 90-degree after
        let sum = |v: &[f64], o: usize| v[o * 16..(o + 1) * 16].iter().sum::<f64>();
        assert!(sum(&g, 0) > sum(&g, 2));
        assert!(sum(&r, 2) > sum(&r, 0));
    }

    #[test]
    fn mirror_permutation_matches_flipped_image() {
        let img = stripes(56, 44);
        let g = compute_gist(&img).unwrap();
        let m = compute_gist(&img.flip_horizontal()).unwrap();
        for (i, p) in gist_flip_permutation().into_iter().enumerate() {
            assert!((m[i] - g[p]).abs() < 1e-12);
        }
    }
}
