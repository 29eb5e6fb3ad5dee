//! Synthetic corpora: Gaussian-contrast blobs on textured noise, with
//! fixations planted around the blobs.
//!
//! In family mode every image of a family shares its blob layout, tint and
//! background texture orientation, and families keep their blobs in separate
//! horizontal strips, so images of one family predict each other's fixations
//! and images of different families do not.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{seed_for, CorpusItem};
use crate::error::{Error, Result};
use crate::fixation::{write_fixations_csv, Fixation, FixationSet};
use crate::io::{encode_png, write_atomic};
use crate::raster::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub train: usize,
    pub test: usize,
    pub width: usize,
    pub height: usize,
    /// Number of families; 0 draws every layout independently.
    pub families: usize,
    pub fixations_per_image: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train: 30,
            test: 10,
            width: 96,
            height: 72,
            families: 0,
            fixations_per_image: 24,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    pub std: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub family: Option<usize>,
    pub blobs: Vec<Blob>,
    pub image: ImageBuffer,
    pub fixations: FixationSet,
}

impl SynthImage {
    pub fn to_item(&self) -> CorpusItem {
        CorpusItem::new(self.id.clone(), self.image.clone(), self.fixations.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub train: Vec<SynthImage>,
    pub test: Vec<SynthImage>,
}

impl SynthCorpus {
    pub fn train_items(&self) -> Vec<CorpusItem> {
        self.train.iter().map(SynthImage::to_item).collect()
    }

    pub fn test_items(&self) -> Vec<CorpusItem> {
        self.test.iter().map(SynthImage::to_item).collect()
    }
}

/// Appearance shared by the images of one family (or drawn per image).
struct Style {
    blobs: Vec<Blob>,
    tint: [f64; 3],
    background: [f64; 3],
    orientation: f64,
}

/// Fully saturated-ish color for a hue in `[0, 1)`; every channel in `[lo, 1]`.
fn hue_color(hue: f64, lo: f64) -> [f64; 3] {
    let h = hue.rem_euclid(1.0) * 6.0;
    let f = h - h.floor();
    let (r, g, b) = match h as usize {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    };
    [lo + (1.0 - lo) * r, lo + (1.0 - lo) * g, lo + (1.0 - lo) * b]
}

fn draw_blob(rng: &mut ChaCha8Rng, x: f64, y: f64) -> Blob {
    Blob {
        x,
        y,
        std: rng.gen_range(5.0..8.0),
        amplitude: rng.gen_range(0.45..0.6),
    }
}

fn independent_style(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Style {
    let count = rng.gen_range(1..=3);
    let nx = Normal::new(w as f64 / 2.0, 0.22 * w as f64).expect("valid normal");
    let ny = Normal::new(h as f64 / 2.0, 0.22 * h as f64).expect("valid normal");
    let margin = 6.0;
    let blobs = (0..count)
        .map(|_| {
            let x = nx.sample(rng).clamp(margin, w as f64 - 1.0 - margin);
            let y = ny.sample(rng).clamp(margin, h as f64 - 1.0 - margin);
            draw_blob(rng, x, y)
        })
        .collect();
    Style {
        blobs,
        tint: hue_color(rng.gen(), 0.7),
        background: hue_color(rng.gen(), 0.75),
        orientation: rng.gen_range(0.0..PI),
    }
}

fn family_style(seed: u64, family: usize, families: usize, w: usize, h: usize) -> Style {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, &format!("family-{family}")));
    let strip = h as f64 / families as f64;
    let margin: f64 = 6.0;
    let (top, bottom) = (
        (family as f64 * strip + margin.min(strip / 2.0)),
        ((family + 1) as f64 * strip - margin.min(strip / 2.0)),
    );
    let count = rng.gen_range(1..=3);
    let blobs = (0..count)
        .map(|_| {
            let x = rng.gen_range(margin..w as f64 - 1.0 - margin);
            let y = if bottom > top { rng.gen_range(top..bottom) } else { top };
            draw_blob(&mut rng, x, y)
        })
        .collect();
    // spread family hues and texture orientations evenly
    let phase = family as f64 / families as f64;
    Style {
        blobs,
        tint: hue_color(phase + 0.05, 0.7),
        background: hue_color(phase + 0.5, 0.75),
        orientation: PI * phase,
    }
}

fn render(rng: &mut ChaCha8Rng, style: &Style, w: usize, h: usize) -> Result<ImageBuffer> {
    let wavelength = 6.0;
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let (c, s) = (style.orientation.cos(), style.orientation.sin());
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let texture = 0.06 * (2.0 * PI * (xf * c + yf * s) / wavelength + phase).sin();
            let noise = rng.gen_range(-0.04..0.04);
            let blob: f64 = style
                .blobs
                .iter()
                .map(|b| {
                    let r2 = (xf - b.x).powi(2) + (yf - b.y).powi(2);
                    b.amplitude * (-r2 / (2.0 * b.std * b.std)).exp()
                })
                .sum();
            for ch in 0..3 {
                let v = 0.3 * style.background[ch] + texture + noise + blob * style.tint[ch];
                // quantize to 8 bits so the image survives a PNG round trip unchanged
                data.push((v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
            }
        }
    }
    ImageBuffer::new(w, h, 3, data)
}

fn plant_fixations(
    rng: &mut ChaCha8Rng,
    id: &str,
    blobs: &[Blob],
    count: usize,
    w: usize,
    h: usize,
) -> Result<FixationSet> {
    let clamp = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as u32;
    // about one in ten fixations wanders near the center instead of a blob
    let scatter_x = Normal::new(w as f64 / 2.0, 0.2 * w as f64).expect("valid normal");
    let scatter_y = Normal::new(h as f64 / 2.0, 0.2 * h as f64).expect("valid normal");
    let points = (0..count)
        .map(|_| {
            if rng.gen_bool(0.1) {
                Fixation::new(clamp(scatter_x.sample(rng), w), clamp(scatter_y.sample(rng), h))
            } else {
                let b = blobs[rng.gen_range(0..blobs.len())];
                let spread = Normal::new(0.0, 0.6 * b.std).expect("valid normal");
                Fixation::new(clamp(b.x + spread.sample(rng), w), clamp(b.y + spread.sample(rng), h))
            }
        })
        .collect();
    FixationSet::new(id, w, h, points)
}

fn make_image(cfg: &SynthConfig, id: String, index: usize) -> Result<SynthImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(cfg.seed, &id));
    let (w, h) = (cfg.width, cfg.height);
    let (family, mut style) = if cfg.families == 0 {
        (None, independent_style(&mut rng, w, h))
    } else {
        let f = index % cfg.families;
        (Some(f), family_style(cfg.seed, f, cfg.families, w, h))
    };
    if family.is_some() {
        // small per-image jitter of the shared layout
        let jitter = Normal::new(0.0, 1.0).expect("valid normal");
        for b in &mut style.blobs {
            b.x = (b.x + jitter.sample(&mut rng)).clamp(0.0, (w - 1) as f64);
            b.y = (b.y + jitter.sample(&mut rng)).clamp(0.0, (h - 1) as f64);
        }
    }
    let image = render(&mut rng, &style, w, h)?;
    let fixations = plant_fixations(&mut rng, &id, &style.blobs, cfg.fixations_per_image, w, h)?;
    Ok(SynthImage {
        id,
        family,
        blobs: style.blobs,
        image,
        fixations,
    })
}

/// Generates `cfg.train` training and `cfg.test` test images. Each image is
/// drawn from its own seed (derived from `cfg.seed` and its id), so the
/// result is fully determined by the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.width < 32 || cfg.height < 32 {
        return Err(Error::InvalidArgument(format!(
            "synthetic images must be at least 32x32, got {}x{}",
            cfg.width, cfg.height
        )));
    }
    if cfg.fixations_per_image == 0 {
        return Err(Error::InvalidArgument("at least one fixation per image is required".into()));
    }
    let split = |prefix: &str, count: usize| {
        (0..count)
            .map(|i| make_image(cfg, format!("{prefix}_{i:03}"), i))
            .collect::<Result<Vec<_>>>()
    };
    Ok(SynthCorpus {
        train: split("train", cfg.train)?,
        test: split("test", cfg.test)?,
    })
}

fn write_split(images: &[SynthImage], dir: &Path) -> Result<()> {
    let image_dir = dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;
    for img in images {
        write_atomic(&image_dir.join(format!("{}.png", img.id)), &encode_png(&img.image)?)?;
    }
    let csv = write_fixations_csv(images.iter().map(|i| &i.fixations))?;
    write_atomic(&dir.join("fixations.csv"), &csv)
}

/// Writes `train/` and `test/` under `out`, each holding `images/<id>.png`
/// and `fixations.csv`. Empty splits are not written.
pub fn write_corpus(corpus: &SynthCorpus, out: &Path) -> Result<()> {
    for (name, images) in [("train", &corpus.train), ("test", &corpus.test)] {
        if !images.is_empty() {
            write_split(images, &out.join(name))?;
        }
    }
    Ok(())
}
