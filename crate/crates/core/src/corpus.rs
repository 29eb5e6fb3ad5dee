//! Loading image directories paired with a fixation CSV.

use std::path::Path;

use log::warn;

use crate::error::Result;
use crate::fixation::{read_fixations_csv, FixationSet};
use crate::io::{image_id, list_images, load_image};
use crate::raster::ImageBuffer;

/// An image together with the fixations recorded on it (possibly none).
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub image: ImageBuffer,
    pub fixations: FixationSet,
}

impl CorpusItem {
    pub fn new(id: impl Into<String>, image: ImageBuffer, fixations: FixationSet) -> Self {
        CorpusItem {
            id: id.into(),
            image,
            fixations,
        }
    }
}

/// Every image in `images_dir` (sorted by id), each with its fixations from
/// `fixations_csv`. Out-of-bounds fixations are an error; fixations naming
/// unknown images are ignored with a warning.
pub fn load_corpus(images_dir: &Path, fixations_csv: &Path) -> Result<Vec<CorpusItem>> {
    let mut table = read_fixations_csv(fixations_csv)?;
    let mut items = Vec::new();
    for path in list_images(images_dir)? {
        let id = image_id(&path);
        let image = load_image(&path)?;
        let points = table.remove(&id).unwrap_or_default();
        let fixations = FixationSet::new(id.clone(), image.width(), image.height(), points)?;
        items.push(CorpusItem {
            id,
            image,
            fixations,
        });
    }
    for id in table.keys() {
        warn!("fixations for {id:?} have no matching image in {}", images_dir.display());
    }
    Ok(items)
}

/// Stable 64-bit FNV-1a hash, used to derive per-image seeds from ids.
pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer: decorrelates combined seeds.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for work tied to one image, independent of corpus order.
pub fn seed_for(base: u64, image_id: &str) -> u64 {
    mix_seed(base, fnv1a(image_id))
}
