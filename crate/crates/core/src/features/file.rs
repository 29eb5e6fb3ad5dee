use std::path::Path;

use super::{FeatureMap, RawDescriptor};
use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic, Decoder, Encoder};

pub const FEAT_MAGIC: &[u8] = b"ISEELFEAT";
pub const DESC_MAGIC: &[u8] = b"ISEELDESC";
const VERSION: u32 = 1;

pub fn encode_features(f: &FeatureMap) -> Vec<u8> {
    let mut e = Encoder::new(FEAT_MAGIC, VERSION);
    for v in [f.source_w, f.source_h, f.grid_w, f.grid_h, f.dim, f.stride] {
        e.u32(v as u32);
    }
    e.f32s(&f.data);
    e.finish()
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMap> {
    let mut d = Decoder::open(bytes, FEAT_MAGIC, VERSION)?;
    let mut header = [0usize; 6];
    for h in header.iter_mut() {
        *h = d.u32()? as usize;
    }
    let [source_w, source_h, grid_w, grid_h, dim, stride] = header;
    let n = grid_w
        .checked_mul(grid_h)
        .and_then(|c| c.checked_mul(dim))
        .ok_or_else(|| Error::InvalidData("feature header overflows".into()))?;
    d.expect_remaining(n * 4)?;
    let data = d.f32s(n, "feature map")?;
    d.finish()?;
    FeatureMap::new(grid_w, grid_h, dim, stride, source_w, source_h, data)
}

/// Reads a feature map stored by an external extractor, without transforming values.
pub fn ingest_features(path: &Path) -> Result<FeatureMap> {
    decode_features(&read_file(path)?).map_err(|e| annotate(path, e))
}

pub fn save_features(f: &FeatureMap, path: &Path) -> Result<()> {
    write_atomic(path, &encode_features(f))
}

pub fn encode_descriptor(d: &RawDescriptor) -> Vec<u8> {
    let mut e = Encoder::new(DESC_MAGIC, VERSION);
    e.u32(d.classemes.len() as u32);
    e.u32(d.gist.len() as u32);
    e.f32s(&d.classemes);
    e.f32s(&d.gist);
    e.finish()
}

pub fn decode_descriptor(bytes: &[u8]) -> Result<RawDescriptor> {
    let mut d = Decoder::open(bytes, DESC_MAGIC, VERSION)?;
    let nc = d.u32()? as usize;
    let ng = d.u32()? as usize;
    d.expect_remaining((nc + ng) * 4)?;
    let classemes = d.f32s(nc, "classemes")?;
    let gist = d.f32s(ng, "gist")?;
    d.finish()?;
    if classemes.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidData("classemes must be non-negative".into()));
    }
    Ok(RawDescriptor { classemes, gist })
}

pub fn ingest_descriptor(path: &Path) -> Result<RawDescriptor> {
    decode_descriptor(&read_file(path)?).map_err(|e| annotate(path, e))
}

pub fn save_descriptor(d: &RawDescriptor, path: &Path) -> Result<()> {
    write_atomic(path, &encode_descriptor(d))
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Io { .. } => e,
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_map() -> FeatureMap {
        let data = (0..4 * 3 * 5).map(|i| (i as f32 * 0.37).sin() as f64).collect();
        FeatureMap::new(4, 3, 5, 16, 60, 40, data).unwrap()
    }

    #[test]
    fn truncated_file_reports_length_mismatch() {
        let bytes = encode_features(&sample_map());
        let err = decode_features(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("length mismatch"), "{err}");
    }

    #[test]
    fn nan_cell_rejected() {
        let mut bytes = encode_features(&sample_map());
        let at = bytes.len() - 8;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode_features(&bytes).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn wrong_magic_and_version() {
        let bytes = encode_features(&sample_map());
        let mut bad = bytes.clone();
        bad[3] = b'?';
        assert!(decode_features(&bad).unwrap_err().to_string().contains("bad magic"));
        let mut newer = bytes;
        newer[9] = 7;
        assert!(matches!(
            decode_features(&newer),
            Err(Error::UnsupportedVersion { found: 7, .. })
        ));
    }

    #[test]
    fn ingest_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.iseelfeat");
        std::fs::write(&p, b"ISEELFEAT").unwrap();
        let err = ingest_features(&p).unwrap_err();
        assert!(err.to_string().contains("x.iseelfeat"));
    }

    #[test]
    fn descriptor_round_trip() {
        let d = RawDescriptor {
            classemes: vec![0.25, 0.75],
            gist: vec![-1.5, 2.0, 0.125],
        };
        assert_eq!(decode_descriptor(&encode_descriptor(&d)).unwrap(), d);
    }

    proptest! {
        #[test]
        fn feature_file_round_trip_is_bit_identical(
            (gw, gh, dim, values) in (1usize..5, 1usize..5, 1usize..6).prop_flat_map(|(w, h, k)| {
                (Just(w), Just(h), Just(k), prop::collection::vec(-1e6f32..1e6, w * h * k))
            })
        ) {
            let data = values.iter().map(|v| *v as f64).collect();
            let f = FeatureMap::new(gw, gh, dim, 8, gw * 8, gh * 8, data).unwrap();
            let bytes = encode_features(&f);
            let back = decode_features(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(encode_features(&back), bytes);
        }
    }
}
