use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{BankEntry, SceneBank};
use crate::elm::{Activation, ElmUnit, HiddenLayer};
use crate::error::{Error, Result};
use crate::features::Standardization;
use crate::io::{read_file, write_atomic, Decoder, Encoder};

pub const BANK_MAGIC: &[u8] = b"ISEELBNK";
pub const BANK_VERSION: u32 = 1;

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidData(format!("{what} {v} does not fit the bank format")))
}

/// Serializes a bank. Entries are written in id order; every float as
/// little-endian `f32`.
pub fn encode_bank(bank: &SceneBank) -> Result<Vec<u8>> {
    let mut enc = Encoder::new(BANK_MAGIC, BANK_VERSION);
    enc.u32(dim_u32(bank.descriptor_dim(), "descriptor dimension")?);
    enc.u32(dim_u32(bank.feature_dim(), "feature dimension")?);
    enc.u32(dim_u32(bank.hidden(), "hidden size")?);
    enc.u8(bank.activation().code());
    enc.u32(dim_u32(bank.len(), "entry count")?);
    enc.f32s(&bank.standardization().mean);
    enc.f32s(&bank.standardization().std);
    for e in bank.entries() {
        let id = e.id.as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidData(format!("bank id {:?} is too long", e.id)))?;
        enc.u16(len);
        enc.bytes(id);
        enc.f32s(&e.raw);
        let layer = e.unit.layer();
        // omega row-major: node by node
        let omega: Vec<f64> = layer.omega.transpose().iter().copied().collect();
        enc.f32s(&omega);
        enc.f32s(layer.bias.as_slice());
        enc.f32s(e.unit.gamma().as_slice());
    }
    Ok(enc.finish())
}

pub fn decode_bank(bytes: &[u8]) -> Result<SceneBank> {
    let mut dec = Decoder::open(bytes, BANK_MAGIC, BANK_VERSION)?;
    let d = dec.u32()? as usize;
    let k = dec.u32()? as usize;
    let l = dec.u32()? as usize;
    let activation = Activation::from_code(dec.u8()?)?;
    let count = dec.u32()? as usize;
    if d == 0 || k == 0 || l == 0 {
        return Err(Error::InvalidData("bank header has a zero dimension".into()));
    }
    if count == 0 {
        return Err(Error::EmptyBank);
    }
    let mean = dec.f32s(d, "bank standardization")?;
    let std = dec.f32s(d, "bank standardization")?;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = dec.u16()? as usize;
        let id = std::str::from_utf8(dec.bytes(len)?)
            .map_err(|_| Error::InvalidData("bank id is not UTF-8".into()))?
            .to_string();
        let raw = dec.f32s(d, "bank descriptor")?;
        let omega = dec.f32s(l * k, "bank unit weights")?;
        let bias = dec.f32s(l, "bank unit weights")?;
        let gamma = dec.f32s(l, "bank unit weights")?;
        let layer = HiddenLayer {
            omega: DMatrix::from_row_slice(l, k, &omega),
            bias: DVector::from_vec(bias),
        };
        let unit = ElmUnit::from_parts(layer, DVector::from_vec(gamma), activation, None)?;
        entries.push(BankEntry {
            id,
            raw,
            combined: Vec::new(),
            unit,
        });
    }
    dec.finish()?;
    SceneBank::from_parts(entries, Standardization { mean, std }, activation, None)
}

pub fn save_bank(bank: &SceneBank, path: &Path) -> Result<()> {
    write_atomic(path, &encode_bank(bank)?)
}

pub fn load_bank(path: &Path) -> Result<SceneBank> {
    let bytes = read_file(path)?;
    decode_bank(&bytes).map_err(|e| match e {
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
    use crate::elm::init_hidden;

    fn bank() -> SceneBank {
        let entries = ["b", "a"]
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let layer = init_hidden(4, 3, i as u64);
                let gamma = DVector::from_vec(vec![0.5, -0.25, 0.125 * i as f64]);
                BankEntry {
                    id: id.to_string(),
                    raw: vec![0.25 * i as f64, 1.5, -2.0],
                    combined: Vec::new(),
                    unit: ElmUnit::from_parts(layer, gamma, Activation::Sigmoid, None).unwrap(),
                }
            })
            .collect();
        let stats = Standardization {
            mean: vec![0.125, 1.5, -2.0],
            std: vec![0.5, 1.0, 2.0],
        };
        SceneBank::from_parts(entries, stats, Activation::Sigmoid, None).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let b = bank();
        let bytes = encode_bank(&b).unwrap();
        let back = decode_bank(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(encode_bank(&back).unwrap(), bytes);
        assert_eq!(back.entries()[0].id, "a");
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode_bank(&bank()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_bank(&bad).unwrap_err().to_string().contains("bad magic"));
        bytes[8] = 2;
        assert!(decode_bank(&bytes)
            .unwrap_err()
            .to_string()
            .contains("unsupported version"));
    }

    #[test]
    fn truncation_and_trailing_bytes_rejected() {
        let bytes = encode_bank(&bank()).unwrap();
        assert!(decode_bank(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_bank(&long).is_err());
    }
}
