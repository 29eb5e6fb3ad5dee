//! File formats: raw grid maps, PGM export, image decoding, and the
//! little-endian record helpers the other binary formats share.

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Grid, ImageBuffer};

pub const MAP_MAGIC: &[u8] = b"ISEELMAP";
pub const MAP_VERSION: u32 = 1;

/// Appends little-endian fields to a byte buffer.
#[derive(Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8], version: u32) -> Self {
        let mut e = Encoder { buf: Vec::new() };
        e.buf.extend_from_slice(magic);
        e.u32(version);
        e
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f64) {
        self.buf.extend_from_slice(&(v as f32).to_le_bytes());
    }

    pub fn f32s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.f32(*v);
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Reads little-endian fields, reporting truncation as a length mismatch.
pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    /// Checks magic and version, leaving the cursor on the first header field.
    pub fn open(
        buf: &'a [u8],
        magic: &'static [u8],
        version: u32,
    ) -> Result<Self> {
        let name = std::str::from_utf8(magic).expect("ascii magic");
        if buf.len() < magic.len() || &buf[..magic.len()] != magic {
            return Err(Error::BadMagic { expected: name });
        }
        let mut d = Decoder {
            buf,
            pos: magic.len(),
        };
        let found = d.u32()?;
        if found != version {
            return Err(Error::UnsupportedVersion {
                found,
                expected: version,
            });
        }
        Ok(d)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::LengthMismatch {
                expected: self.pos + n,
                actual: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Fails unless exactly `n` more bytes remain, so truncation is caught before parsing.
    pub fn expect_remaining(&self, n: usize) -> Result<()> {
        let expected = self.pos + n;
        if expected != self.buf.len() {
            return Err(Error::LengthMismatch {
                expected,
                actual: self.buf.len(),
            });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// `n` floats, rejecting NaN and infinities.
    pub fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or(Error::InvalidData("size overflow".into()))?)?;
        let out: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(out)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::LengthMismatch {
                expected: self.pos,
                actual: self.buf.len(),
            });
        }
        Ok(())
    }
}

/// Rounds through `f32`, the precision every on-disk payload uses.
pub(crate) fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

pub(crate) fn quantize_all(vs: &[f64]) -> Vec<f64> {
    vs.iter().map(|v| quantize(*v)).collect()
}

pub fn encode_map(g: &Grid) -> Vec<u8> {
    let mut e = Encoder::new(MAP_MAGIC, MAP_VERSION);
    e.u32(g.width() as u32);
    e.u32(g.height() as u32);
    e.f32s(g.data());
    e.finish()
}

pub fn decode_map(bytes: &[u8]) -> Result<Grid> {
    let mut d = Decoder::open(bytes, MAP_MAGIC, MAP_VERSION)?;
    let w = d.u32()? as usize;
    let h = d.u32()? as usize;
    d.expect_remaining(w * h * 4)?;
    let data = d.f32s(w * h, "map")?;
    d.finish()?;
    Grid::from_vec(w, h, data)
}

/// 8-bit binary PGM with values min-max scaled to 0..=255.
pub fn encode_pgm(g: &Grid) -> Vec<u8> {
    let (lo, hi) = (g.min(), g.max());
    let span = hi - lo;
    let mut out = format!("P5\n{} {}\n255\n", g.width(), g.height()).into_bytes();
    out.extend(g.data().iter().map(|v| {
        if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn save_map(g: &Grid, path: &Path) -> Result<()> {
    write_atomic(path, &encode_map(g))
}

pub fn load_map(path: &Path) -> Result<Grid> {
    decode_map(&read_file(path)?)
}

/// Decodes PNG or PNM (P2/P3/P5/P6) into gray or RGB samples in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = read_file(path)?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let gray = matches!(
        decoded.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = if gray {
        decoded.to_luma8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
    } else {
        decoded.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
    };
    ImageBuffer::new(w, h, if gray { 1 } else { 3 }, data)
}

/// Encodes an image as binary PNM (P5 for gray, P6 for RGB).
pub fn encode_pnm(img: &ImageBuffer) -> Vec<u8> {
    let tag = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{tag}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

/// Encodes an image as PNG.
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(&bytes, img.width() as u32, img.height() as u32, color)
        .map_err(|e| Error::InvalidData(e.to_string()))?;
    Ok(out)
}

/// Whether a path looks like an image this crate can decode.
pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "ppm" | "pgm" | "pnm")
    )
}

/// Image files in a directory, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image_path(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Image id of a file: its stem.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_round_trip_and_errors() {
        let g = Grid::from_fn(3, 2, |x, y| x as f64 * 0.25 + y as f64);
        let bytes = encode_map(&g);
        assert_eq!(&bytes[..8], b"ISEELMAP");
        assert_eq!(decode_map(&bytes).unwrap(), g);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_map(&bad).unwrap_err().to_string().contains("bad magic"));

        let mut bumped = bytes.clone();
        bumped[8] = 2;
        assert!(decode_map(&bumped)
            .unwrap_err()
            .to_string()
            .contains("unsupported version"));

        assert!(decode_map(&bytes[..bytes.len() - 1])
            .unwrap_err()
            .to_string()
            .contains("length mismatch"));
    }

    #[test]
    fn pgm_scales_min_max() {
        let g = Grid::from_vec(3, 1, vec![2.0, 3.0, 4.0]).unwrap();
        let pgm = encode_pgm(&g);
        assert!(pgm.starts_with(b"P5\n3 1\n255\n"));
        assert_eq!(&pgm[pgm.len() - 3..], &[0, 128, 255]);
    }

    #[test]
    fn pnm_and_png_decode_back() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(4, 3, 3, |x, y, c| ((x + y + c) % 3) as f64 / 2.0).unwrap();
        for (name, bytes) in [
            ("a.ppm", encode_pnm(&img)),
            ("a.png", encode_png(&img).unwrap()),
        ] {
            let p = dir.path().join(name);
            write_atomic(&p, &bytes).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back.channels(), 3);
            for (a, b) in back.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1.0 / 255.0);
            }
        }
    }
}
