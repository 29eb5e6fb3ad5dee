//! Eye-fixation records, their CSV form, and ground-truth density maps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{normalize, DensityMap, Grid, Normalization};

/// One fixation at a 0-indexed pixel center.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fixation {
    pub x: u32,
    pub y: u32,
    pub observer: Option<String>,
}

impl Fixation {
    pub fn new(x: u32, y: u32) -> Self {
        Fixation { x, y, observer: None }
    }
}

/// The fixations recorded on one image, validated against its extent.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationSet {
    image_id: String,
    width: usize,
    height: usize,
    points: Vec<Fixation>,
}

impl FixationSet {
    pub fn new(
        image_id: impl Into<String>,
        width: usize,
        height: usize,
        points: Vec<Fixation>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        if let Some(p) = points
            .iter()
            .find(|p| p.x as usize >= width || p.y as usize >= height)
        {
            return Err(Error::FixationOutOfBounds {
                image_id,
                x: p.x as i64,
                y: p.y as i64,
                width,
                height,
            });
        }
        Ok(FixationSet {
            image_id,
            width,
            height,
            points,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn points(&self) -> &[Fixation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn flip_horizontal(&self) -> FixationSet {
        let points = self
            .points
            .iter()
            .map(|p| Fixation {
                x: (self.width - 1) as u32 - p.x,
                ..p.clone()
            })
            .collect();
        FixationSet {
            points,
            ..self.clone()
        }
    }

    /// The same points mapped onto a `width` x `height` image, keeping relative position.
    pub fn rescaled(&self, width: usize, height: usize) -> FixationSet {
        let map = |v: u32, from: usize, to: usize| -> u32 {
            let pos = (v as f64 + 0.5) * to as f64 / from as f64 - 0.5;
            pos.round().clamp(0.0, (to - 1) as f64) as u32
        };
        let points = self
            .points
            .iter()
            .map(|p| Fixation {
                x: map(p.x, self.width, width),
                y: map(p.y, self.height, height),
                observer: p.observer.clone(),
            })
            .collect();
        FixationSet {
            image_id: self.image_id.clone(),
            width,
            height,
            points,
        }
    }
}

/// Ground-truth bandwidth used when none is configured: 3% of the longer side.
pub fn default_sigma_gt(width: usize, height: usize) -> f64 {
    0.03 * width.max(height) as f64
}

/// Sum of isotropic Gaussians centered on each fixation, normalized to unit mass.
pub fn fixations_to_density(
    fix: &FixationSet,
    width: usize,
    height: usize,
    sigma_gt: f64,
) -> Result<DensityMap> {
    if fix.is_empty() {
        return Err(Error::NoFixations);
    }
    if !(sigma_gt > 0.0 && sigma_gt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_gt must be positive, got {sigma_gt}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("density extent must be non-empty".into()));
    }
    let fix = if (fix.width, fix.height) == (width, height) {
        fix.clone()
    } else {
        fix.rescaled(width, height)
    };
    let denom = 2.0 * sigma_gt * sigma_gt;
    let profile = |center: u32, len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| {
                let d = i as f64 - center as f64;
                (-d * d / denom).exp()
            })
            .collect()
    };
    // sort so accumulation order does not depend on input order
    let mut points: Vec<(u32, u32)> = fix.points.iter().map(|p| (p.x, p.y)).collect();
    points.sort_unstable();

    let mut acc = vec![0.0; width * height];
    for (px, py) in points {
        let gx = profile(px, width);
        let gy = profile(py, height);
        for (y, wy) in gy.iter().enumerate() {
            let row = &mut acc[y * width..(y + 1) * width];
            for (cell, wx) in row.iter_mut().zip(&gx) {
                *cell += wy * wx;
            }
        }
    }
    let grid = Grid::from_vec(width, height, acc)?;
    normalize(&grid, Normalization::SumsToOne)
}

#[derive(Debug, Deserialize, Serialize)]
struct FixationRow {
    image_id: String,
    x: i64,
    y: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observer: Option<String>,
}

/// Fixations grouped by image id, as read from a fixation CSV.
pub type FixationTable = BTreeMap<String, Vec<Fixation>>;

/// Reads `image_id,x,y[,observer]` rows. Negative coordinates are rejected here;
/// upper bounds are checked once the image extent is known.
pub fn read_fixations_csv(path: &Path) -> Result<FixationTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fixations(file).map_err(|e| match e {
        Error::InvalidData(message) => Error::Decode {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_fixations(reader: impl std::io::Read) -> Result<FixationTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidData(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[..3] != ["image_id", "x", "y"] {
        return Err(Error::InvalidData(format!(
            "expected header image_id,x,y[,observer], found {}",
            names.join(",")
        )));
    }
    let mut table = FixationTable::new();
    for (line, row) in rdr.deserialize::<FixationRow>().enumerate() {
        let row = row.map_err(|e| Error::InvalidData(format!("row {}: {e}", line + 2)))?;
        if row.x < 0 || row.y < 0 || row.x > u32::MAX as i64 || row.y > u32::MAX as i64 {
            return Err(Error::InvalidData(format!(
                "row {}: coordinate ({}, {}) out of range",
                line + 2,
                row.x,
                row.y
            )));
        }
        table.entry(row.image_id).or_default().push(Fixation {
            x: row.x as u32,
            y: row.y as u32,
            observer: row.observer.filter(|o| !o.is_empty()),
        });
    }
    Ok(table)
}

/// Serializes sets in the order given.
pub fn write_fixations_csv<'a>(
    sets: impl IntoIterator<Item = &'a FixationSet>,
) -> Result<Vec<u8>> {
    let sets: Vec<&FixationSet> = sets.into_iter().collect();
    let with_observer = sets
        .iter()
        .any(|s| s.points.iter().any(|p| p.observer.is_some()));
    let mut out = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut out);
        let header: &[&str] = if with_observer {
            &["image_id", "x", "y", "observer"]
        } else {
            &["image_id", "x", "y"]
        };
        wtr.write_record(header)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        for set in sets {
            for p in &set.points {
                let mut rec = vec![set.image_id.clone(), p.x.to_string(), p.y.to_string()];
                if with_observer {
                    rec.push(p.observer.clone().unwrap_or_default());
                }
                wtr.write_record(&rec)
                    .map_err(|e| Error::InvalidData(e.to_string()))?;
            }
        }
        wtr.flush().map_err(|e| Error::InvalidData(e.to_string()))?;
    }
    Ok(out)
}
