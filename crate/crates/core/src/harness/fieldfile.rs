//! Binary field files.
//!
//! A file is one line of JSON ([`FieldHeader`]) terminated by `\n`,
//! followed by the samples as little-endian `f64` pairs `(re, im)`. Space-time
//! fields are row-major with `x` (or `xi`) outer and `t` (or `tau`) inner;
//! line fields hold `N` values in lattice order (`x_i = -L/2 + i L/N`, or the
//! frequency `xi_i` of coefficient `i`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spectral::{
    forward_transform, FrequencyGrid, Representation, SpaceTimeField, SpectralField, TimeGrid, C64,
};

pub const FORMAT: &str = "bo-lab-field";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One spatial line: initial data or a time slice.
    Line,
    SpaceTime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub layout: Layout,
    pub period: f64,
    pub n_points: usize,
    /// Time half-width and point count, space-time layout only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    pub representation: Representation,
    /// Free text: who or what wrote the file.
    #[serde(default)]
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Line(SpectralField),
    SpaceTime(SpaceTimeField),
}

impl FieldData {
    pub fn layout(&self) -> Layout {
        match self {
            FieldData::Line(_) => Layout::Line,
            FieldData::SpaceTime(_) => Layout::SpaceTime,
        }
    }
}

pub fn encode(field: &FieldData, provenance: &str) -> Vec<u8> {
    let (header, values): (FieldHeader, &[C64]) = match field {
        FieldData::Line(f) => (
            FieldHeader {
                format: FORMAT.into(),
                version: VERSION,
                layout: Layout::Line,
                period: f.grid().period(),
                n_points: f.grid().len(),
                half_width: None,
                n_t: None,
                representation: Representation::Frequency,
                provenance: provenance.into(),
            },
            f.coeffs(),
        ),
        FieldData::SpaceTime(u) => (
            FieldHeader {
                format: FORMAT.into(),
                version: VERSION,
                layout: Layout::SpaceTime,
                period: u.xgrid().period(),
                n_points: u.nx(),
                half_width: Some(u.tgrid().half_width()),
                n_t: Some(u.nt()),
                representation: u.representation(),
                provenance: provenance.into(),
            },
            u.data(),
        ),
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(values.len() * 16);
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(FieldHeader, FieldData)> {
    let bad = |m: String| LabError::Config(format!("field file: {m}"));
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: FieldHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(format!(
            "expected format {FORMAT} version {VERSION}, got {} version {}",
            header.format, header.version
        )));
    }
    let body = &bytes[split + 1..];
    if !body.len().is_multiple_of(16) {
        return Err(bad(format!(
            "payload of {} bytes is not a whole number of complex values",
            body.len()
        )));
    }
    let values: Vec<C64> = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    let xg = FrequencyGrid::new(header.period, header.n_points)?;
    let data = match header.layout {
        Layout::Line => {
            if header.half_width.is_some() || header.n_t.is_some() {
                return Err(bad("a line field has no time grid".into()));
            }
            let f = match header.representation {
                Representation::Frequency => SpectralField::new(xg, values)?,
                Representation::Physical => forward_transform(xg, &values)?,
            };
            FieldData::Line(f)
        }
        Layout::SpaceTime => {
            let (Some(h), Some(n)) = (header.half_width, header.n_t) else {
                return Err(bad("space-time layout needs half_width and n_t".into()));
            };
            let tg = TimeGrid::new(h, n)?;
            FieldData::SpaceTime(SpaceTimeField::new(xg, tg, header.representation, values)?)
        }
    };
    Ok((header, data))
}

pub fn write_field(path: &Path, field: &FieldData, provenance: &str) -> Result<()> {
    fs::write(path, encode(field, provenance))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldData> {
    let bytes = fs::read(path)
        .map_err(|e| LabError::Config(format!("cannot read field file {}: {e}", path.display())))?;
    Ok(decode(&bytes)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let xg = FrequencyGrid::new(16.0, 32).unwrap();
        let tg = TimeGrid::new(1.0, 9).unwrap();
        let u = SpaceTimeField::from_physical_fn(xg, tg, |x, t| {
            C64::new((x * 0.3).sin() + t, x * t / 7.0)
        });
        let data = FieldData::SpaceTime(u);
        let bytes = encode(&data, "test");
        let (h, back) = decode(&bytes).unwrap();
        assert_eq!(back, data);
        assert_eq!(h.provenance, "test");
        let line = FieldData::Line(SpectralField::from_fn(xg, |x| {
            C64::new((-x * x).exp(), 0.0)
        }));
        assert_eq!(decode(&encode(&line, "")).unwrap().1, line);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let xg = FrequencyGrid::new(16.0, 32).unwrap();
        let mut bytes = encode(&FieldData::Line(SpectralField::zeros(xg)), "");
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode(&bytes), Err(LabError::Config(_))));
        bytes.truncate(bytes.len() - 13);
        assert!(matches!(decode(&bytes), Err(LabError::Size { .. })));
    }
}
