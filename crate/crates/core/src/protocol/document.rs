use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::{split_blocks, stack_rows, LoccProtocol, PartInfo};
use crate::error::{Error, Result};
use crate::linalg::{c, Mat};
use crate::manifold::ProductPoint;

pub const DOCUMENT_FORMAT: &str = "loccforge-protocol";
pub const DOCUMENT_VERSION: u32 = 1;

/// A real number written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Decimal(f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite matrix entry"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Decimal)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixDoc {
    re: Vec<Vec<Decimal>>,
    im: Vec<Vec<Decimal>>,
}

impl MatrixDoc {
    fn from_mat(m: &Mat) -> Self {
        let grid = |f: fn(&crate::linalg::C64) -> f64| {
            (0..m.nrows()).map(|r| (0..m.ncols()).map(|col| Decimal(f(&m[(r, col)]))).collect()).collect()
        };
        Self { re: grid(|z| z.re), im: grid(|z| z.im) }
    }

    fn to_mat(&self, rows: usize, cols: usize) -> Result<Mat> {
        let ok = self.re.len() == rows && self.im.len() == rows && self.re.iter().chain(&self.im).all(|row| row.len() == cols);
        if !ok {
            return Err(Error::Document(format!("Kraus block is not {rows}x{cols}")));
        }
        Ok(Mat::from_fn(rows, cols, |r, col| c(self.re[r][col].0, self.im[r][col].0)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartDoc {
    #[serde(flatten)]
    info: PartInfo,
    kraus: Vec<MatrixDoc>,
}

/// Versioned export of a protocol together with its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolDocument {
    pub format: String,
    pub version: u32,
    pub protocol: LoccProtocol,
    parts: Vec<PartDoc>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ProtocolDocument {
    pub fn new(protocol: &LoccProtocol, point: &ProductPoint) -> Result<Self> {
        protocol.check_point(point)?;
        let parts = protocol
            .layout()
            .into_iter()
            .zip(point.parts())
            .map(|(info, x)| {
                let kraus = split_blocks(x.matrix(), info.spec.dim_out).iter().map(MatrixDoc::from_mat).collect();
                PartDoc { info, kraus }
            })
            .collect();
        Ok(Self { format: DOCUMENT_FORMAT.into(), version: DOCUMENT_VERSION, protocol: protocol.clone(), parts, metadata: BTreeMap::new() })
    }

    pub fn with_metadata(mut self, key: &str, value: serde_json::Value) -> Self {
        self.metadata.insert(key.into(), value);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != DOCUMENT_FORMAT {
            return Err(Error::Document(format!("unknown format {:?}", doc.format)));
        }
        if doc.version != DOCUMENT_VERSION {
            return Err(Error::Document(format!("unsupported version {}", doc.version)));
        }
        Ok(doc)
    }

    /// Rebuilds and validates the protocol and its point.
    pub fn restore(&self) -> Result<(LoccProtocol, ProductPoint)> {
        let p = &self.protocol;
        let protocol = LoccProtocol::new(p.agents.clone(), p.spectators.clone(), p.scheme.clone())?;
        let layout = protocol.layout();
        if layout.len() != self.parts.len() {
            return Err(Error::Document(format!("{} parts, layout needs {}", self.parts.len(), layout.len())));
        }
        let mats = layout
            .iter()
            .zip(&self.parts)
            .map(|(info, part)| {
                if *info != part.info {
                    return Err(Error::Document(format!("part {:?} does not match layout {:?}", part.info, info)));
                }
                if part.kraus.len() != info.spec.blocks() {
                    return Err(Error::Document(format!("{} Kraus blocks, expected {}", part.kraus.len(), info.spec.blocks())));
                }
                let blocks = part.kraus.iter().map(|m| m.to_mat(info.spec.dim_out, info.spec.dim_in)).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&Mat> = blocks.iter().collect();
                Ok(stack_rows(&refs))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((protocol, ProductPoint::from_matrices(mats)?))
    }
}
