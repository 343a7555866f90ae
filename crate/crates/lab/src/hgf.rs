//! Binary field files: `HGF1`, `u32 d`, `u32` sides, `u8` domain kind, then
//! little-endian `f64` edge values in the domain's edge order.

use std::io::{Read, Write};
use std::path::Path;

use homog_core::ensemble::CoefficientField;
use homog_core::lattice::{DomainGrid, DomainKind};

use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 4] = b"HGF1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub kind: DomainKind,
    pub sides: Vec<usize>,
    pub values: Vec<f64>,
}

impl FieldFile {
    pub fn from_field(field: &CoefficientField) -> Self {
        FieldFile { kind: field.kind(), sides: field.sides().to_vec(), values: field.values().to_vec() }
    }

    pub fn domain(&self) -> Result<DomainGrid> {
        Ok(DomainGrid::new(self.kind, &self.sides)?)
    }

    /// Rebuild the coefficient field; values are range-checked against `lambda`.
    pub fn to_field(&self, lambda: f64) -> Result<(DomainGrid, CoefficientField)> {
        let domain = self.domain()?;
        let field = CoefficientField::from_values(&domain, lambda, self.values.clone())?;
        Ok((domain, field))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.sides.len() as u32).to_le_bytes())?;
        for &s in &self.sides {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        w.write_all(&[self.kind.code()])?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + 4 * self.sides.len() + 8 * self.values.len());
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| LabError::Format(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, at: 0 };
        if cur.take(4)? != MAGIC {
            return Err(LabError::Format("missing HGF1 magic".into()));
        }
        let d = cur.u32()? as usize;
        if !(1..=3).contains(&d) {
            return Err(LabError::Format(format!("dimension {d} not in 1..=3")));
        }
        let sides = (0..d).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let code = cur.take(1)?[0];
        let kind = DomainKind::from_code(code).ok_or_else(|| LabError::Format(format!("unknown domain kind {code}")))?;
        let expected = DomainGrid::new(kind, &sides)?.edge_count();
        let rest = bytes.len() - cur.at;
        if rest != 8 * expected {
            return Err(LabError::Format(format!("{rest} payload bytes, expected {} for {expected} edges", 8 * expected)));
        }
        let values = (0..expected).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        Ok(FieldFile { kind, sides, values })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at + n;
        let s = self.bytes.get(self.at..end).ok_or_else(|| LabError::Format("truncated file".into()))?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_field(path: &Path, field: &CoefficientField) -> Result<()> {
    std::fs::write(path, FieldFile::from_field(field).to_bytes()).map_err(|e| LabError::io(path, e))
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    FieldFile::from_bytes(&bytes)
}
