//! CHBK binary snapshots.
//!
//! Layout (little endian): magic `CHBK`, `u32` version, `u32` dimension `d`,
//! `d × u32` grid sizes, `d × f64` box lengths, `u32` field count, then for
//! each field a `u32` byte length and its UTF-8 name, followed by the samples
//! of every field in declaration order (`f64`, row-major, axis 0 slowest).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField};

pub const MAGIC: &[u8; 4] = b"CHBK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub sizes: Vec<usize>,
    pub lengths: Vec<f64>,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    pub fn new(grid: &Grid) -> Self {
        Snapshot {
            sizes: grid.sizes().to_vec(),
            lengths: grid.lengths().to_vec(),
            fields: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, field: &ScalarField) {
        self.fields.push((name.to_string(), field.values().to_vec()));
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.sizes, &self.lengths)
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// Field `name` on `grid`, or an error naming the missing field.
    pub fn scalar(&self, grid: &Grid, name: &str) -> Result<ScalarField> {
        let values = self
            .field(name)
            .ok_or_else(|| Error::Mismatch(format!("snapshot has no field '{name}'")))?;
        ScalarField::from_values(grid, values.to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n: usize = self.sizes.iter().product();
        let mut out = Vec::with_capacity(64 + self.fields.len() * (n * 8 + 16));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for s in &self.sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for l in &self.lengths {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.extend_from_slice(&(self.fields.len() as u32).to_le_bytes());
        for (name, _) in &self.fields {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for (_, values) in &self.fields {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(Error::format(path, "missing CHBK magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        let d = r.u32()? as usize;
        if !(2..=3).contains(&d) {
            return Err(Error::format(path, format!("dimension {d} not in 2..=3")));
        }
        let sizes = (0..d).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let lengths = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let count = r.u32()? as usize;
        let mut names = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(path, "field name is not UTF-8"))?;
            names.push(name.to_string());
        }
        let n: usize = sizes.iter().product();
        let mut fields = Vec::with_capacity(count);
        for name in names {
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            fields.push((name, values));
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after last field"));
        }
        Ok(Snapshot {
            sizes,
            lengths,
            fields,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.path, "unexpected end of file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_corruption() {
        let g = Grid::new(&[8, 10], &[1.0, 2.5]).unwrap();
        let mut s = Snapshot::new(&g);
        s.push("phi", &ScalarField::from_fn(&g, |x| x[0] - 0.3 * x[1]));
        s.push("mu", &ScalarField::constant(&g, -1.25e-7));
        let bytes = s.to_bytes();
        let p = Path::new("mem");
        assert_eq!(Snapshot::from_bytes(p, &bytes).unwrap(), s);
        assert!(Snapshot::from_bytes(p, &bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Snapshot::from_bytes(p, &bad), Err(Error::Format { .. })));
        let mut bad = bytes;
        bad[4] = 9;
        assert!(Snapshot::from_bytes(p, &bad).is_err());
    }
}
