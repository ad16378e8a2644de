//! Flat little-endian field snapshots.
//!
//! Layout (all integers `u32`, all reals `f64`, little-endian):
//!
//! | bytes          | content                                   |
//! |----------------|-------------------------------------------|
//! | 4              | magic `GSPF`                              |
//! | 4              | format version (currently 1)              |
//! | 4              | spatial dimension `n`                     |
//! | 4              | target dimension `N`                      |
//! | 4·n            | lattice extent per axis, collar included  |
//! | 8              | cell size `h`                             |
//! | 8·M·N          | values, cell-major, cells in grid order   |
//! | M              | frozen flags, one byte each (0 or 1)      |
//!
//! with `M` the product of the extents.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FieldMap;
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"GSPF";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub dims: Vec<usize>,
    pub h: f64,
    pub field: FieldMap,
}

impl Snapshot {
    pub fn new(grid: &Grid, field: &FieldMap) -> Result<Self> {
        field.check_compatible(grid.len())?;
        Ok(Snapshot {
            n: grid.n(),
            dims: grid.dims().to_vec(),
            h: grid.h(),
            field: field.clone(),
        })
    }

    /// Error unless the snapshot was taken on a grid with the same lattice and `h`.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let mut problems = Vec::new();
        if self.n != grid.n() {
            problems.push(format!("n: snapshot {} vs grid {}", self.n, grid.n()));
        }
        if self.dims != grid.dims() {
            problems.push(format!("lattice extent: snapshot {:?} vs grid {:?}", self.dims, grid.dims()));
        }
        if self.h.to_bits() != grid.h().to_bits() {
            problems.push(format!("h: snapshot {} vs grid {}", self.h, grid.h()));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Mismatch(format!("snapshot does not match grid ({})", problems.join(", "))))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let m = self.field.len();
        let dim = self.field.dim();
        let mut out = Vec::with_capacity(24 + 4 * self.n + 8 * m * dim + m);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.h.to_le_bytes());
        for v in self.field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.field.frozen().iter().map(|&f| f as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Snapshot("bad magic, not a field snapshot".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if !(1..=3).contains(&n) || dim == 0 {
            return Err(Error::Snapshot(format!("bad header: n = {n}, N = {dim}")));
        }
        let dims: Vec<usize> = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
        let h = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let m: usize = dims.iter().product();
        let mut values = Vec::with_capacity(m * dim);
        for _ in 0..m * dim {
            values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
        }
        let frozen = r
            .take(m)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Snapshot(format!("bad frozen flag {other}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let field = FieldMap::from_values(dim, values, frozen).map_err(|e| Error::Snapshot(e.to_string()))?;
        Ok(Snapshot { n, dims, h, field })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Snapshot("truncated snapshot".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn write_snapshot(path: &Path, grid: &Grid, field: &FieldMap) -> Result<()> {
    std::fs::write(path, Snapshot::new(grid, field)?.to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    Snapshot::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisBox};
    use crate::params::FractionalParams;

    fn grid(h: f64) -> Grid {
        let params = FractionalParams::new(0.5, 2.0, 2, 3).unwrap();
        build_grid(params, AxisBox::centered_cube(2, 1.0).unwrap(), h, 0.5).unwrap()
    }

    #[test]
    fn round_trip_and_layout() {
        let g = grid(0.5);
        let f = FieldMap::from_fn(&g, 3, |x| vec![x[0], x[1], 1.0]);
        let snap = Snapshot::new(&g, &f).unwrap();
        let bytes = snap.to_bytes();
        assert_eq!(&bytes[..4], b"GSPF");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 8 + 8 + 8 * 36 * 3 + 36);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 6);
        let back = Snapshot::from_bytes(&bytes).unwrap();
        assert_eq!(back, snap);
        back.check_grid(&g).unwrap();
        assert!(matches!(back.check_grid(&grid(0.25)), Err(Error::Mismatch(_))));
    }

    #[test]
    fn rejects_corruption() {
        let g = grid(0.5);
        let bytes = Snapshot::new(&g, &FieldMap::constant(&g, &[1.0, 0.0, 0.0])).unwrap().to_bytes();
        assert!(Snapshot::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Snapshot::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Snapshot::from_bytes(&extra).is_err());
    }
}
