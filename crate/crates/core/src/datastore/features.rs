//! Visual feature files.
//!
//! Binary layout (little-endian): `"MMTF" | version u32 | rank u32 |
//! dims u32 × rank | count u32 | f32 × count × Π dims`, row-major. Rank 1
//! records are global vectors, rank 2 records are spatial maps whose
//! first dimension indexes cells.

use std::fs;
use std::path::Path;

use crate::binio::ByteReader;
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"MMTF";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Global,
    Spatial,
}

impl FeatureKind {
    fn rank(self) -> usize {
        match self {
            FeatureKind::Global => 1,
            FeatureKind::Spatial => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dims: Vec<usize>,
    count: usize,
    data: Vec<f32>,
}

impl FeatureStore {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if !(1..=2).contains(&dims.len()) || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("feature record dims {dims:?} must be rank 1 or 2, non-zero")));
        }
        let rec: usize = dims.iter().product();
        if !data.len().is_multiple_of(rec) {
            return Err(Error::Shape(format!("{} values is not a multiple of record size {rec}", data.len())));
        }
        Ok(FeatureStore { count: data.len() / rec, dims, data })
    }

    pub fn kind(&self) -> FeatureKind {
        if self.dims.len() == 1 {
            FeatureKind::Global
        } else {
            FeatureKind::Spatial
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn record_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let n = self.record_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 4 * self.data.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.count as u32).to_le_bytes());
        for &x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != FEATURE_MAGIC {
            return Err(Error::format(path, "missing MMTF magic"));
        }
        let version = r.u32()?;
        if version != FEATURE_VERSION {
            return Err(Error::format(path, format!("unsupported feature file version {version}")));
        }
        let rank = r.u32()? as usize;
        if !(1..=2).contains(&rank) {
            return Err(Error::format(path, format!("record rank {rank} not in 1..=2")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        if dims.contains(&0) {
            return Err(Error::format(path, format!("zero dimension in {dims:?}")));
        }
        let count = r.u32()? as usize;
        let raw = r.take(count * dims.iter().product::<usize>() * 4)?;
        if r.remaining() != 0 {
            return Err(Error::format(
                path,
                format!("header declares {count} records of {dims:?} but {} extra bytes follow", r.remaining()),
            ));
        }
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(FeatureStore { dims, count, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads a feature file of any rank.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Reads a feature file that must hold records of `kind`.
    pub fn load_expect(path: &Path, kind: FeatureKind) -> Result<Self> {
        let fs = Self::load(path)?;
        if fs.kind() != kind {
            return Err(Error::format(
                path,
                format!(
                    "expected rank-{} {:?} features, found rank-{} records {:?}",
                    kind.rank(),
                    kind,
                    fs.dims.len(),
                    fs.dims
                ),
            ));
        }
        Ok(fs)
    }

    /// Scales every record (or every spatial cell) to unit L2 norm.
    pub fn l2_normalize(&mut self) {
        let width = *self.dims.last().unwrap();
        for v in self.data.chunks_mut(width) {
            let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
}
