//! Named parameter registry and its binary checkpoint format.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "MMTL" | version | [version 2: header_len | header (UTF-8 JSON)]
//!        | entry_count
//!        | per entry: name_len | name | rank | dims[rank] | f32 values (LE)
//! ```
//!
//! Version 1 carries parameters only; version 2 embeds a JSON header (the
//! model configuration) ahead of the entries.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MMTL";
pub const CHECKPOINT_VERSION_PLAIN: u32 = 1;
pub const CHECKPOINT_VERSION_HEADER: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    entries: IndexMap<String, Tensor<T>>,
    rng_seed: u64,
}

impl<T: Real> ParamStore<T> {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore { entries: IndexMap::new(), rng_seed }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("parameter {name:?} registered twice")));
        }
        let (idx, _) = self.entries.insert_full(name, tensor);
        Ok(ParamId(idx))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).map(|(k, _)| k.as_str()).unwrap_or("")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalars across all entries.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    /// Copies accumulated gradients into the tensors' grad slots.
    /// Parameters the gradient never reached receive zeros.
    pub fn set_grads(&mut self, grads: &Grads<T>) -> Result<()> {
        for (i, (_, t)) in self.entries.iter_mut().enumerate() {
            match grads.get(ParamId(i)) {
                Some(g) => t.set_grad(g.to_vec())?,
                None => t.set_grad(vec![T::zero(); t.len()])?,
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
            rng_seed: self.rng_seed,
        }
    }

    /// Serializes to the checkpoint format. Values are stored as `f32`.
    pub fn to_bytes(&self, header: Option<&str>) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.num_scalars());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        match header {
            Some(h) => {
                out.extend_from_slice(&CHECKPOINT_VERSION_HEADER.to_le_bytes());
                out.extend_from_slice(&(h.len() as u32).to_le_bytes());
                out.extend_from_slice(h.as_bytes());
            }
            None => out.extend_from_slice(&CHECKPOINT_VERSION_PLAIN.to_le_bytes()),
        }
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_f32().to_le_bytes());
            }
        }
        out
    }

    /// Parses the checkpoint format, returning the store and the optional header.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<(Self, Option<String>)> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format(path, "missing MMTL magic"));
        }
        let header = match r.u32()? {
            CHECKPOINT_VERSION_PLAIN => None,
            CHECKPOINT_VERSION_HEADER => {
                let n = r.u32()? as usize;
                let raw = r.take(n)?;
                Some(String::from_utf8(raw.to_vec()).map_err(|_| Error::format(path, "header is not UTF-8"))?)
            }
            v => return Err(Error::format(path, format!("unsupported checkpoint version {v}"))),
        };
        let count = r.u32()? as usize;
        let mut store = ParamStore::new(0);
        for _ in 0..count {
            let n = r.u32()? as usize;
            let name = String::from_utf8(r.take(n)?.to_vec())
                .map_err(|_| Error::format(path, "parameter name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let raw = r.take(len * 4)?;
            let data = raw.chunks_exact(4).map(|c| T::from_f32(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::format(path, e.to_string()))?;
            store.insert(name, t).map_err(|e| Error::format(path, e.to_string()))?;
        }
        if r.remaining() != 0 {
            return Err(Error::format(path, format!("{} trailing bytes", r.remaining())));
        }
        Ok((store, header))
    }

    pub fn save(&self, path: &Path, header: Option<&str>) -> Result<()> {
        fs::write(path, self.to_bytes(header)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, Option<String>)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Per-parameter gradient accumulators, allocated on first touch.
#[derive(Debug, Clone)]
pub struct Grads<T> {
    slots: Vec<Option<Vec<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn new<U>(store: &ParamStore<U>) -> Self {
        Grads { slots: vec![None; store.entries.len()] }
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    pub(crate) fn slot(&mut self, id: ParamId, len: usize) -> &mut [T] {
        self.slots[id.0].get_or_insert_with(|| vec![T::zero(); len])
    }

    /// Gradient buffers for every parameter, zero-filled where untouched.
    pub fn dense(&mut self, store: &ParamStore<T>) -> Vec<&mut [T]> {
        for (slot, t) in self.slots.iter_mut().zip(store.entries.values()) {
            slot.get_or_insert_with(|| vec![T::zero(); t.len()]);
        }
        self.slots.iter_mut().map(|s| s.as_deref_mut().unwrap()).collect()
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.slots.iter_mut().flatten() {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn zero(&mut self) {
        for g in self.slots.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_store() -> ParamStore<f32> {
        let mut s = ParamStore::new(3);
        s.insert("a", Tensor::new(vec![2, 2], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE]).unwrap()).unwrap();
        s.insert("b.bias", Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap()).unwrap();
        s
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = sample_store();
        assert!(s.insert("a", Tensor::zeros(vec![1])).is_err());
        assert_eq!(s.num_scalars(), 7);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let s = sample_store();
        for header in [None, Some("{\"variant\":\"baseline\"}")] {
            let bytes = s.to_bytes(header);
            let (back, h) = ParamStore::<f32>::from_bytes(&bytes, Path::new("mem")).unwrap();
            assert_eq!(h.as_deref(), header);
            assert_eq!(back.to_bytes(header), bytes);
            for ((n1, t1), (n2, t2)) in s.iter().zip(back.iter()) {
                assert_eq!(n1, n2);
                assert_eq!(t1.shape(), t2.shape());
                let b1: Vec<u32> = t1.data().iter().map(|x| x.to_bits()).collect();
                let b2: Vec<u32> = t2.data().iter().map(|x| x.to_bits()).collect();
                assert_eq!(b1, b2);
            }
        }
    }

    #[test]
    fn checkpoint_layout_is_as_documented() {
        let mut s = ParamStore::<f32>::new(0);
        s.insert("w", Tensor::new(vec![1], vec![1.0]).unwrap()).unwrap();
        let bytes = s.to_bytes(None);
        let mut expected = b"MMTL".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes()); // version
        expected.extend_from_slice(&1u32.to_le_bytes()); // entries
        expected.extend_from_slice(&1u32.to_le_bytes()); // name length
        expected.extend_from_slice(b"w");
        expected.extend_from_slice(&1u32.to_le_bytes()); // rank
        expected.extend_from_slice(&1u32.to_le_bytes()); // dim
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_checkpoint_reports_offset() {
        let bytes = sample_store().to_bytes(None);
        let err = ParamStore::<f32>::from_bytes(&bytes[..bytes.len() - 2], Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");
        let err = ParamStore::<f32>::from_bytes(b"NOPE\x01\0\0\0", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }
}
