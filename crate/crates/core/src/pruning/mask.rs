use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{read_bytes, write_atomic, ByteReader, ByteWriter};
use crate::network::ModelState;

/// `"LRRM"` read as a big-endian integer.
pub const MASK_MAGIC: u32 = u32::from_be_bytes(*b"LRRM");

/// Keep/prune indicators for one weight matrix, with a cached kept count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTensor {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
    kept: usize,
}

impl MaskTensor {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
            kept: rows * cols,
        }
    }

    pub fn from_keep(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} indicators for a {rows}x{cols} tensor",
                keep.len()
            )));
        }
        let kept = keep.iter().filter(|&&k| k).count();
        Ok(Self {
            rows,
            cols,
            keep,
            kept,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.kept
    }

    #[inline]
    pub fn is_kept(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.keep
    }

    pub fn set(&mut self, i: usize, keep: bool) {
        match (self.keep[i], keep) {
            (false, true) => self.kept += 1,
            (true, false) => self.kept -= 1,
            _ => {}
        }
        self.keep[i] = keep;
    }

    pub fn kept_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| i)
    }
}

/// One [`MaskTensor`] per prunable weight matrix. Biases and batch-norm
/// parameters are never masked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    tensors: Vec<MaskTensor>,
}

impl Mask {
    pub fn new(tensors: Vec<MaskTensor>) -> Self {
        Self { tensors }
    }

    pub fn ones(shapes: &[(usize, usize)]) -> Self {
        Self {
            tensors: shapes
                .iter()
                .map(|&(r, c)| MaskTensor::ones(r, c))
                .collect(),
        }
    }

    /// All-ones mask matching the weight shapes of `state`.
    pub fn dense_for(state: &ModelState) -> Self {
        Self::ones(&state.weight_shapes())
    }

    pub fn tensors(&self) -> &[MaskTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &MaskTensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut MaskTensor {
        &mut self.tensors[i]
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(MaskTensor::shape).collect()
    }

    pub fn kept(&self) -> usize {
        self.tensors.iter().map(MaskTensor::kept).sum()
    }

    pub fn total(&self) -> usize {
        self.tensors.iter().map(MaskTensor::len).sum()
    }

    pub fn density(&self) -> f64 {
        self.kept() as f64 / self.total() as f64
    }

    pub fn sparsity(&self) -> f64 {
        1.0 - self.density()
    }

    pub fn kept_per_tensor(&self) -> Vec<usize> {
        self.tensors.iter().map(MaskTensor::kept).collect()
    }

    /// Every entry kept here is also kept in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| {
                a.shape() == b.shape() && a.keep.iter().zip(&b.keep).all(|(&x, &y)| !x || y)
            })
    }

    pub fn check_shapes(&self, shapes: &[(usize, usize)]) -> Result<()> {
        let own = self.shapes();
        if own != shapes {
            return Err(Error::shape(format!(
                "mask shapes {own:?} vs weights {shapes:?}"
            )));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&MASK_MAGIC.to_be_bytes());
        w.u32(1);
        w.u64(self.tensors.len() as u64);
        for t in &self.tensors {
            w.u64(t.rows as u64);
            w.u64(t.cols as u64);
            t.keep.iter().for_each(|&k| w.u8(k as u8));
        }
        w.into_bytes()
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(path, bytes);
        let magic = u32::from_be_bytes(r.take(4)?.try_into().unwrap());
        if magic != MASK_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
                expected: MASK_MAGIC,
            });
        }
        if r.u32()? != 1 {
            return Err(r.format("unsupported mask version"));
        }
        let n = r.usize()?;
        let mut tensors = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let rows = r.usize()?;
            let cols = r.usize()?;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| r.format("mask shape overflows"))?;
            let keep = r.take(len)?.iter().map(|&b| b != 0).collect();
            tensors.push(MaskTensor::from_keep(rows, cols, keep)?);
        }
        r.finish()?;
        Ok(Self { tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(path, &read_bytes(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_updates() {
        let mut m = Mask::ones(&[(2, 3), (1, 2)]);
        assert_eq!((m.kept(), m.total()), (8, 8));
        m.tensor_mut(0).set(4, false);
        m.tensor_mut(0).set(4, false);
        m.tensor_mut(1).set(0, false);
        assert_eq!(m.kept_per_tensor(), vec![5, 1]);
        assert!((m.sparsity() - 0.25).abs() < 1e-15);
        m.tensor_mut(1).set(0, true);
        assert_eq!(m.kept(), 7);
    }

    #[test]
    fn subset_relation() {
        let full = Mask::ones(&[(2, 2)]);
        let mut part = full.clone();
        part.tensor_mut(0).set(1, false);
        assert!(part.is_subset_of(&full));
        assert!(!full.is_subset_of(&part));
    }

    #[test]
    fn binary_round_trip() {
        let mut m = Mask::ones(&[(2, 3), (4, 1)]);
        m.tensor_mut(1).set(2, false);
        let back = Mask::decode(Path::new("mem"), &m.encode()).unwrap();
        assert_eq!(back, m);
        assert!(Mask::decode(Path::new("mem"), b"LRRX").is_err());
    }

    #[test]
    fn from_keep_validates_length() {
        assert!(MaskTensor::from_keep(2, 2, vec![true; 3]).is_err());
        let t = MaskTensor::from_keep(1, 3, vec![true, false, true]).unwrap();
        assert_eq!(t.kept(), 2);
        assert_eq!(t.kept_indices().collect::<Vec<_>>(), vec![0, 2]);
    }
}
