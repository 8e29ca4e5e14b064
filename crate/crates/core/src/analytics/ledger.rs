use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{read_bytes, write_atomic, ByteReader, ByteWriter};
use crate::network::ModelState;
use crate::pruning::Mask;

/// `"LRRS"` read as a big-endian integer.
pub const LEDGER_MAGIC: u32 = u32::from_be_bytes(*b"LRRS");

/// Append-only record of every weight's sign at each pruning level, with
/// the mask in force at that level. Signs are in `{-1, 0, +1}` and are 0
/// wherever the weight is pruned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignLedger {
    shapes: Vec<(usize, usize)>,
    num_params: usize,
    signs: Vec<Vec<i8>>,
    kept: Vec<Vec<bool>>,
}

impl SignLedger {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            shapes: shapes.to_vec(),
            num_params: shapes.iter().map(|(r, c)| r * c).sum(),
            signs: Vec::new(),
            kept: Vec::new(),
        }
    }

    pub fn for_state(state: &ModelState) -> Self {
        Self::new(&state.weight_shapes())
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// Number of recorded levels.
    pub fn levels(&self) -> usize {
        self.signs.len()
    }

    pub fn row(&self, level: usize) -> &[i8] {
        &self.signs[level]
    }

    pub fn kept_row(&self, level: usize) -> &[bool] {
        &self.kept[level]
    }

    /// Appends `sign(w) * mask` for every weight as row `level`.
    pub fn record_signs(&mut self, state: &ModelState, mask: &Mask, level: usize) -> Result<()> {
        if level != self.levels() {
            return Err(Error::config(format!(
                "recording level {level} into a ledger with {} levels",
                self.levels()
            )));
        }
        if state.weight_shapes() != self.shapes {
            return Err(Error::shape("state does not match the ledger's tensors"));
        }
        mask.check_shapes(&self.shapes)?;
        let mut signs = Vec::with_capacity(self.num_params);
        let mut kept = Vec::with_capacity(self.num_params);
        for (w, m) in state.weights.iter().zip(mask.tensors()) {
            for (&v, &k) in w.as_slice().iter().zip(m.as_slice()) {
                signs.push(if k { sign_of(v) } else { 0 });
                kept.push(k);
            }
        }
        self.push_row(signs, kept)
    }

    /// Appends a raw row; `signs` must be 0 wherever `kept` is false.
    pub fn push_row(&mut self, signs: Vec<i8>, kept: Vec<bool>) -> Result<()> {
        if signs.len() != self.num_params || kept.len() != self.num_params {
            return Err(Error::shape("ledger row has the wrong length"));
        }
        if signs
            .iter()
            .zip(&kept)
            .any(|(&s, &k)| !matches!(s, -1..=1) || (!k && s != 0))
        {
            return Err(Error::config("ledger row has invalid signs"));
        }
        self.signs.push(signs);
        self.kept.push(kept);
        Ok(())
    }

    /// Indices of parameters kept at the last recorded level.
    pub fn survivors(&self) -> Vec<usize> {
        match self.kept.last() {
            Some(k) => (0..self.num_params).filter(|&p| k[p]).collect(),
            None => Vec::new(),
        }
    }

    /// Signs of parameter `p` over all levels.
    pub fn sequence(&self, p: usize) -> Vec<i8> {
        self.signs.iter().map(|row| row[p]).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&LEDGER_MAGIC.to_be_bytes());
        w.u32(1);
        w.u64(self.shapes.len() as u64);
        for &(r, c) in &self.shapes {
            w.u64(r as u64);
            w.u64(c as u64);
        }
        w.u64(self.levels() as u64);
        for (signs, kept) in self.signs.iter().zip(&self.kept) {
            for (&s, &k) in signs.iter().zip(kept) {
                // Two bits per entry would do; one byte keeps it simple.
                w.u8(((s + 1) as u8) | ((k as u8) << 2));
            }
        }
        w.into_bytes()
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(path, bytes);
        let magic = u32::from_be_bytes(r.take(4)?.try_into().unwrap());
        if magic != LEDGER_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
                expected: LEDGER_MAGIC,
            });
        }
        if r.u32()? != 1 {
            return Err(r.format("unsupported ledger version"));
        }
        let n_shapes = r.usize()?;
        let shapes = (0..n_shapes)
            .map(|_| Ok((r.usize()?, r.usize()?)))
            .collect::<Result<Vec<_>>>()?;
        let mut ledger = Self::new(&shapes);
        let levels = r.usize()?;
        for _ in 0..levels {
            let raw = r.take(ledger.num_params)?;
            let mut signs = Vec::with_capacity(raw.len());
            let mut kept = Vec::with_capacity(raw.len());
            for &b in raw {
                if b & 3 > 2 || b > 7 {
                    return Err(r.format("invalid ledger entry"));
                }
                signs.push((b & 3) as i8 - 1);
                kept.push(b & 4 != 0);
            }
            ledger
                .push_row(signs, kept)
                .map_err(|e| r.format(e.to_string()))?;
        }
        r.finish()?;
        Ok(ledger)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(path, &read_bytes(path)?)
    }
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}
