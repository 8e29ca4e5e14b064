use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{read_bytes, write_atomic, ByteReader, ByteWriter};
use crate::network::{BatchNorm, MlpSpec, ModelState, MomentumBuffers};
use crate::numerics::{DenseMatrix, RngState};
use crate::pruning::{Mask, MaskTensor};

/// `"LRRC"` read as a big-endian integer.
pub const CHECKPOINT_MAGIC: u32 = u32::from_be_bytes(*b"LRRC");
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume a run: parameters, optimizer state, the
/// current mask and the position of the training generator.
///
/// The binary layout is a big-endian magic and little-endian payload;
/// floats are stored bit-exactly so a round trip reproduces the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: ModelState,
    pub mask: Option<Mask>,
    pub rng: Option<RngState>,
}

impl Checkpoint {
    pub fn new(state: ModelState, mask: Option<Mask>, rng: Option<RngState>) -> Self {
        Self { state, mask, rng }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(&CHECKPOINT_MAGIC.to_be_bytes());
        w.u32(CHECKPOINT_VERSION);
        let s = &self.state;
        w.u64(s.spec.widths.len() as u64);
        s.spec.widths.iter().for_each(|&x| w.u64(x as u64));
        s.spec.batchnorm.iter().for_each(|&b| w.u8(b as u8));
        w.u8(s.spec.bias as u8);
        s.weights.iter().for_each(|m| w.f64s(m.as_slice()));
        s.biases.iter().for_each(|b| w.f64s(b));
        for bn in s.bn.iter().flatten() {
            w.f64s(&bn.gamma);
            w.f64s(&bn.beta);
            w.f64s(&bn.running_mean);
            w.f64s(&bn.running_var);
        }
        let m = &s.momentum;
        m.weights.iter().for_each(|x| w.f64s(x.as_slice()));
        for v in m.biases.iter().chain(&m.gamma).chain(&m.beta) {
            w.f64s(v);
        }
        match &self.mask {
            Some(mask) => {
                w.u8(1);
                for t in mask.tensors() {
                    w.u64(t.len() as u64);
                    t.as_slice().iter().for_each(|&k| w.u8(k as u8));
                }
            }
            None => w.u8(0),
        }
        match self.rng {
            Some(r) => {
                w.u8(1);
                w.u64(r.seed);
                w.u64(r.stream);
                w.u128(r.word_pos);
            }
            None => w.u8(0),
        }
        w.into_bytes()
    }

    pub fn decode(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(path, bytes);
        let magic = u32::from_be_bytes(r.take(4)?.try_into().unwrap());
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
                expected: CHECKPOINT_MAGIC,
            });
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.format(format!("unsupported checkpoint version {version}")));
        }
        let n_widths = r.usize()?;
        if !(2..=1 << 16).contains(&n_widths) {
            return Err(r.format(format!("{n_widths} layer widths")));
        }
        let widths = (0..n_widths)
            .map(|_| r.usize())
            .collect::<Result<Vec<_>>>()?;
        let batchnorm = (0..n_widths - 2)
            .map(|_| r.u8().map(|b| b != 0))
            .collect::<Result<Vec<_>>>()?;
        let bias = r.u8()? != 0;
        let spec = MlpSpec {
            widths,
            batchnorm,
            bias,
            ..MlpSpec::new(vec![1, 1], false, false)
        };
        spec.validate()?;
        let shapes = spec.weight_shapes();
        let matrix = |r: &mut ByteReader, (rows, cols): (usize, usize)| -> Result<DenseMatrix> {
            let data = r.f64s()?;
            if data.len() != rows * cols {
                return Err(r.format("weight tensor length does not match its shape"));
            }
            DenseMatrix::from_vec(rows, cols, data)
        };
        let vector = |r: &mut ByteReader, len: usize| -> Result<Vec<f64>> {
            let v = r.f64s()?;
            if v.len() != len {
                return Err(r.format("vector length does not match the architecture"));
            }
            Ok(v)
        };
        let bias_len = |out: usize| if spec.bias { out } else { 0 };
        let hidden = spec.num_layers() - 1;
        let bn_len = |l: usize| {
            if spec.has_bn(l) {
                spec.widths[l + 1]
            } else {
                0
            }
        };

        let weights = shapes
            .iter()
            .map(|&s| matrix(&mut r, s))
            .collect::<Result<Vec<_>>>()?;
        let biases = shapes
            .iter()
            .map(|&(o, _)| vector(&mut r, bias_len(o)))
            .collect::<Result<Vec<_>>>()?;
        let mut bn = Vec::with_capacity(hidden);
        for l in 0..hidden {
            if spec.has_bn(l) {
                let w = spec.widths[l + 1];
                bn.push(Some(BatchNorm {
                    gamma: vector(&mut r, w)?,
                    beta: vector(&mut r, w)?,
                    running_mean: vector(&mut r, w)?,
                    running_var: vector(&mut r, w)?,
                }));
            } else {
                bn.push(None);
            }
        }
        let momentum = MomentumBuffers {
            weights: shapes
                .iter()
                .map(|&s| matrix(&mut r, s))
                .collect::<Result<_>>()?,
            biases: shapes
                .iter()
                .map(|&(o, _)| vector(&mut r, bias_len(o)))
                .collect::<Result<_>>()?,
            gamma: (0..hidden)
                .map(|l| vector(&mut r, bn_len(l)))
                .collect::<Result<_>>()?,
            beta: (0..hidden)
                .map(|l| vector(&mut r, bn_len(l)))
                .collect::<Result<_>>()?,
        };
        let mask = match r.u8()? {
            0 => None,
            _ => {
                let mut tensors = Vec::with_capacity(shapes.len());
                for &(rows, cols) in &shapes {
                    let n = r.usize()?;
                    if n != rows * cols {
                        return Err(r.format("mask tensor length does not match its shape"));
                    }
                    let keep = r.take(n)?.iter().map(|&b| b != 0).collect();
                    tensors.push(MaskTensor::from_keep(rows, cols, keep)?);
                }
                Some(Mask::new(tensors))
            }
        };
        let rng = match r.u8()? {
            0 => None,
            _ => Some(RngState {
                seed: r.u64()?,
                stream: r.u64()?,
                word_pos: r.u128()?,
            }),
        };
        r.finish()?;
        let state = ModelState {
            spec,
            weights,
            biases,
            bn,
            momentum,
        };
        state.validate()?;
        Ok(Self { state, mask, rng })
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
    use crate::numerics::Rng;

    fn sample() -> Checkpoint {
        let spec = MlpSpec::new(vec![3, 4, 5, 2], true, true);
        let mut rng = Rng::new(3);
        let mut state = ModelState::init(&spec, &mut rng).unwrap();
        state.biases[1][2] = -0.25;
        state.bn[0].as_mut().unwrap().running_var[1] = 2.5;
        state.momentum.weights[2].set(1, 3, 1e-300);
        let mut mask = Mask::dense_for(&state);
        mask.tensor_mut(1).set(7, false);
        Checkpoint::new(state, Some(mask), Some(rng.state()))
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let back = Checkpoint::decode(Path::new("mem"), &ck.encode()).unwrap();
        assert_eq!(back, ck);
        let bare = Checkpoint::new(ck.state.clone(), None, None);
        assert_eq!(
            Checkpoint::decode(Path::new("mem"), &bare.encode()).unwrap(),
            bare
        );
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let bytes = sample().encode();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::decode(Path::new("x"), &bad),
            Err(Error::BadMagic { .. })
        ));
        assert!(matches!(
            Checkpoint::decode(Path::new("x"), &bytes[..bytes.len() - 3]),
            Err(Error::TruncatedFile { .. })
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            Checkpoint::decode(Path::new("x"), &long),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.bin");
        let ck = sample();
        ck.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), ck);
    }
}
