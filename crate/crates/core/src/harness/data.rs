use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{read_bytes, write_atomic, ByteReader, ByteWriter};
use crate::harness::{load_idx, ExperimentConfig, TaskKind};
use crate::network::{Split, Targets, TaskData};
use crate::numerics::{DenseMatrix, Rng};

/// `"LRRT"` read as a big-endian integer.
pub const TASK_MAGIC: u32 = u32::from_be_bytes(*b"LRRT");

/// Training and test sets of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub train: TaskData,
    pub test: TaskData,
}

/// Gaussian mixture with `classes` equiprobable components. Class `c` has
/// mean `(separation / sqrt 2) e_c`, so every two means lie `separation`
/// apart, and covariance `I / dim`. Training examples are drawn first, then
/// test examples, all from `rng`.
pub fn gen_synthetic_task(
    classes: usize,
    dim: usize,
    n_train: usize,
    n_test: usize,
    separation: f64,
    rng: &mut Rng,
) -> Result<TaskSplit> {
    if classes < 2 {
        return Err(Error::config("a task needs at least two classes"));
    }
    if classes > dim {
        return Err(Error::config("synthetic tasks need classes <= dim"));
    }
    let offset = separation / std::f64::consts::SQRT_2;
    let std = 1.0 / (dim as f64).sqrt();
    let mut draw = |n: usize, split: Split| {
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.below(classes);
            labels.push(c);
            for j in 0..dim {
                let mean = if j == c { offset } else { 0.0 };
                data.push(mean + std * rng.standard_normal());
            }
        }
        TaskData::classification(DenseMatrix::from_vec(n, dim, data)?, labels, classes, split)
    };
    let train = draw(n_train, Split::Train)?;
    let test = draw(n_test, Split::Test)?;
    Ok(TaskSplit { train, test })
}

/// Loads or generates the task a run trains on. Synthetic data come from
/// the configured data seed, or from `run_seed` when none is set.
pub fn load_task(config: &ExperimentConfig, run_seed: u64) -> Result<TaskSplit> {
    let t = &config.task;
    match t.kind {
        TaskKind::Synthetic => {
            let mut rng = Rng::with_stream(t.data_seed.unwrap_or(run_seed), 0);
            gen_synthetic_task(
                t.classes,
                t.dim,
                t.n_train,
                t.n_test,
                t.separation,
                &mut rng,
            )
        }
        TaskKind::Idx => {
            let need = |p: &Option<std::path::PathBuf>| {
                p.clone()
                    .ok_or_else(|| Error::config("idx tasks need all four file paths"))
            };
            let mut train = load_idx(&need(&t.train_images)?, &need(&t.train_labels)?)?;
            let mut test = load_idx(&need(&t.test_images)?, &need(&t.test_labels)?)?;
            test.split = Split::Test;
            train.split = Split::Train;
            Ok(TaskSplit { train, test })
        }
        TaskKind::File => {
            let path = t
                .path
                .as_ref()
                .ok_or_else(|| Error::config("file tasks need a path"))?;
            load_task_file(path)
        }
    }
}

fn encode_data(w: &mut ByteWriter, d: &TaskData) -> Result<()> {
    let Targets::Classes {
        labels,
        num_classes,
    } = &d.targets
    else {
        return Err(Error::config("task files hold classification data only"));
    };
    w.u64(d.len() as u64);
    w.u64(d.input_width() as u64);
    w.u64(*num_classes as u64);
    w.f64s(d.inputs.as_slice());
    labels.iter().for_each(|&l| w.u64(l as u64));
    Ok(())
}

fn decode_data(r: &mut ByteReader, split: Split) -> Result<TaskData> {
    let n = r.usize()?;
    let dim = r.usize()?;
    let classes = r.usize()?;
    let x = r.f64s()?;
    if Some(x.len()) != n.checked_mul(dim) {
        return Err(r.format("input block does not match its shape"));
    }
    let labels = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let inputs = DenseMatrix::from_vec(n, dim, x).map_err(|e| r.format(e.to_string()))?;
    TaskData::classification(inputs, labels, classes, split).map_err(|e| r.format(e.to_string()))
}

/// Writes both splits to one binary file.
pub fn save_task_file(path: &Path, task: &TaskSplit) -> Result<()> {
    let mut w = ByteWriter::new();
    w.bytes(&TASK_MAGIC.to_be_bytes());
    w.u32(1);
    encode_data(&mut w, &task.train)?;
    encode_data(&mut w, &task.test)?;
    write_atomic(path, &w.into_bytes())
}

pub fn load_task_file(path: &Path) -> Result<TaskSplit> {
    let bytes = read_bytes(path)?;
    let mut r = ByteReader::new(path, &bytes);
    let magic = u32::from_be_bytes(r.take(4)?.try_into().unwrap());
    if magic != TASK_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected: TASK_MAGIC,
        });
    }
    if r.u32()? != 1 {
        return Err(r.format("unsupported task file version"));
    }
    let train = decode_data(&mut r, Split::Train)?;
    let test = decode_data(&mut r, Split::Test)?;
    r.finish()?;
    Ok(TaskSplit { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let a = gen_synthetic_task(3, 5, 20, 10, 2.0, &mut Rng::new(4)).unwrap();
        let b = gen_synthetic_task(3, 5, 20, 10, 2.0, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 20);
        assert_eq!(a.test.split, Split::Test);
    }

    #[test]
    fn means_are_equidistant() {
        let t = gen_synthetic_task(4, 8, 40_000, 1, 3.0, &mut Rng::new(1)).unwrap();
        let Targets::Classes { labels, .. } = &t.train.targets else {
            unreachable!()
        };
        let mut means = vec![vec![0.0; 8]; 4];
        let mut counts = [0usize; 4];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (m, &x) in means[c].iter_mut().zip(t.train.inputs.row(i)) {
                *m += x;
            }
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        for a in 0..4 {
            for b in a + 1..4 {
                let d: f64 = means[a]
                    .iter()
                    .zip(&means[b])
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                assert!((d - 3.0).abs() < 0.03, "distance {d}");
            }
        }
    }

    #[test]
    fn task_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("task.bin");
        let t = gen_synthetic_task(3, 4, 12, 6, 1.0, &mut Rng::new(2)).unwrap();
        save_task_file(&p, &t).unwrap();
        assert_eq!(load_task_file(&p).unwrap(), t);
    }
}
