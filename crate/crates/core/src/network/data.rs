use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices, trained with softmax cross-entropy.
    Classes {
        labels: Vec<usize>,
        num_classes: usize,
    },
    /// Real-valued targets, one row per example, trained with squared error.
    Real(DenseMatrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Real(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width the network output must have.
    pub fn output_width(&self) -> usize {
        match self {
            Targets::Classes { num_classes, .. } => *num_classes,
            Targets::Real(m) => m.cols(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Classes {
                labels,
                num_classes,
            } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
            Targets::Real(m) => Targets::Real(m.select_rows(idx)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub inputs: DenseMatrix,
    pub targets: Targets,
    pub split: Split,
}

impl TaskData {
    pub fn new(inputs: DenseMatrix, targets: Targets, split: Split) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::shape(format!(
                "{} input rows but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        if let Targets::Classes {
            labels,
            num_classes,
        } = &targets
        {
            if let Some(&bad) = labels.iter().find(|&&l| l >= *num_classes) {
                return Err(Error::config(format!(
                    "label {bad} out of range for {num_classes} classes"
                )));
            }
        }
        Ok(Self {
            inputs,
            targets,
            split,
        })
    }

    pub fn classification(
        inputs: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        Self::new(
            inputs,
            Targets::Classes {
                labels,
                num_classes,
            },
            split,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_width(&self) -> usize {
        self.inputs.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(idx),
            targets: self.targets.select(idx),
            split: self.split,
        }
    }

    /// First `n` examples (all of them when `n` exceeds the length).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_data() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(TaskData::classification(x.clone(), vec![0, 1], 2, Split::Train).is_err());
        assert!(TaskData::classification(x.clone(), vec![0, 1, 2], 2, Split::Train).is_err());
        let d = TaskData::classification(x, vec![0, 1, 1], 2, Split::Test).unwrap();
        assert_eq!(d.select(&[2, 0]).targets.len(), 2);
        assert_eq!(d.head(10).len(), 3);
    }
}
