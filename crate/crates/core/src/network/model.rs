use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// `N(0, 2 / fan_in)`.
    #[default]
    KaimingNormal,
}

/// Architecture of a fully connected network.
///
/// `widths[0]` is the input width and `widths.last()` the output width.
/// `batchnorm[l]` switches batch normalization on for hidden layer `l`
/// (between the affine map and the ReLU); the output layer never has one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub batchnorm: Vec<bool>,
    #[serde(default = "default_true")]
    pub bias: bool,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub init: InitScheme,
}

fn default_true() -> bool {
    true
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, batchnorm: bool, bias: bool) -> Self {
        let hidden = widths.len().saturating_sub(2);
        Self {
            widths,
            batchnorm: vec![batchnorm; hidden],
            bias,
            activation: Activation::Relu,
            init: InitScheme::KaimingNormal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::config(
                "an MLP needs at least input and output widths",
            ));
        }
        if self.widths.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.batchnorm.len() != self.widths.len() - 2 {
            return Err(Error::config(format!(
                "{} batchnorm flags for {} hidden layers",
                self.batchnorm.len(),
                self.widths.len() - 2
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    pub fn has_bn(&self, layer: usize) -> bool {
        self.batchnorm.get(layer).copied().unwrap_or(false)
    }

    /// `(out, in)` shape of each weight matrix.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.widths.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

/// Learnable scale/shift and running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

/// Momentum buffers, one per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBuffers {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl MomentumBuffers {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let shapes = spec.weight_shapes();
        let hidden = spec.num_layers() - 1;
        let bn_width = |l: usize| {
            if spec.has_bn(l) {
                spec.widths[l + 1]
            } else {
                0
            }
        };
        Self {
            weights: shapes
                .iter()
                .map(|&(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
            biases: shapes
                .iter()
                .map(|&(r, _)| vec![0.0; if spec.bias { r } else { 0 }])
                .collect(),
            gamma: (0..hidden).map(|l| vec![0.0; bn_width(l)]).collect(),
            beta: (0..hidden).map(|l| vec![0.0; bn_width(l)]).collect(),
        }
    }

    pub fn reset(&mut self) {
        self.weights
            .iter_mut()
            .for_each(|w| w.as_mut_slice().fill(0.0));
        for v in self
            .biases
            .iter_mut()
            .chain(self.gamma.iter_mut())
            .chain(self.beta.iter_mut())
        {
            v.fill(0.0);
        }
    }
}

/// All trainable parameters, batch-norm statistics and optimizer state of
/// an MLP. Weight matrices are stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub spec: MlpSpec,
    pub weights: Vec<DenseMatrix>,
    /// Empty vectors when the spec has no biases.
    pub biases: Vec<Vec<f64>>,
    /// `None` for layers without batch norm; one entry per hidden layer.
    pub bn: Vec<Option<BatchNorm>>,
    pub momentum: MomentumBuffers,
}

impl ModelState {
    /// Kaiming-normal weights, zero biases, identity batch norm.
    pub fn init(spec: &MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let weights = spec
            .weight_shapes()
            .into_iter()
            .map(|(out, inp)| {
                let std = (2.0 / inp as f64).sqrt();
                let data = (0..out * inp)
                    .map(|_| std * rng.standard_normal())
                    .collect();
                DenseMatrix::from_vec(out, inp, data).expect("finite init")
            })
            .collect();
        Ok(Self::with_weights(spec, weights))
    }

    /// Wraps given weight matrices with zero biases and fresh batch norm.
    pub fn with_weights(spec: &MlpSpec, weights: Vec<DenseMatrix>) -> Self {
        let biases = spec
            .weight_shapes()
            .iter()
            .map(|&(r, _)| vec![0.0; if spec.bias { r } else { 0 }])
            .collect();
        let bn = (0..spec.num_layers() - 1)
            .map(|l| spec.has_bn(l).then(|| BatchNorm::new(spec.widths[l + 1])))
            .collect();
        Self {
            spec: spec.clone(),
            weights,
            biases,
            bn,
            momentum: MomentumBuffers::zeros(spec),
        }
    }

    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        self.weights.iter().map(DenseMatrix::shape).collect()
    }

    pub fn num_weights(&self) -> usize {
        self.weights.iter().map(DenseMatrix::len).sum()
    }

    /// Checks internal shape consistency against the spec.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let shapes = self.spec.weight_shapes();
        if self.weight_shapes() != shapes {
            return Err(Error::shape("weights do not match spec"));
        }
        for (l, (&(out, _), b)) in shapes.iter().zip(&self.biases).enumerate() {
            let want = if self.spec.bias { out } else { 0 };
            if b.len() != want {
                return Err(Error::shape(format!("bias {l} has length {}", b.len())));
            }
        }
        for (l, bn) in self.bn.iter().enumerate() {
            match (bn, self.spec.has_bn(l)) {
                (Some(bn), true) => {
                    let w = self.spec.widths[l + 1];
                    if bn.gamma.len() != w || bn.running_var.iter().any(|&v| v <= 0.0) {
                        return Err(Error::shape(format!("batch norm {l} is inconsistent")));
                    }
                }
                (None, false) => {}
                _ => return Err(Error::shape(format!("batch norm {l} presence mismatch"))),
            }
        }
        Ok(())
    }
}
