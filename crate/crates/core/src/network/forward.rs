use crate::error::{Error, Result};
use crate::network::ModelState;
use crate::numerics::{gemm, DenseMatrix};
use crate::pruning::Mask;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm normalizes with batch statistics.
    Train,
    /// Batch norm normalizes with running statistics.
    Eval,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: DenseMatrix,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// Everything a backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    mode: Mode,
    /// Masked weights actually used.
    weights: Vec<DenseMatrix>,
    /// Input of each layer: the batch, then every hidden activation.
    activations: Vec<DenseMatrix>,
    bn: Vec<Option<BnCache>>,
    output: DenseMatrix,
}

impl ForwardPass {
    pub fn output(&self) -> &DenseMatrix {
        &self.output
    }

    pub fn into_output(self) -> DenseMatrix {
        self.output
    }

    /// Post-ReLU activations of hidden layer `l`.
    pub fn hidden(&self, l: usize) -> &DenseMatrix {
        &self.activations[l + 1]
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }
}

/// Gradients for every trainable tensor; empty vectors where a tensor does
/// not exist (no bias, no batch norm).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

/// Elementwise `weight * mask` for every layer.
pub fn masked_weights(state: &ModelState, mask: &Mask) -> Result<Vec<DenseMatrix>> {
    mask.check_shapes(&state.weight_shapes())?;
    Ok(state
        .weights
        .iter()
        .zip(mask.tensors())
        .map(|(w, m)| {
            let mut w = w.clone();
            for (v, &k) in w.as_mut_slice().iter_mut().zip(m.as_slice()) {
                if !k {
                    *v = 0.0;
                }
            }
            w
        })
        .collect())
}

pub fn forward(
    state: &ModelState,
    mask: &Mask,
    batch: &DenseMatrix,
    mode: Mode,
) -> Result<ForwardPass> {
    if batch.cols() != state.spec.input_width() {
        return Err(Error::shape(format!(
            "batch width {} vs input width {}",
            batch.cols(),
            state.spec.input_width()
        )));
    }
    let weights = masked_weights(state, mask)?;
    let n_layers = weights.len();
    let b = batch.rows();
    let mut activations = Vec::with_capacity(n_layers);
    let mut bn_caches = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut current = batch.clone();
    for (l, w) in weights.iter().enumerate() {
        let mut z = DenseMatrix::zeros(b, w.rows());
        gemm(1.0, &current, false, w, true, 0.0, &mut z);
        if state.spec.bias {
            add_row_vector(&mut z, &state.biases[l]);
        }
        activations.push(current);
        if l + 1 == n_layers {
            current = z;
            break;
        }
        let cache = match &state.bn[l] {
            Some(bn) => Some(match mode {
                Mode::Train => batch_normalize(&mut z, &bn.gamma, &bn.beta),
                Mode::Eval => {
                    let inv_std: Vec<f64> = bn
                        .running_var
                        .iter()
                        .map(|v| 1.0 / (v + BN_EPS).sqrt())
                        .collect();
                    let xhat = normalize(&mut z, &bn.running_mean, &inv_std, &bn.gamma, &bn.beta);
                    BnCache {
                        xhat,
                        inv_std,
                        batch_mean: Vec::new(),
                        batch_var: Vec::new(),
                    }
                }
            }),
            None => None,
        };
        bn_caches.push(cache);
        z.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        current = z;
    }
    Ok(ForwardPass {
        mode,
        weights,
        activations,
        bn: bn_caches,
        output: current,
    })
}

/// Logits in eval mode.
pub fn predict(state: &ModelState, mask: &Mask, batch: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(forward(state, mask, batch, Mode::Eval)?.into_output())
}

/// Reverse-mode gradients given `d_output = dLoss/dOutput`. Weight
/// gradients are masked, so pruned entries get exactly zero.
pub fn backward(
    state: &ModelState,
    mask: &Mask,
    pass: &ForwardPass,
    d_output: &DenseMatrix,
) -> Result<Gradients> {
    if d_output.shape() != pass.output.shape() {
        return Err(Error::shape(
            "output gradient does not match forward output",
        ));
    }
    let n_layers = pass.weights.len();
    let mut grads = Gradients {
        weights: Vec::with_capacity(n_layers),
        biases: vec![Vec::new(); n_layers],
        gamma: vec![Vec::new(); n_layers - 1],
        beta: vec![Vec::new(); n_layers - 1],
    };
    let mut weight_grads = vec![None; n_layers];
    let mut dz = d_output.clone();
    for l in (0..n_layers).rev() {
        let input = &pass.activations[l];
        let w = &pass.weights[l];
        let mut gw = DenseMatrix::zeros(w.rows(), w.cols());
        gemm(1.0, &dz, true, input, false, 0.0, &mut gw);
        for (g, &k) in gw.as_mut_slice().iter_mut().zip(mask.tensor(l).as_slice()) {
            if !k {
                *g = 0.0;
            }
        }
        weight_grads[l] = Some(gw);
        if state.spec.bias {
            grads.biases[l] = column_sums(&dz);
        }
        if l == 0 {
            break;
        }
        let mut da = DenseMatrix::zeros(dz.rows(), w.cols());
        gemm(1.0, &dz, false, w, false, 0.0, &mut da);
        // ReLU: the activation is positive exactly where its input was.
        for (g, &a) in da.as_mut_slice().iter_mut().zip(input.as_slice()) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }
        let h = l - 1;
        dz = match (&pass.bn[h], &state.bn[h]) {
            (Some(cache), Some(bn)) => {
                let (dx, dgamma, dbeta) = bn_backward(&da, cache, &bn.gamma, pass.mode);
                grads.gamma[h] = dgamma;
                grads.beta[h] = dbeta;
                dx
            }
            _ => da,
        };
    }
    grads.weights = weight_grads.into_iter().map(Option::unwrap).collect();
    Ok(grads)
}

/// Moves running statistics toward the batch statistics of a train-mode pass.
pub fn update_running_stats(state: &mut ModelState, pass: &ForwardPass) {
    if pass.mode != Mode::Train {
        return;
    }
    for (bn, cache) in state.bn.iter_mut().zip(&pass.bn) {
        if let (Some(bn), Some(cache)) = (bn, cache) {
            for (r, &m) in bn.running_mean.iter_mut().zip(&cache.batch_mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
            }
            for (r, &v) in bn.running_var.iter_mut().zip(&cache.batch_var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
            }
        }
    }
}

fn add_row_vector(z: &mut DenseMatrix, v: &[f64]) {
    for i in 0..z.rows() {
        for (x, &b) in z.row_mut(i).iter_mut().zip(v) {
            *x += b;
        }
    }
}

fn column_sums(m: &DenseMatrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (acc, &x) in s.iter_mut().zip(m.row(i)) {
            *acc += x;
        }
    }
    s
}

/// Replaces `z` by `gamma * xhat + beta` and returns `xhat`.
fn normalize(
    z: &mut DenseMatrix,
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    beta: &[f64],
) -> DenseMatrix {
    let mut xhat = DenseMatrix::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        let xr = xhat.row_mut(i);
        for (j, x) in z.row_mut(i).iter_mut().enumerate() {
            xr[j] = (*x - mean[j]) * inv_std[j];
            *x = gamma[j] * xr[j] + beta[j];
        }
    }
    xhat
}

/// Normalizes `z` in place with biased batch statistics.
fn batch_normalize(z: &mut DenseMatrix, gamma: &[f64], beta: &[f64]) -> BnCache {
    let b = z.rows() as f64;
    let mean: Vec<f64> = column_sums(z).into_iter().map(|s| s / b).collect();
    let mut var = vec![0.0; z.cols()];
    for i in 0..z.rows() {
        for ((acc, &x), &m) in var.iter_mut().zip(z.row(i)).zip(&mean) {
            *acc += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= b);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let xhat = normalize(z, &mean, &inv_std, gamma, beta);
    BnCache {
        xhat,
        inv_std,
        batch_mean: mean,
        batch_var: var,
    }
}

fn bn_backward(
    dy: &DenseMatrix,
    cache: &BnCache,
    gamma: &[f64],
    mode: Mode,
) -> (DenseMatrix, Vec<f64>, Vec<f64>) {
    let dbeta = column_sums(dy);
    let mut dgamma = vec![0.0; gamma.len()];
    for i in 0..dy.rows() {
        for ((acc, &g), &xh) in dgamma.iter_mut().zip(dy.row(i)).zip(cache.xhat.row(i)) {
            *acc += g * xh;
        }
    }
    let mut dx = DenseMatrix::zeros(dy.rows(), dy.cols());
    if mode == Mode::Eval {
        // Running statistics are constants.
        for i in 0..dy.rows() {
            for (j, (o, &g)) in dx.row_mut(i).iter_mut().zip(dy.row(i)).enumerate() {
                *o = g * gamma[j] * cache.inv_std[j];
            }
        }
        return (dx, dgamma, dbeta);
    }
    let b = dy.rows() as f64;
    // d xhat = dy * gamma; sums of d xhat and d xhat * xhat per column are
    // gamma * dbeta and gamma * dgamma.
    for i in 0..dy.rows() {
        let xr = cache.xhat.row(i);
        for (j, (o, &g)) in dx.row_mut(i).iter_mut().zip(dy.row(i)).enumerate() {
            let dxh = g * gamma[j];
            *o = cache.inv_std[j] / b
                * (b * dxh - gamma[j] * dbeta[j] - xr[j] * gamma[j] * dgamma[j]);
        }
    }
    (dx, dgamma, dbeta)
}
