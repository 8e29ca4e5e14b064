use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    argmax_rows, backward, forward, loss_and_grad, loss_value, update_running_stats, Mode,
    ModelState, Targets, TaskData,
};
use crate::numerics::Rng;
use crate::pruning::Mask;

const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdParams {
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    1e-4
}

fn default_batch_size() -> usize {
    64
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
            batch_size: default_batch_size(),
        }
    }
}

impl SgdParams {
    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight decay must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }
}

/// Sets pruned weights and their momentum to exactly zero.
pub fn apply_mask(state: &mut ModelState, mask: &Mask) -> Result<()> {
    mask.check_shapes(&state.weight_shapes())?;
    for ((w, buf), m) in state
        .weights
        .iter_mut()
        .zip(&mut state.momentum.weights)
        .zip(mask.tensors())
    {
        for ((v, b), &k) in w
            .as_mut_slice()
            .iter_mut()
            .zip(buf.as_mut_slice())
            .zip(m.as_slice())
        {
            if !k {
                *v = 0.0;
                *b = 0.0;
            }
        }
    }
    Ok(())
}

/// One pass over `data` in shuffled mini-batches. Returns the mean
/// training loss (train-mode batch norm) over the epoch.
pub fn sgd_epoch(
    state: &mut ModelState,
    mask: &Mask,
    data: &TaskData,
    params: &SgdParams,
    rng: &mut Rng,
) -> Result<f64> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::shape("empty training set"));
    }
    apply_mask(state, mask)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let mut total = 0.0;
    for idx in order.chunks(params.batch_size) {
        let batch = data.inputs.select_rows(idx);
        let targets = data.targets.select(idx);
        let pass = forward(state, mask, &batch, Mode::Train)?;
        let (loss, d_out) = loss_and_grad(pass.output(), &targets)?;
        let grads = backward(state, mask, &pass, &d_out)?;
        update_running_stats(state, &pass);
        sgd_update(state, mask, &grads, params);
        total += loss * idx.len() as f64;
    }
    let mean = total / data.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFiniteLoss { value: mean });
    }
    Ok(mean)
}

fn sgd_update(
    state: &mut ModelState,
    mask: &Mask,
    grads: &crate::network::Gradients,
    p: &SgdParams,
) {
    let step = |value: &mut f64, buf: &mut f64, g: f64| {
        *buf = p.momentum * *buf + g;
        *value -= p.lr * *buf;
    };
    for l in 0..state.weights.len() {
        let keep = mask.tensor(l).as_slice();
        let w = state.weights[l].as_mut_slice();
        let buf = state.momentum.weights[l].as_mut_slice();
        for (((v, b), &g), &k) in w
            .iter_mut()
            .zip(buf)
            .zip(grads.weights[l].as_slice())
            .zip(keep)
        {
            if k {
                step(v, b, g + p.weight_decay * *v);
            }
        }
        for ((v, b), &g) in state.biases[l]
            .iter_mut()
            .zip(&mut state.momentum.biases[l])
            .zip(&grads.biases[l])
        {
            step(v, b, g);
        }
    }
    for (h, bn) in state.bn.iter_mut().enumerate() {
        if let Some(bn) = bn {
            for ((v, b), &g) in bn
                .gamma
                .iter_mut()
                .zip(&mut state.momentum.gamma[h])
                .zip(&grads.gamma[h])
            {
                step(v, b, g);
            }
            for ((v, b), &g) in bn
                .beta
                .iter_mut()
                .zip(&mut state.momentum.beta[h])
                .zip(&grads.beta[h])
            {
                step(v, b, g);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Fraction of correct argmax predictions; `NaN` for real targets.
    pub accuracy: f64,
}

/// Eval-mode loss and accuracy over the whole set.
pub fn evaluate(state: &ModelState, mask: &Mask, data: &TaskData) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::shape("empty evaluation set"));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..data.len()).collect();
    for idx in all.chunks(EVAL_CHUNK) {
        let part = data.select(idx);
        let out = forward(state, mask, &part.inputs, Mode::Eval)?.into_output();
        loss += loss_value(&out, &part.targets)? * idx.len() as f64;
        if let Targets::Classes { labels, .. } = &part.targets {
            correct += argmax_rows(&out)
                .iter()
                .zip(labels)
                .filter(|(p, l)| p == l)
                .count();
        }
    }
    let n = data.len() as f64;
    let accuracy = match data.targets {
        Targets::Classes { .. } => correct as f64 / n,
        Targets::Real(_) => f64::NAN,
    };
    Ok(Evaluation {
        loss: loss / n,
        accuracy,
    })
}
