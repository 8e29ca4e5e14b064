//! Test-side oracles shared by the integration suites. Nothing here calls
//! the library's own gradient or forward code paths except where noted.

#![allow(dead_code)]

use lrrlab::network::{forward, loss_value, Mode, ModelState, Targets};
use lrrlab::numerics::DenseMatrix;
use lrrlab::pruning::Mask;

/// One scalar trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    Weight(usize, usize),
    Bias(usize, usize),
    Gamma(usize, usize),
    Beta(usize, usize),
}

pub fn all_params(state: &ModelState) -> Vec<ParamRef> {
    let mut out = Vec::new();
    for (l, w) in state.weights.iter().enumerate() {
        out.extend((0..w.len()).map(|i| ParamRef::Weight(l, i)));
    }
    for (l, b) in state.biases.iter().enumerate() {
        out.extend((0..b.len()).map(|i| ParamRef::Bias(l, i)));
    }
    for (h, bn) in state.bn.iter().enumerate() {
        if let Some(bn) = bn {
            out.extend((0..bn.gamma.len()).map(|i| ParamRef::Gamma(h, i)));
            out.extend((0..bn.beta.len()).map(|i| ParamRef::Beta(h, i)));
        }
    }
    out
}

pub fn param_mut(state: &mut ModelState, p: ParamRef) -> &mut f64 {
    match p {
        ParamRef::Weight(l, i) => &mut state.weights[l].as_mut_slice()[i],
        ParamRef::Bias(l, i) => &mut state.biases[l][i],
        ParamRef::Gamma(h, i) => &mut state.bn[h].as_mut().unwrap().gamma[i],
        ParamRef::Beta(h, i) => &mut state.bn[h].as_mut().unwrap().beta[i],
    }
}

pub fn grad_of(grads: &lrrlab::network::Gradients, p: ParamRef) -> f64 {
    match p {
        ParamRef::Weight(l, i) => grads.weights[l].as_slice()[i],
        ParamRef::Bias(l, i) => grads.biases[l][i],
        ParamRef::Gamma(h, i) => grads.gamma[h][i],
        ParamRef::Beta(h, i) => grads.beta[h][i],
    }
}

/// Train-mode loss plus the ReLU on/off pattern of every hidden unit.
fn loss_and_pattern(
    state: &ModelState,
    mask: &Mask,
    x: &DenseMatrix,
    t: &Targets,
) -> (f64, Vec<bool>) {
    let pass = forward(state, mask, x, Mode::Train).unwrap();
    let mut pattern = Vec::new();
    for h in 0..state.weights.len() - 1 {
        pattern.extend(pass.hidden(h).as_slice().iter().map(|&v| v > 0.0));
    }
    (loss_value(pass.output(), t).unwrap(), pattern)
}

/// Central difference of the train-mode loss along `p`. The flag is true
/// when the two evaluation points see different ReLU patterns, in which
/// case the difference straddles a kink and is not a valid oracle.
pub fn central_difference(
    state: &ModelState,
    mask: &Mask,
    x: &DenseMatrix,
    t: &Targets,
    p: ParamRef,
    h: f64,
) -> (f64, bool) {
    let mut plus = state.clone();
    *param_mut(&mut plus, p) += h;
    let mut minus = state.clone();
    *param_mut(&mut minus, p) -= h;
    let (lp, pp) = loss_and_pattern(&plus, mask, x, t);
    let (lm, pm) = loss_and_pattern(&minus, mask, x, t);
    ((lp - lm) / (2.0 * h), pp != pm)
}

/// `|g - fd| / max(|g|, |fd|, 1e-6)`.
///
/// The floor sits well above the rounding noise of a central difference
/// with step 1e-5 (about 1e-11 for losses of order one), so gradients that
/// are exactly zero, such as a bias feeding batch norm, compare sensibly.
pub fn relative_error(g: f64, fd: f64) -> f64 {
    (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6)
}

/// Eval-mode forward written with explicit loops.
pub fn naive_forward_eval(state: &ModelState, mask: &Mask, x: &DenseMatrix) -> Vec<Vec<f64>> {
    let n_layers = state.weights.len();
    (0..x.rows())
        .map(|r| {
            let mut a: Vec<f64> = x.row(r).to_vec();
            for l in 0..n_layers {
                let w = &state.weights[l];
                let keep = mask.tensor(l).as_slice();
                let mut z: Vec<f64> = (0..w.rows())
                    .map(|o| {
                        let mut s = 0.0;
                        for i in 0..w.cols() {
                            if keep[o * w.cols() + i] {
                                s += w.get(o, i) * a[i];
                            }
                        }
                        if state.spec.bias {
                            s += state.biases[l][o];
                        }
                        s
                    })
                    .collect();
                if l + 1 < n_layers {
                    if let Some(bn) = &state.bn[l] {
                        for (j, v) in z.iter_mut().enumerate() {
                            *v = bn.gamma[j] * (*v - bn.running_mean[j])
                                / (bn.running_var[j] + 1e-5).sqrt()
                                + bn.beta[j];
                        }
                    }
                    z.iter_mut().for_each(|v| *v = v.max(0.0));
                }
                a = z;
            }
            a
        })
        .collect()
}
