use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    backward, forward, loss_and_grad, masked_weights, Mode, ModelState, TaskData,
};
use crate::numerics::Rng;
use crate::pruning::{Mask, MaskTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneCriterion {
    /// One magnitude threshold across all weight tensors.
    #[default]
    MagnitudeGlobal,
    /// Each tensor keeps the same fraction of its own weights.
    MagnitudeLayerwise,
    /// Uniformly random survivors, as equal a count per layer as capacity
    /// allows.
    RandomBalanced,
    /// `|dL/dw * w|` on a probe batch.
    Snip,
    /// Path-sensitivity of the absolute-valued network on an all-ones input.
    Synflow,
}

impl PruneCriterion {
    pub fn name(self) -> &'static str {
        match self {
            Self::MagnitudeGlobal => "magnitude-global",
            Self::MagnitudeLayerwise => "magnitude-layerwise",
            Self::RandomBalanced => "random-balanced",
            Self::Snip => "snip",
            Self::Synflow => "synflow",
        }
    }
}

/// Per-entry scores, one vector per weight tensor in row-major order.
/// Pruned entries score 0. `RandomBalanced` has no scores and is rejected.
pub fn criterion_scores(
    state: &ModelState,
    mask: &Mask,
    criterion: PruneCriterion,
    probe: Option<&TaskData>,
) -> Result<Vec<Vec<f64>>> {
    mask.check_shapes(&state.weight_shapes())?;
    let scores = match criterion {
        PruneCriterion::MagnitudeGlobal | PruneCriterion::MagnitudeLayerwise => state
            .weights
            .iter()
            .map(|w| w.as_slice().iter().map(|v| v.abs()).collect())
            .collect(),
        PruneCriterion::Snip => snip_scores(state, mask, probe)?,
        PruneCriterion::Synflow => synflow_scores(state, mask)?,
        PruneCriterion::RandomBalanced => {
            return Err(Error::config("random-balanced pruning has no scores"))
        }
    };
    finalize(scores, mask)
}

fn finalize(mut scores: Vec<Vec<f64>>, mask: &Mask) -> Result<Vec<Vec<f64>>> {
    for (t, (s, m)) in scores.iter_mut().zip(mask.tensors()).enumerate() {
        for (i, (v, &k)) in s.iter_mut().zip(m.as_slice()).enumerate() {
            if !k {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(Error::NonFiniteScore {
                    tensor: t,
                    index: i,
                });
            }
        }
    }
    Ok(scores)
}

fn snip_scores(state: &ModelState, mask: &Mask, probe: Option<&TaskData>) -> Result<Vec<Vec<f64>>> {
    let probe = probe.ok_or_else(|| Error::config("snip scoring needs probe data"))?;
    let pass = forward(state, mask, &probe.inputs, Mode::Train)?;
    let (_, d_out) = loss_and_grad(pass.output(), &probe.targets)?;
    let grads = backward(state, mask, &pass, &d_out)?;
    Ok(state
        .weights
        .iter()
        .zip(&grads.weights)
        .map(|(w, g)| {
            w.as_slice()
                .iter()
                .zip(g.as_slice())
                .map(|(w, g)| (w * g).abs())
                .collect()
        })
        .collect())
}

/// With every weight replaced by its absolute value, biases dropped and
/// batch norm treated as the identity, the network on an all-ones input is
/// linear with output sum `R = 1^T |W_L| ... |W_1| 1`. The score of an
/// entry is `|w| dR/d|w|`, the total weight of paths through it.
fn synflow_scores(state: &ModelState, mask: &Mask) -> Result<Vec<Vec<f64>>> {
    let weights: Vec<_> = masked_weights(state, mask)?
        .into_iter()
        .map(|mut w| {
            w.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
            w
        })
        .collect();
    // into[l]: signal entering layer l; back[l]: sensitivity of R to layer
    // l's output.
    let mut into = vec![vec![1.0; state.spec.input_width()]];
    for w in &weights {
        let prev = into.last().unwrap();
        into.push((0..w.rows()).map(|o| dot(w.row(o), prev)).collect());
    }
    let n = weights.len();
    let mut back = vec![Vec::new(); n];
    back[n - 1] = vec![1.0; state.spec.output_width()];
    for l in (1..n).rev() {
        let w = &weights[l];
        let mut g = vec![0.0; w.cols()];
        for (o, &u) in back[l].iter().enumerate() {
            for (gi, &v) in g.iter_mut().zip(w.row(o)) {
                *gi += u * v;
            }
        }
        back[l - 1] = g;
    }
    Ok(weights
        .iter()
        .enumerate()
        .map(|(l, w)| {
            let mut s = Vec::with_capacity(w.len());
            for o in 0..w.rows() {
                for (i, &v) in w.row(o).iter().enumerate() {
                    s.push(v * back[l][o] * into[l][i]);
                }
            }
            s
        })
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ceil(x)` that ignores rounding noise just above an integer.
pub fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// How many entries survive a pruning step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeepTarget {
    /// Total survivors across all tensors.
    Total(usize),
    /// Survivors per tensor.
    PerTensor(Vec<usize>),
}

/// Keeps the highest-scoring currently kept entries.
///
/// Ranking: exact-zero weights come last, then descending score, then
/// ascending `(tensor, flat index)`; the first `k` candidates survive.
pub(crate) fn top_k_mask(
    state: &ModelState,
    mask: &Mask,
    scores: &[Vec<f64>],
    target: &KeepTarget,
) -> Result<Mask> {
    let rank_key = |t: usize, i: usize| (state.weights[t].as_slice()[i] == 0.0, -scores[t][i]);
    let order = |a: &(usize, usize), b: &(usize, usize)| {
        let (za, sa) = rank_key(a.0, a.1);
        let (zb, sb) = rank_key(b.0, b.1);
        za.cmp(&zb).then(sa.total_cmp(&sb)).then(a.cmp(b))
    };
    let mut out: Vec<MaskTensor> = mask
        .shapes()
        .into_iter()
        .map(|(r, c)| MaskTensor::from_keep(r, c, vec![false; r * c]).expect("sized"))
        .collect();
    match target {
        KeepTarget::Total(k) => {
            let mut cand: Vec<(usize, usize)> = mask
                .tensors()
                .iter()
                .enumerate()
                .flat_map(|(t, m)| m.kept_indices().map(move |i| (t, i)))
                .collect();
            let k = (*k).min(cand.len());
            if k < cand.len() && k > 0 {
                cand.select_nth_unstable_by(k - 1, order);
            }
            for &(t, i) in &cand[..k] {
                out[t].set(i, true);
            }
        }
        KeepTarget::PerTensor(ks) => {
            if ks.len() != mask.num_tensors() {
                return Err(Error::shape("one keep count per tensor expected"));
            }
            for (t, (m, &k)) in mask.tensors().iter().zip(ks).enumerate() {
                let mut cand: Vec<(usize, usize)> = m.kept_indices().map(|i| (t, i)).collect();
                let k = k.min(cand.len());
                if k < cand.len() && k > 0 {
                    cand.select_nth_unstable_by(k - 1, order);
                }
                for &(_, i) in &cand[..k] {
                    out[t].set(i, true);
                }
            }
        }
    }
    Ok(Mask::new(out))
}

/// Splits `total` survivors across tensors as evenly as their current kept
/// counts allow: every tensor gets `min(kept, c)` or `c + 1` for a common
/// level `c`, extra units going to lower tensor indices first.
pub fn balanced_counts(kept: &[usize], total: usize) -> Vec<usize> {
    let total = total.min(kept.iter().sum());
    let mut alloc = vec![0usize; kept.len()];
    let mut remaining = total;
    loop {
        let open: Vec<usize> = (0..kept.len()).filter(|&t| alloc[t] < kept[t]).collect();
        if remaining == 0 || open.is_empty() {
            break;
        }
        let share = remaining / open.len();
        if share == 0 {
            for &t in open.iter().take(remaining) {
                alloc[t] += 1;
            }
            break;
        }
        for &t in &open {
            let add = share.min(kept[t] - alloc[t]);
            alloc[t] += add;
            remaining -= add;
        }
    }
    alloc
}

pub(crate) fn random_balanced_mask(mask: &Mask, total: usize, rng: &mut Rng) -> Result<Mask> {
    let counts = balanced_counts(&mask.kept_per_tensor(), total);
    let tensors = mask
        .tensors()
        .iter()
        .zip(&counts)
        .map(|(m, &k)| {
            let pool: Vec<usize> = m.kept_indices().collect();
            let (r, c) = m.shape();
            let mut keep = vec![false; m.len()];
            for i in rng.choose_distinct(&pool, k) {
                keep[i] = true;
            }
            MaskTensor::from_keep(r, c, keep).expect("sized")
        })
        .collect();
    Ok(Mask::new(tensors))
}
