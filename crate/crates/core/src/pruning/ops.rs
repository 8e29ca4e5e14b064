use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{apply_mask, ModelState, TaskData};
use crate::numerics::Rng;
use crate::pruning::criteria::{random_balanced_mask, top_k_mask};
use crate::pruning::{ceil_count, criterion_scores, KeepTarget, Mask, PruneCriterion};

/// Keeps `ceil(keep_fraction * kept)` of the currently kept weights
/// (per tensor for `MagnitudeLayerwise`). Masks only ever shrink.
pub fn prune_step(
    state: &ModelState,
    mask: &Mask,
    criterion: PruneCriterion,
    keep_fraction: f64,
    probe: Option<&TaskData>,
    rng: &mut Rng,
) -> Result<Mask> {
    check_fraction(keep_fraction)?;
    let target = match criterion {
        PruneCriterion::MagnitudeLayerwise => KeepTarget::PerTensor(
            mask.kept_per_tensor()
                .iter()
                .map(|&k| ceil_count(keep_fraction * k as f64))
                .collect(),
        ),
        _ => KeepTarget::Total(ceil_count(keep_fraction * mask.kept() as f64)),
    };
    prune_to_target(state, mask, criterion, &target, probe, rng)
}

/// Prunes to the absolute size of pruning level `level`:
/// `ceil(total * keep_fraction^level)` survivors (per tensor for
/// `MagnitudeLayerwise`). Unlike repeated [`prune_step`] calls, rounding
/// does not accumulate across levels.
pub fn prune_to_level(
    state: &ModelState,
    mask: &Mask,
    criterion: PruneCriterion,
    keep_fraction: f64,
    level: usize,
    probe: Option<&TaskData>,
    rng: &mut Rng,
) -> Result<Mask> {
    check_fraction(keep_fraction)?;
    let density = keep_fraction.powi(level as i32);
    let target = match criterion {
        PruneCriterion::MagnitudeLayerwise => KeepTarget::PerTensor(
            mask.tensors()
                .iter()
                .map(|t| ceil_count(density * t.len() as f64))
                .collect(),
        ),
        _ => KeepTarget::Total(ceil_count(density * mask.total() as f64)),
    };
    prune_to_target(state, mask, criterion, &target, probe, rng)
}

pub fn prune_to_target(
    state: &ModelState,
    mask: &Mask,
    criterion: PruneCriterion,
    target: &KeepTarget,
    probe: Option<&TaskData>,
    rng: &mut Rng,
) -> Result<Mask> {
    let next = match (criterion, target) {
        (PruneCriterion::RandomBalanced, KeepTarget::Total(k)) => {
            random_balanced_mask(mask, *k, rng)?
        }
        (PruneCriterion::RandomBalanced, KeepTarget::PerTensor(_)) => {
            return Err(Error::config(
                "random-balanced pruning takes a total keep count",
            ))
        }
        _ => {
            let scores = criterion_scores(state, mask, criterion, probe)?;
            top_k_mask(state, mask, &scores, target)?
        }
    };
    if matches!(
        criterion,
        PruneCriterion::MagnitudeLayerwise | PruneCriterion::RandomBalanced
    ) {
        if let Some(layer) = next.tensors().iter().position(|t| t.kept() == 0) {
            return Err(Error::EmptyLayer { layer });
        }
    }
    debug_assert!(next.is_subset_of(mask));
    Ok(next)
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "keep fraction {f} must lie in (0, 1)"
        )))
    }
}

/// What is reset to the stored checkpoint after each pruning step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewindPolicy {
    /// Keep the trained parameters (learning-rate rewinding).
    #[serde(alias = "lrr")]
    None,
    /// Reset every trainable to the checkpoint (IMP / weight rewinding).
    #[serde(alias = "imp", alias = "wr")]
    Weights,
    /// Reset only the batch-norm parameters and statistics.
    #[serde(alias = "lrr-bn")]
    BnOnly,
    /// Checkpoint magnitudes with the current signs.
    #[serde(alias = "imp-keep-signs")]
    MagnitudesOnlyKeepSigns,
}

impl RewindPolicy {
    pub const ALL: [RewindPolicy; 4] = [
        RewindPolicy::None,
        RewindPolicy::Weights,
        RewindPolicy::BnOnly,
        RewindPolicy::MagnitudesOnlyKeepSigns,
    ];

    /// Short scheme label used in file names and tables.
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "lrr",
            Self::Weights => "imp",
            Self::BnOnly => "lrr-bn",
            Self::MagnitudesOnlyKeepSigns => "imp-keep-signs",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "lrr" | "none" => Some(Self::None),
            "imp" | "wr" | "weights" => Some(Self::Weights),
            "lrr-bn" | "bn-only" => Some(Self::BnOnly),
            "imp-keep-signs" | "magnitudes-only-keep-signs" => Some(Self::MagnitudesOnlyKeepSigns),
            _ => None,
        }
    }

    pub fn needs_checkpoint(self) -> bool {
        self != Self::None
    }
}

impl std::fmt::Display for RewindPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Applies `policy`, then the mask. Optimizer buffers are zeroed for every
/// policy except `None`, which returns the state unchanged.
pub fn rewind(
    state: &ModelState,
    checkpoint: Option<&ModelState>,
    policy: RewindPolicy,
    mask: &Mask,
) -> Result<ModelState> {
    if policy == RewindPolicy::None {
        return Ok(state.clone());
    }
    let ck = checkpoint.ok_or(Error::MissingCheckpoint(policy.label()))?;
    if ck.spec != state.spec {
        return Err(Error::shape(
            "checkpoint architecture differs from the state",
        ));
    }
    let mut out = state.clone();
    match policy {
        RewindPolicy::None => unreachable!(),
        RewindPolicy::Weights => {
            out.weights = ck.weights.clone();
            out.biases = ck.biases.clone();
            out.bn = ck.bn.clone();
        }
        RewindPolicy::BnOnly => out.bn = ck.bn.clone(),
        RewindPolicy::MagnitudesOnlyKeepSigns => {
            for (w, c) in out.weights.iter_mut().zip(&ck.weights) {
                keep_signs(w.as_mut_slice(), c.as_slice());
            }
            for (b, c) in out.biases.iter_mut().zip(&ck.biases) {
                keep_signs(b, c);
            }
            for (bn, c) in out.bn.iter_mut().zip(&ck.bn) {
                if let (Some(bn), Some(c)) = (bn, c) {
                    keep_signs(&mut bn.gamma, &c.gamma);
                    keep_signs(&mut bn.beta, &c.beta);
                    bn.running_mean = c.running_mean.clone();
                    bn.running_var = c.running_var.clone();
                }
            }
        }
    }
    out.momentum.reset();
    apply_mask(&mut out, mask)?;
    Ok(out)
}

/// `|checkpoint|` with the sign of `current`; a zero current value takes
/// the checkpoint's sign, i.e. the checkpoint value.
fn keep_signs(current: &mut [f64], checkpoint: &[f64]) {
    for (v, &c) in current.iter_mut().zip(checkpoint) {
        *v = if *v == 0.0 { c } else { c.abs().copysign(*v) };
    }
}

/// Draws, in each tensor independently, `floor(fraction * kept)` distinct
/// kept entries.
pub fn sign_flip_sets(mask: &Mask, fraction: f64, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "flip fraction {fraction} must lie in [0, 1]"
        )));
    }
    Ok(mask
        .tensors()
        .iter()
        .map(|t| {
            let pool: Vec<usize> = t.kept_indices().collect();
            let k = (fraction * pool.len() as f64 + 1e-9).floor() as usize;
            let mut picked = rng.choose_distinct(&pool, k.min(pool.len()));
            picked.sort_unstable();
            picked
        })
        .collect())
}

/// Negates the listed entries of each weight tensor.
pub fn apply_sign_flips(state: &mut ModelState, flips: &[Vec<usize>]) -> Result<()> {
    if flips.len() != state.weights.len() {
        return Err(Error::shape("one flip set per weight tensor expected"));
    }
    for (w, idx) in state.weights.iter_mut().zip(flips) {
        let data = w.as_mut_slice();
        for &i in idx {
            let v = data
                .get_mut(i)
                .ok_or_else(|| Error::shape(format!("flip index {i} out of range")))?;
            *v = -*v;
        }
    }
    Ok(())
}

/// Flips the signs of `floor(fraction * kept)` random kept weights in every
/// tensor; magnitudes, the mask and all other parameters are untouched.
pub fn perturb_signs(
    state: &ModelState,
    mask: &Mask,
    fraction: f64,
    rng: &mut Rng,
) -> Result<ModelState> {
    mask.check_shapes(&state.weight_shapes())?;
    let flips = sign_flip_sets(mask, fraction, rng)?;
    let mut out = state.clone();
    apply_sign_flips(&mut out, &flips)?;
    Ok(out)
}

/// Weight magnitudes of `init_from`, signs of `signs_from` and the mask
/// `mask_from`. Pruned entries are zero. A kept entry whose sign source is
/// zero keeps the sign of `init_from`. Biases and batch norm come from
/// `init_from`; optimizer buffers start at zero.
pub fn transplant_assemble(
    init_from: &ModelState,
    mask_from: &Mask,
    signs_from: &ModelState,
) -> Result<ModelState> {
    if init_from.weight_shapes() != signs_from.weight_shapes() {
        return Err(Error::shape("sign source has a different architecture"));
    }
    mask_from.check_shapes(&init_from.weight_shapes())?;
    let mut out = init_from.clone();
    for (w, s) in out.weights.iter_mut().zip(&signs_from.weights) {
        for (v, &sv) in w.as_mut_slice().iter_mut().zip(s.as_slice()) {
            if sv != 0.0 {
                *v = v.abs().copysign(sv);
            }
        }
    }
    out.momentum.reset();
    apply_mask(&mut out, mask_from)?;
    Ok(out)
}
