//! LRR versus IMP on a single hidden neuron, tabulated per initial sign
//! quadrant of `(a(0), w_1(0))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{classify_outcome, flow_rhs_into, OutcomeKind, SuccessCriteria};
use super::model::{bounded_balanced_init, objective, NeuronData, NeuronParams, SignQuadrant};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyScheme {
    /// Rewind surviving weights to their values at initialization.
    Imp,
    /// Continue from the weights of the previous level.
    Lrr,
}

impl ToyScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Imp => "imp",
            Self::Lrr => "lrr",
        }
    }
}

impl std::fmt::Display for ToyScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantConfig {
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    pub levels: usize,
    pub target_sparsity: f64,
    /// Runs per quadrant; run `s` uses seed `base_seed + s`.
    pub seeds: usize,
    pub base_seed: u64,
    pub epochs_per_level: usize,
    pub lr: f64,
    /// Training stops early once no trainable gradient entry exceeds this
    /// in absolute value.
    pub grad_tol: f64,
    pub init_scale: f64,
    /// Redraw initializations until `|a| |w(0)| <= max_init_product`.
    pub max_init_product: f64,
    pub criteria: SuccessCriteria,
}

impl Default for QuadrantConfig {
    fn default() -> Self {
        let sigma = 0.1;
        Self {
            d: 10,
            n: 10_000,
            sigma,
            levels: 3,
            target_sparsity: 0.9,
            seeds: 10,
            base_seed: 0,
            epochs_per_level: 1000,
            lr: 0.05,
            grad_tol: 1e-7,
            init_scale: 1.0,
            max_init_product: 2.0,
            criteria: SuccessCriteria::for_noise(sigma),
        }
    }
}

/// Inputs kept after each of the `levels` pruning rounds.
///
/// Level `l` keeps `round(d (1 - s)^(l / L))` inputs, i.e. the same fraction
/// is removed at every level; the last level must leave exactly one input.
pub fn kept_inputs_schedule(d: usize, levels: usize, target_sparsity: f64) -> Result<Vec<usize>> {
    if d == 0 {
        return Err(Error::config("input dimension must be at least 1"));
    }
    if levels == 0 {
        return if d == 1 {
            Ok(Vec::new())
        } else {
            Err(Error::config(format!(
                "{d} inputs survive without pruning levels"
            )))
        };
    }
    if !(target_sparsity > 0.0 && target_sparsity < 1.0) {
        return Err(Error::config(format!(
            "target sparsity {target_sparsity} outside (0, 1)"
        )));
    }
    let density = 1.0 - target_sparsity;
    let mut prev = d;
    let mut kept = Vec::with_capacity(levels);
    for l in 1..=levels {
        let k = (d as f64 * density.powf(l as f64 / levels as f64)).round() as usize;
        let k = k.clamp(1, prev);
        kept.push(k);
        prev = k;
    }
    if prev != 1 {
        return Err(Error::config(format!(
            "sparsity {target_sparsity} over {levels} levels leaves {prev} of {d} inputs"
        )));
    }
    Ok(kept)
}

/// Full-batch gradient descent on the masked neuron. Pruned inner weights
/// stay at zero. Stops early at a point whose largest trainable gradient
/// entry is at most `grad_tol`; without the stop, rounding lets iterates
/// that collapse onto the saddle at the origin drift out of it.
pub fn train_gd(
    params: &NeuronParams,
    data: &NeuronData,
    keep: &[bool],
    lr: f64,
    epochs: usize,
    grad_tol: f64,
) -> NeuronParams {
    let mut state = params.to_state();
    for (w, &k) in state[1..].iter_mut().zip(keep) {
        if !k {
            *w = 0.0;
        }
    }
    let mut grad = vec![0.0; state.len()];
    for _ in 0..epochs {
        flow_rhs_into(&state, data, &mut grad);
        let largest = grad[1..]
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .fold(grad[0].abs(), |m, (g, _)| m.max(g.abs()));
        if largest <= grad_tol {
            break;
        }
        state[0] += lr * grad[0];
        for ((w, g), &k) in state[1..].iter_mut().zip(&grad[1..]).zip(keep) {
            if k {
                *w += lr * g;
            }
        }
    }
    NeuronParams::from_state(&state)
}

/// Keeps the `count` largest `|w_i|` among currently kept inputs; ties go to
/// the lower index.
fn prune_inputs(w: &[f64], keep: &[bool], count: usize) -> Vec<bool> {
    let mut candidates: Vec<usize> = (0..w.len()).filter(|&i| keep[i]).collect();
    candidates.sort_by(|&i, &j| w[j].abs().total_cmp(&w[i].abs()).then(i.cmp(&j)));
    let mut next = vec![false; w.len()];
    for &i in candidates.iter().take(count) {
        next[i] = true;
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantRun {
    pub seed: u64,
    pub quadrant: SignQuadrant,
    pub scheme: ToyScheme,
    pub final_loss: f64,
    pub outcome: OutcomeKind,
    pub a_final: f64,
    pub w1_final: f64,
}

impl Serialize for SignQuadrant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl Serialize for OutcomeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// One seed, one forced quadrant, one scheme: dense training, then `levels`
/// prune-and-retrain rounds.
pub fn run_quadrant_trial(
    config: &QuadrantConfig,
    seed: u64,
    quadrant: SignQuadrant,
    scheme: ToyScheme,
) -> Result<QuadrantRun> {
    let schedule = kept_inputs_schedule(config.d, config.levels, config.target_sparsity)?;
    let data = NeuronData::synthesize(
        config.n,
        config.d,
        config.sigma,
        &mut Rng::with_stream(seed, 0),
    );
    let mut init_rng = Rng::with_stream(seed, 1 + quadrant.index() as u64);
    let init = bounded_balanced_init(
        config.d,
        config.init_scale,
        quadrant,
        config.max_init_product,
        &mut init_rng,
    );

    let mut keep = vec![true; config.d];
    let mut params = train_gd(
        &init,
        &data,
        &keep,
        config.lr,
        config.epochs_per_level,
        config.grad_tol,
    );
    for &count in &schedule {
        keep = prune_inputs(&params.w, &keep, count);
        let start = match scheme {
            ToyScheme::Imp => init.clone(),
            ToyScheme::Lrr => params.clone(),
        };
        params = train_gd(
            &start,
            &data,
            &keep,
            config.lr,
            config.epochs_per_level,
            config.grad_tol,
        );
    }

    let loss = objective(&params, &data);
    let outcome = classify_outcome(&params, loss, &config.criteria);
    Ok(QuadrantRun {
        seed,
        quadrant,
        scheme,
        final_loss: loss,
        outcome: outcome.kind,
        a_final: params.a,
        w1_final: params.w[0],
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuadrantReport {
    pub runs: Vec<QuadrantRun>,
}

impl QuadrantReport {
    pub fn success_rate(&self, scheme: ToyScheme, quadrant: SignQuadrant) -> f64 {
        let (hits, total) = self
            .runs
            .iter()
            .filter(|r| r.scheme == scheme && r.quadrant == quadrant)
            .fold((0usize, 0usize), |(h, t), r| {
                (h + usize::from(r.outcome == OutcomeKind::Success), t + 1)
            });
        if total == 0 {
            f64::NAN
        } else {
            hits as f64 / total as f64
        }
    }

    pub fn mean_loss(&self, scheme: ToyScheme, quadrant: SignQuadrant) -> f64 {
        let losses: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.scheme == scheme && r.quadrant == quadrant)
            .map(|r| r.final_loss)
            .collect();
        losses.iter().sum::<f64>() / losses.len() as f64
    }

    pub fn schemes(&self) -> Vec<ToyScheme> {
        let mut s: Vec<ToyScheme> = self.runs.iter().map(|r| r.scheme).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Success rate per scheme and quadrant as an aligned text table.
    pub fn table(&self) -> String {
        let mut out = String::from("scheme");
        for q in SignQuadrant::ALL {
            out.push_str(&format!("  {:>6}", q.name()));
        }
        out.push('\n');
        for scheme in self.schemes() {
            out.push_str(&format!("{:<6}", scheme.name()));
            for q in SignQuadrant::ALL {
                out.push_str(&format!("  {:>6.2}", self.success_rate(scheme, q)));
            }
            out.push('\n');
        }
        out
    }

    /// Rows `seed,quadrant,scheme,final_loss,outcome,a_final,w1_final`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,quadrant,scheme,final_loss,outcome,a_final,w1_final\n");
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.seed, r.quadrant, r.scheme, r.final_loss, r.outcome, r.a_final, r.w1_final
            ));
        }
        out
    }
}

/// Runs every (seed, quadrant, scheme) trial. Trials are independent and
/// run on the rayon pool; the report is ordered by seed, quadrant, scheme.
pub fn run_quadrant_experiment(
    config: &QuadrantConfig,
    schemes: &[ToyScheme],
) -> Result<QuadrantReport> {
    kept_inputs_schedule(config.d, config.levels, config.target_sparsity)?;
    let mut jobs = Vec::new();
    for s in 0..config.seeds as u64 {
        for q in SignQuadrant::ALL {
            for &scheme in schemes {
                jobs.push((config.base_seed + s, q, scheme));
            }
        }
    }
    let runs = jobs
        .into_par_iter()
        .map(|(seed, q, scheme)| run_quadrant_trial(config, seed, q, scheme))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadrantReport { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_schedule_ends_with_one_input() {
        assert_eq!(kept_inputs_schedule(10, 3, 0.9).unwrap(), vec![5, 2, 1]);
        assert_eq!(kept_inputs_schedule(2, 1, 0.5).unwrap(), vec![1]);
        assert_eq!(kept_inputs_schedule(5, 2, 0.8).unwrap(), vec![2, 1]);
        assert!(kept_inputs_schedule(1, 0, 0.5).unwrap().is_empty());
    }

    #[test]
    fn schedule_rejects_leftover_inputs() {
        assert!(matches!(
            kept_inputs_schedule(10, 3, 0.5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            kept_inputs_schedule(4, 0, 0.5),
            Err(Error::Config(_))
        ));
        assert!(kept_inputs_schedule(4, 2, 1.0).is_err());
    }

    #[test]
    fn prune_inputs_keeps_largest() {
        let keep = prune_inputs(&[0.1, -3.0, 0.5, 2.0], &[true, true, false, true], 2);
        assert_eq!(keep, vec![false, true, false, true]);
    }

    #[test]
    fn gd_keeps_pruned_inputs_at_zero() {
        let data = NeuronData::synthesize(100, 3, 0.1, &mut Rng::new(0));
        let p = NeuronParams::new(0.7, vec![0.3, -0.4, 0.5]);
        let out = train_gd(&p, &data, &[true, false, true], 0.5, 50, 0.0);
        assert_eq!(out.w[1], 0.0);
        assert_ne!(out.w[2], 0.5);
    }

    #[test]
    fn univariate_schemes_coincide() {
        let config = QuadrantConfig {
            d: 1,
            levels: 0,
            seeds: 3,
            n: 200,
            epochs_per_level: 200,
            ..QuadrantConfig::default()
        };
        let report = run_quadrant_experiment(&config, &[ToyScheme::Imp, ToyScheme::Lrr]).unwrap();
        for q in SignQuadrant::ALL {
            assert_eq!(
                report.success_rate(ToyScheme::Imp, q),
                report.success_rate(ToyScheme::Lrr, q)
            );
        }
    }

    #[test]
    fn csv_has_one_row_per_trial() {
        let config = QuadrantConfig {
            d: 2,
            levels: 1,
            target_sparsity: 0.5,
            seeds: 1,
            n: 50,
            epochs_per_level: 5,
            ..QuadrantConfig::default()
        };
        let report = run_quadrant_experiment(&config, &[ToyScheme::Lrr]).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.starts_with("seed,quadrant,scheme,final_loss,outcome,a_final,w1_final\n"));
    }
}
