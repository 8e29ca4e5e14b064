use super::model::{dot, objective, NeuronData, NeuronParams};
use crate::error::Result;
use crate::numerics::{integrate_ode, integrate_ode_observed, Trajectory};

/// Constants of the univariate flow on the current active set.
///
/// `c1 = (1/n) sum_{i in I} x_i1^2`, `c2 = (1/n) sum_{i in I} y_i x_i1` and
/// `c2_tilde = sign(a) sign(w_1) c2`. With no noise `y_i x_i1 = x_i1 relu(x_i1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConstants {
    pub c1: f64,
    pub c2: f64,
    pub c2_tilde: f64,
    pub active_set: Vec<usize>,
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Indices `i` with `w . x_i > 0`; samples on the boundary are inactive.
pub fn active_set(w: &[f64], data: &NeuronData) -> Vec<usize> {
    (0..data.n())
        .filter(|&i| dot(w, data.x.row(i)) > 0.0)
        .collect()
}

/// Univariate constants along the first input coordinate. For `d > 1` only
/// the active set is meaningful in the multivariate sense; `c1`/`c2` are
/// then the first-coordinate projections.
pub fn flow_constants(params: &NeuronParams, data: &NeuronData) -> FlowConstants {
    let active = active_set(&params.w, data);
    if active.is_empty() {
        return FlowConstants {
            c1: 0.0,
            c2: 0.0,
            c2_tilde: 0.0,
            active_set: active,
        };
    }
    let n = data.n() as f64;
    let (mut s11, mut s1y) = (0.0, 0.0);
    for &i in &active {
        let x1 = data.x.get(i, 0);
        s11 += x1 * x1;
        s1y += x1 * data.y[i];
    }
    let c2 = s1y / n;
    FlowConstants {
        c1: s11 / n,
        c2,
        c2_tilde: sign(params.a) * sign(params.w[0]) * c2,
        active_set: active,
    }
}

/// Closed-form solution of the reduced univariate flow
/// `w' = -c1 w^3 + c2_tilde w`, valid while `w` keeps its sign.
///
/// Substituting `u = 1/w^2` makes the equation linear,
/// `u' = -2 c2_tilde u + 2 c1`, which gives the three branches below.
pub fn closed_form_w(t: f64, w0: f64, c1: f64, c2_tilde: f64) -> f64 {
    if c1 == 0.0 || w0 == 0.0 {
        // Without active samples nothing moves.
        return w0;
    }
    let s = sign(w0);
    let w0_sq = w0 * w0;
    if c2_tilde > 0.0 {
        // Divided through by exp(c2_tilde t) to stay finite for large t.
        let decay = (-2.0 * c2_tilde * t).exp();
        s * c2_tilde.sqrt() * w0.abs() / (c1 * w0_sq + (c2_tilde - c1 * w0_sq) * decay).sqrt()
    } else if c2_tilde < 0.0 {
        let growth = (-2.0 * c2_tilde * t).exp();
        s * (-c2_tilde).sqrt() / ((c1 - c2_tilde / w0_sq) * growth - c1).sqrt()
    } else {
        w0 / (2.0 * c1 * w0_sq * t + 1.0).sqrt()
    }
}

/// Time derivative `(a', w')` under gradient flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDerivative {
    pub a_dot: f64,
    pub w_dot: Vec<f64>,
}

/// `w' = -a^2 C1 w + a C2` and `a' = -a w^T C1 w + C2^T w` with
/// `C1 = (1/n) sum_I x_i x_i^T`, `C2 = (1/n) sum_I y_i x_i` on the current
/// active set `I`.
pub fn multivariate_flow_rhs(params: &NeuronParams, data: &NeuronData) -> FlowDerivative {
    let mut out = vec![0.0; params.dim() + 1];
    flow_rhs_into(&params.to_state(), data, &mut out);
    FlowDerivative {
        a_dot: out[0],
        w_dot: out[1..].to_vec(),
    }
}

/// State-vector form of [`multivariate_flow_rhs`] on `[a, w_1..w_d]`.
///
/// Evaluated as `(1/n) sum_I (y_i - a p_i) (p_i, a x_i)` with `p_i = w . x_i`,
/// which is the matrix form expanded without building `C1`.
pub fn flow_rhs_into(state: &[f64], data: &NeuronData, out: &mut [f64]) {
    let a = state[0];
    let w = &state[1..];
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..data.n() {
        let x = data.x.row(i);
        let p = dot(w, x);
        if p > 0.0 {
            let r = data.y[i] - a * p;
            out[0] += r * p;
            let ar = a * r;
            for (o, xk) in out[1..].iter_mut().zip(x) {
                *o += ar * xk;
            }
        }
    }
    let inv_n = 1.0 / data.n() as f64;
    out.iter_mut().for_each(|v| *v *= inv_n);
}

/// Integrates the multivariate flow with RK4, re-evaluating the active set
/// at every stage. States are `[a, w_1..w_d]`.
pub fn simulate_flow(
    params0: &NeuronParams,
    data: &NeuronData,
    t_end: f64,
    step: f64,
) -> Result<Trajectory> {
    integrate_ode(
        |_, y, dy| flow_rhs_into(y, data, dy),
        &params0.to_state(),
        t_end,
        step,
    )
}

/// Summary of a flow integrated without storing the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub final_params: NeuronParams,
    pub max_imbalance: f64,
    pub a_sign_preserved: bool,
}

/// Like [`simulate_flow`] but only tracks balancedness and the sign of `a`.
pub fn simulate_flow_summary(
    params0: &NeuronParams,
    data: &NeuronData,
    t_end: f64,
    step: f64,
) -> Result<FlowSummary> {
    let mut max_imbalance: f64 = 0.0;
    let mut tracker = SignTracker::default();
    let final_state = integrate_ode_observed(
        |_, y, dy| flow_rhs_into(y, data, dy),
        &params0.to_state(),
        t_end,
        step,
        |_, y| {
            let imbalance = y[0] * y[0] - y[1..].iter().map(|v| v * v).sum::<f64>();
            max_imbalance = max_imbalance.max(imbalance.abs());
            tracker.observe(y[0]);
        },
    )?;
    Ok(FlowSummary {
        final_params: NeuronParams::from_state(&final_state),
        max_imbalance,
        a_sign_preserved: tracker.preserved,
    })
}

#[derive(Debug)]
struct SignTracker {
    seen: f64,
    preserved: bool,
}

impl Default for SignTracker {
    fn default() -> Self {
        Self {
            seen: 0.0,
            preserved: true,
        }
    }
}

impl SignTracker {
    fn observe(&mut self, v: f64) {
        let s = sign(v);
        if s == 0.0 {
            return;
        }
        if self.seen == 0.0 {
            self.seen = s;
        } else if s != self.seen {
            self.preserved = false;
        }
    }
}

/// True iff `a(t)` (state component 0) never changes sign; zeros are skipped.
pub fn check_sign_preservation(traj: &Trajectory) -> bool {
    let mut tracker = SignTracker::default();
    for s in traj.states() {
        tracker.observe(s[0]);
    }
    tracker.preserved
}

/// Largest `|a^2 - |w|^2|` along a trajectory.
pub fn max_imbalance(traj: &Trajectory) -> f64 {
    traj.states()
        .map(|s| (s[0] * s[0] - s[1..].iter().map(|v| v * v).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Success,
    Degenerate,
    WrongSign,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::Degenerate => "degenerate",
            Self::WrongSign => "wrong_sign",
        }
    }
}

impl std::fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub loss: f64,
}

/// Thresholds separating a learnt target from the failure modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriteria {
    /// Irreducible loss, `sigma^2 / 2` for label noise `sigma`.
    pub loss_floor: f64,
    /// Allowed excess over `loss_floor`.
    pub loss_tol: f64,
    /// Allowed `|a w_1 - 1|`.
    pub product_tol: f64,
    /// `|a w_1|` below this counts as collapsed to zero.
    pub collapse_tol: f64,
}

impl SuccessCriteria {
    pub fn for_noise(sigma: f64) -> Self {
        Self {
            loss_floor: 0.5 * sigma * sigma,
            loss_tol: 1e-3,
            product_tol: 0.1,
            collapse_tol: 0.1,
        }
    }
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self::for_noise(0.0)
    }
}

pub fn classify_outcome(
    final_params: &NeuronParams,
    loss: f64,
    criteria: &SuccessCriteria,
) -> Outcome {
    let product = final_params.a * final_params.w[0];
    let kind = if loss < criteria.loss_floor + criteria.loss_tol
        && (product - 1.0).abs() < criteria.product_tol
    {
        OutcomeKind::Success
    } else if final_params.a < 0.0 && product.abs() >= criteria.collapse_tol {
        OutcomeKind::WrongSign
    } else {
        OutcomeKind::Degenerate
    };
    Outcome { kind, loss }
}

/// Classifies the final state of a trajectory against `data`.
pub fn classify_trajectory(
    traj: &Trajectory,
    data: &NeuronData,
    criteria: &SuccessCriteria,
) -> Outcome {
    let (_, last) = traj.last().expect("non-empty trajectory");
    let params = NeuronParams::from_state(last);
    classify_outcome(&params, objective(&params, data), criteria)
}
