//! A single hidden ReLU neuron `f(x) = a relu(w . x)` trained on the target
//! `relu(x_1)`: closed-form univariate dynamics, the multivariate gradient
//! flow, and the LRR-versus-IMP quadrant experiment.

mod flow;
mod model;
mod quadrant;

pub use flow::{
    active_set, check_sign_preservation, classify_outcome, classify_trajectory, closed_form_w,
    flow_constants, flow_rhs_into, max_imbalance, multivariate_flow_rhs, sign, simulate_flow,
    simulate_flow_summary, FlowConstants, FlowDerivative, FlowSummary, Outcome, OutcomeKind,
    SuccessCriteria,
};
pub use model::{
    balanced_init, balanced_init_in_quadrant, bounded_balanced_init, objective, NeuronData,
    NeuronParams, SignQuadrant,
};
pub use quadrant::{
    kept_inputs_schedule, run_quadrant_experiment, run_quadrant_trial, train_gd, QuadrantConfig,
    QuadrantReport, QuadrantRun, ToyScheme,
};
