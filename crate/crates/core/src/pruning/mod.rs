//! Masks, pruning criteria, rewinding policies and the iterative pruning
//! engine.

mod criteria;
mod engine;
mod mask;
mod ops;

pub use criteria::{balanced_counts, ceil_count, criterion_scores, KeepTarget, PruneCriterion};
pub use engine::{
    metrics_csv, parse_metrics_csv, run_iterative_pruning, train_level, train_schedule,
    LevelMetrics, MetricsRow, RunOptions, RunRecord, METRICS_HEADER,
};
pub use mask::{Mask, MaskTensor, MASK_MAGIC};
pub use ops::{
    apply_sign_flips, perturb_signs, prune_step, prune_to_level, prune_to_target, rewind,
    sign_flip_sets, transplant_assemble, RewindPolicy,
};
