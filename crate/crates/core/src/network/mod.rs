//! A small fully connected network stack: ReLU layers with optional batch
//! normalization, hand-written reverse-mode gradients, SGD with momentum and
//! per-level learning-rate schedules.

mod checkpoint;
mod data;
mod forward;
mod loss;
mod model;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use data::{Split, Targets, TaskData};
pub use forward::{
    backward, forward, masked_weights, predict, update_running_stats, ForwardPass, Gradients, Mode,
    BN_EPS, BN_MOMENTUM,
};
pub use loss::{argmax_rows, loss_and_grad, loss_value};
pub use model::{Activation, BatchNorm, InitScheme, MlpSpec, ModelState, MomentumBuffers};
pub use schedule::{LrSchedule, ScheduleKind};
pub use train::{apply_mask, evaluate, sgd_epoch, Evaluation, SgdParams};
