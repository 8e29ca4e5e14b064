use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    CosineWarmup,
    StepWarmup,
    Constant,
}

/// Per-epoch learning rate, restarted at every pruning level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub step_milestones: Vec<usize>,
    pub step_factor: f64,
}

/// Cosine with warmup: base 0.1, 5 warmup epochs, 30 epochs per level.
impl Default for LrSchedule {
    fn default() -> Self {
        Self::cosine_warmup(0.1, 5, 30)
    }
}

fn default_step_factor() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn cosine_warmup(base_lr: f64, warmup_epochs: usize, total_epochs: usize) -> Self {
        Self {
            kind: ScheduleKind::CosineWarmup,
            base_lr,
            warmup_epochs,
            total_epochs,
            step_milestones: Vec::new(),
            step_factor: default_step_factor(),
        }
    }

    pub fn step_warmup(
        base_lr: f64,
        warmup_epochs: usize,
        total_epochs: usize,
        milestones: Vec<usize>,
        factor: f64,
    ) -> Self {
        Self {
            kind: ScheduleKind::StepWarmup,
            base_lr,
            warmup_epochs,
            total_epochs,
            step_milestones: milestones,
            step_factor: factor,
        }
    }

    pub fn constant(base_lr: f64, total_epochs: usize) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            base_lr,
            warmup_epochs: 0,
            total_epochs,
            step_milestones: Vec::new(),
            step_factor: default_step_factor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config("base learning rate must be positive"));
        }
        if self.total_epochs == 0 {
            return Err(Error::config("schedule needs at least one epoch"));
        }
        if self.kind != ScheduleKind::Constant && self.warmup_epochs >= self.total_epochs {
            return Err(Error::config(format!(
                "warmup of {} epochs does not fit in {} epochs",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.kind == ScheduleKind::StepWarmup
            && !(self.step_factor > 0.0 && self.step_factor.is_finite())
        {
            return Err(Error::config("step factor must be positive"));
        }
        Ok(())
    }

    /// Learning rate for `epoch` (0-based).
    ///
    /// The warmup ramp is `base * max(epoch, 1) / warmup`, so the first
    /// epoch already trains with a positive rate. After warmup the cosine
    /// schedule decays over the remaining epochs without reaching zero, and
    /// the step schedule multiplies by `step_factor` once per milestone
    /// reached.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.kind == ScheduleKind::Constant {
            return self.base_lr;
        }
        if epoch < self.warmup_epochs {
            return self.base_lr * epoch.max(1) as f64 / self.warmup_epochs as f64;
        }
        match self.kind {
            ScheduleKind::CosineWarmup => {
                // Decays over total - warmup + 1 slots so the last epoch
                // stays strictly positive.
                let span = (self.total_epochs - self.warmup_epochs + 1) as f64;
                let progress = (epoch - self.warmup_epochs) as f64 / span;
                self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
            }
            ScheduleKind::StepWarmup => {
                let drops = self.step_milestones.iter().filter(|&&m| m <= epoch).count();
                self.base_lr * self.step_factor.powi(drops as i32)
            }
            ScheduleKind::Constant => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_warmup_reference_values() {
        let s = LrSchedule::step_warmup(0.1, 10, 160, vec![60, 120], 0.1);
        s.validate().unwrap();
        assert!((s.lr_at(5) - 0.05).abs() < 1e-15);
        assert!((s.lr_at(61) - 0.01).abs() < 1e-15);
        assert!((s.lr_at(121) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn cosine_reaches_base_after_warmup_and_decays() {
        let s = LrSchedule::cosine_warmup(0.2, 5, 30);
        assert_eq!(s.lr_at(5), 0.2);
        assert!(s.lr_at(29) < s.lr_at(5));
        assert!((0..30).all(|e| s.lr_at(e) > 0.0));
        for e in 5..29 {
            assert!(s.lr_at(e + 1) < s.lr_at(e));
        }
    }

    #[test]
    fn rejects_bad_warmup() {
        assert!(LrSchedule::cosine_warmup(0.1, 10, 10).validate().is_err());
        assert!(LrSchedule::constant(0.1, 10).validate().is_ok());
        assert!(LrSchedule::constant(0.0, 10).validate().is_err());
    }
}
