use std::path::Path;

use crate::analytics::SignLedger;
use crate::error::{Error, Result};
use crate::fsio::{read_string, write_atomic};
use crate::harness::{ExperimentConfig, TaskSplit};
use crate::network::{
    apply_mask, evaluate, sgd_epoch, Checkpoint, LrSchedule, ModelState, TaskData,
};
use crate::numerics::Rng;
use crate::pruning::{
    apply_sign_flips, prune_to_level, rewind, sign_flip_sets, Mask, RewindPolicy,
};

pub const METRICS_HEADER: &str = "level,sparsity,train_loss,test_acc,seed,scheme";

const INIT_STREAM: u64 = 1;
const BATCH_STREAM: u64 = 100;
const PRUNE_STREAM: u64 = 200;
const PERTURB_STREAM: u64 = 300;

/// Outcome of training at one pruning level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMetrics {
    pub level: usize,
    /// `1 - kept / total` of the mask trained at this level.
    pub sparsity: f64,
    pub kept: usize,
    /// Mean training loss of the last epoch.
    pub train_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: RewindPolicy,
    pub seed: u64,
    pub levels: Vec<LevelMetrics>,
    /// Mask trained at each level; entry 0 is dense.
    pub masks: Vec<Mask>,
    pub ledger: SignLedger,
    pub final_state: ModelState,
    /// Parameters the rewinding policies reset to.
    pub rewind_point: ModelState,
}

impl RunRecord {
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.levels, self.seed, self.scheme)
    }

    pub fn final_metrics(&self) -> &LevelMetrics {
        self.levels
            .last()
            .expect("a run has at least the dense level")
    }
}

/// Overrides for transplant experiments.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Directory receiving per-level artifacts; an existing partial run in
    /// it is resumed.
    pub run_dir: Option<&'a Path>,
    /// Masks for levels `1..=levels`, used instead of pruning.
    pub mask_sequence: Option<&'a [Mask]>,
    /// Replaces the dense run's rewind point.
    pub rewind_point: Option<&'a ModelState>,
}

/// `metrics.csv` content: header plus one row per level, floats printed in
/// shortest round-trip form.
pub fn metrics_csv(levels: &[LevelMetrics], seed: u64, scheme: RewindPolicy) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for m in levels {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.level,
            m.sparsity,
            m.train_loss,
            m.test_acc,
            seed,
            scheme.label()
        ));
    }
    s
}

/// One row of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub level: usize,
    pub sparsity: f64,
    pub train_loss: f64,
    pub test_acc: f64,
    pub seed: u64,
    pub scheme: String,
}

pub fn parse_metrics_csv(path: &Path, text: &str) -> Result<Vec<MetricsRow>> {
    let bad = |line: usize, why: &str| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {why}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(i + 2, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "bad number"));
            Ok(MetricsRow {
                level: f[0].parse().map_err(|_| bad(i + 2, "bad level"))?,
                sparsity: num(f[1])?,
                train_loss: num(f[2])?,
                test_acc: num(f[3])?,
                seed: f[4].parse().map_err(|_| bad(i + 2, "bad seed"))?,
                scheme: f[5].to_string(),
            })
        })
        .collect()
}

/// Trains one full schedule. When `capture_after` is `Some(k)`, also
/// returns the parameters after `k` epochs (`k = 0`: before training).
pub fn train_schedule(
    state: &mut ModelState,
    mask: &Mask,
    schedule: &LrSchedule,
    config: &ExperimentConfig,
    data: &TaskData,
    rng: &mut Rng,
    capture_after: Option<usize>,
) -> Result<(f64, Option<ModelState>)> {
    let mut captured = None;
    if capture_after == Some(0) {
        captured = Some(state.clone());
    }
    let mut loss = f64::NAN;
    for epoch in 0..schedule.total_epochs {
        let params = config.optimizer.sgd(schedule.lr_at(epoch));
        loss = sgd_epoch(state, mask, data, &params, rng)?;
        if capture_after == Some(epoch + 1) {
            captured = Some(state.clone());
        }
    }
    Ok((loss, captured))
}

/// Trains `state` under `mask` for one level with a fresh optimizer and
/// returns the level's metrics.
pub fn train_level(
    state: &mut ModelState,
    mask: &Mask,
    config: &ExperimentConfig,
    task: &TaskSplit,
    seed: u64,
    level: usize,
) -> Result<LevelMetrics> {
    state.momentum.reset();
    apply_mask(state, mask)?;
    let mut rng = Rng::with_stream(seed, BATCH_STREAM + level as u64);
    let (train_loss, _) = train_schedule(
        state,
        mask,
        &config.schedule,
        config,
        &task.train,
        &mut rng,
        None,
    )?;
    level_metrics(state, mask, task, level, train_loss)
}

fn level_metrics(
    state: &ModelState,
    mask: &Mask,
    task: &TaskSplit,
    level: usize,
    train_loss: f64,
) -> Result<LevelMetrics> {
    Ok(LevelMetrics {
        level,
        sparsity: mask.sparsity(),
        kept: mask.kept(),
        train_loss,
        test_acc: evaluate(state, mask, &task.test)?.accuracy,
    })
}

fn check_task(config: &ExperimentConfig, task: &TaskSplit) -> Result<()> {
    let spec = config.model.spec();
    for d in [&task.train, &task.test] {
        if d.input_width() != spec.input_width() || d.targets.output_width() != spec.output_width()
        {
            return Err(Error::config(format!(
                "task of width {} with {} outputs does not fit widths {:?}",
                d.input_width(),
                d.targets.output_width(),
                spec.widths
            )));
        }
    }
    Ok(())
}

/// Everything except the run matrix, which may grow between invocations.
fn same_run_settings(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    a.task == b.task
        && a.model == b.model
        && a.schedule == b.schedule
        && a.optimizer == b.optimizer
        && a.pruning == b.pruning
        && a.perturb == b.perturb
        && a.transplant == b.transplant
}

/// Files of a run directory.
struct RunFiles<'a>(&'a Path);

impl RunFiles<'_> {
    fn config(&self) -> std::path::PathBuf {
        self.0.join("config.toml")
    }
    fn metrics(&self) -> std::path::PathBuf {
        self.0.join("metrics.csv")
    }
    fn signs(&self) -> std::path::PathBuf {
        self.0.join("signs.bin")
    }
    fn rewind_point(&self) -> std::path::PathBuf {
        self.0.join("rewind.ckpt")
    }
    fn level_state(&self, level: usize) -> std::path::PathBuf {
        self.0.join(format!("level_{level:02}.ckpt"))
    }
    fn level_mask(&self, level: usize) -> std::path::PathBuf {
        self.0.join(format!("mask_{level:02}.bin"))
    }
}

struct Progress {
    state: ModelState,
    mask: Mask,
    rewind_point: ModelState,
    levels: Vec<LevelMetrics>,
    masks: Vec<Mask>,
    ledger: SignLedger,
}

impl Progress {
    fn persist(&self, files: &RunFiles, seed: u64, scheme: RewindPolicy) -> Result<()> {
        let level = self.levels.len() - 1;
        if level == 0 {
            Checkpoint::new(self.rewind_point.clone(), None, None).save(&files.rewind_point())?;
        }
        self.mask.save(&files.level_mask(level))?;
        Checkpoint::new(self.state.clone(), Some(self.mask.clone()), None)
            .save(&files.level_state(level))?;
        self.ledger.save(&files.signs())?;
        // Metrics last: their row count marks the level as complete.
        write_atomic(
            &files.metrics(),
            metrics_csv(&self.levels, seed, scheme).as_bytes(),
        )
    }

    /// Reloads the completed levels of an interrupted run.
    fn resume(
        files: &RunFiles,
        config: &ExperimentConfig,
        seed: u64,
        scheme: RewindPolicy,
    ) -> Result<Option<Self>> {
        let metrics_path = files.metrics();
        if !metrics_path.exists() {
            return Ok(None);
        }
        let stored = ExperimentConfig::load(&files.config())?;
        if !same_run_settings(&stored, config) {
            return Err(Error::config(format!(
                "{} holds a run with a different configuration",
                files.0.display()
            )));
        }
        let rows = parse_metrics_csv(&metrics_path, &read_string(&metrics_path)?)?;
        if rows.is_empty() {
            return Ok(None);
        }
        let mut levels = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            if r.level != i || r.seed != seed || r.scheme != scheme.label() {
                return Err(Error::Format {
                    path: metrics_path.clone(),
                    reason: "rows do not belong to this run".into(),
                });
            }
            let mask = Mask::load(&files.level_mask(i))?;
            levels.push(LevelMetrics {
                level: r.level,
                sparsity: r.sparsity,
                kept: mask.kept(),
                train_loss: r.train_loss,
                test_acc: r.test_acc,
            });
        }
        let last = rows.len() - 1;
        let masks = (0..=last)
            .map(|l| Mask::load(&files.level_mask(l)))
            .collect::<Result<Vec<_>>>()?;
        let mut ledger = SignLedger::load(&files.signs())?;
        if ledger.levels() < rows.len() {
            return Err(Error::Format {
                path: files.signs(),
                reason: "sign ledger is behind the metrics".into(),
            });
        }
        if ledger.levels() > rows.len() {
            // Interrupted between the ledger and metrics writes.
            let mut trimmed = SignLedger::new(ledger.shapes());
            for l in 0..rows.len() {
                trimmed.push_row(ledger.row(l).to_vec(), ledger.kept_row(l).to_vec())?;
            }
            ledger = trimmed;
        }
        let state = Checkpoint::load(&files.level_state(last))?.state;
        let rewind_point = Checkpoint::load(&files.rewind_point())?.state;
        Ok(Some(Self {
            state,
            mask: masks[last].clone(),
            rewind_point,
            levels,
            masks,
            ledger,
        }))
    }
}

/// Dense training, then `levels` rounds of prune, rewind, retrain.
///
/// Level 0 trains the dense network for the full schedule and keeps its
/// parameters after `rewind_epoch` epochs as the rewind point. Each later
/// level prunes to `ceil(total * keep^level)` weights, applies the rewind
/// policy, restarts the learning-rate schedule with a fresh optimizer and
/// trains again. Signs are recorded after every level.
///
/// All randomness derives from `seed` through fixed per-purpose streams, so
/// schemes sharing a seed share their dense level exactly.
pub fn run_iterative_pruning(
    config: &ExperimentConfig,
    scheme: RewindPolicy,
    seed: u64,
    task: &TaskSplit,
    options: RunOptions,
) -> Result<RunRecord> {
    config.validate()?;
    check_task(config, task)?;
    let levels = config.pruning.levels;
    if let Some(seq) = options.mask_sequence {
        if seq.len() != levels {
            return Err(Error::config(format!(
                "{} transplanted masks for {levels} levels",
                seq.len()
            )));
        }
    }
    let files = options.run_dir.map(RunFiles);
    let mut progress = match &files {
        Some(f) => Progress::resume(f, config, seed, scheme)?,
        None => None,
    };
    if progress.is_none() {
        if let Some(f) = &files {
            config.save(&f.config())?;
        }
        let spec = config.model.spec();
        let mut state = ModelState::init(&spec, &mut Rng::with_stream(seed, INIT_STREAM))?;
        let mask = Mask::dense_for(&state);
        let mut rng = Rng::with_stream(seed, BATCH_STREAM);
        let (train_loss, captured) = train_schedule(
            &mut state,
            &mask,
            &config.schedule,
            config,
            &task.train,
            &mut rng,
            Some(config.pruning.rewind_epoch),
        )?;
        let rewind_point = match options.rewind_point {
            Some(p) => p.clone(),
            None => captured.expect("rewind epoch validated against the schedule"),
        };
        let mut ledger = SignLedger::for_state(&state);
        ledger.record_signs(&state, &mask, 0)?;
        let p = Progress {
            levels: vec![level_metrics(&state, &mask, task, 0, train_loss)?],
            masks: vec![mask.clone()],
            state,
            mask,
            rewind_point,
            ledger,
        };
        if let Some(f) = &files {
            p.persist(f, seed, scheme)?;
        }
        progress = Some(p);
    }
    let mut p = progress.expect("initialized above");
    let keep = config.pruning.effective_keep_fraction();
    let probe = config
        .pruning
        .criterion
        .eq(&crate::pruning::PruneCriterion::Snip)
        .then(|| task.train.head(config.pruning.probe_size));

    for level in p.levels.len()..=levels {
        let mask = match options.mask_sequence {
            Some(seq) => {
                let m = seq[level - 1].clone();
                m.check_shapes(&p.state.weight_shapes())?;
                m
            }
            None => prune_to_level(
                &p.state,
                &p.mask,
                config.pruning.criterion,
                keep,
                level,
                probe.as_ref(),
                &mut Rng::with_stream(seed, PRUNE_STREAM + level as u64),
            )?,
        };
        let mut state = rewind(&p.state, Some(&p.rewind_point), scheme, &mask)?;
        if let Some(pt) = config.perturb.as_ref().filter(|pt| pt.level == level) {
            let mut rng = Rng::with_stream(seed, PERTURB_STREAM + level as u64);
            let flips = sign_flip_sets(&mask, pt.fraction, &mut rng)?;
            apply_sign_flips(&mut state, &flips)?;
            // Policies that reset to the rewind point would erase the flips
            // at the next level, so they are applied there as well.
            if scheme.needs_checkpoint() {
                apply_sign_flips(&mut p.rewind_point, &flips)?;
            }
        }
        let metrics = train_level(&mut state, &mask, config, task, seed, level)?;
        p.ledger.record_signs(&state, &mask, level)?;
        p.levels.push(metrics);
        p.masks.push(mask.clone());
        p.state = state;
        p.mask = mask;
        if let Some(f) = &files {
            p.persist(f, seed, scheme)?;
        }
    }
    Ok(RunRecord {
        scheme,
        seed,
        levels: p.levels,
        masks: p.masks,
        ledger: p.ledger,
        final_state: p.state,
        rewind_point: p.rewind_point,
    })
}
