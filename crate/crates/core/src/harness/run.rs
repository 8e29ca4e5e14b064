use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::{load_task, ExperimentConfig, TaskSplit, TransplantConfig};
use crate::network::{Checkpoint, ModelState};
use crate::pruning::{run_iterative_pruning, Mask, RewindPolicy, RunOptions, RunRecord};

/// `root/<scheme>/seed_<seed>`.
pub fn run_dir(root: &Path, scheme: RewindPolicy, seed: u64) -> PathBuf {
    root.join(scheme.label()).join(format!("seed_{seed}"))
}

/// Runs every configured scheme for every seed under `root`, resuming any
/// partial run directories. Runs execute concurrently on `run.workers`
/// threads (0 uses all cores); each run is single-threaded. Records come
/// back ordered by seed, then by scheme as configured.
pub fn run_matrix(config: &ExperimentConfig, root: &Path) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let seeds = config.seeds();
    let tasks: Vec<TaskSplit> = if config.task.data_seed.is_some() || !synthetic(config) {
        // One task shared by every seed.
        let t = load_task(config, seeds.first().copied().unwrap_or(0))?;
        vec![t; seeds.len()]
    } else {
        seeds
            .iter()
            .map(|&s| load_task(config, s))
            .collect::<Result<_>>()?
    };
    let jobs: Vec<(usize, RewindPolicy)> = (0..seeds.len())
        .flat_map(|i| config.run.schemes.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(i, scheme)| {
                let dir = run_dir(root, scheme, seeds[i]);
                let (masks, rewind_point) = match &config.transplant {
                    Some(t) => load_transplant(t, seeds[i], config.pruning.levels)?,
                    None => (None, None),
                };
                let options = RunOptions {
                    run_dir: Some(&dir),
                    mask_sequence: masks.as_deref(),
                    rewind_point: rewind_point.as_ref(),
                };
                run_iterative_pruning(config, scheme, seeds[i], &tasks[i], options)
            })
            .collect()
    })
}

fn synthetic(config: &ExperimentConfig) -> bool {
    config.task.kind == crate::harness::TaskKind::Synthetic
}

/// Masks of levels `1..=levels` and the rewind point of the source run
/// with the same seed, as selected by `transplant`.
pub fn load_transplant(
    transplant: &TransplantConfig,
    seed: u64,
    levels: usize,
) -> Result<(Option<Vec<Mask>>, Option<ModelState>)> {
    let dir = run_dir(&transplant.root, transplant.scheme, seed);
    let masks = if transplant.masks {
        let seq = (1..=levels)
            .map(|l| Mask::load(&dir.join(format!("mask_{l:02}.bin"))))
            .collect::<Result<Vec<_>>>()?;
        Some(seq)
    } else {
        None
    };
    let rewind_point = if transplant.rewind_point {
        Some(Checkpoint::load(&dir.join("rewind.ckpt"))?.state)
    } else {
        None
    };
    Ok((masks, rewind_point))
}
