use std::path::Path;

use lrrlab::harness::{
    analyze_runs, collect_metrics, gen_synthetic_task, load_idx, load_task, load_task_file,
    parse_idx_images, parse_idx_labels, run_dir, run_matrix, save_task_file, summarize, t_interval,
    write_report, ExperimentConfig, TaskKind, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
use lrrlab::network::{Targets, TaskData};
use lrrlab::numerics::Rng;
use lrrlab::pruning::{train_level, Mask, MetricsRow, RewindPolicy};
use lrrlab::Error;

fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = IDX_IMAGES_MAGIC.to_be_bytes().to_vec();
    for v in [n, rows, cols] {
        b.extend(v.to_be_bytes());
    }
    b.extend(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = IDX_LABELS_MAGIC.to_be_bytes().to_vec();
    b.extend((labels.len() as u32).to_be_bytes());
    b.extend(labels);
    b
}

fn labels_of(d: &TaskData) -> &[usize] {
    match &d.targets {
        Targets::Classes { labels, .. } => labels,
        _ => panic!("classification data expected"),
    }
}

#[test]
fn idx_fixture_of_two_digits() {
    let dir = tempfile::tempdir().unwrap();
    let mut pixels = vec![0u8; 2 * 784];
    pixels[0] = 255;
    pixels[784 + 783] = 51;
    let img = dir.path().join("img");
    let lbl = dir.path().join("lbl");
    std::fs::write(&img, idx_images(2, 28, 28, &pixels)).unwrap();
    std::fs::write(&lbl, idx_labels(&[7, 3])).unwrap();
    let data = load_idx(&img, &lbl).unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(data.input_width(), 784);
    assert_eq!(data.inputs.get(0, 0), 1.0);
    assert_eq!(data.inputs.get(1, 783), 0.2);
    assert_eq!(labels_of(&data), &[7, 3]);
}

#[test]
fn idx_errors_are_typed() {
    let p = Path::new("fixture");
    let mut bad = idx_images(1, 2, 2, &[0; 4]);
    bad[3] = 0x01;
    assert!(matches!(
        parse_idx_images(p, &bad),
        Err(Error::BadMagic {
            found: 0x801,
            expected: 0x803,
            ..
        })
    ));
    let short = idx_images(2, 2, 2, &[0; 5]);
    assert!(matches!(
        parse_idx_images(p, &short),
        Err(Error::TruncatedFile {
            needed: 24,
            found: 21,
            ..
        })
    ));
    assert!(matches!(
        parse_idx_labels(p, &idx_labels(&[1, 2])[..9]),
        Err(Error::TruncatedFile { .. })
    ));
    assert!(matches!(
        parse_idx_labels(p, &[0, 0]),
        Err(Error::TruncatedFile { .. })
    ));

    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("img");
    let lbl = dir.path().join("lbl");
    std::fs::write(&img, idx_images(2, 1, 1, &[0, 9])).unwrap();
    std::fs::write(&lbl, idx_labels(&[1, 0, 1])).unwrap();
    assert!(matches!(
        load_idx(&img, &lbl),
        Err(Error::CountMismatch {
            images: 2,
            labels: 3
        })
    ));
    assert!(matches!(
        load_idx(&dir.path().join("missing"), &lbl),
        Err(Error::Io { .. })
    ));
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = ExperimentConfig::default();
    cfg.run.schemes = vec![RewindPolicy::Weights, RewindPolicy::BnOnly];
    cfg.task.data_seed = Some(11);
    cfg.pruning.levels = 7;
    let text = cfg.to_toml();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    cfg.save(&p).unwrap();
    assert_eq!(ExperimentConfig::load(&p).unwrap(), cfg);
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(
        ExperimentConfig::from_toml("[task]\nunknown_key = 1\n"),
        Err(Error::Config(_))
    ));
    let mut cfg = ExperimentConfig::default();
    cfg.pruning.keep_fraction = 1.5;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let mut cfg = ExperimentConfig::default();
    cfg.model.widths = vec![3, 8, 10];
    assert!(cfg.validate().is_err());
}

#[test]
fn task_files_round_trip() {
    let cfg = ExperimentConfig::default();
    let task = load_task(&cfg, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("task.bin");
    save_task_file(&p, &task).unwrap();
    assert_eq!(load_task_file(&p).unwrap(), task);

    let mut file_cfg = cfg.clone();
    file_cfg.task.kind = TaskKind::File;
    file_cfg.task.path = Some(p.clone());
    assert_eq!(load_task(&file_cfg, 99).unwrap(), task);

    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&p, &bytes).unwrap();
    assert!(load_task_file(&p).is_err());
}

#[test]
fn synthetic_data_depend_only_on_the_seed() {
    let cfg = ExperimentConfig::default();
    assert_eq!(load_task(&cfg, 1).unwrap(), load_task(&cfg, 1).unwrap());
    assert_ne!(load_task(&cfg, 1).unwrap(), load_task(&cfg, 2).unwrap());
    let mut fixed = cfg.clone();
    fixed.task.data_seed = Some(8);
    assert_eq!(load_task(&fixed, 1).unwrap(), load_task(&fixed, 2).unwrap());
}

/// Test accuracy of a classifier that assigns each point to the closest
/// class mean estimated on the training set.
fn nearest_mean_accuracy(train: &TaskData, test: &TaskData, classes: usize) -> f64 {
    let d = train.input_width();
    let mut means = vec![vec![0.0; d]; classes];
    let mut counts = vec![0usize; classes];
    for (i, &c) in labels_of(train).iter().enumerate() {
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(train.inputs.row(i)) {
            *m += x;
        }
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    let correct = labels_of(test)
        .iter()
        .enumerate()
        .filter(|&(i, &c)| {
            let x = test.inputs.row(i);
            let dist = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (0..classes)
                .min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b])))
                .unwrap()
                == c
        })
        .count();
    correct as f64 / test.len() as f64
}

fn trained_accuracy(separation: f64) -> (f64, f64) {
    let mut cfg = ExperimentConfig::default();
    cfg.task.separation = separation;
    cfg.task.n_train = 1000;
    cfg.task.n_test = 1000;
    cfg.schedule.total_epochs = 10;
    cfg.schedule.warmup_epochs = 2;
    let task = load_task(&cfg, 0).unwrap();
    let mut state = lrrlab::network::ModelState::init(&cfg.model.spec(), &mut Rng::new(0)).unwrap();
    let mask = Mask::dense_for(&state);
    let m = train_level(&mut state, &mask, &cfg, &task, 0, 0).unwrap();
    let oracle = nearest_mean_accuracy(&task.train, &task.test, cfg.task.classes);
    (m.test_acc, oracle)
}

#[test]
fn well_separated_mixture_is_learned() {
    let (acc, oracle) = trained_accuracy(6.0);
    assert!(oracle >= 0.99, "oracle {oracle}");
    assert!(acc >= 0.95, "accuracy {acc}");
}

#[test]
fn inseparable_mixture_stays_at_chance() {
    let (acc, oracle) = trained_accuracy(0.0);
    let chance = 1.0 / ExperimentConfig::default().task.classes as f64;
    assert!(acc <= chance + 0.05, "accuracy {acc}");
    assert!(oracle <= chance + 0.05, "oracle {oracle}");
}

#[test]
fn class_means_are_equidistant() {
    let mut rng = Rng::new(3);
    let task = gen_synthetic_task(4, 8, 40_000, 10, 2.0, &mut rng).unwrap();
    let mut means = vec![vec![0.0; 8]; 4];
    let mut counts = [0usize; 4];
    for (i, &c) in labels_of(&task.train).iter().enumerate() {
        counts[c] += 1;
        for (m, x) in means[c].iter_mut().zip(task.train.inputs.row(i)) {
            *m += x;
        }
    }
    for (m, n) in means.iter_mut().zip(counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    for a in 0..4 {
        for b in a + 1..4 {
            let d: f64 = means[a]
                .iter()
                .zip(&means[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!((d - 2.0).abs() < 0.05, "classes {a},{b}: {d}");
        }
    }
}

#[test]
fn t_interval_hand_example() {
    // Mean 2, sample sd 1, t(0.975, 2) = 4.302653.
    let i = t_interval(&[1.0, 2.0, 3.0]).unwrap();
    let half = 4.302_652_729_749_464 / 3f64.sqrt();
    assert_eq!(i.n, 3);
    assert!((i.mean - 2.0).abs() < 1e-12);
    assert!((i.low - (2.0 - half)).abs() < 1e-6);
    assert!((i.high - (2.0 + half)).abs() < 1e-6);
    let one = t_interval(&[0.7]).unwrap();
    assert_eq!((one.low, one.high), (0.7, 0.7));
    assert!(t_interval(&[]).is_err());
}

#[test]
fn duplicate_runs_give_zero_width_intervals() {
    let row = |seed| MetricsRow {
        level: 1,
        sparsity: 0.2,
        train_loss: 0.1,
        test_acc: 0.9,
        seed,
        scheme: "lrr".into(),
    };
    let s = summarize(&[row(0), row(1), row(2)]).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].accuracy.n, 3);
    assert_eq!(s[0].accuracy.low, s[0].accuracy.high);
}

fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.task.n_train = 200;
    cfg.task.n_test = 100;
    cfg.task.dim = 8;
    cfg.task.classes = 3;
    cfg.model.widths = vec![8, 16, 3];
    cfg.schedule.total_epochs = 3;
    cfg.schedule.warmup_epochs = 1;
    cfg.pruning.rewind_epoch = 1;
    cfg.pruning.levels = 3;
    cfg.run.schemes = vec![RewindPolicy::None, RewindPolicy::Weights];
    cfg.run.seeds = 2;
    cfg.run.workers = 2;
    cfg
}

#[test]
fn run_matrix_report_and_analysis() {
    let cfg = tiny_config();
    let root = tempfile::tempdir().unwrap();
    let records = run_matrix(&cfg, root.path()).unwrap();
    assert_eq!(records.len(), 4);
    let order: Vec<_> = records.iter().map(|r| (r.seed, r.scheme)).collect();
    let seeds = cfg.seeds();
    assert_eq!(
        order,
        vec![
            (seeds[0], RewindPolicy::None),
            (seeds[0], RewindPolicy::Weights),
            (seeds[1], RewindPolicy::None),
            (seeds[1], RewindPolicy::Weights),
        ]
    );
    for r in &records {
        let dir = run_dir(root.path(), r.scheme, r.seed);
        assert_eq!(
            std::fs::read_to_string(dir.join("metrics.csv")).unwrap(),
            r.metrics_csv()
        );
    }
    assert_eq!(collect_metrics(root.path()).unwrap().len(), 4 * 4);

    // A second call resumes every finished run without retraining.
    let again = run_matrix(&cfg, root.path()).unwrap();
    for (a, b) in records.iter().zip(&again) {
        assert_eq!(a.levels, b.levels);
        assert_eq!(a.final_state, b.final_state);
    }

    let out = tempfile::tempdir().unwrap();
    let summary = write_report(root.path(), out.path()).unwrap();
    assert_eq!(summary.len(), 2 * 4);
    assert!(summary.iter().all(|r| r.accuracy.n == 2));
    let csv = std::fs::read_to_string(out.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with("scheme,level,sparsity,n,mean_acc,ci_low,ci_high\n"));
    assert_eq!(csv.lines().count(), 9);
    for f in ["accuracy_lrr.dat", "accuracy_imp.dat"] {
        let text = std::fs::read_to_string(out.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 5, "{f}");
    }

    let signs = analyze_runs(root.path(), out.path()).unwrap();
    assert_eq!(signs.len(), 2);
    for s in &signs {
        assert_eq!(s.runs, 2);
        assert_eq!(s.settle.total(), s.flips.total());
        for kind in ["settle", "flips"] {
            assert!(out.path().join(format!("{kind}_{}.csv", s.scheme)).exists());
            assert!(out.path().join(format!("{kind}_{}.dat", s.scheme)).exists());
        }
    }
    let diff = std::fs::read_to_string(out.path().join("flip_difference.csv")).unwrap();
    assert_eq!(diff.lines().count(), 5);
    assert!(diff.lines().nth(1).unwrap() == "0,0");
}

#[test]
fn reports_of_empty_directories_fail() {
    let root = tempfile::tempdir().unwrap();
    assert!(matches!(
        write_report(root.path(), root.path()),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        analyze_runs(root.path(), root.path()),
        Err(Error::Config(_))
    ));
}
