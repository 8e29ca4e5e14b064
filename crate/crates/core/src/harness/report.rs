use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analytics::{
    difference_csv, flip_count_histogram, net_flip_difference, settle_iteration_histogram,
    Histogram, SignLedger,
};
use crate::error::{Error, Result};
use crate::fsio::{read_string, write_atomic};
use crate::pruning::{parse_metrics_csv, MetricsRow};

/// Mean with a two-sided 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub n: usize,
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// Student-t interval `mean ± t(0.975, n-1) * s / sqrt(n)` with the
/// sample standard deviation `s`. A single value or identical values give
/// a zero-width interval.
pub fn t_interval(values: &[f64]) -> Result<Interval> {
    let n = values.len();
    if n == 0 {
        return Err(Error::config("no values to summarize"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    if n == 1 || ss == 0.0 {
        return Ok(Interval {
            n,
            mean,
            low: mean,
            high: mean,
        });
    }
    let sd = (ss / (n - 1) as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let half = t * sd / (n as f64).sqrt();
    Ok(Interval {
        n,
        mean,
        low: mean - half,
        high: mean + half,
    })
}

/// Test accuracy at one level of one scheme, over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub level: usize,
    pub sparsity: f64,
    pub accuracy: Interval,
}

/// Groups rows by scheme and level.
pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(&str, usize), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.scheme, r.level)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((scheme, level), rs)| {
            let acc: Vec<f64> = rs.iter().map(|r| r.test_acc).collect();
            Ok(SummaryRow {
                scheme: scheme.to_string(),
                level,
                sparsity: rs.iter().map(|r| r.sparsity).sum::<f64>() / rs.len() as f64,
                accuracy: t_interval(&acc)?,
            })
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("scheme,level,sparsity,n,mean_acc,ci_low,ci_high\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scheme,
            r.level,
            r.sparsity,
            r.accuracy.n,
            r.accuracy.mean,
            r.accuracy.low,
            r.accuracy.high
        ));
    }
    s
}

/// Sparsity against mean accuracy for one scheme: `x y ci_low ci_high`.
pub fn accuracy_plot_data(rows: &[SummaryRow], scheme: &str) -> String {
    let mut s = String::from("# sparsity test_acc ci_low ci_high\n");
    for r in rows.iter().filter(|r| r.scheme == scheme) {
        s.push_str(&format!(
            "{} {} {} {}\n",
            r.sparsity, r.accuracy.mean, r.accuracy.low, r.accuracy.high
        ));
    }
    s
}

/// Files named `name` below `root`, in path order.
fn find_files(root: &Path, name: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.file_name() == name {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// Every `metrics.csv` below `root`, in path order.
pub fn collect_metrics(root: &Path) -> Result<Vec<MetricsRow>> {
    let files = find_files(root, "metrics.csv")?;
    let mut rows = Vec::new();
    for f in files {
        rows.extend(parse_metrics_csv(&f, &read_string(&f)?)?);
    }
    Ok(rows)
}

/// Aggregates the runs below `root` into `summary.csv` and one
/// `accuracy_<scheme>.dat` per scheme in `out_dir`.
pub fn write_report(root: &Path, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    let rows = collect_metrics(root)?;
    if rows.is_empty() {
        return Err(Error::config(format!(
            "no metrics.csv files below {}",
            root.display()
        )));
    }
    let summary = summarize(&rows)?;
    write_atomic(
        &out_dir.join("summary.csv"),
        summary_csv(&summary).as_bytes(),
    )?;
    let mut schemes: Vec<&str> = summary.iter().map(|r| r.scheme.as_str()).collect();
    schemes.dedup();
    for scheme in schemes {
        write_atomic(
            &out_dir.join(format!("accuracy_{scheme}.dat")),
            accuracy_plot_data(&summary, scheme).as_bytes(),
        )?;
    }
    Ok(summary)
}

/// Sign statistics of one scheme, merged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSummary {
    pub scheme: String,
    pub runs: usize,
    pub settle: Histogram,
    pub flips: Histogram,
}

/// Ledgers below `root` keyed by scheme directory, then seed directory.
fn collect_ledgers(root: &Path) -> Result<BTreeMap<String, BTreeMap<String, SignLedger>>> {
    let files = find_files(root, "signs.bin")?;
    let mut out: BTreeMap<String, BTreeMap<String, SignLedger>> = BTreeMap::new();
    for f in files {
        let name = |p: Option<&Path>| {
            p.and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        };
        let seed_dir = f.parent();
        let seed = name(seed_dir);
        let scheme = name(seed_dir.and_then(Path::parent));
        out.entry(scheme)
            .or_default()
            .insert(seed, SignLedger::load(&f)?);
    }
    Ok(out)
}

/// Settle and flip histograms per scheme, written as `settle_<scheme>` and
/// `flips_<scheme>` in CSV and plot-data form. When `lrr` and `imp` runs
/// share seeds, their summed net flip difference goes to
/// `flip_difference.csv`.
pub fn analyze_runs(root: &Path, out_dir: &Path) -> Result<Vec<SignSummary>> {
    let ledgers = collect_ledgers(root)?;
    if ledgers.is_empty() {
        return Err(Error::config(format!(
            "no signs.bin files below {}",
            root.display()
        )));
    }
    let mut summaries = Vec::new();
    for (scheme, runs) in &ledgers {
        let mut settle = Histogram::zeros(0);
        let mut flips = Histogram::zeros(0);
        for ledger in runs.values() {
            settle.merge(&settle_iteration_histogram(ledger)?);
            flips.merge(&flip_count_histogram(ledger)?);
        }
        for (kind, h) in [("settle", &settle), ("flips", &flips)] {
            write_atomic(
                &out_dir.join(format!("{kind}_{scheme}.csv")),
                h.to_csv().as_bytes(),
            )?;
            write_atomic(
                &out_dir.join(format!("{kind}_{scheme}.dat")),
                h.to_plot_data().as_bytes(),
            )?;
        }
        summaries.push(SignSummary {
            scheme: scheme.clone(),
            runs: runs.len(),
            settle,
            flips,
        });
    }
    if let (Some(a), Some(b)) = (ledgers.get("lrr"), ledgers.get("imp")) {
        let mut total: Option<Vec<i64>> = None;
        for (seed, la) in a {
            let Some(lb) = b.get(seed) else { continue };
            let d = net_flip_difference(la, lb)?;
            total = Some(match total {
                Some(t) if t.len() == d.len() => t.iter().zip(&d).map(|(x, y)| x + y).collect(),
                Some(_) => {
                    return Err(Error::LedgerMismatch(
                        "runs have different level counts".into(),
                    ))
                }
                None => d,
            });
        }
        if let Some(t) = total {
            write_atomic(
                &out_dir.join("flip_difference.csv"),
                difference_csv(&t).as_bytes(),
            )?;
        }
    }
    Ok(summaries)
}
