use crate::analytics::SignLedger;
use crate::error::{Error, Result};

/// Counts over integer bins `0..counts.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn zeros(bins: usize) -> Self {
        Self {
            counts: vec![0; bins],
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    /// Median bin, averaging the two middle values when the total is even.
    /// `None` for an empty histogram.
    pub fn median(&self) -> Option<f64> {
        let n = self.total();
        if n == 0 {
            return None;
        }
        let nth = |k: usize| {
            let mut acc = 0;
            for (bin, &c) in self.counts.iter().enumerate() {
                acc += c;
                if acc > k {
                    return bin;
                }
            }
            unreachable!()
        };
        let hi = nth(n / 2);
        let lo = if n.is_multiple_of(2) { nth(n / 2 - 1) } else { hi };
        Some((lo + hi) as f64 / 2.0)
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| {
            self.counts
                .iter()
                .enumerate()
                .map(|(b, &c)| (b * c) as f64)
                .sum::<f64>()
                / n as f64
        })
    }

    /// Adds another histogram bin by bin, growing as needed.
    pub fn merge(&mut self, other: &Histogram) {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, &b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// `bin,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,count\n");
        for (b, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{b},{c}\n"));
        }
        s
    }

    /// Whitespace-separated `bin count` lines.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from("# bin count\n");
        for (b, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{b} {c}\n"));
        }
        s
    }
}

fn need_two_levels(ledger: &SignLedger) -> Result<()> {
    if ledger.levels() < 2 {
        return Err(Error::config(
            "sign statistics need at least two recorded levels",
        ));
    }
    Ok(())
}

/// Settle level of one sign sequence: the earliest level from which every
/// nonzero sign equals the final sign.
pub fn settle_level(seq: &[i8]) -> usize {
    let last = *seq.last().expect("non-empty sequence");
    seq.iter()
        .rposition(|&s| s != 0 && s != last)
        .map_or(0, |i| i + 1)
}

/// Number of sign changes between consecutive nonzero entries.
pub fn flip_count(seq: &[i8]) -> usize {
    let mut prev = 0i8;
    let mut flips = 0;
    for &s in seq.iter().filter(|&&s| s != 0) {
        if prev != 0 && s != prev {
            flips += 1;
        }
        prev = s;
    }
    flips
}

/// Histogram of settle levels over the parameters kept at the final level.
pub fn settle_iteration_histogram(ledger: &SignLedger) -> Result<Histogram> {
    need_two_levels(ledger)?;
    let mut h = Histogram::zeros(ledger.levels());
    for p in ledger.survivors() {
        h.add(settle_level(&ledger.sequence(p)));
    }
    Ok(h)
}

/// Histogram of sign-flip counts over the parameters kept at the final
/// level; pruned gaps are not flips.
pub fn flip_count_histogram(ledger: &SignLedger) -> Result<Histogram> {
    need_two_levels(ledger)?;
    let mut h = Histogram::zeros(ledger.levels());
    for p in ledger.survivors() {
        h.add(flip_count(&ledger.sequence(p)));
    }
    Ok(h)
}

/// Parameters whose sign at `level` is nonzero and differs from a nonzero
/// sign at level 0.
pub fn flipped_since_start(ledger: &SignLedger, level: usize) -> usize {
    let first = ledger.row(0);
    ledger
        .row(level)
        .iter()
        .zip(first)
        .filter(|(&s, &s0)| s != 0 && s0 != 0 && s != s0)
        .count()
}

/// Per level: flipped-since-start count of `a` minus that of `b`.
pub fn net_flip_difference(a: &SignLedger, b: &SignLedger) -> Result<Vec<i64>> {
    if a.levels() != b.levels() {
        return Err(Error::LedgerMismatch(format!(
            "{} levels vs {} levels",
            a.levels(),
            b.levels()
        )));
    }
    if a.shapes() != b.shapes() {
        return Err(Error::LedgerMismatch("different parameter tensors".into()));
    }
    Ok((0..a.levels())
        .map(|l| flipped_since_start(a, l) as i64 - flipped_since_start(b, l) as i64)
        .collect())
}

/// `level,difference` rows with a header.
pub fn difference_csv(diff: &[i64]) -> String {
    let mut s = String::from("level,difference\n");
    for (l, d) in diff.iter().enumerate() {
        s.push_str(&format!("{l},{d}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(rows: &[&[i8]]) -> SignLedger {
        let n = rows[0].len();
        let mut l = SignLedger::new(&[(1, n)]);
        for r in rows {
            l.push_row(r.to_vec(), r.iter().map(|&s| s != 0).collect())
                .unwrap();
        }
        l
    }

    #[test]
    fn settle_examples() {
        assert_eq!(settle_level(&[1, 1, 1]), 0);
        assert_eq!(settle_level(&[1, -1, -1]), 1);
        assert_eq!(settle_level(&[1, -1, 1, 1]), 2);
        assert_eq!(settle_level(&[-1, 0, -1]), 0);
    }

    #[test]
    fn flip_examples() {
        assert_eq!(flip_count(&[1, -1, 1]), 2);
        assert_eq!(flip_count(&[1, 0, 1]), 0);
        assert_eq!(flip_count(&[1, 1, -1, -1]), 1);
    }

    #[test]
    fn histograms_count_survivors_only() {
        let l = ledger(&[&[1, 1, -1], &[-1, 1, 0], &[-1, -1, 0]]);
        let settle = settle_iteration_histogram(&l).unwrap();
        assert_eq!(settle.counts, vec![0, 1, 1]);
        let flips = flip_count_histogram(&l).unwrap();
        assert_eq!(flips.counts, vec![0, 2, 0]);
        assert_eq!(settle.median(), Some(1.5));
        assert!(settle_iteration_histogram(&ledger(&[&[1]])).is_err());
    }

    #[test]
    fn net_difference() {
        let a = ledger(&[&[1, 1], &[-1, 1], &[-1, -1]]);
        let b = ledger(&[&[1, 1], &[1, 1], &[-1, 1]]);
        assert_eq!(net_flip_difference(&a, &a).unwrap(), vec![0, 0, 0]);
        assert_eq!(net_flip_difference(&a, &b).unwrap(), vec![0, 1, 1]);
        assert_eq!(net_flip_difference(&b, &a).unwrap(), vec![0, -1, -1]);
        let short = ledger(&[&[1, 1], &[1, 1]]);
        assert!(matches!(
            net_flip_difference(&a, &short),
            Err(Error::LedgerMismatch(_))
        ));
    }

    #[test]
    fn histogram_helpers() {
        let h = Histogram {
            counts: vec![2, 0, 1],
        };
        assert_eq!(h.median(), Some(0.0));
        assert_eq!(h.mean(), Some(2.0 / 3.0));
        assert_eq!(h.to_csv(), "bin,count\n0,2\n1,0\n2,1\n");
        assert_eq!(Histogram::zeros(3).median(), None);
    }
}
