use lrrlab::analytics::{
    difference_csv, flip_count, flip_count_histogram, flipped_since_start, net_flip_difference,
    settle_iteration_histogram, settle_level, Histogram, SignLedger,
};
use lrrlab::network::{MlpSpec, ModelState};
use lrrlab::numerics::{DenseMatrix, Rng};
use lrrlab::pruning::{Mask, MaskTensor};
use lrrlab::Error;
use proptest::prelude::*;

/// A ledger over one `1 x n` tensor from explicit per-level signs.
fn ledger_from(rows: &[Vec<i8>]) -> SignLedger {
    let n = rows[0].len();
    let mut l = SignLedger::new(&[(1, n)]);
    for r in rows {
        l.push_row(r.clone(), r.iter().map(|&s| s != 0).collect())
            .unwrap();
    }
    l
}

/// Random ledger in which a pruned parameter never comes back.
fn arb_ledger() -> impl Strategy<Value = SignLedger> {
    (2usize..8, 1usize..20).prop_flat_map(|(levels, n)| {
        prop::collection::vec(
            (0..=levels, prop::collection::vec(prop::bool::ANY, levels)),
            n,
        )
        .prop_map(move |params| {
            let rows: Vec<Vec<i8>> = (0..levels)
                .map(|l| {
                    params
                        .iter()
                        .map(|(alive, signs)| match (l < *alive, signs[l]) {
                            (false, _) => 0,
                            (true, true) => 1,
                            (true, false) => -1,
                        })
                        .collect()
                })
                .collect();
            let mut ledger = SignLedger::new(&[(1, n)]);
            for r in rows {
                let kept = r.iter().map(|&s| s != 0).collect();
                ledger.push_row(r, kept).unwrap();
            }
            ledger
        })
    })
}

proptest! {
    #[test]
    fn histograms_are_bounded_and_count_survivors(ledger in arb_ledger()) {
        let settle = settle_iteration_histogram(&ledger).unwrap();
        let flips = flip_count_histogram(&ledger).unwrap();
        let survivors = ledger.survivors().len();
        prop_assert_eq!(settle.total(), survivors);
        prop_assert_eq!(flips.total(), survivors);
        for h in [&settle, &flips] {
            for (bin, &c) in h.counts.iter().enumerate() {
                prop_assert!(c == 0 || bin < ledger.levels());
            }
        }
        for p in ledger.survivors() {
            let seq = ledger.sequence(p);
            prop_assert!(flip_count(&seq) >= usize::from(settle_level(&seq) > 0));
            prop_assert!(settle_level(&seq) < ledger.levels());
        }
    }

    #[test]
    fn net_difference_is_antisymmetric(a in arb_ledger(), seed in 0u64..100) {
        // Second ledger with the same shape: shuffle the first one's rows.
        let mut rng = Rng::new(seed);
        let n = a.num_params();
        let mut b = SignLedger::new(a.shapes());
        for l in 0..a.levels() {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let signs: Vec<i8> = perm.iter().map(|&p| a.row(l)[p]).collect();
            let kept = signs.iter().map(|&s| s != 0).collect();
            b.push_row(signs, kept).unwrap();
        }
        let ab = net_flip_difference(&a, &b).unwrap();
        let ba = net_flip_difference(&b, &a).unwrap();
        prop_assert_eq!(ab[0], 0);
        prop_assert!(ab.iter().zip(&ba).all(|(x, y)| *x == -*y));
        prop_assert!(net_flip_difference(&a, &a).unwrap().iter().all(|&d| d == 0));
    }

    #[test]
    fn encoding_round_trips(ledger in arb_ledger()) {
        let back = SignLedger::decode(std::path::Path::new("mem"), &ledger.encode()).unwrap();
        prop_assert_eq!(back, ledger);
    }
}

#[test]
fn settle_and_flip_examples() {
    assert_eq!(settle_level(&[1, 1, 1]), 0);
    assert_eq!(settle_level(&[1, -1, -1]), 1);
    assert_eq!(settle_level(&[-1, 1, -1, 1]), 3);
    // Zeros are gaps, not signs.
    assert_eq!(settle_level(&[-1, 0, 1, 1]), 1);
    assert_eq!(flip_count(&[1, -1, 1]), 2);
    assert_eq!(flip_count(&[1, 0, 1]), 0);
    assert_eq!(flip_count(&[1, 0, -1]), 1);
    assert_eq!(flip_count(&[1, 1, 1]), 0);
}

#[test]
fn histogram_of_a_hand_ledger() {
    // Parameters: stable, flips once at level 1, flips twice, pruned at 2.
    let ledger = ledger_from(&[vec![1, 1, 1, -1], vec![1, -1, -1, -1], vec![1, -1, 1, 0]]);
    assert_eq!(ledger.survivors(), vec![0, 1, 2]);
    let settle = settle_iteration_histogram(&ledger).unwrap();
    assert_eq!(settle.counts, vec![1, 1, 1]);
    let flips = flip_count_histogram(&ledger).unwrap();
    assert_eq!(flips.counts, vec![1, 1, 1]);
    assert_eq!(settle.median(), Some(1.0));
    assert_eq!(flipped_since_start(&ledger, 2), 1);
    assert_eq!(flipped_since_start(&ledger, 1), 2);
}

#[test]
fn one_level_is_not_enough() {
    let ledger = ledger_from(&[vec![1, -1]]);
    assert!(matches!(
        settle_iteration_histogram(&ledger),
        Err(Error::Config(_))
    ));
}

#[test]
fn mismatched_ledgers_are_rejected() {
    let a = ledger_from(&[vec![1, -1], vec![1, 1]]);
    let b = ledger_from(&[vec![1, -1], vec![1, 1], vec![1, 1]]);
    let c = ledger_from(&[vec![1, -1, 1], vec![1, 1, 1]]);
    assert!(matches!(
        net_flip_difference(&a, &b),
        Err(Error::LedgerMismatch(_))
    ));
    assert!(matches!(
        net_flip_difference(&a, &c),
        Err(Error::LedgerMismatch(_))
    ));
}

#[test]
fn record_signs_masks_out_pruned_entries() {
    let spec = MlpSpec::new(vec![2, 2], false, false);
    let w = DenseMatrix::from_vec(2, 2, vec![0.5, -0.25, 0.0, -3.0]).unwrap();
    let state = ModelState::with_weights(&spec, vec![w]);
    let mask = Mask::new(vec![MaskTensor::from_keep(
        2,
        2,
        vec![true, true, true, false],
    )
    .unwrap()]);
    let mut ledger = SignLedger::for_state(&state);
    ledger.record_signs(&state, &mask, 0).unwrap();
    assert_eq!(ledger.row(0), &[1, -1, 0, 0]);
    assert!(ledger.record_signs(&state, &mask, 3).is_err());
}

#[test]
fn median_and_mean() {
    let h = Histogram {
        counts: vec![2, 0, 2],
    };
    assert_eq!(h.median(), Some(1.0));
    assert_eq!(h.mean(), Some(1.0));
    let h = Histogram {
        counts: vec![3, 1, 0],
    };
    assert_eq!(h.median(), Some(0.0));
    assert_eq!(Histogram::zeros(4).median(), None);
    let mut a = Histogram { counts: vec![1] };
    a.merge(&Histogram {
        counts: vec![0, 2, 5],
    });
    assert_eq!(a.counts, vec![1, 2, 5]);
    assert_eq!(a.to_csv(), "bin,count\n0,1\n1,2\n2,5\n");
}

#[test]
fn difference_csv_format() {
    assert_eq!(
        difference_csv(&[0, -2, 3]),
        "level,difference\n0,0\n1,-2\n2,3\n"
    );
}
