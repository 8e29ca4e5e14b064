//! Sign dynamics across pruning levels: per-weight sign ledgers, settle and
//! flip histograms, and flip-count differences between two runs.

mod ledger;
mod stats;

pub use ledger::{SignLedger, LEDGER_MAGIC};
pub use stats::{
    difference_csv, flip_count, flip_count_histogram, flipped_since_start, net_flip_difference,
    settle_iteration_histogram, settle_level, Histogram,
};
