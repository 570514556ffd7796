//! Deterministic 80/10/10 split keyed on pair index.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// SplitMix64 finalizer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Orders indices by a hash of `(seed, index)` and cuts at 80% and 90%. Each
/// part is returned in ascending index order.
pub fn split_indices(n: usize, seed: u64) -> Split {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (mix(mix(seed) ^ i as u64), i));
    let n_train = (n * 8).div_ceil(10);
    let n_val = (n - n_train) / 2;
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Split { train, val, test }
}
