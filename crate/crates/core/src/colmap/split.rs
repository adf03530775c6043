//! Deterministic few-shot train/test split over name-sorted views.

use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_VIEWS: usize = 5;
pub const DEFAULT_TEST_VIEWS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Parallel to `test`: true for the first and last view.
    pub extrapolated: Vec<bool>,
}

/// Test views at `⌊k(M−1)/(n_test−1)⌋` (so `{0, ⌊(M−1)/2⌋, M−1}` for three);
/// training views at the rounded linspace over `[1, M−2]`, moved to the
/// nearest free index (lower first on ties) on collision.
pub fn uniform_split(view_count: usize, n_train: usize, n_test: usize) -> Result<SplitIndices> {
    let m = view_count;
    if n_test < 2 || n_train == 0 {
        return Err(Error::InvalidConfig(format!(
            "split needs at least 2 test views and 1 train view (got {n_train}/{n_test})"
        )));
    }
    if m < n_train + n_test {
        return Err(Error::NotEnoughViews {
            needed: n_train + n_test,
            found: m,
        });
    }
    let test: Vec<usize> = (0..n_test).map(|k| k * (m - 1) / (n_test - 1)).collect();
    let mut taken = vec![false; m];
    for &t in &test {
        taken[t] = true;
    }
    let (lo, hi) = (1.0, (m - 2) as f64);
    let mut train = Vec::with_capacity(n_train);
    for k in 0..n_train {
        let target = if n_train == 1 {
            (lo + hi) * 0.5
        } else {
            lo + (hi - lo) * k as f64 / (n_train - 1) as f64
        };
        let c = target.round() as usize;
        let idx = (0..m)
            .flat_map(|d| [c.checked_sub(d), Some(c + d)])
            .flatten()
            .find(|&i| i < m && !taken[i])
            .expect("enough free indices");
        taken[idx] = true;
        train.push(idx);
    }
    train.sort_unstable();
    let extrapolated = test.iter().map(|&t| t == 0 || t == m - 1).collect();
    Ok(SplitIndices { train, test, extrapolated })
}
