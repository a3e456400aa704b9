//! Snapshot and Hankel (time-delay) data matrices, and delay selection by
//! numerical rank.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::cr3bp::Trajectory;
use crate::error::{Error, Result};
use crate::linalg;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Consecutive snapshot matrices `X_k` and `X_{k+1}`.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x: Mat<f64>,
    pub xp: Mat<f64>,
}

impl SnapshotPair {
    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }
}

/// `count` states starting at `start`, plus the same window advanced one sample.
pub fn build_snapshots(traj: &Trajectory, start: usize, count: usize) -> Result<SnapshotPair> {
    if count == 0 || start + count + 1 > traj.len() {
        return Err(Error::WindowOutOfRange { start, count: count + 1, len: traj.len() });
    }
    let x = Mat::from_fn(6, count, |r, c| traj.samples[start + c].component(r));
    let xp = Mat::from_fn(6, count, |r, c| traj.samples[start + c + 1].component(r));
    Ok(SnapshotPair { x, xp })
}

/// Block-stacked delay embedding of a data matrix.
#[derive(Debug, Clone)]
pub struct HankelMatrix {
    pub h: Mat<f64>,
    pub delays: usize,
    pub state_dim: usize,
}

impl HankelMatrix {
    pub fn ncols(&self) -> usize {
        self.h.ncols()
    }
}

/// `H[i*n + r, c] = X[r, c + i]` for `0 <= i < l`.
pub fn build_hankel(x: MatRef<'_, f64>, l: usize) -> Result<HankelMatrix> {
    if l == 0 {
        return Err(Error::InvalidArgument("delay dimension must be at least 1".into()));
    }
    if x.ncols() < l {
        return Err(Error::InsufficientColumns { needed: l, found: x.ncols() });
    }
    let n = x.nrows();
    let cols = x.ncols() - l + 1;
    let h = Mat::from_fn(n * l, cols, |row, c| x[(row % n, c + row / n)]);
    Ok(HankelMatrix { h, delays: l, state_dim: n })
}

/// Hankel snapshot pair from `m` consecutive samples: `H_k` uses columns
/// `0..m-1` and `H_{k+1}` columns `1..m`, each with `m - l` columns.
pub fn hankel_pair(data: MatRef<'_, f64>, l: usize) -> Result<SnapshotPair> {
    let m = data.ncols();
    if l == 0 {
        return Err(Error::InvalidArgument("delay dimension must be at least 1".into()));
    }
    if m < l + 1 {
        return Err(Error::InsufficientColumns { needed: l + 1, found: m });
    }
    let x = build_hankel(data.subcols(0, m - 1), l)?.h;
    let xp = build_hankel(data.subcols(1, m - 1), l)?.h;
    Ok(SnapshotPair { x, xp })
}

/// Numerical rank of the delay embedding of `data` at `l` delays.
pub fn hankel_rank(data: MatRef<'_, f64>, l: usize, rank_tol: f64) -> Result<usize> {
    let h = build_hankel(data, l)?;
    let s = linalg::singular_values(h.h.as_ref())?;
    Ok(linalg::numerical_rank(&s, rank_tol))
}

fn check_window(n: usize, m: usize, l: usize) -> Result<()> {
    let cols = if m + 1 > l { m - l + 1 } else { 0 };
    if cols <= n * l {
        return Err(Error::WindowTooShort { delays: l, rows: n * l, cols });
    }
    Ok(())
}

/// Outcome of a delay scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayRank {
    pub delays: usize,
    pub rank: usize,
}

/// Smallest `l` whose delay embedding is row-rank deficient, scanning
/// `l = 1, 2, …, l_max`.
///
/// Every probed `l` must leave more columns than rows.
pub fn min_delay_by_rank(data: MatRef<'_, f64>, rank_tol: f64, l_max: usize) -> Result<DelayRank> {
    let n = data.nrows();
    let mut last_rank = 0;
    for l in 1..=l_max {
        check_window(n, data.ncols(), l)?;
        let rank = hankel_rank(data, l, rank_tol)?;
        if rank < n * l {
            return Ok(DelayRank { delays: l, rank });
        }
        last_rank = rank;
    }
    Err(Error::DelayLimitExceeded { l_max, rank: last_rank })
}

/// [`min_delay_by_rank`] on a trajectory window.
pub fn min_delay_for_trajectory(
    traj: &Trajectory,
    start: usize,
    count: usize,
    rank_tol: f64,
    l_max: usize,
) -> Result<DelayRank> {
    let w = traj.window(start, count)?;
    min_delay_by_rank(w.to_matrix().as_ref(), rank_tol, l_max)
}

/// Rank of the delay embedding for each `l` in `delays`.
pub fn rank_profile(data: MatRef<'_, f64>, delays: &[usize], rank_tol: f64) -> Result<Vec<DelayRank>> {
    delays
        .iter()
        .map(|&l| {
            check_window(data.nrows(), data.ncols(), l)?;
            Ok(DelayRank { delays: l, rank: hankel_rank(data, l, rank_tol)? })
        })
        .collect()
}

/// Smallest delay count in `[l_lo, l_hi]` at which the embedding reaches the
/// rank it has at `l_hi`.
///
/// Relies on the rank being nondecreasing in `l` and locates the point by
/// bisection.
pub fn saturation_delay(data: MatRef<'_, f64>, l_lo: usize, l_hi: usize, rank_tol: f64) -> Result<DelayRank> {
    if l_lo == 0 || l_lo > l_hi {
        return Err(Error::InvalidArgument(format!("invalid delay range [{l_lo}, {l_hi}]")));
    }
    check_window(data.nrows(), data.ncols(), l_hi)?;
    let target = hankel_rank(data, l_hi, rank_tol)?;
    let (mut lo, mut hi) = (l_lo, l_hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if hankel_rank(data, mid, rank_tol)? >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(DelayRank { delays: lo, rank: target })
}
