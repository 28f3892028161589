//! Order-stable summary statistics and the sampled martingale check.

use serde::Serialize;
use thiserror::Error;

/// Minimum sample size for the martingale verdict to mean anything.
pub const MIN_PATHS: usize = 1_000;
/// z-score beyond which a checkpoint counts as a drift detection.
const Z_CRIT: f64 = 3.0;
/// A zero-variance sample is a martingale observation only if its mean
/// really equals the initial value at this relative tolerance.
const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("martingale test needs at least {MIN_PATHS} paths, got {got}")]
    InsufficientPaths { got: usize },
    #[error("checkpoint {index} has {got} values, expected {expected}")]
    RaggedCheckpoints {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("no checkpoints supplied")]
    NoCheckpoints,
}

/// Sum with a fixed halving tree, independent of chunking or thread count,
/// with error growth O(log n) instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean (two-pass, pairwise).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 1, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleVerdict {
    ConsistentWithMartingale,
    SupermartingaleStrict,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub time: f64,
    pub mean: f64,
    pub std_error: f64,
    /// (mean - initial) / std_error; 0 for an exactly constant sample at
    /// the initial value, +-inf for a constant sample away from it.
    pub z: f64,
}

/// Sampled shadow of the martingale property: per-checkpoint z-scores of
/// the mean against the initial value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTestReport {
    pub initial: f64,
    pub n_paths: usize,
    pub z_crit: f64,
    pub checkpoints: Vec<CheckpointStat>,
    pub verdict: MartingaleVerdict,
}

/// Tests whether per-path values at the given checkpoint times look like a
/// martingale started at `initial`. A strictly negative drift at some
/// checkpoint (z < -z_crit) with no positive detection anywhere reads as a
/// strict supermartingale; everything within the band is consistent with a
/// martingale; anything else is inconclusive.
pub fn martingale_test(
    times: &[f64],
    values_at_checkpoints: &[Vec<f64>],
    initial: f64,
) -> Result<MartingaleTestReport, StatsError> {
    if values_at_checkpoints.is_empty() {
        return Err(StatsError::NoCheckpoints);
    }
    let n_paths = values_at_checkpoints[0].len();
    if n_paths < MIN_PATHS {
        return Err(StatsError::InsufficientPaths { got: n_paths });
    }
    for (i, col) in values_at_checkpoints.iter().enumerate() {
        if col.len() != n_paths {
            return Err(StatsError::RaggedCheckpoints {
                index: i,
                expected: n_paths,
                got: col.len(),
            });
        }
    }
    assert_eq!(times.len(), values_at_checkpoints.len());

    let mut checkpoints = Vec::with_capacity(times.len());
    for (t, col) in times.iter().zip(values_at_checkpoints) {
        let (mean, se) = mean_se(col);
        let z = if se > 0.0 {
            (mean - initial) / se
        } else if (mean - initial).abs() <= EXACT_TOL * initial.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY * (mean - initial).signum()
        };
        checkpoints.push(CheckpointStat {
            time: *t,
            mean,
            std_error: se,
            z,
        });
    }

    let any_up = checkpoints.iter().any(|c| c.z > Z_CRIT);
    let any_down = checkpoints.iter().any(|c| c.z < -Z_CRIT);
    let verdict = if !any_up && !any_down {
        MartingaleVerdict::ConsistentWithMartingale
    } else if any_down && !any_up {
        MartingaleVerdict::SupermartingaleStrict
    } else {
        MartingaleVerdict::Inconclusive
    };
    Ok(MartingaleTestReport {
        initial,
        n_paths,
        z_crit: Z_CRIT,
        checkpoints,
        verdict,
    })
}
