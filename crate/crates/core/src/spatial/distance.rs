use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::points::PointSet;
use crate::error::{Error, Result};

/// Largest point count for which [`DistanceMode::auto`] picks the exact scan.
pub const EXACT_SUMMARY_LIMIT: usize = 20_000;
/// Pair count and seed used by [`DistanceMode::auto`] above the exact limit.
pub const DEFAULT_SAMPLE_PAIRS: usize = 100_000;
pub const DEFAULT_SAMPLE_SEED: u64 = 0x5eed_d157;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// All `n(n-1)/2` unordered pairs.
    Exact,
    /// `pairs` unordered pairs drawn uniformly with replacement.
    Sampled { pairs: usize, seed: u64 },
}

impl DistanceMode {
    pub fn auto(n: usize) -> Self {
        if n <= EXACT_SUMMARY_LIMIT {
            DistanceMode::Exact
        } else {
            DistanceMode::Sampled {
                pairs: DEFAULT_SAMPLE_PAIRS,
                seed: DEFAULT_SAMPLE_SEED,
            }
        }
    }
}

/// Mean and maximum inter-point distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub r_mean: f64,
    pub r_max: f64,
    pub exact: bool,
}

pub fn distance_summary(points: &PointSet, mode: DistanceMode) -> Result<DistanceSummary> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints {
            required: 2,
            got: n,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.points().iter().map(|p| (p.x, p.y)).unzip();
    let dist = |i: usize, j: usize| super::points::euclidean(xs[i], ys[i], xs[j], ys[j]);
    match mode {
        DistanceMode::Exact => {
            let mut total = 0.0;
            let mut r_max = 0.0f64;
            for i in 0..n {
                // Per-row partial sums keep the rounding error of the grand total small.
                let mut row = 0.0;
                for j in (i + 1)..n {
                    let d = dist(i, j);
                    row += d;
                    r_max = r_max.max(d);
                }
                total += row;
            }
            let pairs = (n * (n - 1) / 2) as f64;
            Ok(DistanceSummary {
                r_mean: total / pairs,
                r_max,
                exact: true,
            })
        }
        DistanceMode::Sampled { pairs, seed } => {
            if pairs == 0 {
                return Err(Error::InvalidArgument(
                    "sampled mode needs at least one pair".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            let mut r_max = 0.0f64;
            for _ in 0..pairs {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let d = dist(i, j);
                total += d;
                r_max = r_max.max(d);
            }
            Ok(DistanceSummary {
                r_mean: total / pairs as f64,
                r_max,
                exact: false,
            })
        }
    }
}
