//! Reconstruction of missing channel entries.
//!
//! [`nncf_repair`] fills each missing gain with a weighted average of its
//! four grid neighbors: the same user on adjacent subcarriers (frequency
//! neighbors) and adjacent users on the same subcarrier (spatial
//! neighbors). Passes are Jacobi-style: a value filled during a pass only
//! becomes usable as a neighbor in the next pass, so the result does not
//! depend on traversal order.
//!
//! Spatial neighbors can differ from the target user by orders of magnitude
//! in path loss. With [`SpatialScaling::RowMean`] a spatial neighbor's gain
//! is first multiplied by `mean(row k) / mean(row i)` (observed row means),
//! putting it on the target user's scale before it enters the average.

use crate::channel::{ChannelMatrix, Index, MaskedChannelMatrix};
use crate::error::{Error, Result};

/// How spatial-neighbor gains are brought onto the target row's scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialScaling {
    /// Average raw gains.
    None,
    /// Rescale by the ratio of observed row means.
    #[default]
    RowMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborWeights {
    /// Weight of `(k, n - 1)` and `(k, n + 1)`.
    pub freq_weight: f64,
    /// Weight of `(k - 1, n)` and `(k + 1, n)`.
    pub space_weight: f64,
    pub scaling: SpatialScaling,
}

impl Default for NeighborWeights {
    fn default() -> Self {
        Self {
            freq_weight: 2.0,
            space_weight: 1.0,
            scaling: SpatialScaling::RowMean,
        }
    }
}

impl NeighborWeights {
    pub fn unscaled(freq_weight: f64, space_weight: f64) -> Self {
        Self {
            freq_weight,
            space_weight,
            scaling: SpatialScaling::None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.space_weight.is_finite()
            && self.space_weight > 0.0
            && self.freq_weight.is_finite()
            && self.freq_weight >= self.space_weight;
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "neighbor weights need freq_weight >= space_weight > 0, got {} and {}",
                self.freq_weight, self.space_weight
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairResult {
    pub repaired: ChannelMatrix,
    /// Indices that were missing in the input, row-major.
    pub filled_indices: Vec<Index>,
    pub iterations_used: usize,
    /// Entries that no neighbor pass reached and were set by the fallback.
    pub fallback_count: usize,
}

/// Per-row factors used to rescale spatial neighbors.
///
/// Observed row mean, or the global observed mean for rows without
/// observations, or 1.0 when nothing is observed. Under
/// [`SpatialScaling::None`] every factor is 1.0.
pub fn spatial_row_scales(raw: &MaskedChannelMatrix, scaling: SpatialScaling) -> Vec<f64> {
    match scaling {
        SpatialScaling::None => vec![1.0; raw.users()],
        SpatialScaling::RowMean => {
            let global = raw.observed_mean().unwrap_or(1.0);
            (0..raw.users())
                .map(|k| raw.row_observed_mean(k).unwrap_or(global))
                .collect()
        }
    }
}

/// Fills missing entries by neighbor-weighted averaging.
///
/// Runs at most `max_iters` passes. Entries still missing afterwards take
/// the mean of all observed entries (1.0 if none are observed) and are
/// counted in `fallback_count`. Observed entries are copied unchanged.
pub fn nncf_repair(
    raw: &MaskedChannelMatrix,
    weights: NeighborWeights,
    max_iters: usize,
) -> Result<RepairResult> {
    weights.validate()?;
    if max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    let (users, subcarriers) = raw.shape();
    let scales = spatial_row_scales(raw, weights.scaling);
    let filled_indices = raw.missing_indices();

    let mut values: Vec<Option<f64>> = raw.cells().to_vec();
    let mut pending: Vec<Index> = filled_indices.clone();
    let mut iterations_used = 0;
    let mut updates: Vec<(usize, f64)> = Vec::with_capacity(pending.len());

    while !pending.is_empty() && iterations_used < max_iters {
        updates.clear();
        pending.retain(|&(k, n)| {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut take = |i: usize, j: usize, w: f64, rescale: f64| {
                if let Some(g) = values[i * subcarriers + j] {
                    num += w * g * rescale;
                    den += w;
                }
            };
            if n > 0 {
                take(k, n - 1, weights.freq_weight, 1.0);
            }
            if n + 1 < subcarriers {
                take(k, n + 1, weights.freq_weight, 1.0);
            }
            if k > 0 {
                take(k - 1, n, weights.space_weight, scales[k] / scales[k - 1]);
            }
            if k + 1 < users {
                take(k + 1, n, weights.space_weight, scales[k] / scales[k + 1]);
            }
            if den > 0.0 {
                updates.push((k * subcarriers + n, num / den));
                false
            } else {
                true
            }
        });
        if updates.is_empty() {
            break;
        }
        for &(i, v) in &updates {
            values[i] = Some(v);
        }
        iterations_used += 1;
    }

    let fallback_count = pending.len();
    if fallback_count > 0 {
        let fill = raw.observed_mean().unwrap_or(1.0);
        for (k, n) in pending {
            values[k * subcarriers + n] = Some(fill);
        }
    }

    let gains = values.into_iter().map(|v| v.unwrap_or(1.0)).collect();
    Ok(RepairResult {
        repaired: ChannelMatrix::new(users, subcarriers, gains)?,
        filled_indices,
        iterations_used,
        fallback_count,
    })
}

/// Baseline: each missing entry takes its row's observed mean.
///
/// Rows with no observations use the global observed mean; with nothing
/// observed at all every entry becomes 1.0.
pub fn mean_impute(raw: &MaskedChannelMatrix) -> ChannelMatrix {
    let (users, subcarriers) = raw.shape();
    let global = raw.observed_mean().unwrap_or(1.0);
    let mut gains = Vec::with_capacity(users * subcarriers);
    for k in 0..users {
        let fill = raw.row_observed_mean(k).unwrap_or(global);
        gains.extend((0..subcarriers).map(|n| raw.get(k, n).unwrap_or(fill)));
    }
    ChannelMatrix::new(users, subcarriers, gains).expect("imputed gains are positive")
}

/// Root-mean-square difference over `indices`.
pub fn rmse(truth: &ChannelMatrix, estimate: &ChannelMatrix, indices: &[Index]) -> Result<f64> {
    estimate.ensure_shape(truth.shape())?;
    if indices.is_empty() {
        return Err(Error::Argument("rmse needs at least one index".into()));
    }
    let (users, subcarriers) = truth.shape();
    let mut acc = 0.0;
    for &(k, n) in indices {
        if k >= users || n >= subcarriers {
            return Err(Error::Argument(format!("index ({k}, {n}) out of range")));
        }
        let d = truth.get(k, n) - estimate.get(k, n);
        acc += d * d;
    }
    Ok((acc / indices.len() as f64).sqrt())
}
