use crate::error::{Error, Result};

/// Relative tolerance on `sum(p) == budget`.
pub const WATERFILL_REL_TOL: f64 = 1e-10;
pub const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// `(index, power)` in input order.
    pub powers: Vec<(usize, f64)>,
    /// Water level `mu = 1 / lambda`.
    pub level: f64,
    pub bisection_steps: usize,
}

impl WaterFill {
    pub fn total(&self) -> f64 {
        self.powers.iter().map(|(_, p)| p).sum()
    }
}

/// Water-filling over `(index, gain)` channels with a total power `budget`.
///
/// Each channel gets `max(0, mu - N0 B / g)`. The level `mu` is bracketed
/// by `[min_j N0 B / g_j, budget + max_j N0 B / g_j]` and located by
/// bisection; the active set found there is then refined with the closed
/// form `mu = (budget + sum_active floor_j) / |active|` so that the budget
/// is met to rounding precision.
pub fn waterfill(
    channels: &[(usize, f64)],
    budget: f64,
    bandwidth: f64,
    noise_psd: f64,
) -> Result<WaterFill> {
    if channels.is_empty() {
        return Err(Error::Argument(
            "water-filling needs at least one channel".into(),
        ));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::Argument(format!(
            "budget must be positive, got {budget}"
        )));
    }
    if !(bandwidth > 0.0 && noise_psd > 0.0) {
        return Err(Error::Domain(
            "bandwidth and noise density must be positive".into(),
        ));
    }
    let noise = noise_psd * bandwidth;
    let mut floors = Vec::with_capacity(channels.len());
    for &(i, g) in channels {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::Domain(format!("channel {i} has gain {g}")));
        }
        floors.push(noise / g);
    }
    let (powers, level, steps) = fill_floors(&floors, budget)?;
    Ok(WaterFill {
        powers: channels.iter().map(|&(i, _)| i).zip(powers).collect(),
        level,
        bisection_steps: steps,
    })
}

fn poured(floors: &[f64], level: f64) -> f64 {
    floors.iter().map(|&c| (level - c).max(0.0)).sum()
}

/// Core routine on noise floors `c_j = N0 B / g_j`.
pub(crate) fn fill_floors(floors: &[f64], budget: f64) -> Result<(Vec<f64>, f64, usize)> {
    let min_floor = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let max_floor = floors.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (min_floor, budget + max_floor);

    let mut level = 0.5 * (lo + hi);
    let mut steps = 0;
    while steps < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket collapsed to adjacent floats
            break;
        }
        steps += 1;
        level = mid;
        let total = poured(floors, level);
        if (total - budget).abs() <= WATERFILL_REL_TOL * budget {
            break;
        }
        if total > budget {
            hi = level;
        } else {
            lo = level;
        }
    }

    // Active-set refinement; converges in a step or two from the bisection level.
    for _ in 0..=floors.len() {
        let (count, floor_sum) = floors
            .iter()
            .filter(|&&c| c < level)
            .fold((0usize, 0.0), |(n, s), &c| (n + 1, s + c));
        if count == 0 {
            break;
        }
        let next = (budget + floor_sum) / count as f64;
        if next == level {
            break;
        }
        level = next;
    }

    let powers: Vec<f64> = floors.iter().map(|&c| (level - c).max(0.0)).collect();
    let residual = (powers.iter().sum::<f64>() - budget).abs() / budget;
    if !(residual <= WATERFILL_REL_TOL) {
        return Err(Error::NonConvergence {
            message: format!("water level not found after {steps} bisection steps"),
            residual,
        });
    }
    Ok((powers, level, steps))
}
