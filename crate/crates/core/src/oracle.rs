//! Exhaustive reference solvers for small instances.
//!
//! These enumerate every subcarrier assignment and share no code with the
//! scheduler: power is distributed by a sort-based closed-form
//! water-filling and rates use `log2` directly.

use crate::channel::ChannelMatrix;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// Largest `K^N` the oracles will enumerate.
pub const MAX_ENUMERATION: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_value: f64,
    /// Owner of each subcarrier in the best assignment.
    pub best_assignment: Vec<Option<usize>>,
    pub instances_enumerated: u64,
}

fn enumeration_size(users: usize, subcarriers: usize) -> Result<u64> {
    let count = (users as u128)
        .checked_pow(subcarriers as u32)
        .unwrap_or(u128::MAX);
    if count > MAX_ENUMERATION {
        return Err(Error::TooLarge {
            count,
            limit: MAX_ENUMERATION,
        });
    }
    Ok(count as u64)
}

/// Lexicographic odometer over `[0, users)^subcarriers`.
fn for_each_assignment(users: usize, subcarriers: usize, mut visit: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; subcarriers];
    loop {
        visit(&digits);
        let mut pos = subcarriers;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < users {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Water-filling by sorting the floors and growing the active set.
pub fn closed_form_waterfill(floors: &[f64], budget: f64) -> Vec<f64> {
    let mut sorted = floors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut level = budget + sorted[0];
    let mut prefix = 0.0;
    for (m, &c) in sorted.iter().enumerate() {
        let candidate = (budget + prefix + c) / (m + 1) as f64;
        if candidate <= c {
            break;
        }
        prefix += c;
        level = candidate;
    }
    floors.iter().map(|&c| (level - c).max(0.0)).collect()
}

/// Maximum sum rate over all assignments, each water-filled with `budget`.
pub fn brute_force_p1(
    channel: &ChannelMatrix,
    cfg: &ScenarioConfig,
    budget: f64,
) -> Result<OracleResult> {
    let (users, subcarriers) = channel.shape();
    let count = enumeration_size(users, subcarriers)?;
    if !(budget > 0.0) {
        return Err(Error::Argument(format!(
            "budget must be positive, got {budget}"
        )));
    }
    let bandwidth = cfg.subcarrier_bandwidth;
    let noise = cfg.noise_psd * bandwidth;

    let mut best_value = f64::NEG_INFINITY;
    let mut best = Vec::new();
    let mut floors = vec![0.0; subcarriers];
    for_each_assignment(users, subcarriers, |owners| {
        for (n, &k) in owners.iter().enumerate() {
            floors[n] = noise / channel.get(k, n);
        }
        let powers = closed_form_waterfill(&floors, budget);
        let value: f64 = owners
            .iter()
            .enumerate()
            .map(|(n, &k)| bandwidth * (1.0 + powers[n] * channel.get(k, n) / noise).log2())
            .sum();
        if value > best_value {
            best_value = value;
            best = owners.to_vec();
        }
    });
    Ok(OracleResult {
        best_value,
        best_assignment: best.into_iter().map(Some).collect(),
        instances_enumerated: count,
    })
}

/// Minimum total power over all assignments that give every user at least
/// one subcarrier, each user splitting `Rmin` evenly over its subcarriers.
pub fn brute_force_p2(channel: &ChannelMatrix, cfg: &ScenarioConfig) -> Result<OracleResult> {
    let (users, subcarriers) = channel.shape();
    if users > subcarriers {
        return Err(Error::Infeasible(format!(
            "{subcarriers} subcarriers cannot serve {users} users"
        )));
    }
    let count = enumeration_size(users, subcarriers)?;
    let bandwidth = cfg.subcarrier_bandwidth;
    let noise = cfg.noise_psd * bandwidth;

    let mut best_value = f64::INFINITY;
    let mut best = Vec::new();
    let mut sizes = vec![0usize; users];
    for_each_assignment(users, subcarriers, |owners| {
        sizes.iter_mut().for_each(|s| *s = 0);
        for &k in owners {
            sizes[k] += 1;
        }
        if sizes.contains(&0) {
            return;
        }
        let total: f64 = owners
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                let per_carrier = cfg.min_rate / sizes[k] as f64;
                (2f64.powf(per_carrier / bandwidth) - 1.0) * noise / channel.get(k, n)
            })
            .sum();
        if total < best_value {
            best_value = total;
            best = owners.to_vec();
        }
    });
    Ok(OracleResult {
        best_value,
        best_assignment: best.into_iter().map(Some).collect(),
        instances_enumerated: count,
    })
}
