//! Subcarrier and power allocation for the three service objectives.
//!
//! * max rate: greedy best-user assignment plus water-filling
//! * min power: round-robin draft plus channel inversion to meet `Rmin`
//! * max energy efficiency: max-rate solves over a uniform power grid
//!
//! Every solver works on a complete channel matrix and returns an
//! [`Allocation`] together with its [`AllocationReport`].

mod solvers;
mod waterfill;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

pub use solvers::{
    assign_fair, assign_greedy, solve_max_ee, solve_max_rate, solve_min_power, EeSolution,
    PowerGrid, PowerLevelOutcome,
};
pub use waterfill::{waterfill, WaterFill, MAX_BISECTION_STEPS, WATERFILL_REL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MaxRate,
    MinPower,
    MaxEe,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::MaxRate, Objective::MinPower, Objective::MaxEe];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::MaxRate => "max-rate",
            Objective::MinPower => "min-power",
            Objective::MaxEe => "max-ee",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "maxrate" => Ok(Objective::MaxRate),
            "minpower" => Ok(Objective::MinPower),
            "maxee" => Ok(Objective::MaxEe),
            _ => Err(Error::Argument(format!(
                "unknown objective {s:?}; expected max-rate, min-power or max-ee"
            ))),
        }
    }
}

/// Which channel matrix an allocation decision was made on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiSource {
    Perfect,
    Nncf,
    MeanImputed,
}

impl CsiSource {
    pub const ALL: [CsiSource; 3] = [CsiSource::Perfect, CsiSource::Nncf, CsiSource::MeanImputed];

    pub fn as_str(self) -> &'static str {
        match self {
            CsiSource::Perfect => "perfect",
            CsiSource::Nncf => "nncf",
            CsiSource::MeanImputed => "mean_imputed",
        }
    }
}

impl fmt::Display for CsiSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CsiSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(CsiSource::Perfect),
            "nncf" => Ok(CsiSource::Nncf),
            "mean_imputed" | "mean" => Ok(CsiSource::MeanImputed),
            _ => Err(Error::Argument(format!("unknown CSI variant {s:?}"))),
        }
    }
}

/// Subcarrier assignment and per-subcarrier transmit power.
///
/// OFDMA exclusivity is structural: each subcarrier stores at most one
/// user. The K x N views `x(k, n)` and `p(k, n)` are derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    users: usize,
    assignment: Vec<Option<usize>>,
    power: Vec<f64>,
}

impl Allocation {
    pub fn new(users: usize, assignment: Vec<Option<usize>>, power: Vec<f64>) -> Result<Self> {
        if assignment.len() != power.len() {
            return Err(Error::ShapeMismatch {
                expected: (users, assignment.len()),
                actual: (users, power.len()),
            });
        }
        for (n, (a, &p)) in assignment.iter().zip(&power).enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Domain(format!("power on subcarrier {n} is {p}")));
            }
            match a {
                Some(k) if *k >= users => {
                    return Err(Error::Argument(format!(
                        "subcarrier {n} assigned to user {k} of {users}"
                    )))
                }
                None if p > 0.0 => {
                    return Err(Error::Domain(format!(
                        "unassigned subcarrier {n} carries power {p}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            users,
            assignment,
            power,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    /// Binary assignment indicator.
    pub fn x(&self, user: usize, subcarrier: usize) -> bool {
        self.assignment[subcarrier] == Some(user)
    }

    /// Power of `user` on `subcarrier` (zero when not assigned).
    pub fn p(&self, user: usize, subcarrier: usize) -> f64 {
        if self.x(user, subcarrier) {
            self.power[subcarrier]
        } else {
            0.0
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub objective: Objective,
    pub csi_source: CsiSource,
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub total_power: f64,
    pub energy_efficiency: f64,
    pub budget_exceeded: bool,
}

/// An allocation plus the report evaluated on the matrix it was solved on.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    pub report: AllocationReport,
}

impl Solution {
    pub fn with_csi_source(mut self, source: CsiSource) -> Self {
        self.report.csi_source = source;
        self
    }

    /// Allocation file form: report fields plus per-subcarrier
    /// `assignment` (user index or null) and `power`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let r = &self.report;
        serde_json::json!({
            "objective": r.objective,
            "csi_source": r.csi_source,
            "assignment": self.allocation.assignment,
            "power": self.allocation.power,
            "per_user_rates": r.per_user_rates,
            "sum_rate": r.sum_rate,
            "total_power": r.total_power,
            "energy_efficiency": r.energy_efficiency,
            "budget_exceeded": r.budget_exceeded,
        })
    }
}

/// Shannon rate `B log2(1 + p g / (N0 B))` in bit/s.
pub fn rate(power: f64, gain: f64, bandwidth: f64, noise_psd: f64) -> Result<f64> {
    if !(gain > 0.0 && bandwidth > 0.0 && noise_psd > 0.0) {
        return Err(Error::Domain(format!(
            "rate needs positive gain, bandwidth and noise density (g={gain}, B={bandwidth}, N0={noise_psd})"
        )));
    }
    if !(power >= 0.0) {
        return Err(Error::Domain(format!(
            "rate needs nonnegative power, got {power}"
        )));
    }
    Ok(shannon(power, gain, bandwidth, noise_psd * bandwidth))
}

#[inline]
pub(crate) fn shannon(power: f64, gain: f64, bandwidth: f64, noise_power: f64) -> f64 {
    bandwidth * (power * gain / noise_power).ln_1p() / std::f64::consts::LN_2
}

/// Scores `alloc` on `truth`; powers are taken as given.
pub fn evaluate_allocation(
    alloc: &Allocation,
    truth: &ChannelMatrix,
    cfg: &ScenarioConfig,
    objective: Objective,
    csi_source: CsiSource,
) -> Result<AllocationReport> {
    truth.ensure_shape((alloc.users, alloc.subcarriers()))?;
    let bandwidth = cfg.subcarrier_bandwidth;
    let noise = cfg.noise_power();
    let mut per_user_rates = vec![0.0; alloc.users];
    for (n, (a, &p)) in alloc.assignment.iter().zip(&alloc.power).enumerate() {
        if let Some(k) = *a {
            per_user_rates[k] += shannon(p, truth.get(k, n), bandwidth, noise);
        }
    }
    let sum_rate: f64 = per_user_rates.iter().sum();
    let total_power = alloc.total_power();
    let denom = total_power + cfg.circuit_power;
    let energy_efficiency = if denom > 0.0 { sum_rate / denom } else { 0.0 };
    Ok(AllocationReport {
        objective,
        csi_source,
        per_user_rates,
        sum_rate,
        total_power,
        energy_efficiency,
        budget_exceeded: total_power > cfg.max_power * (1.0 + 1e-9),
    })
}
