use crate::channel::ChannelMatrix;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

use super::waterfill::waterfill;
use super::{evaluate_allocation, Allocation, CsiSource, Objective, Solution};

/// Best user per subcarrier; ties go to the lowest user index.
pub fn assign_greedy(channel: &ChannelMatrix) -> Vec<usize> {
    (0..channel.subcarriers())
        .map(|n| {
            let mut best = 0;
            for k in 1..channel.users() {
                if channel.get(k, n) > channel.get(best, n) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Maximizes sum rate under total power `budget`.
///
/// Greedy assignment followed by water-filling across all subcarriers.
/// Without per-user constraints this decoupling is globally optimal.
pub fn solve_max_rate(
    channel: &ChannelMatrix,
    cfg: &ScenarioConfig,
    budget: f64,
) -> Result<Solution> {
    channel.ensure_shape((cfg.num_users, cfg.num_subcarriers))?;
    if !(budget > 0.0 && budget <= cfg.max_power * (1.0 + 1e-12)) {
        return Err(Error::Argument(format!(
            "budget {budget} W outside (0, {}] W",
            cfg.max_power
        )));
    }
    let owners = assign_greedy(channel);
    let channels: Vec<(usize, f64)> = owners
        .iter()
        .enumerate()
        .map(|(n, &k)| (n, channel.get(k, n)))
        .collect();
    let filled = waterfill(&channels, budget, cfg.subcarrier_bandwidth, cfg.noise_psd)?;
    let power = filled.powers.into_iter().map(|(_, p)| p).collect();
    let allocation = Allocation::new(
        channel.users(),
        owners.into_iter().map(Some).collect(),
        power,
    )?;
    let report = evaluate_allocation(
        &allocation,
        channel,
        cfg,
        Objective::MaxRate,
        CsiSource::Perfect,
    )?;
    Ok(Solution { allocation, report })
}

/// Round-robin draft: users `0..K` in turn take their strongest free
/// subcarrier until none remain. Sets come back in pick order.
pub fn assign_fair(channel: &ChannelMatrix) -> Result<Vec<Vec<usize>>> {
    let (users, subcarriers) = channel.shape();
    if subcarriers < users {
        return Err(Error::Infeasible(format!(
            "{subcarriers} subcarriers cannot serve {users} users"
        )));
    }
    let mut free = vec![true; subcarriers];
    let mut sets = vec![Vec::with_capacity(subcarriers / users + 1); users];
    let mut remaining = subcarriers;
    'draft: loop {
        for (k, set) in sets.iter_mut().enumerate() {
            if remaining == 0 {
                break 'draft;
            }
            let pick = (0..subcarriers)
                .filter(|&n| free[n])
                .fold(None, |best: Option<usize>, n| match best {
                    Some(b) if channel.get(k, b) >= channel.get(k, n) => Some(b),
                    _ => Some(n),
                })
                .expect("a free subcarrier remains");
            free[pick] = false;
            set.push(pick);
            remaining -= 1;
        }
    }
    Ok(sets)
}

/// Meets `Rmin` for every user by channel inversion over the drafted sets.
///
/// Each user splits its rate target evenly across its subcarriers, so
/// `p = (2^(Rmin / (B |S_k|)) - 1) N0 B / g`. No power cap is enforced;
/// `budget_exceeded` flags totals above `Pmax`.
pub fn solve_min_power(channel: &ChannelMatrix, cfg: &ScenarioConfig) -> Result<Solution> {
    channel.ensure_shape((cfg.num_users, cfg.num_subcarriers))?;
    if !(cfg.min_rate >= 0.0) {
        return Err(Error::config("Rmin", "must be nonnegative"));
    }
    let sets = assign_fair(channel)?;
    let bandwidth = cfg.subcarrier_bandwidth;
    let noise = cfg.noise_power();
    let mut assignment = vec![None; channel.subcarriers()];
    let mut power = vec![0.0; channel.subcarriers()];
    for (k, set) in sets.iter().enumerate() {
        let exponent = cfg.min_rate / (bandwidth * set.len() as f64);
        // 2^x - 1 without cancellation for small x
        let snr = (exponent * std::f64::consts::LN_2).exp_m1();
        for &n in set {
            assignment[n] = Some(k);
            power[n] = snr * noise / channel.get(k, n);
        }
    }
    let allocation = Allocation::new(channel.users(), assignment, power)?;
    let report = evaluate_allocation(
        &allocation,
        channel,
        cfg,
        Objective::MinPower,
        CsiSource::Perfect,
    )?;
    Ok(Solution { allocation, report })
}

/// Strictly increasing power levels in `(0, Pmax]`, ending at `Pmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    levels: Vec<f64>,
}

impl PowerGrid {
    /// `{Pmax * l / L : l = 1..=L}`.
    pub fn uniform(max_power: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::config("L", "must be at least 1"));
        }
        if !(max_power.is_finite() && max_power > 0.0) {
            return Err(Error::config("Pmax", "must be positive"));
        }
        let mut levels: Vec<f64> = (1..=count)
            .map(|l| max_power * l as f64 / count as f64)
            .collect();
        levels[count - 1] = max_power;
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLevelOutcome {
    pub budget: f64,
    pub sum_rate: f64,
    /// `sum_rate / (budget + Pc)`
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EeSolution {
    pub solution: Solution,
    pub chosen_level: f64,
    pub chosen_efficiency: f64,
    pub grid: Vec<PowerLevelOutcome>,
}

/// Grid search for maximum energy efficiency.
///
/// Solves the max-rate problem at each level of a uniform `L`-point grid
/// and keeps the level with the largest `R(P) / (P + Pc)`, preferring the
/// smaller power on ties.
pub fn solve_max_ee(channel: &ChannelMatrix, cfg: &ScenarioConfig) -> Result<EeSolution> {
    let grid = PowerGrid::uniform(cfg.max_power, cfg.num_power_levels)?;
    let mut outcomes = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, Solution)> = None;
    for &level in grid.levels() {
        let solution = solve_max_rate(channel, cfg, level)?;
        let efficiency = solution.report.sum_rate / (level + cfg.circuit_power);
        outcomes.push(PowerLevelOutcome {
            budget: level,
            sum_rate: solution.report.sum_rate,
            efficiency,
        });
        let improves = match &best {
            None => true,
            Some((i, _)) => efficiency > outcomes[*i].efficiency,
        };
        if improves {
            best = Some((outcomes.len() - 1, solution));
        }
    }
    let (index, mut solution) = best.expect("grid is nonempty");
    solution.report.objective = Objective::MaxEe;
    Ok(EeSolution {
        solution,
        chosen_level: outcomes[index].budget,
        chosen_efficiency: outcomes[index].efficiency,
        grid: outcomes,
    })
}
