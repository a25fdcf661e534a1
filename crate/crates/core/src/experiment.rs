//! Seeded experiment drivers and their CSV/JSON outputs.
//!
//! All drivers are deterministic: seed `i` of a run uses
//! `base_config.seed + i` for both channel generation and masking, and rows
//! are emitted in a fixed order.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_mask, generate_channel, stream_rng, ChannelMatrix};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::matrix_io::format_value;
use crate::oracle::{brute_force_p1, brute_force_p2};
use crate::repair::{mean_impute, nncf_repair, rmse};
use crate::scheduler::{
    evaluate_allocation, solve_max_rate, solve_min_power, CsiSource, Objective,
};

const VERIFY_STREAM: u64 = 2;

/// Median of a slice; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

fn seeded(base: &ScenarioConfig, offset: usize) -> ScenarioConfig {
    ScenarioConfig {
        seed: base.seed.wrapping_add(offset as u64),
        ..base.clone()
    }
}

fn opt_value(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Sum-rate sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub pmax_values: Vec<f64>,
    pub loss_rate: f64,
    pub num_seeds: usize,
    pub csi_variants: Vec<CsiSource>,
    pub base_config: ScenarioConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            pmax_values: (1..=10).map(|i| 2.0 * i as f64).collect(),
            loss_rate: 0.3,
            num_seeds: 100,
            csi_variants: CsiSource::ALL.to_vec(),
            base_config: ScenarioConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base_config.validate()?;
        if self.pmax_values.is_empty() {
            return Err(Error::config("pmax_values", "must not be empty"));
        }
        if !self.pmax_values.iter().all(|p| p.is_finite() && *p > 0.0)
            || !self.pmax_values.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::config(
                "pmax_values",
                "must be positive and strictly increasing",
            ));
        }
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return Err(Error::config("loss_rate", "must lie in [0, 1]"));
        }
        if self.num_seeds == 0 {
            return Err(Error::config("num_seeds", "must be at least 1"));
        }
        if self.csi_variants.is_empty() {
            return Err(Error::config("csi_variants", "must not be empty"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pmax: f64,
    pub csi_variant: CsiSource,
    pub seed: u64,
    pub sum_rate_on_truth: f64,
    /// RMSE on the masked entries; `None` for perfect CSI or no masking.
    pub rmse_missing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMedian {
    pub pmax: f64,
    pub csi_variant: CsiSource,
    pub median_sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub medians: Vec<SweepMedian>,
}

pub const SWEEP_CSV_HEADER: &str = "pmax,csi_variant,seed,sum_rate_on_truth,rmse_missing";

impl SweepOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                format_value(r.pmax),
                r.csi_variant,
                r.seed,
                format_value(r.sum_rate_on_truth),
                opt_value(r.rmse_missing),
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "rows": self.rows.len(), "medians": self.medians })
    }

    pub fn median(&self, pmax: f64, variant: CsiSource) -> Option<f64> {
        self.medians
            .iter()
            .find(|m| m.pmax == pmax && m.csi_variant == variant)
            .map(|m| m.median_sum_rate)
    }
}

/// Sum rate on the true channel of max-rate allocations decided on each
/// CSI variant, for every `(pmax, variant, seed)`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut variants = spec.csi_variants.clone();
    variants.sort();
    variants.dedup();

    let mut rows = Vec::with_capacity(spec.num_seeds * spec.pmax_values.len() * variants.len());
    for i in 0..spec.num_seeds {
        let cfg = seeded(&spec.base_config, i);
        let truth = generate_channel(&cfg)?;
        let masked = apply_mask(&truth, spec.loss_rate, cfg.seed)?;
        let missing = masked.missing_indices();
        let estimates: Vec<(CsiSource, ChannelMatrix)> = variants
            .iter()
            .map(|&v| {
                let m = match v {
                    CsiSource::Perfect => truth.clone(),
                    CsiSource::Nncf => {
                        nncf_repair(&masked, cfg.neighbor_weights(), cfg.repair_iters())?.repaired
                    }
                    CsiSource::MeanImputed => mean_impute(&masked),
                };
                Ok((v, m))
            })
            .collect::<Result<_>>()?;

        for &pmax in &spec.pmax_values {
            let cell_cfg = ScenarioConfig {
                max_power: pmax,
                ..cfg.clone()
            };
            for (variant, estimate) in &estimates {
                let context = |e: Error| {
                    Error::Argument(format!(
                        "sweep cell (pmax={pmax}, variant={variant}, seed={}) failed: {e}",
                        cfg.seed
                    ))
                };
                let solution = solve_max_rate(estimate, &cell_cfg, pmax).map_err(context)?;
                let report = evaluate_allocation(
                    &solution.allocation,
                    &truth,
                    &cell_cfg,
                    Objective::MaxRate,
                    *variant,
                )
                .map_err(context)?;
                let rmse_missing = match variant {
                    CsiSource::Perfect => None,
                    _ if missing.is_empty() => None,
                    _ => Some(rmse(&truth, estimate, &missing)?),
                };
                rows.push(SweepRow {
                    pmax,
                    csi_variant: *variant,
                    seed: cfg.seed,
                    sum_rate_on_truth: report.sum_rate,
                    rmse_missing,
                });
            }
        }
    }

    let order = |p: f64| spec.pmax_values.iter().position(|&x| x == p).unwrap_or(0);
    rows.sort_by(|a, b| {
        order(a.pmax)
            .cmp(&order(b.pmax))
            .then(a.csi_variant.cmp(&b.csi_variant))
            .then(a.seed.cmp(&b.seed))
    });

    let mut medians = Vec::new();
    for &pmax in &spec.pmax_values {
        for &variant in &variants {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.pmax == pmax && r.csi_variant == variant)
                .map(|r| r.sum_rate_on_truth)
                .collect();
            medians.push(SweepMedian {
                pmax,
                csi_variant: variant,
                median_sum_rate: median(&values).expect("at least one seed"),
            });
        }
    }
    Ok(SweepOutput { rows, medians })
}

// ---------------------------------------------------------------------------
// Repair comparison

#[derive(Debug, Clone, PartialEq)]
pub struct RepairCompareRow {
    pub seed: u64,
    pub missing: usize,
    pub rmse_nncf: Option<f64>,
    pub rmse_mean: Option<f64>,
    /// `1 - rmse_nncf / rmse_mean`; `None` when undefined.
    pub reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub subcarrier: usize,
    pub truth: f64,
    pub nncf: f64,
    pub mean: f64,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairCompare {
    pub rows: Vec<RepairCompareRow>,
    pub median_reduction: Option<f64>,
    pub median_rmse_nncf: Option<f64>,
    pub median_rmse_mean: Option<f64>,
    /// Seeds where NNCF had strictly lower RMSE.
    pub nncf_wins: usize,
    pub no_missing_entries: bool,
    pub trace_seed: u64,
    pub trace_user: usize,
    pub trace: Vec<TraceRow>,
}

pub const REPAIR_CSV_HEADER: &str = "seed,missing,rmse_nncf,rmse_mean,reduction";
pub const TRACE_CSV_HEADER: &str = "subcarrier,truth,nncf,mean,observed";

impl RepairCompare {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPAIR_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.seed,
                r.missing,
                opt_value(r.rmse_nncf),
                opt_value(r.rmse_mean),
                opt_value(r.reduction),
            ));
        }
        out
    }

    /// Per-subcarrier gains of one user, for plotting.
    pub fn trace_csv(&self) -> String {
        let mut out = format!(
            "# seed={}, user={}\n{TRACE_CSV_HEADER}\n",
            self.trace_seed, self.trace_user
        );
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.subcarrier,
                format_value(t.truth),
                format_value(t.nncf),
                format_value(t.mean),
                u8::from(t.observed),
            ));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seeds": self.rows.len(),
            "median_reduction": self.median_reduction,
            "median_rmse_nncf": self.median_rmse_nncf,
            "median_rmse_mean": self.median_rmse_mean,
            "nncf_wins": self.nncf_wins,
            "no_missing_entries": self.no_missing_entries,
            "trace_seed": self.trace_seed,
            "trace_user": self.trace_user,
        })
    }
}

/// RMSE on masked entries for NNCF and mean imputation over `num_seeds`
/// seeded scenarios.
pub fn run_repair_compare(cfg: &ScenarioConfig, num_seeds: usize) -> Result<RepairCompare> {
    cfg.validate()?;
    if num_seeds == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(num_seeds);
    let mut trace = Vec::new();
    let mut trace_user = 0;
    for i in 0..num_seeds {
        let c = seeded(cfg, i);
        let truth = generate_channel(&c)?;
        let masked = apply_mask(&truth, c.loss_rate, c.seed)?;
        let missing = masked.missing_indices();
        let repaired = nncf_repair(&masked, c.neighbor_weights(), c.repair_iters())?.repaired;
        let imputed = mean_impute(&masked);

        let (rmse_nncf, rmse_mean) = if missing.is_empty() {
            (None, None)
        } else {
            (
                Some(rmse(&truth, &repaired, &missing)?),
                Some(rmse(&truth, &imputed, &missing)?),
            )
        };
        let reduction = match (rmse_nncf, rmse_mean) {
            (Some(a), Some(b)) if b > 0.0 => Some(1.0 - a / b),
            _ => None,
        };
        rows.push(RepairCompareRow {
            seed: c.seed,
            missing: missing.len(),
            rmse_nncf,
            rmse_mean,
            reduction,
        });

        if i == 0 {
            // the user with the most missing entries shows the repair best
            let mut counts = vec![0usize; c.num_users];
            for &(k, _) in &missing {
                counts[k] += 1;
            }
            trace_user = (0..c.num_users)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .unwrap_or(0);
            trace = (0..c.num_subcarriers)
                .map(|n| TraceRow {
                    subcarrier: n,
                    truth: truth.get(trace_user, n),
                    nncf: repaired.get(trace_user, n),
                    mean: imputed.get(trace_user, n),
                    observed: masked.is_observed(trace_user, n),
                })
                .collect();
        }
    }

    let collect = |f: fn(&RepairCompareRow) -> Option<f64>| -> Vec<f64> {
        rows.iter().filter_map(f).collect()
    };
    let nncf_wins = rows
        .iter()
        .filter(|r| matches!((r.rmse_nncf, r.rmse_mean), (Some(a), Some(b)) if a < b))
        .count();
    Ok(RepairCompare {
        median_reduction: median(&collect(|r| r.reduction)),
        median_rmse_nncf: median(&collect(|r| r.rmse_nncf)),
        median_rmse_mean: median(&collect(|r| r.rmse_mean)),
        no_missing_entries: rows.iter().all(|r| r.missing == 0),
        nncf_wins,
        trace_seed: cfg.seed,
        trace_user,
        trace,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Oracle verification

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySpec {
    pub max_users: usize,
    pub max_subcarriers: usize,
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            max_users: 3,
            max_subcarriers: 4,
            instances: 100,
            seed: 0,
        }
    }
}

/// Relative tolerance for max-rate vs. oracle agreement.
pub const VERIFY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub max_rel_gap: f64,
    pub failures: usize,
    /// Instances with at least as many subcarriers as users.
    pub p2_instances: usize,
    /// Cases where the draft heuristic used less power than the oracle.
    pub p2_violations: usize,
    /// Median of heuristic power over oracle power.
    pub p2_median_ratio: Option<f64>,
}

/// One random small instance: shape, gains and a power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub cfg: ScenarioConfig,
    pub channel: ChannelMatrix,
    pub budget: f64,
}

/// Draws `spec.instances` small problems; gains are log-uniform over
/// `[1e-13, 1e-10]` and budgets uniform over `(0, Pmax]`.
pub fn random_instances(spec: &VerifySpec) -> Result<Vec<RandomInstance>> {
    if spec.max_users == 0 || spec.max_subcarriers == 0 {
        return Err(Error::config("max-k", "shape limits must be at least 1"));
    }
    let mut rng = stream_rng(spec.seed, VERIFY_STREAM);
    (0..spec.instances)
        .map(|_| {
            let users = rng.random_range(1..=spec.max_users);
            let subcarriers = rng.random_range(1..=spec.max_subcarriers);
            let gains = (0..users * subcarriers)
                .map(|_| 10f64.powf(rng.random_range(-13.0..-10.0)))
                .collect();
            let cfg = ScenarioConfig {
                num_users: users,
                num_subcarriers: subcarriers,
                ..ScenarioConfig::default()
            };
            let budget = cfg.max_power * (1.0 - rng.random::<f64>());
            Ok(RandomInstance {
                channel: ChannelMatrix::new(users, subcarriers, gains)?,
                cfg,
                budget,
            })
        })
        .collect()
}

/// Checks the max-rate solver against exhaustive search, and the min-power
/// heuristic against its oracle, on random small instances.
pub fn run_verify(spec: &VerifySpec) -> Result<VerifyReport> {
    let instances = random_instances(spec)?;
    let mut max_rel_gap: f64 = 0.0;
    let mut failures = 0;
    let mut ratios = Vec::new();
    let mut p2_violations = 0;
    for inst in &instances {
        let solved = solve_max_rate(&inst.channel, &inst.cfg, inst.budget)?;
        let oracle = brute_force_p1(&inst.channel, &inst.cfg, inst.budget)?;
        let gap = (oracle.best_value - solved.report.sum_rate).abs() / oracle.best_value;
        max_rel_gap = max_rel_gap.max(gap);
        if !(gap <= VERIFY_REL_TOL) {
            failures += 1;
        }

        if inst.cfg.num_subcarriers >= inst.cfg.num_users {
            let heuristic = solve_min_power(&inst.channel, &inst.cfg)?;
            let oracle = brute_force_p2(&inst.channel, &inst.cfg)?;
            let ratio = heuristic.report.total_power / oracle.best_value;
            if ratio < 1.0 - VERIFY_REL_TOL {
                p2_violations += 1;
            }
            ratios.push(ratio);
        }
    }
    Ok(VerifyReport {
        instances: instances.len(),
        max_rel_gap,
        failures,
        p2_instances: ratios.len(),
        p2_violations,
        p2_median_ratio: median(&ratios),
    })
}
