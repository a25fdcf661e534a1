use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ofdma_agent::experiment::{self, SweepSpec, VerifySpec};
use ofdma_agent::{
    agent, apply_mask, channel, matrix_io, mean_impute, nncf_repair, rmse, scheduler, CsiInput,
    CsiSource, Error, MaskedChannelMatrix, Objective, RuleTable, ScenarioConfig,
};

mod repl;

#[derive(Parser)]
#[command(
    name = "ofdma-agent",
    version,
    about = "OFDMA allocation with channel repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a ground-truth channel matrix.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide a fraction of a matrix's entries.
    Mask {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        loss_rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill missing entries.
    Repair {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Nncf)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Solve one objective on a CSI file and write the allocation JSON.
    Allocate {
        #[arg(long)]
        csi: PathBuf,
        #[arg(long)]
        objective: Objective,
        #[arg(long)]
        eval_truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Recognize a request and run the full workflow.
    Ask {
        #[arg(long)]
        csi: PathBuf,
        #[arg(long)]
        query: String,
        /// Intent rule table; the shipped table when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Include wall-clock phase timings in the output.
        #[arg(long)]
        timings: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Sum rate versus power budget for each CSI variant.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// RMSE of NNCF against mean imputation over seeded scenarios.
    CompareRepair {
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Check the max-rate solver against exhaustive search.
    Verify {
        #[arg(long, default_value_t = 3)]
        max_k: usize,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Interactive request loop.
    Repl {
        /// CSI file; a masked synthetic channel is drawn when omitted.
        #[arg(long)]
        csi: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Nncf,
    Mean,
}

/// `--config` plus one override flag per config key.
#[derive(Args, Default, Clone)]
#[allow(non_snake_case)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "K", alias = "num-users")]
    K: Option<usize>,
    #[arg(long = "N", alias = "num-subcarriers")]
    N: Option<usize>,
    #[arg(long = "B", alias = "subcarrier-bandwidth")]
    B: Option<f64>,
    #[arg(long = "N0", alias = "noise-psd")]
    N0: Option<f64>,
    #[arg(long = "Pmax", alias = "max-power")]
    Pmax: Option<f64>,
    #[arg(long = "Rmin", alias = "min-rate")]
    Rmin: Option<f64>,
    #[arg(long = "Pc", alias = "circuit-power")]
    Pc: Option<f64>,
    #[arg(long = "loss_rate", alias = "loss-rate")]
    loss_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "num_taps", alias = "num-taps")]
    num_taps: Option<usize>,
    #[arg(long = "delay_decay", alias = "delay-decay")]
    delay_decay: Option<f64>,
    #[arg(long = "dist_min", alias = "dist-min")]
    dist_min: Option<f64>,
    #[arg(long = "dist_max", alias = "dist-max")]
    dist_max: Option<f64>,
    #[arg(long = "freq_weight", alias = "freq-weight")]
    freq_weight: Option<f64>,
    #[arg(long = "space_weight", alias = "space-weight")]
    space_weight: Option<f64>,
    #[arg(long = "spatial_normalization", alias = "spatial-normalization")]
    spatial_normalization: Option<bool>,
    #[arg(long = "L", alias = "num-power-levels")]
    L: Option<usize>,
    #[arg(long = "repair_max_iters", alias = "repair-max-iters")]
    repair_max_iters: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ScenarioConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        apply!(
            K => num_users,
            N => num_subcarriers,
            B => subcarrier_bandwidth,
            N0 => noise_psd,
            Pmax => max_power,
            Rmin => min_rate,
            Pc => circuit_power,
            loss_rate => loss_rate,
            seed => seed,
            num_taps => num_taps,
            delay_decay => delay_decay,
            dist_min => dist_min,
            dist_max => dist_max,
            freq_weight => freq_weight,
            space_weight => space_weight,
            spatial_normalization => spatial_normalization,
            L => num_power_levels,
        );
        if self.repair_max_iters.is_some() {
            cfg.repair_max_iters = self.repair_max_iters;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_masked(path: &Path) -> Result<(MaskedChannelMatrix, Option<u64>)> {
    matrix_io::read_masked(path).with_context(|| format!("reading {}", path.display()))
}

fn read_truth(path: &Path) -> Result<ofdma_agent::ChannelMatrix> {
    Ok(matrix_io::read_channel(path)
        .with_context(|| format!("reading {}", path.display()))?
        .0)
}

/// Without a config file or explicit `--K`/`--N`, the matrix on disk
/// defines the shape; otherwise the two must agree.
fn fit_shape(
    args: &ConfigArgs,
    mut cfg: ScenarioConfig,
    shape: (usize, usize),
) -> Result<ScenarioConfig> {
    if args.config.is_none() && args.K.is_none() && args.N.is_none() {
        cfg.num_users = shape.0;
        cfg.num_subcarriers = shape.1;
        cfg.validate()?;
    } else if (cfg.num_users, cfg.num_subcarriers) != shape {
        return Err(Error::ShapeMismatch {
            expected: (cfg.num_users, cfg.num_subcarriers),
            actual: shape,
        }
        .into());
    }
    Ok(cfg)
}

fn load_rules(path: Option<&Path>) -> Result<RuleTable> {
    match path {
        Some(p) => RuleTable::load(p).with_context(|| format!("loading rules {}", p.display())),
        None => Ok(RuleTable::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = config.resolve()?;
            let g = channel::generate_channel(&cfg)?;
            write_text(&out, &matrix_io::format_channel(&g, Some(cfg.seed)))
        }
        Command::Mask {
            input,
            loss_rate,
            seed,
            out,
        } => {
            let truth = read_truth(&input)?;
            let masked = apply_mask(&truth, loss_rate, seed)?;
            write_text(&out, &matrix_io::format_masked(&masked, Some(seed)))
        }
        Command::Repair {
            input,
            truth,
            method,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let (raw, seed) = read_masked(&input)?;
            let cfg = fit_shape(&config, cfg, raw.shape())?;
            let missing = raw.missing_indices();
            let (repaired, iterations, fallback) = match method {
                Method::Nncf => {
                    let r = nncf_repair(&raw, cfg.neighbor_weights(), cfg.repair_iters())?;
                    (r.repaired, Some(r.iterations_used), Some(r.fallback_count))
                }
                Method::Mean => (mean_impute(&raw), None, None),
            };
            write_text(&out, &matrix_io::format_channel(&repaired, seed))?;
            if let Some(truth) = truth {
                let truth = read_truth(&truth)?;
                let rmse_missing = if missing.is_empty() {
                    None
                } else {
                    Some(rmse(&truth, &repaired, &missing)?)
                };
                let summary = serde_json::json!({
                    "method": match method { Method::Nncf => "nncf", Method::Mean => "mean" },
                    "rmse_missing": rmse_missing,
                    "fallback_count": fallback,
                    "iterations_used": iterations,
                });
                println!("{}", serde_json::to_string(&summary)?);
            }
            Ok(())
        }
        Command::Allocate {
            csi,
            objective,
            eval_truth,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let (raw, _) = read_masked(&csi)?;
            let cfg = fit_shape(&config, cfg, raw.shape())?;
            let (matrix, source) = match raw.to_complete() {
                Some(m) => (m, CsiSource::Perfect),
                None => (
                    nncf_repair(&raw, cfg.neighbor_weights(), cfg.repair_iters())?.repaired,
                    CsiSource::Nncf,
                ),
            };
            let mut value = match objective {
                Objective::MaxRate => allocation_json(
                    scheduler::solve_max_rate(&matrix, &cfg, cfg.max_power)?,
                    source,
                    &eval_truth,
                    &cfg,
                )?,
                Objective::MinPower => allocation_json(
                    scheduler::solve_min_power(&matrix, &cfg)?,
                    source,
                    &eval_truth,
                    &cfg,
                )?,
                Objective::MaxEe => {
                    let ee = scheduler::solve_max_ee(&matrix, &cfg)?;
                    let mut v = allocation_json(ee.solution, source, &eval_truth, &cfg)?;
                    v["chosen_power_level"] = serde_json::json!(ee.chosen_level);
                    v
                }
            };
            if eval_truth.is_some() {
                value["evaluated_on"] = serde_json::json!("truth");
            }
            write_json(&out, &value)
        }
        Command::Ask {
            csi,
            query,
            rules,
            timings,
            config,
        } => {
            let cfg = config.resolve()?;
            let rules = load_rules(rules.as_deref())?;
            let (raw, _) = read_masked(&csi)?;
            let cfg = fit_shape(&config, cfg, raw.shape())?;
            let intent = rules.parse_intent(&query)?;
            let result = agent::run_workflow(&CsiInput::Masked(raw), &intent, &cfg)?;
            print_json(&result.to_json_value(timings))
        }
        Command::Sweep { spec, out } => {
            let spec = SweepSpec::load(&spec)
                .with_context(|| format!("loading sweep spec {}", spec.display()))?;
            let output = experiment::run_sweep(&spec)?;
            write_text(&out, &output.to_csv())?;
            print_json(&output.summary_json())
        }
        Command::CompareRepair { seeds, out, config } => {
            let cfg = config.resolve()?;
            let result = experiment::run_repair_compare(&cfg, seeds)?;
            write_text(&out, &result.to_csv())?;
            write_text(&trace_path(&out), &result.trace_csv())?;
            print_json(&result.summary_json())
        }
        Command::Verify {
            max_k,
            max_n,
            instances,
            seed,
        } => {
            let report = experiment::run_verify(&VerifySpec {
                max_users: max_k,
                max_subcarriers: max_n,
                instances,
                seed,
            })?;
            print_json(&serde_json::to_value(&report)?)?;
            if report.failures > 0 {
                anyhow::bail!(
                    "{} of {} instances disagree with the oracle",
                    report.failures,
                    report.instances
                );
            }
            Ok(())
        }
        Command::Repl { csi, rules, config } => {
            let cfg = config.resolve()?;
            let rules = load_rules(rules.as_deref())?;
            repl::run(cfg, rules, csi)
        }
    }
}

fn allocation_json(
    solution: ofdma_agent::Solution,
    source: CsiSource,
    eval_truth: &Option<PathBuf>,
    cfg: &ScenarioConfig,
) -> Result<serde_json::Value> {
    let mut solution = solution.with_csi_source(source);
    if let Some(path) = eval_truth {
        let truth = read_truth(path)?;
        solution.report = scheduler::evaluate_allocation(
            &solution.allocation,
            &truth,
            cfg,
            solution.report.objective,
            source,
        )?;
    }
    Ok(solution.to_json_value())
}

/// `runs/cmp.csv` -> `runs/cmp_trace.csv`
fn trace_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("compare");
    out.with_file_name(format!("{stem}_trace.csv"))
}

pub(crate) fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 1;
    };
    match e.root() {
        Error::Config { .. }
        | Error::Parse { .. }
        | Error::ShapeMismatch { .. }
        | Error::Argument(_)
        | Error::Domain(_)
        | Error::Json(_) => 2,
        Error::Infeasible(_) | Error::TooLarge { .. } => 3,
        Error::NonConvergence { .. } => 4,
        Error::UnrecognizedIntent { .. } => 5,
        Error::Io(_) | Error::Workflow { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
