//! Intent-driven OFDMA resource allocation under incomplete channel state.
//!
//! The pipeline has four stages:
//!
//! 1. [`channel`] draws a frequency-selective downlink channel and masks
//!    part of it to simulate lost channel reports.
//! 2. [`repair`] fills the gaps with a neighbor-weighted average
//!    ([`repair::nncf_repair`]), with per-user mean imputation as a baseline.
//! 3. [`scheduler`] solves one of three objectives on the complete matrix:
//!    maximum sum rate, minimum power subject to a per-user rate, or
//!    maximum energy efficiency.
//! 4. [`agent`] maps a free-text request onto an objective and runs
//!    repair and scheduling as one workflow.
//!
//! [`oracle`] holds exhaustive reference solvers for small instances and
//! [`experiment`] the seeded sweeps used to compare the CSI variants.
//!
//! ```
//! use ofdma_agent::{agent, channel, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::default();
//! let truth = channel::generate_channel(&cfg).unwrap();
//! let observed = channel::apply_mask(&truth, cfg.loss_rate, cfg.seed).unwrap();
//!
//! let intent = agent::parse_intent("Higher speed for video streaming").unwrap();
//! let result = agent::run_workflow(&observed.into(), &intent, &cfg).unwrap();
//! assert!(result.solution.report.total_power <= cfg.max_power * (1.0 + 1e-9));
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod matrix_io;
pub mod oracle;
pub mod repair;
pub mod scheduler;

pub use agent::{parse_intent, run_workflow, CsiInput, Intent, RuleTable, WorkflowResult};
pub use channel::{apply_mask, generate_channel, ChannelMatrix, Index, MaskedChannelMatrix};
pub use config::ScenarioConfig;
pub use error::{Error, Phase, Result};
pub use repair::{mean_impute, nncf_repair, rmse, NeighborWeights, RepairResult, SpatialScaling};
pub use scheduler::{Allocation, AllocationReport, CsiSource, Objective, Solution};
