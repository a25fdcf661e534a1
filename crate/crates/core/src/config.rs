//! Scenario configuration.
//!
//! The on-disk form is a flat JSON object. Keys use the short physical
//! symbols (`K`, `N`, `B`, `N0`, `Pmax`, `Rmin`, `Pc`, `L`); every key is
//! optional and falls back to the default downlink scenario (8 users,
//! 20 subcarriers of 180 kHz, 20 W budget, 5 W circuit power). Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repair::{NeighborWeights, SpatialScaling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "K", alias = "num_users")]
    pub num_users: usize,
    #[serde(rename = "N", alias = "num_subcarriers")]
    pub num_subcarriers: usize,
    /// Per-subcarrier bandwidth in Hz.
    #[serde(rename = "B", alias = "subcarrier_bandwidth")]
    pub subcarrier_bandwidth: f64,
    /// Noise power spectral density in W/Hz.
    #[serde(rename = "N0", alias = "noise_psd")]
    pub noise_psd: f64,
    #[serde(rename = "Pmax", alias = "max_power")]
    pub max_power: f64,
    /// Per-user minimum rate in bit/s.
    #[serde(rename = "Rmin", alias = "min_rate")]
    pub min_rate: f64,
    #[serde(rename = "Pc", alias = "circuit_power")]
    pub circuit_power: f64,
    pub loss_rate: f64,
    pub seed: u64,
    pub num_taps: usize,
    pub delay_decay: f64,
    pub dist_min: f64,
    pub dist_max: f64,
    pub freq_weight: f64,
    pub space_weight: f64,
    /// Rescale spatial neighbors to the target user's mean gain before averaging.
    pub spatial_normalization: bool,
    #[serde(rename = "L", alias = "num_power_levels")]
    pub num_power_levels: usize,
    /// `None` means `K + N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repair_max_iters: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 8,
            num_subcarriers: 20,
            subcarrier_bandwidth: 180e3,
            noise_psd: 1e-17,
            max_power: 20.0,
            min_rate: 2e6,
            circuit_power: 5.0,
            loss_rate: 0.2,
            seed: 42,
            num_taps: 4,
            delay_decay: 1.0,
            dist_min: 100.0,
            dist_max: 500.0,
            freq_weight: 2.0,
            space_weight: 1.0,
            spatial_normalization: true,
            num_power_levels: 100,
            repair_max_iters: None,
        }
    }
}

impl ScenarioConfig {
    /// Checks every field invariant, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &str, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(field, msg))
            }
        }
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;

        check(self.num_users >= 1, "K", "must be at least 1")?;
        check(self.num_subcarriers >= 1, "N", "must be at least 1")?;
        check(
            finite_pos(self.subcarrier_bandwidth),
            "B",
            "must be positive",
        )?;
        check(finite_pos(self.noise_psd), "N0", "must be positive")?;
        check(finite_pos(self.max_power), "Pmax", "must be positive")?;
        check(
            self.min_rate.is_finite() && self.min_rate >= 0.0,
            "Rmin",
            "must be nonnegative",
        )?;
        check(
            self.circuit_power.is_finite() && self.circuit_power >= 0.0,
            "Pc",
            "must be nonnegative",
        )?;
        check(
            (0.0..=1.0).contains(&self.loss_rate),
            "loss_rate",
            "must lie in [0, 1]",
        )?;
        check(self.num_taps >= 1, "num_taps", "must be at least 1")?;
        check(
            finite_pos(self.delay_decay),
            "delay_decay",
            "must be positive",
        )?;
        check(finite_pos(self.dist_min), "dist_min", "must be positive")?;
        check(
            self.dist_max.is_finite() && self.dist_max >= self.dist_min,
            "dist_max",
            "must be finite and not below dist_min",
        )?;
        check(
            finite_pos(self.freq_weight),
            "freq_weight",
            "must be positive",
        )?;
        check(
            finite_pos(self.space_weight),
            "space_weight",
            "must be positive",
        )?;
        check(
            self.freq_weight >= self.space_weight,
            "freq_weight",
            "must not be below space_weight",
        )?;
        check(self.num_power_levels >= 1, "L", "must be at least 1")?;
        if let Some(iters) = self.repair_max_iters {
            check(iters >= 1, "repair_max_iters", "must be at least 1")?;
        }
        Ok(())
    }

    /// Total system bandwidth `N * B`.
    pub fn total_bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_bandwidth
    }

    /// Noise power over one subcarrier, `N0 * B`.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.subcarrier_bandwidth
    }

    pub fn repair_iters(&self) -> usize {
        self.repair_max_iters
            .unwrap_or(self.num_users + self.num_subcarriers)
    }

    pub fn neighbor_weights(&self) -> NeighborWeights {
        NeighborWeights {
            freq_weight: self.freq_weight,
            space_weight: self.space_weight,
            scaling: if self.spatial_normalization {
                SpatialScaling::RowMean
            } else {
                SpatialScaling::None
            },
        }
    }

    /// Parses and validates a JSON config document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config { field, message } => {
                let line = key_line(text, &field);
                Error::Config {
                    message: match line {
                        Some(l) => format!("{message} (line {l})"),
                        None => message,
                    },
                    field,
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        // Serializing plain numbers and strings cannot fail.
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ScenarioConfig::from_json_str("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.num_users, 8);
        assert_eq!(cfg.num_subcarriers, 20);
        assert_eq!(cfg.subcarrier_bandwidth, 180e3);
        assert_eq!(cfg.noise_psd, 1e-17);
        assert_eq!(cfg.max_power, 20.0);
        assert_eq!(cfg.circuit_power, 5.0);
        assert_eq!(cfg.loss_rate, 0.2);
        assert_eq!(cfg.num_power_levels, 100);
        assert_eq!(cfg.repair_iters(), 28);
    }

    #[test]
    fn zero_users_names_k() {
        let err = ScenarioConfig::from_json_str("{\"K\": 0}").unwrap_err();
        match err {
            Error::Config { field, message } => {
                assert_eq!(field, "K");
                assert!(message.contains("line 1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::from_json_str("{\n  \"K\": 4,\n  \"bogus\": 1\n}").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn long_names_accepted() {
        let cfg = ScenarioConfig::from_json_str("{\"num_users\": 3, \"max_power\": 7.5}").unwrap();
        assert_eq!(cfg.num_users, 3);
        assert_eq!(cfg.max_power, 7.5);
    }

    #[test]
    fn save_load_round_trip() {
        let cfg = ScenarioConfig {
            num_users: 5,
            noise_psd: 3.3e-17,
            repair_max_iters: Some(9),
            seed: u64::MAX,
            ..Default::default()
        };
        let back = ScenarioConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invariant_violations() {
        let bad = [
            ("{\"loss_rate\": 1.5}", "loss_rate"),
            ("{\"dist_min\": 600}", "dist_max"),
            ("{\"freq_weight\": 0.5}", "freq_weight"),
            ("{\"L\": 0}", "L"),
            ("{\"Pc\": -1}", "Pc"),
            ("{\"N0\": 0}", "N0"),
        ];
        for (text, key) in bad {
            match ScenarioConfig::from_json_str(text) {
                Err(Error::Config { field, .. }) => assert_eq!(field, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
