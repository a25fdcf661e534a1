//! Channel matrices and the synthetic downlink channel generator.
//!
//! Gains are linear power ratios `g[k][n]` for user `k` on subcarrier `n`.
//! Ground truth comes from a tapped-delay-line Rayleigh model scaled by a
//! distance-based path loss; observation loss is simulated by masking a
//! fixed number of entries.
//!
//! Randomness uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`). The
//! generator draws from stream 0 of the seed and the mask from stream 1, so
//! both may share one seed without correlating.

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

/// `(user, subcarrier)` pair.
pub type Index = (usize, usize);

const CHANNEL_STREAM: u64 = 0;
const MASK_STREAM: u64 = 1;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_gain(k: usize, n: usize, g: f64) -> Result<()> {
    if g.is_finite() && g > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "gain at ({k}, {n}) must be finite and positive, got {g}"
        )))
    }
}

/// Dense K x N grid of strictly positive channel gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    users: usize,
    subcarriers: usize,
    gains: Vec<f64>,
}

impl ChannelMatrix {
    /// Builds from row-major data, checking shape and positivity.
    pub fn new(users: usize, subcarriers: usize, gains: Vec<f64>) -> Result<Self> {
        if users == 0 || subcarriers == 0 || gains.len() != users * subcarriers {
            return Err(Error::ShapeMismatch {
                expected: (users, subcarriers),
                actual: (gains.len() / subcarriers.max(1), subcarriers),
            });
        }
        for (i, &g) in gains.iter().enumerate() {
            check_gain(i / subcarriers, i % subcarriers, g)?;
        }
        Ok(Self {
            users,
            subcarriers,
            gains,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let users = rows.len();
        let subcarriers = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != subcarriers) {
            return Err(Error::ShapeMismatch {
                expected: (users, subcarriers),
                actual: (users, bad.len()),
            });
        }
        Self::new(users, subcarriers, rows.concat())
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.users, self.subcarriers)
    }

    #[inline]
    pub fn get(&self, user: usize, subcarrier: usize) -> f64 {
        self.gains[user * self.subcarriers + subcarrier]
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.gains[user * self.subcarriers..(user + 1) * self.subcarriers]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gains
            .chunks(self.subcarriers)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Multiplies every gain by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.users,
            self.subcarriers,
            self.gains.iter().map(|g| g * factor).collect(),
        )
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() == shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: shape,
                actual: self.shape(),
            })
        }
    }
}

/// Channel matrix with unobserved entries.
///
/// A cell holds `Some(gain)` exactly when its index belongs to the
/// observation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedChannelMatrix {
    users: usize,
    subcarriers: usize,
    cells: Vec<Option<f64>>,
}

impl MaskedChannelMatrix {
    pub fn new(users: usize, subcarriers: usize, cells: Vec<Option<f64>>) -> Result<Self> {
        if users == 0 || subcarriers == 0 || cells.len() != users * subcarriers {
            return Err(Error::ShapeMismatch {
                expected: (users, subcarriers),
                actual: (cells.len() / subcarriers.max(1), subcarriers),
            });
        }
        for (i, c) in cells.iter().enumerate() {
            if let Some(g) = *c {
                check_gain(i / subcarriers, i % subcarriers, g)?;
            }
        }
        Ok(Self {
            users,
            subcarriers,
            cells,
        })
    }

    /// Rows where `NaN` marks a missing entry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let users = rows.len();
        let subcarriers = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != subcarriers) {
            return Err(Error::ShapeMismatch {
                expected: (users, subcarriers),
                actual: (users, bad.len()),
            });
        }
        let cells = rows
            .iter()
            .flatten()
            .map(|&g| if g.is_nan() { None } else { Some(g) })
            .collect();
        Self::new(users, subcarriers, cells)
    }

    pub fn fully_observed(channel: &ChannelMatrix) -> Self {
        Self {
            users: channel.users,
            subcarriers: channel.subcarriers,
            cells: channel.gains.iter().copied().map(Some).collect(),
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.users, self.subcarriers)
    }

    #[inline]
    pub fn get(&self, user: usize, subcarrier: usize) -> Option<f64> {
        self.cells[user * self.subcarriers + subcarrier]
    }

    pub fn is_observed(&self, user: usize, subcarrier: usize) -> bool {
        self.get(user, subcarrier).is_some()
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    /// The observation set, in row-major order.
    pub fn observed_indices(&self) -> Vec<Index> {
        self.indices_where(true)
    }

    pub fn missing_indices(&self) -> Vec<Index> {
        self.indices_where(false)
    }

    fn indices_where(&self, observed: bool) -> Vec<Index> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some() == observed)
            .map(|(i, _)| (i / self.subcarriers, i % self.subcarriers))
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn observed_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().filter_map(|c| *c)
    }

    /// Mean of all observed gains, or `None` when nothing is observed.
    pub fn observed_mean(&self) -> Option<f64> {
        mean(self.observed_values())
    }

    pub fn row_observed_mean(&self, user: usize) -> Option<f64> {
        mean(
            self.cells[user * self.subcarriers..(user + 1) * self.subcarriers]
                .iter()
                .filter_map(|c| *c),
        )
    }

    /// Converts to a complete matrix if no entry is missing.
    pub fn to_complete(&self) -> Option<ChannelMatrix> {
        let gains: Option<Vec<f64>> = self.cells.iter().copied().collect();
        gains.map(|gains| ChannelMatrix {
            users: self.users,
            subcarriers: self.subcarriers,
            gains,
        })
    }

    /// Rows with `NaN` in place of missing entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.cells
            .chunks(self.subcarriers)
            .map(|r| r.iter().map(|c| c.unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Linear path-loss factor for a link of `distance_m` meters, from
/// `PL(dB) = 128.1 + 37.6 log10(d / 1 km)`.
pub fn path_loss(distance_m: f64) -> f64 {
    let db = 128.1 + 37.6 * (distance_m / 1000.0).log10();
    10f64.powf(-db / 10.0)
}

/// Normalized mean tap powers `exp(-l / decay)` for `l = 0..taps`.
pub fn tap_profile(taps: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..taps).map(|l| (-(l as f64) / decay).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draws a ground-truth channel for `cfg`.
///
/// User distances are drawn uniformly in `[dist_min, dist_max]` and then
/// sorted, so user index increases with distance and adjacent rows are
/// spatial neighbors.
pub fn generate_channel(cfg: &ScenarioConfig) -> Result<ChannelMatrix> {
    cfg.validate()?;
    let (users, subcarriers) = (cfg.num_users, cfg.num_subcarriers);
    let mut rng = stream_rng(cfg.seed, CHANNEL_STREAM);

    let mut distances: Vec<f64> = (0..users)
        .map(|_| {
            if cfg.dist_max > cfg.dist_min {
                rng.random_range(cfg.dist_min..=cfg.dist_max)
            } else {
                cfg.dist_min
            }
        })
        .collect();
    distances.sort_by(f64::total_cmp);

    let profile = tap_profile(cfg.num_taps, cfg.delay_decay);
    // Phase rotation exp(-i 2 pi n l / N), shared by all users.
    let rotation: Vec<Complex64> = (0..subcarriers * cfg.num_taps)
        .map(|i| {
            let (n, l) = (i / cfg.num_taps, i % cfg.num_taps);
            let angle = -2.0 * std::f64::consts::PI * (n * l) as f64 / subcarriers as f64;
            Complex64::from_polar(1.0, angle)
        })
        .collect();

    let mut gains = Vec::with_capacity(users * subcarriers);
    for &d in &distances {
        let loss = path_loss(d);
        let taps: Vec<Complex64> = profile
            .iter()
            .map(|&p| {
                let scale = (p / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * scale, im * scale)
            })
            .collect();
        for n in 0..subcarriers {
            let response: Complex64 = taps
                .iter()
                .zip(&rotation[n * cfg.num_taps..(n + 1) * cfg.num_taps])
                .map(|(h, r)| h * r)
                .sum();
            // An exact spectral null has probability zero; floor it so the
            // positivity invariant holds unconditionally.
            let fading = response.norm_sqr().max(f64::MIN_POSITIVE);
            gains.push(loss * fading);
        }
    }
    ChannelMatrix::new(users, subcarriers, gains)
}

/// Hides exactly `round(loss_rate * K * N)` entries chosen uniformly at random.
pub fn apply_mask(
    channel: &ChannelMatrix,
    loss_rate: f64,
    seed: u64,
) -> Result<MaskedChannelMatrix> {
    if !(0.0..=1.0).contains(&loss_rate) {
        return Err(Error::config("loss_rate", "must lie in [0, 1]"));
    }
    let total = channel.users * channel.subcarriers;
    let hidden = ((loss_rate * total as f64).round() as usize).min(total);
    let mut rng = stream_rng(seed, MASK_STREAM);
    let mut cells: Vec<Option<f64>> = channel.gains.iter().copied().map(Some).collect();
    for i in index::sample(&mut rng, total, hidden) {
        cells[i] = None;
    }
    Ok(MaskedChannelMatrix {
        users: channel.users,
        subcarriers: channel.subcarriers,
        cells,
    })
}
