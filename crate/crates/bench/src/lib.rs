//! Fixtures shared by the criterion benches.

use ofdma_agent::{
    apply_mask, generate_channel, ChannelMatrix, MaskedChannelMatrix, ScenarioConfig,
};

/// Default scenario resized to `users x subcarriers`, its channel, and a
/// masked copy at the configured loss rate.
pub fn scenario(
    users: usize,
    subcarriers: usize,
) -> (ScenarioConfig, ChannelMatrix, MaskedChannelMatrix) {
    let cfg = ScenarioConfig {
        num_users: users,
        num_subcarriers: subcarriers,
        ..ScenarioConfig::default()
    };
    let truth = generate_channel(&cfg).expect("default scenario is valid");
    let masked = apply_mask(&truth, cfg.loss_rate, cfg.seed).expect("loss rate is valid");
    (cfg, truth, masked)
}
