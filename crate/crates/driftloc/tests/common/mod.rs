//! Shared scenario and run-config builders for the integration suites.
// Each test target compiles its own copy, not every target uses every
// helper.
#![allow(dead_code)]

use driftloc::config::ScenarioConfig;
use driftloc::pipeline::{Mode, RunConfig};
use driftloc_core::geo::{GeodeticPoint, ReferenceOrigin};
use driftloc_core::ranging::RangingConfig;
use driftloc_core::solver::SolverConfig;
use driftloc_core::types::DeviceId;
use driftloc_core::uncertainty::CrlbConfig;

/// Devices at rest, no measurement noise: the pipeline should reproduce
/// truth to solver tolerance.
pub fn static_noise_free_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_slbs: 5,
        n_floats: 2,
        duration_s: 600.0,
        current_mps: [0.0, 0.0],
        drift_sigma_mps: 0.0,
        range_noise_std_m: 0.0,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

/// Drifting deployment with Gaussian range noise.
pub fn noisy_scenario(seed: u64, noise_std_m: f64) -> ScenarioConfig {
    ScenarioConfig {
        n_slbs: 5,
        n_floats: 1,
        duration_s: 900.0,
        current_mps: [0.1, -0.3],
        drift_sigma_mps: 0.05,
        range_noise_std_m: noise_std_m,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

pub fn run_config(mode: Mode, scenario: &ScenarioConfig, slbs: &[DeviceId]) -> RunConfig {
    RunConfig {
        mode,
        origin: ReferenceOrigin::new(
            GeodeticPoint::new(scenario.origin_lat_deg, scenario.origin_lon_deg, 0.0).unwrap(),
        ),
        slb_ids: slbs.iter().copied().collect(),
        targets: vec![],
        grouping_window_s: 5.0,
        extrapolation_limit_s: 10.0,
        slb_guess_lookback_s: 60.0,
        ranging: RangingConfig::new(scenario.sound_speed_mps),
        solver: SolverConfig::default(),
        crlb: CrlbConfig::default(),
    }
}
