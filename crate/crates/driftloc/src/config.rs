//! TOML configuration for localization runs and simulated scenarios.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use driftloc_core::geo::{GeodeticPoint, ReferenceOrigin};
use driftloc_core::ranging::RangingConfig;
use driftloc_core::solver::SolverConfig;
use driftloc_core::types::DeviceId;
use driftloc_core::uncertainty::CrlbConfig;

use crate::pipeline::{Mode, RunConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OriginFile {
    lat_deg: f64,
    lon_deg: f64,
    #[serde(default)]
    height_m: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangingFile {
    sound_speed_mps: f64,
    #[serde(default)]
    processing_delay_s: f64,
    #[serde(default = "default_match_window")]
    match_window_s: f64,
    #[serde(default = "default_slb_depth")]
    slb_depth_m: f64,
    #[serde(default = "default_max_range_rate")]
    max_range_rate_mps: f64,
}

fn default_match_window() -> f64 {
    1.5
}
fn default_slb_depth() -> f64 {
    3.0
}
fn default_max_range_rate() -> f64 {
    0.8
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SolverFile {
    step_tolerance_m: Option<f64>,
    cost_tolerance: Option<f64>,
    max_iterations: Option<u32>,
    initial_step_m: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct CrlbFile {
    noise_variance_m2: Option<f64>,
    condition_limit: Option<f64>,
    tau_cost_m2: Option<f64>,
    tau_crlb_m: Option<f64>,
}

/// On-disk form of a localization run configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunFile {
    origin: OriginFile,
    slb_ids: Vec<u16>,
    /// Devices to localize; empty selects per mode (floats with depth and
    /// dive/rise data for `tof`, non-SLB senders for `tdoa`, all SLBs for
    /// `eval-slb`).
    #[serde(default)]
    targets: Vec<u16>,
    #[serde(default = "default_grouping_window")]
    grouping_window_s: f64,
    #[serde(default = "default_extrapolation_limit")]
    extrapolation_limit_s: f64,
    #[serde(default = "default_slb_guess_lookback")]
    slb_guess_lookback_s: f64,
    ranging: RangingFile,
    #[serde(default)]
    solver: SolverFile,
    #[serde(default)]
    crlb: CrlbFile,
}

fn default_grouping_window() -> f64 {
    driftloc_core::grouping::DEFAULT_GROUP_WINDOW_S
}
fn default_extrapolation_limit() -> f64 {
    driftloc_core::track::DEFAULT_EXTRAPOLATION_LIMIT_S
}
fn default_slb_guess_lookback() -> f64 {
    60.0
}

/// Loads a run configuration, returning it with the given CLI-selected mode.
pub fn load_run_config(path: &Path, mode: Mode) -> Result<RunConfig, ConfigError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: name.clone(),
        source,
    })?;
    let file: RunFile = toml::from_str(&text).map_err(|e| ConfigError::Invalid {
        path: name.clone(),
        message: e.to_string(),
    })?;

    let invalid = |message: String| ConfigError::Invalid {
        path: name.clone(),
        message,
    };

    let origin = GeodeticPoint::new(
        file.origin.lat_deg,
        file.origin.lon_deg,
        file.origin.height_m,
    )
    .map_err(|e| invalid(format!("origin: {e}")))?;
    if file.slb_ids.is_empty() {
        return Err(invalid("slb_ids must not be empty".into()));
    }
    if file.ranging.sound_speed_mps <= 0.0 {
        return Err(invalid("ranging.sound_speed_mps must be positive".into()));
    }
    if file.ranging.match_window_s <= 0.0
        || file.ranging.max_range_rate_mps <= 0.0
        || file.ranging.processing_delay_s < 0.0
    {
        return Err(invalid("ranging parameters out of range".into()));
    }
    if file.grouping_window_s <= 0.0 {
        return Err(invalid("grouping_window_s must be positive".into()));
    }

    let mut ranging = RangingConfig::new(file.ranging.sound_speed_mps);
    ranging.processing_delay_s = file.ranging.processing_delay_s;
    ranging.match_window_s = file.ranging.match_window_s;
    ranging.slb_depth_m = file.ranging.slb_depth_m;
    ranging.max_range_rate_mps = file.ranging.max_range_rate_mps;

    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        step_tolerance_m: file
            .solver
            .step_tolerance_m
            .unwrap_or(defaults.step_tolerance_m),
        cost_tolerance: file
            .solver
            .cost_tolerance
            .unwrap_or(defaults.cost_tolerance),
        max_iterations: file
            .solver
            .max_iterations
            .unwrap_or(defaults.max_iterations),
        initial_step_m: file
            .solver
            .initial_step_m
            .unwrap_or(defaults.initial_step_m),
    };
    if solver.step_tolerance_m <= 0.0 || solver.cost_tolerance <= 0.0 || solver.max_iterations == 0
    {
        return Err(invalid("solver tolerances must be positive".into()));
    }

    let crlb_defaults = CrlbConfig::default();
    let crlb = CrlbConfig {
        noise_variance_m2: file
            .crlb
            .noise_variance_m2
            .unwrap_or(crlb_defaults.noise_variance_m2),
        condition_limit: file
            .crlb
            .condition_limit
            .unwrap_or(crlb_defaults.condition_limit),
        tau_cost_m2: file.crlb.tau_cost_m2.unwrap_or(crlb_defaults.tau_cost_m2),
        tau_crlb_m: file.crlb.tau_crlb_m.unwrap_or(crlb_defaults.tau_crlb_m),
    };
    if crlb.noise_variance_m2 <= 0.0 || crlb.condition_limit <= 0.0 {
        return Err(invalid("crlb parameters must be positive".into()));
    }

    Ok(RunConfig {
        mode,
        origin: ReferenceOrigin::new(origin),
        slb_ids: file
            .slb_ids
            .iter()
            .copied()
            .map(DeviceId)
            .collect::<BTreeSet<_>>(),
        targets: file.targets.iter().copied().map(DeviceId).collect(),
        grouping_window_s: file.grouping_window_s,
        extrapolation_limit_s: file.extrapolation_limit_s,
        slb_guess_lookback_s: file.slb_guess_lookback_s,
        ranging,
        solver,
        crlb,
    })
}

/// Scenario description for the synthetic-deployment simulator.
///
/// Every field has a default except the seed, so a minimal scenario file is
/// just `rng_seed = 7`. Probabilities are per reception; the multipath
/// fields describe pair-level episodes (see the sim module).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_slbs: u32,
    pub n_floats: u32,
    pub duration_s: f64,
    /// Base water current, [east, north] m/s.
    pub current_mps: [f64; 2],
    pub ping_interval_s: f64,
    pub range_noise_std_m: f64,
    /// Probability that a clear device pair enters a multipath episode at a
    /// reception (also the probability a pair starts the run in one).
    pub multipath_probability: f64,
    /// Extra acoustic delay during an episode, [min, max] seconds.
    pub multipath_extra_delay_s: [f64; 2],
    /// Episode duration range, [min, max] seconds.
    pub multipath_episode_s: [f64; 2],
    pub dropout_probability: f64,
    pub sound_speed_mps: f64,
    pub processing_delay_s: f64,
    pub rng_seed: u64,
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub start_time_utc: String,
    /// Devices are placed within this radius of the origin, meters.
    pub deployment_radius_m: f64,
    pub max_acoustic_range_m: f64,
    pub slb_depth_m: f64,
    /// Ornstein-Uhlenbeck per-device drift perturbation: stationary sigma
    /// (m/s) and correlation time (s).
    pub drift_sigma_mps: f64,
    pub drift_tau_s: f64,
    /// Float dive profile: staircase of depth levels, meters.
    pub float_depth_levels_m: Vec<f64>,
    pub dive_start_s: f64,
    pub rise_margin_s: f64,
    /// Vertical speed between depth levels, m/s.
    pub depth_rate_mps: f64,
    pub gps_fix_interval_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_slbs: 5,
            n_floats: 2,
            duration_s: 1800.0,
            current_mps: [0.0, -0.75],
            ping_interval_s: 10.0,
            range_noise_std_m: 0.0,
            multipath_probability: 0.0,
            multipath_extra_delay_s: [0.3, 0.8],
            multipath_episode_s: [60.0, 300.0],
            dropout_probability: 0.0,
            sound_speed_mps: 1480.0,
            processing_delay_s: 0.0,
            rng_seed: 0,
            origin_lat_deg: 47.45,
            origin_lon_deg: -122.38,
            start_time_utc: "2025-04-26T17:00:00.000000Z".to_string(),
            deployment_radius_m: 400.0,
            max_acoustic_range_m: 2000.0,
            slb_depth_m: 3.0,
            drift_sigma_mps: 0.05,
            drift_tau_s: 60.0,
            float_depth_levels_m: vec![10.0, 25.0, 40.0, 25.0, 10.0],
            dive_start_s: 30.0,
            rise_margin_s: 30.0,
            depth_rate_mps: 0.25,
            gps_fix_interval_s: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_slbs == 0 || self.duration_s <= 0.0 || self.ping_interval_s <= 0.0 {
            return Err("need at least one SLB, positive duration and ping interval".into());
        }
        // SLBs are numbered 1..=n_slbs and floats upward from 31.
        if self.n_slbs > 30 {
            return Err("n_slbs must be at most 30".into());
        }
        if self.n_floats > 1000 {
            return Err("n_floats must be at most 1000".into());
        }
        for (name, p) in [
            ("multipath_probability", self.multipath_probability),
            ("dropout_probability", self.dropout_probability),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1), got {p}"));
            }
        }
        if self.sound_speed_mps <= 0.0 {
            return Err("sound_speed_mps must be positive".into());
        }
        if self.range_noise_std_m < 0.0 || self.processing_delay_s < 0.0 {
            return Err("noise and delay must be non-negative".into());
        }
        if self.multipath_extra_delay_s[0] <= 0.0
            || self.multipath_extra_delay_s[1] < self.multipath_extra_delay_s[0]
        {
            return Err("multipath_extra_delay_s must be a positive [min, max] range".into());
        }
        if self.multipath_episode_s[0] <= 0.0
            || self.multipath_episode_s[1] < self.multipath_episode_s[0]
        {
            return Err("multipath_episode_s must be a positive [min, max] range".into());
        }
        if self.float_depth_levels_m.is_empty() {
            return Err("float_depth_levels_m must not be empty".into());
        }
        if self.dive_start_s + self.rise_margin_s >= self.duration_s {
            return Err("dive window does not fit in the scenario duration".into());
        }
        if self.gps_fix_interval_s <= 0.0 || self.depth_rate_mps <= 0.0 || self.drift_tau_s <= 0.0 {
            return Err("gps_fix_interval_s, depth_rate_mps, drift_tau_s must be positive".into());
        }
        GeodeticPoint::new(self.origin_lat_deg, self.origin_lon_deg, 0.0)
            .map_err(|e| format!("origin: {e}"))?;
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: name.clone(),
        source,
    })?;
    let scenario: ScenarioConfig = toml::from_str(&text).map_err(|e| ConfigError::Invalid {
        path: name.clone(),
        message: e.to_string(),
    })?;
    scenario
        .validate()
        .map_err(|message| ConfigError::Invalid {
            path: name,
            message,
        })?;
    Ok(scenario)
}
