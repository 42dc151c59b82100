//! End-to-end localization runs: ingest → range → group → solve →
//! uncertainty → filter, plus the TDoA fallback for transmit-only targets
//! and the SLB-as-target evaluation mode.
//!
//! Every stage is a pure transformation; group solves run sequentially and
//! outputs are sorted, so identical inputs and configuration produce
//! identical results. Measurements never silently disappear: each one either
//! survives into a group or increments exactly one drop counter in the
//! diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use driftloc_core::geo::{self, NedPoint, ReferenceOrigin};
use driftloc_core::grouping::{self, window_groups, PingGroup};
use driftloc_core::ranging::{
    self, AcousticRange, DropReason, RangeDirection, RangeMeasurement, RangingConfig,
};
use driftloc_core::solver::{self, RangeAnchor, SolverConfig, SolverError, TdoaArrival};
use driftloc_core::track::{DepthSeries, GpsTrack};
use driftloc_core::types::{DeviceId, DeviceKind, DiveRiseFixes, PingDirection, PingRecord};
use driftloc_core::uncertainty::{
    apply_filter, crlb_sigmas, fisher_information, CrlbConfig, LocalizationMethod,
    PositionEstimate, RejectReason,
};

use crate::sim::{evaluate, ErrorStats, GroundTruth, SimOutput};

/// Localization mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Bidirectional time-of-flight trilateration of floats.
    Tof,
    /// Arrival-time-difference fallback for targets without usable logs.
    Tdoa,
    /// Treat an SLB as the target and score against its own GPS track.
    EvalSlb,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub origin: ReferenceOrigin,
    pub slb_ids: BTreeSet<DeviceId>,
    /// Devices to localize; empty auto-selects per mode.
    pub targets: Vec<DeviceId>,
    pub grouping_window_s: f64,
    pub extrapolation_limit_s: f64,
    /// How far before the group time the target SLB's own GPS is sampled
    /// for the initial guess in eval mode, to avoid seeding with the answer.
    pub slb_guess_lookback_s: f64,
    pub ranging: RangingConfig,
    pub solver: SolverConfig,
    pub crlb: CrlbConfig,
}

impl RunConfig {
    /// Role of a device under this run's roster.
    pub fn device_kind(&self, device: DeviceId) -> DeviceKind {
        if self.slb_ids.contains(&device) {
            DeviceKind::Slb
        } else {
            DeviceKind::Float
        }
    }
}

/// Parsed deployment data, immutable for the duration of a run.
#[derive(Debug, Default)]
pub struct DeploymentLogs {
    /// All ping records, time-sorted.
    pub pings: Vec<PingRecord>,
    pub gps: BTreeMap<DeviceId, GpsTrack>,
    pub depth: BTreeMap<DeviceId, DepthSeries>,
    pub dive_rise: BTreeMap<DeviceId, DiveRiseFixes>,
}

impl DeploymentLogs {
    /// Assembles logs straight from a simulated deployment (bypassing CSV).
    pub fn from_sim(sim: &SimOutput) -> Self {
        let mut gps_by_device: BTreeMap<DeviceId, Vec<_>> = BTreeMap::new();
        for fix in &sim.gps_fixes {
            gps_by_device.entry(fix.device).or_default().push(*fix);
        }
        let gps = gps_by_device
            .into_iter()
            .map(|(d, fixes)| (d, GpsTrack::new(d, fixes).expect("fixes present")))
            .collect();

        let mut depth_by_device: BTreeMap<DeviceId, Vec<_>> = BTreeMap::new();
        for s in &sim.depth_samples {
            depth_by_device.entry(s.device).or_default().push(*s);
        }
        let depth = depth_by_device
            .into_iter()
            .map(|(d, samples)| (d, DepthSeries::new(d, samples).expect("samples present")))
            .collect();

        DeploymentLogs {
            pings: sim.all_pings(),
            gps,
            depth,
            dive_rise: sim.dive_rise.iter().map(|dr| (dr.device, *dr)).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("target device {0} has no depth log")]
    MissingDepth(DeviceId),
    #[error("target device {0} has no dive/rise fixes")]
    MissingDiveRise(DeviceId),
    #[error("target device {0} has no GPS track")]
    MissingGps(DeviceId),
    #[error("device {0} is not listed as an SLB; eval-slb targets must be SLBs")]
    TargetNotSlb(DeviceId),
    #[error("device {0} is an SLB; use eval-slb mode to localize SLBs")]
    TargetIsSlb(DeviceId),
    #[error("no localization targets resolved for this mode")]
    NoTargets,
    #[error("solver failed on group {group} of device {target}: {source}")]
    Solver {
        target: DeviceId,
        group: u32,
        source: SolverError,
    },
}

/// Per-stage record accounting. `matched_pairs` equals the sum of all drop
/// counters plus `measurements`; `estimates` equals `accepted` plus the
/// rejection counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub receive_records: u64,
    pub matched_pairs: u64,
    pub unmatched_receives: u64,
    pub dropped_non_positive_tof: u64,
    pub dropped_track_gap: u64,
    pub dropped_depth_gap: u64,
    pub dropped_invalid_depth_discriminant: u64,
    pub dropped_range_rate: u64,
    pub measurements: u64,
    pub tdoa_arrivals: u64,
    pub groups: u64,
    pub estimates: u64,
    pub accepted: u64,
    pub rejected_cost: u64,
    pub rejected_crlb: u64,
    pub rejected_ill_conditioned: u64,
    pub rejected_not_converged: u64,
}

impl Diagnostics {
    fn record_drop(&mut self, reason: DropReason) {
        match reason {
            DropReason::NonPositiveTof => self.dropped_non_positive_tof += 1,
            DropReason::TrackGap => self.dropped_track_gap += 1,
            DropReason::DepthGap => self.dropped_depth_gap += 1,
            DropReason::InvalidDepthDiscriminant => self.dropped_invalid_depth_discriminant += 1,
            DropReason::RangeRate => self.dropped_range_rate += 1,
        }
    }

    fn record_estimate(&mut self, estimate: &PositionEstimate) {
        self.estimates += 1;
        if estimate.accepted {
            self.accepted += 1;
        } else {
            match estimate.reject_reason {
                RejectReason::Cost => self.rejected_cost += 1,
                RejectReason::Crlb => self.rejected_crlb += 1,
                RejectReason::IllConditioned => self.rejected_ill_conditioned += 1,
                RejectReason::NotConverged => self.rejected_not_converged += 1,
                RejectReason::None => {}
            }
        }
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.receive_records += other.receive_records;
        self.matched_pairs += other.matched_pairs;
        self.unmatched_receives += other.unmatched_receives;
        self.dropped_non_positive_tof += other.dropped_non_positive_tof;
        self.dropped_track_gap += other.dropped_track_gap;
        self.dropped_depth_gap += other.dropped_depth_gap;
        self.dropped_invalid_depth_discriminant += other.dropped_invalid_depth_discriminant;
        self.dropped_range_rate += other.dropped_range_rate;
        self.measurements += other.measurements;
        self.tdoa_arrivals += other.tdoa_arrivals;
        self.groups += other.groups;
        self.estimates += other.estimates;
        self.accepted += other.accepted;
        self.rejected_cost += other.rejected_cost;
        self.rejected_crlb += other.rejected_crlb;
        self.rejected_ill_conditioned += other.rejected_ill_conditioned;
        self.rejected_not_converged += other.rejected_not_converged;
    }
}

#[derive(Debug, Default)]
pub struct RunOutput {
    /// All estimates, accepted and rejected, sorted by (device, time).
    pub estimates: Vec<PositionEstimate>,
    pub diagnostics: Diagnostics,
    /// Present in eval-slb mode: errors against the targets' own GPS.
    pub error_stats: Option<ErrorStats>,
}

/// Where the target's depth at an event time comes from.
enum DepthSource<'a> {
    Series(&'a DepthSeries),
    Constant(f64),
}

impl DepthSource<'_> {
    fn at(&self, t: f64, limit: f64) -> Result<f64, DropReason> {
        match self {
            DepthSource::Series(series) => series
                .interpolate(t, limit)
                .map_err(|_| DropReason::DepthGap),
            DepthSource::Constant(z) => Ok(*z),
        }
    }

    fn at_clamped(&self, t: f64) -> f64 {
        match self {
            DepthSource::Series(series) => series.interpolate_clamped(t),
            DepthSource::Constant(z) => *z,
        }
    }
}

/// Where the per-group initial guess comes from.
enum GuessSource<'a> {
    DiveRise(&'a DiveRiseFixes),
    /// The target SLB's own GPS, sampled `lookback` seconds early.
    GpsLookback(&'a GpsTrack, f64),
}

impl GuessSource<'_> {
    fn at(&self, t: f64) -> driftloc_core::geo::GeodeticPoint {
        match self {
            GuessSource::DiveRise(fixes) => solver::initial_guess(fixes, t),
            GuessSource::GpsLookback(track, lookback) => track.interpolate_clamped(t - lookback),
        }
    }
}

/// Runs the configured mode over all resolved targets.
pub fn run(logs: &DeploymentLogs, cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    let targets = resolve_targets(logs, cfg)?;
    if targets.is_empty() {
        return Err(PipelineError::NoTargets);
    }

    let mut output = RunOutput::default();
    let mut truth = GroundTruth::default();
    for &target in &targets {
        let part = match cfg.mode {
            Mode::Tof => localize_float(logs, cfg, target)?,
            Mode::Tdoa => localize_tdoa(logs, cfg, target)?,
            Mode::EvalSlb => {
                let track = logs
                    .gps
                    .get(&target)
                    .ok_or(PipelineError::MissingGps(target))?;
                let slb_truth = GroundTruth::from_gps_track(track, cfg.ranging.slb_depth_m);
                truth.samples.extend(slb_truth.samples);
                evaluate_slb_target(logs, cfg, target)?
            }
        };
        output.estimates.extend(part.estimates);
        output.diagnostics.merge(&part.diagnostics);
    }
    output.estimates.sort_by(|a, b| {
        a.device
            .cmp(&b.device)
            .then(a.t_center.total_cmp(&b.t_center))
            .then(a.group_id.cmp(&b.group_id))
    });
    if cfg.mode == Mode::EvalSlb {
        output.error_stats = evaluate(&output.estimates, &truth).ok();
    }
    Ok(output)
}

fn resolve_targets(logs: &DeploymentLogs, cfg: &RunConfig) -> Result<Vec<DeviceId>, PipelineError> {
    if !cfg.targets.is_empty() {
        for &t in &cfg.targets {
            match (cfg.mode, cfg.device_kind(t)) {
                (Mode::Tof, DeviceKind::Slb) => return Err(PipelineError::TargetIsSlb(t)),
                (Mode::EvalSlb, DeviceKind::Float) => return Err(PipelineError::TargetNotSlb(t)),
                _ => {}
            }
        }
        let mut targets = cfg.targets.clone();
        targets.sort();
        targets.dedup();
        return Ok(targets);
    }
    let mut targets: Vec<DeviceId> = match cfg.mode {
        // Floats with both a depth record and dive/rise fixes.
        Mode::Tof => logs
            .depth
            .keys()
            .filter(|d| logs.dive_rise.contains_key(d) && !cfg.slb_ids.contains(d))
            .copied()
            .collect(),
        // Any non-SLB device heard by an SLB.
        Mode::Tdoa => logs
            .pings
            .iter()
            .filter(|r| {
                r.direction == PingDirection::Received
                    && cfg.slb_ids.contains(&r.device)
                    && !cfg.slb_ids.contains(&r.peer)
            })
            .map(|r| r.peer)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        Mode::EvalSlb => cfg
            .slb_ids
            .iter()
            .filter(|d| logs.gps.contains_key(d))
            .copied()
            .collect(),
    };
    targets.sort();
    targets.dedup();
    Ok(targets)
}

/// Algorithm steps for one float target: match → ToF → distances → filter →
/// group → solve → CRLB → filter.
pub fn localize_float(
    logs: &DeploymentLogs,
    cfg: &RunConfig,
    target: DeviceId,
) -> Result<RunOutput, PipelineError> {
    let depth = logs
        .depth
        .get(&target)
        .ok_or(PipelineError::MissingDepth(target))?;
    let dive_rise = logs
        .dive_rise
        .get(&target)
        .ok_or(PipelineError::MissingDiveRise(target))?;
    let anchors: BTreeSet<DeviceId> = cfg
        .slb_ids
        .iter()
        .copied()
        .filter(|&d| d != target)
        .collect();
    localize_target(
        logs,
        cfg,
        target,
        &anchors,
        DepthSource::Series(depth),
        GuessSource::DiveRise(dive_rise),
    )
}

/// Eval mode body: the target SLB is localized like a float at fixed
/// transducer depth, seeded from its own GPS one lookback earlier.
fn evaluate_slb_target(
    logs: &DeploymentLogs,
    cfg: &RunConfig,
    target: DeviceId,
) -> Result<RunOutput, PipelineError> {
    let track = logs
        .gps
        .get(&target)
        .ok_or(PipelineError::MissingGps(target))?;
    let anchors: BTreeSet<DeviceId> = cfg
        .slb_ids
        .iter()
        .copied()
        .filter(|&d| d != target)
        .collect();
    localize_target(
        logs,
        cfg,
        target,
        &anchors,
        DepthSource::Constant(cfg.ranging.slb_depth_m),
        GuessSource::GpsLookback(track, cfg.slb_guess_lookback_s),
    )
}

fn localize_target(
    logs: &DeploymentLogs,
    cfg: &RunConfig,
    target: DeviceId,
    anchors: &BTreeSet<DeviceId>,
    depth: DepthSource<'_>,
    guess: GuessSource<'_>,
) -> Result<RunOutput, PipelineError> {
    let mut diagnostics = Diagnostics::default();

    // Only exchanges between the target and an anchor participate.
    let sent: Vec<PingRecord> = logs
        .pings
        .iter()
        .filter(|r| {
            r.direction == PingDirection::Sent
                && (r.device == target || anchors.contains(&r.device))
        })
        .copied()
        .collect();
    let received: Vec<PingRecord> = logs
        .pings
        .iter()
        .filter(|r| {
            r.direction == PingDirection::Received
                && ((anchors.contains(&r.device) && r.peer == target)
                    || (r.device == target && anchors.contains(&r.peer)))
        })
        .copied()
        .collect();
    diagnostics.receive_records = received.len() as u64;

    let matched = ranging::match_pings(&sent, &received, &cfg.ranging);
    diagnostics.matched_pairs = matched.pairs.len() as u64;
    diagnostics.unmatched_receives = matched.unmatched_receives;

    let mut measurements: Vec<RangeMeasurement> = Vec::with_capacity(matched.pairs.len());
    for pair in &matched.pairs {
        match build_measurement(pair, target, cfg, logs, &depth) {
            Ok(m) => measurements.push(m),
            Err(reason) => diagnostics.record_drop(reason),
        }
    }

    measurements.sort_by(|a, b| {
        a.t_send
            .total_cmp(&b.t_send)
            .then(a.sender.cmp(&b.sender))
            .then(a.receiver.cmp(&b.receiver))
    });

    // Velocity check runs independently per (target, SLB) pair.
    let mut chains: BTreeMap<DeviceId, Vec<RangeMeasurement>> = BTreeMap::new();
    for m in measurements {
        chains.entry(m.slb).or_default().push(m);
    }
    let mut filtered: Vec<RangeMeasurement> = Vec::new();
    for chain in chains.values() {
        let (kept, dropped) = ranging::filter_range_rate(chain, &cfg.ranging);
        diagnostics.dropped_range_rate += dropped;
        filtered.extend(kept);
    }
    filtered.sort_by(|a, b| {
        a.t_send
            .total_cmp(&b.t_send)
            .then(a.sender.cmp(&b.sender))
            .then(a.receiver.cmp(&b.receiver))
    });
    diagnostics.measurements = filtered.len() as u64;

    let groups = grouping::build_groups(&filtered, target, cfg.grouping_window_s);
    diagnostics.groups = groups.len() as u64;

    let mut estimates = Vec::with_capacity(groups.len());
    for group in &groups {
        let estimate = solve_group(group, cfg, &depth, &guess, target)?;
        let estimate = apply_filter(estimate, &cfg.crlb);
        diagnostics.record_estimate(&estimate);
        estimates.push(estimate);
    }

    Ok(RunOutput {
        estimates,
        diagnostics,
        error_stats: None,
    })
}

/// Classifies one matched pair, evaluates platform positions at the event
/// times, and produces a depth-compensated measurement.
fn build_measurement(
    pair: &ranging::MatchedPair,
    target: DeviceId,
    cfg: &RunConfig,
    logs: &DeploymentLogs,
    depth: &DepthSource<'_>,
) -> Result<RangeMeasurement, DropReason> {
    let tof = ranging::compute_tof(pair, &cfg.ranging)?;
    let sender = pair.send.device;
    let receiver = pair.recv.device;
    let (direction, slb, slb_event_t, target_event_t) = if sender == target {
        (
            RangeDirection::Uplink,
            receiver,
            pair.recv.timestamp_utc,
            pair.send.timestamp_utc,
        )
    } else {
        (
            RangeDirection::Downlink,
            sender,
            pair.send.timestamp_utc,
            pair.recv.timestamp_utc,
        )
    };

    let slb_position = logs
        .gps
        .get(&slb)
        .ok_or(DropReason::TrackGap)?
        .interpolate(slb_event_t, cfg.extrapolation_limit_s)
        .map_err(|_| DropReason::TrackGap)?;
    let float_depth_m = depth.at(target_event_t, cfg.extrapolation_limit_s)?;

    ranging::depth_compensate(
        &AcousticRange {
            sender,
            receiver,
            slb,
            direction,
            t_send: pair.send.timestamp_utc,
            t_recv: pair.recv.timestamp_utc,
            tof_s: tof.tof_s,
            d_acoustic_m: tof.d_acoustic_m,
            slb_position,
            float_depth_m,
        },
        &cfg.ranging,
    )
}

fn solve_group(
    group: &PingGroup,
    cfg: &RunConfig,
    depth: &DepthSource<'_>,
    guess: &GuessSource<'_>,
    target: DeviceId,
) -> Result<PositionEstimate, PipelineError> {
    let anchors: Vec<RangeAnchor> = group
        .members
        .iter()
        .map(|m| RangeAnchor {
            position: geo::geodetic_to_ned(&m.slb_position, &cfg.origin),
            d_horizontal_m: m.d_horizontal_m,
        })
        .collect();
    let guess_ned = geo::geodetic_to_ned(&guess.at(group.t_center), &cfg.origin);

    let solved = solver::trilaterate(&anchors, &guess_ned, &cfg.solver).map_err(|source| {
        PipelineError::Solver {
            target,
            group: group.group_id,
            source,
        }
    })?;

    let anchor_positions: Vec<NedPoint> = anchors.iter().map(|a| a.position).collect();
    let sigmas = fisher_information(
        &solved.position_ned,
        &anchor_positions,
        cfg.crlb.noise_variance_m2,
    )
    .and_then(|fim| crlb_sigmas(&fim, cfg.crlb.condition_limit))
    .ok();

    let position_ned = NedPoint::new(
        solved.position_ned.north_m,
        solved.position_ned.east_m,
        depth.at_clamped(group.t_center),
    );
    Ok(PositionEstimate {
        device: target,
        group_id: group.group_id,
        t_center: group.t_center,
        position: geo::ned_to_geodetic(&position_ned, &cfg.origin),
        position_ned,
        cost_m2: solved.cost_m2,
        sigma_x_m: sigmas.map(|s| s.0),
        sigma_y_m: sigmas.map(|s| s.1),
        n_slbs: group.members.len() as u32,
        method: LocalizationMethod::Tof,
        converged: solved.converged,
        accepted: false,
        reject_reason: RejectReason::None,
    })
}

/// TDoA fallback: groups the target's arrivals at the SLBs by a sliding
/// window on receive time, solves each group against the earliest-arrival
/// reference, and applies the same cost/CRLB filter.
pub fn localize_tdoa(
    logs: &DeploymentLogs,
    cfg: &RunConfig,
    target: DeviceId,
) -> Result<RunOutput, PipelineError> {
    let mut diagnostics = Diagnostics::default();

    let mut arrivals: Vec<TdoaArrival> = Vec::new();
    for r in &logs.pings {
        if r.direction != PingDirection::Received
            || r.peer != target
            || !cfg.slb_ids.contains(&r.device)
        {
            continue;
        }
        diagnostics.receive_records += 1;
        let Some(track) = logs.gps.get(&r.device) else {
            diagnostics.record_drop(DropReason::TrackGap);
            continue;
        };
        match track.interpolate(r.timestamp_utc, cfg.extrapolation_limit_s) {
            Ok(position) => arrivals.push(TdoaArrival {
                slb: r.device,
                position: geo::geodetic_to_ned(&position, &cfg.origin),
                t_arrival_utc: r.timestamp_utc,
            }),
            Err(_) => diagnostics.record_drop(DropReason::TrackGap),
        }
    }
    arrivals.sort_by(|a, b| {
        a.t_arrival_utc
            .total_cmp(&b.t_arrival_utc)
            .then(a.slb.cmp(&b.slb))
    });
    diagnostics.tdoa_arrivals = arrivals.len() as u64;

    let index_sets = window_groups(
        &arrivals,
        |a| a.t_arrival_utc,
        |a| a.slb,
        cfg.grouping_window_s,
        grouping::MIN_UNIQUE_SLBS,
    );
    diagnostics.groups = index_sets.len() as u64;

    let mut estimates = Vec::with_capacity(index_sets.len());
    for (group_id, indices) in index_sets.iter().enumerate() {
        let members: Vec<TdoaArrival> = indices.iter().map(|&i| arrivals[i]).collect();
        let solved = solver::tdoa_localize(&members, cfg.ranging.sound_speed_mps, &cfg.solver)
            .map_err(|source| PipelineError::Solver {
                target,
                group: group_id as u32,
                source,
            })?;

        let positions: Vec<NedPoint> = members.iter().map(|m| m.position).collect();
        let sigmas =
            fisher_information(&solved.position_ned, &positions, cfg.crlb.noise_variance_m2)
                .and_then(|fim| crlb_sigmas(&fim, cfg.crlb.condition_limit))
                .ok();

        let t_center = members.iter().map(|m| m.t_arrival_utc).sum::<f64>() / members.len() as f64;
        // Depth is unknown for a transmit-only target; the solve is
        // horizontal-only.
        let position_ned =
            NedPoint::new(solved.position_ned.north_m, solved.position_ned.east_m, 0.0);
        let estimate = apply_filter(
            PositionEstimate {
                device: target,
                group_id: group_id as u32,
                t_center,
                position: geo::ned_to_geodetic(&position_ned, &cfg.origin),
                position_ned,
                cost_m2: solved.cost_m2,
                sigma_x_m: sigmas.map(|s| s.0),
                sigma_y_m: sigmas.map(|s| s.1),
                n_slbs: members.len() as u32,
                method: LocalizationMethod::Tdoa,
                converged: solved.converged,
                accepted: false,
                reject_reason: RejectReason::None,
            },
            &cfg.crlb,
        );
        diagnostics.record_estimate(&estimate);
        estimates.push(estimate);
    }

    Ok(RunOutput {
        estimates,
        diagnostics,
        error_stats: None,
    })
}
