//! Bidirectional ping matching and time-of-flight range extraction.
//!
//! Sent pings are matched to receptions of the same sender id within a short
//! window, converted to one-way travel times (minus a fixed processing
//! delay), scaled by sound speed into slant ranges, and depth-compensated
//! into horizontal distances. Two physical-plausibility filters then run:
//! slant ranges shorter than the depth offset are discarded, and per
//! (float, SLB) pair a walking velocity check drops ranges implying
//! non-physical closure rates.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use libm::sqrt;

use crate::geo::GeodeticPoint;
use crate::types::{DeviceId, PingRecord};

/// Tuning for ping matching and range extraction. Sound speed is a measured
/// per-deployment scalar and has no meaningful default.
#[derive(Debug, Clone, Copy)]
pub struct RangingConfig {
    /// Underwater sound speed c, m/s.
    pub sound_speed_mps: f64,
    /// Modem software processing delay δ subtracted from raw travel time, s.
    pub processing_delay_s: f64,
    /// Maximum send→receive gap for a match, s.
    pub match_window_s: f64,
    /// Fixed transducer depth of an SLB, m.
    pub slb_depth_m: f64,
    /// Velocity-check threshold on horizontal range change, m/s.
    pub max_range_rate_mps: f64,
}

impl RangingConfig {
    pub fn new(sound_speed_mps: f64) -> Self {
        Self {
            sound_speed_mps,
            processing_delay_s: 0.0,
            match_window_s: 1.5,
            slb_depth_m: 3.0,
            max_range_rate_mps: 0.8,
        }
    }
}

/// Ping direction relative to the localization target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeDirection {
    /// Target transmitted, SLB received.
    Uplink,
    /// SLB transmitted, target received.
    Downlink,
}

/// Why a matched pair was removed before grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Travel time not positive after delay subtraction.
    NonPositiveTof,
    /// No SLB position available at the event time.
    TrackGap,
    /// No target depth available at the event time.
    DepthGap,
    /// Slant range shorter than the vertical offset (negative discriminant).
    InvalidDepthDiscriminant,
    /// Velocity check against the last accepted range failed.
    RangeRate,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::NonPositiveTof => "non-positive-tof",
            DropReason::TrackGap => "track-gap",
            DropReason::DepthGap => "depth-gap",
            DropReason::InvalidDepthDiscriminant => "invalid-depth-discriminant",
            DropReason::RangeRate => "range-rate",
        };
        f.write_str(s)
    }
}

/// A send record paired with one reception of the same ping.
#[derive(Debug, Clone, Copy)]
pub struct MatchedPair {
    pub send: PingRecord,
    pub recv: PingRecord,
}

/// Result of the matching pass; unmatched receptions are counted for the
/// run diagnostics, not errors.
#[derive(Debug, Clone, Default)]
pub struct MatchOutcome {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_receives: u64,
}

/// Matches receive records to sends of the same sender id where
/// `0 < t_recv − t_send < match_window_s`.
///
/// Each reception matches at most one send; when several sends fall inside
/// the window the latest one before the reception wins (the shortest implied
/// travel time is the direct-path hypothesis, and TDMA spacing makes the
/// case rare). Inputs must be time-sorted.
pub fn match_pings(
    sent: &[PingRecord],
    received: &[PingRecord],
    cfg: &RangingConfig,
) -> MatchOutcome {
    let mut sends_by_device: BTreeMap<DeviceId, Vec<&PingRecord>> = BTreeMap::new();
    for s in sent {
        sends_by_device.entry(s.peer).or_default().push(s);
    }

    let mut out = MatchOutcome::default();
    for r in received {
        let Some(sends) = sends_by_device.get(&r.peer) else {
            out.unmatched_receives += 1;
            continue;
        };
        // Latest send strictly before the reception.
        let idx = sends.partition_point(|s| s.timestamp_utc < r.timestamp_utc);
        let matched = idx.checked_sub(1).map(|i| sends[i]).filter(|s| {
            let dt = r.timestamp_utc - s.timestamp_utc;
            dt > 0.0 && dt < cfg.match_window_s
        });
        match matched {
            Some(s) => out.pairs.push(MatchedPair { send: *s, recv: *r }),
            None => out.unmatched_receives += 1,
        }
    }

    out.pairs.sort_by(|a, b| {
        a.send
            .timestamp_utc
            .total_cmp(&b.send.timestamp_utc)
            .then(a.send.device.cmp(&b.send.device))
            .then(a.recv.device.cmp(&b.recv.device))
            .then(a.recv.timestamp_utc.total_cmp(&b.recv.timestamp_utc))
    });
    out
}

/// Travel time and slant range of one matched pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TofRange {
    pub tof_s: f64,
    pub d_acoustic_m: f64,
}

/// ToF = t_recv − t_send − δ, then d_acoustic = c · ToF. Pairs whose delay
/// subtraction leaves a non-positive travel time are dropped.
pub fn compute_tof(pair: &MatchedPair, cfg: &RangingConfig) -> Result<TofRange, DropReason> {
    let tof_s = pair.recv.timestamp_utc - pair.send.timestamp_utc - cfg.processing_delay_s;
    if tof_s <= 0.0 {
        return Err(DropReason::NonPositiveTof);
    }
    Ok(TofRange {
        tof_s,
        d_acoustic_m: cfg.sound_speed_mps * tof_s,
    })
}

/// A slant range annotated with the geometry needed for depth compensation:
/// the SLB position at its event time and the target depth at its event
/// time (receive time for downlink, send time for uplink — the moment the
/// acoustic path touches each platform).
#[derive(Debug, Clone, Copy)]
pub struct AcousticRange {
    pub sender: DeviceId,
    pub receiver: DeviceId,
    /// Whichever side of the exchange is the SLB.
    pub slb: DeviceId,
    pub direction: RangeDirection,
    pub t_send: f64,
    pub t_recv: f64,
    pub tof_s: f64,
    pub d_acoustic_m: f64,
    pub slb_position: GeodeticPoint,
    pub float_depth_m: f64,
}

/// A fully-formed horizontal range measurement between target and SLB.
///
/// Invariants: `d_horizontal_m ≤ d_acoustic_m` and
/// `d_horizontal² + (z_float − z_slb)² = d_acoustic²`, both by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeMeasurement {
    pub sender: DeviceId,
    pub receiver: DeviceId,
    pub slb: DeviceId,
    pub direction: RangeDirection,
    pub t_send: f64,
    pub t_recv: f64,
    pub tof_s: f64,
    pub d_acoustic_m: f64,
    pub d_horizontal_m: f64,
    pub slb_position: GeodeticPoint,
    pub float_depth_m: f64,
}

/// d_horizontal = √(d_acoustic² − (z_float − z_slb)²).
///
/// A slant range shorter than the vertical offset has no real solution and
/// is discarded as a physically impossible measurement.
pub fn depth_compensate(
    range: &AcousticRange,
    cfg: &RangingConfig,
) -> Result<RangeMeasurement, DropReason> {
    let dz = range.float_depth_m - cfg.slb_depth_m;
    let disc = range.d_acoustic_m * range.d_acoustic_m - dz * dz;
    if disc < 0.0 {
        return Err(DropReason::InvalidDepthDiscriminant);
    }
    Ok(RangeMeasurement {
        sender: range.sender,
        receiver: range.receiver,
        slb: range.slb,
        direction: range.direction,
        t_send: range.t_send,
        t_recv: range.t_recv,
        tof_s: range.tof_s,
        d_acoustic_m: range.d_acoustic_m,
        d_horizontal_m: sqrt(disc),
        slb_position: range.slb_position,
        float_depth_m: range.float_depth_m,
    })
}

/// Walking velocity check over one (target, SLB) pair's time-sorted chain.
///
/// A measurement is dropped when the horizontal-range change relative to the
/// last *accepted* measurement exceeds `max_range_rate_mps`; anchoring on
/// the last accepted rather than the immediate predecessor keeps one outlier
/// from suppressing its valid successor. Returns the survivors and the drop
/// count.
pub fn filter_range_rate(
    chain: &[RangeMeasurement],
    cfg: &RangingConfig,
) -> (Vec<RangeMeasurement>, u64) {
    let mut kept: Vec<RangeMeasurement> = Vec::with_capacity(chain.len());
    let mut dropped = 0u64;
    for m in chain {
        match kept.last() {
            None => kept.push(*m),
            Some(last) => {
                let dt = m.t_send - last.t_send;
                let dd = (m.d_horizontal_m - last.d_horizontal_m).abs();
                // |Δd| > rate·Δt, written multiplicatively so Δt = 0 with a
                // range jump is rejected rather than dividing by zero.
                if dd > cfg.max_range_rate_mps * dt {
                    dropped += 1;
                } else {
                    kept.push(*m);
                }
            }
        }
    }
    (kept, dropped)
}
