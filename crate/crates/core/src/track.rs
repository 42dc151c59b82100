//! Time-indexed device tracks with linear interpolation.
//!
//! SLB positions and float depths are evaluated at acoustic event times
//! (send or receive as appropriate), not at the nearest logged sample:
//! buoys drift during the round-robin cycle and nearest-fix lookup was a
//! known error source. Queries slightly past the track ends are clamped to
//! the end value up to a configurable limit; beyond it the measurement is
//! dropped rather than guessed.

use alloc::vec::Vec;
use core::fmt;

use crate::geo::GeodeticPoint;
use crate::types::{DepthSample, DeviceId, GpsFix};

/// Default clamped-extrapolation limit past the track ends, seconds.
pub const DEFAULT_EXTRAPOLATION_LIMIT_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackError {
    Empty,
    /// Query time outside `[start - limit, end + limit]`.
    OutOfRange {
        t: f64,
        start: f64,
        end: f64,
    },
}

impl fmt::Display for TrackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackError::Empty => write!(f, "track has no samples"),
            TrackError::OutOfRange { t, start, end } => write!(
                f,
                "query time {t} outside track span [{start}, {end}] plus extrapolation limit"
            ),
        }
    }
}

impl core::error::Error for TrackError {}

/// Where a query time falls relative to a sorted sample span.
enum Lookup {
    /// Clamp to the first sample.
    Before,
    /// Clamp to the last sample.
    After,
    /// Interpolate between samples `i` and `i + 1` with the given fraction.
    Between(usize, f64),
}

fn locate(times_first: f64, times_last: f64, t: f64, limit: f64) -> Result<(), TrackError> {
    if t < times_first - limit || t > times_last + limit {
        return Err(TrackError::OutOfRange {
            t,
            start: times_first,
            end: times_last,
        });
    }
    Ok(())
}

fn lookup<T>(samples: &[T], time: impl Fn(&T) -> f64, t: f64) -> Lookup {
    let first = time(&samples[0]);
    let last = time(&samples[samples.len() - 1]);
    if t <= first {
        return Lookup::Before;
    }
    if t >= last {
        return Lookup::After;
    }
    // Index of the first sample with time > t; t lies in [idx-1, idx).
    let idx = samples.partition_point(|s| time(s) <= t);
    let t0 = time(&samples[idx - 1]);
    let t1 = time(&samples[idx]);
    let fraction = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Lookup::Between(idx - 1, fraction)
}

/// Time-sorted GPS fixes of one device.
#[derive(Debug, Clone)]
pub struct GpsTrack {
    device: DeviceId,
    fixes: Vec<GpsFix>,
}

impl GpsTrack {
    /// Builds a track from fixes of one device; sorts by time.
    pub fn new(device: DeviceId, mut fixes: Vec<GpsFix>) -> Result<Self, TrackError> {
        if fixes.is_empty() {
            return Err(TrackError::Empty);
        }
        fixes.sort_by(|a, b| a.timestamp_utc.total_cmp(&b.timestamp_utc));
        Ok(Self { device, fixes })
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn fixes(&self) -> &[GpsFix] {
        &self.fixes
    }

    pub fn start(&self) -> f64 {
        self.fixes[0].timestamp_utc
    }

    pub fn end(&self) -> f64 {
        self.fixes[self.fixes.len() - 1].timestamp_utc
    }

    /// Piecewise-linear position at `t`; clamps to the end fixes within
    /// `max_extrapolation_s` of the span and errors beyond that.
    pub fn interpolate(
        &self,
        t: f64,
        max_extrapolation_s: f64,
    ) -> Result<GeodeticPoint, TrackError> {
        locate(self.start(), self.end(), t, max_extrapolation_s)?;
        Ok(self.interpolate_clamped(t))
    }

    /// Position at `t` clamped to the track span, with no extrapolation
    /// limit. Used for initial guesses, never for range measurements.
    pub fn interpolate_clamped(&self, t: f64) -> GeodeticPoint {
        match lookup(&self.fixes, |f| f.timestamp_utc, t) {
            Lookup::Before => self.fixes[0].position,
            Lookup::After => self.fixes[self.fixes.len() - 1].position,
            Lookup::Between(i, a) => self.fixes[i].position.lerp(&self.fixes[i + 1].position, a),
        }
    }
}

/// Time-sorted pressure-sensor depth samples of one device.
#[derive(Debug, Clone)]
pub struct DepthSeries {
    device: DeviceId,
    samples: Vec<DepthSample>,
}

impl DepthSeries {
    pub fn new(device: DeviceId, mut samples: Vec<DepthSample>) -> Result<Self, TrackError> {
        if samples.is_empty() {
            return Err(TrackError::Empty);
        }
        samples.sort_by(|a, b| a.timestamp_utc.total_cmp(&b.timestamp_utc));
        Ok(Self { device, samples })
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn samples(&self) -> &[DepthSample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].timestamp_utc
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].timestamp_utc
    }

    /// Linear depth at `t`, same extrapolation contract as
    /// [`GpsTrack::interpolate`].
    pub fn interpolate(&self, t: f64, max_extrapolation_s: f64) -> Result<f64, TrackError> {
        locate(self.start(), self.end(), t, max_extrapolation_s)?;
        Ok(self.interpolate_clamped(t))
    }

    pub fn interpolate_clamped(&self, t: f64) -> f64 {
        match lookup(&self.samples, |s| s.timestamp_utc, t) {
            Lookup::Before => self.samples[0].depth_m,
            Lookup::After => self.samples[self.samples.len() - 1].depth_m,
            Lookup::Between(i, a) => {
                self.samples[i].depth_m * (1.0 - a) + self.samples[i + 1].depth_m * a
            }
        }
    }
}
