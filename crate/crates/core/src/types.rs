//! Canonical device and log-record types shared across the pipeline.
//!
//! Timestamps are seconds since the Unix epoch (UTC, f64). At present-day
//! epoch magnitudes an f64 resolves ~0.25 µs, comfortably below the
//! millisecond resolution the ping logs guarantee.

use core::fmt;

use crate::geo::GeodeticPoint;

/// Identifier of one acoustic platform (float or surface buoy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub u16);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Role of a device in a deployment; fixed per id for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    /// Buoyancy-driven drifting float (the localization target).
    Float,
    /// Surface localization buoy: GPS-tracked anchor node.
    Slb,
}

/// Whether a logged ping event is a transmission or a reception.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PingDirection {
    Sent,
    Received,
}

/// One timestamped send or receive event from a device ping log.
///
/// Pings carry only the sender's id, so a received ping is attributed via
/// `peer`; sent records have `peer == device`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PingRecord {
    /// The device that logged the event.
    pub device: DeviceId,
    pub direction: PingDirection,
    /// Sender id for received pings; equals `device` for sent pings.
    pub peer: DeviceId,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp_utc: f64,
}

/// One GPS fix of a surface platform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub device: DeviceId,
    pub timestamp_utc: f64,
    pub position: GeodeticPoint,
}

/// One pressure-derived depth sample, meters, positive down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub device: DeviceId,
    pub timestamp_utc: f64,
    pub depth_m: f64,
}

/// GPS fixes bracketing a float's dive: the last fix before descent and the
/// first fix after surfacing. Interpolating between them seeds the
/// trilateration initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiveRiseFixes {
    pub device: DeviceId,
    pub dive: GpsFix,
    pub rise: GpsFix,
}

impl DiveRiseFixes {
    /// `dive` must precede `rise`.
    pub fn new(device: DeviceId, dive: GpsFix, rise: GpsFix) -> Result<Self, InvalidDiveRise> {
        if dive.timestamp_utc < rise.timestamp_utc {
            Ok(Self { device, dive, rise })
        } else {
            Err(InvalidDiveRise)
        }
    }
}

/// Dive fix does not precede rise fix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvalidDiveRise;

impl fmt::Display for InvalidDiveRise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dive fix must precede rise fix")
    }
}

impl core::error::Error for InvalidDiveRise {}
