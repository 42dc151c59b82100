//! Core algorithms for acoustic localization of drifting underwater floats.
//!
//! The pipeline estimates 2D positions of buoyancy-driven floats from
//! bidirectional acoustic ping exchanges with GPS-tracked surface buoys:
//!
//! * [`geo`] — WGS84 geodetic ↔ local North-East-Down transforms
//! * [`track`] — time-indexed GPS / depth tracks with linear interpolation
//! * [`ranging`] — ping matching, time-of-flight ranges, depth compensation,
//!   and physical-plausibility filtering
//! * [`grouping`] — sliding-window assembly of trilateration groups
//! * [`solver`] — nonlinear least-squares trilateration and TDoA
//!   multilateration
//! * [`uncertainty`] — Fisher information, CRLB sigmas, and the cost/CRLB
//!   acceptance filter
//!
//! The crate is `no_std` (with `alloc`); file formats, simulation, and the
//! CLI live in the companion `driftloc` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod geo;
pub mod grouping;
pub mod ranging;
pub mod solver;
pub mod track;
pub mod types;
pub mod uncertainty;

pub use geo::{GeodeticPoint, NedPoint, ReferenceOrigin};
pub use grouping::PingGroup;
pub use ranging::{RangeDirection, RangeMeasurement, RangingConfig};
pub use solver::{SolveResult, SolverConfig};
pub use types::{DeviceId, DeviceKind, PingDirection, PingRecord};
pub use uncertainty::{CrlbConfig, LocalizationMethod, PositionEstimate, RejectReason};
