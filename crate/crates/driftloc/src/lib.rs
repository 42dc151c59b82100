//! File formats, deployment simulation, and pipeline orchestration around
//! [`driftloc_core`].
//!
//! * [`ingest`] — CSV log schemas (pings, GPS, depth, dive/rise) and
//!   timestamp handling
//! * [`config`] — TOML run and scenario configuration
//! * [`sim`] — synthetic-deployment generator with known ground truth,
//!   plus error statistics against truth
//! * [`pipeline`] — end-to-end localization runs (ToF, TDoA, SLB
//!   evaluation) with per-stage diagnostics
//! * [`output`] — estimates CSV, trajectory GeoJSON, and the run report

pub mod config;
pub mod ingest;
pub mod output;
pub mod pipeline;
pub mod sim;
