//! Fisher-information / CRLB uncertainty for each position estimate and the
//! cost + CRLB acceptance filter.
//!
//! For a group of N ranges the Fisher information about the 2D position is
//!
//! F = (1/σ²) Σᵢ (1/rᵢ²) · [Δxᵢ², ΔxᵢΔyᵢ; ΔxᵢΔyᵢ, Δyᵢ²]
//!
//! with Δxᵢ = x* − xᵢ, rᵢ = ‖p* − pᵢ‖ and a fixed measurement-noise
//! variance σ². Its inverse lower-bounds the estimator covariance; the
//! diagonal square roots σx, σy feed the acceptance filter together with
//! the solver's residual cost. Groups whose Fisher matrix is singular or
//! nearly so (collinear SLBs) are rejected outright.

use core::fmt;

use libm::{atan2, log, sqrt};

use crate::geo::{GeodeticPoint, NedPoint};
use crate::types::DeviceId;

/// Thresholds for uncertainty computation and estimate acceptance.
#[derive(Debug, Clone, Copy)]
pub struct CrlbConfig {
    /// Acoustic range noise variance σ², m².
    pub noise_variance_m2: f64,
    /// Fisher matrices with a larger condition number are rejected.
    pub condition_limit: f64,
    /// Residual-cost acceptance threshold τ_cost, m².
    pub tau_cost_m2: f64,
    /// Per-axis CRLB acceptance threshold τ_crlb, m.
    pub tau_crlb_m: f64,
}

impl Default for CrlbConfig {
    fn default() -> Self {
        Self {
            noise_variance_m2: 9.0,
            condition_limit: 1e8,
            tau_cost_m2: 50.0,
            tau_crlb_m: 10.0,
        }
    }
}

/// Symmetric 2×2 matrix over the (x = east, y = north) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in descending order. Real by symmetry.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = (self.xx + self.yy) / 2.0;
        let diff = (self.xx - self.yy) / 2.0;
        let radius = sqrt(diff * diff + self.xy * self.xy);
        (mean + radius, mean - radius)
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Sym2 {
            xx: self.yy / det,
            xy: -self.xy / det,
            yy: self.xx / det,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyError {
    /// The estimate coincides with an SLB position (rᵢ = 0).
    DegenerateGeometry,
    /// Fisher matrix singular or condition number above the limit.
    IllConditioned,
    /// Ellipse confidence outside (0, 1).
    InvalidConfidence,
}

impl fmt::Display for UncertaintyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UncertaintyError::DegenerateGeometry => {
                write!(f, "estimate coincides with an SLB position")
            }
            UncertaintyError::IllConditioned => write!(f, "Fisher matrix is ill-conditioned"),
            UncertaintyError::InvalidConfidence => {
                write!(f, "confidence level must lie in (0, 1)")
            }
        }
    }
}

impl core::error::Error for UncertaintyError {}

/// Fisher information of the range set about the solved position `p_star`.
/// Positions are horizontal (east/north); `down` is ignored.
pub fn fisher_information(
    p_star: &NedPoint,
    slbs: &[NedPoint],
    noise_variance_m2: f64,
) -> Result<Sym2, UncertaintyError> {
    let mut fim = Sym2::ZERO;
    for slb in slbs {
        let dx = p_star.east_m - slb.east_m;
        let dy = p_star.north_m - slb.north_m;
        let r2 = dx * dx + dy * dy;
        if r2 == 0.0 {
            return Err(UncertaintyError::DegenerateGeometry);
        }
        fim.xx += dx * dx / r2;
        fim.xy += dx * dy / r2;
        fim.yy += dy * dy / r2;
    }
    fim.xx /= noise_variance_m2;
    fim.xy /= noise_variance_m2;
    fim.yy /= noise_variance_m2;
    Ok(fim)
}

/// CRLB standard deviations (σx, σy) from the Fisher matrix, or
/// `IllConditioned` when the geometry does not support an estimate.
pub fn crlb_sigmas(fim: &Sym2, condition_limit: f64) -> Result<(f64, f64), UncertaintyError> {
    let (major, minor) = fim.eigenvalues();
    if minor <= 0.0 || major / minor > condition_limit {
        return Err(UncertaintyError::IllConditioned);
    }
    let cov = fim.inverse().ok_or(UncertaintyError::IllConditioned)?;
    Ok((sqrt(cov.xx), sqrt(cov.yy)))
}

/// Default confidence level for presentation ellipses. The accept/reject
/// filter uses the raw sigmas, never this.
pub const DEFAULT_ELLIPSE_CONFIDENCE: f64 = 0.95;

/// Confidence ellipse of the position estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEllipse {
    pub semi_major_m: f64,
    pub semi_minor_m: f64,
    /// Angle of the major axis from the +x (east) axis, radians.
    pub orientation_rad: f64,
}

/// Ellipse axes from the eigen-decomposition of Cov = F⁻¹, scaled by the
/// two-degree-of-freedom chi-square quantile at `confidence`.
pub fn uncertainty_ellipse(
    fim: &Sym2,
    confidence: f64,
    condition_limit: f64,
) -> Result<ErrorEllipse, UncertaintyError> {
    if !(0.0..1.0).contains(&confidence) || confidence == 0.0 {
        return Err(UncertaintyError::InvalidConfidence);
    }
    let (major, minor) = fim.eigenvalues();
    if minor <= 0.0 || major / minor > condition_limit {
        return Err(UncertaintyError::IllConditioned);
    }
    let cov = fim.inverse().ok_or(UncertaintyError::IllConditioned)?;
    let (lambda_major, lambda_minor) = cov.eigenvalues();

    // Eigenvector of Cov for its larger eigenvalue.
    let orientation = if cov.xy.abs() > 0.0 {
        atan2(lambda_major - cov.xx, cov.xy)
    } else if cov.xx >= cov.yy {
        0.0
    } else {
        core::f64::consts::FRAC_PI_2
    };

    // Chi-square quantile with 2 DoF has the closed form −2 ln(1 − p).
    let scale = -2.0 * log(1.0 - confidence);
    Ok(ErrorEllipse {
        semi_major_m: sqrt(lambda_major * scale),
        semi_minor_m: sqrt(lambda_minor * scale),
        orientation_rad: orientation,
    })
}

/// How a position was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizationMethod {
    Tof,
    Tdoa,
}

impl fmt::Display for LocalizationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalizationMethod::Tof => f.write_str("ToF"),
            LocalizationMethod::Tdoa => f.write_str("TDoA"),
        }
    }
}

/// First filter condition an estimate failed, in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    None,
    Cost,
    Crlb,
    IllConditioned,
    NotConverged,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::None => "none",
            RejectReason::Cost => "cost",
            RejectReason::Crlb => "crlb",
            RejectReason::IllConditioned => "ill-conditioned",
            RejectReason::NotConverged => "not-converged",
        };
        f.write_str(s)
    }
}

/// One solved float position with its quality measures and filter verdict.
#[derive(Debug, Clone, Copy)]
pub struct PositionEstimate {
    pub device: DeviceId,
    pub group_id: u32,
    /// Mean member send time (ToF) or mean arrival time (TDoA), epoch s.
    pub t_center: f64,
    pub position: GeodeticPoint,
    pub position_ned: NedPoint,
    pub cost_m2: f64,
    /// None when the Fisher matrix was ill-conditioned.
    pub sigma_x_m: Option<f64>,
    pub sigma_y_m: Option<f64>,
    pub n_slbs: u32,
    pub method: LocalizationMethod,
    pub converged: bool,
    pub accepted: bool,
    pub reject_reason: RejectReason,
}

/// Applies the acceptance filter: accepted iff the solve converged, the
/// geometry was well-conditioned, cost ≤ τ_cost, and both σ ≤ τ_crlb
/// (inclusive thresholds). Only the verdict fields change; the position is
/// never altered — filtering is selection, not smoothing.
pub fn apply_filter(mut estimate: PositionEstimate, cfg: &CrlbConfig) -> PositionEstimate {
    let (accepted, reason) = match (estimate.sigma_x_m, estimate.sigma_y_m) {
        (None, _) | (_, None) => (false, RejectReason::IllConditioned),
        (Some(sx), Some(sy)) => {
            if !estimate.converged {
                (false, RejectReason::NotConverged)
            } else if estimate.cost_m2 > cfg.tau_cost_m2 {
                (false, RejectReason::Cost)
            } else if sx > cfg.tau_crlb_m || sy > cfg.tau_crlb_m {
                (false, RejectReason::Crlb)
            } else {
                (true, RejectReason::None)
            }
        }
    };
    estimate.accepted = accepted;
    estimate.reject_reason = reason;
    estimate
}
