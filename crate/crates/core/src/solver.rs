//! Position solving: nonlinear least-squares trilateration of a ping group
//! and TDoA multilateration for transmit-only targets.
//!
//! Both objectives are minimized with a derivative-free Nelder-Mead simplex
//! in 2D (east, north). The problems are two-dimensional with a handful of
//! residual terms, so a simplex search converges in tens of iterations and
//! needs no gradients. Degenerate geometry (collinear SLBs) is not rejected
//! here; it surfaces as an ill-conditioned Fisher matrix downstream.

use alloc::vec::Vec;
use core::fmt;

use libm::sqrt;

use crate::geo::{GeodeticPoint, NedPoint};
use crate::types::{DeviceId, DiveRiseFixes};

/// Convergence controls for the simplex search.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Converged when the simplex spans at most this many meters...
    pub step_tolerance_m: f64,
    /// ...and the objective spread across vertices is below this.
    pub cost_tolerance: f64,
    pub max_iterations: u32,
    /// Edge length of the initial simplex, meters.
    pub initial_step_m: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_tolerance_m: 1e-6,
            cost_tolerance: 1e-9,
            max_iterations: 2000,
            initial_step_m: 10.0,
        }
    }
}

/// A solved 2D position with the residual of the fit.
#[derive(Debug, Clone, Copy)]
pub struct SolveResult {
    /// Solved position. `down_m` is 0 here; the pipeline fills in the
    /// target's interpolated depth.
    pub position_ned: NedPoint,
    /// Final objective value (sum of squared residuals), m².
    pub cost_m2: f64,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverError {
    InsufficientData { needed: usize, got: usize },
    NonFiniteObjective,
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::InsufficientData { needed, got } => {
                write!(f, "need at least {needed} measurements, got {got}")
            }
            SolverError::NonFiniteObjective => write!(f, "objective is not finite"),
        }
    }
}

impl core::error::Error for SolverError {}

/// One SLB position with its horizontal range to the target.
#[derive(Debug, Clone, Copy)]
pub struct RangeAnchor {
    pub position: NedPoint,
    pub d_horizontal_m: f64,
}

/// One reception of the target's ping at an SLB, for TDoA solving.
#[derive(Debug, Clone, Copy)]
pub struct TdoaArrival {
    pub slb: DeviceId,
    /// SLB position at its receive time.
    pub position: NedPoint,
    pub t_arrival_utc: f64,
}

/// Time-based linear interpolation between a float's dive and rise GPS
/// fixes; times outside the dive window clamp to the nearer endpoint.
pub fn initial_guess(fixes: &DiveRiseFixes, t: f64) -> GeodeticPoint {
    let t0 = fixes.dive.timestamp_utc;
    let t1 = fixes.rise.timestamp_utc;
    let fraction = if t <= t0 {
        0.0
    } else if t >= t1 {
        1.0
    } else {
        (t - t0) / (t1 - t0)
    };
    fixes.dive.position.lerp(&fixes.rise.position, fraction)
}

/// Minimizes Σᵢ (‖p − pᵢ‖ − dᵢ)² over 2D positions p.
pub fn trilaterate(
    anchors: &[RangeAnchor],
    guess: &NedPoint,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    if anchors.len() < 3 {
        return Err(SolverError::InsufficientData {
            needed: 3,
            got: anchors.len(),
        });
    }
    let objective = |east: f64, north: f64| {
        let mut cost = 0.0;
        for a in anchors {
            let de = east - a.position.east_m;
            let dn = north - a.position.north_m;
            let r = sqrt(de * de + dn * dn) - a.d_horizontal_m;
            cost += r * r;
        }
        cost
    };
    nelder_mead(objective, (guess.east_m, guess.north_m), cfg)
}

/// TDoA multilateration against the earliest-arrival reference SLB.
///
/// Range differences Δdᵢ = c·(tᵢ − t_ref) drive the objective
/// Σᵢ (‖p − pᵢ‖ − ‖p − p_ref‖ − Δdᵢ)², minimized from the centroid of the
/// SLB positions. An arrival-time tie for the reference resolves to the
/// lower device id so runs are deterministic.
pub fn tdoa_localize(
    arrivals: &[TdoaArrival],
    sound_speed_mps: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    if arrivals.len() < 3 {
        return Err(SolverError::InsufficientData {
            needed: 3,
            got: arrivals.len(),
        });
    }
    let reference = arrivals
        .iter()
        .min_by(|a, b| {
            a.t_arrival_utc
                .total_cmp(&b.t_arrival_utc)
                .then(a.slb.cmp(&b.slb))
        })
        .expect("non-empty");

    let others: Vec<(NedPoint, f64)> = arrivals
        .iter()
        .filter(|a| a.slb != reference.slb)
        .map(|a| {
            (
                a.position,
                sound_speed_mps * (a.t_arrival_utc - reference.t_arrival_utc),
            )
        })
        .collect();

    let centroid_east =
        arrivals.iter().map(|a| a.position.east_m).sum::<f64>() / arrivals.len() as f64;
    let centroid_north =
        arrivals.iter().map(|a| a.position.north_m).sum::<f64>() / arrivals.len() as f64;

    let ref_pos = reference.position;
    let objective = |east: f64, north: f64| {
        let de0 = east - ref_pos.east_m;
        let dn0 = north - ref_pos.north_m;
        let r0 = sqrt(de0 * de0 + dn0 * dn0);
        let mut cost = 0.0;
        for (pos, delta_d) in &others {
            let de = east - pos.east_m;
            let dn = north - pos.north_m;
            let r = sqrt(de * de + dn * dn) - r0 - delta_d;
            cost += r * r;
        }
        cost
    };
    nelder_mead(objective, (centroid_east, centroid_north), cfg)
}

/// Standard Nelder-Mead on a 2D objective: reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5. Returns the best vertex, which never
/// exceeds the objective at the start point.
fn nelder_mead(
    f: impl Fn(f64, f64) -> f64,
    start: (f64, f64),
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const BETA: f64 = 0.5;
    const SIGMA: f64 = 0.5;

    let eval = |p: (f64, f64)| -> Result<f64, SolverError> {
        let v = f(p.0, p.1);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolverError::NonFiniteObjective)
        }
    };

    let step = cfg.initial_step_m;
    let mut simplex = [start, (start.0 + step, start.1), (start.0, start.1 + step)];
    let mut values = [eval(simplex[0])?, eval(simplex[1])?, eval(simplex[2])?];

    let mut iterations = 0u32;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        // Order: best, middle, worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, mid, worst) = (order[0], order[1], order[2]);

        let span = |a: (f64, f64), b: (f64, f64)| {
            let dx = (a.0 - b.0).abs();
            let dy = (a.1 - b.1).abs();
            if dx > dy {
                dx
            } else {
                dy
            }
        };
        let size = span(simplex[mid], simplex[best]).max(span(simplex[worst], simplex[best]));
        if size <= cfg.step_tolerance_m && values[worst] - values[best] <= cfg.cost_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid = (
            (simplex[best].0 + simplex[mid].0) / 2.0,
            (simplex[best].1 + simplex[mid].1) / 2.0,
        );
        let reflect = (
            centroid.0 + ALPHA * (centroid.0 - simplex[worst].0),
            centroid.1 + ALPHA * (centroid.1 - simplex[worst].1),
        );
        let f_reflect = eval(reflect)?;

        if f_reflect < values[best] {
            let expand = (
                centroid.0 + GAMMA * (centroid.0 - simplex[worst].0),
                centroid.1 + GAMMA * (centroid.1 - simplex[worst].1),
            );
            let f_expand = eval(expand)?;
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[mid] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else if f_reflect < values[worst] {
            // Outside contraction.
            let contract = (
                centroid.0 + BETA * (reflect.0 - centroid.0),
                centroid.1 + BETA * (reflect.1 - centroid.1),
            );
            let f_contract = eval(contract)?;
            if f_contract <= f_reflect {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                shrink(&mut simplex, &mut values, best, SIGMA, &eval)?;
            }
        } else {
            // Inside contraction.
            let contract = (
                centroid.0 + BETA * (simplex[worst].0 - centroid.0),
                centroid.1 + BETA * (simplex[worst].1 - centroid.1),
            );
            let f_contract = eval(contract)?;
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                shrink(&mut simplex, &mut values, best, SIGMA, &eval)?;
            }
        }
    }

    let best = (0..3)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    Ok(SolveResult {
        position_ned: NedPoint::new(simplex[best].1, simplex[best].0, 0.0),
        cost_m2: values[best],
        iterations,
        converged,
    })
}

fn shrink(
    simplex: &mut [(f64, f64); 3],
    values: &mut [f64; 3],
    best: usize,
    sigma: f64,
    eval: &impl Fn((f64, f64)) -> Result<f64, SolverError>,
) -> Result<(), SolverError> {
    for i in 0..3 {
        if i == best {
            continue;
        }
        simplex[i] = (
            simplex[best].0 + sigma * (simplex[i].0 - simplex[best].0),
            simplex[best].1 + sigma * (simplex[i].1 - simplex[best].1),
        );
        values[i] = eval(simplex[i])?;
    }
    Ok(())
}
