//! Run outputs: estimates CSV, trajectory GeoJSON, and the plain-text
//! report.

use std::fmt::Write as _;

use serde_json::json;

use driftloc_core::geo::{GeodeticPoint, NedPoint};
use driftloc_core::types::DeviceId;
use driftloc_core::uncertainty::{LocalizationMethod, PositionEstimate, RejectReason};

use crate::ingest::{format_timestamp_utc, parse_timestamp_utc, IngestError};
use crate::pipeline::Diagnostics;
use crate::sim::ErrorStats;

pub const ESTIMATES_HEADER: &str = "device_id,group_id,t_center_iso8601,lat_deg,lon_deg,east_m,\
north_m,cost_m2,sigma_x_m,sigma_y_m,n_slbs,method,accepted,reject_reason";

fn format_sigma(sigma: Option<f64>) -> String {
    match sigma {
        Some(s) => format!("{s:.6}"),
        None => String::new(),
    }
}

pub fn write_estimates_csv(estimates: &[PositionEstimate]) -> String {
    let mut out = String::new();
    out.push_str(ESTIMATES_HEADER);
    out.push('\n');
    for e in estimates {
        let _ = writeln!(
            out,
            "{},{},{},{:.9},{:.9},{:.6},{:.6},{:.6},{},{},{},{},{},{}",
            e.device,
            e.group_id,
            format_timestamp_utc(e.t_center),
            e.position.latitude_deg,
            e.position.longitude_deg,
            e.position_ned.east_m,
            e.position_ned.north_m,
            e.cost_m2,
            format_sigma(e.sigma_x_m),
            format_sigma(e.sigma_y_m),
            e.n_slbs,
            e.method,
            e.accepted,
            e.reject_reason,
        );
    }
    out
}

pub fn parse_estimates_csv(text: &str, path: &str) -> Result<Vec<PositionEstimate>, IngestError> {
    let mut estimates = Vec::new();
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
    if header != ESTIMATES_HEADER {
        return Err(IngestError::Header {
            path: path.to_string(),
            expected: ESTIMATES_HEADER,
            found: header.to_string(),
        });
    }
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx as u64 + 1;
        let row_err = |message: String| IngestError::Row {
            path: path.to_string(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 14 {
            return Err(row_err(format!(
                "expected 14 fields, found {}",
                fields.len()
            )));
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64, IngestError> {
            s.parse::<f64>()
                .map_err(|_| row_err(format!("bad {what} `{s}`")))
        };
        let sigma = |s: &str| -> Result<Option<f64>, IngestError> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_f64(s, "sigma")?))
            }
        };
        let method = match fields[11] {
            "ToF" => LocalizationMethod::Tof,
            "TDoA" => LocalizationMethod::Tdoa,
            other => return Err(row_err(format!("bad method `{other}`"))),
        };
        let reject_reason = match fields[13] {
            "none" => RejectReason::None,
            "cost" => RejectReason::Cost,
            "crlb" => RejectReason::Crlb,
            "ill-conditioned" => RejectReason::IllConditioned,
            "not-converged" => RejectReason::NotConverged,
            other => return Err(row_err(format!("bad reject reason `{other}`"))),
        };
        let accepted = match fields[12] {
            "true" => true,
            "false" => false,
            other => return Err(row_err(format!("bad accepted flag `{other}`"))),
        };
        let position = GeodeticPoint::new(
            parse_f64(fields[3], "latitude")?,
            parse_f64(fields[4], "longitude")?,
            0.0,
        )
        .map_err(|e| row_err(e.to_string()))?;

        estimates.push(PositionEstimate {
            device: fields[0]
                .parse::<u16>()
                .map(DeviceId)
                .map_err(|_| row_err(format!("bad device id `{}`", fields[0])))?,
            group_id: fields[1]
                .parse::<u32>()
                .map_err(|_| row_err(format!("bad group id `{}`", fields[1])))?,
            t_center: parse_timestamp_utc(fields[2]).map_err(&row_err)?,
            position,
            position_ned: NedPoint::new(
                parse_f64(fields[6], "north")?,
                parse_f64(fields[5], "east")?,
                0.0,
            ),
            cost_m2: parse_f64(fields[7], "cost")?,
            sigma_x_m: sigma(fields[8])?,
            sigma_y_m: sigma(fields[9])?,
            n_slbs: fields[10]
                .parse::<u32>()
                .map_err(|_| row_err(format!("bad n_slbs `{}`", fields[10])))?,
            method,
            converged: reject_reason != RejectReason::NotConverged,
            accepted,
            reject_reason,
        });
    }
    Ok(estimates)
}

/// One LineString per device over its accepted estimates, with per-point
/// times and CRLB sigmas carried in the feature properties. Devices with
/// fewer than two accepted points are skipped (a LineString needs two).
pub fn trajectories_geojson(estimates: &[PositionEstimate]) -> serde_json::Value {
    let mut devices: Vec<DeviceId> = estimates.iter().map(|e| e.device).collect();
    devices.sort();
    devices.dedup();

    let mut features = Vec::new();
    for device in devices {
        let accepted: Vec<&PositionEstimate> = estimates
            .iter()
            .filter(|e| e.device == device && e.accepted)
            .collect();
        if accepted.len() < 2 {
            continue;
        }
        let coordinates: Vec<serde_json::Value> = accepted
            .iter()
            .map(|e| json!([e.position.longitude_deg, e.position.latitude_deg]))
            .collect();
        let times: Vec<serde_json::Value> = accepted
            .iter()
            .map(|e| json!(format_timestamp_utc(e.t_center)))
            .collect();
        let sigma_x: Vec<serde_json::Value> = accepted.iter().map(|e| json!(e.sigma_x_m)).collect();
        let sigma_y: Vec<serde_json::Value> = accepted.iter().map(|e| json!(e.sigma_y_m)).collect();
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": coordinates,
            },
            "properties": {
                "device_id": device.0,
                "point_count": accepted.len(),
                "t_center": times,
                "sigma_x_m": sigma_x,
                "sigma_y_m": sigma_y,
            },
        }));
    }
    json!({
        "type": "FeatureCollection",
        "features": features,
    })
}

/// Plain-text stage diagnostics, plus error statistics when truth was
/// available.
pub fn render_report(mode: &str, diagnostics: &Diagnostics, stats: Option<&ErrorStats>) -> String {
    let mut out = String::new();
    let d = diagnostics;
    let _ = writeln!(out, "driftloc run report (mode: {mode})");
    let _ = writeln!(out, "===================================");
    let _ = writeln!(out, "receive records considered : {}", d.receive_records);
    let _ = writeln!(out, "matched pairs              : {}", d.matched_pairs);
    let _ = writeln!(
        out,
        "unmatched receives         : {}  (no-match)",
        d.unmatched_receives
    );
    let _ = writeln!(
        out,
        "dropped: non-positive tof  : {}",
        d.dropped_non_positive_tof
    );
    let _ = writeln!(out, "dropped: track gap         : {}", d.dropped_track_gap);
    let _ = writeln!(out, "dropped: depth gap         : {}", d.dropped_depth_gap);
    let _ = writeln!(
        out,
        "dropped: invalid depth discriminant : {}",
        d.dropped_invalid_depth_discriminant
    );
    let _ = writeln!(out, "dropped: range rate        : {}", d.dropped_range_rate);
    let _ = writeln!(out, "surviving measurements     : {}", d.measurements);
    if d.tdoa_arrivals > 0 {
        let _ = writeln!(out, "tdoa arrivals              : {}", d.tdoa_arrivals);
    }
    let _ = writeln!(out, "groups                     : {}", d.groups);
    let _ = writeln!(out, "estimates                  : {}", d.estimates);
    let _ = writeln!(out, "  accepted                 : {}", d.accepted);
    let _ = writeln!(out, "  rejected: cost           : {}", d.rejected_cost);
    let _ = writeln!(out, "  rejected: crlb           : {}", d.rejected_crlb);
    let _ = writeln!(
        out,
        "  rejected: ill-conditioned: {}",
        d.rejected_ill_conditioned
    );
    let _ = writeln!(
        out,
        "  rejected: not converged  : {}",
        d.rejected_not_converged
    );
    if d.estimates > 0 {
        let rate = 100.0 * d.accepted as f64 / d.estimates as f64;
        let _ = writeln!(out, "acceptance rate            : {rate:.1}%");
    }

    if let Some(stats) = stats {
        let _ = writeln!(out);
        let _ = writeln!(out, "error statistics vs truth (meters)");
        let _ = writeln!(out, "----------------------------------");
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>9} {:>9} {:>9} {:>9}",
            "device", "n", "mean", "median", "max", "min"
        );
        let mut row = |label: String, m: &crate::sim::Metrics| {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
                label, m.count, m.mean_m, m.median_m, m.max_m, m.min_m
            );
        };
        for (device, s) in &stats.per_device {
            row(format!("{device} all"), &s.unfiltered);
            row(format!("{device} acc"), &s.filtered);
        }
        row("total all".to_string(), &stats.aggregate.unfiltered);
        row("total acc".to_string(), &stats.aggregate.filtered);
    }
    out
}
