//! Device log parsing and serialization.
//!
//! Four CSV schemas, all timestamps ISO-8601 UTC (millisecond resolution or
//! finer; this crate writes microseconds):
//!
//! * ping log, one file per device:
//!   `device_id,direction,peer_id,timestamp_utc_iso8601` with direction
//!   `SENT` or `RECV` (for `SENT`, `peer_id` equals `device_id`)
//! * GPS log: `device_id,timestamp_utc_iso8601,lat_deg,lon_deg`
//! * depth log: `device_id,timestamp_utc_iso8601,depth_m`
//! * dive/rise fixes:
//!   `device_id,dive_time,dive_lat,dive_lon,rise_time,rise_lat,rise_lon`
//!
//! Writing then re-parsing a log is lossless row-for-row.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use thiserror::Error;

use driftloc_core::geo::GeodeticPoint;
use driftloc_core::track::{DepthSeries, GpsTrack};
use driftloc_core::types::{
    DepthSample, DeviceId, DiveRiseFixes, GpsFix, PingDirection, PingRecord,
};

pub const PING_HEADER: &str = "device_id,direction,peer_id,timestamp_utc_iso8601";
pub const GPS_HEADER: &str = "device_id,timestamp_utc_iso8601,lat_deg,lon_deg";
pub const DEPTH_HEADER: &str = "device_id,timestamp_utc_iso8601,depth_m";
pub const DIVE_RISE_HEADER: &str =
    "device_id,dive_time,dive_lat,dive_lon,rise_time,rise_lat,rise_lon";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("{path} line {line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },
    #[error("no usable log files found in {0}")]
    EmptyDirectory(String),
}

/// Parses an ISO-8601 / RFC 3339 UTC timestamp into epoch seconds.
pub fn parse_timestamp_utc(s: &str) -> Result<f64, String> {
    let dt = DateTime::parse_from_rfc3339(s).map_err(|e| format!("bad timestamp `{s}`: {e}"))?;
    let utc = dt.with_timezone(&Utc);
    Ok(utc.timestamp() as f64 + utc.timestamp_subsec_nanos() as f64 * 1e-9)
}

/// Formats epoch seconds as ISO-8601 UTC with microsecond precision.
///
/// The fractional part is split off before scaling (the subtraction is
/// exact for epoch-scale values), so the microsecond field is the correctly
/// rounded one rather than suffering double rounding through `t * 1e6`.
pub fn format_timestamp_utc(t: f64) -> String {
    let mut secs = t.floor() as i64;
    let mut micros = ((t - t.floor()) * 1e6).round() as i64;
    if micros == 1_000_000 {
        secs += 1;
        micros = 0;
    }
    let dt = Utc
        .timestamp_opt(secs, micros as u32 * 1000)
        .single()
        .expect("valid epoch timestamp");
    dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string()
}

/// Ping records plus warnings for recoverable oddities (out-of-order
/// timestamps within one device/direction stream).
#[derive(Debug, Default)]
pub struct ParsedPings {
    pub records: Vec<PingRecord>,
    pub warnings: Vec<String>,
}

struct RowReader<'a> {
    path: &'a str,
    expected: &'static str,
}

impl<'a> RowReader<'a> {
    fn read(
        &self,
        text: &str,
        n_fields: usize,
        mut row: impl FnMut(u64, &[&str]) -> Result<(), String>,
    ) -> Result<(), IngestError> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
        if header != self.expected {
            return Err(IngestError::Header {
                path: self.path.to_string(),
                expected: self.expected,
                found: header.to_string(),
            });
        }
        for (idx, line) in lines {
            let line_no = idx as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != n_fields {
                return Err(IngestError::Row {
                    path: self.path.to_string(),
                    line: line_no,
                    message: format!("expected {n_fields} fields, found {}", fields.len()),
                });
            }
            row(line_no, &fields).map_err(|message| IngestError::Row {
                path: self.path.to_string(),
                line: line_no,
                message,
            })?;
        }
        Ok(())
    }
}

fn parse_device(s: &str) -> Result<DeviceId, String> {
    s.parse::<u16>()
        .map(DeviceId)
        .map_err(|_| format!("bad device id `{s}`"))
}

fn parse_float(s: &str, what: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("bad {what} `{s}`"))
}

/// Parses one ping log. Records come back sorted by timestamp; rows that
/// break per-stream monotonicity are kept and reported as warnings.
pub fn parse_ping_log(text: &str, path: &str) -> Result<ParsedPings, IngestError> {
    let mut parsed = ParsedPings::default();
    let reader = RowReader {
        path,
        expected: PING_HEADER,
    };
    let mut last_seen: BTreeMap<(DeviceId, PingDirection), f64> = BTreeMap::new();
    reader.read(text, 4, |line, fields| {
        let device = parse_device(fields[0])?;
        let direction = match fields[1] {
            "SENT" => PingDirection::Sent,
            "RECV" => PingDirection::Received,
            other => return Err(format!("bad direction `{other}` (expected SENT or RECV)")),
        };
        let peer = parse_device(fields[2])?;
        if direction == PingDirection::Sent && peer != device {
            return Err(format!(
                "SENT row must have peer_id equal to device_id (got {peer} vs {device})"
            ));
        }
        let timestamp_utc = parse_timestamp_utc(fields[3])?;
        if let Some(&prev) = last_seen.get(&(device, direction)) {
            if timestamp_utc < prev {
                parsed.warnings.push(format!(
                    "{path} line {line}: timestamp goes backwards for device {device} ({} < {})",
                    format_timestamp_utc(timestamp_utc),
                    format_timestamp_utc(prev),
                ));
            }
        }
        last_seen.insert((device, direction), timestamp_utc);
        parsed.records.push(PingRecord {
            device,
            direction,
            peer,
            timestamp_utc,
        });
        Ok(())
    })?;
    parsed.records.sort_by(|a, b| {
        a.timestamp_utc
            .total_cmp(&b.timestamp_utc)
            .then(a.device.cmp(&b.device))
            .then(a.direction.cmp(&b.direction))
            .then(a.peer.cmp(&b.peer))
    });
    Ok(parsed)
}

pub fn write_ping_log(records: &[PingRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(PING_HEADER);
    out.push('\n');
    for r in records {
        let dir = match r.direction {
            PingDirection::Sent => "SENT",
            PingDirection::Received => "RECV",
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.device,
            dir,
            r.peer,
            format_timestamp_utc(r.timestamp_utc)
        );
    }
    out
}

pub fn parse_gps_log(text: &str, path: &str) -> Result<Vec<GpsFix>, IngestError> {
    let mut fixes = Vec::new();
    let reader = RowReader {
        path,
        expected: GPS_HEADER,
    };
    reader.read(text, 4, |_, fields| {
        let device = parse_device(fields[0])?;
        let timestamp_utc = parse_timestamp_utc(fields[1])?;
        let lat = parse_float(fields[2], "latitude")?;
        let lon = parse_float(fields[3], "longitude")?;
        let position = GeodeticPoint::new(lat, lon, 0.0).map_err(|e| e.to_string())?;
        fixes.push(GpsFix {
            device,
            timestamp_utc,
            position,
        });
        Ok(())
    })?;
    Ok(fixes)
}

pub fn write_gps_log(fixes: &[GpsFix]) -> String {
    let mut out = String::with_capacity(48 * (fixes.len() + 1));
    out.push_str(GPS_HEADER);
    out.push('\n');
    for f in fixes {
        let _ = writeln!(
            out,
            "{},{},{:.9},{:.9}",
            f.device,
            format_timestamp_utc(f.timestamp_utc),
            f.position.latitude_deg,
            f.position.longitude_deg
        );
    }
    out
}

pub fn parse_depth_log(text: &str, path: &str) -> Result<Vec<DepthSample>, IngestError> {
    let mut samples = Vec::new();
    let reader = RowReader {
        path,
        expected: DEPTH_HEADER,
    };
    reader.read(text, 3, |_, fields| {
        let device = parse_device(fields[0])?;
        let timestamp_utc = parse_timestamp_utc(fields[1])?;
        let depth_m = parse_float(fields[2], "depth")?;
        if !depth_m.is_finite() || depth_m < 0.0 {
            return Err(format!(
                "depth must be finite and non-negative, got {depth_m}"
            ));
        }
        samples.push(DepthSample {
            device,
            timestamp_utc,
            depth_m,
        });
        Ok(())
    })?;
    Ok(samples)
}

pub fn write_depth_log(samples: &[DepthSample]) -> String {
    let mut out = String::with_capacity(40 * (samples.len() + 1));
    out.push_str(DEPTH_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{:.6}",
            s.device,
            format_timestamp_utc(s.timestamp_utc),
            s.depth_m
        );
    }
    out
}

pub fn parse_dive_rise(text: &str, path: &str) -> Result<Vec<DiveRiseFixes>, IngestError> {
    let mut out = Vec::new();
    let reader = RowReader {
        path,
        expected: DIVE_RISE_HEADER,
    };
    reader.read(text, 7, |_, fields| {
        let device = parse_device(fields[0])?;
        let dive = GpsFix {
            device,
            timestamp_utc: parse_timestamp_utc(fields[1])?,
            position: GeodeticPoint::new(
                parse_float(fields[2], "dive latitude")?,
                parse_float(fields[3], "dive longitude")?,
                0.0,
            )
            .map_err(|e| e.to_string())?,
        };
        let rise = GpsFix {
            device,
            timestamp_utc: parse_timestamp_utc(fields[4])?,
            position: GeodeticPoint::new(
                parse_float(fields[5], "rise latitude")?,
                parse_float(fields[6], "rise longitude")?,
                0.0,
            )
            .map_err(|e| e.to_string())?,
        };
        out.push(DiveRiseFixes::new(device, dive, rise).map_err(|e| e.to_string())?);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_dive_rise(fixes: &[DiveRiseFixes]) -> String {
    let mut out = String::with_capacity(96 * (fixes.len() + 1));
    out.push_str(DIVE_RISE_HEADER);
    out.push('\n');
    for f in fixes {
        let _ = writeln!(
            out,
            "{},{},{:.9},{:.9},{},{:.9},{:.9}",
            f.device,
            format_timestamp_utc(f.dive.timestamp_utc),
            f.dive.position.latitude_deg,
            f.dive.position.longitude_deg,
            format_timestamp_utc(f.rise.timestamp_utc),
            f.rise.position.latitude_deg,
            f.rise.position.longitude_deg
        );
    }
    out
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    let mut text = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(text)
}

fn csv_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, IngestError> {
    let entries = fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads and merges every ping log CSV in a directory.
pub fn load_ping_dir(dir: &Path) -> Result<ParsedPings, IngestError> {
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(IngestError::EmptyDirectory(dir.display().to_string()));
    }
    let mut merged = ParsedPings::default();
    for path in files {
        let text = read_file(&path)?;
        let parsed = parse_ping_log(&text, &path.display().to_string())?;
        merged.records.extend(parsed.records);
        merged.warnings.extend(parsed.warnings);
    }
    merged.records.sort_by(|a, b| {
        a.timestamp_utc
            .total_cmp(&b.timestamp_utc)
            .then(a.device.cmp(&b.device))
            .then(a.direction.cmp(&b.direction))
    });
    Ok(merged)
}

/// GPS tracks and dive/rise fixes found in a directory. Files are
/// classified by header, so `gps.csv` and `dive_rise.csv` can share the
/// directory.
#[derive(Debug, Default)]
pub struct GpsData {
    pub tracks: BTreeMap<DeviceId, GpsTrack>,
    pub dive_rise: BTreeMap<DeviceId, DiveRiseFixes>,
}

pub fn load_gps_dir(dir: &Path) -> Result<GpsData, IngestError> {
    let mut fixes_by_device: BTreeMap<DeviceId, Vec<GpsFix>> = BTreeMap::new();
    let mut data = GpsData::default();
    for path in csv_files(dir)? {
        let text = read_file(&path)?;
        let header = text.lines().next().unwrap_or("").trim_end();
        let name = path.display().to_string();
        if header == DIVE_RISE_HEADER {
            for dr in parse_dive_rise(&text, &name)? {
                data.dive_rise.insert(dr.device, dr);
            }
        } else {
            for fix in parse_gps_log(&text, &name)? {
                fixes_by_device.entry(fix.device).or_default().push(fix);
            }
        }
    }
    for (device, fixes) in fixes_by_device {
        // Non-empty by construction.
        let track = GpsTrack::new(device, fixes).expect("fixes present");
        data.tracks.insert(device, track);
    }
    Ok(data)
}

pub fn load_depth_dir(dir: &Path) -> Result<BTreeMap<DeviceId, DepthSeries>, IngestError> {
    let mut by_device: BTreeMap<DeviceId, Vec<DepthSample>> = BTreeMap::new();
    for path in csv_files(dir)? {
        let text = read_file(&path)?;
        for s in parse_depth_log(&text, &path.display().to_string())? {
            by_device.entry(s.device).or_default().push(s);
        }
    }
    Ok(by_device
        .into_iter()
        .map(|(device, samples)| {
            let series = DepthSeries::new(device, samples).expect("samples present");
            (device, series)
        })
        .collect())
}
