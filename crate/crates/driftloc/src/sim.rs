//! Synthetic-deployment simulator with known ground truth.
//!
//! Generates drifting SLB tracks, float trajectories with staircase depth
//! profiles, a round-robin TDMA ping schedule, and acoustic receptions
//! corrupted by configurable range noise, multipath, and dropouts. Output
//! uses the exact ingest CSV schemas, so a simulated deployment is
//! indistinguishable from a recovered one. Identical seeds produce
//! byte-identical logs.
//!
//! Ground truth is a 1 Hz waypoint table per device; the continuous truth
//! trajectory is defined as its linear interpolation, and the same
//! interpolation feeds the acoustic event geometry. A noise-free scenario
//! therefore round-trips through the pipeline exactly (up to solver
//! tolerance and the microsecond timestamp resolution of the logs).
//!
//! Multipath is modeled as pair-level episodes rather than independent
//! per-reception spikes: while a device pair is in an episode, every
//! reception on that pair carries a slowly varying extra delay. Episode
//! entry is a Poisson process tuned so the long-run fraction of affected
//! receptions matches `multipath_probability`, and pairs may already be in
//! an episode at deployment start. This reproduces the sustained false
//! trajectories that motivate the cost/CRLB filter; isolated spikes would
//! already be caught by the range-rate check.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use driftloc_core::geo::{self, GeodeticPoint, NedPoint, ReferenceOrigin};
use driftloc_core::track::GpsTrack;
use driftloc_core::types::{
    DepthSample, DeviceId, DiveRiseFixes, GpsFix, PingDirection, PingRecord,
};
use driftloc_core::uncertainty::PositionEstimate;

use crate::config::ScenarioConfig;
use crate::ingest::{
    self, format_timestamp_utc, parse_timestamp_utc, write_depth_log, write_dive_rise,
    write_gps_log, write_ping_log,
};

/// First float id; SLBs are numbered from 1.
pub const FIRST_FLOAT_ID: u16 = 31;

pub const TRUTH_HEADER: &str = "device_id,timestamp_utc_iso8601,lat_deg,lon_deg,depth_m";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{path}")]
    Io { path: String, source: io::Error },
}

/// One ground-truth sample of a device.
#[derive(Debug, Clone, Copy)]
pub struct TruthSample {
    pub timestamp_utc: f64,
    pub position: GeodeticPoint,
    pub depth_m: f64,
}

/// Per-device 1 Hz truth tables; continuous truth is their linear
/// interpolation, clamped at the ends.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub samples: BTreeMap<DeviceId, Vec<TruthSample>>,
}

impl GroundTruth {
    pub fn position_at(&self, device: DeviceId, t: f64) -> Option<TruthSample> {
        let series = self.samples.get(&device)?;
        let first = series.first()?;
        let last = series.last()?;
        if t <= first.timestamp_utc {
            return Some(*first);
        }
        if t >= last.timestamp_utc {
            return Some(*last);
        }
        let idx = series.partition_point(|s| s.timestamp_utc <= t);
        let (a, b) = (&series[idx - 1], &series[idx]);
        let f = (t - a.timestamp_utc) / (b.timestamp_utc - a.timestamp_utc);
        Some(TruthSample {
            timestamp_utc: t,
            position: a.position.lerp(&b.position, f),
            depth_m: a.depth_m * (1.0 - f) + b.depth_m * f,
        })
    }

    pub fn start(&self, device: DeviceId) -> Option<f64> {
        self.samples.get(&device)?.first().map(|s| s.timestamp_utc)
    }

    pub fn end(&self, device: DeviceId) -> Option<f64> {
        self.samples.get(&device)?.last().map(|s| s.timestamp_utc)
    }

    /// Truth table from a GPS track, for evaluating an SLB as if it were a
    /// target float at fixed transducer depth.
    pub fn from_gps_track(track: &GpsTrack, depth_m: f64) -> GroundTruth {
        let samples = track
            .fixes()
            .iter()
            .map(|f| TruthSample {
                timestamp_utc: f.timestamp_utc,
                position: f.position,
                depth_m,
            })
            .collect();
        let mut map = BTreeMap::new();
        map.insert(track.device(), samples);
        GroundTruth { samples: map }
    }
}

/// Everything one simulated deployment produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub slbs: Vec<DeviceId>,
    pub floats: Vec<DeviceId>,
    /// Per-device ping logs (sends and receptions), time-sorted.
    pub pings_by_device: BTreeMap<DeviceId, Vec<PingRecord>>,
    pub gps_fixes: Vec<GpsFix>,
    pub depth_samples: Vec<DepthSample>,
    pub dive_rise: Vec<DiveRiseFixes>,
    pub truth: GroundTruth,
}

impl SimOutput {
    /// All ping records merged and time-sorted, as the pipeline ingests
    /// them.
    pub fn all_pings(&self) -> Vec<PingRecord> {
        let mut records: Vec<PingRecord> = self
            .pings_by_device
            .values()
            .flat_map(|v| v.iter().copied())
            .collect();
        records.sort_by(|a, b| {
            a.timestamp_utc
                .total_cmp(&b.timestamp_utc)
                .then(a.device.cmp(&b.device))
                .then(a.direction.cmp(&b.direction))
        });
        records
    }

    /// Writes `pings/device_<id>.csv`, `gps/gps.csv`, `gps/dive_rise.csv`,
    /// `depth/depth.csv`, and `truth.csv` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SimError> {
        let write = |path: &Path, content: &str| -> Result<(), SimError> {
            fs::write(path, content).map_err(|source| SimError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let mkdir = |path: &Path| -> Result<(), SimError> {
            fs::create_dir_all(path).map_err(|source| SimError::Io {
                path: path.display().to_string(),
                source,
            })
        };

        let pings_dir = dir.join("pings");
        let gps_dir = dir.join("gps");
        let depth_dir = dir.join("depth");
        mkdir(&pings_dir)?;
        mkdir(&gps_dir)?;
        mkdir(&depth_dir)?;

        for (device, records) in &self.pings_by_device {
            write(
                &pings_dir.join(format!("device_{device}.csv")),
                &write_ping_log(records),
            )?;
        }
        write(&gps_dir.join("gps.csv"), &write_gps_log(&self.gps_fixes))?;
        write(
            &gps_dir.join("dive_rise.csv"),
            &write_dive_rise(&self.dive_rise),
        )?;
        write(
            &depth_dir.join("depth.csv"),
            &write_depth_log(&self.depth_samples),
        )?;
        write(&dir.join("truth.csv"), &write_truth_csv(&self.truth))?;
        Ok(())
    }
}

pub fn write_truth_csv(truth: &GroundTruth) -> String {
    let mut out = String::new();
    out.push_str(TRUTH_HEADER);
    out.push('\n');
    for (device, samples) in &truth.samples {
        for s in samples {
            let _ = writeln!(
                out,
                "{},{},{:.9},{:.9},{:.6}",
                device,
                format_timestamp_utc(s.timestamp_utc),
                s.position.latitude_deg,
                s.position.longitude_deg,
                s.depth_m
            );
        }
    }
    out
}

pub fn parse_truth_csv(text: &str, path: &str) -> Result<GroundTruth, ingest::IngestError> {
    use ingest::IngestError;
    let mut truth = GroundTruth::default();
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
    if header != TRUTH_HEADER {
        return Err(IngestError::Header {
            path: path.to_string(),
            expected: TRUTH_HEADER,
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
        if fields.len() != 5 {
            return Err(row_err(format!(
                "expected 5 fields, found {}",
                fields.len()
            )));
        }
        let device = fields[0]
            .parse::<u16>()
            .map(DeviceId)
            .map_err(|_| row_err(format!("bad device id `{}`", fields[0])))?;
        let timestamp_utc = parse_timestamp_utc(fields[1]).map_err(&row_err)?;
        let lat = fields[2]
            .parse::<f64>()
            .map_err(|_| row_err("bad latitude".into()))?;
        let lon = fields[3]
            .parse::<f64>()
            .map_err(|_| row_err("bad longitude".into()))?;
        let depth_m = fields[4]
            .parse::<f64>()
            .map_err(|_| row_err("bad depth".into()))?;
        let position = GeodeticPoint::new(lat, lon, 0.0).map_err(|e| row_err(e.to_string()))?;
        truth.samples.entry(device).or_default().push(TruthSample {
            timestamp_utc,
            position,
            depth_m,
        });
    }
    for samples in truth.samples.values_mut() {
        samples.sort_by(|a, b| a.timestamp_utc.total_cmp(&b.timestamp_utc));
    }
    Ok(truth)
}

// RNG stream ids; each subsystem draws from its own stream so that, for
// example, raising the noise level does not disturb the trajectories.
const STREAM_PLACEMENT: u64 = 1;
const STREAM_TRAJECTORY: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_MULTIPATH: u64 = 4;
const STREAM_DROPOUT: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Piecewise-linear lookup into a 1 Hz table, clamped at the ends.
fn lerp_table(table: &[(f64, f64)], t: f64) -> (f64, f64) {
    let n = table.len();
    if t <= 0.0 {
        return table[0];
    }
    let last = (n - 1) as f64;
    if t >= last {
        return table[n - 1];
    }
    let i = t as usize;
    let f = t - i as f64;
    let (e0, n0) = table[i];
    let (e1, n1) = table[i + 1];
    (e0 * (1.0 - f) + e1 * f, n0 * (1.0 - f) + n1 * f)
}

fn lerp_scalar(table: &[f64], t: f64) -> f64 {
    let n = table.len();
    if t <= 0.0 {
        return table[0];
    }
    let last = (n - 1) as f64;
    if t >= last {
        return table[n - 1];
    }
    let i = t as usize;
    let f = t - i as f64;
    table[i] * (1.0 - f) + table[i + 1] * f
}

struct Trajectories {
    /// Per device: (east, north) at 1 Hz from scenario start.
    horizontal: BTreeMap<DeviceId, Vec<(f64, f64)>>,
    /// Per float: depth at 1 Hz.
    depth: BTreeMap<DeviceId, Vec<f64>>,
}

impl Trajectories {
    fn position(&self, device: DeviceId, t_rel: f64) -> (f64, f64) {
        lerp_table(&self.horizontal[&device], t_rel)
    }

    /// Acoustic transducer depth: staircase for floats, fixed for SLBs.
    fn depth(&self, device: DeviceId, t_rel: f64, slb_depth_m: f64) -> f64 {
        match self.depth.get(&device) {
            Some(table) => lerp_scalar(table, t_rel),
            None => slb_depth_m,
        }
    }
}

fn generate_trajectories(
    cfg: &ScenarioConfig,
    slbs: &[DeviceId],
    floats: &[DeviceId],
) -> Trajectories {
    let mut placement = stream(cfg.rng_seed, STREAM_PLACEMENT);
    let mut motion = stream(cfg.rng_seed, STREAM_TRAJECTORY);
    let steps = cfg.duration_s.ceil() as usize;

    let mut horizontal = BTreeMap::new();
    let mut depth = BTreeMap::new();

    // SLBs ring the deployment area; floats start near the middle.
    for (k, &id) in slbs.iter().enumerate() {
        let angle = std::f64::consts::TAU * k as f64 / slbs.len() as f64
            + placement.random_range(-0.2..0.2);
        let radius = cfg.deployment_radius_m * placement.random_range(0.75..1.0);
        horizontal.insert(id, vec![(radius * angle.cos(), radius * angle.sin())]);
    }
    for &id in floats {
        let angle = placement.random_range(0.0..std::f64::consts::TAU);
        let radius = cfg.deployment_radius_m * placement.random_range(0.0..0.3);
        horizontal.insert(id, vec![(radius * angle.cos(), radius * angle.sin())]);
    }

    // Velocity = base current + per-device Ornstein-Uhlenbeck perturbation,
    // integrated at 1 Hz. The OU draws happen for every device and step
    // regardless of sigma so trajectories stay seed-comparable across
    // configurations.
    let decay = (-1.0 / cfg.drift_tau_s).exp();
    let kick = cfg.drift_sigma_mps * (1.0 - decay * decay).sqrt();
    let mut ordered: Vec<DeviceId> = slbs.iter().chain(floats.iter()).copied().collect();
    ordered.sort();
    for id in ordered {
        let table = horizontal.get_mut(&id).expect("placed");
        let mut v_e: f64 = cfg.drift_sigma_mps * motion.sample::<f64, _>(StandardNormal);
        let mut v_n: f64 = cfg.drift_sigma_mps * motion.sample::<f64, _>(StandardNormal);
        for _ in 0..steps {
            let (e, n) = *table.last().expect("seeded");
            table.push((e + cfg.current_mps[0] + v_e, n + cfg.current_mps[1] + v_n));
            v_e = v_e * decay + kick * motion.sample::<f64, _>(StandardNormal);
            v_n = v_n * decay + kick * motion.sample::<f64, _>(StandardNormal);
        }
    }

    // Staircase depth profile: chase the stage target at a fixed vertical
    // rate, one step per second. Targets return to the surface at the rise
    // time.
    let rise_t = cfg.duration_s - cfg.rise_margin_s;
    let stage_len = (rise_t - cfg.dive_start_s) / cfg.float_depth_levels_m.len() as f64;
    for &id in floats {
        let mut table = vec![0.0f64];
        for k in 0..steps {
            let t = (k + 1) as f64;
            let target = if t < cfg.dive_start_s || t >= rise_t {
                0.0
            } else {
                let stage = ((t - cfg.dive_start_s) / stage_len) as usize;
                cfg.float_depth_levels_m[stage.min(cfg.float_depth_levels_m.len() - 1)]
            };
            let prev = *table.last().expect("seeded");
            let step = (target - prev).clamp(-cfg.depth_rate_mps, cfg.depth_rate_mps);
            table.push((prev + step).max(0.0));
        }
        depth.insert(id, table);
    }

    Trajectories { horizontal, depth }
}

/// Pair-level multipath episode state.
struct MultipathState {
    /// Entry rate while clear, 1/s, tuned for a `multipath_probability`
    /// long-run affected fraction.
    entry_rate: f64,
    episodes: BTreeMap<(DeviceId, DeviceId), Episode>,
    last_attempt: BTreeMap<(DeviceId, DeviceId), f64>,
}

struct Episode {
    until: f64,
    base_delay_s: f64,
}

const MULTIPATH_JITTER_S: f64 = 0.001;

impl MultipathState {
    fn new(cfg: &ScenarioConfig, devices: &[DeviceId], rng: &mut ChaCha12Rng) -> Self {
        let p = cfg.multipath_probability;
        let mean_episode = (cfg.multipath_episode_s[0] + cfg.multipath_episode_s[1]) / 2.0;
        let entry_rate = if p > 0.0 {
            p / ((1.0 - p) * mean_episode)
        } else {
            0.0
        };
        let mut episodes = BTreeMap::new();
        // Stationary initialization: a pair may already be inside an
        // episode when the deployment starts.
        for (i, &a) in devices.iter().enumerate() {
            for &b in &devices[i + 1..] {
                if rng.random::<f64>() < p {
                    episodes.insert((a, b), Episode::draw(cfg, 0.0, rng));
                }
            }
        }
        Self {
            entry_rate,
            episodes,
            last_attempt: BTreeMap::new(),
        }
    }

    /// Extra delay applied to a reception on this pair at `t`, if any.
    fn delay(
        &mut self,
        cfg: &ScenarioConfig,
        a: DeviceId,
        b: DeviceId,
        t: f64,
        rng: &mut ChaCha12Rng,
    ) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        if self.episodes.get(&key).is_some_and(|e| t >= e.until) {
            self.episodes.remove(&key);
        }
        let gap = t - self.last_attempt.get(&key).copied().unwrap_or(0.0);
        self.last_attempt.insert(key, t);
        if !self.episodes.contains_key(&key) {
            let p_enter = 1.0 - (-self.entry_rate * gap.max(0.0)).exp();
            if rng.random::<f64>() < p_enter {
                self.episodes.insert(key, Episode::draw(cfg, t, rng));
            }
        }
        match self.episodes.get(&key) {
            Some(e) => {
                let jitter = rng.random_range(-MULTIPATH_JITTER_S..MULTIPATH_JITTER_S);
                (e.base_delay_s + jitter).clamp(
                    cfg.multipath_extra_delay_s[0],
                    cfg.multipath_extra_delay_s[1],
                )
            }
            None => {
                // Keep the per-reception draw count constant so the stream
                // stays aligned whether or not an episode is active.
                let _ = rng.random::<f64>();
                0.0
            }
        }
    }
}

impl Episode {
    fn draw(cfg: &ScenarioConfig, start: f64, rng: &mut ChaCha12Rng) -> Episode {
        let duration = rng.random_range(cfg.multipath_episode_s[0]..=cfg.multipath_episode_s[1]);
        let base =
            rng.random_range(cfg.multipath_extra_delay_s[0]..=cfg.multipath_extra_delay_s[1]);
        Episode {
            until: start + duration,
            base_delay_s: base,
        }
    }
}

/// Runs one scenario. Deterministic: identical configs (including seed)
/// produce identical output, byte-for-byte once written.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimOutput, SimError> {
    cfg.validate().map_err(SimError::InvalidScenario)?;
    let t0 = parse_timestamp_utc(&cfg.start_time_utc)
        .map_err(|e| SimError::InvalidScenario(format!("start_time_utc: {e}")))?;
    let origin = ReferenceOrigin::new(
        GeodeticPoint::new(cfg.origin_lat_deg, cfg.origin_lon_deg, 0.0)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?,
    );

    let slbs: Vec<DeviceId> = (1..=cfg.n_slbs as u16).map(DeviceId).collect();
    let floats: Vec<DeviceId> = (0..cfg.n_floats as u16)
        .map(|k| DeviceId(FIRST_FLOAT_ID + k))
        .collect();
    let devices: Vec<DeviceId> = slbs.iter().chain(floats.iter()).copied().collect();

    let trajectories = generate_trajectories(cfg, &slbs, &floats);
    let to_geodetic = |e: f64, n: f64| -> GeodeticPoint {
        geo::ned_to_geodetic(&NedPoint::new(n, e, 0.0), &origin)
    };

    // Ground truth at 1 Hz.
    let mut truth = GroundTruth::default();
    let steps = cfg.duration_s.ceil() as usize;
    for &id in &devices {
        let samples = (0..=steps)
            .map(|k| {
                let t_rel = k as f64;
                let (e, n) = trajectories.position(id, t_rel);
                TruthSample {
                    timestamp_utc: t0 + t_rel,
                    position: to_geodetic(e, n),
                    depth_m: trajectories.depth(id, t_rel, cfg.slb_depth_m),
                }
            })
            .collect();
        truth.samples.insert(id, samples);
    }

    // GPS logs for SLBs; depth logs and dive/rise fixes for floats.
    let mut gps_fixes = Vec::new();
    for &id in &slbs {
        let mut t_rel = 0.0;
        while t_rel <= steps as f64 {
            let (e, n) = trajectories.position(id, t_rel);
            gps_fixes.push(GpsFix {
                device: id,
                timestamp_utc: t0 + t_rel,
                position: to_geodetic(e, n),
            });
            t_rel += cfg.gps_fix_interval_s;
        }
    }
    gps_fixes.sort_by(|a, b| {
        a.timestamp_utc
            .total_cmp(&b.timestamp_utc)
            .then(a.device.cmp(&b.device))
    });

    let mut depth_samples = Vec::new();
    for &id in &floats {
        for k in 0..=steps {
            depth_samples.push(DepthSample {
                device: id,
                timestamp_utc: t0 + k as f64,
                depth_m: trajectories.depth(id, k as f64, cfg.slb_depth_m),
            });
        }
    }
    depth_samples.sort_by(|a, b| {
        a.timestamp_utc
            .total_cmp(&b.timestamp_utc)
            .then(a.device.cmp(&b.device))
    });

    let rise_t = cfg.duration_s - cfg.rise_margin_s;
    let dive_rise: Vec<DiveRiseFixes> = floats
        .iter()
        .map(|&id| {
            let fix_at = |t_rel: f64| {
                let (e, n) = trajectories.position(id, t_rel);
                GpsFix {
                    device: id,
                    timestamp_utc: t0 + t_rel,
                    position: to_geodetic(e, n),
                }
            };
            DiveRiseFixes::new(id, fix_at(cfg.dive_start_s), fix_at(rise_t))
                .expect("dive precedes rise")
        })
        .collect();

    // Acoustic exchange: round-robin TDMA, every device pinging every
    // `ping_interval_s` at its slot offset.
    let mut noise_rng = stream(cfg.rng_seed, STREAM_NOISE);
    let mut dropout_rng = stream(cfg.rng_seed, STREAM_DROPOUT);
    let mut multipath_rng = stream(cfg.rng_seed, STREAM_MULTIPATH);
    let mut multipath = MultipathState::new(cfg, &devices, &mut multipath_rng);

    let mut pings_by_device: BTreeMap<DeviceId, Vec<PingRecord>> =
        devices.iter().map(|&d| (d, Vec::new())).collect();

    let slot = cfg.ping_interval_s / devices.len() as f64;
    let cycles = (cfg.duration_s / cfg.ping_interval_s).ceil() as usize;
    for cycle in 0..cycles {
        for (idx, &sender) in devices.iter().enumerate() {
            let t_send_rel = cycle as f64 * cfg.ping_interval_s + idx as f64 * slot;
            if t_send_rel >= cfg.duration_s {
                continue;
            }
            pings_by_device
                .get_mut(&sender)
                .expect("known")
                .push(PingRecord {
                    device: sender,
                    direction: PingDirection::Sent,
                    peer: sender,
                    timestamp_utc: t0 + t_send_rel,
                });

            let (se, sn) = trajectories.position(sender, t_send_rel);
            let sz = trajectories.depth(sender, t_send_rel, cfg.slb_depth_m);
            for &receiver in &devices {
                if receiver == sender {
                    continue;
                }
                // Arrival solves t_a = t_send + ‖x_recv(t_a) − x_send(t_send)‖/c;
                // the receiver moves ~1e-3 of the path length per iteration,
                // so a few fixed-point passes converge far below log
                // resolution.
                let mut t_arrival_rel = t_send_rel;
                let mut dist = 0.0;
                for _ in 0..4 {
                    let (re, rn) = trajectories.position(receiver, t_arrival_rel);
                    let rz = trajectories.depth(receiver, t_arrival_rel, cfg.slb_depth_m);
                    let (de, dn, dz) = (re - se, rn - sn, rz - sz);
                    dist = (de * de + dn * dn + dz * dz).sqrt();
                    t_arrival_rel = t_send_rel + dist / cfg.sound_speed_mps;
                }
                if dist > cfg.max_acoustic_range_m {
                    continue;
                }

                let extra = multipath.delay(cfg, sender, receiver, t_send_rel, &mut multipath_rng);
                let noise = cfg.range_noise_std_m / cfg.sound_speed_mps
                    * noise_rng.sample::<f64, _>(StandardNormal);
                let dropped = dropout_rng.random::<f64>() < cfg.dropout_probability;
                if dropped {
                    continue;
                }
                let t_recv_rel = t_arrival_rel + extra + noise + cfg.processing_delay_s;
                pings_by_device
                    .get_mut(&receiver)
                    .expect("known")
                    .push(PingRecord {
                        device: receiver,
                        direction: PingDirection::Received,
                        peer: sender,
                        timestamp_utc: t0 + t_recv_rel,
                    });
            }
        }
    }

    for records in pings_by_device.values_mut() {
        records.sort_by(|a, b| {
            a.timestamp_utc
                .total_cmp(&b.timestamp_utc)
                .then(a.direction.cmp(&b.direction))
                .then(a.peer.cmp(&b.peer))
        });
    }

    Ok(SimOutput {
        slbs,
        floats,
        pings_by_device,
        gps_fixes,
        depth_samples,
        dive_rise,
        truth,
    })
}

/// Summary statistics of horizontal errors, meters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub count: usize,
    pub mean_m: f64,
    pub median_m: f64,
    pub max_m: f64,
    pub min_m: f64,
}

impl Metrics {
    fn from_errors(mut errors: Vec<f64>) -> Metrics {
        if errors.is_empty() {
            return Metrics::default();
        }
        errors.sort_by(f64::total_cmp);
        let count = errors.len();
        let mean = errors.iter().sum::<f64>() / count as f64;
        let median = if count % 2 == 1 {
            errors[count / 2]
        } else {
            (errors[count / 2 - 1] + errors[count / 2]) / 2.0
        };
        Metrics {
            count,
            mean_m: mean,
            median_m: median,
            max_m: errors[count - 1],
            min_m: errors[0],
        }
    }
}

/// Error statistics before (all estimates) and after (accepted only) the
/// cost/CRLB filter.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeviceErrorStats {
    pub unfiltered: Metrics,
    pub filtered: Metrics,
}

#[derive(Debug, Clone, Default)]
pub struct ErrorStats {
    pub per_device: BTreeMap<DeviceId, DeviceErrorStats>,
    pub aggregate: DeviceErrorStats,
}

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("no estimate overlaps the ground-truth time span")]
    NoOverlap,
}

/// Allowed slack between an estimate time and the truth span, seconds.
/// Matches the track extrapolation limit.
const TRUTH_SLACK_S: f64 = 10.0;

/// Horizontal distance between an estimate and the interpolated truth
/// position of its device at the estimate time.
pub fn horizontal_error_m(estimate: &PositionEstimate, truth: &GroundTruth) -> Option<f64> {
    let start = truth.start(estimate.device)?;
    let end = truth.end(estimate.device)?;
    if estimate.t_center < start - TRUTH_SLACK_S || estimate.t_center > end + TRUTH_SLACK_S {
        return None;
    }
    let sample = truth.position_at(estimate.device, estimate.t_center)?;
    let local = ReferenceOrigin::new(sample.position);
    Some(geo::geodetic_to_ned(&estimate.position, &local).horizontal_norm())
}

/// Per-device and aggregate error statistics of a run against truth.
pub fn evaluate(
    estimates: &[PositionEstimate],
    truth: &GroundTruth,
) -> Result<ErrorStats, EvaluateError> {
    let mut per_device_errors: BTreeMap<DeviceId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut all = Vec::new();
    let mut accepted = Vec::new();

    for est in estimates {
        let Some(err) = horizontal_error_m(est, truth) else {
            continue;
        };
        let entry = per_device_errors.entry(est.device).or_default();
        entry.0.push(err);
        all.push(err);
        if est.accepted {
            entry.1.push(err);
            accepted.push(err);
        }
    }
    if all.is_empty() {
        return Err(EvaluateError::NoOverlap);
    }

    let per_device = per_device_errors
        .into_iter()
        .map(|(device, (all, accepted))| {
            (
                device,
                DeviceErrorStats {
                    unfiltered: Metrics::from_errors(all),
                    filtered: Metrics::from_errors(accepted),
                },
            )
        })
        .collect();
    Ok(ErrorStats {
        per_device,
        aggregate: DeviceErrorStats {
            unfiltered: Metrics::from_errors(all),
            filtered: Metrics::from_errors(accepted),
        },
    })
}
