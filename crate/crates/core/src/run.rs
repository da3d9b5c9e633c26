//! End-to-end localization runs
//!
//! A run synthesizes (or accepts) a sensor log, plays every selected
//! measurement through the filter in timestamp order, resolves errors
//! against the truth and writes a self-contained artifact directory:
//! `estimate_trace.csv`, `errors.csv`, `summary.json`, `scenario.toml`,
//! `truth.csv` and `pole_map.csv`. Summaries are deterministic byte for
//! byte given the same scenario, seed and sensor selection.

use crate::association::{
    gate_and_match_bearings, gate_and_match_bearings_scaled, gate_and_match_lidar, MatchSet,
};
use crate::camera::{convert_detections, PinholeIntrinsics, PixelDetectionSet};
use crate::error::{Error, Result};
use crate::filter::{
    initialize_from_fixes, predict, update_camera_bearings, update_gnss, update_gyro,
    update_lidar_poles, update_wheels, InnovationGate, StateEstimate, UpdateReport,
};
use crate::geometry::{rotation, Extrinsics};
use crate::lidar::{detect_poles, DetectorParams, PoleDetection, PoleDetectionSet};
use crate::metrics::{compute_errors, summarize, ErrorSeries, SeriesSummary};
use crate::pole_map::project_to_camera_angles;
use crate::sim::scenario::{Scenario, SCHEMA_VERSION};
use crate::sim::synth::{synthesize, LidarData, SimData};
use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Truth alignment tolerance for error metrics [s].
const ALIGN_TOL: f64 = 0.010;
/// Measurements older than this relative to the estimate are dropped [s].
const MAX_LATE: f64 = 0.050;
/// Shortest landmark range assumed when adapting the bearing gate [m].
const MIN_BEARING_RANGE: f64 = 5.0;
/// Weight of the clutter branch when a bearing is matched through a gate
/// wider than the floor; scales the extra variance (gate^2 - floor^2).
const CLUTTER_MIX: f64 = 0.15;

/// Sensor selection for a run. GNSS, wheel odometry and the gyro are always
/// consumed; the variants differ in which landmark sensors join them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum SensorCombo {
    #[value(name = "gnss_dr")]
    GnssDr,
    #[value(name = "front")]
    Front,
    #[value(name = "left_right")]
    LeftRight,
    #[value(name = "all_cameras")]
    AllCameras,
    #[value(name = "lidar")]
    Lidar,
    #[value(name = "lidar_cameras")]
    LidarCameras,
}

impl SensorCombo {
    pub const ALL: [SensorCombo; 6] = [
        SensorCombo::GnssDr,
        SensorCombo::Front,
        SensorCombo::LeftRight,
        SensorCombo::AllCameras,
        SensorCombo::Lidar,
        SensorCombo::LidarCameras,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SensorCombo::GnssDr => "gnss_dr",
            SensorCombo::Front => "front",
            SensorCombo::LeftRight => "left_right",
            SensorCombo::AllCameras => "all_cameras",
            SensorCombo::Lidar => "lidar",
            SensorCombo::LidarCameras => "lidar_cameras",
        }
    }

    pub fn uses_lidar(&self) -> bool {
        matches!(self, SensorCombo::Lidar | SensorCombo::LidarCameras)
    }

    pub fn uses_camera(&self, name: &str) -> bool {
        match self {
            SensorCombo::GnssDr | SensorCombo::Lidar => false,
            SensorCombo::Front => name == "front",
            SensorCombo::LeftRight => name == "left" || name == "right",
            SensorCombo::AllCameras | SensorCombo::LidarCameras => true,
        }
    }
}

impl fmt::Display for SensorCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SensorCombo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SensorCombo::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::domain(format!("unknown sensor combination '{s}'")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub sensors: SensorCombo,
    /// Overrides the scenario's seed when set.
    pub seed: Option<u64>,
    /// Disables both association gates and the chi-square innovation gate.
    pub gating: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { sensors: SensorCombo::LidarCameras, seed: None, gating: true }
    }
}

/// One line of the estimate trace: the state right after an event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub sensor: String,
    pub attempted: usize,
    pub accepted: usize,
    pub nis: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub theta_dot: f64,
    pub bias_x: f64,
    pub bias_y: f64,
    pub p_xx: f64,
    pub p_xy: f64,
    pub p_yy: f64,
    pub p_tt: f64,
    pub p_vv: f64,
    pub p_ww: f64,
    pub p_bxbx: f64,
    pub p_byby: f64,
}

fn trace_row(sensor: &str, rep: &UpdateReport, est: &StateEstimate) -> TraceRow {
    let s = &est.state;
    TraceRow {
        t: est.t,
        sensor: sensor.to_string(),
        attempted: rep.attempted,
        accepted: rep.accepted,
        nis: rep.nis,
        x: s.x,
        y: s.y,
        theta: s.theta,
        v: s.v,
        theta_dot: s.yaw_rate,
        bias_x: s.bias_x,
        bias_y: s.bias_y,
        p_xx: est.cov[(0, 0)],
        p_xy: est.cov[(0, 1)],
        p_yy: est.cov[(1, 1)],
        p_tt: est.cov[(2, 2)],
        p_vv: est.cov[(3, 3)],
        p_ww: est.cov[(4, 4)],
        p_bxbx: est.cov[(5, 5)],
        p_byby: est.cov[(6, 6)],
    }
}

/// Measurement-block counters accumulated over a run.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SensorCounts {
    pub gnss_attempted: usize,
    pub gnss_accepted: usize,
    pub wheels_attempted: usize,
    pub wheels_accepted: usize,
    pub gyro_attempted: usize,
    pub gyro_accepted: usize,
    pub lidar_pairs_attempted: usize,
    pub lidar_pairs_accepted: usize,
    pub bearing_pairs_attempted: usize,
    pub bearing_pairs_accepted: usize,
}

/// Deterministic digest of one run, written to `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub sensors: String,
    pub gating: bool,
    pub duration_s: f64,
    pub counts: SensorCounts,
    pub errors: SeriesSummary,
}

/// Everything a run produces, ready to be written or inspected in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
    pub estimates: Vec<StateEstimate>,
    pub errors: ErrorSeries,
    pub sim: SimData,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Wheels(usize),
    Gyro(usize),
    Gnss(usize),
    Lidar(usize),
    Camera { stream: usize, frame: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    /// Tie-break for simultaneous events: relative sensors first, absolute
    /// corrections after them.
    rank: u8,
    kind: EventKind,
}

fn collect_events(sim: &SimData, combo: SensorCombo) -> Vec<Event> {
    let mut events = Vec::new();
    for (i, w) in sim.log.wheels.iter().enumerate() {
        events.push(Event { t: w.t, rank: 0, kind: EventKind::Wheels(i) });
    }
    for (i, g) in sim.log.gyro.iter().enumerate() {
        events.push(Event { t: g.t, rank: 1, kind: EventKind::Gyro(i) });
    }
    // The first two fixes seed the initial state and are not replayed.
    for (i, f) in sim.log.gnss.iter().enumerate().skip(2) {
        events.push(Event { t: f.t, rank: 2, kind: EventKind::Gnss(i) });
    }
    if combo.uses_lidar() {
        for (i, frame) in sim.log.lidar.iter().enumerate() {
            events.push(Event { t: frame.t, rank: 3, kind: EventKind::Lidar(i) });
        }
    }
    for (stream, cam) in sim.log.cameras.iter().enumerate() {
        if !combo.uses_camera(&cam.spec.name) {
            continue;
        }
        for (frame, f) in cam.frames.iter().enumerate() {
            events.push(Event { t: f.t, rank: 4 + stream as u8, kind: EventKind::Camera { stream, frame } });
        }
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap().then(a.rank.cmp(&b.rank)));
    events
}

/// Largest eigenvalue of a symmetric 2x2 matrix.
fn lambda_max(m: &Matrix2<f64>) -> f64 {
    let half_trace = (m[(0, 0)] + m[(1, 1)]) / 2.0;
    let d = (m[(0, 0)] - m[(1, 1)]) / 2.0;
    half_trace + (d * d + m[(0, 1)] * m[(1, 0)]).sqrt()
}

/// Half-width of the bearing association gate for a landmark `range` metres
/// away: three sigma of heading variance plus position variance seen from
/// that range, clamped to `[floor, ceiling]`. Keeps association alive while
/// the GNSS bias is still unknown without letting a cold filter match
/// detections to candidates far across the field of view.
fn adaptive_bearing_gate(est: &StateEstimate, range: f64, floor: f64, ceiling: f64) -> f64 {
    let sigma2 = est.cov[(2, 2)] + lambda_max(&est.position_cov()) / (range * range);
    (3.0 * sigma2.sqrt()).clamp(floor, ceiling)
}

/// Keeps one estimate per timestamp: later events at the same time replace
/// the earlier snapshot.
fn record_estimate(estimates: &mut Vec<StateEstimate>, est: StateEstimate) {
    match estimates.last_mut() {
        Some(last) if last.t == est.t => *last = est,
        _ => estimates.push(est),
    }
}

struct CameraCtx {
    name: String,
    k: PinholeIntrinsics,
    ext: Extrinsics,
    fov: f64,
    range: f64,
    sigma_px: f64,
    rate: f64,
}

/// Plays a synthesized log through the filter.
pub fn run_scenario(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutput> {
    let sim = synthesize(scenario, cfg.seed)?;
    run_on_sim(sim, cfg)
}

/// Like [`run_scenario`], but on an already-synthesized world, so one
/// expensive synthesis can feed several filter configurations.
pub fn run_on_sim(sim: SimData, cfg: &RunConfig) -> Result<RunOutput> {
    let sc = &sim.scenario;
    let fspec = sc.filter;
    let gate = InnovationGate::new(cfg.gating, fspec.gate_confidence)?;
    let q = fspec.process_noise;
    let lidar_ext = sc.lidar_extrinsics();
    let lever = Vector2::new(sc.gnss.lever_arm[0], sc.gnss.lever_arm[1]);
    // Noise-free scenarios still need a nonsingular R.
    let gnss_r = Matrix2::from_diagonal_element((sc.gnss.sigma * sc.gnss.sigma).max(1e-9));
    let wheel_r = Matrix2::from_diagonal_element((sc.wheels.sigma * sc.wheels.sigma).max(1e-9));
    let gyro_r = (sc.gyro.sigma * sc.gyro.sigma).max(1e-9);
    let detector = DetectorParams { sigma: fspec.detection_sigma, ..DetectorParams::default() };
    let det_cov = Matrix2::from_diagonal_element(fspec.detection_sigma * fspec.detection_sigma);
    // Map matching engages once dead reckoning has warmed up the heading.
    let bootstrap_var = fspec.bootstrap_heading_std * fspec.bootstrap_heading_std;

    let mut cams = Vec::new();
    for stream in &sim.log.cameras {
        cams.push(CameraCtx {
            name: stream.spec.name.clone(),
            k: stream.spec.intrinsics()?,
            ext: stream.spec.extrinsics_struct(),
            fov: stream.spec.fov_rad(),
            range: stream.spec.range,
            sigma_px: stream.spec.sigma_px.max(1e-4),
            rate: stream.spec.rate,
        });
    }

    if sim.log.gnss.len() < 2 {
        return Err(Error::scenario("run needs at least two GNSS fixes to initialize"));
    }
    let f0 = &sim.log.gnss[0];
    let f1 = &sim.log.gnss[1];
    let mut est = initialize_from_fixes(
        f1.t,
        Point2::new(f0.east, f0.north),
        Point2::new(f1.east, f1.north),
        lever,
        sc.gnss.sigma,
        &fspec.init,
    )?;

    // Measurements that predate the initial estimate cannot be fused.
    let mut events = collect_events(&sim, cfg.sensors);
    events.retain(|e| e.t >= est.t - 1e-9);

    // Bearing match streaks per (camera, landmark), used to hold back
    // first-sight matches while the association gates are still wide.
    let mut cam_tracks: BTreeMap<(usize, u64), (f64, u32)> = BTreeMap::new();
    let mut trace: Vec<TraceRow> = Vec::with_capacity(events.len());
    let mut estimates: Vec<StateEstimate> = Vec::new();
    let mut counts = SensorCounts::default();

    for ev in &events {
        let dt = ev.t - est.t;
        if dt > 1e-9 {
            est = predict(&est, dt, &q)?;
        } else if dt < -MAX_LATE {
            log::warn!("dropping measurement at t={:.3}: {:.0} ms older than the estimate", ev.t, -dt * 1e3);
            continue;
        }
        let (sensor, rep): (&str, UpdateReport) = match ev.kind {
            EventKind::Wheels(i) => {
                let w = &sim.log.wheels[i];
                let (next, rep) =
                    update_wheels(&est, Vector2::new(w.left, w.right), &wheel_r, sc.wheels.track, &gate)?;
                est = next;
                counts.wheels_attempted += rep.attempted;
                counts.wheels_accepted += rep.accepted;
                ("wheels", rep)
            }
            EventKind::Gyro(i) => {
                let g = &sim.log.gyro[i];
                let (next, rep) = update_gyro(&est, g.yaw_rate, gyro_r, &gate)?;
                est = next;
                counts.gyro_attempted += rep.attempted;
                counts.gyro_accepted += rep.accepted;
                ("gyro", rep)
            }
            EventKind::Gnss(i) => {
                let f = &sim.log.gnss[i];
                let (next, rep) =
                    update_gnss(&est, Point2::new(f.east, f.north), &gnss_r, lever, &gate)?;
                est = next;
                counts.gnss_attempted += rep.attempted;
                counts.gnss_accepted += rep.accepted;
                ("gnss", rep)
            }
            EventKind::Lidar(i) => {
                let frame = &sim.log.lidar[i];
                if cfg.gating && est.cov[(2, 2)] > bootstrap_var {
                    trace.push(trace_row("lidar", &UpdateReport::default(), &est));
                    record_estimate(&mut estimates, est);
                    continue;
                }
                let dets = match &frame.data {
                    LidarData::Poles(poles) => PoleDetectionSet {
                        detections: poles
                            .iter()
                            .map(|p| PoleDetection { position: Point2::new(p[0], p[1]), covariance: det_cov })
                            .collect(),
                    },
                    LidarData::Cloud(cloud) => detect_poles(cloud, &detector)?.0,
                };
                let rep = if dets.detections.is_empty() {
                    UpdateReport::default()
                } else {
                    let sensor_pose = lidar_ext.sensor_pose(&est.state.pose());
                    let rot = rotation(sensor_pose.theta);
                    let ptt = est.cov[(2, 2)];
                    // Gating covariance: detection noise plus the pose
                    // prior, including the heading lever — a heading error
                    // displaces a detection tangentially in proportion to
                    // its range.
                    let world: Vec<(Point2<f64>, Matrix2<f64>)> = dets
                        .detections
                        .iter()
                        .map(|d| {
                            let arm = rot * d.position.coords;
                            let tangent = Vector2::new(-arm.y, arm.x);
                            (
                                sensor_pose.transform_from_frame(d.position),
                                rot * d.covariance * rot.transpose()
                                    + est.position_cov()
                                    + ptt * tangent * tangent.transpose(),
                            )
                        })
                        .collect();
                    let candidates = sim
                        .map
                        .query_radius(Point2::new(sensor_pose.x, sensor_pose.y), sc.lidar.range + 15.0)?;
                    let (assoc_gate, ceiling) = if cfg.gating {
                        (fspec.lidar_assoc_gate, fspec.lidar_gate_ceiling)
                    } else {
                        (f64::INFINITY, f64::INFINITY)
                    };
                    let matches = gate_and_match_lidar(&world, &candidates, assoc_gate, ceiling)?;
                    if log::log_enabled!(log::Level::Debug) {
                        for p in &matches.pairs {
                            let (w, _) = &world[p.measurement];
                            if let Some(l) = candidates.iter().find(|l| l.id == p.landmark) {
                                log::debug!(
                                    "t={:.2} lidar: detection ({:.2}, {:.2}) -> landmark {} at ({:.2}, {:.2}), off by {:.2} m",
                                    ev.t,
                                    w.x,
                                    w.y,
                                    p.landmark,
                                    l.position.x,
                                    l.position.y,
                                    (w - l.position).norm(),
                                );
                            }
                        }
                    }
                    // Under heading uncertainty a far pair's tangential
                    // residual says more about the unknown rotation than
                    // about the map, so discount it by the heading lever;
                    // the term vanishes as the heading estimate tightens.
                    let mut fused = dets.clone();
                    if cfg.gating {
                        for d in &mut fused.detections {
                            let tangent = Vector2::new(-d.position.y, d.position.x);
                            d.covariance += ptt * tangent * tangent.transpose();
                        }
                    }
                    let (next, rep) =
                        update_lidar_poles(&est, &fused, &matches, &sim.map, &lidar_ext, &gate)?;
                    est = next;
                    rep
                };
                counts.lidar_pairs_attempted += rep.attempted;
                counts.lidar_pairs_accepted += rep.accepted;
                ("lidar", rep)
            }
            EventKind::Camera { stream, frame } => {
                let ctx = &cams[stream];
                let f = &sim.log.cameras[stream].frames[frame];
                if cfg.gating && est.cov[(2, 2)] > bootstrap_var {
                    trace.push(trace_row(&ctx.name, &UpdateReport::default(), &est));
                    record_estimate(&mut estimates, est);
                    continue;
                }
                let rep = if f.detections.is_empty() {
                    UpdateReport::default()
                } else {
                    let ds = PixelDetectionSet::new(f.detections.clone(), &ctx.k)?;
                    let mut bearings =
                        convert_detections(&ctx.name, &ds, &ctx.k, fspec.min_score, ctx.sigma_px)?;
                    // Project with the field of view widened by the worst
                    // plausible gate so candidates near the edge stay in play.
                    let widest = adaptive_bearing_gate(
                        &est,
                        MIN_BEARING_RANGE,
                        fspec.bearing_gate_floor,
                        fspec.bearing_gate_ceiling,
                    );
                    let fov_eff = (ctx.fov + 2.0 * widest).min(2.0 * std::f64::consts::PI);
                    let angles = project_to_camera_angles(
                        &sim.map,
                        &est.state.pose(),
                        &ctx.ext,
                        ctx.range + 10.0,
                        fov_eff,
                    )?;
                    let matches = if cfg.gating {
                        let gates: Vec<f64> = angles
                            .entries
                            .iter()
                            .map(|e| {
                                adaptive_bearing_gate(
                                    &est,
                                    e.range.max(MIN_BEARING_RANGE),
                                    fspec.bearing_gate_floor,
                                    fspec.bearing_gate_ceiling,
                                )
                            })
                            .collect();
                        let raw = gate_and_match_bearings_scaled(
                            &bearings,
                            &angles,
                            &gates,
                            fspec.bearing_ambiguity_ratio,
                        )?;
                        // A gate much wider than its floor may well have
                        // admitted clutter, and one accepted frame would
                        // re-pin a cold pose onto it. Hold such matches
                        // until the same landmark shows up on consecutive
                        // frames: clutter is independent frame to frame,
                        // real poles persist.
                        let window = 1.5 / ctx.rate;
                        let mut pairs = Vec::with_capacity(raw.pairs.len());
                        let mut held = raw.unmatched_measurements;
                        for p in raw.pairs {
                            let streak = {
                                let e = cam_tracks
                                    .entry((stream, p.landmark))
                                    .or_insert((f64::NEG_INFINITY, 0));
                                e.1 = if ev.t - e.0 <= window { e.1 + 1 } else { 1 };
                                e.0 = ev.t;
                                e.1
                            };
                            let floor = fspec.bearing_gate_floor;
                            let g = angles
                                .entries
                                .iter()
                                .position(|e| e.id == p.landmark)
                                .map_or(floor, |k| gates[k]);
                            if g > 2.0 * floor && streak < 2 {
                                held.push(p.measurement);
                            } else {
                                // A wider-than-floor gate admits clutter in
                                // proportion to its width, even on a landmark
                                // with a running streak; budget for that
                                // mixture in the measurement variance.
                                bearings.bearings[p.measurement].variance +=
                                    CLUTTER_MIX * (g * g - floor * floor).max(0.0);
                                pairs.push(p);
                            }
                        }
                        MatchSet {
                            pairs,
                            unmatched_measurements: held,
                            unmatched_landmarks: raw.unmatched_landmarks,
                        }
                    } else {
                        gate_and_match_bearings(&bearings, &angles, f64::INFINITY)?
                    };
                    if log::log_enabled!(log::Level::Debug) {
                        for p in &matches.pairs {
                            let meas = bearings.bearings[p.measurement].alpha;
                            if let Some(c) = angles.entries.iter().find(|e| e.id == p.landmark) {
                                log::debug!(
                                    "t={:.2} {}: bearing {:.4} -> landmark {} at {:.4} (r={:.1} m, diff {:.4})",
                                    ev.t,
                                    ctx.name,
                                    meas,
                                    p.landmark,
                                    c.alpha,
                                    c.range,
                                    crate::geometry::angular_diff(meas, c.alpha),
                                );
                            }
                        }
                    }
                    let (next, rep) =
                        update_camera_bearings(&est, &bearings, &matches, &sim.map, &ctx.ext, &gate)?;
                    est = next;
                    rep
                };
                counts.bearing_pairs_attempted += rep.attempted;
                counts.bearing_pairs_accepted += rep.accepted;
                (ctx.name.as_str(), rep)
            }
        };
        trace.push(trace_row(sensor, &rep, &est));
        record_estimate(&mut estimates, est);
    }

    let errors = compute_errors(&estimates, &sim.truth, ALIGN_TOL)?;
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        scenario: sc.name.clone(),
        scenario_digest: sc.digest(),
        seed: sim.seed,
        sensors: cfg.sensors.label().to_string(),
        gating: cfg.gating,
        duration_s: sim.path.duration(sc.speed),
        counts,
        errors: summarize(&errors)?,
    };
    Ok(RunOutput { summary, trace, estimates, errors, sim })
}

#[derive(Debug, Serialize)]
struct TruthRow {
    t: f64,
    x: f64,
    y: f64,
    theta: f64,
    v: f64,
    yaw_rate: f64,
}

/// Writes the full artifact set into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("estimate_trace.csv"))?;
    for row in &out.trace {
        w.serialize(row)?;
    }
    w.flush()?;
    out.errors.to_csv(&dir.join("errors.csv"))?;
    std::fs::write(dir.join("summary.json"), summary_json(&out.summary)?)?;
    std::fs::write(dir.join("scenario.toml"), out.sim.scenario.to_toml_string())?;
    let mut w = csv::Writer::from_path(dir.join("truth.csv"))?;
    for s in &out.sim.truth.samples {
        w.serialize(TruthRow {
            t: s.t,
            x: s.pose.x,
            y: s.pose.y,
            theta: s.pose.theta,
            v: s.v,
            yaw_rate: s.yaw_rate,
        })?;
    }
    w.flush()?;
    out.sim.map.to_csv(&dir.join("pole_map.csv"))?;
    Ok(())
}

/// Canonical serialization of a run summary.
pub fn summary_json(summary: &RunSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(summary)? + "\n")
}

/// Mean position RMS per sensor combination, one row per scenario.
#[derive(Debug, Clone)]
pub struct CompareTable {
    pub combos: Vec<String>,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub scenario: String,
    /// Mean `rms_position_m` per combo column; `None` when no run matches.
    pub cells: Vec<Option<f64>>,
    /// Column index of the best (smallest) cell.
    pub best: Option<usize>,
}

/// Aggregates `summary.json` files from run directories for side-by-side
/// comparison. Runs of the same scenario name must describe the same world.
pub fn compare(dirs: &[PathBuf]) -> Result<CompareTable> {
    if dirs.is_empty() {
        return Err(Error::domain("compare needs at least one run directory"));
    }
    let mut summaries = Vec::new();
    for dir in dirs {
        let path = dir.join("summary.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        let summary: RunSummary = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        summaries.push(summary);
    }
    let mut by_scenario: BTreeMap<String, Vec<&RunSummary>> = BTreeMap::new();
    for s in &summaries {
        by_scenario.entry(s.scenario.clone()).or_default().push(s);
    }
    for (name, group) in &by_scenario {
        let digest = &group[0].scenario_digest;
        if group.iter().any(|s| &s.scenario_digest != digest) {
            return Err(Error::scenario(format!(
                "scenario '{name}': runs describe different worlds (digest mismatch)"
            )));
        }
    }
    let combos: Vec<String> = SensorCombo::ALL
        .iter()
        .map(|c| c.label().to_string())
        .filter(|label| summaries.iter().any(|s| &s.sensors == label))
        .collect();
    let mut rows = Vec::new();
    for (scenario, group) in &by_scenario {
        let mut cells = Vec::with_capacity(combos.len());
        for combo in &combos {
            let vals: Vec<f64> = group
                .iter()
                .filter(|s| &s.sensors == combo)
                .map(|s| s.errors.rms_position_m)
                .collect();
            cells.push((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64));
        }
        let best = cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|v| (i, v)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(i, _)| i);
        rows.push(CompareRow { scenario: scenario.clone(), cells, best });
    }
    Ok(CompareTable { combos, rows })
}

impl fmt::Display for CompareTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name_w = self
            .rows
            .iter()
            .map(|r| r.scenario.len())
            .chain(["scenario".len()])
            .max()
            .unwrap_or(8);
        let col_w = self.combos.iter().map(|c| c.len().max(10)).collect::<Vec<_>>();
        write!(f, "{:name_w$}", "scenario")?;
        for (combo, w) in self.combos.iter().zip(&col_w) {
            write!(f, "  {combo:>w$}")?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(f, "{:name_w$}", row.scenario)?;
            for (i, (cell, w)) in row.cells.iter().zip(&col_w).enumerate() {
                match cell {
                    Some(v) => {
                        let mark = if row.best == Some(i) { "*" } else { " " };
                        let text = format!("{v:.3}{mark}");
                        write!(f, "  {text:>w$}")?;
                    }
                    None => write!(f, "  {:>w$}", "-")?,
                }
            }
            writeln!(f)?;
        }
        writeln!(f, "(mean position RMS [m] over matching runs; * best per row)")
    }
}
