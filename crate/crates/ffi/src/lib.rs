//! C ABI for the pole localization toolkit.
//!
//! Every object crossing the boundary is an opaque handle created and
//! destroyed here; every fallible call returns a [`PolelocStatus`] and
//! leaves a human-readable message for [`poleloc_last_error`]. Pointers
//! returned as strings are owned by the caller and must go back through
//! [`poleloc_string_free`]. All functions are panic-safe: a Rust panic is
//! reported as [`PolelocStatus::Internal`] instead of unwinding into C.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::{Matrix2, Point2, Point3, Vector2};
use poleloc::association::{gate_and_match_bearings, gate_and_match_lidar};
use poleloc::camera::{BearingMeasurement, BearingSet};
use poleloc::error::Error;
use poleloc::filter::{
    initialize_from_fixes, predict, update_camera_bearings, update_gnss, update_gyro,
    update_lidar_poles, update_wheels, InitConfig, InnovationGate, ProcessNoise, StateEstimate,
};
use poleloc::geometry::{rotation, Extrinsics};
use poleloc::lidar::{detect_poles, DetectorParams, PointCloud, PoleDetection, PoleDetectionSet};
use poleloc::pole_map::{project_to_camera_angles, Landmark, PoleMap};
use poleloc::run::{run_scenario, write_artifacts, RunConfig, SensorCombo};
use poleloc::sim::scenario::{FilterSpec, Scenario};

/// Result of every fallible call in this ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolelocStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument violated the operation's domain.
    InvalidArgument = 3,
    /// A file or configuration did not parse.
    Parse = 4,
    /// The filter produced a non-finite state or covariance.
    Numerical = 5,
    /// The operating system refused a file operation.
    Io = 6,
    /// A panic or an unclassified internal failure.
    Internal = 7,
}

/// Surveyed landmark map handle.
pub struct PolelocMap(PoleMap);

/// LiDAR pole detector handle.
pub struct PolelocDetector(DetectorParams);

/// Localization filter handle: state estimate plus fixed fusion settings.
pub struct PolelocFilter {
    est: StateEstimate,
    q: ProcessNoise,
    gate: InnovationGate,
    spec: FilterSpec,
}

/// Snapshot of the filter state for C callers.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PolelocState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub yaw_rate: f64,
    pub bias_x: f64,
    pub bias_y: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let owned = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = owned);
}

fn status_of(err: &Error) -> PolelocStatus {
    match err {
        Error::Domain(_) => PolelocStatus::InvalidArgument,
        Error::Format(_) | Error::Scenario(_) | Error::Csv(_) | Error::Toml(_) | Error::Json(_) => {
            PolelocStatus::Parse
        }
        Error::Numerical { .. } => PolelocStatus::Numerical,
        Error::Io(_) => PolelocStatus::Io,
        Error::NoGroundPlane | Error::TooFewPoints { .. } => PolelocStatus::Internal,
    }
}

fn fail(err: Error) -> PolelocStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Runs `f` with panics converted to `Internal` and errors recorded.
fn guarded(f: impl FnOnce() -> Result<PolelocStatus, Error>) -> PolelocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => fail(err),
        Err(_) => {
            set_error("internal panic");
            PolelocStatus::Internal
        }
    }
}

fn null_arg(name: &str) -> PolelocStatus {
    set_error(&format!("{name} must not be null"));
    PolelocStatus::NullPointer
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn utf8<'a>(p: *const c_char, name: &str) -> Result<&'a str, PolelocStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        PolelocStatus::InvalidUtf8
    })
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn poleloc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread; empty until one occurs. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn poleloc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be a pointer previously returned by this library and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn poleloc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a landmark map from parallel id/east/north arrays.
///
/// # Safety
/// `ids`, `east` and `north` must point to `len` readable elements; `out`
/// must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_map_new(
    ids: *const u64,
    east: *const f64,
    north: *const f64,
    len: usize,
    out: *mut *mut PolelocMap,
) -> PolelocStatus {
    guarded(|| {
        if out.is_null() {
            return Ok(null_arg("out"));
        }
        if len > 0 && (ids.is_null() || east.is_null() || north.is_null()) {
            return Ok(null_arg("ids/east/north"));
        }
        let ids = std::slice::from_raw_parts(ids, len);
        let east = std::slice::from_raw_parts(east, len);
        let north = std::slice::from_raw_parts(north, len);
        let landmarks = (0..len)
            .map(|i| Landmark { id: ids[i], position: Point2::new(east[i], north[i]) })
            .collect();
        let map = PoleMap::new(landmarks)?;
        *out = Box::into_raw(Box::new(PolelocMap(map)));
        Ok(PolelocStatus::Ok)
    })
}

/// Loads a landmark map from a CSV file with columns `id,east_m,north_m`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_map_load_csv(
    path: *const c_char,
    out: *mut *mut PolelocMap,
) -> PolelocStatus {
    guarded(|| {
        if out.is_null() {
            return Ok(null_arg("out"));
        }
        let path = match utf8(path, "path") {
            Ok(p) => p,
            Err(status) => return Ok(status),
        };
        let map = PoleMap::from_csv(Path::new(path))?;
        *out = Box::into_raw(Box::new(PolelocMap(map)));
        Ok(PolelocStatus::Ok)
    })
}

/// Number of landmarks in the map; zero for a null handle.
///
/// # Safety
/// `map` must be null or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn poleloc_map_len(map: *const PolelocMap) -> usize {
    if map.is_null() {
        0
    } else {
        (*map).0.len()
    }
}

/// Destroys a map handle. Null is ignored.
///
/// # Safety
/// `map` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poleloc_map_free(map: *mut PolelocMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Creates a pole detector with default parameters.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_detector_new(out: *mut *mut PolelocDetector) -> PolelocStatus {
    guarded(|| {
        if out.is_null() {
            return Ok(null_arg("out"));
        }
        *out = Box::into_raw(Box::new(PolelocDetector(DetectorParams::default())));
        Ok(PolelocStatus::Ok)
    })
}

/// Overrides the 1-sigma position noise attached to each detection [m].
///
/// # Safety
/// `det` must be a live detector handle.
#[no_mangle]
pub unsafe extern "C" fn poleloc_detector_set_sigma(
    det: *mut PolelocDetector,
    sigma: f64,
) -> PolelocStatus {
    guarded(|| {
        if det.is_null() {
            return Ok(null_arg("det"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("detector sigma must be positive, got {sigma}")));
        }
        (*det).0.sigma = sigma;
        Ok(PolelocStatus::Ok)
    })
}

/// Runs the detector on a point cloud given as parallel x/y/z arrays in the
/// sensor frame. Detected pole centers are written as (x, y) pairs into
/// `out_xy`, up to `cap` detections; `out_len` receives the count actually
/// found, which may exceed `cap`.
///
/// # Safety
/// `xs`, `ys`, `zs` must each point to `n` readable elements, `out_xy` to
/// `2 * cap` writable elements, and `out_len` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_detector_detect(
    det: *const PolelocDetector,
    xs: *const f64,
    ys: *const f64,
    zs: *const f64,
    n: usize,
    out_xy: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> PolelocStatus {
    guarded(|| {
        if det.is_null() || out_len.is_null() {
            return Ok(null_arg("det/out_len"));
        }
        if n > 0 && (xs.is_null() || ys.is_null() || zs.is_null()) {
            return Ok(null_arg("xs/ys/zs"));
        }
        if cap > 0 && out_xy.is_null() {
            return Ok(null_arg("out_xy"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let zs = std::slice::from_raw_parts(zs, n);
        let points = (0..n).map(|i| Point3::new(xs[i], ys[i], zs[i])).collect();
        let (set, _) = detect_poles(&PointCloud::new(points), &(*det).0)?;
        *out_len = set.len();
        for (i, d) in set.detections.iter().take(cap).enumerate() {
            *out_xy.add(2 * i) = d.position.x;
            *out_xy.add(2 * i + 1) = d.position.y;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Destroys a detector handle. Null is ignored.
///
/// # Safety
/// `det` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poleloc_detector_free(det: *mut PolelocDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Creates a filter seeded from the first two GNSS fixes, the second taken
/// at time `t1`. `lever_x`/`lever_y` give the antenna offset in the body
/// frame and `gnss_sigma` the 1-sigma fix noise used to size the initial
/// covariance. Gating runs at 99% confidence with default process noise.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_new(
    t1: f64,
    fix0_east: f64,
    fix0_north: f64,
    fix1_east: f64,
    fix1_north: f64,
    lever_x: f64,
    lever_y: f64,
    gnss_sigma: f64,
    out: *mut *mut PolelocFilter,
) -> PolelocStatus {
    guarded(|| {
        if out.is_null() {
            return Ok(null_arg("out"));
        }
        let spec = FilterSpec::default();
        let est = initialize_from_fixes(
            t1,
            Point2::new(fix0_east, fix0_north),
            Point2::new(fix1_east, fix1_north),
            Vector2::new(lever_x, lever_y),
            gnss_sigma,
            &InitConfig::default(),
        )?;
        let gate = InnovationGate::new(true, spec.gate_confidence)?;
        let filter =
            PolelocFilter { est, q: spec.process_noise, gate, spec };
        *out = Box::into_raw(Box::new(filter));
        Ok(PolelocStatus::Ok)
    })
}

/// # Safety
/// `f` must be a live filter handle.
unsafe fn advance(f: *mut PolelocFilter, t: f64) -> Result<(), Error> {
    let filter = &mut *f;
    let dt = t - filter.est.t;
    if dt < -1e-9 {
        return Err(Error::domain(format!(
            "measurement at t={t} precedes the estimate at t={}",
            filter.est.t
        )));
    }
    if dt > 1e-9 {
        filter.est = predict(&filter.est, dt, &filter.q)?;
    }
    Ok(())
}

/// Propagates the filter to time `t` without a measurement.
///
/// # Safety
/// `f` must be a live filter handle.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_predict_to(
    f: *mut PolelocFilter,
    t: f64,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() {
            return Ok(null_arg("f"));
        }
        advance(f, t)?;
        Ok(PolelocStatus::Ok)
    })
}

/// Fuses one GNSS fix taken at time `t` with 1-sigma noise `sigma`.
/// `out_accepted`, when non-null, receives 1 if the fix passed the gate.
///
/// # Safety
/// `f` must be a live filter handle; `out_accepted` null or valid.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_update_gnss(
    f: *mut PolelocFilter,
    t: f64,
    east: f64,
    north: f64,
    sigma: f64,
    lever_x: f64,
    lever_y: f64,
    out_accepted: *mut c_int,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() {
            return Ok(null_arg("f"));
        }
        advance(f, t)?;
        let filter = &mut *f;
        let r = Matrix2::from_diagonal_element((sigma * sigma).max(1e-9));
        let (next, rep) = update_gnss(
            &filter.est,
            Point2::new(east, north),
            &r,
            Vector2::new(lever_x, lever_y),
            &filter.gate,
        )?;
        filter.est = next;
        if !out_accepted.is_null() {
            *out_accepted = rep.accepted as c_int;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Fuses one wheel-speed pair [m/s] taken at time `t`.
///
/// # Safety
/// `f` must be a live filter handle; `out_accepted` null or valid.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_update_wheels(
    f: *mut PolelocFilter,
    t: f64,
    left: f64,
    right: f64,
    sigma: f64,
    track: f64,
    out_accepted: *mut c_int,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() {
            return Ok(null_arg("f"));
        }
        advance(f, t)?;
        let filter = &mut *f;
        let r = Matrix2::from_diagonal_element((sigma * sigma).max(1e-9));
        let (next, rep) =
            update_wheels(&filter.est, Vector2::new(left, right), &r, track, &filter.gate)?;
        filter.est = next;
        if !out_accepted.is_null() {
            *out_accepted = rep.accepted as c_int;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Fuses one yaw-rate gyro sample [rad/s] taken at time `t`.
///
/// # Safety
/// `f` must be a live filter handle; `out_accepted` null or valid.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_update_gyro(
    f: *mut PolelocFilter,
    t: f64,
    yaw_rate: f64,
    sigma: f64,
    out_accepted: *mut c_int,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() {
            return Ok(null_arg("f"));
        }
        advance(f, t)?;
        let filter = &mut *f;
        let (next, rep) =
            update_gyro(&filter.est, yaw_rate, (sigma * sigma).max(1e-9), &filter.gate)?;
        filter.est = next;
        if !out_accepted.is_null() {
            *out_accepted = rep.accepted as c_int;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Fuses LiDAR pole detections taken at time `t`, given as (x, y) positions
/// in the sensor frame with isotropic 1-sigma noise `sigma`. The sensor is
/// mounted at (`ext_x`, `ext_y`, `ext_yaw`) in the body frame. Detections
/// are matched to the map before fusion; `out_accepted`, when non-null,
/// receives the number of pairs that survived gating.
///
/// # Safety
/// `f` and `map` must be live handles; `xs`, `ys` must point to `n`
/// readable elements; `out_accepted` null or valid.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_update_lidar(
    f: *mut PolelocFilter,
    t: f64,
    map: *const PolelocMap,
    xs: *const f64,
    ys: *const f64,
    n: usize,
    sigma: f64,
    ext_x: f64,
    ext_y: f64,
    ext_yaw: f64,
    out_accepted: *mut c_int,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() || map.is_null() {
            return Ok(null_arg("f/map"));
        }
        if n > 0 && (xs.is_null() || ys.is_null()) {
            return Ok(null_arg("xs/ys"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("detection sigma must be positive, got {sigma}")));
        }
        advance(f, t)?;
        let filter = &mut *f;
        let map = &(*map).0;
        if !out_accepted.is_null() {
            *out_accepted = 0;
        }
        if n == 0 {
            return Ok(PolelocStatus::Ok);
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let cov = Matrix2::from_diagonal_element(sigma * sigma);
        let ext = Extrinsics::new(ext_x, ext_y, ext_yaw);
        let sensor_pose = ext.sensor_pose(&filter.est.state.pose());
        let rot = rotation(sensor_pose.theta);
        let ptt = filter.est.cov[(2, 2)];
        let mut dets = PoleDetectionSet::default();
        let mut world = Vec::with_capacity(n);
        let mut reach: f64 = 0.0;
        for i in 0..n {
            let local = Point2::new(xs[i], ys[i]);
            reach = reach.max(local.coords.norm());
            let arm = rot * local.coords;
            let tangent = Vector2::new(-arm.y, arm.x);
            world.push((
                sensor_pose.transform_from_frame(local),
                rot * cov * rot.transpose()
                    + filter.est.position_cov()
                    + ptt * tangent * tangent.transpose(),
            ));
            // Discount far pairs by the heading lever, as in the runner.
            dets.detections.push(PoleDetection {
                position: local,
                covariance: cov + ptt * tangent * tangent.transpose(),
            });
        }
        let candidates = map
            .query_radius(Point2::new(sensor_pose.x, sensor_pose.y), reach + 15.0)?;
        let matches = gate_and_match_lidar(
            &world,
            &candidates,
            filter.spec.lidar_assoc_gate,
            filter.spec.lidar_gate_ceiling,
        )?;
        let (next, rep) =
            update_lidar_poles(&filter.est, &dets, &matches, map, &ext, &filter.gate)?;
        filter.est = next;
        if !out_accepted.is_null() {
            *out_accepted = rep.accepted as c_int;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Fuses camera bearings taken at time `t`: angles [rad] in the camera
/// frame with per-bearing variance [rad^2]. The camera is mounted at
/// (`ext_x`, `ext_y`, `ext_yaw`) with field of view `fov` [rad] and usable
/// landmark range `range` [m]. `gate_half_width` [rad] bounds association;
/// a non-positive value selects the default floor. `out_accepted`, when
/// non-null, receives the number of fused bearings.
///
/// # Safety
/// `f` and `map` must be live handles; `alphas` and `variances` must point
/// to `n` readable elements; `out_accepted` null or valid.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_update_bearings(
    f: *mut PolelocFilter,
    t: f64,
    map: *const PolelocMap,
    alphas: *const f64,
    variances: *const f64,
    n: usize,
    ext_x: f64,
    ext_y: f64,
    ext_yaw: f64,
    fov: f64,
    range: f64,
    gate_half_width: f64,
    out_accepted: *mut c_int,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() || map.is_null() {
            return Ok(null_arg("f/map"));
        }
        if n > 0 && (alphas.is_null() || variances.is_null()) {
            return Ok(null_arg("alphas/variances"));
        }
        advance(f, t)?;
        let filter = &mut *f;
        let map = &(*map).0;
        if !out_accepted.is_null() {
            *out_accepted = 0;
        }
        if n == 0 {
            return Ok(PolelocStatus::Ok);
        }
        let alphas = std::slice::from_raw_parts(alphas, n);
        let variances = std::slice::from_raw_parts(variances, n);
        let mut set = BearingSet { camera: "ffi".into(), ..Default::default() };
        for i in 0..n {
            set.bearings.push(BearingMeasurement { alpha: alphas[i], variance: variances[i] });
        }
        let ext = Extrinsics::new(ext_x, ext_y, ext_yaw);
        let gate_rad = if gate_half_width > 0.0 {
            gate_half_width
        } else {
            filter.spec.bearing_gate_floor
        };
        let angles = project_to_camera_angles(
            map,
            &filter.est.state.pose(),
            &ext,
            range,
            (fov + 2.0 * gate_rad).min(2.0 * std::f64::consts::PI),
        )?;
        let matches = gate_and_match_bearings(&set, &angles, gate_rad)?;
        let (next, rep) =
            update_camera_bearings(&filter.est, &set, &matches, map, &ext, &filter.gate)?;
        filter.est = next;
        if !out_accepted.is_null() {
            *out_accepted = rep.accepted as c_int;
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Copies the current state estimate into `out`.
///
/// # Safety
/// `f` must be a live filter handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_state(
    f: *const PolelocFilter,
    out: *mut PolelocState,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() || out.is_null() {
            return Ok(null_arg("f/out"));
        }
        let est = &(*f).est;
        *out = PolelocState {
            t: est.t,
            x: est.state.x,
            y: est.state.y,
            theta: est.state.theta,
            v: est.state.v,
            yaw_rate: est.state.yaw_rate,
            bias_x: est.state.bias_x,
            bias_y: est.state.bias_y,
        };
        Ok(PolelocStatus::Ok)
    })
}

/// Copies the 7x7 state covariance, row-major, into `out` (49 doubles).
/// State order: x, y, theta, v, yaw rate, bias x, bias y.
///
/// # Safety
/// `f` must be a live filter handle and `out` point to 49 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_covariance(
    f: *const PolelocFilter,
    out: *mut f64,
) -> PolelocStatus {
    guarded(|| {
        if f.is_null() || out.is_null() {
            return Ok(null_arg("f/out"));
        }
        let cov = &(*f).est.cov;
        for i in 0..7 {
            for j in 0..7 {
                *out.add(7 * i + j) = cov[(i, j)];
            }
        }
        Ok(PolelocStatus::Ok)
    })
}

/// Destroys a filter handle. Null is ignored.
///
/// # Safety
/// `f` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn poleloc_filter_free(f: *mut PolelocFilter) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Simulates a scenario and plays it through the filter. `scenario` is a
/// built-in name or a file path; `sensors` is one of `gnss_dr`, `front`,
/// `left_right`, `all_cameras`, `lidar`, `lidar_cameras`. A negative
/// `seed` keeps the scenario's own. When `out_dir` is non-null the full
/// artifact set is written there; when `out_summary_json` is non-null it
/// receives the run summary as a JSON string owned by the caller.
///
/// # Safety
/// `scenario` and `sensors` must be valid NUL-terminated strings;
/// `out_dir` and `out_summary_json` may each be null.
#[no_mangle]
pub unsafe extern "C" fn poleloc_run_scenario(
    scenario: *const c_char,
    sensors: *const c_char,
    seed: i64,
    gating: bool,
    out_dir: *const c_char,
    out_summary_json: *mut *mut c_char,
) -> PolelocStatus {
    guarded(|| {
        let scenario = match utf8(scenario, "scenario") {
            Ok(s) => s,
            Err(status) => return Ok(status),
        };
        let sensors = match utf8(sensors, "sensors") {
            Ok(s) => s,
            Err(status) => return Ok(status),
        };
        let sc = Scenario::resolve(scenario)?;
        let cfg = RunConfig {
            sensors: sensors.parse::<SensorCombo>()?,
            seed: if seed < 0 { None } else { Some(seed as u64) },
            gating,
        };
        let out = run_scenario(&sc, &cfg)?;
        if !out_dir.is_null() {
            let dir = match utf8(out_dir, "out_dir") {
                Ok(d) => d,
                Err(status) => return Ok(status),
            };
            write_artifacts(Path::new(dir), &out)?;
        }
        if !out_summary_json.is_null() {
            let json = serde_json::to_string_pretty(&out.summary)
                .map_err(Error::from)?;
            let owned = CString::new(json)
                .map_err(|_| Error::format("summary JSON contained a NUL byte"))?;
            *out_summary_json = owned.into_raw();
        }
        Ok(PolelocStatus::Ok)
    })
}
