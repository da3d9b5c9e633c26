//! Extended Kalman filter over the 7-dimensional vehicle state
//!
//! ```text
//! x = [x, y, theta, v, theta_dot, b_x, b_y]^T
//! ```
//!
//! Pose refers to the rear-axle center; `b` is a random-constant GNSS
//! position bias estimated alongside the pose so that absolute landmark
//! measurements can pull the GNSS track back onto the map. The process
//! model is a unicycle driven by white accelerations on speed and yaw rate.
//!
//! Every update follows the same scheme: compute the innovation and its
//! covariance, optionally gate on the chi-square statistic per measurement
//! block, and apply a Joseph-form update that keeps the covariance symmetric
//! positive semi-definite. Heading is wrapped back into `[-pi, pi)` after
//! every step, and bearing innovations are wrapped before use.

use crate::association::MatchSet;
use crate::camera::BearingSet;
use crate::error::{Error, Result};
use crate::geometry::{angular_diff, wrap_angle, Extrinsics, Pose2D};
use crate::lidar::PoleDetectionSet;
use crate::pole_map::PoleMap;
use nalgebra::{DMatrix, DVector, Matrix2, Point2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const STATE_DIM: usize = 7;
pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Physical interpretation of the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in `[-pi, pi)`.
    pub theta: f64,
    /// Longitudinal speed [m/s].
    pub v: f64,
    /// Yaw rate [rad/s].
    pub yaw_rate: f64,
    /// GNSS position bias, east component [m].
    pub bias_x: f64,
    /// GNSS position bias, north component [m].
    pub bias_y: f64,
}

impl VehicleState {
    pub fn as_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.x, self.y, self.theta, self.v, self.yaw_rate, self.bias_x, self.bias_y,
        ])
    }

    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            x: v[0],
            y: v[1],
            theta: wrap_angle(v[2]),
            v: v[3],
            yaw_rate: v[4],
            bias_x: v[5],
            bias_y: v[6],
        }
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.theta)
    }
}

/// State estimate with covariance at a timestamp.
#[derive(Debug, Clone, Copy)]
pub struct StateEstimate {
    pub t: f64,
    pub state: VehicleState,
    pub cov: StateCov,
}

impl StateEstimate {
    /// 2x2 position block of the covariance.
    pub fn position_cov(&self) -> Matrix2<f64> {
        Matrix2::new(self.cov[(0, 0)], self.cov[(0, 1)], self.cov[(1, 0)], self.cov[(1, 1)])
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.state.as_vector().iter().all(|v| v.is_finite())
            && self.cov.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical { t: self.t, detail: "non-finite state or covariance".into() })
        }
    }
}

/// Power spectral densities of the process noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    /// White longitudinal acceleration [m^2/s^3].
    pub accel_psd: f64,
    /// White yaw acceleration [rad^2/s^3].
    pub yaw_accel_psd: f64,
    /// Bias random walk [m^2/s]; zero models a strict random constant.
    pub bias_psd: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self { accel_psd: 0.5, yaw_accel_psd: 1.0, bias_psd: 1e-6 }
    }
}

/// Chi-square innovation gate at a given confidence, per measurement block.
#[derive(Debug, Clone, Copy)]
pub struct InnovationGate {
    pub enabled: bool,
    pub confidence: f64,
    chi2_1: f64,
    chi2_2: f64,
}

impl InnovationGate {
    pub fn new(enabled: bool, confidence: f64) -> Result<Self> {
        if !(0.0 < confidence && confidence < 1.0) {
            return Err(Error::domain(format!("gate confidence must lie in (0, 1), got {confidence}")));
        }
        Ok(Self {
            enabled,
            confidence,
            chi2_1: chi2_quantile(1, confidence),
            chi2_2: chi2_quantile(2, confidence),
        })
    }

    /// Threshold for a block with `dof` degrees of freedom.
    pub fn threshold(&self, dof: usize) -> f64 {
        match dof {
            1 => self.chi2_1,
            2 => self.chi2_2,
            _ => chi2_quantile(dof, self.confidence),
        }
    }

    fn accepts(&self, nis: f64, dof: usize) -> bool {
        !self.enabled || nis <= self.threshold(dof)
    }
}

impl Default for InnovationGate {
    fn default() -> Self {
        Self::new(true, 0.99).expect("default gate confidence is valid")
    }
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof > 0")
        .inverse_cdf(p)
}

/// What an update did: how many measurement blocks it saw, how many survived
/// the gate, and the normalized innovation squared of the applied stack.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateReport {
    pub attempted: usize,
    pub accepted: usize,
    pub nis: f64,
}

/// Unicycle mean propagation over `dt` with its 7x7 Jacobian.
pub fn process_model(s: &VehicleState, dt: f64) -> (VehicleState, StateCov) {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let state = VehicleState {
        x: s.x + s.v * cos_t * dt,
        y: s.y + s.v * sin_t * dt,
        theta: wrap_angle(s.theta + s.yaw_rate * dt),
        v: s.v,
        yaw_rate: s.yaw_rate,
        bias_x: s.bias_x,
        bias_y: s.bias_y,
    };
    let mut f = StateCov::identity();
    f[(0, 2)] = -s.v * sin_t * dt;
    f[(0, 3)] = cos_t * dt;
    f[(1, 2)] = s.v * cos_t * dt;
    f[(1, 3)] = sin_t * dt;
    f[(2, 4)] = dt;
    (state, f)
}

/// Propagates the estimate forward by `dt` seconds with the unicycle model.
pub fn predict(est: &StateEstimate, dt: f64, q: &ProcessNoise) -> Result<StateEstimate> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("predict needs dt > 0, got {dt}")));
    }
    let s = &est.state;
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (state, f) = process_model(s, dt);

    // Second-order kinematic discretization of the white accelerations: the
    // speed noise enters position along the heading, the yaw noise enters
    // the heading.
    let dt2 = dt * dt;
    let dt3 = dt2 * dt;
    let qv3 = q.accel_psd * dt3 / 3.0;
    let qv2 = q.accel_psd * dt2 / 2.0;
    let qw3 = q.yaw_accel_psd * dt3 / 3.0;
    let qw2 = q.yaw_accel_psd * dt2 / 2.0;
    let mut qd = StateCov::zeros();
    qd[(0, 0)] = qv3 * cos_t * cos_t;
    qd[(0, 1)] = qv3 * cos_t * sin_t;
    qd[(1, 0)] = qd[(0, 1)];
    qd[(1, 1)] = qv3 * sin_t * sin_t;
    qd[(0, 3)] = qv2 * cos_t;
    qd[(3, 0)] = qd[(0, 3)];
    qd[(1, 3)] = qv2 * sin_t;
    qd[(3, 1)] = qd[(1, 3)];
    qd[(3, 3)] = q.accel_psd * dt;
    qd[(2, 2)] = qw3;
    qd[(2, 4)] = qw2;
    qd[(4, 2)] = qw2;
    qd[(4, 4)] = q.yaw_accel_psd * dt;
    qd[(5, 5)] = q.bias_psd * dt;
    qd[(6, 6)] = q.bias_psd * dt;

    let cov = f * est.cov * f.transpose() + qd;
    let out = StateEstimate { t: est.t + dt, state, cov: symmetrize(&cov) };
    out.check_finite()?;
    Ok(out)
}

fn symmetrize(p: &StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

/// Joseph-form update with a stacked linear(ized) measurement.
/// `nu` is the innovation, `h` the Jacobian, `r` the block-diagonal
/// measurement covariance.
fn apply_update(
    est: &StateEstimate,
    h: &DMatrix<f64>,
    nu: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<(StateEstimate, f64)> {
    let m = h.nrows();
    let p = DMatrix::from_fn(STATE_DIM, STATE_DIM, |i, j| est.cov[(i, j)]);
    let s = h * &p * h.transpose() + r;
    let s_lu = s.clone().lu();
    let s_inv = s_lu
        .try_inverse()
        .ok_or(Error::Numerical { t: est.t, detail: "singular innovation covariance".into() })?;
    let nis = (nu.transpose() * &s_inv * nu)[(0, 0)];
    let k = &p * h.transpose() * &s_inv;
    let dx = &k * nu;
    let mut xv = est.state.as_vector();
    for i in 0..STATE_DIM {
        xv[i] += dx[i];
    }
    let i_kh = DMatrix::<f64>::identity(STATE_DIM, STATE_DIM) - &k * h;
    let p_new = &i_kh * &p * i_kh.transpose() + &k * r * k.transpose();
    let mut cov = StateCov::zeros();
    for i in 0..STATE_DIM {
        for j in 0..STATE_DIM {
            cov[(i, j)] = p_new[(i, j)];
        }
    }
    let out = StateEstimate {
        t: est.t,
        state: VehicleState::from_vector(&xv),
        cov: symmetrize(&cov),
    };
    out.check_finite()?;
    debug_assert!(m > 0);
    Ok((out, nis))
}

/// GNSS position fix `z = p + b + R(theta) * lever + noise`.
///
/// `lever` is the antenna offset in the body frame. Rejected fixes leave the
/// state untouched.
pub fn update_gnss(
    est: &StateEstimate,
    z: Point2<f64>,
    r: &Matrix2<f64>,
    lever: Vector2<f64>,
    gate: &InnovationGate,
) -> Result<(StateEstimate, UpdateReport)> {
    let (pred, h) = gnss_model(&est.state, lever);
    let nu = DVector::from_column_slice(&[z.x - pred.x, z.y - pred.y]);
    let rd = DMatrix::from_fn(2, 2, |i, j| r[(i, j)]);
    gated_update(est, &h, &nu, &rd, gate, 2)
}

/// Predicted GNSS antenna position (state position plus receiver bias and the
/// rotated lever arm) with its 2x7 Jacobian.
pub fn gnss_model(s: &VehicleState, lever: Vector2<f64>) -> (Point2<f64>, DMatrix<f64>) {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let pred = Point2::new(
        s.x + s.bias_x + cos_t * lever.x - sin_t * lever.y,
        s.y + s.bias_y + sin_t * lever.x + cos_t * lever.y,
    );
    let mut h = DMatrix::zeros(2, STATE_DIM);
    h[(0, 0)] = 1.0;
    h[(0, 2)] = -sin_t * lever.x - cos_t * lever.y;
    h[(0, 5)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(1, 2)] = cos_t * lever.x - sin_t * lever.y;
    h[(1, 6)] = 1.0;
    (pred, h)
}

/// Differential wheel-speed pair `z = [v - l/2 * w, v + l/2 * w]` for track
/// width `l`.
pub fn update_wheels(
    est: &StateEstimate,
    z: Vector2<f64>,
    r: &Matrix2<f64>,
    track: f64,
    gate: &InnovationGate,
) -> Result<(StateEstimate, UpdateReport)> {
    if !(track > 0.0) {
        return Err(Error::domain(format!("track width must be positive, got {track}")));
    }
    let (pred, h) = wheel_model(&est.state, track);
    let nu = DVector::from_column_slice(&[z.x - pred.x, z.y - pred.y]);
    let rd = DMatrix::from_fn(2, 2, |i, j| r[(i, j)]);
    gated_update(est, &h, &nu, &rd, gate, 2)
}

/// Predicted left/right wheel speeds for track width `track`, with Jacobian.
pub fn wheel_model(s: &VehicleState, track: f64) -> (Vector2<f64>, DMatrix<f64>) {
    let half = 0.5 * track;
    let pred = Vector2::new(s.v - half * s.yaw_rate, s.v + half * s.yaw_rate);
    let mut h = DMatrix::zeros(2, STATE_DIM);
    h[(0, 3)] = 1.0;
    h[(0, 4)] = -half;
    h[(1, 3)] = 1.0;
    h[(1, 4)] = half;
    (pred, h)
}

/// Yaw-rate gyro `z = theta_dot`.
pub fn update_gyro(
    est: &StateEstimate,
    z: f64,
    r_var: f64,
    gate: &InnovationGate,
) -> Result<(StateEstimate, UpdateReport)> {
    if !(r_var > 0.0) {
        return Err(Error::domain(format!("gyro variance must be positive, got {r_var}")));
    }
    let (pred, h) = gyro_model(&est.state);
    let nu = DVector::from_element(1, z - pred);
    let rd = DMatrix::from_element(1, 1, r_var);
    gated_update(est, &h, &nu, &rd, gate, 1)
}

/// Predicted yaw-rate reading with its 1x7 Jacobian.
pub fn gyro_model(s: &VehicleState) -> (f64, DMatrix<f64>) {
    let mut h = DMatrix::zeros(1, STATE_DIM);
    h[(0, 4)] = 1.0;
    (s.yaw_rate, h)
}

fn gated_update(
    est: &StateEstimate,
    h: &DMatrix<f64>,
    nu: &DVector<f64>,
    r: &DMatrix<f64>,
    gate: &InnovationGate,
    dof: usize,
) -> Result<(StateEstimate, UpdateReport)> {
    let (candidate, nis) = apply_update(est, h, nu, r)?;
    if gate.accepts(nis, dof) {
        Ok((candidate, UpdateReport { attempted: 1, accepted: 1, nis }))
    } else {
        log::debug!("t={:.3}: block rejected, nis={nis:.2} (dof {dof})", est.t);
        Ok((*est, UpdateReport { attempted: 1, accepted: 0, nis }))
    }
}

/// Predicted sensor-frame position of a landmark seen from a mounted 2D
/// sensor, with its 2x7 Jacobian.
pub fn lidar_pair_model(
    s: &VehicleState,
    ext: &Extrinsics,
    m: Point2<f64>,
) -> (Vector2<f64>, DMatrix<f64>) {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (tx, ty) = (ext.translation[0], ext.translation[1]);
    let px = s.x + cos_t * tx - sin_t * ty;
    let py = s.y + sin_t * tx + cos_t * ty;
    // Sensitivity of the sensor origin to heading.
    let gx = -sin_t * tx - cos_t * ty;
    let gy = cos_t * tx - sin_t * ty;
    let theta_s = s.theta + ext.rotation;
    let (ss, cs) = theta_s.sin_cos();
    let (dx, dy) = (m.x - px, m.y - py);
    let h = Vector2::new(cs * dx + ss * dy, -ss * dx + cs * dy);
    let mut jac = DMatrix::zeros(2, STATE_DIM);
    jac[(0, 0)] = -cs;
    jac[(1, 0)] = ss;
    jac[(0, 1)] = -ss;
    jac[(1, 1)] = -cs;
    // Frame rotation plus lever-arm motion.
    jac[(0, 2)] = (-ss * dx + cs * dy) + (-(cs * gx + ss * gy));
    jac[(1, 2)] = (-cs * dx - ss * dy) + (ss * gx - cs * gy);
    (h, jac)
}

/// Stacked update with matched LiDAR pole detections.
///
/// Each matched pair contributes the 2D position of its landmark in the
/// sensor frame. Pairs failing the per-pair chi-square gate are dropped; the
/// survivors are applied as one joint update.
pub fn update_lidar_poles(
    est: &StateEstimate,
    detections: &PoleDetectionSet,
    matches: &MatchSet,
    map: &PoleMap,
    ext: &Extrinsics,
    gate: &InnovationGate,
) -> Result<(StateEstimate, UpdateReport)> {
    let mut blocks = Vec::new();
    for pair in &matches.pairs {
        let det = detections
            .detections
            .get(pair.measurement)
            .ok_or_else(|| Error::domain(format!("match references measurement {}", pair.measurement)))?;
        let lm = map
            .get(pair.landmark)
            .ok_or_else(|| Error::domain(format!("match references unknown landmark {}", pair.landmark)))?;
        let (pred, jac) = lidar_pair_model(&est.state, ext, lm.position);
        let nu = Vector2::new(det.position.x - pred.x, det.position.y - pred.y);
        blocks.push((nu, jac, det.covariance));
    }
    let attempted = blocks.len();
    let mut kept = Vec::new();
    for (nu, jac, r) in blocks {
        let nud = DVector::from_column_slice(&[nu.x, nu.y]);
        let rd = DMatrix::from_fn(2, 2, |i, j| r[(i, j)]);
        let (_, nis) = apply_update(est, &jac, &nud, &rd)?;
        if gate.accepts(nis, 2) {
            kept.push((nud, jac, rd));
        }
    }
    if gate.enabled {
        prune_joint_outliers(est, &mut kept, gate)?;
    }
    stack_and_apply(est, kept, attempted)
}

/// Stacked update with matched camera bearings.
///
/// Each matched pair contributes one wrapped bearing innovation. Pairs
/// failing the per-pair gate are dropped; survivors are applied jointly.
pub fn update_camera_bearings(
    est: &StateEstimate,
    bearings: &BearingSet,
    matches: &MatchSet,
    map: &PoleMap,
    ext: &Extrinsics,
    gate: &InnovationGate,
) -> Result<(StateEstimate, UpdateReport)> {
    let mut blocks = Vec::new();
    let mut attempted = 0;
    for pair in &matches.pairs {
        let b = bearings
            .bearings
            .get(pair.measurement)
            .ok_or_else(|| Error::domain(format!("match references bearing {}", pair.measurement)))?;
        let lm = map
            .get(pair.landmark)
            .ok_or_else(|| Error::domain(format!("match references unknown landmark {}", pair.landmark)))?;
        attempted += 1;
        let Some((pred, jac)) = bearing_model(&est.state, ext, lm.position) else {
            log::warn!("t={:.3}: landmark {} on top of the camera, pair skipped", est.t, pair.landmark);
            continue;
        };
        let nu = angular_diff(b.alpha, pred);
        blocks.push((DVector::from_element(1, nu), jac, DMatrix::from_element(1, 1, b.variance)));
    }
    let mut kept = Vec::new();
    for (nu, jac, r) in blocks {
        let (_, nis) = apply_update(est, &jac, &nu, &r)?;
        if gate.accepts(nis, 1) {
            kept.push((nu, jac, r));
        }
    }
    stack_and_apply(est, kept, attempted)
}

/// Predicted bearing of a landmark in a mounted camera's frame, with its 1x7
/// Jacobian. Returns `None` when the landmark sits on the camera origin.
pub fn bearing_model(
    s: &VehicleState,
    ext: &Extrinsics,
    m: Point2<f64>,
) -> Option<(f64, DMatrix<f64>)> {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let (tx, ty) = (ext.translation[0], ext.translation[1]);
    let px = s.x + cos_t * tx - sin_t * ty;
    let py = s.y + sin_t * tx + cos_t * ty;
    // Sensitivity of the camera origin to heading.
    let gx = -sin_t * tx - cos_t * ty;
    let gy = cos_t * tx - sin_t * ty;
    let (dx, dy) = (m.x - px, m.y - py);
    let r2 = dx * dx + dy * dy;
    if r2 < 1e-6 {
        return None;
    }
    let pred = wrap_angle(dy.atan2(dx) - (s.theta + ext.rotation));
    let mut jac = DMatrix::zeros(1, STATE_DIM);
    jac[(0, 0)] = dy / r2;
    jac[(0, 1)] = -dx / r2;
    jac[(0, 2)] = (dy * gx - dx * gy) / r2 - 1.0;
    Some((pred, jac))
}

type Block = (DVector<f64>, DMatrix<f64>, DMatrix<f64>);

/// Concatenates innovation blocks into one stacked measurement.
fn stack_blocks(blocks: &[Block]) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let rows: usize = blocks.iter().map(|(nu, _, _)| nu.len()).sum();
    let mut h = DMatrix::zeros(rows, STATE_DIM);
    let mut nu = DVector::zeros(rows);
    let mut r = DMatrix::zeros(rows, rows);
    let mut at = 0;
    for (bnu, bh, br) in blocks {
        let n = bnu.len();
        h.view_mut((at, 0), (n, STATE_DIM)).copy_from(bh);
        nu.rows_mut(at, n).copy_from(bnu);
        r.view_mut((at, at), (n, n)).copy_from(br);
        at += n;
    }
    (nu, h, r)
}

/// NIS of several blocks fused as one measurement, correlations included.
fn joint_nis(est: &StateEstimate, blocks: &[Block]) -> Result<f64> {
    let (nu, h, r) = stack_blocks(blocks);
    let (_, nis) = apply_update(est, &h, &nu, &r)?;
    Ok(nis)
}

/// Drops blocks until the stacked innovation is jointly consistent.
///
/// Against a wide prior every pair can look plausible on its own, yet the
/// set can still be incoherent: a wrong pair that happens to sit near a
/// predicted landmark pulls the joint fit instead of standing out in its
/// own residual. The shared pose correlates the blocks, so the joint
/// statistic exposes it; removing whichever block's absence helps the most
/// keeps the consensus and discards the poison.
fn prune_joint_outliers(est: &StateEstimate, kept: &mut Vec<Block>, gate: &InnovationGate) -> Result<()> {
    while kept.len() >= 2 {
        let dof: usize = kept.iter().map(|(nu, _, _)| nu.len()).sum();
        if joint_nis(est, kept)? <= gate.threshold(dof) {
            break;
        }
        let mut drop = 0;
        let mut best = f64::INFINITY;
        for i in 0..kept.len() {
            let rest: Vec<Block> =
                kept.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, b)| b.clone()).collect();
            let nis = joint_nis(est, &rest)?;
            if nis < best {
                best = nis;
                drop = i;
            }
        }
        kept.remove(drop);
    }
    Ok(())
}

fn stack_and_apply(
    est: &StateEstimate,
    kept: Vec<Block>,
    attempted: usize,
) -> Result<(StateEstimate, UpdateReport)> {
    if kept.is_empty() {
        return Ok((*est, UpdateReport { attempted, accepted: 0, nis: 0.0 }));
    }
    let accepted = kept.len();
    let (nu, h, r) = stack_blocks(&kept);
    let (out, nis) = apply_update(est, &h, &nu, &r)?;
    Ok((out, UpdateReport { attempted, accepted, nis }))
}

/// Prior spreads used when the filter is started from the first GNSS fixes.
///
/// Position and heading uncertainties are mostly derived from the fixes
/// themselves; `position_std` and `heading_std` are extra slack added on
/// top (unmodelled init effects such as the chord-versus-tangent offset
/// when starting inside a turn), not the whole budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub position_std: f64,
    pub heading_std: f64,
    pub speed_std: f64,
    pub yaw_rate_std: f64,
    pub bias_std: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { position_std: 0.5, heading_std: 0.05, speed_std: 10.0, yaw_rate_std: 1.0, bias_std: 3.0 }
    }
}

/// Builds the initial estimate from the first two GNSS fixes: position from
/// the second fix (lever arm removed), heading from the displacement between
/// the fixes, zero speed, yaw rate and bias.
///
/// The covariance states what those seeds actually know. A fix observes
/// position plus the receiver bias, so the position variance carries the
/// bias prior and the position-bias cross terms are negative: learning the
/// bias later tightens the position in lockstep. The heading variance is
/// the fix noise projected across the displacement, and the heading error
/// leaks into position through the lever arm.
pub fn initialize_from_fixes(
    t1: f64,
    fix0: Point2<f64>,
    fix1: Point2<f64>,
    lever: Vector2<f64>,
    gnss_sigma: f64,
    cfg: &InitConfig,
) -> Result<StateEstimate> {
    let d = fix1 - fix0;
    if d.norm() < 1e-6 {
        return Err(Error::domain("first two GNSS fixes coincide; heading undefined"));
    }
    if !(gnss_sigma >= 0.0 && gnss_sigma.is_finite()) {
        return Err(Error::domain(format!("GNSS sigma must be finite and non-negative, got {gnss_sigma}")));
    }
    let theta = wrap_angle(d.y.atan2(d.x));
    let (sin_t, cos_t) = theta.sin_cos();
    let state = VehicleState {
        x: fix1.x - (cos_t * lever.x - sin_t * lever.y),
        y: fix1.y - (sin_t * lever.x + cos_t * lever.y),
        theta,
        v: 0.0,
        yaw_rate: 0.0,
        bias_x: 0.0,
        bias_y: 0.0,
    };
    let g2 = gnss_sigma * gnss_sigma;
    let b2 = cfg.bias_std * cfg.bias_std;
    let theta_var = 2.0 * g2 / d.norm_squared() + cfg.heading_std * cfg.heading_std;
    let pos_var =
        g2 + b2 + lever.norm_squared() * theta_var + cfg.position_std * cfg.position_std;
    let mut cov = StateCov::zeros();
    cov[(0, 0)] = pos_var;
    cov[(1, 1)] = pos_var;
    cov[(2, 2)] = theta_var;
    cov[(3, 3)] = cfg.speed_std * cfg.speed_std;
    cov[(4, 4)] = cfg.yaw_rate_std * cfg.yaw_rate_std;
    cov[(5, 5)] = b2;
    cov[(6, 6)] = b2;
    cov[(0, 5)] = -b2;
    cov[(5, 0)] = -b2;
    cov[(1, 6)] = -b2;
    cov[(6, 1)] = -b2;
    Ok(StateEstimate { t: t1, state, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::MatchPair;
    use crate::camera::BearingMeasurement;
    use crate::lidar::PoleDetection;
    use crate::pole_map::Landmark;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    fn random_estimate(rng: &mut ChaCha12Rng) -> StateEstimate {
        let state = VehicleState {
            x: rng.random_range(-50.0..50.0),
            y: rng.random_range(-50.0..50.0),
            theta: rng.random_range(-PI..PI),
            v: rng.random_range(0.0..20.0),
            yaw_rate: rng.random_range(-0.5..0.5),
            bias_x: rng.random_range(-3.0..3.0),
            bias_y: rng.random_range(-3.0..3.0),
        };
        // Random SPD covariance: A * A^T + eps * I.
        let a = StateCov::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let cov = a * a.transpose() + StateCov::identity() * 0.1;
        StateEstimate { t: 0.0, state, cov }
    }

    fn wide_gate() -> InnovationGate {
        InnovationGate::new(false, 0.99).unwrap()
    }

    #[test]
    fn predict_moves_straight() {
        let est = StateEstimate {
            t: 0.0,
            state: VehicleState { x: 0.0, y: 0.0, theta: 0.0, v: 10.0, yaw_rate: 0.0, bias_x: 0.0, bias_y: 0.0 },
            cov: StateCov::identity(),
        };
        let out = predict(&est, 0.1, &ProcessNoise::default()).unwrap();
        assert_relative_eq!(out.state.x, 1.0, epsilon = 1e-15);
        assert_eq!(out.state.y, 0.0);
        assert_eq!(out.t, 0.1);
        assert!(out.cov.trace() > est.cov.trace(), "process noise must grow uncertainty");
    }

    #[test]
    fn predict_rejects_bad_dt() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let est = random_estimate(&mut rng);
        assert!(predict(&est, 0.0, &ProcessNoise::default()).is_err());
        assert!(predict(&est, -0.1, &ProcessNoise::default()).is_err());
    }

    /// Finite-difference check of a Jacobian: perturbs each state component
    /// and compares the observed change of `f` against `jac`.
    fn check_jacobian(
        x0: &StateVector,
        f: &dyn Fn(&StateVector) -> DVector<f64>,
        jac: &DMatrix<f64>,
        angular_rows: &[bool],
    ) {
        let h = 1e-6;
        let f0 = f(x0);
        for col in 0..STATE_DIM {
            let mut xp = *x0;
            let mut xm = *x0;
            xp[col] += h;
            xm[col] -= h;
            let fp = f(&xp);
            let fm = f(&xm);
            for row in 0..f0.len() {
                let num = if angular_rows[row] {
                    angular_diff(fp[row], fm[row]) / (2.0 * h)
                } else {
                    (fp[row] - fm[row]) / (2.0 * h)
                };
                let got = jac[(row, col)];
                let scale = 1.0_f64.max(num.abs());
                assert!(
                    (num - got).abs() / scale < 1e-5,
                    "jacobian mismatch at ({row}, {col}): fd={num} analytic={got}"
                );
            }
        }
    }

    #[test]
    fn predict_jacobian_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(52);
        let dt = 0.05;
        for _ in 0..100 {
            let est = random_estimate(&mut rng);
            let x0 = est.state.as_vector();
            let (sin_t, cos_t) = est.state.theta.sin_cos();
            let mut f = DMatrix::<f64>::identity(STATE_DIM, STATE_DIM);
            f[(0, 2)] = -est.state.v * sin_t * dt;
            f[(0, 3)] = cos_t * dt;
            f[(1, 2)] = est.state.v * cos_t * dt;
            f[(1, 3)] = sin_t * dt;
            f[(2, 4)] = dt;
            let model = |x: &StateVector| {
                let s = VehicleState::from_vector(x);
                let (st, ct) = s.theta.sin_cos();
                DVector::from_column_slice(&[
                    s.x + s.v * ct * dt,
                    s.y + s.v * st * dt,
                    s.theta + s.yaw_rate * dt,
                    s.v,
                    s.yaw_rate,
                    s.bias_x,
                    s.bias_y,
                ])
            };
            check_jacobian(&x0, &model, &f, &[false; 7]);
        }
    }

    #[test]
    fn gnss_update_at_truth_changes_nothing() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        let est = random_estimate(&mut rng);
        let s = est.state;
        let lever = Vector2::new(0.5, 0.1);
        let (sin_t, cos_t) = s.theta.sin_cos();
        let z = Point2::new(
            s.x + s.bias_x + cos_t * lever.x - sin_t * lever.y,
            s.y + s.bias_y + sin_t * lever.x + cos_t * lever.y,
        );
        let r = Matrix2::from_diagonal_element(0.49);
        let (out, rep) = update_gnss(&est, z, &r, lever, &wide_gate()).unwrap();
        assert_eq!(rep.accepted, 1);
        assert_relative_eq!(out.state.x, s.x, epsilon = 1e-12);
        assert_relative_eq!(out.state.y, s.y, epsilon = 1e-12);
        assert!(out.cov.trace() < est.cov.trace(), "information must not decrease");
    }

    #[test]
    fn gnss_jacobian_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(54);
        let lever = Vector2::new(0.5, -0.2);
        for _ in 0..100 {
            let est = random_estimate(&mut rng);
            let x0 = est.state.as_vector();
            let s = est.state;
            let (sin_t, cos_t) = s.theta.sin_cos();
            let mut h = DMatrix::zeros(2, STATE_DIM);
            h[(0, 0)] = 1.0;
            h[(0, 2)] = -sin_t * lever.x - cos_t * lever.y;
            h[(0, 5)] = 1.0;
            h[(1, 1)] = 1.0;
            h[(1, 2)] = cos_t * lever.x - sin_t * lever.y;
            h[(1, 6)] = 1.0;
            let model = |x: &StateVector| {
                let s = VehicleState::from_vector(x);
                let (st, ct) = s.theta.sin_cos();
                DVector::from_column_slice(&[
                    s.x + s.bias_x + ct * lever.x - st * lever.y,
                    s.y + s.bias_y + st * lever.x + ct * lever.y,
                ])
            };
            check_jacobian(&x0, &model, &h, &[false, false]);
        }
    }

    #[test]
    fn wheel_speed_model_splits_track() {
        // v = 10, yaw rate 0.5, track 1.5: left 9.625, right 10.375.
        let est = StateEstimate {
            t: 0.0,
            state: VehicleState { x: 0.0, y: 0.0, theta: 0.0, v: 10.0, yaw_rate: 0.5, bias_x: 0.0, bias_y: 0.0 },
            cov: StateCov::identity(),
        };
        let z = Vector2::new(9.625, 10.375);
        let r = Matrix2::from_diagonal_element(1e-4);
        let (out, rep) = update_wheels(&est, z, &r, 1.5, &wide_gate()).unwrap();
        assert_eq!(rep.accepted, 1);
        assert_relative_eq!(rep.nis, 0.0, epsilon = 1e-20);
        assert_relative_eq!(out.state.v, 10.0, epsilon = 1e-12);
        assert_relative_eq!(out.state.yaw_rate, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn dr_updates_never_grow_the_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for _ in 0..200 {
            let est = random_estimate(&mut rng);
            let z = Vector2::new(rng.random_range(-5.0..25.0), rng.random_range(-5.0..25.0));
            let r = Matrix2::from_diagonal_element(rng.random_range(1e-4..0.1));
            let (out, _) = update_wheels(&est, z, &r, 1.6, &wide_gate()).unwrap();
            assert!(out.cov.trace() <= est.cov.trace() + 1e-9);
            let (out, _) = update_gyro(&est, rng.random_range(-1.0..1.0), 1e-4, &wide_gate()).unwrap();
            assert!(out.cov.trace() <= est.cov.trace() + 1e-9);
        }
    }

    #[test]
    fn gyro_fusion_matches_scalar_information_form() {
        // With a diagonal prior the yaw-rate component decouples and the
        // posterior variance must equal (1/p + 1/r)^-1.
        let p = 0.04;
        let r = 0.01;
        let mut cov = StateCov::identity();
        cov[(4, 4)] = p;
        let est = StateEstimate {
            t: 0.0,
            state: VehicleState { x: 0.0, y: 0.0, theta: 0.0, v: 5.0, yaw_rate: 0.1, bias_x: 0.0, bias_y: 0.0 },
            cov,
        };
        let (out, _) = update_gyro(&est, 0.3, r, &wide_gate()).unwrap();
        let expected = 1.0 / (1.0 / p + 1.0 / r);
        assert_relative_eq!(out.cov[(4, 4)], expected, epsilon = 1e-12);
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let mut rng = ChaCha12Rng::seed_from_u64(56);
        for _ in 0..100 {
            let est = random_estimate(&mut rng);
            let stepped = predict(&est, 0.02, &ProcessNoise::default()).unwrap();
            let z = Point2::new(stepped.state.x + rng.random_range(-2.0..2.0), stepped.state.y);
            let r = Matrix2::from_diagonal_element(0.5);
            let (out, _) = update_gnss(&stepped, z, &r, Vector2::zeros(), &wide_gate()).unwrap();
            let sym_err = (out.cov - out.cov.transpose()).norm();
            assert!(sym_err < 1e-12, "asymmetry {sym_err}");
            let eig = out.cov.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l > -1e-9), "negative eigenvalue: {:?}", eig.eigenvalues);
        }
    }

    fn lidar_setup() -> (StateEstimate, PoleMap, Extrinsics) {
        let est = StateEstimate {
            t: 0.0,
            state: VehicleState { x: 4.0, y: -2.0, theta: 0.6, v: 8.0, yaw_rate: 0.1, bias_x: 1.0, bias_y: -0.5 },
            cov: StateCov::identity() * 0.5,
        };
        let map = PoleMap::new(vec![
            Landmark { id: 10, position: Point2::new(12.0, 3.0) },
            Landmark { id: 11, position: Point2::new(8.0, -9.0) },
        ])
        .unwrap();
        let ext = Extrinsics::new(1.2, 0.0, 0.1);
        (est, map, ext)
    }

    #[test]
    fn lidar_update_at_truth_changes_nothing() {
        let (est, map, ext) = lidar_setup();
        let (pred, _) = lidar_pair_model(&est.state, &ext, map.get(10).unwrap().position);
        let detections = PoleDetectionSet {
            detections: vec![PoleDetection {
                position: Point2::new(pred.x, pred.y),
                covariance: Matrix2::from_diagonal_element(0.0225),
            }],
        };
        let matches = MatchSet {
            pairs: vec![MatchPair { measurement: 0, landmark: 10 }],
            unmatched_measurements: vec![],
            unmatched_landmarks: vec![11],
        };
        let (out, rep) = update_lidar_poles(&est, &detections, &matches, &map, &ext, &wide_gate()).unwrap();
        assert_eq!((rep.attempted, rep.accepted), (1, 1));
        assert_relative_eq!(out.state.x, est.state.x, epsilon = 1e-9);
        assert_relative_eq!(out.state.theta, est.state.theta, epsilon = 1e-9);
        assert!(out.cov.trace() < est.cov.trace());
    }

    #[test]
    fn lidar_jacobian_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(57);
        let ext = Extrinsics::new(1.2, -0.3, 0.4);
        for _ in 0..100 {
            let est = random_estimate(&mut rng);
            let m = Point2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
            let x0 = est.state.as_vector();
            let (_, jac) = lidar_pair_model(&est.state, &ext, m);
            let model = |x: &StateVector| {
                let s = VehicleState::from_vector(x);
                let (pred, _) = lidar_pair_model(&s, &ext, m);
                DVector::from_column_slice(&[pred.x, pred.y])
            };
            check_jacobian(&x0, &model, &jac, &[false, false]);
            // Speed, yaw rate and bias never enter the landmark observation.
            for col in 3..STATE_DIM {
                assert_eq!(jac[(0, col)], 0.0);
                assert_eq!(jac[(1, col)], 0.0);
            }
        }
    }

    #[test]
    fn camera_update_at_truth_changes_nothing() {
        let (est, map, ext) = lidar_setup();
        let s = est.state;
        let cam_pose = ext.sensor_pose(&s.pose());
        let q = cam_pose.transform_to_frame(map.get(10).unwrap().position);
        let truth_alpha = wrap_angle(q.y.atan2(q.x));
        let bearings = BearingSet {
            camera: "front".into(),
            bearings: vec![BearingMeasurement { alpha: truth_alpha, variance: 1e-5 }],
        };
        let matches = MatchSet {
            pairs: vec![MatchPair { measurement: 0, landmark: 10 }],
            unmatched_measurements: vec![],
            unmatched_landmarks: vec![],
        };
        let (out, rep) = update_camera_bearings(&est, &bearings, &matches, &map, &ext, &wide_gate()).unwrap();
        assert_eq!((rep.attempted, rep.accepted), (1, 1));
        assert_relative_eq!(out.state.x, s.x, epsilon = 1e-9);
        assert_relative_eq!(out.state.theta, s.theta, epsilon = 1e-9);
    }

    #[test]
    fn camera_jacobian_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(58);
        let ext = Extrinsics::new(0.8, 0.3, 1.1);
        for _ in 0..100 {
            let est = random_estimate(&mut rng);
            let m = Point2::new(
                est.state.x + rng.random_range(5.0..40.0),
                est.state.y + rng.random_range(5.0..40.0),
            );
            let x0 = est.state.as_vector();
            // Rebuild the analytic Jacobian through the public update by
            // exploiting that it is shared with the internal model: compute
            // it directly here.
            let s = est.state;
            let (sin_t, cos_t) = s.theta.sin_cos();
            let (tx, ty) = (ext.translation[0], ext.translation[1]);
            let px = s.x + cos_t * tx - sin_t * ty;
            let py = s.y + sin_t * tx + cos_t * ty;
            let gx = -sin_t * tx - cos_t * ty;
            let gy = cos_t * tx - sin_t * ty;
            let (dx, dy) = (m.x - px, m.y - py);
            let r2 = dx * dx + dy * dy;
            let mut jac = DMatrix::zeros(1, STATE_DIM);
            jac[(0, 0)] = dy / r2;
            jac[(0, 1)] = -dx / r2;
            jac[(0, 2)] = (dy * gx - dx * gy) / r2 - 1.0;
            let model = |x: &StateVector| {
                let s = VehicleState::from_vector(x);
                let cam_pose = ext.sensor_pose(&s.pose());
                let q = cam_pose.transform_to_frame(m);
                DVector::from_element(1, q.y.atan2(q.x))
            };
            check_jacobian(&x0, &model, &jac, &[true]);
        }
    }

    #[test]
    fn distant_landmark_bearing_is_heading_dominated() {
        let s = VehicleState { x: 0.0, y: 0.0, theta: 0.2, v: 0.0, yaw_rate: 0.0, bias_x: 0.0, bias_y: 0.0 };
        let (sin_t, cos_t) = s.theta.sin_cos();
        let ext = Extrinsics::new(1.0, 0.0, 0.0);
        let m = Point2::new(900.0, 500.0);
        let px = s.x + cos_t * ext.translation[0];
        let py = s.y + sin_t * ext.translation[0];
        let (dx, dy) = (m.x - px, m.y - py);
        let r2 = dx * dx + dy * dy;
        let col_theta: f64 = (dy * (-sin_t * ext.translation[0]) - dx * (cos_t * ext.translation[0])) / r2 - 1.0;
        assert_relative_eq!(col_theta, -1.0, max_relative = 1e-2);
        assert!((dy / r2).abs() < 1e-2 && (dx / r2).abs() < 1e-2);
    }

    #[test]
    fn bearing_innovation_wraps_at_the_seam() {
        // Landmark nearly behind: predicted bearing ~ +pi - eps, measured
        // ~ -pi + eps. The wrapped innovation is tiny, not ~ 2*pi.
        let est = StateEstimate {
            t: 0.0,
            state: VehicleState { x: 0.0, y: 0.0, theta: 0.0, v: 0.0, yaw_rate: 0.0, bias_x: 0.0, bias_y: 0.0 },
            cov: StateCov::identity() * 0.01,
        };
        let map = PoleMap::new(vec![Landmark { id: 1, position: Point2::new(-50.0, -0.05) }]).unwrap();
        let ext = Extrinsics::default();
        let pred = (-0.05f64).atan2(-50.0); // just below -pi + eps? No: negative y => ~ -pi + 0.001
        let z = wrap_angle(pred + 0.004); // crosses the seam to just above +pi - eps region
        let bearings = BearingSet {
            camera: "rear".into(),
            bearings: vec![BearingMeasurement { alpha: z, variance: 1e-4 }],
        };
        let matches = MatchSet {
            pairs: vec![MatchPair { measurement: 0, landmark: 1 }],
            unmatched_measurements: vec![],
            unmatched_landmarks: vec![],
        };
        let (out, rep) = update_camera_bearings(&est, &bearings, &matches, &map, &ext, &wide_gate()).unwrap();
        assert_eq!(rep.accepted, 1);
        // A 2*pi innovation would yank the heading violently; the wrapped one
        // moves it by far less than 0.01 rad.
        assert!((out.state.theta - est.state.theta).abs() < 0.01, "seam not handled: {}", out.state.theta);
    }

    #[test]
    fn gate_rejects_absurd_measurements() {
        let mut rng = ChaCha12Rng::seed_from_u64(59);
        let est = random_estimate(&mut rng);
        let gate = InnovationGate::new(true, 0.99).unwrap();
        let z = Point2::new(est.state.x + 500.0, est.state.y - 500.0);
        let r = Matrix2::from_diagonal_element(0.5);
        let (out, rep) = update_gnss(&est, z, &r, Vector2::zeros(), &gate).unwrap();
        assert_eq!(rep.accepted, 0);
        assert_eq!(out.state, est.state);
        assert_eq!(out.cov, est.cov);
        // Same measurement passes with the gate disabled.
        let (out, rep) = update_gnss(&est, z, &r, Vector2::zeros(), &wide_gate()).unwrap();
        assert_eq!(rep.accepted, 1);
        assert!((out.state.x - est.state.x).abs() > 1.0);
    }

    #[test]
    fn chi2_thresholds_are_standard() {
        let gate = InnovationGate::new(true, 0.99).unwrap();
        assert_relative_eq!(gate.threshold(1), 6.634_896_601_021_213, max_relative = 1e-9);
        assert_relative_eq!(gate.threshold(2), 9.210_340_371_976_18, max_relative = 1e-9);
        assert!(InnovationGate::new(true, 1.2).is_err());
    }

    #[test]
    fn initialization_uses_fix_displacement() {
        let cfg = InitConfig::default();
        let est = initialize_from_fixes(
            5.0,
            Point2::new(10.0, 20.0),
            Point2::new(10.0, 30.0),
            Vector2::zeros(),
            0.7,
            &cfg,
        )
        .unwrap();
        assert_eq!(est.t, 5.0);
        assert_relative_eq!(est.state.theta, PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(est.state.x, 10.0);
        assert_relative_eq!(est.state.y, 30.0);
        assert_eq!(est.state.v, 0.0);
        // Position carries the fix noise, the bias prior and the slack floor.
        assert_relative_eq!(est.cov[(0, 0)], 0.49 + 9.0 + 0.25, epsilon = 1e-12);
        assert_relative_eq!(est.cov[(2, 2)], 2.0 * 0.49 / 100.0 + 0.0025, epsilon = 1e-12);
        assert_relative_eq!(est.cov[(5, 5)], 9.0);
        // A fix observes position plus bias, so their errors anti-correlate.
        assert_relative_eq!(est.cov[(0, 5)], -9.0);
        assert_relative_eq!(est.cov[(1, 6)], -9.0);
        assert!(initialize_from_fixes(
            0.0,
            Point2::origin(),
            Point2::origin(),
            Vector2::zeros(),
            0.7,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn initialization_covariance_stays_positive_definite() {
        // The position-bias cross terms must never tip the prior over the
        // PSD edge, including the noiseless-GNSS corner.
        for sigma in [0.0, 0.7, 3.0] {
            let est = initialize_from_fixes(
                0.0,
                Point2::origin(),
                Point2::new(8.0, 3.0),
                Vector2::new(0.5, 0.0),
                sigma,
                &InitConfig::default(),
            )
            .unwrap();
            assert!(est.cov.cholesky().is_some(), "init cov not SPD at sigma {sigma}");
        }
    }

    #[test]
    fn noiseless_cycles_stay_on_truth() {
        // Straight-line truth propagated by the same discrete model; every
        // sensor reports its exact noiseless value. 1000 predict/update
        // rounds must not drift.
        let dt = 0.01;
        let track = 1.6;
        let lever = Vector2::new(0.5, 0.0);
        let lidar_ext = Extrinsics::new(1.2, 0.0, 0.0);
        let cam_ext = Extrinsics::new(1.0, 0.2, 0.3);
        let mut lms = Vec::new();
        for i in 0..30 {
            lms.push(Landmark { id: i, position: Point2::new(5.0 + 10.0 * i as f64, 5.0) });
        }
        let map = PoleMap::new(lms).unwrap();
        let truth0 = VehicleState { x: 0.0, y: 0.0, theta: 0.3, v: 10.0, yaw_rate: 0.0, bias_x: 1.5, bias_y: -1.0 };
        let mut truth = truth0;
        let mut est = StateEstimate { t: 0.0, state: truth0, cov: StateCov::identity() * 0.1 };
        let q = ProcessNoise::default();
        let gate = InnovationGate::default();
        for _ in 0..1000 {
            let (st, ct) = truth.theta.sin_cos();
            truth.x += truth.v * ct * dt;
            truth.y += truth.v * st * dt;
            est = predict(&est, dt, &q).unwrap();

            let z = Vector2::new(truth.v - 0.5 * track * truth.yaw_rate, truth.v + 0.5 * track * truth.yaw_rate);
            let (next, _) = update_wheels(&est, z, &Matrix2::from_diagonal_element(1e-3), track, &gate).unwrap();
            est = next;
            let (next, _) = update_gyro(&est, truth.yaw_rate, 1e-4, &gate).unwrap();
            est = next;

            let zg = Point2::new(
                truth.x + truth.bias_x + ct * lever.x - st * lever.y,
                truth.y + truth.bias_y + st * lever.x + ct * lever.y,
            );
            let (next, _) =
                update_gnss(&est, zg, &Matrix2::from_diagonal_element(0.49), lever, &gate).unwrap();
            est = next;

            // Nearest landmark observed by the LiDAR model and the camera.
            let nearest = map
                .iter()
                .min_by(|a, b| {
                    let da = (a.position - Point2::new(truth.x, truth.y)).norm();
                    let db = (b.position - Point2::new(truth.x, truth.y)).norm();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let (pred, _) = lidar_pair_model(&truth, &lidar_ext, nearest.position);
            let dets = PoleDetectionSet {
                detections: vec![PoleDetection {
                    position: Point2::new(pred.x, pred.y),
                    covariance: Matrix2::from_diagonal_element(0.0225),
                }],
            };
            let matches = MatchSet {
                pairs: vec![MatchPair { measurement: 0, landmark: nearest.id }],
                unmatched_measurements: vec![],
                unmatched_landmarks: vec![],
            };
            let (next, _) = update_lidar_poles(&est, &dets, &matches, &map, &lidar_ext, &gate).unwrap();
            est = next;

            let cam_pose = cam_ext.sensor_pose(&truth.pose());
            let qc = cam_pose.transform_to_frame(nearest.position);
            let bearings = BearingSet {
                camera: "front".into(),
                bearings: vec![BearingMeasurement { alpha: wrap_angle(qc.y.atan2(qc.x)), variance: 1e-5 }],
            };
            let (next, _) = update_camera_bearings(&est, &bearings, &matches, &map, &cam_ext, &gate).unwrap();
            est = next;
        }
        assert!((est.state.x - truth.x).abs() < 1e-6, "x drift: {}", est.state.x - truth.x);
        assert!((est.state.y - truth.y).abs() < 1e-6);
        assert!(angular_diff(est.state.theta, truth.theta).abs() < 1e-6);
        assert!((est.state.v - truth.v).abs() < 1e-6);
        assert!((est.state.bias_x - truth.bias_x).abs() < 1e-6);
    }
}
