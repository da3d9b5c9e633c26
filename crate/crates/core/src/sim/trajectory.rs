//! Ground-truth path and trajectory generation
//!
//! A path is a chain of straight and circular-arc segments traversed at
//! constant speed, which keeps the pose continuously differentiable: heading
//! is continuous across joints and the yaw rate is piecewise constant.
//! Everything is parameterized by arc length so sensor models can query the
//! exact pose at arbitrary timestamps without interpolation.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2D};
use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

/// One path piece. Arc angles are in radians, positive turning left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    Arc { radius: f64, angle: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match self {
            Segment::Straight { length } => *length,
            Segment::Arc { radius, angle } => radius * angle.abs(),
        }
    }

    fn curvature(&self) -> f64 {
        match self {
            Segment::Straight { .. } => 0.0,
            Segment::Arc { radius, angle } => angle.signum() / radius,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Segment::Straight { length } => {
                if !(length > 0.0 && length.is_finite()) {
                    return Err(Error::scenario(format!("straight length must be positive, got {length}")));
                }
            }
            Segment::Arc { radius, angle } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::scenario(format!("arc radius must be positive, got {radius}")));
                }
                if !(angle != 0.0 && angle.is_finite()) {
                    return Err(Error::scenario("arc angle must be non-zero"));
                }
            }
        }
        Ok(())
    }

    /// Pose after walking `s` meters into the segment from `start`.
    fn pose_at(&self, start: &Pose2D, s: f64) -> Pose2D {
        match *self {
            Segment::Straight { .. } => {
                let (sin_t, cos_t) = start.theta.sin_cos();
                Pose2D::new(start.x + s * cos_t, start.y + s * sin_t, start.theta)
            }
            Segment::Arc { radius, angle } => {
                // Center sits one radius to the side of travel.
                let sign = angle.signum();
                let (sin_0, cos_0) = start.theta.sin_cos();
                let cx = start.x - sign * radius * sin_0;
                let cy = start.y + sign * radius * cos_0;
                let theta = start.theta + sign * (s / radius);
                let (sin_t, cos_t) = theta.sin_cos();
                Pose2D::new(cx + sign * radius * sin_t, cy - sign * radius * cos_t, theta)
            }
        }
    }
}

/// Arc-length-parameterized path: start pose plus segments, with the start
/// pose of every segment precomputed.
#[derive(Debug, Clone)]
pub struct PathModel {
    pub start: Pose2D,
    pub segments: Vec<Segment>,
    seg_starts: Vec<Pose2D>,
    cum_lengths: Vec<f64>,
}

impl PathModel {
    pub fn new(start: Pose2D, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::scenario("path needs at least one segment"));
        }
        let mut seg_starts = Vec::with_capacity(segments.len());
        let mut cum_lengths = Vec::with_capacity(segments.len() + 1);
        cum_lengths.push(0.0);
        let mut pose = start;
        let mut total = 0.0;
        for seg in &segments {
            seg.validate()?;
            seg_starts.push(pose);
            pose = seg.pose_at(&pose, seg.length());
            total += seg.length();
            cum_lengths.push(total);
        }
        Ok(Self { start, segments, seg_starts, cum_lengths })
    }

    pub fn total_length(&self) -> f64 {
        *self.cum_lengths.last().expect("non-empty")
    }

    /// Pose and curvature at arc length `s` from the path start.
    pub fn pose_at(&self, s: f64) -> Result<(Pose2D, f64)> {
        let total = self.total_length();
        if !s.is_finite() || s < -1e-9 || s > total + 1e-9 {
            return Err(Error::domain(format!("arc length {s} outside [0, {total}]")));
        }
        let s = s.clamp(0.0, total);
        // Last segment whose start is at or before s.
        let idx = match self.cum_lengths.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.segments.len() - 1),
            Err(i) => i - 1,
        };
        let local = s - self.cum_lengths[idx];
        let seg = &self.segments[idx];
        Ok((seg.pose_at(&self.seg_starts[idx], local), seg.curvature()))
    }

    /// Builds a path through waypoints, rounding every interior corner with a
    /// circular fillet of the given radius.
    pub fn from_waypoints(waypoints: &[[f64; 2]], fillet_radius: f64) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::scenario("waypoint path needs at least two points"));
        }
        if !(fillet_radius > 0.0) && waypoints.len() > 2 {
            return Err(Error::scenario("fillet radius must be positive for interior corners"));
        }
        let pts: Vec<Point2<f64>> = waypoints.iter().map(|w| Point2::new(w[0], w[1])).collect();
        let mut dirs = Vec::new();
        let mut leg_lengths = Vec::new();
        for pair in pts.windows(2) {
            let d: Vector2<f64> = pair[1] - pair[0];
            let len = d.norm();
            if len < 1e-9 {
                return Err(Error::scenario("consecutive waypoints coincide"));
            }
            dirs.push(d / len);
            leg_lengths.push(len);
        }
        // Turn angle and tangent length consumed at each interior corner.
        let mut turns = Vec::new();
        let mut tangents = Vec::new();
        for i in 0..dirs.len() - 1 {
            let turn = wrap_angle(dirs[i + 1].y.atan2(dirs[i + 1].x) - dirs[i].y.atan2(dirs[i].x));
            if turn.abs() > std::f64::consts::PI - 1e-6 {
                return Err(Error::scenario("waypoint corner folds back on itself"));
            }
            let tangent = if turn.abs() < 1e-12 { 0.0 } else { fillet_radius * (turn.abs() / 2.0).tan() };
            turns.push(turn);
            tangents.push(tangent);
        }
        let mut segments = Vec::new();
        for i in 0..leg_lengths.len() {
            let head = if i == 0 { 0.0 } else { tangents[i - 1] };
            let tail = if i == leg_lengths.len() - 1 { 0.0 } else { tangents[i] };
            let straight = leg_lengths[i] - head - tail;
            if straight < -1e-9 {
                return Err(Error::scenario(format!(
                    "fillet radius {fillet_radius} too large for leg {i} of length {}",
                    leg_lengths[i]
                )));
            }
            if straight > 1e-9 {
                segments.push(Segment::Straight { length: straight });
            }
            if i < leg_lengths.len() - 1 && turns[i].abs() >= 1e-12 {
                segments.push(Segment::Arc { radius: fillet_radius, angle: turns[i] });
            }
        }
        let theta0 = dirs[0].y.atan2(dirs[0].x);
        PathModel::new(Pose2D::new(pts[0].x, pts[0].y, theta0), segments)
    }

    /// Samples the path at constant speed and fixed rate, starting at t = 0.
    pub fn sample(&self, speed: f64, rate: f64) -> Result<Trajectory> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::scenario(format!("speed must be positive, got {speed}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::scenario(format!("sample rate must be positive, got {rate}")));
        }
        let duration = self.total_length() / speed;
        let n = ((duration * rate) + 1e-9).floor() as usize;
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = k as f64 / rate;
            let s = (speed * t).min(self.total_length());
            let (pose, kappa) = self.pose_at(s)?;
            samples.push(TruthSample { t, pose, v: speed, yaw_rate: speed * kappa });
        }
        Ok(Trajectory { samples })
    }

    /// End time of the path when traversed at `speed`.
    pub fn duration(&self, speed: f64) -> f64 {
        self.total_length() / speed
    }
}

/// Exact vehicle state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub pose: Pose2D,
    pub v: f64,
    pub yaw_rate: f64,
}

/// Densely sampled ground truth.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<TruthSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample nearest in time to `t`, if any lies within `tol` seconds.
    pub fn nearest(&self, t: f64, tol: f64) -> Option<&TruthSample> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self
            .samples
            .partition_point(|s| s.t < t)
            .min(self.samples.len() - 1);
        let mut best = idx;
        if idx > 0 && (self.samples[idx - 1].t - t).abs() < (self.samples[idx].t - t).abs() {
            best = idx - 1;
        }
        let s = &self.samples[best];
        if (s.t - t).abs() <= tol {
            Some(s)
        } else {
            None
        }
    }
}
