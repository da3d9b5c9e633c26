//! Planar geometry shared by every other module: angle wrapping, frame
//! transforms and sensor mounting offsets.
//!
//! All headings and bearings live in the half-open interval `[-pi, pi)`.
//! Using one convention everywhere keeps innovation terms and association
//! costs free of 2*pi jumps.

use nalgebra::{Matrix2, Point2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `[-pi, pi)`.
///
/// The result differs from the input by an exact integer multiple of 2*pi
/// (up to floating-point rounding). `pi` itself maps to `-pi`.
///
/// # Panics
/// Panics if `a` is not finite.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    assert!(a.is_finite(), "wrap_angle: non-finite angle {a}");
    if (-PI..PI).contains(&a) {
        return a; // already canonical; keeps wrapping exactly idempotent
    }
    let r = (a + PI).rem_euclid(TWO_PI) - PI;
    // rem_euclid can return exactly TWO_PI when (a + PI) is a tiny negative
    // number, which would leave r == PI; fold that back onto -PI.
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Shortest signed angular difference `m - y`, wrapped into `[-pi, pi)`.
///
/// This is the residual to use whenever two angles are compared; plain
/// subtraction is wrong near the `+-pi` seam.
///
/// # Panics
/// Panics if either argument is not finite.
#[inline]
pub fn angular_diff(m: f64, y: f64) -> f64 {
    assert!(m.is_finite() && y.is_finite(), "angular_diff: non-finite input");
    wrap_angle(m - y)
}

/// 2x2 rotation matrix for `theta`.
#[inline]
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// A planar pose: position in the working frame plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in `[-pi, pi)`.
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    #[inline]
    pub fn position(&self) -> Point2<f64> {
        Point2::new(self.x, self.y)
    }

    /// Expresses a point given in the world frame in this pose's body frame.
    #[inline]
    pub fn transform_to_frame(&self, p: Point2<f64>) -> Point2<f64> {
        let d = p - self.position();
        Point2::from(rotation(-self.theta) * d)
    }

    /// Inverse of [`transform_to_frame`](Self::transform_to_frame): maps a
    /// body-frame point back into the world frame.
    #[inline]
    pub fn transform_from_frame(&self, p: Point2<f64>) -> Point2<f64> {
        self.position() + rotation(self.theta) * p.coords
    }
}

/// Rigid mounting offset of a sensor relative to the vehicle body frame
/// (origin at the rear-axle center, x forward, y left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics {
    /// Sensor origin in the body frame [m].
    pub translation: [f64; 2],
    /// Sensor yaw relative to the body x-axis [rad].
    pub rotation: f64,
}

impl Extrinsics {
    pub fn new(tx: f64, ty: f64, rotation: f64) -> Self {
        Self { translation: [tx, ty], rotation: wrap_angle(rotation) }
    }

    #[inline]
    pub fn translation_vec(&self) -> Vector2<f64> {
        Vector2::new(self.translation[0], self.translation[1])
    }

    /// World pose of the sensor when the vehicle is at `vehicle`.
    pub fn sensor_pose(&self, vehicle: &Pose2D) -> Pose2D {
        let p = vehicle.position() + rotation(vehicle.theta) * self.translation_vec();
        Pose2D::new(p.x, p.y, vehicle.theta + self.rotation)
    }
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self { translation: [0.0, 0.0], rotation: 0.0 }
    }
}
