//! Bearing-only camera measurements.
//!
//! Upstream image detectors report pole base points as pixel columns; only
//! the horizontal bearing of a pole carries localization information, so a
//! detection `(u, v)` is reduced to the angle `atan2(u - cu, fu)` with a
//! variance propagated from the pixel noise through that same mapping.

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics of one camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    /// Focal lengths [px].
    pub fu: f64,
    pub fv: f64,
    /// Principal point [px].
    pub cu: f64,
    pub cv: f64,
    /// Image size [px].
    pub width: f64,
    pub height: f64,
}

impl PinholeIntrinsics {
    pub fn new(fu: f64, fv: f64, cu: f64, cv: f64, width: f64, height: f64) -> Result<Self> {
        if !(fu > 0.0 && fv > 0.0) {
            return Err(Error::domain(format!("focal lengths must be positive, got fu={fu} fv={fv}")));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::domain("image size must be positive"));
        }
        if !(0.0..width).contains(&cu) || !(0.0..height).contains(&cv) {
            return Err(Error::domain("principal point must lie inside the image"));
        }
        Ok(Self { fu, fv, cu, cv, width, height })
    }
}

/// One pixel-space pole detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDetection {
    pub u: f64,
    pub v: f64,
    /// Detector confidence in `[0, 1]`.
    pub score: f64,
}

/// Detections of one camera frame. Construction checks that every detection
/// lies inside the image and carries a score in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PixelDetectionSet {
    pub detections: Vec<PixelDetection>,
}

impl PixelDetectionSet {
    pub fn new(detections: Vec<PixelDetection>, k: &PinholeIntrinsics) -> Result<Self> {
        for d in &detections {
            if !(0.0..k.width).contains(&d.u) || !(0.0..k.height).contains(&d.v) {
                return Err(Error::domain(format!("detection ({}, {}) outside image", d.u, d.v)));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::domain(format!("score {} outside [0, 1]", d.score)));
            }
        }
        Ok(Self { detections })
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Axis-aligned pixel rectangle, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl PixelRect {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        (self.u_min..=self.u_max).contains(&u) && (self.v_min..=self.v_max).contains(&v)
    }
}

/// Drops every detection that falls inside any of the given exclusion
/// rectangles (self-reflections on the own-vehicle roof, hood edges, ...).
pub fn apply_exclusion_masks(ds: &PixelDetectionSet, masks: &[PixelRect]) -> PixelDetectionSet {
    PixelDetectionSet {
        detections: ds
            .detections
            .iter()
            .filter(|d| !masks.iter().any(|m| m.contains(d.u, d.v)))
            .copied()
            .collect(),
    }
}

/// Horizontal bearing of a pixel column, in `[-pi, pi)` (in practice within
/// `(-pi/2, pi/2)` for any finite focal length).
///
/// Fails when the pixel lies outside the image.
pub fn pixel_to_bearing(d: &PixelDetection, k: &PinholeIntrinsics) -> Result<f64> {
    if !(0.0..k.width).contains(&d.u) || !(0.0..k.height).contains(&d.v) {
        return Err(Error::domain(format!("pixel ({}, {}) outside image {}x{}", d.u, d.v, k.width, k.height)));
    }
    Ok(wrap_angle((d.u - k.cu).atan2(k.fu)))
}

/// One bearing-only measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingMeasurement {
    /// Bearing in the camera frame, `[-pi, pi)`.
    pub alpha: f64,
    /// Variance of the bearing [rad^2].
    pub variance: f64,
}

/// Bearing measurements of one camera frame.
#[derive(Debug, Clone, Default)]
pub struct BearingSet {
    /// Which camera produced the frame.
    pub camera: String,
    pub bearings: Vec<BearingMeasurement>,
}

/// Converts pixel detections to bearing measurements.
///
/// Detections scoring below `min_score` are dropped. The bearing variance is
/// the pixel variance pushed through the derivative of the pixel-to-bearing
/// mapping: `d(alpha)/du = 1 / (fu * (1 + tan^2 alpha))`, i.e.
/// `var = (sigma_px / fu)^2 / (1 + tan^2 alpha)^2`.
pub fn convert_detections(
    camera: &str,
    ds: &PixelDetectionSet,
    k: &PinholeIntrinsics,
    min_score: f64,
    sigma_px: f64,
) -> Result<BearingSet> {
    if !(sigma_px > 0.0) {
        return Err(Error::domain(format!("sigma_px must be positive, got {sigma_px}")));
    }
    let base = (sigma_px / k.fu) * (sigma_px / k.fu);
    let mut bearings = Vec::new();
    for d in &ds.detections {
        if d.score < min_score {
            continue;
        }
        let alpha = pixel_to_bearing(d, k)?;
        let sec2 = 1.0 + alpha.tan() * alpha.tan();
        bearings.push(BearingMeasurement { alpha, variance: base / (sec2 * sec2) });
    }
    Ok(BearingSet { camera: camera.to_string(), bearings })
}
