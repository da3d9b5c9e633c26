//! Trajectory error metrics
//!
//! Errors are resolved in the truth's path frame: the along-track axis
//! points along the true heading, the cross-track axis 90 degrees to its
//! left, so a positive cross-track error means the estimate sits left of the
//! true pose. Filter consistency is judged with the normalized estimation
//! error squared (NEES) of the position block against the central 95% band
//! of a chi-square with 2 degrees of freedom.

use crate::error::{Error, Result};
use crate::filter::StateEstimate;
use crate::geometry::angular_diff;
use crate::sim::Trajectory;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Estimate-vs-truth error at one epoch.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorSample {
    pub t: f64,
    pub cross_track: f64,
    pub along_track: f64,
    pub position: f64,
    pub heading: f64,
    pub nees: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ErrorSeries {
    pub samples: Vec<ErrorSample>,
}

/// Central 95% acceptance band of a chi-square with 2 dof.
pub fn nees_band_2dof() -> (f64, f64) {
    (-2.0 * 0.975f64.ln(), -2.0 * 0.025f64.ln())
}

/// Pairs every estimate with the nearest truth sample within `tol` seconds
/// and resolves the errors; estimates without a truth partner are skipped.
pub fn compute_errors(estimates: &[StateEstimate], truth: &Trajectory, tol: f64) -> Result<ErrorSeries> {
    let mut samples = Vec::with_capacity(estimates.len());
    for est in estimates {
        let Some(ts) = truth.nearest(est.t, tol) else { continue };
        let e = Vector2::new(est.state.x - ts.pose.x, est.state.y - ts.pose.y);
        let (sin_p, cos_p) = ts.pose.theta.sin_cos();
        let along = e.x * cos_p + e.y * sin_p;
        let cross = -e.x * sin_p + e.y * cos_p;
        let p = est.position_cov();
        let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::Numerical {
                t: est.t,
                detail: "position covariance not positive definite".into(),
            });
        }
        let nees =
            (p[(1, 1)] * e.x * e.x - 2.0 * p[(0, 1)] * e.x * e.y + p[(0, 0)] * e.y * e.y) / det;
        samples.push(ErrorSample {
            t: est.t,
            cross_track: cross,
            along_track: along,
            position: e.norm(),
            heading: angular_diff(est.state.theta, ts.pose.theta),
            nees,
        });
    }
    Ok(ErrorSeries { samples })
}

/// Root mean square; an empty slice has no RMS.
pub fn rms(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("rms of an empty series"));
    }
    Ok((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

/// Quantile of an ascending-sorted slice, with linear interpolation between
/// order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Scalar statistics of one error series, serialized into run summaries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub epochs: usize,
    pub rms_cross_track_m: f64,
    pub rms_along_track_m: f64,
    pub rms_position_m: f64,
    pub rms_heading_rad: f64,
    pub max_position_m: f64,
    pub q25_position_m: f64,
    pub median_position_m: f64,
    pub q75_position_m: f64,
    pub mean_nees: f64,
    pub nees_in_band_fraction: f64,
}

pub fn summarize(series: &ErrorSeries) -> Result<SeriesSummary> {
    let n = series.samples.len();
    if n == 0 {
        return Err(Error::domain("cannot summarize an empty error series"));
    }
    let col = |f: fn(&ErrorSample) -> f64| -> Vec<f64> { series.samples.iter().map(f).collect() };
    let cross = col(|s| s.cross_track);
    let along = col(|s| s.along_track);
    let pos = col(|s| s.position);
    let heading = col(|s| s.heading);
    let nees = col(|s| s.nees);
    let mut pos_sorted = pos.clone();
    pos_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (band_lo, band_hi) = nees_band_2dof();
    let in_band = nees.iter().filter(|&&v| v >= band_lo && v <= band_hi).count();
    Ok(SeriesSummary {
        epochs: n,
        rms_cross_track_m: rms(&cross)?,
        rms_along_track_m: rms(&along)?,
        rms_position_m: rms(&pos)?,
        rms_heading_rad: rms(&heading)?,
        max_position_m: pos_sorted[n - 1],
        q25_position_m: quantile(&pos_sorted, 0.25),
        median_position_m: quantile(&pos_sorted, 0.5),
        q75_position_m: quantile(&pos_sorted, 0.75),
        mean_nees: nees.iter().sum::<f64>() / n as f64,
        nees_in_band_fraction: in_band as f64 / n as f64,
    })
}

impl ErrorSeries {
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}
