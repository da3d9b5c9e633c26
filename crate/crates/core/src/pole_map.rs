//! The landmark map: surveyed pole positions in a local ENU working frame,
//! plus the camera-side projection that turns map entries into expected
//! bearing angles.

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Extrinsics, Pose2D};
use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One surveyed pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub position: Point2<f64>,
}

/// Set of surveyed poles, held sorted by id.
#[derive(Debug, Clone, Default)]
pub struct PoleMap {
    landmarks: Vec<Landmark>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapRow {
    id: u64,
    east_m: f64,
    north_m: f64,
}

impl PoleMap {
    /// Builds a map, sorting by id. Duplicate ids and non-finite coordinates
    /// are rejected.
    pub fn new(mut landmarks: Vec<Landmark>) -> Result<Self> {
        landmarks.sort_by_key(|l| l.id);
        for pair in landmarks.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::format(format!("duplicate landmark id {}", pair[0].id)));
            }
        }
        if let Some(l) = landmarks.iter().find(|l| !(l.position.x.is_finite() && l.position.y.is_finite())) {
            return Err(Error::format(format!("landmark {} has non-finite coordinates", l.id)));
        }
        Ok(Self { landmarks })
    }

    /// Reads a map from CSV with header `id,east_m,north_m`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut landmarks = Vec::new();
        for row in rdr.deserialize() {
            let row: MapRow = row?;
            landmarks.push(Landmark { id: row.id, position: Point2::new(row.east_m, row.north_m) });
        }
        Self::new(landmarks)
    }

    /// Writes the map as CSV with header `id,east_m,north_m`.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        for l in &self.landmarks {
            wtr.serialize(MapRow { id: l.id, east_m: l.position.x, north_m: l.position.y })?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks.iter()
    }

    pub fn get(&self, id: u64) -> Option<&Landmark> {
        self.landmarks
            .binary_search_by_key(&id, |l| l.id)
            .ok()
            .map(|i| &self.landmarks[i])
    }

    /// All landmarks with `|landmark - center| <= radius`, in id order.
    /// A landmark exactly on the boundary is included.
    pub fn query_radius(&self, center: Point2<f64>, radius: f64) -> Result<Vec<&Landmark>> {
        if !(radius > 0.0) {
            return Err(Error::domain(format!("query radius must be positive, got {radius}")));
        }
        let r2 = radius * radius;
        Ok(self
            .landmarks
            .iter()
            .filter(|l| (l.position - center).norm_squared() <= r2)
            .collect())
    }
}

/// Expected bearing of one landmark in a camera's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraAngle {
    pub id: u64,
    /// Bearing of the landmark in the camera frame, in `[-pi, pi)`.
    pub alpha: f64,
    /// Distance from the camera to the landmark [m].
    pub range: f64,
}

/// Map landmarks projected into a camera's angular field of view.
#[derive(Debug, Clone, Default)]
pub struct CameraAngleMap {
    pub entries: Vec<CameraAngle>,
}

/// Projects map landmarks into a camera's field of view at the given vehicle
/// pose.
///
/// A landmark is kept when it lies within `radius` of the vehicle position,
/// strictly in front of the camera, and within `fov/2` of the optical axis.
/// Entries keep the map's id order.
pub fn project_to_camera_angles(
    map: &PoleMap,
    pose: &Pose2D,
    camera: &Extrinsics,
    radius: f64,
    fov: f64,
) -> Result<CameraAngleMap> {
    if !(radius > 0.0) {
        return Err(Error::domain(format!("projection radius must be positive, got {radius}")));
    }
    if !(fov > 0.0 && fov <= 2.0 * std::f64::consts::PI) {
        return Err(Error::domain(format!("fov must lie in (0, 2*pi], got {fov}")));
    }
    let cam_pose = camera.sensor_pose(pose);
    let half_fov = 0.5 * fov;
    let r2 = radius * radius;
    let mut entries = Vec::new();
    for l in map.iter() {
        if (l.position - pose.position()).norm_squared() > r2 {
            continue;
        }
        let q = cam_pose.transform_to_frame(l.position);
        if q.x <= 0.0 {
            continue; // behind (or exactly abeam of) the image plane
        }
        let alpha = wrap_angle(q.y.atan2(q.x));
        if alpha.abs() <= half_fov {
            entries.push(CameraAngle { id: l.id, alpha, range: q.coords.norm() });
        }
    }
    Ok(CameraAngleMap { entries })
}
