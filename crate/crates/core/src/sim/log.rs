//! Sensor log persistence
//!
//! A log directory holds one manifest plus plain CSV files per stream, so
//! recorded drives can be inspected with ordinary tools and reloaded exactly.
//! Cloud-mode LiDAR frames go to one CSV per revolution under `clouds/`.

use crate::camera::PixelDetection;
use crate::error::{Error, Result};
use crate::sim::synth::{
    CameraFrame, CameraStream, GnssFix, GyroSample, LidarData, LidarFrame, SensorLog, WheelSample,
};
use crate::sim::scenario::{CameraSpec, LidarMode};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    lidar_mode: LidarMode,
    lidar_frames: usize,
    cameras: Vec<CameraSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GnssRow {
    t: f64,
    east_m: f64,
    north_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WheelRow {
    t: f64,
    left_mps: f64,
    right_mps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GyroRow {
    t: f64,
    yaw_rate_radps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LidarFrameRow {
    frame_id: usize,
    t: f64,
    returns: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct LidarPoleRow {
    frame_id: usize,
    x_m: f64,
    y_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraFrameRow {
    frame_id: usize,
    camera_id: usize,
    t: f64,
    detections: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraDetectionRow {
    frame_id: usize,
    camera_id: usize,
    u: f64,
    v: f64,
    score: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

impl SensorLog {
    /// Writes the log into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let lidar_mode = match self.lidar.first() {
            Some(LidarFrame { data: LidarData::Cloud(_), .. }) => LidarMode::Cloud,
            _ => LidarMode::Ideal,
        };
        let manifest = Manifest {
            schema_version: crate::sim::scenario::SCHEMA_VERSION,
            lidar_mode,
            lidar_frames: self.lidar.len(),
            cameras: self.cameras.iter().map(|c| c.spec.clone()).collect(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

        write_csv(
            &dir.join("gnss.csv"),
            self.gnss.iter().map(|f| GnssRow { t: f.t, east_m: f.east, north_m: f.north }),
        )?;
        write_csv(
            &dir.join("wheels.csv"),
            self.wheels.iter().map(|w| WheelRow { t: w.t, left_mps: w.left, right_mps: w.right }),
        )?;
        write_csv(
            &dir.join("gyro.csv"),
            self.gyro.iter().map(|g| GyroRow { t: g.t, yaw_rate_radps: g.yaw_rate }),
        )?;

        let mut frame_rows = Vec::new();
        let mut pole_rows = Vec::new();
        for (frame_id, frame) in self.lidar.iter().enumerate() {
            match &frame.data {
                LidarData::Poles(poles) => {
                    frame_rows.push(LidarFrameRow { frame_id, t: frame.t, returns: poles.len() });
                    for p in poles {
                        pole_rows.push(LidarPoleRow { frame_id, x_m: p[0], y_m: p[1] });
                    }
                }
                LidarData::Cloud(cloud) => {
                    frame_rows.push(LidarFrameRow { frame_id, t: frame.t, returns: cloud.len() });
                }
            }
        }
        write_csv(&dir.join("lidar_frames.csv"), frame_rows)?;
        if lidar_mode == LidarMode::Ideal {
            write_csv(&dir.join("lidar_poles.csv"), pole_rows)?;
        } else {
            let clouds = dir.join("clouds");
            std::fs::create_dir_all(&clouds)?;
            for (frame_id, frame) in self.lidar.iter().enumerate() {
                if let LidarData::Cloud(cloud) = &frame.data {
                    cloud.to_csv(&clouds.join(format!("frame_{frame_id:06}.csv")))?;
                }
            }
        }

        let mut cam_frames = Vec::new();
        let mut cam_dets = Vec::new();
        for (camera_id, stream) in self.cameras.iter().enumerate() {
            for (frame_id, frame) in stream.frames.iter().enumerate() {
                cam_frames.push(CameraFrameRow {
                    frame_id,
                    camera_id,
                    t: frame.t,
                    detections: frame.detections.len(),
                });
                for d in &frame.detections {
                    cam_dets.push(CameraDetectionRow {
                        frame_id,
                        camera_id,
                        u: d.u,
                        v: d.v,
                        score: d.score,
                    });
                }
            }
        }
        write_csv(&dir.join("camera_frames.csv"), cam_frames)?;
        write_csv(&dir.join("camera_detections.csv"), cam_dets)?;
        Ok(())
    }

    /// Reads a log directory written by [`SensorLog::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(
            &std::fs::read_to_string(dir.join("manifest.json"))
                .map_err(|e| Error::format(format!("missing manifest.json: {e}")))?,
        )?;
        if manifest.schema_version != crate::sim::scenario::SCHEMA_VERSION {
            return Err(Error::format(format!(
                "log schema_version {} not supported",
                manifest.schema_version
            )));
        }
        let gnss = read_csv::<GnssRow>(&dir.join("gnss.csv"))?
            .into_iter()
            .map(|r| GnssFix { t: r.t, east: r.east_m, north: r.north_m })
            .collect();
        let wheels = read_csv::<WheelRow>(&dir.join("wheels.csv"))?
            .into_iter()
            .map(|r| WheelSample { t: r.t, left: r.left_mps, right: r.right_mps })
            .collect();
        let gyro = read_csv::<GyroRow>(&dir.join("gyro.csv"))?
            .into_iter()
            .map(|r| GyroSample { t: r.t, yaw_rate: r.yaw_rate_radps })
            .collect();

        let frame_rows = read_csv::<LidarFrameRow>(&dir.join("lidar_frames.csv"))?;
        let mut lidar = Vec::with_capacity(frame_rows.len());
        match manifest.lidar_mode {
            LidarMode::Ideal => {
                let pole_rows = read_csv::<LidarPoleRow>(&dir.join("lidar_poles.csv"))?;
                for row in &frame_rows {
                    let poles: Vec<[f64; 2]> = pole_rows
                        .iter()
                        .filter(|p| p.frame_id == row.frame_id)
                        .map(|p| [p.x_m, p.y_m])
                        .collect();
                    if poles.len() != row.returns {
                        return Err(Error::format(format!(
                            "lidar frame {}: expected {} returns, found {}",
                            row.frame_id,
                            row.returns,
                            poles.len()
                        )));
                    }
                    lidar.push(LidarFrame { t: row.t, data: LidarData::Poles(poles) });
                }
            }
            LidarMode::Cloud => {
                for row in &frame_rows {
                    let path = dir.join("clouds").join(format!("frame_{:06}.csv", row.frame_id));
                    let cloud = crate::lidar::PointCloud::from_csv(&path)?;
                    lidar.push(LidarFrame { t: row.t, data: LidarData::Cloud(cloud) });
                }
            }
        }

        let cam_frame_rows = read_csv::<CameraFrameRow>(&dir.join("camera_frames.csv"))?;
        let cam_det_rows = read_csv::<CameraDetectionRow>(&dir.join("camera_detections.csv"))?;
        let mut cameras = Vec::new();
        for (camera_id, spec) in manifest.cameras.into_iter().enumerate() {
            let mut frames = Vec::new();
            for row in cam_frame_rows.iter().filter(|r| r.camera_id == camera_id) {
                let detections: Vec<PixelDetection> = cam_det_rows
                    .iter()
                    .filter(|d| d.camera_id == camera_id && d.frame_id == row.frame_id)
                    .map(|d| PixelDetection { u: d.u, v: d.v, score: d.score })
                    .collect();
                if detections.len() != row.detections {
                    return Err(Error::format(format!(
                        "camera {camera_id} frame {}: expected {} detections, found {}",
                        row.frame_id,
                        row.detections,
                        detections.len()
                    )));
                }
                frames.push(CameraFrame { t: row.t, detections });
            }
            cameras.push(CameraStream { spec, frames });
        }
        Ok(SensorLog { gnss, wheels, gyro, lidar, cameras })
    }
}
