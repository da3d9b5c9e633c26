//! Deterministic sensor synthesis
//!
//! Every sensor draws from its own counter-mode RNG stream derived from the
//! scenario seed, so regenerating a world is bit-identical and changing one
//! sensor's configuration never perturbs another's noise. All streams are
//! always generated; which ones a run consumes is the runner's business.

use crate::camera::PixelDetection;
use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::pole_map::PoleMap;
use crate::sim::scenario::{CameraSpec, LidarMode, Scenario};
use crate::sim::trajectory::{PathModel, Trajectory};
use nalgebra::{Point2, Point3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};

const STREAM_GNSS: u64 = 1;
const STREAM_WHEELS: u64 = 2;
const STREAM_GYRO: u64 = 3;
const STREAM_LIDAR: u64 = 4;
const STREAM_CAMERA_BASE: u64 = 5;
const STREAM_CLUTTER: u64 = 99;

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssFix {
    pub t: f64,
    pub east: f64,
    pub north: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSample {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroSample {
    pub t: f64,
    pub yaw_rate: f64,
}

/// Payload of one LiDAR revolution, in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub enum LidarData {
    /// Pole positions as an idealized detector would report them.
    Poles(Vec<[f64; 2]>),
    /// Raw point cloud for the detection pipeline.
    Cloud(crate::lidar::PointCloud),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarFrame {
    pub t: f64,
    pub data: LidarData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraFrame {
    pub t: f64,
    pub detections: Vec<PixelDetection>,
}

#[derive(Debug, Clone)]
pub struct CameraStream {
    pub spec: CameraSpec,
    pub frames: Vec<CameraFrame>,
}

/// Everything the sensors produced over one drive.
#[derive(Debug, Clone, Default)]
pub struct SensorLog {
    pub gnss: Vec<GnssFix>,
    pub wheels: Vec<WheelSample>,
    pub gyro: Vec<GyroSample>,
    pub lidar: Vec<LidarFrame>,
    pub cameras: Vec<CameraStream>,
}

/// A fully synthesized world: scenario, geometry, truth and sensor log.
#[derive(Debug, Clone)]
pub struct SimData {
    pub scenario: Scenario,
    /// Seed actually used (command line may override the scenario's).
    pub seed: u64,
    pub path: PathModel,
    pub map: PoleMap,
    pub truth: Trajectory,
    pub log: SensorLog,
}

fn timeline(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / rate).collect()
}

struct ClutterObject {
    center: Point2<f64>,
    width: f64,
    height: f64,
    yaw: f64,
}

/// Generates the complete sensor log for a scenario.
pub fn synthesize(scenario: &Scenario, seed_override: Option<u64>) -> Result<SimData> {
    scenario.validate()?;
    let seed = seed_override.unwrap_or(scenario.seed);
    let (path, map) = scenario.build_world()?;
    let truth = path.sample(scenario.speed, scenario.truth_rate)?;
    let duration = path.duration(scenario.speed);
    let total = path.total_length();
    let pose_at = |t: f64| -> Result<(Pose2D, f64)> {
        let (pose, kappa) = path.pose_at((scenario.speed * t).min(total))?;
        Ok((pose, scenario.speed * kappa))
    };

    let log = SensorLog {
        gnss: synth_gnss(scenario, seed, duration, &pose_at)?,
        wheels: synth_wheels(scenario, seed, duration, &pose_at)?,
        gyro: synth_gyro(scenario, seed, duration, &pose_at)?,
        lidar: synth_lidar(scenario, seed, duration, &path, &map, &pose_at)?,
        cameras: synth_cameras(scenario, seed, duration, &map, &pose_at)?,
    };
    Ok(SimData { scenario: scenario.clone(), seed, path, map, truth, log })
}

fn synth_gnss(
    sc: &Scenario,
    seed: u64,
    duration: f64,
    pose_at: &dyn Fn(f64) -> Result<(Pose2D, f64)>,
) -> Result<Vec<GnssFix>> {
    let mut rng = stream_rng(seed, STREAM_GNSS);
    let noise = Normal::new(0.0, sc.gnss.sigma).map_err(|e| Error::scenario(e.to_string()))?;
    let lever = Vector2::new(sc.gnss.lever_arm[0], sc.gnss.lever_arm[1]);
    let mut out = Vec::new();
    for t in timeline(duration, sc.gnss.rate) {
        let (pose, _) = pose_at(t)?;
        let antenna = pose.transform_from_frame(Point2::new(lever.x, lever.y));
        out.push(GnssFix {
            t,
            east: antenna.x + sc.gnss.bias[0] + noise.sample(&mut rng),
            north: antenna.y + sc.gnss.bias[1] + noise.sample(&mut rng),
        });
    }
    Ok(out)
}

fn synth_wheels(
    sc: &Scenario,
    seed: u64,
    duration: f64,
    pose_at: &dyn Fn(f64) -> Result<(Pose2D, f64)>,
) -> Result<Vec<WheelSample>> {
    let mut rng = stream_rng(seed, STREAM_WHEELS);
    let noise = Normal::new(0.0, sc.wheels.sigma).map_err(|e| Error::scenario(e.to_string()))?;
    let half = sc.wheels.track / 2.0;
    let mut out = Vec::new();
    for t in timeline(duration, sc.wheels.rate) {
        let (_, yaw_rate) = pose_at(t)?;
        out.push(WheelSample {
            t,
            left: sc.speed - half * yaw_rate + noise.sample(&mut rng),
            right: sc.speed + half * yaw_rate + noise.sample(&mut rng),
        });
    }
    Ok(out)
}

fn synth_gyro(
    sc: &Scenario,
    seed: u64,
    duration: f64,
    pose_at: &dyn Fn(f64) -> Result<(Pose2D, f64)>,
) -> Result<Vec<GyroSample>> {
    let mut rng = stream_rng(seed, STREAM_GYRO);
    let noise = Normal::new(0.0, sc.gyro.sigma).map_err(|e| Error::scenario(e.to_string()))?;
    let mut out = Vec::new();
    for t in timeline(duration, sc.gyro.rate) {
        let (_, yaw_rate) = pose_at(t)?;
        out.push(GyroSample { t, yaw_rate: yaw_rate + noise.sample(&mut rng) });
    }
    Ok(out)
}

/// Fixed clutter objects for the whole drive, kept clear of real poles.
fn place_clutter(sc: &Scenario, seed: u64, path: &PathModel, map: &PoleMap) -> Result<Vec<ClutterObject>> {
    let spec = sc.lidar.clutter;
    if spec.count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = stream_rng(seed, STREAM_CLUTTER);
    let total = path.total_length();
    let mut objects = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mut placed = false;
        for _attempt in 0..100 {
            let s = rng.random_range(0.0..total);
            let side: f64 = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
            let lateral = rng.random_range(spec.lateral_min..spec.lateral_max);
            let (pose, _) = path.pose_at(s)?;
            let (sin_t, cos_t) = pose.theta.sin_cos();
            let center = Point2::new(pose.x - side * lateral * sin_t, pose.y + side * lateral * cos_t);
            let clear = map.iter().all(|lm| (lm.position - center).norm() >= 2.0);
            if clear {
                objects.push(ClutterObject {
                    center,
                    width: rng.random_range(0.25..0.4),
                    height: rng.random_range(1.8..2.5),
                    yaw: rng.random_range(0.0..std::f64::consts::PI),
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::scenario("could not place clutter clear of the pole map"));
        }
    }
    Ok(objects)
}

fn synth_lidar(
    sc: &Scenario,
    seed: u64,
    duration: f64,
    path: &PathModel,
    map: &PoleMap,
    pose_at: &dyn Fn(f64) -> Result<(Pose2D, f64)>,
) -> Result<Vec<LidarFrame>> {
    let clutter = place_clutter(sc, seed, path, map)?;
    let mut rng = stream_rng(seed, STREAM_LIDAR);
    let noise = Normal::new(0.0, sc.lidar.sigma).map_err(|e| Error::scenario(e.to_string()))?;
    let ext = sc.lidar_extrinsics();
    let mut out = Vec::new();
    for t in timeline(duration, sc.lidar.rate) {
        let (pose, _) = pose_at(t)?;
        let sensor = ext.sensor_pose(&pose);
        let data = match sc.lidar.mode {
            LidarMode::Ideal => {
                let mut poles = Vec::new();
                for lm in map.iter() {
                    let q = sensor.transform_to_frame(lm.position);
                    if q.coords.norm() <= sc.lidar.range {
                        poles.push([q.x + noise.sample(&mut rng), q.y + noise.sample(&mut rng)]);
                    }
                }
                LidarData::Poles(poles)
            }
            LidarMode::Cloud => {
                LidarData::Cloud(render_cloud(sc, &sensor, map, &clutter, &noise, &mut rng))
            }
        };
        out.push(LidarFrame { t, data });
    }
    Ok(out)
}

/// Ground plane, pole cylinders and clutter surfaces in the sensor frame.
fn render_cloud(
    sc: &Scenario,
    sensor: &Pose2D,
    map: &PoleMap,
    clutter: &[ClutterObject],
    noise: &Normal<f64>,
    rng: &mut ChaCha12Rng,
) -> crate::lidar::PointCloud {
    let h = sc.lidar.height;
    let range = sc.lidar.range;
    let mut points = Vec::new();
    let mut push = |x: f64, y: f64, z: f64, rng: &mut ChaCha12Rng| {
        points.push(Point3::new(
            x + noise.sample(rng),
            y + noise.sample(rng),
            z + noise.sample(rng),
        ));
    };

    // Ground: polar rings on the z = -h plane.
    let mut r = 2.0;
    while r < range {
        for k in 0..48 {
            let az = 2.0 * std::f64::consts::PI * k as f64 / 48.0;
            push(r * az.cos(), r * az.sin(), -h, rng);
        }
        r += 1.5;
    }

    // Poles: thin cylinders sampled on the side facing the sensor.
    for lm in map.iter() {
        let q = sensor.transform_to_frame(lm.position);
        if q.coords.norm() > range {
            continue;
        }
        let toward_sensor = (-q.y).atan2(-q.x);
        for ring in 0..13 {
            let z = -h + 0.2 + 0.3 * ring as f64;
            for j in 0..6 {
                let az = toward_sensor - 0.65 + 1.3 * j as f64 / 5.0;
                push(q.x + 0.15 * az.cos(), q.y + 0.15 * az.sin(), z, rng);
            }
        }
    }

    // Clutter: narrow vertical surfaces that look a lot like poles.
    for obj in clutter {
        let q = sensor.transform_to_frame(obj.center);
        if q.coords.norm() > range {
            continue;
        }
        let face = obj.yaw - sensor.theta;
        let (sin_f, cos_f) = face.sin_cos();
        for _ in 0..60 {
            let u = rng.random_range(-obj.width / 2.0..obj.width / 2.0);
            let z = rng.random_range(0.15..obj.height);
            push(q.x + u * cos_f, q.y + u * sin_f, z - h, rng);
        }
    }
    crate::lidar::PointCloud { points }
}

fn synth_cameras(
    sc: &Scenario,
    seed: u64,
    duration: f64,
    map: &PoleMap,
    pose_at: &dyn Fn(f64) -> Result<(Pose2D, f64)>,
) -> Result<Vec<CameraStream>> {
    let mut out = Vec::new();
    for (idx, cam) in sc.cameras.iter().enumerate() {
        let mut rng = stream_rng(seed, STREAM_CAMERA_BASE + idx as u64);
        let noise = Normal::new(0.0, cam.sigma_px).map_err(|e| Error::scenario(e.to_string()))?;
        let k = cam.intrinsics()?;
        let ext = cam.extrinsics_struct();
        let half_fov = cam.fov_rad() / 2.0;
        let fp = if cam.fp_rate > 0.0 {
            Some(Poisson::new(cam.fp_rate).map_err(|e| Error::scenario(e.to_string()))?)
        } else {
            None
        };
        let mut frames = Vec::new();
        for t in timeline(duration, cam.rate) {
            let (pose, _) = pose_at(t)?;
            let cam_pose = ext.sensor_pose(&pose);
            let mut detections = Vec::new();
            for lm in map.iter() {
                let q = cam_pose.transform_to_frame(lm.position);
                let dist = q.coords.norm();
                if dist > cam.range {
                    continue;
                }
                let alpha = q.y.atan2(q.x);
                if alpha.abs() > half_fov {
                    continue;
                }
                let missed = rng.random_range(0.0..1.0) < cam.p_miss;
                if missed {
                    continue;
                }
                let u = k.cu + k.fu * alpha.tan() + noise.sample(&mut rng);
                if !(0.0..=(cam.width_px as f64 - 1.0)).contains(&u) {
                    continue;
                }
                let v = (k.cv + k.fv * cam.mount_height / dist).clamp(0.0, cam.height_px as f64 - 1.0);
                detections.push(PixelDetection { u, v, score: 0.9 });
            }
            if let Some(fp) = &fp {
                let n = fp.sample(&mut rng) as usize;
                for _ in 0..n {
                    detections.push(PixelDetection {
                        u: rng.random_range(0.0..cam.width_px as f64 - 1.0),
                        v: rng.random_range(k.cv..cam.height_px as f64 - 1.0),
                        score: 0.6,
                    });
                }
            }
            frames.push(CameraFrame { t, detections });
        }
        out.push(CameraStream { spec: cam.clone(), frames });
    }
    Ok(out)
}
