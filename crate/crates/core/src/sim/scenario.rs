//! Scenario description: path, pole layout, sensor suite, filter settings
//!
//! Scenarios are plain TOML files (`schema_version = 1`) or one of the
//! built-in worlds compiled into the library. Unknown fields are rejected so
//! a typo in a config never silently falls back to a default.

use crate::error::{Error, Result};
use crate::filter::{InitConfig, ProcessNoise};
use crate::geometry::{Extrinsics, Pose2D};
use crate::pole_map::{Landmark, PoleMap};
use crate::sim::trajectory::{PathModel, Segment};
use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Complete description of one synthetic drive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    /// Constant vehicle speed [m/s].
    pub speed: f64,
    /// Ground-truth sampling rate [Hz].
    #[serde(default = "default_truth_rate")]
    pub truth_rate: f64,
    pub path: PathSpec,
    pub poles: PoleLayout,
    pub gnss: GnssSpec,
    pub wheels: WheelSpec,
    pub gyro: GyroSpec,
    pub lidar: LidarSpec,
    #[serde(default)]
    pub cameras: Vec<CameraSpec>,
    #[serde(default)]
    pub filter: FilterSpec,
}

fn default_truth_rate() -> f64 {
    50.0
}

/// Path geometry: either explicit segments or waypoints with fillet corners.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// Start pose `[x, y, theta]`; ignored by waypoint paths.
    #[serde(default)]
    pub start: [f64; 3],
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub fillet_radius: f64,
}

impl PathSpec {
    pub fn build(&self) -> Result<PathModel> {
        match (self.segments.is_empty(), self.waypoints.is_empty()) {
            (false, true) => PathModel::new(
                Pose2D::new(self.start[0], self.start[1], self.start[2]),
                self.segments.clone(),
            ),
            (true, false) => PathModel::from_waypoints(&self.waypoints, self.fillet_radius),
            (true, true) => Err(Error::scenario("path needs segments or waypoints")),
            (false, false) => Err(Error::scenario("path must not mix segments and waypoints")),
        }
    }
}

/// Where the poles stand relative to the path.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PoleLayout {
    /// Along-path spacing [m]; 0 disables generated poles.
    pub spacing: f64,
    /// Lateral distance from the path centerline [m].
    pub lateral_offset: f64,
    /// Alternate sides along the path instead of keeping every pole left.
    pub alternate: bool,
    /// Extra poles at fixed world positions, appended after generated ones.
    pub explicit: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnssSpec {
    pub rate: f64,
    pub sigma: f64,
    /// Constant position bias [m] added to every fix.
    pub bias: [f64; 2],
    /// Antenna offset in the body frame [m].
    pub lever_arm: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelSpec {
    pub rate: f64,
    pub sigma: f64,
    /// Rear track width [m].
    pub track: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GyroSpec {
    pub rate: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LidarMode {
    /// Emit pole positions in the sensor frame directly.
    #[default]
    Ideal,
    /// Emit full point clouds that the detector must segment.
    Cloud,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    pub rate: f64,
    pub range: f64,
    #[serde(default)]
    pub mode: LidarMode,
    /// Per-axis noise: detection position (ideal) or point position (cloud).
    pub sigma: f64,
    /// Mounting `[x, y, yaw]` in the body frame.
    pub extrinsics: [f64; 3],
    /// Sensor height above ground [m]; shapes cloud-mode geometry only.
    #[serde(default = "default_sensor_height")]
    pub height: f64,
    #[serde(default)]
    pub clutter: ClutterSpec,
}

fn default_sensor_height() -> f64 {
    1.8
}

/// Pole-like distractor objects scattered along the road (cloud mode only).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ClutterSpec {
    /// Number of objects placed along the whole path.
    pub count: usize,
    /// Lateral band, absolute distance from the centerline [m].
    pub lateral_min: f64,
    pub lateral_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub name: String,
    pub rate: f64,
    pub fov_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub sigma_px: f64,
    /// Mounting `[x, y, yaw]` in the body frame.
    pub extrinsics: [f64; 3],
    /// Detection range [m].
    pub range: f64,
    /// Probability of missing a visible pole per frame.
    pub p_miss: f64,
    /// Poisson mean of spurious detections per frame.
    pub fp_rate: f64,
    /// Optical center height above ground [m].
    #[serde(default = "default_camera_height")]
    pub mount_height: f64,
}

fn default_camera_height() -> f64 {
    1.4
}

impl CameraSpec {
    pub fn intrinsics(&self) -> Result<crate::camera::PinholeIntrinsics> {
        let half_fov = self.fov_deg.to_radians() / 2.0;
        let fu = (self.width_px as f64 / 2.0) / half_fov.tan();
        crate::camera::PinholeIntrinsics::new(
            fu,
            fu,
            self.width_px as f64 / 2.0,
            self.height_px as f64 / 2.0,
            self.width_px as f64,
            self.height_px as f64,
        )
    }

    pub fn extrinsics_struct(&self) -> Extrinsics {
        Extrinsics::new(self.extrinsics[0], self.extrinsics[1], self.extrinsics[2])
    }

    pub fn fov_rad(&self) -> f64 {
        self.fov_deg.to_radians()
    }
}

/// Filter settings carried by the scenario so runs are reproducible from the
/// file alone.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub process_noise: ProcessNoise,
    pub init: InitConfig,
    /// Confidence of the chi-square innovation gate.
    pub gate_confidence: f64,
    /// Mahalanobis gate for LiDAR-to-map association [sigma].
    pub lidar_assoc_gate: f64,
    /// Absolute distance ceiling for LiDAR-to-map association [m]. The
    /// Mahalanobis ellipse widens with the pose prior, so this is what
    /// keeps far-off clutter out of the assignment while the GNSS bias is
    /// still unresolved.
    pub lidar_gate_ceiling: f64,
    /// Smallest half-width of the adaptive bearing association gate [rad].
    pub bearing_gate_floor: f64,
    /// Largest half-width of the adaptive bearing association gate [rad].
    /// Keeps a cold filter from matching detections to candidates far
    /// across the field of view.
    pub bearing_gate_ceiling: f64,
    /// A matched bearing is kept only when the runner-up candidate is at
    /// least this factor farther away.
    pub bearing_ambiguity_ratio: f64,
    /// Landmark fusion waits until the heading standard deviation drops
    /// below this [rad]; linearizing bearings around a cold heading lets a
    /// single frame collapse the pose covariance onto the wrong estimate.
    pub bootstrap_heading_std: f64,
    /// Standard deviation the filter assumes per LiDAR detection axis [m].
    pub detection_sigma: f64,
    /// Camera detections below this score are discarded.
    pub min_score: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            process_noise: ProcessNoise::default(),
            init: InitConfig::default(),
            gate_confidence: 0.99,
            lidar_assoc_gate: 3.0,
            lidar_gate_ceiling: 4.0,
            bearing_gate_floor: 0.035,
            bearing_gate_ceiling: 0.25,
            bearing_ambiguity_ratio: 2.0,
            bootstrap_heading_std: 0.05,
            detection_sigma: 0.15,
            min_score: 0.5,
        }
    }
}

impl Scenario {
    /// Loads and validates a TOML scenario file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::scenario(format!("cannot read {}: {e}", path.display())))?;
        let scenario: Scenario =
            toml::from_str(&text).map_err(|e| Error::scenario(format!("{}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Resolves a CLI argument: a built-in name or a path to a TOML file.
    pub fn resolve(arg: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(arg) {
            return Ok(s);
        }
        let path = Path::new(arg);
        if path.exists() {
            return Self::load(path);
        }
        Err(Error::scenario(format!(
            "unknown scenario '{arg}': not a built-in ({}) and no such file",
            BUILTIN_NAMES.join(", ")
        )))
    }

    /// One of the worlds compiled into the library.
    pub fn builtin(name: &str) -> Option<Self> {
        let s = match name {
            "compiegne-mini" => compiegne_mini(),
            "compiegne-mini-clutter" => compiegne_mini_clutter(),
            "nees-gentle" => nees_gentle(),
            "straight-noiseless" => straight_noiseless(),
            _ => return None,
        };
        debug_assert!(s.validate().is_ok(), "built-in scenario must validate");
        Some(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::scenario(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::scenario(format!(
                "scenario name '{}' must be non-empty and [A-Za-z0-9_-]",
                self.name
            )));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::scenario(format!("speed must be positive, got {}", self.speed)));
        }
        check_rate("truth_rate", self.truth_rate)?;
        check_rate("gnss.rate", self.gnss.rate)?;
        check_sigma("gnss.sigma", self.gnss.sigma)?;
        check_rate("wheels.rate", self.wheels.rate)?;
        check_sigma("wheels.sigma", self.wheels.sigma)?;
        if !(self.wheels.track > 0.0) {
            return Err(Error::scenario("wheels.track must be positive"));
        }
        check_rate("gyro.rate", self.gyro.rate)?;
        check_sigma("gyro.sigma", self.gyro.sigma)?;
        check_rate("lidar.rate", self.lidar.rate)?;
        check_sigma("lidar.sigma", self.lidar.sigma)?;
        if !(self.lidar.range > 0.0) {
            return Err(Error::scenario("lidar.range must be positive"));
        }
        if self.lidar.clutter.count > 0 {
            let c = &self.lidar.clutter;
            if !(c.lateral_min >= 0.0 && c.lateral_max > c.lateral_min) {
                return Err(Error::scenario("clutter lateral band must satisfy 0 <= min < max"));
            }
            if self.lidar.mode == LidarMode::Ideal {
                return Err(Error::scenario("clutter needs lidar.mode = \"cloud\""));
            }
        }
        let mut names = std::collections::HashSet::new();
        for cam in &self.cameras {
            if cam.name.is_empty() || !names.insert(cam.name.clone()) {
                return Err(Error::scenario(format!("camera name '{}' empty or duplicated", cam.name)));
            }
            check_rate(&format!("camera {}.rate", cam.name), cam.rate)?;
            check_sigma(&format!("camera {}.sigma_px", cam.name), cam.sigma_px)?;
            if !(cam.fov_deg > 0.0 && cam.fov_deg < 180.0) {
                return Err(Error::scenario(format!("camera {}: fov must be in (0, 180) deg", cam.name)));
            }
            if cam.width_px == 0 || cam.height_px == 0 {
                return Err(Error::scenario(format!("camera {}: zero resolution", cam.name)));
            }
            if !(cam.range > 0.0) {
                return Err(Error::scenario(format!("camera {}: range must be positive", cam.name)));
            }
            if !(0.0..=1.0).contains(&cam.p_miss) {
                return Err(Error::scenario(format!("camera {}: p_miss must be in [0, 1]", cam.name)));
            }
            if !(cam.fp_rate >= 0.0) {
                return Err(Error::scenario(format!("camera {}: fp_rate must be >= 0", cam.name)));
            }
            cam.intrinsics()?;
        }
        let f = &self.filter;
        if !(0.0 < f.gate_confidence && f.gate_confidence < 1.0) {
            return Err(Error::scenario("filter.gate_confidence must be in (0, 1)"));
        }
        if !(f.lidar_assoc_gate > 0.0 && f.bearing_gate_floor > 0.0 && f.detection_sigma > 0.0) {
            return Err(Error::scenario("filter gates and detection sigma must be positive"));
        }
        if !(f.lidar_gate_ceiling > 0.0) {
            return Err(Error::scenario("filter.lidar_gate_ceiling must be positive"));
        }
        if !(f.bearing_ambiguity_ratio >= 1.0) {
            return Err(Error::scenario("filter.bearing_ambiguity_ratio must be at least 1"));
        }
        if !(f.bearing_gate_ceiling >= f.bearing_gate_floor) {
            return Err(Error::scenario(
                "filter.bearing_gate_ceiling must be at least the gate floor",
            ));
        }
        if !(f.bootstrap_heading_std > 0.0) {
            return Err(Error::scenario("filter.bootstrap_heading_std must be positive"));
        }
        self.path.build()?;
        Ok(())
    }

    /// Path model plus the pole map this scenario describes.
    pub fn build_world(&self) -> Result<(PathModel, PoleMap)> {
        let path = self.path.build()?;
        let mut landmarks = Vec::new();
        let mut next_id = 0u64;
        if self.poles.spacing > 0.0 {
            let total = path.total_length();
            let mut k = 0usize;
            loop {
                let s = self.poles.spacing / 2.0 + k as f64 * self.poles.spacing;
                if s > total {
                    break;
                }
                let (pose, _) = path.pose_at(s)?;
                let side = if self.poles.alternate && k % 2 == 1 { -1.0 } else { 1.0 };
                let (sin_t, cos_t) = pose.theta.sin_cos();
                let position = Point2::new(
                    pose.x + side * self.poles.lateral_offset * -sin_t,
                    pose.y + side * self.poles.lateral_offset * cos_t,
                );
                landmarks.push(Landmark { id: next_id, position });
                next_id += 1;
                k += 1;
            }
        }
        for p in &self.poles.explicit {
            landmarks.push(Landmark { id: next_id, position: Point2::new(p[0], p[1]) });
            next_id += 1;
        }
        let map = PoleMap::new(landmarks)?;
        Ok((path, map))
    }

    pub fn lidar_extrinsics(&self) -> Extrinsics {
        Extrinsics::new(self.lidar.extrinsics[0], self.lidar.extrinsics[1], self.lidar.extrinsics[2])
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// FNV-1a hash of the canonical serialization; identifies the world and
    /// sensor configuration independently of where the file lives.
    pub fn digest(&self) -> String {
        let ser = toml::to_string(self).expect("scenario serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in ser.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn check_rate(what: &str, rate: f64) -> Result<()> {
    if rate > 0.0 && rate <= 1000.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::scenario(format!("{what} must be in (0, 1000] Hz, got {rate}")))
    }
}

fn check_sigma(what: &str, sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::scenario(format!("{what} must be >= 0, got {sigma}")))
    }
}

pub const BUILTIN_NAMES: [&str; 4] =
    ["compiegne-mini", "compiegne-mini-clutter", "nees-gentle", "straight-noiseless"];

fn standard_cameras() -> Vec<CameraSpec> {
    vec![
        CameraSpec {
            name: "front".into(),
            rate: 10.0,
            fov_deg: 80.0,
            width_px: 1280,
            height_px: 720,
            sigma_px: 2.0,
            extrinsics: [1.2, 0.0, 0.0],
            range: 45.0,
            p_miss: 0.1,
            fp_rate: 0.1,
            mount_height: 1.4,
        },
        CameraSpec {
            name: "left".into(),
            rate: 10.0,
            fov_deg: 129.0,
            width_px: 1280,
            height_px: 720,
            sigma_px: 2.0,
            extrinsics: [1.2, 0.3, FRAC_PI_2],
            range: 45.0,
            p_miss: 0.1,
            fp_rate: 0.1,
            mount_height: 1.4,
        },
        CameraSpec {
            name: "right".into(),
            rate: 10.0,
            fov_deg: 129.0,
            width_px: 1280,
            height_px: 720,
            sigma_px: 2.0,
            extrinsics: [1.2, -0.3, -FRAC_PI_2],
            range: 45.0,
            p_miss: 0.1,
            fp_rate: 0.1,
            mount_height: 1.4,
        },
    ]
}

/// 600 m urban loop cutout: straight, 90 deg left sweep, straight; poles
/// alternating sides every 20 m.
fn compiegne_mini() -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "compiegne-mini".into(),
        seed: 7,
        speed: 10.0,
        // Matches the fastest sensor so every estimate epoch has an exactly
        // aligned truth sample; coarser truth aliases path motion (v/rate)
        // into apparent filter error.
        truth_rate: 100.0,
        path: PathSpec {
            start: [0.0, 0.0, 0.0],
            segments: vec![
                Segment::Straight { length: 250.0 },
                Segment::Arc { radius: 50.0, angle: FRAC_PI_2 },
                Segment::Straight { length: 350.0 - 25.0 * PI },
            ],
            waypoints: vec![],
            fillet_radius: 0.0,
        },
        poles: PoleLayout { spacing: 20.0, lateral_offset: 4.5, alternate: true, explicit: vec![] },
        gnss: GnssSpec { rate: 1.0, sigma: 0.7, bias: [1.5, -1.0], lever_arm: [0.5, 0.0] },
        wheels: WheelSpec { rate: 100.0, sigma: 0.05, track: 1.6 },
        gyro: GyroSpec { rate: 100.0, sigma: 0.01 },
        lidar: LidarSpec {
            rate: 10.0,
            range: 30.0,
            mode: LidarMode::Ideal,
            sigma: 0.05,
            extrinsics: [1.2, 0.0, 0.0],
            height: 1.8,
            clutter: ClutterSpec::default(),
        },
        cameras: standard_cameras(),
        filter: FilterSpec::default(),
    }
}

/// Same world, but the LiDAR emits raw clouds and pole-like clutter stands
/// along the road to stress data association.
fn compiegne_mini_clutter() -> Scenario {
    let mut s = compiegne_mini();
    s.name = "compiegne-mini-clutter".into();
    s.lidar.mode = LidarMode::Cloud;
    s.lidar.sigma = 0.02;
    s.lidar.clutter = ClutterSpec { count: 40, lateral_min: 2.0, lateral_max: 8.0 };
    s
}

/// Single gentle constant-curvature sweep with clean cameras, meant for
/// statistical consistency checks rather than stress.
fn nees_gentle() -> Scenario {
    let mut s = compiegne_mini();
    s.name = "nees-gentle".into();
    s.seed = 11;
    s.path = PathSpec {
        start: [0.0, 0.0, 0.0],
        segments: vec![Segment::Arc { radius: 500.0, angle: 0.8 }],
        waypoints: vec![],
        fillet_radius: 0.0,
    };
    for cam in &mut s.cameras {
        cam.p_miss = 0.0;
        cam.fp_rate = 0.0;
    }
    s
}

/// Short straight drive with every noise source switched off; the estimate
/// must converge onto the truth almost exactly.
fn straight_noiseless() -> Scenario {
    let mut s = compiegne_mini();
    s.name = "straight-noiseless".into();
    s.seed = 1;
    s.path = PathSpec {
        start: [0.0, 0.0, 0.0],
        segments: vec![Segment::Straight { length: 300.0 }],
        waypoints: vec![],
        fillet_radius: 0.0,
    };
    s.gnss = GnssSpec { rate: 1.0, sigma: 0.0, bias: [0.0, 0.0], lever_arm: [0.5, 0.0] };
    s.wheels.sigma = 0.0;
    s.gyro.sigma = 0.0;
    s.lidar.sigma = 0.0;
    for cam in &mut s.cameras {
        cam.sigma_px = 0.0;
        cam.p_miss = 0.0;
        cam.fp_rate = 0.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtins_validate_and_have_unique_digests() {
        let mut digests = std::collections::HashSet::new();
        for name in BUILTIN_NAMES {
            let s = Scenario::builtin(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
            assert!(digests.insert(s.digest()), "digest collision for {name}");
            assert_eq!(s.digest(), s.digest(), "digest must be deterministic");
        }
        assert!(Scenario::builtin("no-such-world").is_none());
    }

    #[test]
    fn compiegne_mini_covers_600_meters() {
        let s = Scenario::builtin("compiegne-mini").unwrap();
        let (path, map) = s.build_world().unwrap();
        assert_relative_eq!(path.total_length(), 600.0, epsilon = 1e-9);
        assert_eq!(map.len(), 30);
        // Poles alternate sides: successive lateral offsets flip sign.
        let (p0, _) = path.pose_at(10.0).unwrap();
        let lm0 = map.get(0).unwrap();
        assert_relative_eq!(lm0.position.y, p0.y + 4.5, epsilon = 1e-9);
        let lm1 = map.get(1).unwrap();
        let (p1, _) = path.pose_at(30.0).unwrap();
        assert_relative_eq!(lm1.position.y, p1.y - 4.5, epsilon = 1e-9);
    }

    #[test]
    fn toml_round_trip_preserves_digest() {
        let s = Scenario::builtin("compiegne-mini-clutter").unwrap();
        let text = s.to_toml_string();
        let back: Scenario = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.digest(), s.digest());
        assert_eq!(back.lidar.mode, LidarMode::Cloud);
        assert_eq!(back.lidar.clutter.count, 40);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"
schema_version = 1
name = "x"
seed = 1
speed = 10.0
frobnicate = true
"#;
        let err = toml::from_str::<Scenario>(text);
        assert!(err.is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut s = Scenario::builtin("compiegne-mini").unwrap();
        s.schema_version = 2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn load_and_resolve_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("world.toml");
        let s = Scenario::builtin("nees-gentle").unwrap();
        std::fs::write(&path, s.to_toml_string()).unwrap();
        let loaded = Scenario::resolve(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded.digest(), s.digest());
        assert!(Scenario::resolve("definitely-missing.toml").is_err());
    }

    #[test]
    fn camera_intrinsics_follow_fov() {
        let s = Scenario::builtin("compiegne-mini").unwrap();
        let front = s.cameras.iter().find(|c| c.name == "front").unwrap();
        let k = front.intrinsics().unwrap();
        assert_relative_eq!(k.fu, 640.0 / (40.0f64.to_radians()).tan(), epsilon = 1e-9);
        let left = s.cameras.iter().find(|c| c.name == "left").unwrap();
        let k = left.intrinsics().unwrap();
        assert_relative_eq!(k.fu, 640.0 / (64.5f64.to_radians()).tan(), epsilon = 1e-9);
    }

    #[test]
    fn explicit_poles_extend_generated_ones() {
        let mut s = Scenario::builtin("compiegne-mini").unwrap();
        s.poles.explicit = vec![[700.0, 700.0]];
        let (_, map) = s.build_world().unwrap();
        assert_eq!(map.len(), 31);
        assert_relative_eq!(map.get(30).unwrap().position.x, 700.0);
    }
}
