//! Scenario files.
//!
//! A scenario is a TOML document. Every field of the closed-loop experiment
//! is spelled out; unknown keys are rejected so that typos fail loudly.

use std::fmt;
use std::path::Path;

use ibvs_core::barrier::{h_value, sigma_to_e, sigma_to_e_general, NoiseModel, RadiusTerm};
use ibvs_core::geometry::{
    obstacle_image_state, project_normalized, world_to_camera, CameraIntrinsics, CameraPose,
    NormalizedPoint, Obstacle, Point3, Waypoint,
};
use ibvs_core::mpc::{is_symmetric_psd, MpcConfig};
use ibvs_core::Error as CoreError;
use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cbc,
    Prcbc,
    Unfiltered,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cbc => "cbc",
            Mode::Prcbc => "prcbc",
            Mode::Unfiltered => "unfiltered",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    #[default]
    Derived,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub f: f64,
    pub px: f64,
    pub py: f64,
}

/// Camera pose in the world. Either `rpy` (radians, `Rz·Ry·Rx`) or a
/// row-major `rotation` matrix; neither means identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
}

impl PoseSpec {
    pub fn to_pose(&self) -> Result<CameraPose, CoreError> {
        let t = Vector3::from(self.translation);
        match (&self.rpy, &self.rotation) {
            (Some(_), Some(_)) => Err(CoreError::InvalidParameter(
                "pose takes either rpy or rotation, not both",
            )),
            (Some([r, p, y]), None) => Ok(CameraPose::from_rpy(*r, *p, *y, t)),
            (None, Some(m)) => CameraPose::from_matrix(
                Matrix3::from_row_slice(&m.concat()),
                t,
            ),
            (None, None) => CameraPose::from_matrix(Matrix3::identity(), t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub t: f64,
    pub center: [f64; 3],
}

/// Spherical obstacle. Either `start` with an optional constant `velocity`,
/// or an explicit piecewise-linear `waypoints` schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waypoints: Option<Vec<WaypointSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Isotropic pixel variance shared by features and obstacle center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_variance: Option<f64>,
    /// Full 2×2 pixel covariance for every feature (overrides `pixel_variance`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_cov: Option<[[f64; 2]; 2]>,
    /// Full 2×2 pixel covariance for the obstacle center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_cov: Option<[[f64; 2]; 2]>,
    pub sigma: f64,
    /// Weight of the obstacle-radius term in the PrCBC linear coefficient:
    /// `on` (4), `derived` (2) or `off` (0).
    #[serde(default)]
    pub prcbc_b_extra_term: Switch,
}

/// A weight given as a multiple of the identity or as a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Weight {
    fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>, String> {
        match self {
            Weight::Scalar(s) => Ok(DMatrix::identity(n, n) * *s),
            Weight::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(format!("expected a {n}x{n} matrix"));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSpec {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_q")]
    pub q: Weight,
    #[serde(default = "default_r")]
    pub r: Weight,
    #[serde(default = "default_f")]
    pub f: Weight,
    #[serde(default = "default_vmax")]
    pub vmax: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_horizon() -> usize {
    5
}
fn default_q() -> Weight {
    Weight::Scalar(1.0)
}
fn default_r() -> Weight {
    Weight::Scalar(0.005)
}
fn default_f() -> Weight {
    Weight::Scalar(2.0)
}
fn default_vmax() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    0.05
}
fn default_gamma() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    1e-3
}
fn default_alpha() -> f64 {
    0.5
}

impl Default for MpcSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            q: default_q(),
            r: default_r(),
            f: default_f(),
            vmax: default_vmax(),
            dt: default_dt(),
        }
    }
}

/// Scenario document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub mode: Mode,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub max_steps: usize,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
    /// Gain of the gradient law used when the planner fails.
    #[serde(default = "default_alpha")]
    pub fallback_gain: f64,
    pub camera: CameraSpec,
    pub initial_pose: PoseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_pose: Option<PoseSpec>,
    /// Target feature pixels, alternative to `target_pose`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_pixels: Option<Vec<[f64; 2]>>,
    pub features: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub mpc: MpcSpec,
}

impl ScenarioSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Validated scenario with core types resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub intrinsics: CameraIntrinsics,
    pub initial_pose: CameraPose,
    pub target: Vec<NormalizedPoint>,
    pub points: Vec<Point3>,
    pub obstacle: Option<Obstacle>,
    pub noise: Option<NoiseModel>,
    pub radius_term: RadiusTerm,
    pub mpc: MpcConfig,
}

impl Scenario {
    pub fn mode(&self) -> Mode {
        self.spec.mode
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn dt(&self) -> f64 {
        self.mpc.dt
    }

    pub fn feature_count(&self) -> usize {
        self.points.len()
    }

    /// Side half-length of the probability square, shared by all features
    /// (the largest over features when covariances differ).
    pub fn square_quantile(&self) -> Result<f64, CoreError> {
        let Some(noise) = &self.noise else {
            return Ok(0.0);
        };
        let mut e = 0.0_f64;
        for i in 0..self.feature_count() {
            let cov = noise.relative_cov_normalized(i, self.intrinsics.f);
            let ei = match sigma_to_e(noise.sigma, &cov) {
                Err(CoreError::UnsupportedCovariance) => sigma_to_e_general(noise.sigma, &cov)?,
                other => other?,
            };
            e = e.max(ei);
        }
        Ok(e)
    }

    /// Same scenario with the obstacle schedule shifted to start at `start`.
    pub fn with_obstacle_start(&self, start: Point3) -> Scenario {
        let mut out = self.clone();
        if let Some(obs) = &self.obstacle {
            out.obstacle = Some(obs.relocated(start));
        }
        out
    }

    /// True when the obstacle covers a feature in the initial image.
    pub fn starts_occluded(&self) -> bool {
        let Some(obs) = &self.obstacle else {
            return false;
        };
        let Ok(state) = obstacle_image_state(obs, &self.initial_pose, &self.intrinsics, 0.0) else {
            return false;
        };
        self.points.iter().any(|p| {
            project_normalized(&world_to_camera(&self.initial_pose, p))
                .is_ok_and(|(s, _)| h_value(&s, &state.center, state.rn) <= 0.0)
        })
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        let mut out = self.clone();
        out.spec.seed = seed;
        out
    }

    pub fn with_mode(&self, mode: Mode) -> Scenario {
        let mut out = self.clone();
        out.spec.mode = mode;
        out
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Scenario, SimError> {
        let mut out = self.clone();
        match (&mut out.noise, &mut out.spec.noise) {
            (Some(model), Some(spec)) => {
                model.sigma = sigma;
                spec.sigma = sigma;
                model.validate().map_err(|e| SimError::Config(e.to_string()))?;
                Ok(out)
            }
            _ => Err(SimError::Config(
                "confidence level given but the scenario has no [noise] section".into(),
            )),
        }
    }
}

fn pose_field(spec: &PoseSpec, field: &str, problems: &mut Vec<String>) -> Option<CameraPose> {
    match spec.to_pose() {
        Ok(p) => Some(p),
        Err(e) => {
            problems.push(format!("{field}: {e}"));
            None
        }
    }
}

fn build_obstacle(spec: &ObstacleSpec) -> Result<Obstacle, String> {
    match (&spec.start, &spec.waypoints) {
        (Some(_), Some(_)) => Err("obstacle takes either start/velocity or waypoints".into()),
        (None, None) => Err("obstacle needs start or waypoints".into()),
        (Some(start), None) => {
            let start = Point3::from(*start);
            match spec.velocity {
                Some(v) if v != [0.0; 3] => {
                    // One waypoint per hour of motion is plenty for any run.
                    Obstacle::constant_velocity(spec.radius, start, Vector3::from(v), 3600.0)
                }
                _ => Obstacle::stationary(spec.radius, start),
            }
            .map_err(|e| e.to_string())
        }
        (None, Some(wps)) => {
            if spec.velocity.is_some() {
                return Err("obstacle velocity cannot be combined with waypoints".into());
            }
            Obstacle::new(
                spec.radius,
                wps.iter()
                    .map(|w| Waypoint {
                        time: w.t,
                        center: Point3::from(w.center),
                    })
                    .collect(),
            )
            .map_err(|e| e.to_string())
        }
    }
}

fn cov(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn build_noise(spec: &NoiseSpec) -> Result<NoiseModel, String> {
    let iso = spec.pixel_variance.map(|v| Matrix2::identity() * v);
    let feature = spec.feature_cov.as_ref().map(cov).or(iso);
    let obstacle = spec.obstacle_cov.as_ref().map(cov).or(iso);
    let (Some(feature), Some(obstacle)) = (feature, obstacle) else {
        return Err("noise needs pixel_variance or both feature_cov and obstacle_cov".into());
    };
    let model = NoiseModel {
        feature_cov: vec![feature],
        obstacle_cov: obstacle,
        sigma: spec.sigma,
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

/// Resolves and validates a scenario, returning every violated invariant.
pub fn validate(spec: &ScenarioSpec) -> Result<Scenario, Vec<String>> {
    let mut problems = Vec::new();

    let intrinsics = match CameraIntrinsics::new(spec.camera.f, spec.camera.px, spec.camera.py) {
        Ok(k) => Some(k),
        Err(e) => {
            problems.push(format!("camera: {e}"));
            None
        }
    };
    if spec.features.len() < 3 {
        problems.push(format!(
            "features: at least 3 points are needed, found {}",
            spec.features.len()
        ));
    }
    if !(spec.gamma > 0.0) {
        problems.push("gamma: must be positive".into());
    }
    if spec.max_steps == 0 {
        problems.push("max_steps: must be at least 1".into());
    }
    if !(spec.convergence_tol > 0.0) {
        problems.push("convergence_tol: must be positive".into());
    }
    if !(spec.fallback_gain > 0.0) {
        problems.push("fallback_gain: must be positive".into());
    }
    let points: Vec<Point3> = spec.features.iter().map(|p| Point3::from(*p)).collect();
    let m = points.len();

    let initial_pose = pose_field(&spec.initial_pose, "initial_pose", &mut problems);

    let target = match (&spec.target_pose, &spec.target_pixels, &intrinsics) {
        (Some(_), Some(_), _) => {
            problems.push("target: give either target_pose or target_pixels, not both".into());
            None
        }
        (None, None, _) => {
            problems.push("target: missing target_pose or target_pixels".into());
            None
        }
        (Some(tp), None, _) => pose_field(tp, "target_pose", &mut problems).and_then(|pose| {
            let proj: Result<Vec<_>, _> = points
                .iter()
                .map(|p| project_normalized(&world_to_camera(&pose, p)).map(|(s, _)| s))
                .collect();
            match proj {
                Ok(s) => Some(s),
                Err(e) => {
                    problems.push(format!("target_pose: feature not in front of camera ({e})"));
                    None
                }
            }
        }),
        (None, Some(px), Some(k)) => {
            if px.len() != m {
                problems.push(format!(
                    "target_pixels: expected {m} entries, found {}",
                    px.len()
                ));
                None
            } else {
                Some(
                    px.iter()
                        .map(|[u, v]| NormalizedPoint::new((u - k.px) / k.f, (v - k.py) / k.f))
                        .collect(),
                )
            }
        }
        (None, Some(_), None) => None,
    };

    let obstacle = spec.obstacle.as_ref().and_then(|o| match build_obstacle(o) {
        Ok(obs) => Some(obs),
        Err(e) => {
            problems.push(format!("obstacle: {e}"));
            None
        }
    });

    let noise = spec.noise.as_ref().and_then(|n| match build_noise(n) {
        Ok(model) => Some(model),
        Err(e) => {
            problems.push(format!("noise: {e}"));
            None
        }
    });
    if spec.mode == Mode::Prcbc && spec.noise.is_none() {
        problems.push("mode: prcbc needs a [noise] section with the confidence level".into());
    }

    let dim = 2 * m;
    let mut weights = Vec::new();
    for (name, w) in [("mpc.q", &spec.mpc.q), ("mpc.f", &spec.mpc.f)] {
        match w.to_matrix(dim) {
            Ok(mat) => {
                if !is_symmetric_psd(&mat, 1e-9) {
                    let which = if name == "mpc.q" { "Q" } else { "F" };
                    problems.push(format!(
                        "{name}: {which} must be symmetric positive semidefinite"
                    ));
                }
                weights.push(mat);
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    let r = match spec.mpc.r.to_matrix(6) {
        Ok(mat) => Some(Matrix6::from_iterator(mat.iter().copied())),
        Err(e) => {
            problems.push(format!("mpc.r: {e}"));
            None
        }
    };

    let mut mpc = None;
    if let (2, Some(r)) = (weights.len(), r) {
        let cfg = MpcConfig {
            horizon: spec.mpc.horizon,
            q: weights[0].clone(),
            r,
            f: weights[1].clone(),
            vmax: spec.mpc.vmax,
            dt: spec.mpc.dt,
        };
        match cfg.validate(dim) {
            Ok(()) => mpc = Some(cfg),
            Err(e) => {
                let msg = format!("mpc: {e}");
                if !problems.iter().any(|p| p.starts_with("mpc.q") || p.starts_with("mpc.f")) {
                    problems.push(msg);
                }
            }
        }
    }

    // Initial state: features in front of the camera and not occluded.
    if let (Some(pose), Some(k)) = (&initial_pose, &intrinsics) {
        let mut feats = Vec::with_capacity(m);
        for (i, p) in points.iter().enumerate() {
            match project_normalized(&world_to_camera(pose, p)) {
                Ok((s, _)) => feats.push(s),
                Err(_) => problems.push(format!(
                    "initial_pose: feature {} is not in front of the camera",
                    i + 1
                )),
            }
        }
        if let Some(obs) = &obstacle {
            if let Ok(state) = obstacle_image_state(obs, pose, k, 0.0) {
                if feats.iter().any(|s| h_value(s, &state.center, state.rn) <= 0.0) {
                    problems.push("initial state not occlusion-free".into());
                }
            }
        }
    }

    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(Scenario {
        spec: spec.clone(),
        intrinsics: intrinsics.expect("validated"),
        initial_pose: initial_pose.expect("validated"),
        target: target.expect("validated"),
        points,
        obstacle,
        noise,
        radius_term: match spec.noise.as_ref().map(|n| n.prcbc_b_extra_term) {
            Some(Switch::On) => RadiusTerm::On,
            Some(Switch::Off) => RadiusTerm::Off,
            _ => RadiusTerm::Derived,
        },
        mpc: mpc.expect("validated"),
    })
}

/// Parses and validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario, SimError> {
    let spec = ScenarioSpec::load(path)?;
    validate(&spec).map_err(SimError::Invalid)
}

/// Obstacle start locations for a sweep, one `[x, y, z]` per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationsFile {
    pub locations: Vec<[f64; 3]>,
}

pub fn load_locations(path: &Path) -> Result<Vec<Point3>, SimError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    let file: LocationsFile = toml::from_str(&text)
        .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    if file.locations.is_empty() {
        return Err(SimError::Config(format!("{}: no locations", path.display())));
    }
    Ok(file.locations.into_iter().map(Point3::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
mode = "unfiltered"
max_steps = 10
seed = 3
features = [[0.1, 0.1, 0.0], [-0.1, 0.1, 0.0], [-0.1, -0.1, 0.0], [0.1, -0.1, 0.0]]

[camera]
f = 500.0
px = 320.0
py = 240.0

[initial_pose]
translation = [0.05, 0.0, 0.6]
rotation = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]

[target_pose]
translation = [0.0, 0.0, 0.5]
rotation = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
"#;

    #[test]
    fn minimal_scenario_resolves() {
        let spec = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        let scn = validate(&spec).unwrap();
        assert_eq!(scn.feature_count(), 4);
        assert_eq!(scn.mpc.horizon, 5);
        assert!((scn.target[0].a - 0.2).abs() < 1e-15);
        assert!((scn.target[0].b + 0.2).abs() < 1e-15);
        assert_eq!(scn.square_quantile().unwrap(), 0.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("seed = 3", "seed = 3\nsede = 4");
        let err = ScenarioSpec::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("max_steps = 10\n", "");
        let err = ScenarioSpec::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("max_steps"), "{err}");
    }

    #[test]
    fn round_trip_through_toml() {
        let spec = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        let again = ScenarioSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn occluded_start_is_reported() {
        let text = format!("{MINIMAL}\n[obstacle]\nradius = 0.02\nstart = [0.075, 0.05, 0.3]\n");
        let spec = ScenarioSpec::from_toml_str(&text).unwrap();
        let problems = validate(&spec).unwrap_err();
        assert!(problems.iter().any(|p| p == "initial state not occlusion-free"));
    }

    #[test]
    fn indefinite_weight_names_q() {
        let text = format!("{MINIMAL}\n[mpc]\nq = -1.0\n");
        let spec = ScenarioSpec::from_toml_str(&text).unwrap();
        let problems = validate(&spec).unwrap_err();
        assert!(problems.iter().any(|p| p.contains("Q must be")), "{problems:?}");
    }

    #[test]
    fn too_few_features() {
        let mut spec = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        spec.features.truncate(2);
        let problems = validate(&spec).unwrap_err();
        assert!(problems.iter().any(|p| p.starts_with("features")));
    }

    #[test]
    fn pixel_targets() {
        let mut spec = ScenarioSpec::from_toml_str(MINIMAL).unwrap();
        spec.target_pose = None;
        spec.target_pixels = Some(vec![[420.0, 140.0], [220.0, 140.0], [220.0, 340.0], [420.0, 340.0]]);
        let scn = validate(&spec).unwrap();
        assert!((scn.target[0].a - 0.2).abs() < 1e-15);
        assert!((scn.target[0].b + 0.2).abs() < 1e-15);
    }

    #[test]
    fn isotropic_noise_quantile() {
        let text = format!("{MINIMAL}\n[noise]\npixel_variance = 10.0\nsigma = 0.8\n");
        let spec = ScenarioSpec::from_toml_str(&text).unwrap();
        let scn = validate(&spec).unwrap();
        // Relative noise is the sum of feature and obstacle noise.
        let nu = (20.0_f64).sqrt() / 500.0;
        let e = scn.square_quantile().unwrap();
        let expected = sigma_to_e(0.8, &(Matrix2::identity() * nu * nu)).unwrap();
        assert!((e - expected).abs() < 1e-15);
    }
}
