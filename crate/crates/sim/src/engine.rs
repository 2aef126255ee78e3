//! Closed loop: observe, plan, filter, integrate, move the obstacle.

use ibvs_core::barrier::{cbc_halfspaces, h_value, min_row_inf_norm, prcbc_quadratics};
use ibvs_core::geometry::{
    integrate_twist, obstacle_image_state, project_normalized, world_to_camera, CameraPose,
    ImagePoint, NormalizedPoint, ObstacleImageState,
};
use ibvs_core::ibvs::{gradient_controller, FeatureError, Twist6};
use ibvs_core::mpc::plan;
use ibvs_core::observation::FeatureObservation;
use ibvs_core::solvers::{solve_filter_qcqp, solve_filter_qp, FilterProblem, FilterStatus};
use ibvs_core::Error as CoreError;
use nalgebra::{DVector, Matrix2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::rng::trial_rng;
use crate::scenario::{Mode, Scenario};

/// Camera pose and clock of a running trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneState {
    pub pose: CameraPose,
    pub step: usize,
    pub time: f64,
}

impl SceneState {
    pub fn initial(scn: &Scenario) -> Self {
        Self {
            pose: scn.initial_pose,
            step: 0,
            time: 0.0,
        }
    }
}

/// Exact image-plane state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueState {
    pub features: Vec<NormalizedPoint>,
    pub depths: Vec<f64>,
    /// `None` when the obstacle center is not in front of the camera.
    pub obstacle: Option<ObstacleImageState>,
}

pub fn true_state(scn: &Scenario, state: &SceneState) -> Result<TrueState, CoreError> {
    let mut features = Vec::with_capacity(scn.feature_count());
    let mut depths = Vec::with_capacity(scn.feature_count());
    for p in &scn.points {
        let (s, z) = project_normalized(&world_to_camera(&state.pose, p))?;
        features.push(s);
        depths.push(z);
    }
    let obstacle = scn
        .obstacle
        .as_ref()
        .and_then(|o| obstacle_image_state(o, &state.pose, &scn.intrinsics, state.time).ok());
    Ok(TrueState {
        features,
        depths,
        obstacle,
    })
}

/// Lower-triangular factor of a 2×2 PSD covariance (tolerates singular ones).
fn cholesky2(c: &Matrix2<f64>) -> Matrix2<f64> {
    let l11 = c[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { c[(1, 0)] / l11 } else { 0.0 };
    let l22 = (c[(1, 1)] - l21 * l21).max(0.0).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}

fn draw_pixel_noise(factor: &Matrix2<f64>, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let w = factor * nalgebra::Vector2::new(z1, z2);
    (w[0], w[1])
}

/// Adds pixel noise to every feature and then the obstacle center, in that
/// order, and evaluates interaction matrices at the noisy coordinates.
/// Depths are exact.
pub fn observe(
    scn: &Scenario,
    truth: &TrueState,
    time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FeatureObservation, CoreError> {
    let f = scn.intrinsics.f;
    let mut features = truth.features.clone();
    let mut obstacle = truth.obstacle;
    if let Some(noise) = &scn.noise {
        for (i, s) in features.iter_mut().enumerate() {
            let (wu, wv) = draw_pixel_noise(&cholesky2(noise.feature_cov(i)), rng);
            s.a += wu / f;
            s.b += wv / f;
        }
        if let Some(o) = &mut obstacle {
            let (wu, wv) = draw_pixel_noise(&cholesky2(&noise.obstacle_cov), rng);
            o.center.a += wu / f;
            o.center.b += wv / f;
        }
    }
    FeatureObservation::new(features, truth.depths.clone(), obstacle, time)
}

/// Pixel distance from a feature to the obstacle's projected edge.
pub fn dis_metric(q_i: &ImagePoint, q_o: &ImagePoint, r_px: f64) -> f64 {
    q_i.distance(q_o) - r_px
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    /// The filter returned its optimum.
    Optimal,
    /// The filter could not certify a twist and held the camera still.
    Hold,
    /// No filter in this mode.
    Unfiltered,
    /// Final state of the trial; no control was applied.
    Terminal,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Hold => "hold",
            StepStatus::Unfiltered => "unfiltered",
            StepStatus::Terminal => "terminal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// `‖s − s*‖` at the true state.
    pub e_norm: f64,
    /// Barrier values at the true state; `None` when the obstacle is not in
    /// front of the camera.
    pub h: Option<Vec<f64>>,
    /// `min_i ‖s_i − s_o‖ − R_n` at the true state (normalized units).
    pub min_dist: Option<f64>,
    /// `min_i Dis_i` in pixels at the true state.
    pub dis_px: Option<f64>,
    pub v_star: Twist6,
    pub v_mpc: Twist6,
    pub status: StepStatus,
    pub planner_fallback: bool,
    /// Smallest `‖M_i‖∞` of the certificate rows built this step.
    pub min_row_norm: Option<f64>,
    pub true_features: Vec<NormalizedPoint>,
    pub observed_features: Vec<NormalizedPoint>,
    pub true_obstacle: Option<ObstacleImageState>,
    pub observed_obstacle: Option<NormalizedPoint>,
}

impl StepRecord {
    pub fn occluded(&self) -> bool {
        self.h.as_ref().is_some_and(|h| h.iter().any(|x| *x < 0.0))
    }

    pub fn min_h(&self) -> Option<f64> {
        self.h.as_ref().map(|h| h.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub converged: bool,
    pub steps: usize,
    pub final_e_norm: f64,
    pub min_h: Option<f64>,
    pub min_dist: Option<f64>,
    pub min_dis_px: Option<f64>,
    /// Logged states with at least one feature inside the obstacle disk.
    pub occlusion_steps: usize,
    pub hold_steps: usize,
    pub planner_fallbacks: usize,
    pub min_row_norm: Option<f64>,
    pub aborted: Option<String>,
}

fn fold_min(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().fold(None, |acc, x| Some(acc.map_or(x, |a: f64| a.min(x))))
}

impl Summary {
    /// Recomputes the summary from the records alone.
    pub fn from_records(records: &[StepRecord], converged: bool, aborted: Option<String>) -> Self {
        Self {
            converged,
            steps: records.iter().filter(|r| r.status != StepStatus::Terminal).count(),
            final_e_norm: records.last().map_or(f64::NAN, |r| r.e_norm),
            min_h: fold_min(records.iter().map(|r| r.min_h())),
            min_dist: fold_min(records.iter().map(|r| r.min_dist)),
            min_dis_px: fold_min(records.iter().map(|r| r.dis_px)),
            occlusion_steps: records.iter().filter(|r| r.occluded()).count(),
            hold_steps: records.iter().filter(|r| r.status == StepStatus::Hold).count(),
            planner_fallbacks: records.iter().filter(|r| r.planner_fallback).count(),
            min_row_norm: fold_min(records.iter().map(|r| r.min_row_norm)),
            aborted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub digest: String,
    pub mode: Mode,
    pub seed: u64,
    pub features: usize,
    pub records: Vec<StepRecord>,
    pub summary: Summary,
}

fn metrics(scn: &Scenario, truth: &TrueState) -> (Option<Vec<f64>>, Option<f64>, Option<f64>) {
    let Some(o) = &truth.obstacle else {
        return (None, None, None);
    };
    let k = &scn.intrinsics;
    let h: Vec<f64> = truth
        .features
        .iter()
        .map(|s| h_value(s, &o.center, o.rn))
        .collect();
    let min_dist = truth
        .features
        .iter()
        .map(|s| s.distance_squared(&o.center).sqrt() - o.rn)
        .fold(f64::INFINITY, f64::min);
    let q_o = ibvs_core::geometry::denormalize(&o.center, k);
    let dis = truth
        .features
        .iter()
        .map(|s| dis_metric(&ibvs_core::geometry::denormalize(s, k), &q_o, o.r_px))
        .fold(f64::INFINITY, f64::min);
    (Some(h), Some(min_dist), Some(dis))
}

fn error_norm(features: &[NormalizedPoint], target: &[NormalizedPoint]) -> f64 {
    features
        .iter()
        .zip(target)
        .map(|(s, t)| s.distance_squared(t))
        .sum::<f64>()
        .sqrt()
}

fn stacked_error(features: &[NormalizedPoint], target: &[NormalizedPoint]) -> FeatureError {
    FeatureError(DVector::from_iterator(
        2 * features.len(),
        features
            .iter()
            .zip(target)
            .flat_map(|(s, t)| [s.a - t.a, s.b - t.b]),
    ))
}

/// Why a trial stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub reason: String,
}

impl From<CoreError> for Abort {
    fn from(e: CoreError) -> Self {
        Abort {
            reason: e.to_string(),
        }
    }
}

/// One control period from `state`. Returns the next state and the record
/// of the state the control was computed at.
pub fn step(
    scn: &Scenario,
    state: &SceneState,
    rng: &mut ChaCha8Rng,
) -> Result<(SceneState, StepRecord), Abort> {
    let truth = true_state(scn, state)?;
    let obs = observe(scn, &truth, state.time, rng)?;
    let l = obs.stacked_interaction()?;
    let e = stacked_error(&obs.features, &scn.target);
    let vmax = scn.mpc.vmax;

    let (v_mpc, planner_fallback) = match plan(&e, &l, &scn.mpc) {
        Ok(seq) => (seq.first(), false),
        Err(_) => (
            gradient_controller(&e, &l, scn.spec.fallback_gain)?.clipped(vmax),
            true,
        ),
    };

    let gamma = scn.spec.gamma;
    let (v_star, status, min_row_norm) = match (scn.mode(), &obs.obstacle) {
        (Mode::Unfiltered, _) | (_, None) => (v_mpc, StepStatus::Unfiltered, None),
        (Mode::Cbc, Some(_)) => {
            let rows = cbc_halfspaces(&obs, gamma)?;
            let norm = min_row_inf_norm(&rows);
            let sol = solve_filter_qp(&FilterProblem::cbc(v_mpc, rows, vmax))?;
            let status = match sol.status {
                FilterStatus::Optimal => StepStatus::Optimal,
                FilterStatus::FallbackHold => StepStatus::Hold,
            };
            (sol.v, status, Some(norm))
        }
        (Mode::Prcbc, Some(_)) => {
            let rows = cbc_halfspaces(&obs, gamma)?;
            let norm = min_row_inf_norm(&rows);
            let quads = prcbc_quadratics(&obs, gamma, scn.square_quantile()?, scn.radius_term)?;
            let sol = solve_filter_qcqp(&FilterProblem::prcbc(v_mpc, quads, vmax))?;
            let status = match sol.status {
                FilterStatus::Optimal => StepStatus::Optimal,
                FilterStatus::FallbackHold => StepStatus::Hold,
            };
            (sol.v, status, Some(norm))
        }
    };

    let (h, min_dist, dis_px) = metrics(scn, &truth);
    let record = StepRecord {
        step: state.step,
        t: state.time,
        e_norm: error_norm(&truth.features, &scn.target),
        h,
        min_dist,
        dis_px,
        v_star,
        v_mpc,
        status,
        planner_fallback,
        min_row_norm,
        true_features: truth.features,
        observed_features: obs.features,
        true_obstacle: truth.obstacle,
        observed_obstacle: obs.obstacle.map(|o| o.state.center),
    };
    let next = SceneState {
        pose: integrate_twist(&state.pose, &v_star, scn.dt()),
        step: state.step + 1,
        time: (state.step + 1) as f64 * scn.dt(),
    };
    Ok((next, record))
}

fn terminal_record(scn: &Scenario, state: &SceneState) -> Result<StepRecord, CoreError> {
    let truth = true_state(scn, state)?;
    let (h, min_dist, dis_px) = metrics(scn, &truth);
    Ok(StepRecord {
        step: state.step,
        t: state.time,
        e_norm: error_norm(&truth.features, &scn.target),
        h,
        min_dist,
        dis_px,
        v_star: Twist6::zero(),
        v_mpc: Twist6::zero(),
        status: StepStatus::Terminal,
        planner_fallback: false,
        min_row_norm: None,
        observed_features: truth.features.clone(),
        true_features: truth.features,
        true_obstacle: truth.obstacle,
        observed_obstacle: None,
    })
}

/// Runs a trial until the true feature error drops below the convergence
/// tolerance or `max_steps` controls have been applied. The last record is
/// the terminal state.
pub fn run(scn: &Scenario) -> TrajectoryLog {
    let mut rng = trial_rng(scn.seed(), 0);
    let mut state = SceneState::initial(scn);
    let mut records = Vec::with_capacity(scn.spec.max_steps + 1);
    let mut aborted = None;
    let mut converged = false;

    loop {
        let e_norm = match true_state(scn, &state) {
            Ok(t) => error_norm(&t.features, &scn.target),
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        if e_norm < scn.spec.convergence_tol {
            converged = true;
        }
        if converged || state.step >= scn.spec.max_steps {
            match terminal_record(scn, &state) {
                Ok(r) => records.push(r),
                Err(e) => aborted = Some(e.to_string()),
            }
            break;
        }
        match step(scn, &state, &mut rng) {
            Ok((next, record)) => {
                records.push(record);
                state = next;
            }
            Err(a) => {
                aborted = Some(a.reason);
                break;
            }
        }
    }

    let summary = Summary::from_records(&records, converged, aborted);
    TrajectoryLog {
        scenario: scn.spec.name.clone(),
        digest: crate::export::digest(scn),
        mode: scn.mode(),
        seed: scn.seed(),
        features: scn.feature_count(),
        records,
        summary,
    }
}
