//! Independent numerical oracles for the core algorithms.
//!
//! Each suite draws random instances from a seeded ChaCha8 stream, solves
//! them with the library and with a slower, structurally different method,
//! and reports the worst discrepancy against a fixed tolerance.

use std::fmt;

use ibvs_core::barrier::{cbc_halfspaces, h_value, prcbc_quadratics, sigma_to_e, RadiusTerm};
use ibvs_core::geometry::{
    integrate_twist, project_normalized, world_to_camera, CameraIntrinsics, CameraPose,
    NormalizedPoint, ObstacleImageState, Point3,
};
use ibvs_core::barrier::{HalfspaceConstraint, QuadraticConstraint};
use ibvs_core::ibvs::Twist6;
use ibvs_core::jacobians::{
    feature_interaction, obstacle_center_interaction, obstacle_radius_interaction,
};
use ibvs_core::observation::FeatureObservation;
use ibvs_core::solvers::{
    certify, solve_filter_qcqp, solve_filter_qp, FilterProblem, FilterStatus,
};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x6, Matrix6, RowVector6, Vector6};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::rng::trial_rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub suite: &'static str,
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: measured {:.3e}, tolerance {:.3e}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            self.tolerance,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.detail)
            }
        )
    }
}

/// Check that passes when `measured ≤ tolerance`.
fn at_most(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64, detail: String) -> OracleCheck {
    OracleCheck {
        suite,
        name: name.into(),
        measured,
        tolerance,
        passed: measured <= tolerance,
        detail,
    }
}

/// Check that passes when `measured ≥ tolerance`.
fn at_least(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64, detail: String) -> OracleCheck {
    OracleCheck {
        suite,
        name: name.into(),
        measured,
        tolerance,
        passed: measured >= tolerance,
        detail,
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn gaussian_vec6(rng: &mut ChaCha8Rng) -> Vector6<f64> {
    Vector6::from_fn(|_, _| rng.sample(StandardNormal))
}

fn random_camera_point(rng: &mut ChaCha8Rng) -> Point3 {
    let z = uniform(rng, 0.3, 2.0);
    Point3::new(uniform(rng, -0.8, 0.8) * z, uniform(rng, -0.8, 0.8) * z, z)
}

// ---------------------------------------------------------------------------
// Finite-difference Jacobians

/// Image quantities of a world point seen from `pose`.
fn projected(pose: &CameraPose, p: &Point3) -> (NormalizedPoint, f64) {
    project_normalized(&world_to_camera(pose, p)).expect("point stays in front")
}

/// Central difference of `g` along every unit twist from the identity pose.
fn central_columns<const R: usize>(
    step: f64,
    g: impl Fn(&CameraPose) -> [f64; R],
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(R, 6);
    for j in 0..6 {
        let mut v = Vector6::zeros();
        v[j] = 1.0;
        let plus = g(&integrate_twist(&CameraPose::identity(), &Twist6(v), step));
        let minus = g(&integrate_twist(&CameraPose::identity(), &Twist6(v), -step));
        for r in 0..R {
            out[(r, j)] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    out
}

fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).norm() / analytic.norm().max(1e-300)
}

fn dyn2x6(m: &Matrix2x6<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(2, 6, m.iter().copied())
}

/// Feature, obstacle-center and obstacle-radius interaction matrices against
/// central differences of the projection under `integrate_twist`.
pub fn jacobian_suite(seed: u64, states: usize, step: f64) -> Vec<OracleCheck> {
    let mut rng = trial_rng(seed, 0);
    let (mut feat, mut center, mut radius, mut hdot) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..states {
        let p = random_camera_point(&mut rng);
        let (s, z) = projected(&CameraPose::identity(), &p);
        let l = dyn2x6(&feature_interaction(&s, z).expect("positive depth"));
        let fd = central_columns(step, |pose| {
            let (s, _) = projected(pose, &p);
            [s.a, s.b]
        });
        feat = feat.max(relative_error(&l, &fd));

        let po = random_camera_point(&mut rng);
        let r = uniform(&mut rng, 0.01, 0.2);
        let (so, zo) = projected(&CameraPose::identity(), &po);
        let lo = dyn2x6(&obstacle_center_interaction(&so, zo).expect("positive depth"));
        let fd_o = central_columns(step, |pose| {
            let (s, _) = projected(pose, &po);
            [s.a, s.b]
        });
        center = center.max(relative_error(&lo, &fd_o));

        let lor = obstacle_radius_interaction(&so, zo, r).expect("positive depth");
        let lor = DMatrix::from_iterator(1, 6, lor.iter().copied());
        let fd_r = central_columns(step, |pose| {
            let (_, z) = projected(pose, &po);
            [r / z]
        });
        radius = radius.max(relative_error(&lor, &fd_r));

        // Barrier derivative row against the difference of h itself.
        let k = CameraIntrinsics::new(500.0, 320.0, 240.0).expect("valid");
        let state = ObstacleImageState::from_camera_point(&po, r, &k).expect("positive depth");
        let obs = FeatureObservation::new(vec![s], vec![z], Some(state), 0.0).expect("valid");
        let row = cbc_halfspaces(&obs, 1.0).expect("valid")[0].m;
        let row = DMatrix::from_iterator(1, 6, row.iter().copied());
        let fd_h = central_columns(step, |pose| {
            let (s, _) = projected(pose, &p);
            let (so, zo) = projected(pose, &po);
            [h_value(&s, &so, r / zo)]
        });
        hdot = hdot.max(relative_error(&row, &fd_h));
    }
    let detail = format!("{states} states, step {step:e}");
    vec![
        at_most("jacobians", "feature interaction", feat, 1e-3, detail.clone()),
        at_most("jacobians", "obstacle center interaction", center, 1e-3, detail.clone()),
        at_most("jacobians", "obstacle radius interaction", radius, 1e-3, detail.clone()),
        at_most("jacobians", "barrier derivative row", hdot, 1e-3, detail),
    ]
}

// ---------------------------------------------------------------------------
// Monte-Carlo chance constraint

/// Parameters of the sampling oracle for the probabilistic certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChanceSetup {
    pub states: usize,
    pub draws: usize,
    pub pixel_variance: f64,
    pub focal: f64,
    pub gamma: f64,
    pub vmax: f64,
    pub radius_term: RadiusTerm,
}

impl Default for ChanceSetup {
    fn default() -> Self {
        Self {
            states: 50,
            draws: 10_000,
            pixel_variance: 10.0,
            focal: 500.0,
            gamma: 2.0,
            vmax: 0.5,
            radius_term: RadiusTerm::default(),
        }
    }
}

/// Random occlusion-free feature/obstacle pair in the camera frame, with
/// the feature between 1.2 and 3 projected radii from the obstacle center.
fn random_pair(rng: &mut ChaCha8Rng) -> (Point3, Point3, f64) {
    let zo = uniform(rng, 0.3, 0.8);
    let po = Point3::new(uniform(rng, -0.3, 0.3) * zo, uniform(rng, -0.3, 0.3) * zo, zo);
    let rn = uniform(rng, 0.03, 0.12);
    let radius = rn * zo;
    let dist = uniform(rng, 1.2, 3.0) * rn;
    let angle = uniform(rng, 0.0, std::f64::consts::TAU);
    let z = zo + uniform(rng, 0.05, 0.6);
    let a = po.x / zo + dist * angle.cos();
    let b = po.y / zo + dist * angle.sin();
    (Point3::new(a * z, b * z, z), po, radius)
}

/// Feasible interval of `t` with `q(t·d) ≤ 0` and `|t| ≤ t_max`.
fn feasible_interval(q: &QuadraticConstraint, d: &Vector6<f64>, t_max: f64) -> Option<(f64, f64)> {
    let qa = d.dot(&(q.a * d));
    let qb = (q.b * d)[0];
    let qc = q.c;
    let (lo, hi) = if qa > 1e-14 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa))
    } else if qb.abs() > 1e-14 {
        let root = -qc / qb;
        if qb > 0.0 {
            (f64::NEG_INFINITY, root)
        } else {
            (root, f64::INFINITY)
        }
    } else if qc <= 0.0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        return None;
    };
    let (lo, hi) = (lo.max(-t_max), hi.min(t_max));
    (lo <= hi).then_some((lo, hi))
}

/// Result of the sampling oracle at one confidence level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChanceResult {
    pub sigma: f64,
    /// Fraction of tested twists satisfying the true certificate, pooled.
    pub pooled: f64,
    /// Smallest per-state fraction.
    pub worst_state: f64,
    pub tested: usize,
}

/// For every state and noise draw, builds the probabilistic quadratic from
/// the noisy observation, takes the two extreme admissible twists along a
/// fixed random direction, and checks the noiseless certificate
/// `ḣ(V) + γh ≥ 0` at the true state.
pub fn chance_rate(seed: u64, sigma: f64, setup: &ChanceSetup) -> ChanceResult {
    let mut rng = trial_rng(seed, (sigma * 1e6) as u64);
    let k = CameraIntrinsics::new(setup.focal, 320.0, 240.0).expect("valid");
    let std_norm = setup.pixel_variance.sqrt() / setup.focal;
    // Relative position noise sums feature and obstacle noise.
    let rel_cov = Matrix2::identity() * (2.0 * std_norm * std_norm);
    let e = sigma_to_e(sigma, &rel_cov).expect("isotropic covariance");

    let (mut ok_total, mut tested_total) = (0usize, 0usize);
    let mut worst = 1.0_f64;
    for _ in 0..setup.states {
        let (p, po, radius) = random_pair(&mut rng);
        let (s, z) = project_normalized(&p).expect("in front");
        let truth_o = ObstacleImageState::from_camera_point(&po, radius, &k).expect("in front");
        let truth = FeatureObservation::new(vec![s], vec![z], Some(truth_o), 0.0).expect("valid");
        let cbc: HalfspaceConstraint = cbc_halfspaces(&truth, setup.gamma).expect("valid")[0];
        let d = gaussian_vec6(&mut rng).normalize();

        let (mut ok, mut tested) = (0usize, 0usize);
        for _ in 0..setup.draws {
            let mut s_hat = s;
            let mut o_hat = truth_o;
            s_hat.a += rng.sample::<f64, _>(StandardNormal) * std_norm;
            s_hat.b += rng.sample::<f64, _>(StandardNormal) * std_norm;
            o_hat.center.a += rng.sample::<f64, _>(StandardNormal) * std_norm;
            o_hat.center.b += rng.sample::<f64, _>(StandardNormal) * std_norm;
            let noisy = FeatureObservation::new(vec![s_hat], vec![z], Some(o_hat), 0.0).expect("valid");
            let quad = prcbc_quadratics(&noisy, setup.gamma, e, setup.radius_term).expect("valid")[0];
            let Some((lo, hi)) = feasible_interval(&quad, &d, setup.vmax) else {
                continue;
            };
            for t in [lo, hi] {
                tested += 1;
                if cbc.slack(&Twist6(d * t)) >= -1e-12 {
                    ok += 1;
                }
            }
        }
        if tested > 0 {
            worst = worst.min(ok as f64 / tested as f64);
        }
        ok_total += ok;
        tested_total += tested;
    }
    ChanceResult {
        sigma,
        pooled: if tested_total == 0 { f64::NAN } else { ok_total as f64 / tested_total as f64 },
        worst_state: worst,
        tested: tested_total,
    }
}

pub fn chance_suite(seed: u64, setup: &ChanceSetup) -> Vec<OracleCheck> {
    [0.8, 0.9]
        .into_iter()
        .flat_map(|sigma| {
            let r = chance_rate(seed, sigma, setup);
            let detail = format!(
                "{} states x {} draws, {} twists tested, pooled rate {:.4}",
                setup.states, setup.draws, r.tested, r.pooled
            );
            [at_least(
                "chance",
                format!("sigma {sigma} worst-state satisfaction rate"),
                r.worst_state,
                sigma - 0.02,
                detail,
            )]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Filter programs

/// Random strictly feasible half-space instance around an interior point.
pub fn random_qp(rng: &mut ChaCha8Rng, rows: usize, vmax: f64) -> FilterProblem {
    let v0 = gaussian_vec6(rng).normalize() * uniform(rng, 0.0, 0.8 * vmax);
    let halfspaces = (0..rows)
        .map(|_| {
            let m = RowVector6::from_iterator(gaussian_vec6(rng).iter().copied());
            let slack = uniform(rng, 0.0, 0.3) * m.norm() * vmax;
            HalfspaceConstraint {
                m,
                n: (m * v0)[0] - slack,
            }
        })
        .collect();
    let vref = gaussian_vec6(rng).normalize() * uniform(rng, 0.0, 2.0 * vmax);
    FilterProblem::cbc(Twist6(vref), halfspaces, vmax)
}

/// Random strictly feasible instance with rank-2 convex quadratics.
pub fn random_qcqp(rng: &mut ChaCha8Rng, rows: usize, vmax: f64) -> FilterProblem {
    let v0 = gaussian_vec6(rng).normalize() * uniform(rng, 0.0, 0.8 * vmax);
    let quadratics = (0..rows)
        .map(|_| {
            let g = Matrix2x6::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let a = g.transpose() * g * uniform(rng, 0.05, 1.0);
            let b = RowVector6::from_iterator(gaussian_vec6(rng).iter().copied()) * 0.5;
            let at_v0 = v0.dot(&(a * v0)) + (b * v0)[0];
            QuadraticConstraint {
                a,
                b,
                c: -at_v0 - uniform(rng, 0.0, 0.2),
            }
        })
        .collect();
    let vref = gaussian_vec6(rng).normalize() * uniform(rng, 0.0, 2.0 * vmax);
    FilterProblem::prcbc(Twist6(vref), quadratics, vmax)
}

/// Exact projection onto half-spaces ∩ ball by enumerating active sets.
///
/// For each subset `S` of half-spaces held at equality, the projection onto
/// the affine set is closed form; with the ball also active the multiplier
/// of the ball solves a scalar equation in closed form as well. The optimum
/// is the feasible candidate closest to the reference.
pub fn enumerate_qp(problem: &FilterProblem) -> Option<Vector6<f64>> {
    let y = problem.vref.0;
    let vmax = problem.vmax;
    let rows = &problem.halfspaces;
    let feasible = |v: &Vector6<f64>| {
        v.norm() <= vmax * (1.0 + 1e-9)
            && rows.iter().all(|h| h.slack(&Twist6(*v)) >= -1e-9 * (1.0 + h.m.norm()))
    };
    let mut best: Option<(f64, Vector6<f64>)> = None;
    let mut consider = |v: Vector6<f64>| {
        if feasible(&v) {
            let d = (v - y).norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, v));
            }
        }
    };
    for mask in 0u32..(1 << rows.len()) {
        let active: Vec<&HalfspaceConstraint> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, h)| h)
            .collect();
        let k = active.len();
        if k > 6 {
            continue;
        }
        // Affine set {V : M_S V = n_S} as x0 + null(M_S).
        let (proj, x0) = if k == 0 {
            (Matrix6::identity(), Vector6::zeros())
        } else {
            let m = DMatrix::from_fn(k, 6, |i, j| active[i].m[j]);
            let n = DVector::from_iterator(k, active.iter().map(|h| h.n));
            let gram = &m * m.transpose();
            let Some(chol) = gram.clone().cholesky() else {
                continue;
            };
            if gram.clone().symmetric_eigenvalues().min() < 1e-10 * gram.amax() {
                continue;
            }
            let x0 = m.transpose() * chol.solve(&n);
            let p = DMatrix::identity(6, 6) - m.transpose() * chol.solve(&m);
            (
                Matrix6::from_iterator(p.iter().copied()),
                Vector6::from_iterator(x0.iter().copied()),
            )
        };
        // Ball inactive.
        consider(proj * y + x0);
        // Ball active: ‖x0‖² + ‖P·y‖²/(1+λ)² = vmax².
        let py = proj * y;
        let room = vmax * vmax - x0.norm_squared();
        if room > 0.0 && py.norm() > 0.0 {
            let scale = py.norm() / room.sqrt();
            if scale >= 1.0 {
                consider(py / scale + x0);
            }
        } else if room.abs() <= 1e-14 {
            consider(x0);
        }
    }
    best.map(|(_, v)| v)
}

fn quad_value(q: &QuadraticConstraint, v: &Vector6<f64>) -> f64 {
    v.dot(&(q.a * v)) + (q.b * v)[0] + q.c
}

/// Euclidean projection onto `{V : q(V) ≤ 0}`, by bisection on the
/// multiplier of `min ½‖V − y‖² + λ·q(V)`.
fn project_quadratic(q: &QuadraticConstraint, y: &Vector6<f64>) -> Vector6<f64> {
    if quad_value(q, y) <= 0.0 {
        return *y;
    }
    let at = |lambda: f64| {
        let m = Matrix6::identity() + q.a * (2.0 * lambda);
        m.cholesky()
            .expect("positive definite")
            .solve(&(y - q.b.transpose() * lambda))
    };
    let mut hi = 1.0;
    while quad_value(q, &at(hi)) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quad_value(q, &at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    at(hi)
}

fn project_ball(y: &Vector6<f64>, r: f64) -> Vector6<f64> {
    let n = y.norm();
    if n > r {
        y * (r / n)
    } else {
        *y
    }
}

/// Dykstra's alternating projections onto the quadratics and the ball,
/// which converges to the projection of the reference onto the
/// intersection. Restarted with every cyclic ordering of the sets; the best
/// near-feasible end point wins.
pub fn dykstra_qcqp(problem: &FilterProblem, cycles: usize) -> Option<Vector6<f64>> {
    let y0 = problem.vref.0;
    let sets = problem.quadratics.len() + 1;
    let project = |j: usize, v: &Vector6<f64>| {
        if j < problem.quadratics.len() {
            project_quadratic(&problem.quadratics[j], v)
        } else {
            project_ball(v, problem.vmax)
        }
    };
    let violation = |v: &Vector6<f64>| {
        problem
            .quadratics
            .iter()
            .map(|q| quad_value(q, v))
            .fold(v.norm() - problem.vmax, f64::max)
    };
    let mut best: Option<(f64, Vector6<f64>)> = None;
    for shift in 0..sets {
        let order: Vec<usize> = (0..sets).map(|i| (i + shift) % sets).collect();
        let mut x = y0;
        let mut corr = vec![Vector6::zeros(); sets];
        for _ in 0..cycles {
            let before = x;
            for &j in &order {
                let z = x + corr[j];
                let p = project(j, &z);
                corr[j] = z - p;
                x = p;
            }
            if (x - before).amax() < 1e-13 {
                break;
            }
        }
        if violation(&x) <= 1e-8 {
            let d = 0.5 * (x - y0).norm_squared();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Filter programs against enumeration (half-spaces) and Dykstra
/// projections (quadratics); every optimal answer is also certified.
pub fn solver_suite(seed: u64, qp_instances: usize, qcqp_instances: usize) -> Vec<OracleCheck> {
    let mut rng = trial_rng(seed, 17);
    let vmax = 0.5;

    let (mut qp_err, mut qp_fail, mut cert_fail, mut optimal) = (0.0_f64, 0usize, 0usize, 0usize);
    let mut worst_kkt = 0.0_f64;
    for _ in 0..qp_instances {
        let rows = rng.random_range(1..=5);
        let problem = random_qp(&mut rng, rows, vmax);
        let sol = solve_filter_qp(&problem).expect("well-formed");
        let Some(exact) = enumerate_qp(&problem) else {
            qp_fail += 1;
            continue;
        };
        if sol.status != FilterStatus::Optimal {
            qp_fail += 1;
            continue;
        }
        optimal += 1;
        qp_err = qp_err.max((sol.v.0 - exact).amax());
        match certify(&sol, &problem) {
            Ok(c) => worst_kkt = worst_kkt.max(c.stationarity.max(c.complementarity)),
            Err(_) => cert_fail += 1,
        }
    }

    let (mut qc_err, mut qc_fail) = (0.0_f64, 0usize);
    for _ in 0..qcqp_instances {
        let rows = rng.random_range(1..=4);
        let problem = random_qcqp(&mut rng, rows, vmax);
        let sol = solve_filter_qcqp(&problem).expect("well-formed");
        let Some(reference) = dykstra_qcqp(&problem, 200_000) else {
            qc_fail += 1;
            continue;
        };
        if sol.status != FilterStatus::Optimal {
            qc_fail += 1;
            continue;
        }
        optimal += 1;
        let obj = |v: &Vector6<f64>| 0.5 * (v - problem.vref.0).norm_squared();
        qc_err = qc_err.max((obj(&sol.v.0) - obj(&reference)).abs());
        match certify(&sol, &problem) {
            Ok(c) => worst_kkt = worst_kkt.max(c.stationarity.max(c.complementarity)),
            Err(_) => cert_fail += 1,
        }
    }

    vec![
        at_most(
            "solvers",
            "half-space filter vs active-set enumeration (max abs twist error)",
            qp_err,
            1e-6,
            format!("{qp_instances} instances, {qp_fail} not optimal or unmatched"),
        ),
        at_most("solvers", "half-space instances not solved", qp_fail as f64, 0.0, String::new()),
        at_most(
            "solvers",
            "quadratic filter vs Dykstra projections (max abs objective error)",
            qc_err,
            1e-4,
            format!("{qcqp_instances} instances, {qc_fail} not optimal or unmatched"),
        ),
        at_most("solvers", "quadratic instances not solved", qc_fail as f64, 0.0, String::new()),
        at_most(
            "solvers",
            "KKT certification failures",
            cert_fail as f64,
            0.0,
            format!("{optimal} optimal solutions, worst residual {worst_kkt:.2e}"),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Square quantile

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Probability mass of `N(0, Σ)` over `[−e, e]²` by composite tensor
/// Gauss–Legendre quadrature of the density.
pub fn square_mass(e: f64, cov: &Matrix2<f64>) -> f64 {
    let inv = cov.try_inverse().expect("non-singular covariance");
    let norm = 1.0 / (2.0 * std::f64::consts::PI * cov.determinant().sqrt());
    let rule = gauss_legendre(20);
    let panels = 24;
    let h = 2.0 * e / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let mid = -e + h * (p as f64 + 0.5);
            rule.iter().map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect();
    let mut total = 0.0;
    for (x, wx) in &nodes {
        for (y, wy) in &nodes {
            let q = inv[(0, 0)] * x * x + 2.0 * inv[(0, 1)] * x * y + inv[(1, 1)] * y * y;
            total += wx * wy * (-0.5 * q).exp();
        }
    }
    total * norm
}

pub fn quantile_suite(sigmas: &[f64], nus: &[f64]) -> Vec<OracleCheck> {
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for &sigma in sigmas {
        for &nu in nus {
            let cov = Matrix2::identity() * (nu * nu);
            let e = sigma_to_e(sigma, &cov).expect("diagonal");
            worst = worst.max((square_mass(e, &cov) - sigma).abs());
            cases += 1;
        }
    }
    // Anisotropic diagonal covariance.
    for &sigma in sigmas {
        let cov = Matrix2::new(2.0, 0.0, 0.0, 0.3);
        let e = sigma_to_e(sigma, &cov).expect("diagonal");
        worst = worst.max((square_mass(e, &cov) - sigma).abs());
        cases += 1;
    }
    vec![at_most(
        "quantile",
        "square probability at the computed half-side",
        worst,
        1e-6,
        format!("{cases} (sigma, covariance) cases"),
    )]
}

/// Suites selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Jacobians,
    Chance,
    Solvers,
    Quantile,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobians" => Ok(Suite::Jacobians),
            "chance" => Ok(Suite::Chance),
            "solvers" => Ok(Suite::Solvers),
            "quantile" => Ok(Suite::Quantile),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected jacobians, chance, solvers, quantile or all)"
            )),
        }
    }
}

pub const QUANTILE_SIGMAS: [f64; 4] = [0.5, 0.8, 0.9, 0.99];
pub const QUANTILE_NUS: [f64; 3] = [0.1, 1.0, 10.0];

pub fn run_suite(suite: Suite, seed: u64) -> Vec<OracleCheck> {
    match suite {
        Suite::Jacobians => jacobian_suite(seed, 100, 1e-5),
        Suite::Chance => chance_suite(seed, &ChanceSetup::default()),
        Suite::Solvers => solver_suite(seed, 1000, 200),
        Suite::Quantile => quantile_suite(&QUANTILE_SIGMAS, &QUANTILE_NUS),
        Suite::All => [Suite::Jacobians, Suite::Quantile, Suite::Solvers, Suite::Chance]
            .into_iter()
            .flat_map(|s| run_suite(s, seed))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = gauss_legendre(20);
        let w: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
        let x38: f64 = rule.iter().map(|(x, w)| w * x.powi(38)).sum();
        assert!((x38 - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn square_mass_of_unit_normal() {
        // Pr(|x| ≤ 1)² for independent standard normals.
        let p1 = 0.682_689_492_137_085_9_f64;
        assert!((square_mass(1.0, &Matrix2::identity()) - p1 * p1).abs() < 1e-12);
    }

    #[test]
    fn enumeration_handles_ball_only() {
        let problem = FilterProblem::cbc(Twist6::from([3.0, 4.0, 0.0, 0.0, 0.0, 0.0]), vec![], 1.0);
        let v = enumerate_qp(&problem).unwrap();
        assert!((v - Vector6::new(0.6, 0.8, 0.0, 0.0, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn quadratic_projection_lands_on_boundary() {
        let q = QuadraticConstraint {
            a: Matrix6::identity(),
            b: RowVector6::zeros(),
            c: -1.0,
        };
        let p = project_quadratic(&q, &Vector6::new(2.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }
}
