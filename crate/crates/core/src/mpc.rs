//! Condensed finite-horizon planner for the feature error.
//!
//! With the interaction matrix frozen over the horizon, the prediction
//! `e_{k+1} = e_k + dt·L·V_k` is linear in the stacked control vector
//! `U = [V_0; …; V_{N−1}]`, so the cost
//!
//! ```text
//! Σ_{k<N} (e_kᵀQe_k + V_kᵀRV_k) + e_NᵀFe_N
//! ```
//!
//! is a convex quadratic in `U` and the per-step bound `‖V_k‖ ≤ V_max` is a
//! product of balls. It is solved by accelerated projected gradient, with a
//! log-barrier path for badly conditioned Hessians.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::ibvs::{FeatureError, Twist6};
use crate::jacobians::StackedInteraction;
use crate::solvers::interior::{solve_from, BarrierParams, Constraint, Program};

/// Condition number above which projected gradient hands over to the barrier path.
const MAX_GRADIENT_CONDITION: f64 = 1e6;
const MAX_GRADIENT_ITERS: usize = 20_000;
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Stage weight on the feature error (`2m × 2m`).
    pub q: DMatrix<f64>,
    /// Input weight (`6 × 6`).
    pub r: Matrix6<f64>,
    /// Terminal weight (`2m × 2m`).
    pub f: DMatrix<f64>,
    pub vmax: f64,
    pub dt: f64,
}

impl MpcConfig {
    /// `N = 5`, `Q = I`, `R = 0.005·I`, `F = 2·I`, `V_max = 0.5`, `dt = 0.05`.
    pub fn defaults(features: usize) -> Self {
        let n = 2 * features;
        Self {
            horizon: 5,
            q: DMatrix::identity(n, n),
            r: Matrix6::identity() * 0.005,
            f: DMatrix::identity(n, n) * 2.0,
            vmax: 0.5,
            dt: 0.05,
        }
    }

    pub fn validate(&self, error_dim: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1"));
        }
        if !(self.vmax > 0.0) || !self.vmax.is_finite() {
            return Err(Error::InvalidParameter("velocity bound must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter("time step must be positive"));
        }
        for (name, w) in [("Q", &self.q), ("F", &self.f)] {
            if w.shape() != (error_dim, error_dim) {
                return Err(Error::DimensionMismatch {
                    expected: error_dim,
                    found: w.nrows(),
                });
            }
            if !is_symmetric_psd(w, PSD_TOL) {
                return Err(Error::InvalidParameter(match name {
                    "Q" => "Q must be symmetric positive semidefinite",
                    _ => "F must be symmetric positive semidefinite",
                }));
            }
        }
        if (self.r - self.r.transpose()).amax() > PSD_TOL || self.r.symmetric_eigenvalues().min() <= 0.0
        {
            return Err(Error::InvalidParameter("R must be symmetric positive definite"));
        }
        Ok(())
    }
}

pub fn is_symmetric_psd(w: &DMatrix<f64>, tol: f64) -> bool {
    w.is_square()
        && (w - w.transpose()).amax() <= tol
        && w.clone().symmetric_eigenvalues().min() >= -tol
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    pub controls: Vec<Twist6>,
}

impl ControlSequence {
    pub fn zeros(horizon: usize) -> Self {
        Self {
            controls: alloc::vec![Twist6::zero(); horizon],
        }
    }

    /// First control, executed as the nominal twist.
    pub fn first(&self) -> Twist6 {
        self.controls.first().copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            6 * self.controls.len(),
            self.controls.iter().flat_map(|v| v.0.iter().copied()),
        )
    }

    fn from_stacked(u: &DVector<f64>) -> Self {
        Self {
            controls: (0..u.len() / 6)
                .map(|k| Twist6(Vector6::from_iterator(u.rows(6 * k, 6).iter().copied())))
                .collect(),
        }
    }
}

/// Predicted errors `e_0 … e_N` under `e_{k+1} = e_k + dt·L·V_k`.
pub fn predict_errors(
    e0: &FeatureError,
    l: &StackedInteraction,
    seq: &ControlSequence,
    dt: f64,
) -> Result<Vec<FeatureError>> {
    if e0.len() != l.matrix().nrows() {
        return Err(Error::DimensionMismatch {
            expected: l.matrix().nrows(),
            found: e0.len(),
        });
    }
    let mut out = Vec::with_capacity(seq.len() + 1);
    let mut e = e0.0.clone();
    out.push(FeatureError(e.clone()));
    for v in &seq.controls {
        e += l.matrix() * v.0 * dt;
        out.push(FeatureError(e.clone()));
    }
    Ok(out)
}

/// Cost of a control sequence evaluated by forward prediction.
pub fn sequence_cost(
    e0: &FeatureError,
    l: &StackedInteraction,
    seq: &ControlSequence,
    cfg: &MpcConfig,
) -> Result<f64> {
    let errors = predict_errors(e0, l, seq, cfg.dt)?;
    let mut cost = 0.0;
    for (k, v) in seq.controls.iter().enumerate() {
        let e = &errors[k].0;
        cost += e.dot(&(&cfg.q * e)) + v.0.dot(&(cfg.r * v.0));
    }
    let e_n = &errors[seq.len()].0;
    Ok(cost + e_n.dot(&(&cfg.f * e_n)))
}

/// Condensed quadratic `½UᵀHU + gᵀU + const` of the planning cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
}

pub fn condense(e0: &FeatureError, l: &StackedInteraction, cfg: &MpcConfig) -> Result<CondensedQp> {
    let dim = l.matrix().nrows();
    if e0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: e0.len(),
        });
    }
    cfg.validate(dim)?;
    let n = cfg.horizon;
    let b: DMatrix<f64> = DMatrix::from_iterator(dim, 6, l.matrix().iter().copied()) * cfg.dt;

    // suffix[k] = Σ_{j=k}^{N} W_j with W_j = Q (j < N), W_N = F; e_0 carries no
    // control dependence so suffix[0] is unused.
    let mut suffix = alloc::vec![DMatrix::zeros(dim, dim); n + 2];
    suffix[n] = cfg.f.clone();
    for k in (1..n).rev() {
        suffix[k] = &suffix[k + 1] + &cfg.q;
    }
    let bt = b.transpose();
    let blocks: Vec<DMatrix<f64>> = (0..=n).map(|k| &bt * &suffix[k] * &b).collect();

    let mut hessian = DMatrix::zeros(6 * n, 6 * n);
    let mut gradient = DVector::zeros(6 * n);
    for i in 0..n {
        for j in 0..n {
            let mut block = blocks[i.max(j) + 1].clone();
            if i == j {
                block += DMatrix::from_iterator(6, 6, cfg.r.iter().copied());
            }
            hessian.view_mut((6 * i, 6 * j), (6, 6)).copy_from(&(block * 2.0));
        }
        let gi = &bt * &suffix[i + 1] * &e0.0 * 2.0;
        gradient.rows_mut(6 * i, 6).copy_from(&gi);
    }
    Ok(CondensedQp { hessian, gradient })
}

fn project_blocks(u: &mut DVector<f64>, vmax: f64) {
    for k in 0..u.len() / 6 {
        let mut blk = u.rows_mut(6 * k, 6);
        let nrm = blk.norm();
        if nrm > vmax {
            blk *= vmax / nrm;
        }
    }
}

/// Norm of the negative gradient projected onto the tangent cone of the
/// ball product at `U`.
pub fn stationarity_residual(qp: &CondensedQp, u: &DVector<f64>, vmax: f64) -> (f64, f64) {
    let grad = &qp.hessian * u + &qp.gradient;
    let mut res = 0.0;
    for k in 0..u.len() / 6 {
        let uk = u.rows(6 * k, 6);
        let mut d = -grad.rows(6 * k, 6).into_owned();
        let on_boundary = uk.norm() >= vmax * (1.0 - 1e-9);
        if on_boundary {
            let outward = uk.dot(&d);
            if outward > 0.0 {
                d -= uk * (outward / uk.norm_squared());
            }
        }
        res += d.norm_squared();
    }
    (libm::sqrt(res), grad.norm())
}

fn accelerated_projected_gradient(qp: &CondensedQp, vmax: f64, lmax: f64) -> Option<DVector<f64>> {
    let step = 1.0 / lmax;
    let mut x = DVector::zeros(qp.gradient.len());
    let mut y = x.clone();
    let mut t = 1.0;
    for _ in 0..MAX_GRADIENT_ITERS {
        let grad = &qp.hessian * &y + &qp.gradient;
        let mut x_next = &y - grad * step;
        project_blocks(&mut x_next, vmax);
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
        // Gradient-based adaptive restart.
        let restart = (&y - &x_next).dot(&(&x_next - &x)) > 0.0;
        if restart {
            y = x_next.clone();
            t = 1.0;
        } else {
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        let moved = (&x_next - &x).amax();
        x = x_next;
        if moved <= 1e-14 * (1.0 + x.amax()) {
            let (res, g) = stationarity_residual(qp, &x, vmax);
            if res <= 1e-9 * (1.0 + g) {
                return Some(x);
            }
        }
    }
    let (res, g) = stationarity_residual(qp, &x, vmax);
    (res <= 1e-7 * (1.0 + g)).then_some(x)
}

fn barrier_path(qp: &CondensedQp, horizon: usize, vmax: f64) -> Result<DVector<f64>> {
    let program = Program {
        hessian: qp.hessian.clone(),
        linear: qp.gradient.clone(),
        constraints: (0..horizon)
            .map(|k| Constraint::Ball {
                offset: 6 * k,
                len: 6,
                radius: vmax,
            })
            .collect(),
    };
    let sol = solve_from(&program, DVector::zeros(6 * horizon), &BarrierParams::default())?;
    Ok(sol.x)
}

/// Plans the control sequence minimizing the horizon cost subject to
/// `‖V_k‖₂ ≤ V_max`.
pub fn plan(e0: &FeatureError, l: &StackedInteraction, cfg: &MpcConfig) -> Result<ControlSequence> {
    let qp = condense(e0, l, cfg)?;
    let chol = qp
        .hessian
        .clone()
        .cholesky()
        .ok_or(Error::NumericalBreakdown("condensed Hessian is not positive definite"))?;

    let unconstrained = -chol.solve(&qp.gradient);
    let inside = (0..cfg.horizon).all(|k| unconstrained.rows(6 * k, 6).norm() <= cfg.vmax);
    if inside {
        return Ok(ControlSequence::from_stacked(&unconstrained));
    }

    let eig = qp.hessian.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    if lmax / lmin <= MAX_GRADIENT_CONDITION {
        if let Some(u) = accelerated_projected_gradient(&qp, cfg.vmax, lmax) {
            return Ok(ControlSequence::from_stacked(&u));
        }
    }
    match barrier_path(&qp, cfg.horizon, cfg.vmax) {
        Ok(mut u) => {
            project_blocks(&mut u, cfg.vmax);
            Ok(ControlSequence::from_stacked(&u))
        }
        Err(Error::SolverFailure { iterations }) => Err(Error::SolverFailure { iterations }),
        Err(_) => Err(Error::SolverFailure {
            iterations: MAX_GRADIENT_ITERS,
        }),
    }
}

/// Condensed cost `½UᵀHU + gᵀU` (the constant `e_0`-only part omitted).
pub fn condensed_cost(qp: &CondensedQp, seq: &ControlSequence) -> f64 {
    let u = seq.stacked();
    0.5 * u.dot(&(&qp.hessian * &u)) + qp.gradient.dot(&u)
}
