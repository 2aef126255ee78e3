//! Minimal-deviation safety filters
//!
//! Both programs project the planner's twist onto the admissible set:
//!
//! ```text
//! minimize ‖V − V_ref‖²   subject to   certificate constraints,  ‖V‖² ≤ V_max²
//! ```
//!
//! The half-space (CBC) and quadratic (PrCBC) variants share the log-barrier
//! machinery in [`interior`]. When no admissible twist exists the filter
//! holds the camera still (`V = 0`).

pub mod interior;

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector6};

use crate::barrier::{HalfspaceConstraint, QuadraticConstraint};
use crate::error::{Error, Result};
use crate::ibvs::Twist6;
use interior::{phase_one, solve_from, BarrierParams, Constraint, PhaseOne, Program};

/// Constraint slack accepted as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Default KKT tolerance used by [`certify`].
pub const KKT_TOL: f64 = 1e-6;
/// A constraint within this value of its boundary counts as active.
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterProblem {
    pub vref: Twist6,
    pub halfspaces: Vec<HalfspaceConstraint>,
    pub quadratics: Vec<QuadraticConstraint>,
    pub vmax: f64,
}

impl FilterProblem {
    pub fn cbc(vref: Twist6, halfspaces: Vec<HalfspaceConstraint>, vmax: f64) -> Self {
        Self {
            vref,
            halfspaces,
            quadratics: Vec::new(),
            vmax,
        }
    }

    pub fn prcbc(vref: Twist6, quadratics: Vec<QuadraticConstraint>, vmax: f64) -> Self {
        Self {
            vref,
            halfspaces: Vec::new(),
            quadratics,
            vmax,
        }
    }

    /// Number of certificate constraints; the norm bound has index `len()`.
    pub fn len(&self) -> usize {
        self.halfspaces.len() + self.quadratics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All constraints in `c(V) ≤ 0` form, the norm ball last.
    fn constraints(&self) -> Vec<Constraint> {
        let mut out: Vec<Constraint> = self
            .halfspaces
            .iter()
            .map(|h| Constraint::Affine {
                a: DVector::from_iterator(6, h.m.iter().map(|x| -x)),
                b: h.n,
            })
            .collect();
        out.extend(self.quadratics.iter().map(|q| Constraint::Quadratic {
            p: DMatrix::from_iterator(6, 6, q.a.iter().copied()),
            q: DVector::from_iterator(6, q.b.iter().copied()),
            r: q.c,
        }));
        out.push(Constraint::Ball {
            offset: 0,
            len: 6,
            radius: self.vmax,
        });
        out
    }

    fn validate(&self) -> Result<()> {
        if !(self.vmax > 0.0) || !self.vmax.is_finite() {
            return Err(Error::InvalidParameter("velocity bound must be positive"));
        }
        if !self.vref.is_finite() {
            return Err(Error::InvalidParameter("reference twist must be finite"));
        }
        Ok(())
    }

    /// Constraint values `c_j(V)` with the ball last.
    pub fn constraint_values(&self, v: &Twist6) -> Vec<f64> {
        let x = to_dvec(v);
        self.constraints().iter().map(|c| c.value(&x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterStatus {
    Optimal,
    FallbackHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoldReason {
    /// The admissible set is empty (phase-I certificate).
    Infeasible,
    /// The factorization failed even after regularization.
    NumericalBreakdown,
    /// Phase I or the barrier iterations ran out.
    IterationLimit,
    /// The optimal point failed post-hoc certification.
    CertificationFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSolution {
    pub v: Twist6,
    pub status: FilterStatus,
    pub kkt_residual: f64,
    /// Indices of active constraints; the norm bound is `problem.len()`.
    pub active_set: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub hold_reason: Option<HoldReason>,
    /// Set when holding still violates a certificate constraint.
    pub constraint_violated_at_hold: bool,
}

impl FilterSolution {
    fn hold(problem: &FilterProblem, reason: HoldReason) -> Self {
        let violated = problem
            .constraint_values(&Twist6::zero())
            .iter()
            .take(problem.len())
            .any(|c| *c > FEASIBILITY_TOL);
        Self {
            v: Twist6::zero(),
            status: FilterStatus::FallbackHold,
            kkt_residual: f64::NAN,
            active_set: Vec::new(),
            multipliers: Vec::new(),
            hold_reason: Some(reason),
            constraint_violated_at_hold: violated,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == FilterStatus::Optimal
    }
}

fn to_dvec(v: &Twist6) -> DVector<f64> {
    DVector::from_column_slice(v.0.as_slice())
}

fn to_twist(x: &DVector<f64>) -> Twist6 {
    Twist6(Vector6::from_column_slice(x.as_slice()))
}

/// Projection onto half-spaces ∩ ball.
pub fn solve_filter_qp(problem: &FilterProblem) -> Result<FilterSolution> {
    if !problem.quadratics.is_empty() {
        return Err(Error::InvalidParameter("QP filter takes half-space constraints only"));
    }
    solve_filter(problem)
}

/// Projection onto convex quadratics ∩ ball.
pub fn solve_filter_qcqp(problem: &FilterProblem) -> Result<FilterSolution> {
    if !problem.halfspaces.is_empty() {
        return Err(Error::InvalidParameter("QCQP filter takes quadratic constraints only"));
    }
    if problem.quadratics.iter().any(|q| q.min_eigenvalue() < -1e-10) {
        return Err(Error::InvalidParameter("quadratic constraint matrix is not PSD"));
    }
    solve_filter(problem)
}

fn solve_filter(problem: &FilterProblem) -> Result<FilterSolution> {
    problem.validate()?;
    let constraints = problem.constraints();
    let vref = to_dvec(&problem.vref);

    // Interior optimum: the reference twist is already admissible.
    if constraints.iter().all(|c| c.value(&vref) <= 0.0) {
        let solution = FilterSolution {
            v: problem.vref,
            status: FilterStatus::Optimal,
            kkt_residual: 0.0,
            active_set: active_indices(&constraints, &vref),
            multipliers: alloc::vec![0.0; constraints.len()],
            hold_reason: None,
            constraint_violated_at_hold: false,
        };
        return Ok(solution);
    }

    let params = BarrierParams::default();
    let start = if constraints.iter().all(|c| c.value(&DVector::zeros(6)) < 0.0) {
        DVector::zeros(6)
    } else {
        match phase_one(&constraints, &DVector::zeros(6), 1e-3 * problem.vmax, &params) {
            Ok(PhaseOne::Feasible(x)) => x,
            Ok(PhaseOne::Infeasible { .. }) => {
                return Ok(FilterSolution::hold(problem, HoldReason::Infeasible))
            }
            Err(Error::NumericalBreakdown(_)) => {
                return Ok(FilterSolution::hold(problem, HoldReason::NumericalBreakdown))
            }
            Err(_) => return Ok(FilterSolution::hold(problem, HoldReason::IterationLimit)),
        }
    };

    // ½‖V − V_ref‖² = ½VᵀV − V_refᵀV + const
    let program = Program {
        hessian: DMatrix::identity(6, 6),
        linear: -&vref,
        constraints,
    };
    let sol = match solve_from(&program, start, &params) {
        Ok(s) => s,
        Err(Error::NumericalBreakdown(_)) => {
            return Ok(FilterSolution::hold(problem, HoldReason::NumericalBreakdown))
        }
        Err(_) => return Ok(FilterSolution::hold(problem, HoldReason::IterationLimit)),
    };

    let mut stationarity = program.objective_gradient(&sol.x);
    for (c, l) in program.constraints.iter().zip(&sol.multipliers) {
        stationarity += c.gradient(&sol.x) * *l;
    }
    let complementarity = program
        .constraints
        .iter()
        .zip(&sol.multipliers)
        .map(|(c, l)| (l * c.value(&sol.x)).abs())
        .fold(0.0, f64::max);

    let solution = FilterSolution {
        v: to_twist(&sol.x),
        status: FilterStatus::Optimal,
        kkt_residual: stationarity.amax().max(complementarity),
        active_set: active_indices(&program.constraints, &sol.x),
        multipliers: sol.multipliers,
        hold_reason: None,
        constraint_violated_at_hold: false,
    };
    Ok(solution)
}

fn active_indices(constraints: &[Constraint], x: &DVector<f64>) -> Vec<usize> {
    constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.value(x) >= -ACTIVE_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Independent re-check of an optimal filter solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Largest `c_j(V)` (positive means violated).
    pub max_violation: f64,
    /// `‖∇f + Σλ_j∇c_j‖∞` with multipliers re-fitted by non-negative least squares.
    pub stationarity: f64,
    /// `max_j λ_j·|c_j(V)|`.
    pub complementarity: f64,
    pub multipliers: Vec<f64>,
    pub active_set: Vec<usize>,
}

pub fn certify(solution: &FilterSolution, problem: &FilterProblem) -> Result<Certificate> {
    certify_with(solution, problem, FEASIBILITY_TOL, KKT_TOL)
}

/// Recomputes slacks, fits multipliers on the active set from `V` alone, and
/// checks stationarity and complementary slackness.
pub fn certify_with(
    solution: &FilterSolution,
    problem: &FilterProblem,
    feasibility_tol: f64,
    kkt_tol: f64,
) -> Result<Certificate> {
    if solution.status != FilterStatus::Optimal {
        return Err(Error::CertificationFailed("only optimal solutions can be certified"));
    }
    let constraints = problem.constraints();
    let x = to_dvec(&solution.v);
    let values: Vec<f64> = constraints.iter().map(|c| c.value(&x)).collect();
    let max_violation = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let active: Vec<usize> = (0..constraints.len())
        .filter(|&j| values[j] >= -ACTIVE_TOL)
        .collect();
    let grad_f = &x - to_dvec(&problem.vref);
    let grads: Vec<DVector<f64>> = active.iter().map(|&j| constraints[j].gradient(&x)).collect();
    let (lambda_active, stationarity) = nnls_small(&grads, &(-&grad_f));

    let mut multipliers = alloc::vec![0.0; constraints.len()];
    for (k, &j) in active.iter().enumerate() {
        multipliers[j] = lambda_active[k];
    }
    let complementarity = active
        .iter()
        .map(|&j| (multipliers[j] * values[j]).abs())
        .fold(0.0, f64::max);

    let cert = Certificate {
        max_violation,
        stationarity,
        complementarity,
        multipliers,
        active_set: active,
    };
    if !(max_violation <= feasibility_tol) {
        return Err(Error::CertificationFailed("constraint violated"));
    }
    if !(stationarity <= kkt_tol) {
        return Err(Error::CertificationFailed("stationarity residual too large"));
    }
    if !(complementarity <= kkt_tol) {
        return Err(Error::CertificationFailed("complementary slackness violated"));
    }
    Ok(cert)
}

/// Non-negative least squares `min ‖Σ λ_k g_k − target‖` over `λ ≥ 0` by
/// enumerating supports; returns the multipliers and the ∞-norm residual.
fn nnls_small(grads: &[DVector<f64>], target: &DVector<f64>) -> (Vec<f64>, f64) {
    let k = grads.len();
    let mut best = (alloc::vec![0.0; k], target.amax());
    if k == 0 {
        return best;
    }
    for mask in 1u32..(1u32 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let g = DMatrix::from_fn(target.len(), support.len(), |r, c| grads[support[c]][r]);
        let gram = g.transpose() * &g;
        let rhs = g.transpose() * target;
        let Some(chol) = gram.cholesky() else { continue };
        let lam = chol.solve(&rhs);
        if lam.iter().any(|l| *l < 0.0) {
            continue;
        }
        let residual = (&g * &lam - target).amax();
        if residual < best.1 {
            let mut full = alloc::vec![0.0; k];
            for (c, &i) in support.iter().enumerate() {
                full[i] = lam[c];
            }
            best = (full, residual);
        }
    }
    best
}
