//! Primal log-barrier method for small dense convex programs
//!
//! ```text
//! minimize ½·xᵀHx + gᵀx   subject to   c_j(x) ≤ 0
//! ```
//!
//! where every `c_j` is affine, a convex quadratic, or a Euclidean ball on a
//! contiguous block of `x`. Includes a phase-I search for a strictly
//! feasible point that doubles as an infeasibility certificate.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A convex inequality `c(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `aᵀx + b ≤ 0`
    Affine { a: DVector<f64>, b: f64 },
    /// `xᵀPx + qᵀx + r ≤ 0` with `P` symmetric PSD.
    Quadratic {
        p: DMatrix<f64>,
        q: DVector<f64>,
        r: f64,
    },
    /// `‖x[offset..offset+len]‖² − radius² ≤ 0`
    Ball {
        offset: usize,
        len: usize,
        radius: f64,
    },
}

impl Constraint {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Affine { a, b } => a.dot(x) + b,
            Constraint::Quadratic { p, q, r } => x.dot(&(p * x)) + q.dot(x) + r,
            Constraint::Ball {
                offset,
                len,
                radius,
            } => x.rows(*offset, *len).norm_squared() - radius * radius,
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Constraint::Affine { a, .. } => a.clone(),
            Constraint::Quadratic { p, q, .. } => p * x * 2.0 + q,
            Constraint::Ball { offset, len, .. } => {
                let mut g = DVector::zeros(x.len());
                g.rows_mut(*offset, *len).copy_from(&(x.rows(*offset, *len) * 2.0));
                g
            }
        }
    }

    /// Adds `scale·∇²c` to `hess`.
    fn add_hessian(&self, hess: &mut DMatrix<f64>, scale: f64) {
        match self {
            Constraint::Affine { .. } => {}
            Constraint::Quadratic { p, .. } => *hess += p * (2.0 * scale),
            Constraint::Ball { offset, len, .. } => {
                for i in *offset..offset + len {
                    hess[(i, i)] += 2.0 * scale;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    pub t0: f64,
    pub mu: f64,
    pub newton_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Target for the duality-gap bound `m/t`.
    pub gap_tol: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 20.0,
            newton_tol: 1e-10,
            max_outer: 50,
            max_inner: 100,
            gap_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    /// Dual estimates `λ_j = 1 / (t·(−c_j(x)))`.
    pub multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub gap: f64,
}

/// Convex program data.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constraints: Vec<Constraint>,
}

impl Program {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn objective_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * x + &self.linear
    }

    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.constraints.iter().all(|c| c.value(x) < 0.0)
    }
}

/// Outcome of the feasibility search.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible(DVector<f64>),
    /// Certified: the smallest achievable max-violation is bounded below by `lower_bound > 0`,
    /// or the interior is empty up to numerical precision.
    Infeasible { lower_bound: f64 },
}

/// Solves the Newton system, retrying once with `1e-10·I` on factorization failure.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = hess.clone().cholesky() {
        return Ok(-chol.solve(grad));
    }
    let n = hess.nrows();
    let reg = hess + DMatrix::identity(n, n) * 1e-10 * (1.0 + hess.amax());
    reg.cholesky()
        .map(|c| -c.solve(grad))
        .ok_or(Error::NumericalBreakdown("Newton system is not positive definite"))
}

/// Minimizes `t·f(x) − Σ log(−c_j(x))` from a strictly feasible `x`.
/// `f` is given by its gradient and Hessian closures.
fn center<F, G>(
    constraints: &[Constraint],
    x: &mut DVector<f64>,
    t: f64,
    params: &BarrierParams,
    objective: F,
    obj_derivs: G,
) -> Result<()>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let merit = |x: &DVector<f64>| -> Option<f64> {
        let mut phi = t * objective(x);
        for c in constraints {
            let v = c.value(x);
            if !(v < 0.0) {
                return None;
            }
            phi -= libm::log(-v);
        }
        Some(phi)
    };

    for _ in 0..params.max_inner {
        let (g0, h0) = obj_derivs(x);
        let mut grad = g0 * t;
        let mut hess = h0 * t;
        for c in constraints {
            let v = c.value(x);
            let gc = c.gradient(x);
            let inv = -1.0 / v;
            grad += &gc * inv;
            hess += &gc * gc.transpose() * (inv * inv);
            c.add_hessian(&mut hess, inv);
        }
        let dx = newton_direction(&hess, &grad)?;
        let decrement = -grad.dot(&dx);
        if !decrement.is_finite() {
            return Err(Error::NumericalBreakdown("non-finite Newton decrement"));
        }
        if decrement * 0.5 <= params.newton_tol {
            return Ok(());
        }
        let f_x = merit(x).ok_or(Error::NumericalBreakdown("iterate left the interior"))?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &*x + &dx * step;
            if let Some(f_trial) = merit(&trial) {
                if f_trial <= f_x - 0.25 * step * decrement {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No progress is possible at working precision.
            return Ok(());
        }
    }
    Ok(())
}

/// Re-solves stationarity by least squares over the constraints the barrier
/// estimate marks as active. Near the boundary the slack `−c(x)` loses its
/// relative precision, so `1/(t·(−c))` is only accurate to a few digits.
fn refine_multipliers(program: &Program, x: &DVector<f64>, estimate: Vec<f64>) -> Vec<f64> {
    let largest = estimate.iter().copied().fold(0.0, f64::max);
    if largest <= 0.0 {
        return estimate;
    }
    let active: Vec<usize> = (0..estimate.len())
        .filter(|&j| estimate[j] > 1e-6 * largest)
        .collect();
    let n = x.len();
    let mut jac = DMatrix::zeros(n, active.len());
    for (col, &j) in active.iter().enumerate() {
        jac.set_column(col, &program.constraints[j].gradient(x));
    }
    let rhs = -program.objective_gradient(x);
    let Ok(lambda) = jac.clone().svd(true, true).solve(&rhs, 1e-12) else {
        return estimate;
    };
    if lambda.iter().any(|l| *l < 0.0) {
        return estimate;
    }
    let mut out = alloc::vec![0.0; estimate.len()];
    for (col, &j) in active.iter().enumerate() {
        out[j] = lambda[col];
    }
    // Inactive multipliers stay at their (tiny) barrier values.
    for j in 0..estimate.len() {
        if !active.contains(&j) {
            out[j] = estimate[j];
        }
    }
    out
}

/// Runs the barrier method from a strictly feasible point.
pub fn solve_from(
    program: &Program,
    x0: DVector<f64>,
    params: &BarrierParams,
) -> Result<BarrierSolution> {
    if !program.is_strictly_feasible(&x0) {
        return Err(Error::InvalidParameter("barrier start is not strictly feasible"));
    }
    let m = program.constraints.len();
    let mut x = x0;
    let mut t = params.t0;
    let obj = |x: &DVector<f64>| program.objective(x);
    let derivs = |x: &DVector<f64>| (program.objective_gradient(x), program.hessian.clone());

    if m == 0 {
        center(&program.constraints, &mut x, 1.0, params, obj, derivs)?;
        return Ok(BarrierSolution {
            x,
            multipliers: Vec::new(),
            outer_iterations: 1,
            gap: 0.0,
        });
    }

    let mut outer = 0;
    loop {
        outer += 1;
        center(&program.constraints, &mut x, t, params, obj, derivs)?;
        let gap = m as f64 / t;
        if gap <= params.gap_tol || outer >= params.max_outer {
            if gap > params.gap_tol {
                return Err(Error::SolverFailure { iterations: outer });
            }
            let barrier_estimate: Vec<f64> = program
                .constraints
                .iter()
                .map(|c| 1.0 / (t * (-c.value(&x))))
                .collect();
            let multipliers = refine_multipliers(program, &x, barrier_estimate);
            return Ok(BarrierSolution {
                x,
                multipliers,
                outer_iterations: outer,
                gap,
            });
        }
        t *= params.mu;
    }
}

/// Searches for `x` with `c_j(x) < 0` for all `j` by minimizing `s` subject
/// to `c_j(x) ≤ s`. Stops early once `s` drops below `−margin`.
pub fn phase_one(
    constraints: &[Constraint],
    x0: &DVector<f64>,
    margin: f64,
    params: &BarrierParams,
) -> Result<PhaseOne> {
    let n = x0.len();
    let m = constraints.len();
    if m == 0 {
        return Ok(PhaseOne::Feasible(x0.clone()));
    }
    // Lift each constraint to (x, s): c_j(x) − s ≤ 0.
    let lifted: Vec<Constraint> = constraints
        .iter()
        .map(|c| match c {
            Constraint::Affine { a, b } => {
                let mut a2 = DVector::zeros(n + 1);
                a2.rows_mut(0, n).copy_from(a);
                a2[n] = -1.0;
                Constraint::Affine { a: a2, b: *b }
            }
            Constraint::Quadratic { p, q, r } => {
                let mut p2 = DMatrix::zeros(n + 1, n + 1);
                p2.view_mut((0, 0), (n, n)).copy_from(p);
                let mut q2 = DVector::zeros(n + 1);
                q2.rows_mut(0, n).copy_from(q);
                q2[n] = -1.0;
                Constraint::Quadratic { p: p2, q: q2, r: *r }
            }
            Constraint::Ball {
                offset,
                len,
                radius,
            } => {
                let mut p2 = DMatrix::zeros(n + 1, n + 1);
                for i in *offset..offset + len {
                    p2[(i, i)] = 1.0;
                }
                let mut q2 = DVector::zeros(n + 1);
                q2[n] = -1.0;
                Constraint::Quadratic {
                    p: p2,
                    q: q2,
                    r: -radius * radius,
                }
            }
        })
        .collect();

    let worst = constraints
        .iter()
        .map(|c| c.value(x0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(x0);
    z[n] = worst.max(0.0) + 1.0;

    let obj = |z: &DVector<f64>| z[n];
    let derivs = |_: &DVector<f64>| {
        let mut g = DVector::zeros(n + 1);
        g[n] = 1.0;
        (g, DMatrix::zeros(n + 1, n + 1))
    };

    let mut t = params.t0;
    for _ in 0..params.max_outer {
        center(&lifted, &mut z, t, params, obj, derivs)?;
        let s = z[n];
        let x = z.rows(0, n).into_owned();
        let actual = constraints
            .iter()
            .map(|c| c.value(&x))
            .fold(f64::NEG_INFINITY, f64::max);
        if actual < -margin {
            return Ok(PhaseOne::Feasible(x));
        }
        let lower_bound = s - m as f64 / t;
        if lower_bound > 0.0 {
            return Ok(PhaseOne::Infeasible { lower_bound });
        }
        if (m as f64) / t <= params.gap_tol {
            return Ok(if actual < 0.0 {
                PhaseOne::Feasible(x)
            } else {
                PhaseOne::Infeasible { lower_bound: actual }
            });
        }
        t *= params.mu;
    }
    Err(Error::SolverFailure {
        iterations: params.max_outer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ball(n: usize, r: f64) -> Constraint {
        Constraint::Ball {
            offset: 0,
            len: n,
            radius: r,
        }
    }

    #[test]
    fn projection_onto_ball() {
        // min ½‖x − c‖² over ‖x‖ ≤ 1, c = (3, 4) → (0.6, 0.8)
        let program = Program {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::from_vec(alloc::vec![-3.0, -4.0]),
            constraints: alloc::vec![ball(2, 1.0)],
        };
        let sol = solve_from(&program, DVector::zeros(2), &BarrierParams::default()).unwrap();
        assert_relative_eq!(sol.x[0], 0.6, epsilon = 1e-10);
        assert_relative_eq!(sol.x[1], 0.8, epsilon = 1e-10);
        // λ from ∇f + λ∇c = 0: (x − c) + 2λx = 0 → λ = 2.
        assert_relative_eq!(sol.multipliers[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn halfspace_projection() {
        // min ½‖x − (−1, 0)‖², subject to −x₀ ≤ 0.
        let program = Program {
            hessian: DMatrix::identity(2, 2),
            linear: DVector::from_vec(alloc::vec![1.0, 0.0]),
            constraints: alloc::vec![
                Constraint::Affine {
                    a: DVector::from_vec(alloc::vec![-1.0, 0.0]),
                    b: 0.0
                },
                ball(2, 10.0)
            ],
        };
        let x0 = DVector::from_vec(alloc::vec![1.0, 0.0]);
        let sol = solve_from(&program, x0, &BarrierParams::default()).unwrap();
        assert!(sol.x.norm() < 1e-10);
    }

    #[test]
    fn phase_one_detects_infeasible_pair() {
        let cs = alloc::vec![
            Constraint::Affine {
                a: DVector::from_vec(alloc::vec![-1.0, 0.0]),
                b: 2.0
            },
            ball(2, 1.0),
        ];
        let res = phase_one(&cs, &DVector::zeros(2), 1e-6, &BarrierParams::default()).unwrap();
        assert!(matches!(res, PhaseOne::Infeasible { .. }));
    }

    #[test]
    fn phase_one_finds_interior_point() {
        let cs = alloc::vec![
            Constraint::Affine {
                a: DVector::from_vec(alloc::vec![-1.0, 0.0]),
                b: 0.5
            },
            ball(2, 1.0),
        ];
        match phase_one(&cs, &DVector::zeros(2), 1e-6, &BarrierParams::default()).unwrap() {
            PhaseOne::Feasible(x) => assert!(cs.iter().all(|c| c.value(&x) < 0.0)),
            other => panic!("expected a feasible point, got {other:?}"),
        }
    }

    #[test]
    fn start_must_be_interior() {
        let program = Program {
            hessian: DMatrix::identity(1, 1),
            linear: DVector::zeros(1),
            constraints: alloc::vec![ball(1, 1.0)],
        };
        assert!(solve_from(&program, DVector::from_element(1, 2.0), &BarrierParams::default()).is_err());
    }
}
