//! Feature error and the classical gradient IBVS law `V = −α·L⁺·e`.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DVector, Matrix6, Matrix6xX, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::geometry::NormalizedPoint;
use crate::jacobians::{stack_interaction, StackedInteraction};

/// Eigenvalue floor on `LᵀL` below which the interaction matrix is treated as
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Camera twist `[v_x, v_y, v_z, ω_x, ω_y, ω_z]` in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist6(pub Vector6<f64>);

impl Twist6 {
    pub fn zero() -> Self {
        Self(Vector6::zeros())
    }

    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self(Vector6::new(
            linear.x, linear.y, linear.z, angular.x, angular.y, angular.z,
        ))
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_vector(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Radial projection onto the ball `‖V‖ ≤ vmax`.
    pub fn clipped(&self, vmax: f64) -> Self {
        let n = self.norm();
        if n > vmax {
            Self(self.0 * (vmax / n))
        } else {
            *self
        }
    }
}

impl From<Vector6<f64>> for Twist6 {
    fn from(v: Vector6<f64>) -> Self {
        Self(v)
    }
}

impl From<[f64; 6]> for Twist6 {
    fn from(v: [f64; 6]) -> Self {
        Self(Vector6::from(v))
    }
}

impl Add for Twist6 {
    type Output = Twist6;
    fn add(self, rhs: Twist6) -> Twist6 {
        Twist6(self.0 + rhs.0)
    }
}

impl Sub for Twist6 {
    type Output = Twist6;
    fn sub(self, rhs: Twist6) -> Twist6 {
        Twist6(self.0 - rhs.0)
    }
}

impl Mul<f64> for Twist6 {
    type Output = Twist6;
    fn mul(self, rhs: f64) -> Twist6 {
        Twist6(self.0 * rhs)
    }
}

impl Neg for Twist6 {
    type Output = Twist6;
    fn neg(self) -> Twist6 {
        Twist6(-self.0)
    }
}

/// Normalized feature coordinates `s` with their depths `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureState {
    points: Vec<NormalizedPoint>,
    depths: Vec<f64>,
}

impl FeatureState {
    pub fn new(points: Vec<NormalizedPoint>, depths: Vec<f64>) -> Result<Self> {
        if points.len() != depths.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: depths.len(),
            });
        }
        if let Some(&z) = depths.iter().find(|z| !(**z > 0.0)) {
            return Err(Error::NonPositiveDepth { depth: z });
        }
        Ok(Self { points, depths })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[NormalizedPoint] {
        &self.points
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    /// Stacked `[a_1, b_1, …, a_m, b_m]`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.points.len(),
            self.points.iter().flat_map(|p| [p.a, p.b]),
        )
    }

    pub fn interaction(&self) -> Result<StackedInteraction> {
        let pairs: Vec<_> = self
            .points
            .iter()
            .copied()
            .zip(self.depths.iter().copied())
            .collect();
        stack_interaction(&pairs)
    }
}

/// Stacked image error `e = s − s*`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureError(pub DVector<f64>);

impl FeatureError {
    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(2 * m))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

pub fn feature_error(s: &FeatureState, s_star: &FeatureState) -> Result<FeatureError> {
    if s.len() != s_star.len() {
        return Err(Error::DimensionMismatch {
            expected: s_star.len(),
            found: s.len(),
        });
    }
    Ok(FeatureError(s.stacked() - s_star.stacked()))
}

/// Left pseudo-inverse `(LᵀL)⁻¹Lᵀ`, solved through a Cholesky factorization
/// of the 6×6 normal matrix.
pub fn pseudo_inverse(l: &StackedInteraction) -> Result<Matrix6xX<f64>> {
    let lm = l.matrix();
    let normal: Matrix6<f64> = lm.transpose() * lm;
    let min_eig = normal.symmetric_eigenvalues().min();
    if !(min_eig > RANK_TOL) {
        return Err(Error::RankDeficient {
            min_eigenvalue: min_eig,
        });
    }
    let chol = normal
        .cholesky()
        .ok_or(Error::RankDeficient { min_eigenvalue: min_eig })?;
    Ok(chol.solve(&lm.transpose()))
}

pub fn gradient_controller(e: &FeatureError, l: &StackedInteraction, alpha: f64) -> Result<Twist6> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter("gain must be positive"));
    }
    if e.len() != l.matrix().nrows() {
        return Err(Error::DimensionMismatch {
            expected: l.matrix().nrows(),
            found: e.len(),
        });
    }
    let pinv = pseudo_inverse(l)?;
    Ok(Twist6(-(pinv * &e.0) * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::MatrixXx6;

    fn square(z: f64, off: f64) -> FeatureState {
        FeatureState::new(
            alloc::vec![
                NormalizedPoint::new(0.1 + off, 0.1),
                NormalizedPoint::new(-0.1 + off, 0.1),
                NormalizedPoint::new(-0.1 + off, -0.1),
                NormalizedPoint::new(0.1 + off, -0.1),
            ],
            alloc::vec![z; 4],
        )
        .unwrap()
    }

    #[test]
    fn error_examples() {
        let s = square(1.0, 0.0);
        assert_eq!(feature_error(&s, &s).unwrap().norm(), 0.0);
        let a = FeatureState::new(alloc::vec![NormalizedPoint::new(0.2, 0.1)], alloc::vec![1.0]).unwrap();
        let b = FeatureState::new(alloc::vec![NormalizedPoint::new(0.1, 0.1)], alloc::vec![1.0]).unwrap();
        let e = feature_error(&a, &b).unwrap();
        assert_relative_eq!(e.0[0], 0.1, epsilon = 1e-15);
        assert_eq!(e.0[1], 0.0);
        assert!(matches!(feature_error(&a, &s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn feature_state_validates() {
        assert!(FeatureState::new(alloc::vec![NormalizedPoint::default()], alloc::vec![]).is_err());
        assert!(FeatureState::new(alloc::vec![NormalizedPoint::default()], alloc::vec![0.0]).is_err());
    }

    #[test]
    fn orthonormal_columns_give_transpose() {
        let mut m = MatrixXx6::zeros(8);
        for c in 0..6 {
            m[(c, c)] = 1.0;
        }
        let l = StackedInteraction::from_matrix(m.clone()).unwrap();
        let p = pseudo_inverse(&l).unwrap();
        assert_relative_eq!(p, m.transpose(), epsilon = 1e-15);
    }

    #[test]
    fn left_inverse_identity() {
        let l = square(0.8, 0.05).interaction().unwrap();
        let p = pseudo_inverse(&l).unwrap();
        assert_relative_eq!(p.clone() * l.matrix(), Matrix6::identity(), epsilon = 1e-8);
        let lm = l.matrix();
        let residual = (lm.transpose() * lm * &p - lm.transpose()).amax();
        assert!(residual <= 1e-8);
    }

    #[test]
    fn two_features_are_rank_deficient() {
        let s = FeatureState::new(
            alloc::vec![NormalizedPoint::new(0.1, 0.0), NormalizedPoint::new(-0.1, 0.0)],
            alloc::vec![1.0, 1.0],
        )
        .unwrap();
        let l = s.interaction().unwrap();
        assert!(matches!(pseudo_inverse(&l), Err(Error::RankDeficient { .. })));
        let e = FeatureError::zeros(2);
        assert!(gradient_controller(&e, &l, 0.5).is_err());
    }

    #[test]
    fn controller_is_linear_and_zero_at_goal() {
        let l = square(1.0, 0.0).interaction().unwrap();
        let e = FeatureError::zeros(4);
        assert_eq!(gradient_controller(&e, &l, 0.5).unwrap(), Twist6::zero());

        let e = FeatureError(DVector::from_vec(alloc::vec![0.01, -0.02, 0.03, 0.0, 0.01, 0.01, -0.02, 0.005]));
        let v1 = gradient_controller(&e, &l, 0.5).unwrap();
        let v3 = gradient_controller(&FeatureError(&e.0 * 3.0), &l, 0.5).unwrap();
        assert_relative_eq!(v3.0, v1.0 * 3.0, epsilon = 1e-14);
        // ‖e‖² is non-increasing along the controller.
        let rate = 2.0 * e.0.dot(&(l.matrix() * v1.0));
        assert!(rate <= 1e-12);
    }

    #[test]
    fn twist_clipping() {
        let v = Twist6::from([3.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(v.clipped(1.0).norm(), 1.0, epsilon = 1e-15);
        assert_eq!(v.clipped(10.0), v);
    }
}
