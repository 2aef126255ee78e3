//! Occlusion barrier certificates.
//!
//! `h_i = ‖s_i − s_o‖² − R_n²` is non-negative exactly when feature `i` lies
//! outside the projected obstacle disk. The noiseless certificate keeps
//! `ḣ_i + γ·h_i ≥ 0`, a half-space in the twist. Under Gaussian pixel noise
//! the probabilistic certificate replaces it with a convex quadratic in the
//! twist built from the noisy observation and the square quantile `e`.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix6, RowVector6};

use crate::error::{Error, Result};
use crate::geometry::NormalizedPoint;
use crate::ibvs::Twist6;
use crate::jacobians::{InteractionRow1x6, InteractionRow2x6};
use crate::observation::FeatureObservation;

/// `M·V ≥ n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceConstraint {
    pub m: RowVector6<f64>,
    pub n: f64,
}

impl HalfspaceConstraint {
    /// `M·V − n`; non-negative when satisfied.
    pub fn slack(&self, v: &Twist6) -> f64 {
        (self.m * v.0)[0] - self.n
    }
}

/// `VᵀAV + bV + c ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticConstraint {
    pub a: Matrix6<f64>,
    pub b: RowVector6<f64>,
    pub c: f64,
}

impl QuadraticConstraint {
    /// Left-hand side; non-positive when satisfied.
    pub fn value(&self, v: &Twist6) -> f64 {
        v.0.dot(&(self.a * v.0)) + (self.b * v.0)[0] + self.c
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.a.symmetric_eigenvalues().min()
    }
}

/// Weight of the `R_n·L_or` term in the linear PrCBC coefficient.
///
/// `On` uses the factor 4. `Derived` uses the factor 2
/// obtained from `‖x‖² ≥ ½‖x̂‖² − ‖w‖²` applied to the certificate; it is the
/// only weight of the three that is sufficient for either sign of `L_or·V`.
/// `Off` drops the term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusTerm {
    On,
    #[default]
    Derived,
    Off,
}

impl RadiusTerm {
    pub fn factor(self) -> f64 {
        match self {
            RadiusTerm::On => 4.0,
            RadiusTerm::Derived => 2.0,
            RadiusTerm::Off => 0.0,
        }
    }
}

/// Pixel-space measurement noise with the chance-constraint confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Per-feature covariance (pixels²). A single entry is shared by all features.
    pub feature_cov: Vec<Matrix2<f64>>,
    /// Covariance of the obstacle center (pixels²).
    pub obstacle_cov: Matrix2<f64>,
    /// Confidence level in `(0, 1)`.
    pub sigma: f64,
}

impl NoiseModel {
    pub fn isotropic(variance_px: f64, sigma: f64) -> Result<Self> {
        let cov = Matrix2::identity() * variance_px;
        let model = Self {
            feature_cov: alloc::vec![cov],
            obstacle_cov: cov,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParameter("confidence level must lie in (0, 1)"));
        }
        if self.feature_cov.is_empty() {
            return Err(Error::InvalidParameter("missing feature covariance"));
        }
        for c in self.feature_cov.iter().chain(core::iter::once(&self.obstacle_cov)) {
            if !is_psd2(c) {
                return Err(Error::InvalidParameter("covariance must be symmetric PSD"));
            }
        }
        Ok(())
    }

    pub fn feature_cov(&self, i: usize) -> &Matrix2<f64> {
        if self.feature_cov.len() == 1 {
            &self.feature_cov[0]
        } else {
            &self.feature_cov[i]
        }
    }

    /// Covariance of `ŝ_i − ŝ_o` in normalized coordinates: `(Σ_i + Σ_o)/f²`.
    pub fn relative_cov_normalized(&self, i: usize, f: f64) -> Matrix2<f64> {
        (self.feature_cov(i) + self.obstacle_cov) / (f * f)
    }
}

fn is_psd2(c: &Matrix2<f64>) -> bool {
    let sym = (c[(0, 1)] - c[(1, 0)]).abs() <= 1e-12 * (1.0 + c.amax());
    sym && c[(0, 0)] >= 0.0 && c[(1, 1)] >= 0.0 && c.determinant() >= -1e-12 * (1.0 + c.amax())
}

pub fn h_value(s_i: &NormalizedPoint, s_o: &NormalizedPoint, rn: f64) -> f64 {
    s_i.distance_squared(s_o) - rn * rn
}

/// Row `r` with `ḣ = r·V`: `2(s_i − s_o)ᵀ(L_si − L_o) − 2R_n·L_or`.
pub fn h_dot_row(
    s_i: &NormalizedPoint,
    s_o: &NormalizedPoint,
    l_si: &InteractionRow2x6,
    l_o: &InteractionRow2x6,
    l_or: &InteractionRow1x6,
    rn: f64,
) -> RowVector6<f64> {
    let ds = nalgebra::RowVector2::new(s_i.a - s_o.a, s_i.b - s_o.b);
    ds * (l_si - l_o) * 2.0 - l_or * (2.0 * rn)
}

/// One half-space per feature: `ḣ_i(V) ≥ −γ·h_i`.
pub fn cbc_halfspaces(obs: &FeatureObservation, gamma: f64) -> Result<Vec<HalfspaceConstraint>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive"));
    }
    let Some(o) = &obs.obstacle else {
        return Ok(Vec::new());
    };
    let rn = o.state.rn;
    let s_o = o.state.center;
    Ok(obs
        .features
        .iter()
        .zip(&obs.feature_jacobians)
        .map(|(s_i, l_si)| {
            let m = h_dot_row(s_i, &s_o, l_si, &o.center_jacobian, &o.radius_jacobian, rn);
            debug_assert!(m.iter().any(|x| *x != 0.0));
            HalfspaceConstraint {
                m,
                n: -gamma * h_value(s_i, &s_o, rn),
            }
        })
        .collect())
}

/// One convex quadratic per feature, built at the (noisy) observation:
///
/// ```text
/// A = ΔLᵀΔL/γ²,  b = −(2/γ)(ΔsᵀΔL − 4R_n·L_or),  c = 2R_n² + 4e² − ‖Δs‖²
/// ```
pub fn prcbc_quadratics(
    obs: &FeatureObservation,
    gamma: f64,
    e: f64,
    radius_term: RadiusTerm,
) -> Result<Vec<QuadraticConstraint>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive"));
    }
    if !(e >= 0.0) {
        return Err(Error::InvalidParameter("square quantile must be non-negative"));
    }
    let Some(o) = &obs.obstacle else {
        return Ok(Vec::new());
    };
    let rn = o.state.rn;
    let s_o = o.state.center;
    let k = radius_term.factor();
    Ok(obs
        .features
        .iter()
        .zip(&obs.feature_jacobians)
        .map(|(s_i, l_si)| {
            let ds = nalgebra::RowVector2::new(s_i.a - s_o.a, s_i.b - s_o.b);
            let dl = l_si - o.center_jacobian;
            let a = dl.transpose() * dl / (gamma * gamma);
            let b = (ds * dl - o.radius_jacobian * (k * rn)) * (-2.0 / gamma);
            let c = 2.0 * rn * rn + 4.0 * e * e - ds.norm_squared();
            QuadraticConstraint { a, b, c }
        })
        .collect())
}

/// Probability that a zero-mean Gaussian with diagonal standard deviations
/// `(sx, sy)` falls in the square `[−e, e]²`.
pub fn square_probability_diagonal(e: f64, sx: f64, sy: f64) -> f64 {
    axis_probability(e, sx) * axis_probability(e, sy)
}

fn axis_probability(e: f64, s: f64) -> f64 {
    if s == 0.0 {
        if e >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        libm::erf(e / (s * core::f64::consts::SQRT_2))
    }
}

/// Inverse error function on `(−1, 1)`: initial guess from Giles'
/// single-precision approximation refined by Newton steps on `erf`.
pub fn erf_inv(y: f64) -> f64 {
    if !(y > -1.0 && y < 1.0) {
        return if y == 1.0 {
            f64::INFINITY
        } else if y == -1.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        };
    }
    let w = -libm::log((1.0 - y) * (1.0 + y));
    let mut x = if w < 5.0 {
        let w = w - 2.5;
        let mut p = 2.810_226_36e-08;
        p = 3.432_739_39e-07 + p * w;
        p = -3.523_387_7e-06 + p * w;
        p = -4.391_506_54e-06 + p * w;
        p = 0.000_218_580_87 + p * w;
        p = -0.001_253_725_03 + p * w;
        p = -0.004_177_681_64 + p * w;
        p = 0.246_640_727 + p * w;
        p = 1.501_409_41 + p * w;
        p * y
    } else {
        let w = libm::sqrt(w) - 3.0;
        let mut p = -0.000_200_214_257;
        p = 0.000_100_950_558 + p * w;
        p = 0.001_349_343_22 + p * w;
        p = -0.003_673_428_44 + p * w;
        p = 0.005_739_507_73 + p * w;
        p = -0.007_622_461_3 + p * w;
        p = 0.009_438_870_47 + p * w;
        p = 1.001_674_06 + p * w;
        p = 2.832_976_82 + p * w;
        p * y
    };
    let two_over_sqrt_pi = core::f64::consts::FRAC_2_SQRT_PI;
    for _ in 0..3 {
        let err = libm::erf(x) - y;
        let deriv = two_over_sqrt_pi * libm::exp(-x * x);
        if deriv == 0.0 {
            break;
        }
        x -= err / deriv;
    }
    x
}

/// Half side `e` of the axis-aligned square holding probability `sigma` of
/// the relative noise `ŝ_i − ŝ_o ~ N(0, Σ_sum)`. Only diagonal covariances
/// are accepted; see [`sigma_to_e_general`] for correlated noise.
pub fn sigma_to_e(sigma: f64, cov: &Matrix2<f64>) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter("confidence level must lie in (0, 1)"));
    }
    if cov[(0, 1)] != 0.0 || cov[(1, 0)] != 0.0 {
        return Err(Error::UnsupportedCovariance);
    }
    let (vx, vy) = (cov[(0, 0)], cov[(1, 1)]);
    if !(vx >= 0.0 && vy >= 0.0) {
        return Err(Error::InvalidParameter("variances must be non-negative"));
    }
    let (sx, sy) = (libm::sqrt(vx), libm::sqrt(vy));
    let sqrt2 = core::f64::consts::SQRT_2;
    Ok(match (sx == 0.0, sy == 0.0) {
        (true, true) => 0.0,
        (true, false) => sy * sqrt2 * erf_inv(sigma),
        (false, true) => sx * sqrt2 * erf_inv(sigma),
        _ if sx == sy => sx * sqrt2 * erf_inv(libm::sqrt(sigma)),
        _ => bisect_increasing(|e| square_probability_diagonal(e, sx, sy), sigma, sx.max(sy)),
    })
}

/// `sigma_to_e` for an arbitrary PSD covariance, by bisection over a
/// numerically integrated square probability.
pub fn sigma_to_e_general(sigma: f64, cov: &Matrix2<f64>) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter("confidence level must lie in (0, 1)"));
    }
    if !is_psd2(cov) {
        return Err(Error::InvalidParameter("covariance must be symmetric PSD"));
    }
    if cov[(0, 1)] == 0.0 && cov[(1, 0)] == 0.0 {
        return sigma_to_e(sigma, cov);
    }
    let sx = libm::sqrt(cov[(0, 0)]);
    let sy = libm::sqrt(cov[(1, 1)]);
    let scale = sx.max(sy);
    Ok(bisect_increasing(
        |e| square_probability_correlated(e, cov),
        sigma,
        scale,
    ))
}

/// Square probability for a correlated 2-D Gaussian, integrating the
/// conditional law of `y | x` over `x ∈ [−e, e]` with Gauss–Legendre panels.
pub fn square_probability_correlated(e: f64, cov: &Matrix2<f64>) -> f64 {
    let vx = cov[(0, 0)];
    let vy = cov[(1, 1)];
    let cxy = 0.5 * (cov[(0, 1)] + cov[(1, 0)]);
    if vx == 0.0 {
        return axis_probability(e, libm::sqrt(vy)) * if e >= 0.0 { 1.0 } else { 0.0 };
    }
    let sx = libm::sqrt(vx);
    let slope = cxy / vx;
    let cond_var = (vy - cxy * cxy / vx).max(0.0);
    let sc = libm::sqrt(cond_var);
    let inner = |x: f64| -> f64 {
        let mu = slope * x;
        if sc == 0.0 {
            if mu.abs() <= e {
                1.0
            } else {
                0.0
            }
        } else {
            let k = 1.0 / (sc * core::f64::consts::SQRT_2);
            0.5 * (libm::erf((e - mu) * k) - libm::erf((-e - mu) * k))
        }
    };
    let density = |x: f64| {
        libm::exp(-0.5 * x * x / vx) / (sx * libm::sqrt(2.0 * core::f64::consts::PI))
    };
    gauss_legendre(|x| density(x) * inner(x), -e, e, 256)
}

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = a + h * (k as f64 + 0.5);
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    sum * 0.5 * h
}

/// Smallest `e ≥ 0` with `prob(e) = target` for a non-decreasing `prob`.
fn bisect_increasing<F: Fn(f64) -> f64>(prob: F, target: f64, scale: f64) -> f64 {
    let mut hi = scale.max(f64::MIN_POSITIVE);
    while prob(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if prob(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Summary of the barrier validity check across observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValidity {
    /// Smallest `‖M‖∞` seen over all features and observations.
    pub min_row_inf_norm: f64,
    pub rows_checked: usize,
}

impl BarrierValidity {
    pub fn all_nonzero(&self) -> bool {
        self.rows_checked == 0 || self.min_row_inf_norm > 0.0
    }
}

pub fn min_row_inf_norm(rows: &[HalfspaceConstraint]) -> f64 {
    rows.iter()
        .map(|h| h.m.amax())
        .fold(f64::INFINITY, f64::min)
}

/// Checks that no barrier row `M` vanishes over the given observations.
pub fn check_valid_cbf<'a, I>(observations: I) -> Result<BarrierValidity>
where
    I: IntoIterator<Item = &'a FeatureObservation>,
{
    let mut report = BarrierValidity {
        min_row_inf_norm: f64::INFINITY,
        rows_checked: 0,
    };
    for obs in observations {
        let rows = cbc_halfspaces(obs, 1.0)?;
        report.rows_checked += rows.len();
        report.min_row_inf_norm = report.min_row_inf_norm.min(min_row_inf_norm(&rows));
    }
    Ok(report)
}
