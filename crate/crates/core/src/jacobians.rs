//! Interaction matrices (image Jacobians) relating the camera twist to the
//! image-plane velocity of features, the obstacle center and the normalized
//! obstacle radius.

use alloc::vec::Vec;

use nalgebra::{Matrix2x6, MatrixXx6, RowVector6};

use crate::error::{Error, Result};
use crate::geometry::NormalizedPoint;

pub type InteractionRow2x6 = Matrix2x6<f64>;
pub type InteractionRow1x6 = RowVector6<f64>;

fn check_depth(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDepth { depth: z })
    }
}

/// Point-feature interaction matrix at normalized coordinates `p` and depth `z`.
pub fn feature_interaction(p: &NormalizedPoint, z: f64) -> Result<InteractionRow2x6> {
    check_depth(z)?;
    let (x, y) = (p.a, p.b);
    let iz = 1.0 / z;
    #[rustfmt::skip]
    let l = Matrix2x6::new(
        -iz, 0.0, x * iz, x * y, -(1.0 + x * x), y,
        0.0, -iz, y * iz, 1.0 + y * y, -x * y, -x,
    );
    Ok(l)
}

/// Interaction matrix of the projected obstacle center. Same form as a point
/// feature, evaluated at the obstacle depth in every depth-dependent entry.
pub fn obstacle_center_interaction(p_o: &NormalizedPoint, zo: f64) -> Result<InteractionRow2x6> {
    feature_interaction(p_o, zo)
}

/// Row mapping the twist to the rate of change of the normalized radius `R/Z_o`.
pub fn obstacle_radius_interaction(
    p_o: &NormalizedPoint,
    zo: f64,
    radius: f64,
) -> Result<InteractionRow1x6> {
    check_depth(zo)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("obstacle radius must be positive"));
    }
    Ok(RowVector6::new(
        0.0,
        0.0,
        radius / (zo * zo),
        radius * p_o.b / zo,
        -radius * p_o.a / zo,
        0.0,
    ))
}

/// Stacked `2m × 6` interaction matrix, row block `i` belonging to feature `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedInteraction(MatrixXx6<f64>);

impl StackedInteraction {
    pub fn from_blocks(blocks: &[InteractionRow2x6]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut m = MatrixXx6::zeros(2 * blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            m.fixed_rows_mut::<2>(2 * i).copy_from(b);
        }
        Ok(Self(m))
    }

    pub fn from_matrix(m: MatrixXx6<f64>) -> Result<Self> {
        if m.nrows() == 0 || !m.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: 2 * (m.nrows() / 2 + 1),
                found: m.nrows(),
            });
        }
        Ok(Self(m))
    }

    pub fn features(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn block(&self, i: usize) -> InteractionRow2x6 {
        self.0.fixed_rows::<2>(2 * i).into_owned()
    }

    pub fn matrix(&self) -> &MatrixXx6<f64> {
        &self.0
    }
}

pub fn stack_interaction(features: &[(NormalizedPoint, f64)]) -> Result<StackedInteraction> {
    let blocks = features
        .iter()
        .map(|(p, z)| feature_interaction(p, *z))
        .collect::<Result<Vec<_>>>()?;
    StackedInteraction::from_blocks(&blocks)
}
