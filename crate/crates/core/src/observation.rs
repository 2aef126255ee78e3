use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{NormalizedPoint, ObstacleImageState};
use crate::jacobians::{
    feature_interaction, obstacle_center_interaction, obstacle_radius_interaction,
    stack_interaction, InteractionRow1x6, InteractionRow2x6, StackedInteraction,
};

/// Obstacle part of an observation, with its interaction rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleObservation {
    pub state: ObstacleImageState,
    pub center_jacobian: InteractionRow2x6,
    pub radius_jacobian: InteractionRow1x6,
}

impl ObstacleObservation {
    pub fn new(state: ObstacleImageState) -> Result<Self> {
        Ok(Self {
            center_jacobian: obstacle_center_interaction(&state.center, state.zo)?,
            radius_jacobian: obstacle_radius_interaction(&state.center, state.zo, state.radius)?,
            state,
        })
    }
}

/// Feature and obstacle image states as seen by the controller (possibly
/// noisy positions, exact depths), with interaction matrices evaluated at the
/// observed coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureObservation {
    pub features: Vec<NormalizedPoint>,
    pub depths: Vec<f64>,
    pub feature_jacobians: Vec<InteractionRow2x6>,
    pub obstacle: Option<ObstacleObservation>,
    pub timestamp: f64,
}

impl FeatureObservation {
    pub fn new(
        features: Vec<NormalizedPoint>,
        depths: Vec<f64>,
        obstacle: Option<ObstacleImageState>,
        timestamp: f64,
    ) -> Result<Self> {
        if features.len() != depths.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: depths.len(),
            });
        }
        let feature_jacobians = features
            .iter()
            .zip(&depths)
            .map(|(p, z)| feature_interaction(p, *z))
            .collect::<Result<Vec<_>>>()?;
        let obstacle = obstacle.map(ObstacleObservation::new).transpose()?;
        Ok(Self {
            features,
            depths,
            feature_jacobians,
            obstacle,
            timestamp,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn stacked_interaction(&self) -> Result<StackedInteraction> {
        let pairs: Vec<_> = self
            .features
            .iter()
            .copied()
            .zip(self.depths.iter().copied())
            .collect();
        stack_interaction(&pairs)
    }
}
