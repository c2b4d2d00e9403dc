//! Effective nuclear potentials for the two electronic channels, the regularized
//! Stark field, the exterior distortion, and the short-range regularization.

mod critical;
mod potential;
mod profile;
mod table;

pub use critical::{find_critical_points, CritKind, CritRoot, CriticalPoints};
pub use potential::{
    chi_eval, stark_splitting, switch_sigma, AnalyticModel, FilledModel, HarmonicWell, MorseWell,
    PotentialModel, PotentialParams, StarkFieldParams,
};
pub use profile::{
    outer_turning_point, regularized_potential, smoothstep, smoothstep_deriv, DistortionProfile, EnergyWindow,
    RegularizationProfile,
};
pub use table::{TabulatedModel, TailParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Electronic channel index: 1 is the lower (attractive, barrier-carrying) level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    One,
    Two,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::One, Channel::Two];

    pub fn index(self) -> usize {
        match self {
            Channel::One => 0,
            Channel::Two => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalParams {
    pub h: f64,
}

impl SemiclassicalParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::InvalidParameter(format!("h = {h} must lie in (0, 0.5]")));
        }
        Ok(Self { h })
    }

    /// The distortion strength 2h ln(1/h) used for `mu = i * theta`.
    pub fn distortion_theta(self) -> f64 {
        2.0 * self.h * (1.0 / self.h).ln()
    }
}
