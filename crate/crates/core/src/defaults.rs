//! The shipped default parameter set. It is an engineering fixture: its only
//! credential is that it passes the well/barrier certificate and produces a few
//! dozen window levels on the standard h-ladder.

use crate::model::{AnalyticModel, MorseWell, PotentialModel, PotentialParams, StarkFieldParams};

pub const E1_INF: f64 = 0.0;
pub const DELTA: f64 = 84.94;
pub const FIELD_D: f64 = 3.067;
pub const C4: f64 = 8240.0;
pub const WELL1: MorseWell = MorseWell { depth: 0.2254, inv_width: 2.952, center: 5.603 };
pub const WELL2: MorseWell = MorseWell { depth: 148.65, inv_width: 0.2871, center: 5.803 };
pub const R_SWITCH: f64 = 2.52;

/// Window extension above `m2`.
pub const ALPHA: f64 = 0.1287;
pub const H_LADDER: [f64; 5] = [0.04, 0.03, 0.02, 0.015, 0.01];
/// Grid spacing in units of `h`.
pub const KAPPA: f64 = 0.6;
/// Fill blend length in units of `r1M`.
pub const FILL_RAMP: f64 = 0.25;
pub const COUPLING_AMPLITUDE: f64 = 1.0;
/// Real-part margin in units of `h`.
pub const MARGIN_FACTOR: f64 = 0.1;
/// `imag_cap = h ln(1/h) / CAP_C`.
pub const CAP_C: f64 = 10.0;
/// Ratio between the two distortion strengths of a stability pair.
pub const MU_PAIR_RATIO: f64 = 1.25;

pub fn default_params() -> PotentialParams {
    PotentialParams { e1_inf: E1_INF, delta: DELTA, c4: C4, well1: WELL1, well2: WELL2, r_switch: R_SWITCH }
}

/// `nu = delta / d` (the proportionality constant between `delta` and `d nu` is set to 1).
pub fn default_field() -> StarkFieldParams {
    StarkFieldParams { nu: DELTA / FIELD_D, d: FIELD_D }
}

pub fn default_model() -> PotentialModel {
    PotentialModel::Analytic(AnalyticModel::new(default_params(), default_field()).expect("default parameters are valid"))
}
