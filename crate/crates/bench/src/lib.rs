//! Shared fixtures for the benchmarks.

use bsr_core::discretize::{assemble_distorted, DiscreteOperator, Grid, Symmetry};
use bsr_core::model::{Channel, DistortionProfile, HarmonicWell, PotentialModel, RegularizationProfile};
use bsr_core::setup::Problem;
use num_complex::Complex64 as C64;

pub fn default_problem() -> Problem {
    Problem::default_problem().expect("default model passes its certificate")
}

/// Scaled harmonic well on a grid of `n` nodes, as a general banded operator.
pub fn scaled_harmonic(n: usize) -> DiscreteOperator {
    let model = PotentialModel::Harmonic(HarmonicWell { omega: 2.0, center: 2.5 });
    let grid = Grid::new(8.0, n).expect("grid");
    let prof = DistortionProfile::new(5.0, 6.0, 2, C64::new(0.0, 0.2)).expect("profile");
    let op = assemble_distorted(&model, Channel::One, 0.04, &grid, &prof, &RegularizationProfile::off()).expect("assembly");
    DiscreteOperator::banded(op.as_band().expect("banded").clone(), Symmetry::General, "harmonic")
}

/// Deterministic, roughly evenly spaced levels with a small perturbation.
pub fn ladder(n: usize, spacing: f64, jitter: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * spacing + jitter * ((k * 7919) % 13) as f64 / 13.0).collect()
}
