//! Per-h spectral scan of the window: the Dirichlet comparison spectrum, the filled
//! spectrum, and the filtered resonances of the scaled operator at a pair of
//! distortion strengths.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::{pair_spectra, resonance_filter, stability_split, PairingReport, Resonance};
use crate::discretize::{DiscreteOperator, Symmetry};
use crate::eigensolve::{eig_complex_dense, BlockTridiag2, SpectrumResult};
use crate::error::{Error, Result};
use crate::model::EnergyWindow;
use crate::setup::{Level, Problem};

/// Midpoint of the spectral gap of `bt` that contains `x`.
pub fn snap_to_gap(bt: &BlockTridiag2, x: f64, reach: f64) -> Result<f64> {
    let (vals, _) = bt.eigenvalues_in(x - reach, x + reach);
    let below = vals.iter().copied().filter(|&v| v < x).fold(f64::NEG_INFINITY, f64::max);
    let above = vals.iter().copied().filter(|&v| v >= x).fold(f64::INFINITY, f64::min);
    if !(below.is_finite() && above.is_finite()) {
        return Err(Error::InvalidParameter(format!("no eigenvalue on both sides of {x} within {reach}")));
    }
    Ok(0.5 * (below + above))
}

/// How far from the raw window top to look for the neighbouring levels, in units of `h`.
const SNAP_REACH: f64 = 40.0;
/// Distance cap for pairings, in units of `h`.
pub const PAIR_CAP: f64 = 10.0;
/// mu-stability tolerance relative to the window width.
pub const STABILITY_REL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelScan {
    pub h: f64,
    pub n: usize,
    pub n_cut: usize,
    pub mu: [C64; 2],
    /// Window whose top was moved to the middle of the Dirichlet gap containing `m2 + alpha`.
    pub window: EnergyWindow,
    pub window_top_raw: f64,
    pub dirichlet: Vec<f64>,
    pub filled: Vec<f64>,
    pub filled_vs_dirichlet: PairingReport,
    pub resonances: Option<Vec<Resonance>>,
    pub resonance_vs_dirichlet: Option<PairingReport>,
    #[serde(skip)]
    pub spectra: Option<[SpectrumResult; 2]>,
}

impl LevelScan {
    pub fn max_resonance_residual(&self) -> f64 {
        self.resonances.iter().flatten().filter_map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Complex spectrum of the scaled two-channel operator at `mu`, with eigenvectors
/// certified inside the (real-part widened) window strip.
pub fn distorted_spectrum(level: &Level<'_>, mu: C64, window: &EnergyWindow) -> Result<SpectrumResult> {
    let op = level.distorted(mu)?;
    let band = DiscreteOperator::banded(op.interleaved(), Symmetry::General, format!("P#_mu h={}", level.h));
    let w = *window;
    eig_complex_dense(&band, &move |z: C64| {
        z.re >= w.lo - w.margin && z.re <= w.hi + w.margin && z.im.abs() <= w.imag_cap
    })
}

pub fn scan_level(problem: &Problem, h: f64, with_resonances: bool) -> Result<LevelScan> {
    scan_on(&problem.level(h)?, with_resonances)
}

/// Same as [`scan_level`] on an explicitly constructed level (for instance a refined grid).
pub fn scan_on(lv: &Level<'_>, with_resonances: bool) -> Result<LevelScan> {
    let (problem, h) = (lv.problem, lv.h);
    let bt_d = BlockTridiag2::from_operator(&lv.two_channel(false, true)?)?;
    let top = snap_to_gap(&bt_d, lv.window.hi, SNAP_REACH * h)?;
    let window = EnergyWindow { hi: top, ..lv.window };
    let (dirichlet, _) = bt_d.eigenvalues_in(window.lo, window.hi);
    let bt_f = BlockTridiag2::from_operator(&lv.two_channel(true, false)?)?;
    let (filled, _) = bt_f.eigenvalues_in(window.lo, window.hi);
    let cap = PAIR_CAP * h;
    let filled_vs_dirichlet = pair_spectra(&filled, &dirichlet, cap)?;
    let mu = lv.mu_pair();
    let (mut resonances, mut resonance_vs_dirichlet, mut spectra) = (None, None, None);
    if with_resonances {
        let s0 = distorted_spectrum(lv, mu[0], &window)?;
        let s1 = distorted_spectrum(lv, mu[1], &window)?;
        let thr = problem.layout.threshold;
        let split = stability_split(&s0.values, &s1.values, thr, mu[0], STABILITY_REL * window.width());
        let res = resonance_filter(&s0.values, &s0.residuals, &split, &window, thr, mu[0]);
        let re: Vec<f64> = res.iter().map(|r| r.re).collect();
        resonance_vs_dirichlet = Some(pair_spectra(&re, &dirichlet, cap)?);
        resonances = Some(res);
        spectra = Some([s0, s1]);
    }
    Ok(LevelScan {
        h,
        n: lv.grid.n,
        n_cut: lv.n_cut,
        mu,
        window,
        window_top_raw: lv.window.hi,
        dirichlet,
        filled,
        filled_vs_dirichlet,
        resonances,
        resonance_vs_dirichlet,
        spectra,
    })
}
