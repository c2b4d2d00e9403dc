//! Resolution of a model plus layout options into per-h operator families: the
//! undistorted and filled channel operators, the Dirichlet comparison operator on
//! `[0, r1M]`, and the exterior-scaled two-channel operator.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::discretize::{
    assemble_coupling, assemble_dirichlet, assemble_distorted, ChannelBlockOperator, CouplingSpec, DiscreteOperator, Grid,
};
use crate::error::{Error, Result};
use crate::model::{
    find_critical_points, outer_turning_point, regularized_potential, Channel, CriticalPoints, DistortionProfile,
    EnergyWindow, PotentialModel, RegularizationProfile, SemiclassicalParams,
};

/// How the distortion parameter follows `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuRule {
    /// `mu = 2 i h ln(1/h)`.
    Semiclassical,
    Explicit { re: f64, im: f64 },
}

impl MuRule {
    pub fn mu(&self, h: f64) -> Result<C64> {
        Ok(match *self {
            MuRule::Semiclassical => C64::new(0.0, SemiclassicalParams::new(h)?.distortion_theta()),
            MuRule::Explicit { re, im } => C64::new(re, im),
        })
    }
}

/// Layout knobs; `None` fields are derived from the critical points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemOptions {
    pub alpha: f64,
    pub kappa: f64,
    pub fill_ramp: f64,
    pub smooth_order: u8,
    pub s0: Option<f64>,
    pub s1: Option<f64>,
    pub r_max: Option<f64>,
    pub regularization: Option<RegularizationProfile>,
    pub coupling: Option<CouplingSpec>,
    pub margin_factor: f64,
    pub cap_c: f64,
    pub mu_rule: MuRule,
    pub mu_pair_ratio: f64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self {
            alpha: defaults::ALPHA,
            kappa: defaults::KAPPA,
            fill_ramp: defaults::FILL_RAMP,
            smooth_order: 2,
            s0: None,
            s1: None,
            r_max: None,
            regularization: None,
            coupling: None,
            margin_factor: defaults::MARGIN_FACTOR,
            cap_c: defaults::CAP_C,
            mu_rule: MuRule::Semiclassical,
            mu_pair_ratio: defaults::MU_PAIR_RATIO,
        }
    }
}

/// Every derived length and level, as used by all downstream solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub critical: CriticalPoints,
    pub threshold: f64,
    pub alpha: f64,
    /// `m2 + alpha`.
    pub top: f64,
    pub turning_point: f64,
    pub s0: f64,
    pub s1: f64,
    pub smooth_order: u8,
    pub r_max: f64,
    pub kappa: f64,
    pub regularization: RegularizationProfile,
    pub coupling: CouplingSpec,
    pub fill_ramp: f64,
    pub fill_levels: [f64; 2],
    pub fill_margin: f64,
    pub margin_factor: f64,
    pub cap_c: f64,
    pub mu_rule: MuRule,
    pub mu_pair_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub model: PotentialModel,
    pub filled: PotentialModel,
    pub layout: Layout,
}

/// Left-wall radius where `W1` falls to `level`.
fn wall_crossing(model: &PotentialModel, cp: &CriticalPoints, level: f64) -> Result<f64> {
    let (mut a, mut b) = (cp.bracket.0.min(0.5 * cp.r1m), cp.r1m);
    if model.eval(Channel::One, a)? <= level {
        return Err(Error::InvalidParameter(format!("W1 is below {level} already at R = {a}")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if model.eval(Channel::One, m)? > level {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

impl Problem {
    pub fn new(model: PotentialModel, opts: &ProblemOptions) -> Result<Self> {
        if !(opts.alpha > 0.0 && opts.kappa > 0.0 && opts.mu_pair_ratio > 0.0) {
            return Err(Error::InvalidParameter("alpha, kappa and the mu pair ratio must be positive".into()));
        }
        let cp = find_critical_points(&model, None)?.require_hyp3()?;
        let top = cp.m2 + opts.alpha;
        if !(top < cp.big_m1) {
            return Err(Error::InvalidParameter(format!("window top {top} reaches the barrier top {}", cp.big_m1)));
        }
        let turning_point = outer_turning_point(&model, &cp, top)?;
        let s0 = opts.s0.unwrap_or(1.1 * turning_point);
        let s1 = opts.s1.unwrap_or(s0 + 1.0);
        let r_max = opts.r_max.unwrap_or(s1 + 3.0);
        if !(r_max > s1) {
            return Err(Error::InvalidParameter(format!("r_max = {r_max} must exceed s1 = {s1}")));
        }
        let regularization = match opts.regularization {
            Some(r) => r,
            None => {
                let level = top + 20.0;
                let hi = wall_crossing(&model, &cp, level)?;
                RegularizationProfile::new((hi - 0.5).max(0.0), hi, 3.0 * level)?
            }
        };
        if !(regularization.m_big / 3.0 > top) {
            return Err(Error::InvalidParameter(format!(
                "regularization level M/3 = {} must exceed m2 + alpha = {top}",
                regularization.m_big / 3.0
            )));
        }
        let coupling = opts.coupling.unwrap_or(CouplingSpec::Gaussian {
            amplitude: defaults::COUPLING_AMPLITUDE,
            center: 0.5 * (cp.r2m + cp.r1_max),
            width: 0.25 * (cp.r1_max - cp.r2m),
        });
        let filled = model.fill_wells(&cp, opts.alpha, opts.fill_ramp)?;
        let fill_levels = match &filled {
            PotentialModel::Filled(f) => f.levels,
            _ => unreachable!(),
        };
        let fill_margin = filled.fill_margin(&cp)?;
        let layout = Layout {
            threshold: model.threshold(),
            alpha: opts.alpha,
            top,
            turning_point,
            s0,
            s1,
            smooth_order: opts.smooth_order,
            r_max,
            kappa: opts.kappa,
            regularization,
            coupling,
            fill_ramp: opts.fill_ramp,
            fill_levels,
            fill_margin,
            margin_factor: opts.margin_factor,
            cap_c: opts.cap_c,
            mu_rule: opts.mu_rule,
            mu_pair_ratio: opts.mu_pair_ratio,
            critical: cp,
        };
        DistortionProfile::new(s0, s1, opts.smooth_order, C64::new(0.0, 0.0))?.check_against(
            &model,
            &layout.critical,
            top,
        )?;
        Ok(Self { model, filled, layout })
    }

    pub fn default_problem() -> Result<Self> {
        Self::new(defaults::default_model(), &ProblemOptions::default())
    }

    pub fn level(&self, h: f64) -> Result<Level<'_>> {
        let sp = SemiclassicalParams::new(h)?;
        let l = &self.layout;
        let grid = Grid::for_h(l.r_max, sp.h, l.kappa)?;
        let mu = l.mu_rule.mu(h)?;
        let profile = DistortionProfile::new(l.s0, l.s1, l.smooth_order, mu)?;
        let window = EnergyWindow::new(&l.critical, l.alpha, h, l.margin_factor, l.cap_c)?;
        let n_cut = grid.count_below(l.critical.r1_max);
        Ok(Level { problem: self, h, grid, profile, window, n_cut })
    }
}

/// One rung of the h-ladder.
#[derive(Clone, Debug)]
pub struct Level<'a> {
    pub problem: &'a Problem,
    pub h: f64,
    pub grid: Grid,
    /// Profile at the level's own `mu`.
    pub profile: DistortionProfile,
    pub window: EnergyWindow,
    /// Nodes strictly inside `(0, r1M)`.
    pub n_cut: usize,
}

impl Level<'_> {
    pub fn layout(&self) -> &Layout {
        &self.problem.layout
    }

    /// The same level on a grid with `factor` times as many intervals; its nodes
    /// contain the current ones.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refinement factor must be positive".into()));
        }
        let grid = Grid::new(self.grid.r_max, (self.grid.n + 1) * factor - 1)?;
        let n_cut = grid.count_below(self.layout().critical.r1_max);
        Ok(Self { grid, n_cut, ..self.clone() })
    }

    pub fn mu(&self) -> C64 {
        self.profile.mu
    }

    pub fn mu_pair(&self) -> [C64; 2] {
        [self.profile.mu, self.profile.mu * self.layout().mu_pair_ratio]
    }

    fn source(&self, filled: bool) -> &PotentialModel {
        if filled {
            &self.problem.filled
        } else {
            &self.problem.model
        }
    }

    /// Real regularized potential at a node (`mu = 0`).
    pub fn potential(&self, ch: Channel, filled: bool, r: f64) -> Result<f64> {
        let p0 = self.profile.with_mu(C64::new(0.0, 0.0));
        Ok(regularized_potential(self.source(filled), ch, &p0, &self.layout().regularization, r)?.re)
    }

    /// Undistorted channel operator; `cut` restricts to `(0, r1M)` with a Dirichlet zero there.
    pub fn channel(&self, ch: Channel, filled: bool, cut: bool) -> Result<DiscreteOperator> {
        let r_cut = cut.then_some(self.layout().critical.r1_max);
        let mut op = assemble_dirichlet(&|r| self.potential(ch, filled, r), self.h, &self.grid, r_cut)?;
        op.label = format!("P{}{}{}", ch.index() + 1, if filled { "~" } else { "" }, if cut { "_D" } else { "" });
        Ok(op)
    }

    pub fn a0(&self) -> impl Fn(f64) -> f64 + '_ {
        move |r| self.layout().coupling.eval(r)
    }

    /// `A0` on the first `n` nodes.
    pub fn coupling(&self, n: usize) -> DiscreteOperator {
        assemble_coupling(&self.a0(), self.h, &self.grid, n)
    }

    /// Two-channel operator at `mu = 0`: filled wells on the whole grid, or the
    /// Dirichlet comparison operator on `(0, r1M)`.
    pub fn two_channel(&self, filled: bool, cut: bool) -> Result<ChannelBlockOperator> {
        let p1 = self.channel(Channel::One, filled, cut)?;
        let p2 = self.channel(Channel::Two, filled, cut)?;
        let a = self.coupling(p1.dim);
        ChannelBlockOperator::new(p1, p2, &a, self.h)
    }

    /// Exterior-scaled two-channel operator at the given `mu` (unfilled, whole grid).
    pub fn distorted(&self, mu: C64) -> Result<ChannelBlockOperator> {
        let prof = self.profile.with_mu(mu);
        let reg = &self.layout().regularization;
        let p1 = assemble_distorted(&self.problem.model, Channel::One, self.h, &self.grid, &prof, reg)?;
        let p2 = assemble_distorted(&self.problem.model, Channel::Two, self.h, &self.grid, &prof, reg)?;
        let a = self.coupling(self.grid.n);
        ChannelBlockOperator::new(p1, p2, &a, self.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_consistent() {
        let p = Problem::default_problem().unwrap();
        let l = &p.layout;
        assert!(l.s0 > l.turning_point && l.s1 > l.s0 && l.r_max > l.s1);
        assert!(l.regularization.zeta_hi < l.critical.r1m);
        assert!(l.fill_margin > 0.0);
        let lv = p.level(0.04).unwrap();
        assert!(lv.n_cut < lv.grid.n);
        assert!((lv.grid.spacing / (0.6 * 0.04) - 1.0).abs() < 0.05);
    }

    #[test]
    fn mu_rule_arithmetic() {
        let mu = MuRule::Semiclassical.mu(0.01).unwrap();
        assert_eq!(mu.re, 0.0);
        assert!((mu.im - 0.0921034).abs() < 1e-7);
    }
}
