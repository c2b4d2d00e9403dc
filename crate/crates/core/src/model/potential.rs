use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{smoothstep, Channel, CriticalPoints, TabulatedModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkFieldParams {
    pub nu: f64,
    pub d: f64,
}

impl StarkFieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0) || !(self.d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "field needs nu >= 0 and d > 0 (got nu = {}, d = {})",
                self.nu, self.d
            )));
        }
        Ok(())
    }
}

/// Regularized coaxial field `nu x / sqrt(1 + (x/d)^2)`.
pub fn chi_eval(x: f64, field: &StarkFieldParams) -> f64 {
    field.nu * x / (1.0 + (x / field.d).powi(2)).sqrt()
}

/// Truncated long-range Stark splitting `delta (1 - d^2/(2R^2) + 3d^4/(8R^4))`.
pub fn stark_splitting(r: f64, delta: f64, d: f64) -> Result<f64> {
    if !(r > d) {
        return Err(Error::Domain {
            op: "stark_splitting",
            value: r,
            reason: "the expansion needs R > d",
        });
    }
    let u = (d / r).powi(2);
    Ok(delta * (1.0 - 0.5 * u + 0.375 * u * u))
}

/// Morse core `D[(1 - exp(-a(R - center)))^2 - 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseWell {
    pub depth: f64,
    pub inv_width: f64,
    pub center: f64,
}

impl MorseWell {
    fn eval(&self, r: f64) -> f64 {
        let x = 1.0 - (-self.inv_width * (r - self.center)).exp();
        self.depth * (x * x - 1.0)
    }

    fn eval_c(&self, z: C64) -> C64 {
        let x = 1.0 - (-(z - self.center) * self.inv_width).exp();
        (x * x - 1.0) * self.depth
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    pub e1_inf: f64,
    pub delta: f64,
    pub c4: f64,
    pub well1: MorseWell,
    pub well2: MorseWell,
    pub r_switch: f64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.c4 > 0.0) {
            return bad(format!("c4 = {} must be positive", self.c4));
        }
        if !(self.delta >= 0.0) {
            return bad(format!("delta = {} must be non-negative", self.delta));
        }
        for (k, w) in [("well1", &self.well1), ("well2", &self.well2)] {
            if !(w.depth > 0.0 && w.inv_width > 0.0) {
                return bad(format!("{k}: depth and inverse width must be positive"));
            }
        }
        if !(0.0 < self.r_switch
            && self.r_switch < self.well1.center
            && self.well1.center < self.well2.center)
        {
            return bad(format!(
                "need 0 < r_switch < R1 < R2 (got {}, {}, {})",
                self.r_switch, self.well1.center, self.well2.center
            ));
        }
        Ok(())
    }
}

fn bump(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// C-infinity switch: 0 below `rsw`, 1 above `2 rsw`.
pub fn switch_sigma(r: f64, rsw: f64) -> f64 {
    let t = (r - rsw) / rsw;
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = bump(t);
        a / (a + bump(1.0 - t))
    }
}

// The switch is smooth but not analytic; off the real axis it is continued piecewise by
// the real part of its argument, which is exact wherever it is flat.
fn switch_sigma_c(z: C64, rsw: f64) -> C64 {
    let t = (z - rsw) / rsw;
    if t.re <= 0.0 {
        C64::new(0.0, 0.0)
    } else if t.re >= 1.0 {
        C64::new(1.0, 0.0)
    } else {
        let a = (-t.inv()).exp();
        let b = (-(C64::new(1.0, 0.0) - t).inv()).exp();
        a / (a + b)
    }
}

/// Morse cores plus switched Van der Waals / Stark tails.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub params: PotentialParams,
    pub field: StarkFieldParams,
}

impl AnalyticModel {
    pub fn new(params: PotentialParams, field: StarkFieldParams) -> Result<Self> {
        params.validate()?;
        field.validate()?;
        Ok(Self { params, field })
    }

    pub fn limit(&self, ch: Channel) -> f64 {
        match ch {
            Channel::One => self.params.e1_inf - self.params.delta,
            Channel::Two => self.params.e1_inf + self.params.delta,
        }
    }

    /// Long-range tail with the constant part removed.
    pub fn tail(&self, ch: Channel, r: f64) -> f64 {
        let p = &self.params;
        let d2 = self.field.d * self.field.d;
        let quartic = 0.375 * p.delta * d2 * d2;
        let r2 = r * r;
        match ch {
            Channel::One => p.delta * d2 / (2.0 * r2) - (p.c4 + quartic) / (r2 * r2),
            Channel::Two => -p.delta * d2 / (2.0 * r2) - (p.c4 - quartic) / (r2 * r2),
        }
    }

    fn tail_c(&self, ch: Channel, z: C64) -> C64 {
        let p = &self.params;
        let d2 = self.field.d * self.field.d;
        let quartic = 0.375 * p.delta * d2 * d2;
        let inv2 = (z * z).inv();
        let inv4 = inv2 * inv2;
        match ch {
            Channel::One => inv2 * (p.delta * d2 / 2.0) - inv4 * (p.c4 + quartic),
            Channel::Two => -inv2 * (p.delta * d2 / 2.0) - inv4 * (p.c4 - quartic),
        }
    }

    fn well(&self, ch: Channel) -> &MorseWell {
        match ch {
            Channel::One => &self.params.well1,
            Channel::Two => &self.params.well2,
        }
    }

    pub fn eval(&self, ch: Channel, r: f64) -> f64 {
        let core = self.limit(ch) + self.well(ch).eval(r);
        let s = switch_sigma(r, self.params.r_switch);
        if s == 0.0 {
            core
        } else {
            core + s * self.tail(ch, r)
        }
    }

    pub fn eval_c(&self, ch: Channel, z: C64) -> C64 {
        let core = self.well(ch).eval_c(z) + self.limit(ch);
        let s = switch_sigma_c(z, self.params.r_switch);
        if s == C64::new(0.0, 0.0) {
            core
        } else {
            core + s * self.tail_c(ch, z)
        }
    }

    /// Barrier location predicted by the exact long-range tail:
    /// `R^2 = 4 c4 / (delta d^2) + 3 d^2 / 2`.
    pub fn barrier_estimate(&self) -> f64 {
        let d2 = self.field.d * self.field.d;
        (4.0 * self.params.c4 / (self.params.delta * d2) + 1.5 * d2).sqrt()
    }
}

/// `W(R) = omega^2 (R - center)^2 / 4` on both channels; with `P = -h^2 d^2/dR^2 + W`
/// its levels are `h omega (k - 1/2)`, `k = 1, 2, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicWell {
    pub omega: f64,
    pub center: f64,
}

impl HarmonicWell {
    pub fn eval_c(&self, z: C64) -> C64 {
        let x = z - self.center;
        0.25 * self.omega * self.omega * x * x
    }
}

/// Channel potentials after "filling the well": unchanged up to the barrier top,
/// then blended into a constant level above `m2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilledModel {
    pub inner: Box<PotentialModel>,
    pub r_barrier: f64,
    pub ramp: f64,
    pub levels: [f64; 2],
}

impl FilledModel {
    fn blend(&self, r: f64) -> f64 {
        smoothstep(2, (r - self.r_barrier) / self.ramp)
    }

    pub fn eval(&self, ch: Channel, r: f64) -> Result<f64> {
        let b = self.blend(r);
        let c = self.levels[ch.index()];
        if b == 0.0 {
            self.inner.eval(ch, r)
        } else if b == 1.0 {
            Ok(c)
        } else {
            Ok(self.inner.eval(ch, r)? * (1.0 - b) + c * b)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialModel {
    Analytic(AnalyticModel),
    Tabulated(TabulatedModel),
    Filled(FilledModel),
    Harmonic(HarmonicWell),
}

impl PotentialModel {
    pub fn eval(&self, ch: Channel, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain {
                op: "eval_potential",
                value: r,
                reason: "R must be positive",
            });
        }
        match self {
            PotentialModel::Analytic(m) => Ok(m.eval(ch, r)),
            PotentialModel::Tabulated(t) => t.eval(ch, r),
            PotentialModel::Filled(f) => f.eval(ch, r),
            PotentialModel::Harmonic(w) => Ok(w.eval_c(C64::new(r, 0.0)).re),
        }
    }

    pub fn eval_complex(&self, ch: Channel, z: C64) -> Result<C64> {
        if !(z.re > 0.0) || !(z.im.abs() < 0.5 * z.re) {
            return Err(Error::Domain {
                op: "eval_potential_complex",
                value: z.re,
                reason: "need Re z > 0 and |Im z| < Re z / 2",
            });
        }
        match self {
            PotentialModel::Analytic(m) => Ok(m.eval_c(ch, z)),
            PotentialModel::Harmonic(w) => Ok(w.eval_c(z)),
            _ if z.im == 0.0 => Ok(C64::new(self.eval(ch, z.re)?, 0.0)),
            _ => Err(Error::Domain {
                op: "eval_potential_complex",
                value: z.im,
                reason: "only the analytic model continues off the real axis",
            }),
        }
    }

    /// dW/dR: complex step for the analytic family, spline derivative for tables.
    pub fn deriv(&self, ch: Channel, r: f64) -> Result<f64> {
        match self {
            PotentialModel::Analytic(m) => {
                let eps = 1e-20 * r.max(1.0);
                Ok(m.eval_c(ch, C64::new(r, eps)).im / eps)
            }
            PotentialModel::Tabulated(t) => t.deriv(ch, r),
            PotentialModel::Harmonic(w) => Ok(0.5 * w.omega * w.omega * (r - w.center)),
            PotentialModel::Filled(_) => {
                let e = 1e-6 * r.max(1.0);
                Ok((self.eval(ch, r + e)? - self.eval(ch, r - e)?) / (2.0 * e))
            }
        }
    }

    /// Limit of `W_j` at infinity.
    pub fn limit(&self, ch: Channel) -> f64 {
        match self {
            PotentialModel::Analytic(m) => m.limit(ch),
            PotentialModel::Tabulated(t) => t.limit(ch),
            PotentialModel::Filled(f) => f.levels[ch.index()],
            PotentialModel::Harmonic(_) => f64::INFINITY,
        }
    }

    /// Bottom of the continuum, `e1_inf - delta`.
    pub fn threshold(&self) -> f64 {
        match self {
            PotentialModel::Filled(f) => f.inner.threshold(),
            other => other.limit(Channel::One),
        }
    }

    pub fn as_analytic(&self) -> Option<&AnalyticModel> {
        match self {
            PotentialModel::Analytic(m) => Some(m),
            _ => None,
        }
    }

    /// Replace both potentials beyond `r1M` by a blend into a constant level
    /// `max(W_j(r1M), m2 + alpha + (M1 - m2)/10)`; the blend runs over
    /// `[r1M, (1 + ramp) r1M]`, `ramp <= 1`.
    pub fn fill_wells(&self, cp: &CriticalPoints, alpha: f64, ramp: f64) -> Result<PotentialModel> {
        if !cp.valid_hyp3 {
            return Err(Error::Hypothesis("cannot fill wells without a valid well/barrier structure".into()));
        }
        if !(ramp > 0.0 && ramp <= 1.0) {
            return Err(Error::InvalidParameter(format!("fill ramp {ramp} must lie in (0, 1]")));
        }
        let floor = cp.m2 + alpha + 0.1 * (cp.big_m1 - cp.m2);
        let mut levels = [0.0; 2];
        for ch in Channel::BOTH {
            levels[ch.index()] = self.eval(ch, cp.r1_max)?.max(floor);
        }
        let filled = PotentialModel::Filled(FilledModel {
            inner: Box::new(self.clone()),
            r_barrier: cp.r1_max,
            ramp: ramp * cp.r1_max,
            levels,
        });
        // dense check of the infimum condition on [r1M, 2 r1M]
        let samples = 20_000;
        for ch in Channel::BOTH {
            for k in 1..=samples {
                let r = cp.r1_max * (1.0 + k as f64 / samples as f64);
                let w = filled.eval(ch, r)?;
                if !(w > cp.m2) {
                    return Err(Error::Fill { r, value: w, m2: cp.m2 });
                }
            }
        }
        Ok(filled)
    }

    /// Smallest value of the filled potentials beyond the barrier minus `m2`.
    pub fn fill_margin(&self, cp: &CriticalPoints) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for ch in Channel::BOTH {
            for k in 1..=20_000 {
                let r = cp.r1_max * (1.0 + k as f64 / 20_000.0);
                lo = lo.min(self.eval(ch, r)?);
            }
        }
        Ok(lo - cp.m2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_model;
    use proptest::prelude::*;

    #[test]
    fn chi_is_odd_and_bounded() {
        let f = StarkFieldParams { nu: 0.7, d: 2.0 };
        assert_eq!(chi_eval(0.0, &f), 0.0);
        assert!((chi_eval(2.0, &f) - 0.7 * 2.0 / 2f64.sqrt()).abs() < 1e-15);
        let x = 20.0;
        let expansion = f.nu * f.d * (1.0 - f.d * f.d / (2.0 * x * x));
        assert!((chi_eval(x, &f) - expansion).abs() <= 0.4 * f.nu * f.d * (f.d / x).powi(4));
    }

    #[test]
    fn splitting_truncation() {
        assert_eq!(stark_splitting(5.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((stark_splitting(10.0, 1.0, 1.0).unwrap() - 0.9950375).abs() < 1e-15);
        assert!(stark_splitting(1.0, 1.0, 1.0).is_err());
        assert!((stark_splitting(1e8, 2.5, 1.0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn morse_minimum_without_tails() {
        let m = default_model();
        let mut p = *m.as_analytic().unwrap();
        p.params.r_switch = p.params.well1.center * 0.99;
        let r = p.params.well1.center;
        // sigma vanishes below r_switch only, so check the core directly
        let core = p.limit(Channel::One) + p.params.well1.eval(r);
        assert_eq!(core, p.params.e1_inf - p.params.delta - p.params.well1.depth);
    }

    #[test]
    fn degenerate_levels_without_field() {
        let m = default_model();
        let mut a = *m.as_analytic().unwrap();
        a.params.delta = 0.0;
        let gap = a.eval(Channel::Two, 400.0) - a.eval(Channel::One, 400.0);
        assert!(gap.abs() < 1e-6);
    }

    #[test]
    fn complex_restriction_matches_real() {
        let m = default_model();
        for k in 1..200 {
            let r = 0.3 + 0.1 * k as f64;
            for ch in Channel::BOTH {
                let w = m.eval(ch, r).unwrap();
                let z = m.eval_complex(ch, C64::new(r, 0.0)).unwrap();
                assert!((z.re - w).abs() <= 1e-13 * w.abs().max(1.0), "R = {r}");
                assert_eq!(z.im, 0.0);
            }
        }
    }

    #[test]
    fn tabulated_rejects_complex() {
        let m = default_model();
        let t = TabulatedModel::sample(&m, 0.5, 30.0, 200).unwrap();
        let pm = PotentialModel::Tabulated(t);
        assert!(pm.eval_complex(Channel::One, C64::new(6.0, 0.1)).is_err());
        assert!(pm.eval_complex(Channel::One, C64::new(6.0, 0.0)).is_ok());
    }

    #[test]
    fn sector_is_enforced() {
        let m = default_model();
        assert!(m.eval_complex(Channel::One, C64::new(1.0, 0.6)).is_err());
        assert!(m.eval(Channel::One, 0.0).is_err());
        assert!(m.eval(Channel::Two, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn reflection_symmetry(re in 0.5f64..40.0, frac in -0.45f64..0.45) {
            let m = default_model();
            let z = C64::new(re, frac * re);
            for ch in Channel::BOTH {
                let a = m.eval_complex(ch, z).unwrap();
                let b = m.eval_complex(ch, z.conj()).unwrap();
                prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
            }
        }

        #[test]
        fn switch_is_a_partition(r in 0.01f64..20.0, rsw in 0.1f64..5.0) {
            let s = switch_sigma(r, rsw);
            prop_assert!((0.0..=1.0).contains(&s));
            let s2 = switch_sigma(r * 1.01, rsw);
            prop_assert!(s2 >= s);
        }
    }
}
