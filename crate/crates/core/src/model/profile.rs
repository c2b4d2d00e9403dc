use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Channel, CriticalPoints, PotentialModel};
use crate::error::{Error, Result};

/// Polynomial smoothstep on `[0, 1]` with `order` continuous derivatives (1..=3).
pub fn smoothstep(order: u8, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    match order {
        1 => t * t * (3.0 - 2.0 * t),
        2 => t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        _ => t.powi(4) * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t))),
    }
}

pub fn smoothstep_deriv(order: u8, t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let u = t * (1.0 - t);
    match order {
        1 => 6.0 * u,
        2 => 30.0 * u * u,
        _ => 140.0 * u * u * u,
    }
}

/// Exterior distortion `phi(R) = R (1 + mu s(R))` with `s = 0` below `s0`, `s = 1` above `s1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionProfile {
    pub s0: f64,
    pub s1: f64,
    pub smooth_order: u8,
    pub mu: C64,
}

impl DistortionProfile {
    pub fn new(s0: f64, s1: f64, smooth_order: u8, mu: C64) -> Result<Self> {
        if !(0.0 < s0 && s0 < s1) {
            return Err(Error::InvalidParameter(format!("need 0 < s0 < s1 (got {s0}, {s1})")));
        }
        if !(1..=3).contains(&smooth_order) {
            return Err(Error::InvalidParameter(format!("smooth_order {smooth_order} not in 1..=3")));
        }
        Ok(Self { s0, s1, smooth_order, mu })
    }

    pub fn with_mu(&self, mu: C64) -> Self {
        Self { mu, ..*self }
    }

    pub fn s(&self, r: f64) -> f64 {
        smoothstep(self.smooth_order, (r - self.s0) / (self.s1 - self.s0))
    }

    pub fn ds(&self, r: f64) -> f64 {
        smoothstep_deriv(self.smooth_order, (r - self.s0) / (self.s1 - self.s0)) / (self.s1 - self.s0)
    }

    /// `(phi(R), phi'(R))`.
    pub fn phi(&self, r: f64) -> (C64, C64) {
        let s = self.s(r);
        let ds = self.ds(r);
        let one = C64::new(1.0, 0.0);
        (r * (one + self.mu * s), one + self.mu * s + self.mu * (r * ds))
    }

    /// Checks the profile against the window: `s0` must lie beyond the outer
    /// turning point of `W1` at `top`.
    pub fn check_against(&self, model: &PotentialModel, cp: &CriticalPoints, top: f64) -> Result<f64> {
        let turn = outer_turning_point(model, cp, top)?;
        if !(self.s0 > turn) {
            return Err(Error::InvalidParameter(format!(
                "s0 = {} does not exceed the outer turning point {turn} of W1 at {top}",
                self.s0
            )));
        }
        Ok(turn)
    }
}

/// Outer classical turning point of `W1` at energy `e` (first crossing beyond the barrier).
pub fn outer_turning_point(model: &PotentialModel, cp: &CriticalPoints, e: f64) -> Result<f64> {
    if !(e < cp.big_m1) {
        return Err(Error::InvalidParameter(format!("energy {e} is above the barrier top")));
    }
    let mut a = cp.r1_max;
    let mut b = cp.r1_max;
    let step = 0.01 * cp.r1_max;
    while model.eval(Channel::One, b)? >= e {
        a = b;
        b += step;
        if b > 1e3 * cp.r1_max {
            return Err(Error::InvalidParameter(format!("W1 never drops below {e}")));
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if model.eval(Channel::One, m)? >= e {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Short-range regularization: `zeta W(phi) + (M/3)(1 - zeta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationProfile {
    pub zeta_lo: f64,
    pub zeta_hi: f64,
    pub m_big: f64,
}

impl RegularizationProfile {
    pub fn new(zeta_lo: f64, zeta_hi: f64, m_big: f64) -> Result<Self> {
        if !(0.0 <= zeta_lo && zeta_lo < zeta_hi) || !m_big.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= zeta_lo < zeta_hi and finite M (got {zeta_lo}, {zeta_hi}, {m_big})"
            )));
        }
        Ok(Self { zeta_lo, zeta_hi, m_big })
    }

    /// No regularization at all (zeta identically 1).
    pub fn off() -> Self {
        Self { zeta_lo: -2.0, zeta_hi: -1.0, m_big: 0.0 }
    }

    pub fn zeta(&self, r: f64) -> f64 {
        smoothstep(2, (r - self.zeta_lo) / (self.zeta_hi - self.zeta_lo))
    }
}

pub fn regularized_potential(
    model: &PotentialModel,
    ch: Channel,
    profile: &DistortionProfile,
    reg: &RegularizationProfile,
    r: f64,
) -> Result<C64> {
    let z = reg.zeta(r);
    let floor = reg.m_big / 3.0;
    if z == 0.0 {
        return Ok(C64::new(floor, 0.0));
    }
    let w = if profile.mu == C64::new(0.0, 0.0) || profile.s(r) == 0.0 {
        C64::new(model.eval(ch, r)?, 0.0)
    } else {
        model.eval_complex(ch, profile.phi(r).0)?
    };
    if z == 1.0 {
        Ok(w)
    } else {
        Ok(w * z + floor * (1.0 - z))
    }
}

/// Energy window `[m1, m2 + alpha]` with the real-part margin and imaginary cap
/// used to define the resonance region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
    pub alpha: f64,
    pub margin: f64,
    pub imag_cap: f64,
}

impl EnergyWindow {
    /// `margin = margin_factor * h`, `imag_cap = h ln(1/h) / cap_c`.
    pub fn new(cp: &CriticalPoints, alpha: f64, h: f64, margin_factor: f64, cap_c: f64) -> Result<Self> {
        let w = Self {
            lo: cp.m1,
            hi: cp.m2 + alpha,
            alpha,
            margin: margin_factor * h,
            imag_cap: h * (1.0 / h).ln() / cap_c,
        };
        if !(w.lo < w.hi && w.margin > 0.0 && w.imag_cap > 0.0) {
            return Err(Error::InvalidParameter(format!("degenerate energy window {w:?}")));
        }
        Ok(w)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_identity_and_affine_zones() {
        let p = DistortionProfile::new(3.0, 4.0, 2, C64::new(0.0, 0.3)).unwrap();
        assert_eq!(p.phi(2.5), (C64::new(2.5, 0.0), C64::new(1.0, 0.0)));
        let (z, dz) = p.phi(5.0);
        assert!((z - 5.0 * C64::new(1.0, 0.3)).norm() < 1e-15);
        assert!((dz - C64::new(1.0, 0.3)).norm() < 1e-15);
        let q = p.with_mu(C64::new(0.0, 0.0));
        assert_eq!(q.phi(3.5), (C64::new(3.5, 0.0), C64::new(1.0, 0.0)));
    }

    #[test]
    fn smoothstep_derivative_matches_difference() {
        for order in 1..=3 {
            for k in 1..100 {
                let t = k as f64 / 100.0;
                let e = 1e-6;
                let fd = (smoothstep(order, t + e) - smoothstep(order, t - e)) / (2.0 * e);
                assert!((fd - smoothstep_deriv(order, t)).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn smoothstep_monotone(order in 1u8..=3, a in -0.5f64..1.5, b in -0.5f64..1.5) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(smoothstep(order, lo) <= smoothstep(order, hi));
            prop_assert!((0.0..=1.0).contains(&smoothstep(order, a)));
        }

        #[test]
        fn zeta_in_unit_interval(r in 0.0f64..20.0) {
            let reg = RegularizationProfile::new(2.0, 3.0, 30.0).unwrap();
            let z = reg.zeta(r);
            prop_assert!((0.0..=1.0).contains(&z));
            prop_assert!(reg.zeta(r + 0.01) >= z);
        }
    }
}
