use serde::{Deserialize, Serialize};

use super::{Channel, PotentialModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritKind {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CritRoot {
    pub r: f64,
    pub value: f64,
    pub kind: CritKind,
}

/// Well and barrier data of the two channel potentials.
///
/// When the expected structure (one minimum and one maximum for channel 1, one
/// minimum for channel 2) is not found, `valid_hyp3` is false and the missing
/// energies and radii are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoints {
    pub m1: f64,
    pub m2: f64,
    #[serde(rename = "M1")]
    pub big_m1: f64,
    pub r1m: f64,
    pub r2m: f64,
    #[serde(rename = "r1M")]
    pub r1_max: f64,
    pub valid_hyp3: bool,
    pub roots1: Vec<CritRoot>,
    pub roots2: Vec<CritRoot>,
    pub bracket: (f64, f64),
}

impl CriticalPoints {
    pub fn require_hyp3(self) -> Result<Self> {
        if self.valid_hyp3 {
            Ok(self)
        } else {
            Err(Error::Hypothesis(format!(
                "channel 1 has {} critical points, channel 2 has {} (need min+max and min) or the ordering m1 < m2 < M1, r1m < r2m < r1M fails",
                self.roots1.len(),
                self.roots2.len()
            )))
        }
    }
}

const SCAN_POINTS: usize = 40_000;

fn bisect_root(model: &PotentialModel, ch: Channel, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = model.deriv(ch, a)?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= 1e-13 * mid || mid == a || mid == b {
            break;
        }
        let fm = model.deriv(ch, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

fn classify(model: &PotentialModel, ch: Channel, r: f64) -> Result<CritKind> {
    // sign of the second derivative from a centered difference of W'
    let e = 1e-5 * r;
    let d2 = model.deriv(ch, r + e)? - model.deriv(ch, r - e)?;
    Ok(if d2 > 0.0 { CritKind::Min } else { CritKind::Max })
}

fn roots(model: &PotentialModel, ch: Channel, lo: f64, hi: f64) -> Result<Vec<CritRoot>> {
    let mut out = Vec::new();
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut r0 = lo;
    let mut d0 = model.deriv(ch, r0)?;
    for k in 1..=SCAN_POINTS {
        let r1 = lo + step * k as f64;
        let d1 = model.deriv(ch, r1)?;
        if d0 != 0.0 && d1 != 0.0 && (d0 > 0.0) != (d1 > 0.0) {
            let r = bisect_root(model, ch, r0, r1)?;
            out.push(CritRoot {
                r,
                value: model.eval(ch, r)?,
                kind: classify(model, ch, r)?,
            });
        }
        r0 = r1;
        d0 = d1;
    }
    Ok(out)
}

fn default_bracket(model: &PotentialModel) -> Result<(f64, f64)> {
    match model {
        PotentialModel::Analytic(a) => {
            let d = a.field.d;
            let est = if a.params.delta > 0.0 { a.barrier_estimate() } else { 10.0 * d };
            Ok((0.1 * d, 10.0 * est))
        }
        PotentialModel::Tabulated(t) => Ok((t.r[0], 4.0 * t.r[t.r.len() - 1])),
        PotentialModel::Filled(_) | PotentialModel::Harmonic(_) => Err(Error::InvalidParameter(
            "critical points are defined for the unfilled two-channel models".into(),
        )),
    }
}

/// Scans `W_j'` for sign changes on the bracket (default `[0.1 d, 10 r1M_est]`),
/// polishes each root by bisection and classifies it.
pub fn find_critical_points(model: &PotentialModel, bracket: Option<(f64, f64)>) -> Result<CriticalPoints> {
    let (lo, hi) = match bracket {
        Some(b) => b,
        None => default_bracket(model)?,
    };
    let roots1 = roots(model, Channel::One, lo, hi)?;
    let roots2 = roots(model, Channel::Two, lo, hi)?;
    let nan = f64::NAN;
    let mut cp = CriticalPoints {
        m1: nan,
        m2: nan,
        big_m1: nan,
        r1m: nan,
        r2m: nan,
        r1_max: nan,
        valid_hyp3: false,
        roots1: roots1.clone(),
        roots2: roots2.clone(),
        bracket: (lo, hi),
    };
    if let Some(m) = roots1.iter().find(|c| c.kind == CritKind::Min) {
        cp.m1 = m.value;
        cp.r1m = m.r;
    }
    if let Some(m) = roots1.iter().find(|c| c.kind == CritKind::Max) {
        cp.big_m1 = m.value;
        cp.r1_max = m.r;
    }
    if let Some(m) = roots2.iter().find(|c| c.kind == CritKind::Min) {
        cp.m2 = m.value;
        cp.r2m = m.r;
    }
    let shape = roots1.len() == 2
        && roots1[0].kind == CritKind::Min
        && roots1[1].kind == CritKind::Max
        && roots2.len() == 1
        && roots2[0].kind == CritKind::Min;
    cp.valid_hyp3 = shape && cp.m1 < cp.m2 && cp.m2 < cp.big_m1 && cp.r1m < cp.r2m && cp.r2m < cp.r1_max;
    Ok(cp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_model;

    #[test]
    fn default_model_has_the_well_barrier_shape() {
        let m = default_model();
        let cp = find_critical_points(&m, None).unwrap();
        assert!(cp.valid_hyp3, "{cp:?}");
        assert!(cp.m1 < cp.m2 && cp.m2 < cp.big_m1);
        let a = m.as_analytic().unwrap();
        assert!((a.barrier_estimate() / cp.r1_max - 1.0).abs() < 0.1);
    }

    #[test]
    fn no_barrier_without_field() {
        let m = default_model();
        let mut a = *m.as_analytic().unwrap();
        a.params.delta = 0.0;
        let cp = find_critical_points(&PotentialModel::Analytic(a), None).unwrap();
        assert!(!cp.valid_hyp3);
        assert!(cp.roots1.iter().all(|c| c.kind == CritKind::Min));
        assert!(cp.clone().require_hyp3().is_err());
    }
}
