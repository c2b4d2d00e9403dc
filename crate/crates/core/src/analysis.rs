//! Spectrum comparison and scaling fits: optimal pairings, convergence orders,
//! gap statistics, resonance filtering and width bounds.

use num_complex::Complex64 as C64;
use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::model::EnergyWindow;

/// One matched pair; indices refer to the inputs of [`pair_spectra`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub left: usize,
    pub right: usize,
    pub left_value: f64,
    pub right_value: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairs: Vec<Pair>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    pub cap: f64,
}

impl PairingReport {
    pub fn max_distance(&self) -> f64 {
        self.pairs.iter().fold(0.0, |a, p| a.max(p.distance))
    }

    pub fn is_bijection(&self) -> bool {
        self.unmatched_left.is_empty() && self.unmatched_right.is_empty()
    }

    /// CSV rows `left,right,distance`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("left,right,distance\n");
        for p in &self.pairs {
            s.push_str(&format!("{:.17e},{:.17e},{:.6e}\n", p.left_value, p.right_value, p.distance));
        }
        s
    }
}

/// Minimum-total-distance matching between two real spectra. Pairs further apart
/// than `cap` are never formed; whatever cannot be matched is listed as unmatched.
pub fn pair_spectra(left: &[f64], right: &[f64], cap: f64) -> Result<PairingReport> {
    if !(cap > 0.0) || left.iter().chain(right).any(|v| !v.is_finite()) {
        return Err(precondition("pair_spectra", "cap must be positive and all values finite"));
    }
    let swap = left.len() > right.len();
    let (rows, cols) = if swap { (right, left) } else { (left, right) };
    let mut assignment = Vec::new();
    if !rows.is_empty() {
        // integer costs: distances in units of cap / 1e9, forbidden entries priced above any
        // feasible total so that the number of capped pairs is minimized first
        let scale = 1e9 / cap;
        let forbidden = (scale * cap).round() as i64 * (rows.len() as i64 + 1);
        let weights = Matrix::from_fn(rows.len(), cols.len(), |(i, j)| {
            let d = (rows[i] - cols[j]).abs();
            if d <= cap {
                (d * scale).round() as i64
            } else {
                forbidden
            }
        });
        assignment = kuhn_munkres_min(&weights).1;
    }
    let mut pairs = Vec::new();
    let mut used_rows = vec![false; rows.len()];
    let mut used_cols = vec![false; cols.len()];
    for (i, &j) in assignment.iter().enumerate() {
        let d = (rows[i] - cols[j]).abs();
        if d > cap {
            continue;
        }
        used_rows[i] = true;
        used_cols[j] = true;
        let (l, r) = if swap { (j, i) } else { (i, j) };
        pairs.push(Pair { left: l, right: r, left_value: left[l], right_value: right[r], distance: d });
    }
    pairs.sort_by(|a, b| a.left_value.total_cmp(&b.left_value));
    let free = |used: &[bool]| used.iter().enumerate().filter(|(_, u)| !**u).map(|(k, _)| k).collect::<Vec<_>>();
    let (unmatched_left, unmatched_right) =
        if swap { (free(&used_cols), free(&used_rows)) } else { (free(&used_rows), free(&used_cols)) };
    Ok(PairingReport { pairs, unmatched_left, unmatched_right, cap })
}

/// Least-squares line `y = slope * x + intercept` with its rms residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub points: usize,
}

pub fn fit_line(xy: &[(f64, f64)]) -> Result<LineFit> {
    if xy.len() < 2 {
        return Err(precondition("fit_line", format!("need at least 2 points, got {}", xy.len())));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(precondition("fit_line", "all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xy.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(LineFit { slope, intercept, rms_residual: rms, points: xy.len() })
}

/// Power-law and exponential fits of an error sequence `err(h)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    /// `ln err = p ln h + ln C`.
    pub power: Option<LineFit>,
    /// `ln err = -s / h + ln C`, reported with `slope = -s` on the `(1/h, ln err)` plane.
    pub exponential: Option<LineFit>,
    /// `h` values whose error was at or below the floor and were left out.
    pub floored: Vec<f64>,
    pub floor: f64,
}

impl OrderFit {
    pub fn order(&self) -> f64 {
        self.power.map_or(f64::NAN, |f| f.slope)
    }

    /// True when the exponential law fits at least as well as the power law.
    pub fn exponential_preferred(&self) -> bool {
        match (self.power, self.exponential) {
            (Some(p), Some(e)) => e.rms_residual <= p.rms_residual,
            _ => false,
        }
    }
}

/// Fits both laws to the points whose error is above `floor`. At least `min_points`
/// must survive the floor.
pub fn fit_order(points: &[(f64, f64)], floor: f64, min_points: usize) -> Result<OrderFit> {
    let kept: Vec<(f64, f64)> = points.iter().copied().filter(|&(h, e)| h > 0.0 && e > floor).collect();
    let floored = points.iter().filter(|&&(_, e)| e <= floor).map(|p| p.0).collect();
    if kept.len() < min_points.max(2) {
        return Err(precondition(
            "fit_order",
            format!("{} of {} points above the floor {floor:e}, need {}", kept.len(), points.len(), min_points.max(2)),
        ));
    }
    let power = fit_line(&kept.iter().map(|&(h, e)| (h.ln(), e.ln())).collect::<Vec<_>>()).ok();
    let exponential = fit_line(&kept.iter().map(|&(h, e)| (1.0 / h, e.ln())).collect::<Vec<_>>()).ok();
    Ok(OrderFit { power, exponential, floored, floor })
}

/// Gap statistics of a sorted real spectrum, in units of `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapLaw {
    pub h: f64,
    pub count: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub mean_gap: f64,
}

pub fn gap_law(values: &[f64], h: f64) -> Result<GapLaw> {
    if values.len() < 2 {
        return Err(precondition("gap_law", "need at least two levels"));
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let c_min = gaps.iter().copied().fold(f64::INFINITY, f64::min) / h;
    let c_max = gaps.iter().copied().fold(0.0, f64::max) / h;
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(GapLaw { h, count: values.len(), c_min, c_max, mean_gap })
}

/// Coordinates of `z` relative to the rotated continuum ray `thr + t (1 + mu)^{-2}`,
/// `t >= 0`: the position along the ray and the signed offset across it (positive on
/// the side of the real axis).
pub fn ray_coordinates(z: C64, threshold: f64, mu: C64) -> (f64, f64) {
    let dir = (C64::new(1.0, 0.0) + mu).powi(-2);
    let u = dir / dir.norm();
    let w = (z - threshold) * u.conj();
    (w.re, w.im)
}

pub fn ray_distance(z: C64, threshold: f64, mu: C64) -> f64 {
    let (along, across) = ray_coordinates(z, threshold, mu);
    if along >= 0.0 {
        across.abs()
    } else {
        (z - threshold).norm()
    }
}

/// Median gap among the `2 * half + 1` entries of the sorted list `along` nearest to
/// position `x`.
pub fn local_spacing_at(along: &[f64], x: f64, half: usize) -> f64 {
    let n = along.len();
    if n < 2 {
        return f64::NAN;
    }
    let width = (2 * half + 1).min(n);
    let pos = along.partition_point(|&a| a < x);
    let lo = pos.saturating_sub(half + 1).min(n - width);
    let mut gaps: Vec<f64> = along[lo..lo + width].windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    gaps[gaps.len() / 2]
}

/// Neighbourhood half-width used for local spacings.
pub const SPACING_HALF: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub re: f64,
    pub im: f64,
    pub ray_distance: f64,
    pub local_spacing: f64,
    /// Distance to the nearest eigenvalue of the companion solve.
    pub mu_shift: f64,
    pub residual: Option<f64>,
}

impl Resonance {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Splits a scaled spectrum into mu-stable eigenvalues and the moving remainder, which
/// is taken as the discretized continuum.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySplit {
    /// Distance of each eigenvalue to the nearest companion eigenvalue.
    pub shifts: Vec<f64>,
    pub stable: Vec<bool>,
    /// Sorted along-ray coordinates of the continuum eigenvalues.
    pub continuum_along: Vec<f64>,
}

pub fn stability_split(primary: &[C64], companion: &[C64], threshold: f64, mu: C64, tol: f64) -> StabilitySplit {
    let mut sorted: Vec<C64> = companion.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re));
    let shifts: Vec<f64> = primary
        .iter()
        .map(|z| {
            // scan outward from the real-part insertion point until the real gap alone exceeds the best
            let p = sorted.partition_point(|w| w.re < z.re);
            let mut best = f64::INFINITY;
            for w in sorted[p..].iter() {
                if w.re - z.re > best {
                    break;
                }
                best = best.min((w - z).norm());
            }
            for w in sorted[..p].iter().rev() {
                if z.re - w.re > best {
                    break;
                }
                best = best.min((w - z).norm());
            }
            best
        })
        .collect();
    let stable: Vec<bool> = shifts.iter().map(|&s| s <= tol).collect();
    let mut continuum_along: Vec<f64> = primary
        .iter()
        .zip(&stable)
        .filter(|(_, s)| !**s)
        .map(|(z, _)| ray_coordinates(*z, threshold, mu).0)
        .collect();
    continuum_along.sort_by(f64::total_cmp);
    StabilitySplit { shifts, stable, continuum_along }
}

/// Which eigenvalues of the primary solve qualify as resonances: real part within the
/// widened window, small imaginary part, further from the continuum ray than three
/// local continuum spacings, and stable under the change of distortion strength.
pub fn resonance_filter(
    primary: &[C64],
    residuals: &[Option<f64>],
    split: &StabilitySplit,
    window: &EnergyWindow,
    threshold: f64,
    mu: C64,
) -> Vec<Resonance> {
    let mut out = Vec::new();
    for (k, &z) in primary.iter().enumerate() {
        if z.re < window.lo - window.margin || z.re > window.hi + window.margin || z.im.abs() > window.imag_cap {
            continue;
        }
        let dist = ray_distance(z, threshold, mu);
        let spacing = local_spacing_at(&split.continuum_along, ray_coordinates(z, threshold, mu).0, SPACING_HALF);
        if !(dist > 3.0 * spacing) || !split.stable[k] {
            continue;
        }
        out.push(Resonance {
            re: z.re,
            im: z.im,
            ray_distance: dist,
            local_spacing: spacing,
            mu_shift: split.shifts[k],
            residual: residuals.get(k).copied().flatten(),
        });
    }
    out
}

/// Alignment of the discretized continuum with the rotated ray, over continuum
/// eigenvalues whose real part lies in `re_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumAlignment {
    pub count: usize,
    pub aligned: usize,
    /// Largest `ray_distance / local_spacing`.
    pub max_ratio: f64,
    pub worst: Option<(f64, f64)>,
}

pub fn continuum_alignment(
    values: &[C64],
    split: &StabilitySplit,
    threshold: f64,
    mu: C64,
    re_range: (f64, f64),
) -> ContinuumAlignment {
    let mut rep = ContinuumAlignment { count: 0, aligned: 0, max_ratio: 0.0, worst: None };
    for (k, &z) in values.iter().enumerate() {
        if split.stable[k] || z.re < re_range.0 || z.re > re_range.1 {
            continue;
        }
        let spacing = local_spacing_at(&split.continuum_along, ray_coordinates(z, threshold, mu).0, SPACING_HALF);
        let ratio = ray_distance(z, threshold, mu) / spacing;
        rep.count += 1;
        if ratio <= 3.0 {
            rep.aligned += 1;
        }
        if !(ratio <= rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.worst = Some((z.re, z.im));
        }
    }
    rep
}

/// Widths at one `h` after flooring noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthPoint {
    pub h: f64,
    pub max_im: f64,
    /// `max |Im| / h^2`, zero when every width is at or below the noise floor.
    pub scaled: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub points: Vec<WidthPoint>,
    pub noise_floor: f64,
    /// Largest imaginary part seen at any `h` (signed).
    pub max_im_signed: f64,
    pub sign_ok: bool,
    pub non_increasing: bool,
}

/// Sign and trend of resonance widths along an `h` sequence ordered from large to small.
pub fn width_report(per_h: &[(f64, Vec<C64>)], sign_tol: f64, noise_floor: f64) -> WidthReport {
    let mut max_signed = f64::NEG_INFINITY;
    let points: Vec<WidthPoint> = per_h
        .iter()
        .map(|(h, vals)| {
            let max_im = vals.iter().fold(0.0f64, |a, v| a.max(v.im.abs()));
            max_signed = vals.iter().fold(max_signed, |a, v| a.max(v.im));
            let floored = if max_im <= noise_floor { 0.0 } else { max_im };
            WidthPoint { h: *h, max_im, scaled: floored / (h * h), count: vals.len() }
        })
        .collect();
    let non_increasing = points.windows(2).all(|w| w[1].scaled <= w[0].scaled);
    WidthReport { points, noise_floor, max_im_signed: max_signed, sign_ok: max_signed <= sign_tol, non_increasing }
}

/// Squared norm of the part of a grid vector on nodes with `r` outside `[a, b]`.
pub fn mass_outside(v: &[C64], nodes: &[f64], a: f64, b: f64) -> f64 {
    v.iter().zip(nodes).filter(|(_, &r)| r < a || r > b).map(|(x, _)| x.norm_sqr()).sum()
}

/// One level followed through a grid-refinement ladder with spacing ratio 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub index: usize,
    /// Coarsest grid first.
    pub values: Vec<C64>,
    pub extrapolated: C64,
    pub error_estimate: f64,
    /// Observed order from the last three values, when there are three.
    pub observed_order: Option<f64>,
}

/// Richardson extrapolation of a sequence computed at spacings `d, d/2, d/4, ...`
/// assuming an error of order `order` in the spacing.
pub fn richardson(index: usize, values: &[C64], order: f64) -> Result<RefinementRow> {
    let n = values.len();
    if n < 2 {
        return Err(precondition("richardson", "need at least two refinement levels"));
    }
    let f = 2f64.powf(order);
    let (a, b) = (values[n - 2], values[n - 1]);
    let extrapolated = b + (b - a) / (f - 1.0);
    let observed_order = (n >= 3).then(|| {
        let d1 = (values[n - 2] - values[n - 3]).norm();
        let d2 = (b - a).norm();
        (d1 / d2).log2()
    });
    Ok(RefinementRow {
        index,
        values: values.to_vec(),
        extrapolated,
        error_estimate: (extrapolated - b).norm(),
        observed_order: observed_order.filter(|p| p.is_finite()),
    })
}

/// CSV with one row per level: the values per grid, the extrapolated value and the
/// error estimate of the finest grid.
pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let levels = rows.first().map_or(0, |r| r.values.len());
    let mut s = String::from("index");
    for k in 0..levels {
        s.push_str(&format!(",re_{0}n,im_{0}n", 1usize << k));
    }
    s.push_str(",re_extrapolated,im_extrapolated,error_estimate,observed_order\n");
    for r in rows {
        s.push_str(&r.index.to_string());
        for v in &r.values {
            s.push_str(&format!(",{:e},{:e}", v.re, v.im));
        }
        let p = r.observed_order.map_or("nan".to_string(), |p| format!("{p:e}"));
        s.push_str(&format!(",{:e},{:e},{:e},{p}\n", r.extrapolated.re, r.extrapolated.im, r.error_estimate));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn richardson_removes_the_leading_term() {
        let vals: Vec<C64> = [0.1, 0.05, 0.025].iter().map(|d| C64::new(1.0 + 3.0 * d * d + d * d * d * d, 0.0)).collect();
        let r = richardson(0, &vals, 2.0).unwrap();
        assert!((r.extrapolated.re - 1.0).abs() < 1e-5);
        assert!((r.observed_order.unwrap() - 2.0).abs() < 0.01);
        assert!(r.error_estimate > 0.0 && r.error_estimate < 1e-2);
    }

    #[test]
    fn pairing_prefers_total_distance() {
        // greedy nearest-first would pair 1.0 with 1.05 and leave 0.9 with 1.3
        let p = pair_spectra(&[0.9, 1.0], &[1.05, 1.3], 1.0).unwrap();
        let total: f64 = p.pairs.iter().map(|q| q.distance).sum();
        assert!((total - 0.45).abs() < 1e-12);
        assert!(p.is_bijection());
    }

    #[test]
    fn pairing_caps_and_reports_leftovers() {
        let p = pair_spectra(&[0.0, 5.0, 10.0], &[0.01, 10.02], 0.1).unwrap();
        assert_eq!(p.pairs.len(), 2);
        assert_eq!(p.unmatched_left, vec![1]);
        assert!(p.unmatched_right.is_empty());
        assert!((p.max_distance() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn fits_recover_laws() {
        let pts: Vec<(f64, f64)> = [0.04, 0.03, 0.02, 0.01].iter().map(|&h: &f64| (h, 3.0 * h.powi(2))).collect();
        let f = fit_order(&pts, 1e-12, 3).unwrap();
        assert!((f.order() - 2.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [0.04, 0.03, 0.02, 0.01].iter().map(|&h: &f64| (h, (-0.5 / h).exp())).collect();
        let f = fit_order(&pts, 1e-300, 3).unwrap();
        assert!((f.exponential.unwrap().slope + 0.5).abs() < 1e-10);
        assert!(f.exponential_preferred());
        assert!(fit_order(&pts, 1e-8, 3).is_err());
    }

    #[test]
    fn ray_geometry() {
        let mu = C64::new(0.0, 0.2);
        let dir = (C64::new(1.0, 0.0) + mu).powi(-2);
        let on = C64::new(-1.0, 0.0) + dir * 3.0;
        assert!(ray_distance(on, -1.0, mu) < 1e-14);
        let (_, across) = ray_coordinates(C64::new(0.5, -1e-3), -1.0, mu);
        assert!(across > 0.0);
    }

    proptest! {
        #[test]
        fn pairing_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 0..8),
                                b in prop::collection::vec(-5.0f64..5.0, 0..8)) {
            let p = pair_spectra(&a, &b, 0.7).unwrap();
            let q = pair_spectra(&b, &a, 0.7).unwrap();
            prop_assert_eq!(p.pairs.len(), q.pairs.len());
            let tp: f64 = p.pairs.iter().map(|x| x.distance).sum();
            let tq: f64 = q.pairs.iter().map(|x| x.distance).sum();
            prop_assert!((tp - tq).abs() < 1e-6);
        }
    }
}
