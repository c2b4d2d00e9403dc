use num_complex::Complex64 as C64;

use super::{SolverMeta, SpectrumResult};
use crate::discretize::DiscreteOperator;
use crate::error::{precondition, Error, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix `(d, e)` strictly below `x`.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    for i in 0..d.len() {
        if i > 0 {
            q = d[i] - x - e[i - 1] * e[i - 1] / q;
        }
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The `k`-th eigenvalue (0-based) by bisection, refined until the bracket stops shrinking.
fn kth_eigenvalue(d: &[f64], e: &[f64], k: usize, mut lo: f64, mut hi: f64) -> (f64, usize) {
    let mut it = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || it > 2000 {
            return (mid, it);
        }
        it += 1;
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// The `k`-th eigenvalue (0-based) of `(d, e)` over its Gershgorin interval.
pub fn tridiag_kth_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let (lo, hi) = gershgorin(d, e);
    kth_eigenvalue(d, e, k, lo, hi).0
}

/// All eigenvalues in `[lo, hi)` by Sturm bisection; returns values and edge counts.
pub fn tridiag_eigenvalues_in(d: &[f64], e: &[f64], lo: f64, hi: f64) -> (Vec<f64>, (usize, usize), usize) {
    let c_lo = sturm_count(d, e, lo);
    let c_hi = sturm_count(d, e, hi);
    let (g_lo, g_hi) = gershgorin(d, e);
    let mut iters = 0;
    let mut out = Vec::with_capacity(c_hi.saturating_sub(c_lo));
    for k in c_lo..c_hi {
        // the k-th value lies in [lo, hi) by the counts
        let a = lo.max(g_lo);
        let b = hi.min(g_hi);
        let (v, it) = kth_eigenvalue(d, e, k, a, b);
        iters += it;
        out.push(v);
    }
    (out, (c_lo, c_hi), iters)
}

/// Solves `(T - lambda) x = b` by Gaussian elimination with partial pivoting.
fn tridiag_solve_pivoted(d: &[f64], e: &[f64], lambda: f64, b: &mut [f64]) {
    let n = d.len();
    // rows hold (sub, diag, sup, sup2) after pivoting
    let mut a0: Vec<f64> = d.iter().map(|x| x - lambda).collect();
    let mut a1: Vec<f64> = e.to_vec();
    a1.push(0.0);
    let mut a2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let mut swap = vec![false; n];
    let mut mult = vec![0.0; n];
    let eps = f64::EPSILON * (a0.iter().map(|x| x.abs()).fold(0.0, f64::max) + 2.0 * e.iter().map(|x| x.abs()).fold(0.0, f64::max)).max(1.0);
    for k in 0..n.saturating_sub(1) {
        if sub[k].abs() > a0[k].abs() {
            swap[k] = true;
            // swap rows k and k+1 on columns k..k+2
            let (r0, r1, r2) = (a0[k], a1[k], a2[k]);
            a0[k] = sub[k];
            a1[k] = a0[k + 1];
            a2[k] = a1[k + 1];
            sub[k] = r0;
            a0[k + 1] = r1;
            a1[k + 1] = r2;
        }
        if a0[k] == 0.0 {
            a0[k] = eps;
        }
        let l = sub[k] / a0[k];
        mult[k] = l;
        a0[k + 1] -= l * a1[k];
        a1[k + 1] -= l * a2[k];
    }
    if a0[n - 1] == 0.0 {
        a0[n - 1] = eps;
    }
    for k in 0..n.saturating_sub(1) {
        if swap[k] {
            b.swap(k, k + 1);
        }
        b[k + 1] -= mult[k] * b[k];
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        if k + 1 < n {
            s -= a1[k] * b[k + 1];
        }
        if k + 2 < n {
            s -= a2[k] * b[k + 2];
        }
        b[k] = s / a0[k];
    }
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Inverse iteration for an eigenvector of `(d, e)` at `lambda`, orthogonalized
/// against `against` (vectors of numerically close eigenvalues).
pub fn tridiag_inverse_iteration(d: &[f64], e: &[f64], lambda: f64, against: &[&[f64]]) -> Vec<f64> {
    let n = d.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * ((i as f64) * 0.7548776662).fract()).collect();
    normalize(&mut v);
    for _ in 0..3 {
        tridiag_solve_pivoted(d, e, lambda, &mut v);
        for u in against {
            let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u.iter()).for_each(|(x, y)| *x -= p * y);
        }
        normalize(&mut v);
    }
    // fix the sign so that the largest component is positive
    let imax = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

fn residual(d: &[f64], e: &[f64], lambda: f64, v: &[f64], norm: f64) -> f64 {
    let n = d.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut y = (d[i] - lambda) * v[i];
        if i > 0 {
            y += e[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            y += e[i] * v[i + 1];
        }
        s += y * y;
    }
    s.sqrt() / norm
}

/// Eigenpairs of a real-symmetric tridiagonal operator in `[lo, hi)`, certified by
/// Sturm counts at both edges.
pub fn eig_sym_tridiag_window(op: &DiscreteOperator, lo: f64, hi: f64, with_vectors: bool) -> Result<SpectrumResult> {
    let (d, e) = op
        .sym_tridiag()
        .ok_or_else(|| precondition("eig_sym_tridiag_window", "operator is not real-symmetric tridiagonal"))?;
    let norm = op.norm_inf().max(f64::MIN_POSITIVE);
    let (vals, counts, iters) = tridiag_eigenvalues_in(&d, &e, lo, hi);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut residuals = Vec::with_capacity(vals.len());
    if with_vectors {
        for (k, &lam) in vals.iter().enumerate() {
            let close: Vec<&[f64]> = (0..k)
                .filter(|&j| (vals[j] - lam).abs() < 1e-7 * norm)
                .map(|j| vectors[j].as_slice())
                .collect();
            let v = tridiag_inverse_iteration(&d, &e, lam, &close);
            let r = residual(&d, &e, lam, &v, norm);
            if r > super::DEFAULT_RESID_TOL {
                return Err(Error::Convergence {
                    solver: "inverse iteration",
                    detail: format!("index {k}: residual {r:e}"),
                });
            }
            residuals.push(Some(r));
            vectors.push(v);
        }
    } else {
        residuals.resize(vals.len(), None);
    }
    Ok(SpectrumResult {
        values: vals.iter().map(|&x| C64::new(x, 0.0)).collect(),
        vectors: with_vectors.then(|| {
            vectors
                .into_iter()
                .map(|v| Some(v.into_iter().map(|x| C64::new(x, 0.0)).collect()))
                .collect()
        }),
        residuals,
        window: Some((lo, hi)),
        meta: SolverMeta {
            solver: "sturm-bisection".into(),
            n: d.len(),
            iterations: iters,
            edge_counts: Some(counts),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_dirichlet, Grid};
    use proptest::prelude::*;

    #[test]
    fn box_spectrum_is_exact() {
        let h = 0.1 / std::f64::consts::PI;
        let g = Grid::new(1.0, 256).unwrap();
        let op = assemble_dirichlet(&|_| Ok(0.0), h, &g, None).unwrap();
        let s = eig_sym_tridiag_window(&op, -1.0, 2.0, true).unwrap();
        let dx = g.spacing;
        for (k, v) in s.values.iter().enumerate() {
            let exact = 2.0 * h * h / (dx * dx) * (1.0 - ((k + 1) as f64 * std::f64::consts::PI * dx).cos());
            assert!((v.re - exact).abs() < 1e-12, "k = {k}");
        }
        assert_eq!(s.meta.edge_counts.unwrap().1 - s.meta.edge_counts.unwrap().0, s.values.len());
        assert!(s.max_residual() < 1e-12);
    }

    proptest! {
        #[test]
        fn counts_match_dense(seed in 0u64..500) {
            let n = 30;
            let mut s = seed as f64 + 0.5;
            let mut next = || { s = (s * 1.324_717_957 + 0.17).fract(); 4.0 * s - 2.0 };
            let d: Vec<f64> = (0..n).map(|_| next()).collect();
            let e: Vec<f64> = (0..n - 1).map(|_| next()).collect();
            let mut m = faer::Mat::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = d[i];
                if i + 1 < n {
                    m[(i, i + 1)] = e[i];
                    m[(i + 1, i)] = e[i];
                }
            }
            let ev = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            let (vals, _, _) = tridiag_eigenvalues_in(&d, &e, -10.0, 10.0);
            prop_assert_eq!(vals.len(), n);
            for (a, b) in vals.iter().zip(&ev) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
