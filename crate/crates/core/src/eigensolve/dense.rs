use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{norm2, sort_key, BandLu, SolverMeta, SpectrumResult};
use crate::discretize::{DiscreteOperator, Storage, Symmetry};
use crate::error::{precondition, Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// All eigenpairs of a Hermitian operator, optionally restricted to `[lo, hi)`.
pub fn eig_hermitian_dense(op: &DiscreteOperator, window: Option<(f64, f64)>, with_vectors: bool) -> Result<SpectrumResult> {
    if !matches!(op.symmetry, Symmetry::RealSymmetric | Symmetry::Hermitian) {
        return Err(precondition("eig_hermitian_dense", "operator is not Hermitian"));
    }
    let a = op.to_dense();
    let n = op.dim;
    let norm = op.norm_inf().max(f64::MIN_POSITIVE);
    let evd = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Convergence { solver: "self-adjoint evd", detail: format!("{e:?}") })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let keep: Vec<usize> = (0..n)
        .filter(|&k| window.map_or(true, |(lo, hi)| s[k].re >= lo && s[k].re < hi))
        .collect();
    let mut values = Vec::with_capacity(keep.len());
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    for &k in &keep {
        let lam = C64::new(s[k].re, 0.0);
        values.push(lam);
        if with_vectors {
            let v: Vec<C64> = (0..n).map(|i| u[(i, k)]).collect();
            residuals.push(Some(residual(op, lam, &v) / norm));
            vectors.push(Some(v));
        } else {
            residuals.push(None);
        }
    }
    Ok(SpectrumResult {
        values,
        vectors: with_vectors.then_some(vectors),
        residuals,
        window,
        meta: SolverMeta { solver: "dense-hermitian".into(), n, iterations: 0, edge_counts: None },
    })
}

fn residual(op: &DiscreteOperator, lambda: C64, v: &[C64]) -> f64 {
    let mut y = vec![ZERO; v.len()];
    op.matvec(v, &mut y);
    y.iter().zip(v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt() / norm2(v)
}

/// Eigenvalues of a general complex operator sorted by `(re, im)`. Pairs selected
/// by `certify` get an inverse-iteration eigenvector and a residual; the others
/// carry no certificate.
pub fn eig_complex_dense(op: &DiscreteOperator, certify: &(dyn Fn(C64) -> bool + Sync)) -> Result<SpectrumResult> {
    let n = op.dim;
    let mut values = op
        .to_dense()
        .eigenvalues()
        .map_err(|e| Error::Convergence { solver: "complex evd", detail: format!("{e:?}") })?;
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Convergence { solver: "complex evd", detail: "non-finite eigenvalue".into() });
    }
    values.sort_by(sort_key);
    let which: Vec<bool> = values.iter().map(|&v| certify(v)).collect();
    let (vectors, residuals) = certify_pairs(op, &values, &which);
    Ok(SpectrumResult {
        values,
        vectors: Some(vectors),
        residuals,
        window: None,
        meta: SolverMeta { solver: "dense-complex".into(), n, iterations: 0, edge_counts: None },
    })
}

/// Inverse iteration at each selected eigenvalue; returns unit vectors and relative
/// residuals `||(A - lambda) v|| / ||A||`.
pub fn certify_pairs(op: &DiscreteOperator, values: &[C64], which: &[bool]) -> (Vec<Option<Vec<C64>>>, Vec<Option<f64>>) {
    let n = op.dim;
    let norm = op.norm_inf().max(f64::MIN_POSITIVE);
    let start: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.3 * ((i as f64) * 0.618_033_988_7).fract(), 0.2 * ((i as f64) * 0.414_213_562).fract()))
        .collect();
    let pairs: Vec<(Option<Vec<C64>>, Option<f64>)> = values
        .par_iter()
        .zip(which.par_iter())
        .map(|(&lam, &sel)| {
            if !sel {
                return (None, None);
            }
            let solve: Box<dyn Fn(&mut [C64])> = match &op.storage {
                Storage::Banded(b) => {
                    let lu = BandLu::new(b, lam);
                    Box::new(move |x: &mut [C64]| lu.solve_in_place(x))
                }
                Storage::Dense(m) => {
                    let mut a = m.clone();
                    for i in 0..n {
                        a[(i, i)] -= lam;
                    }
                    let lu = a.partial_piv_lu();
                    Box::new(move |x: &mut [C64]| {
                        use faer::linalg::solvers::Solve;
                        let mut col = faer::Mat::<C64>::from_fn(n, 1, |i, _| x[i]);
                        lu.solve_in_place(col.as_mut());
                        for i in 0..n {
                            x[i] = col[(i, 0)];
                        }
                    })
                }
            };
            let mut v = start.clone();
            for _ in 0..3 {
                solve(&mut v);
                let s = norm2(&v);
                if !(s.is_finite() && s > 0.0) {
                    return (None, Some(f64::INFINITY));
                }
                v.iter_mut().for_each(|x| *x /= s);
            }
            let r = residual(op, lam, &v) / norm;
            (Some(v), Some(r))
        })
        .collect();
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::BandMatrix;

    #[test]
    fn triangular_spectrum_is_diagonal() {
        let n = 12;
        let mut b = BandMatrix::zeros(n, 0, 2);
        for i in 0..n {
            b.set(i, i, C64::new(i as f64, -0.1 * i as f64));
            if i + 1 < n {
                b.set(i, i + 1, C64::new(0.5, 0.5));
            }
        }
        let op = DiscreteOperator::banded(b, Symmetry::General, "tri");
        let s = eig_complex_dense(&op, &|v| v.re < 5.5).unwrap();
        for (k, v) in s.values.iter().enumerate() {
            assert!((v - C64::new(k as f64, -0.1 * k as f64)).norm() < 1e-10);
            assert_eq!(s.residuals[k].is_some(), k < 6);
        }
        assert!(s.max_residual() < 1e-12);
    }

    #[test]
    fn hermitian_window() {
        let n = 20;
        let mut b = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            b.set(i, i, C64::new(2.0, 0.0));
            if i + 1 < n {
                b.set(i, i + 1, C64::new(0.0, -1.0));
                b.set(i + 1, i, C64::new(0.0, 1.0));
            }
        }
        let op = DiscreteOperator::banded(b, Symmetry::Hermitian, "h");
        let s = eig_hermitian_dense(&op, Some((0.0, 2.0)), true).unwrap();
        assert_eq!(s.values.len(), 10);
        for (k, v) in s.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v.re - exact).abs() < 1e-13);
        }
        assert!(s.max_residual() < 1e-13);
    }
}
