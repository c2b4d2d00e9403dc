use num_complex::Complex64 as C64;

use super::norm2;
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES for `A x = b` with right preconditioner `M^{-1}` (applied in place).
/// Stops when the true residual drops below `tol * ||b||`.
pub fn gmres(
    apply: &dyn Fn(&[C64], &mut [C64]),
    precond: &dyn Fn(&mut [C64]),
    b: &[C64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<C64>, GmresStats)> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok((x, GmresStats { iterations: 0, rel_residual: 0.0 }));
    }
    let m = restart.max(1);
    let mut total = 0;
    let mut r = b.to_vec();
    let mut work = vec![ZERO; n];
    loop {
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= tol {
            return Ok((x, GmresStats { iterations: total, rel_residual: rel }));
        }
        if total >= max_iter {
            return Err(Error::Convergence { solver: "gmres", detail: format!("{total} iterations, residual {rel:e}") });
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hcol: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, C64)> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k = 0;
        while k < m && total < max_iter {
            let mut z = v[k].clone();
            precond(&mut z);
            apply(&z, &mut work);
            let mut h = vec![ZERO; k + 2];
            // modified Gram-Schmidt, twice
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(vj, &work);
                    h[j] += c;
                    work.iter_mut().zip(vj).for_each(|(w, q)| *w -= c * q);
                }
            }
            let hn = norm2(&work);
            h[k + 1] = C64::new(hn, 0.0);
            for (j, &(c, s)) in cs.iter().enumerate() {
                let t = c * h[j] + s * h[j + 1];
                h[j + 1] = -s.conj() * h[j] + c * h[j + 1];
                h[j] = t;
            }
            let (a, bb) = (h[k], h[k + 1]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 {
                (1.0, ZERO)
            } else if a.norm() == 0.0 {
                (0.0, bb.conj() / bb.norm())
            } else {
                let c = a.norm() / den;
                (c, (a / a.norm()) * bb.conj() / den)
            };
            h[k] = c * a + s * bb;
            h[k + 1] = ZERO;
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            cs.push((c, s));
            hcol.push(h);
            total += 1;
            k += 1;
            if g[k].norm() / bnorm <= tol * 0.5 || hn == 0.0 {
                break;
            }
            v.push(work.iter().map(|w| w / hn).collect());
        }
        // back substitution on the k x k triangle
        let mut y = vec![ZERO; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hcol[j][i] * y[j];
            }
            y[i] = s / hcol[i][i];
        }
        let mut u = vec![ZERO; n];
        for (j, yj) in y.iter().enumerate() {
            u.iter_mut().zip(&v[j]).for_each(|(a, q)| *a += yj * q);
        }
        precond(&mut u);
        x.iter_mut().zip(&u).for_each(|(a, d)| *a += d);
        apply(&x, &mut work);
        for i in 0..n {
            r[i] = b[i] - work[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::BandMatrix;
    use crate::eigensolve::BandLu;

    #[test]
    fn solves_nonnormal_system() {
        let n = 200;
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, C64::new(2.0 + 0.01 * i as f64, 0.3));
            if i + 1 < n {
                a.set(i, i + 1, C64::new(-1.2, 0.1));
                a.set(i + 1, i, C64::new(-0.8, 0.0));
            }
        }
        let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64 * 0.1).sin(), 1.0)).collect();
        let apply = |x: &[C64], y: &mut [C64]| a.matvec(x, y);
        let (x, st) = gmres(&apply, &|_| {}, &b, 1e-12, 60, 5000).unwrap();
        let mut y = vec![ZERO; n];
        a.matvec(&x, &mut y);
        let res: f64 = y.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * norm2(&b) * 1.0001);
        // an exact preconditioner converges in one step
        let lu = BandLu::new(&a, ZERO);
        let (_, st2) = gmres(&apply, &|z| lu.solve_in_place(z), &b, 1e-12, 60, 5000).unwrap();
        assert!(st2.iterations <= 2 && st2.iterations < st.iterations);
    }
}
