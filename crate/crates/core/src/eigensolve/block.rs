use num_complex::Complex64 as C64;

use crate::discretize::{ChannelBlockOperator, Symmetry};
use crate::error::{precondition, Result};

/// Hermitian block-tridiagonal matrix with 2x2 blocks: the two-channel operator at
/// `mu = 0`, one block per grid node. Inertia counts follow from the block `LDL*`
/// factorization, which turns eigenvalue counting into an O(n) pass.
#[derive(Clone, Debug)]
pub struct BlockTridiag2 {
    /// Real diagonal entries of channel 1 and channel 2 at each node.
    pub diag: Vec<[f64; 2]>,
    /// Block coupling node `i` to node `i + 1`, row-major `[[b11, b12], [b21, b22]]`.
    pub off: Vec<[C64; 4]>,
}

impl BlockTridiag2 {
    pub fn from_operator(op: &ChannelBlockOperator) -> Result<Self> {
        if op.symmetry() != Symmetry::Hermitian {
            return Err(precondition("BlockTridiag2", "needs real-symmetric channel blocks"));
        }
        let n = op.n();
        let c = op.coupling.as_band().expect("banded coupling");
        if (0..n).any(|i| c.get(i, i) != C64::new(0.0, 0.0)) {
            return Err(precondition("BlockTridiag2", "on-site coupling is not supported"));
        }
        let diag = (0..n).map(|i| [op.p1.get(i, i).re, op.p2.get(i, i).re]).collect();
        let off = (0..n.saturating_sub(1))
            .map(|i| {
                [
                    op.p1.get(i, i + 1),
                    c.get(i, i + 1),
                    c.get(i + 1, i).conj(),
                    op.p2.get(i, i + 1),
                ]
            })
            .collect();
        Ok(Self { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Number of negative eigenvalues of `A - diag(s1, s2)` (channel-wise shifts).
    pub fn count_below2(&self, s1: f64, s2: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        // current pivot block D = [[a, b], [conj(b), c]]
        let (mut a, mut b, mut c) = (self.diag[0][0] - s1, C64::new(0.0, 0.0), self.diag[0][1] - s2);
        for i in 0..self.n() {
            if i > 0 {
                // D_i = A_i - B^* D^{-1} B with B = off[i - 1]
                let det = a * c - b.norm_sqr();
                let det = if det == 0.0 { tiny } else { det };
                let [b11, b12, b21, b22] = self.off[i - 1];
                // D^{-1} = [[c, -b], [-conj b, a]] / det
                let x11 = (b11 * c - b * b21) / det;
                let x12 = (b12 * c - b * b22) / det;
                let x21 = (-b.conj() * b11 + b21 * a) / det;
                let x22 = (-b.conj() * b12 + b22 * a) / det;
                // B^* X
                let y11 = b11.conj() * x11 + b21.conj() * x21;
                let y12 = b11.conj() * x12 + b21.conj() * x22;
                let y22 = b12.conj() * x12 + b22.conj() * x22;
                a = self.diag[i][0] - s1 - y11.re;
                b = -y12;
                c = self.diag[i][1] - s2 - y22.re;
            }
            let det = a * c - b.norm_sqr();
            if det < 0.0 {
                count += 1;
            } else if det > 0.0 {
                if a + c < 0.0 {
                    count += 2;
                }
            } else {
                // singular pivot: treat as infinitesimally negative
                count += if a + c < 0.0 { 2 } else { 1 };
            }
        }
        count
    }

    pub fn count_below(&self, s: f64) -> usize {
        self.count_below2(s, s)
    }

    fn bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            for ch in 0..2 {
                let mut r = 0.0;
                if i > 0 {
                    let o = self.off[i - 1];
                    r += o[ch].norm() + o[2 + ch].norm();
                }
                if i + 1 < n {
                    let o = self.off[i];
                    r += o[2 * ch].norm() + o[2 * ch + 1].norm();
                }
                lo = lo.min(self.diag[i][ch] - r);
                hi = hi.max(self.diag[i][ch] + r);
            }
        }
        (lo, hi)
    }

    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64, count: impl Fn(f64) -> usize) -> f64 {
        let mut it = 0;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || it > 2000 {
                return mid;
            }
            it += 1;
            if count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// All eigenvalues in `[lo, hi)`, with the edge counts.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> (Vec<f64>, (usize, usize)) {
        let c_lo = self.count_below(lo);
        let c_hi = self.count_below(hi);
        let (g_lo, g_hi) = self.bounds();
        let vals = (c_lo..c_hi)
            .map(|k| self.bisect(k, lo.max(g_lo), hi.min(g_hi), |x| self.count_below(x)))
            .collect();
        (vals, (c_lo, c_hi))
    }

    /// The `k`-th eigenvalue (0-based) of the channel-1 Schur complement
    /// `A11 - s1 - A12 (A22 - s2)^{-1} A21`, valid when `A22 - s2` is positive definite.
    pub fn schur1_eigenvalue(&self, k: usize, s2: f64, lo: f64, hi: f64) -> f64 {
        self.bisect(k, lo, hi, |x| self.count_below2(x, s2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble_coupling, assemble_dirichlet, Grid};
    use proptest::prelude::*;

    fn fixture(amp: f64) -> ChannelBlockOperator {
        let g = Grid::new(8.0, 60).unwrap();
        let h = 0.2;
        let p1 = assemble_dirichlet(&|r| Ok((r - 3.0).powi(2)), h, &g, None).unwrap();
        let p2 = assemble_dirichlet(&|r| Ok(0.5 + 0.7 * (r - 4.5).powi(2)), h, &g, None).unwrap();
        let a = assemble_coupling(&|r| amp * (-(r - 4.0).powi(2)).exp(), h, &g, g.n);
        ChannelBlockOperator::new(p1, p2, &a, h).unwrap()
    }

    #[test]
    fn matches_dense_hermitian() {
        let op = fixture(3.0);
        let bt = BlockTridiag2::from_operator(&op).unwrap();
        let dense = op.assembled().to_dense();
        let ev = dense.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let (vals, _) = bt.eigenvalues_in(-100.0, 100.0);
        assert_eq!(vals.len(), ev.len());
        for (a, b) in vals.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-11, "{a} {b}");
        }
    }

    proptest! {
        #[test]
        fn counts_are_monotone(x in -1.0f64..6.0, dx in 0.0f64..1.0) {
            let bt = BlockTridiag2::from_operator(&fixture(2.0)).unwrap();
            prop_assert!(bt.count_below(x) <= bt.count_below(x + dx));
        }
    }
}
