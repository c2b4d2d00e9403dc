//! Windowed and dense spectral solvers with residual certificates, and the linear
//! solvers used for resolvent applications.

mod banded;
mod block;
mod dense;
mod gmres;
mod tridiag;

pub use banded::{resolve_linear, BandLu};
pub use block::BlockTridiag2;
pub use dense::{certify_pairs, eig_complex_dense, eig_hermitian_dense};
pub use gmres::{gmres, GmresStats};
pub use tridiag::{
    eig_sym_tridiag_window, sturm_count, tridiag_eigenvalues_in, tridiag_inverse_iteration, tridiag_kth_eigenvalue,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESID_TOL: f64 = 1e-9;

/// Runs the dense kernels single-threaded so that results do not depend on the
/// thread count. Independent solves can still run concurrently on the rayon pool.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub solver: String,
    pub n: usize,
    pub iterations: usize,
    /// Eigenvalue counts below the window edges when a counting certificate exists.
    pub edge_counts: Option<(usize, usize)>,
}

/// Eigenvalues sorted by `(re, im)`, optional unit eigenvectors, and per-pair
/// residuals `||(A - lambda) v|| / ||A||` (None when no vector was computed).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub values: Vec<C64>,
    pub vectors: Option<Vec<Option<Vec<C64>>>>,
    pub residuals: Vec<Option<f64>>,
    pub window: Option<(f64, f64)>,
    pub meta: SolverMeta,
}

impl SpectrumResult {
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    /// CSV rows `index,re,im,residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,re,im,residual\n");
        for (k, v) in self.values.iter().enumerate() {
            let r = self.residuals[k].map_or("nan".to_string(), |x| format!("{x:e}"));
            s.push_str(&format!("{k},{:e},{:e},{r}\n", v.re, v.im));
        }
        s
    }
}

pub(crate) fn sort_key(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub(crate) fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
