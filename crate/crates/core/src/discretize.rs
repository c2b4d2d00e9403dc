//! Finite-difference realizations of the channel operators on a uniform Dirichlet grid.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{regularized_potential, Channel, DistortionProfile, PotentialModel, RegularizationProfile};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub r_max: f64,
    pub n: usize,
    pub spacing: f64,
}

impl Grid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || n < 16 {
            return Err(Error::InvalidParameter(format!("grid needs r_max > 0 and n >= 16 (got {r_max}, {n})")));
        }
        Ok(Self { r_max, n, spacing: r_max / (n + 1) as f64 })
    }

    /// Grid with spacing close to `kappa * h`.
    pub fn for_h(r_max: f64, h: f64, kappa: f64) -> Result<Self> {
        let n = (r_max / (kappa * h)).round() as usize;
        Self::new(r_max, n.saturating_sub(1))
    }

    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Number of nodes strictly below `r`.
    pub fn count_below(&self, r: f64) -> usize {
        (0..self.n).take_while(|&i| self.node(i) < r).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    RealSymmetric,
    Hermitian,
    ComplexSymmetric,
    General,
}

impl Symmetry {
    pub fn label(self) -> &'static str {
        match self {
            Symmetry::RealSymmetric => "real-symmetric",
            Symmetry::Hermitian => "hermitian",
            Symmetry::ComplexSymmetric => "complex-symmetric",
            Symmetry::General => "general",
        }
    }
}

/// Square band matrix, row-major: row `i` stores columns `i - kl ..= i + ku`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![ZERO; n * (kl + ku + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(ZERO, |s| self.data[s])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] = v;
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for j in self.row_range(i) {
                acc += self.data[i * (self.kl + self.ku + 1) + (j + self.kl - i)] * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> faer::Mat<C64> {
        let mut m = faer::Mat::<C64>::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in self.row_range(i) {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Exact inverse of `to_dense` for matrices whose support lies in the band.
    pub fn from_dense(m: &faer::Mat<C64>, kl: usize, ku: usize) -> Result<Self> {
        let n = m.nrows();
        let mut b = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                match b.slot(i, j) {
                    Some(s) => b.data[s] = v,
                    None if v != ZERO => {
                        return Err(Error::InvalidParameter(format!("entry ({i},{j}) lies outside the band")))
                    }
                    None => {}
                }
            }
        }
        Ok(b)
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn shifted(&self, lambda: C64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let s = out.slot(i, i).unwrap();
            out.data[s] -= lambda;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    Banded(BandMatrix),
    Dense(faer::Mat<C64>),
}

/// A matrix realization of a continuous operator with a declared symmetry class.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOperator {
    pub dim: usize,
    pub symmetry: Symmetry,
    pub storage: Storage,
    pub label: String,
}

impl DiscreteOperator {
    pub fn banded(b: BandMatrix, symmetry: Symmetry, label: impl Into<String>) -> Self {
        Self { dim: b.n, symmetry, storage: Storage::Banded(b), label: label.into() }
    }

    pub fn dense(m: faer::Mat<C64>, symmetry: Symmetry, label: impl Into<String>) -> Self {
        Self { dim: m.nrows(), symmetry, storage: Storage::Dense(m), label: label.into() }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Banded(b) => b.get(i, j),
            Storage::Dense(m) => m[(i, j)],
        }
    }

    pub fn to_dense(&self) -> faer::Mat<C64> {
        match &self.storage {
            Storage::Banded(b) => b.to_dense(),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn as_band(&self) -> Option<&BandMatrix> {
        match &self.storage {
            Storage::Banded(b) => Some(b),
            Storage::Dense(_) => None,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        match &self.storage {
            Storage::Banded(b) => b.norm_inf(),
            Storage::Dense(m) => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        match &self.storage {
            Storage::Banded(b) => b.matvec(x, y),
            Storage::Dense(m) => {
                for i in 0..self.dim {
                    y[i] = (0..self.dim).map(|j| m[(i, j)] * x[j]).sum();
                }
            }
        }
    }

    /// Diagonal and first off-diagonal when the operator is real-symmetric tridiagonal.
    pub fn sym_tridiag(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let b = self.as_band()?;
        if self.symmetry != Symmetry::RealSymmetric || b.kl > 1 || b.ku > 1 {
            return None;
        }
        let d = (0..b.n).map(|i| b.get(i, i).re).collect();
        let e = (1..b.n).map(|i| b.get(i, i - 1).re).collect();
        Some((d, e))
    }

    /// Largest violation of the declared symmetry, relative to the matrix norm.
    pub fn symmetry_defect(&self) -> f64 {
        let norm = self.norm_inf().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        let pairs: Box<dyn Iterator<Item = (usize, usize)>> = match &self.storage {
            Storage::Banded(b) => Box::new((0..b.n).flat_map(move |i| b.row_range(i).map(move |j| (i, j)))),
            Storage::Dense(_) => Box::new((0..self.dim).flat_map(move |i| (0..self.dim).map(move |j| (i, j)))),
        };
        for (i, j) in pairs {
            let a = self.get(i, j);
            let t = self.get(j, i);
            let defect = match self.symmetry {
                Symmetry::RealSymmetric => (a - t).norm() + a.im.abs(),
                Symmetry::Hermitian => (a - t.conj()).norm(),
                Symmetry::ComplexSymmetric => (a - t).norm(),
                Symmetry::General => 0.0,
            };
            worst = worst.max(defect);
        }
        worst / norm
    }

    pub fn certify_symmetry(&self) -> Result<()> {
        let d = self.symmetry_defect();
        if d > 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "{} is not {} (relative defect {d:e})",
                self.label,
                self.symmetry.label()
            )));
        }
        Ok(())
    }

    /// Text export: a `# dim, symmetry` header, then `i j re im` per stored nonzero.
    pub fn export_text(&self) -> String {
        let mut s = format!("# {}, {}\n", self.dim, self.symmetry.label());
        let mut emit = |i: usize, j: usize| {
            let v = self.get(i, j);
            if v != ZERO {
                let _ = writeln!(s, "{i} {j} {:e} {:e}", v.re, v.im);
            }
        };
        match &self.storage {
            Storage::Banded(b) => {
                for i in 0..b.n {
                    for j in b.row_range(i) {
                        emit(i, j);
                    }
                }
            }
            Storage::Dense(_) => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        emit(i, j);
                    }
                }
            }
        }
        s
    }

    pub fn import_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::InvalidParameter("empty matrix file".into()))?;
        let body = header.trim_start_matches('#');
        let mut parts = body.split(',').map(str::trim);
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidParameter(format!("bad header {header}")))?;
        let symmetry = match parts.next() {
            Some("real-symmetric") => Symmetry::RealSymmetric,
            Some("hermitian") => Symmetry::Hermitian,
            Some("complex-symmetric") => Symmetry::ComplexSymmetric,
            Some("general") => Symmetry::General,
            other => return Err(Error::InvalidParameter(format!("unknown symmetry {other:?}"))),
        };
        let mut m = faer::Mat::<C64>::zeros(dim, dim);
        for (k, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidParameter(format!("line {}: expected `i j re im`", k + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let j: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            m[(i, j)] = C64::new(re, im);
        }
        Ok(Self::dense(m, symmetry, "imported"))
    }
}

/// `-h^2 d^2/dR^2 + W` with Dirichlet zeros at `R = 0` and at the first node at or
/// beyond `r_cut` (or `r_max`).
pub fn assemble_dirichlet(
    w: &dyn Fn(f64) -> Result<f64>,
    h: f64,
    grid: &Grid,
    r_cut: Option<f64>,
) -> Result<DiscreteOperator> {
    let n = r_cut.map_or(grid.n, |c| grid.count_below(c));
    if n == 0 {
        return Err(Error::InvalidParameter("sub-interval contains no node".into()));
    }
    let c = h * h / (grid.spacing * grid.spacing);
    let mut b = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        let r = grid.node(i);
        let v = w(r)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, r });
        }
        b.set(i, i, C64::new(2.0 * c + v, 0.0));
        if i + 1 < n {
            b.set(i, i + 1, C64::new(-c, 0.0));
            b.set(i + 1, i, C64::new(-c, 0.0));
        }
    }
    Ok(DiscreteOperator::banded(b, Symmetry::RealSymmetric, "dirichlet"))
}

/// Face values `1/g` at `i + 1/2`; the outer faces reuse the node value.
fn face_inverse(g: &[C64]) -> Vec<C64> {
    let n = g.len();
    let mut f = Vec::with_capacity(n + 1);
    f.push(g[0].inv());
    for i in 0..n - 1 {
        f.push(2.0 / (g[i] + g[i + 1]));
    }
    f.push(g[n - 1].inv());
    f
}

/// Distorted kinetic term in half-weighted form `K = D_w T D_w`, `D_w = diag(g^{-1/2})`,
/// with `T` the three-point stencil weighted by face-averaged `1/g`, plus the
/// regularized complex potential on the diagonal.
pub fn assemble_distorted(
    model: &PotentialModel,
    ch: Channel,
    h: f64,
    grid: &Grid,
    profile: &DistortionProfile,
    reg: &RegularizationProfile,
) -> Result<DiscreteOperator> {
    let n = grid.n;
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let r = grid.node(i);
        let dphi = profile.phi(r).1;
        if dphi.re < 0.5 {
            return Err(Error::Distortion { r, value: dphi.re });
        }
        g.push(dphi);
    }
    let f = face_inverse(&g);
    let dw: Vec<C64> = g.iter().map(|x| x.sqrt().inv()).collect();
    let c = h * h / (grid.spacing * grid.spacing);
    let mut b = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        let r = grid.node(i);
        let v = regularized_potential(model, ch, profile, reg, r)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite { index: i, r });
        }
        b.set(i, i, c * (f[i] + f[i + 1]) * dw[i] * dw[i] + v);
        if i + 1 < n {
            let off = -c * f[i + 1] * dw[i] * dw[i + 1];
            b.set(i, i + 1, off);
            b.set(i + 1, i, off);
        }
    }
    let symmetry = if profile.mu == ZERO { Symmetry::RealSymmetric } else { Symmetry::ComplexSymmetric };
    Ok(DiscreteOperator::banded(b, symmetry, "distorted"))
}

/// `A0 = h a0(R) (-i d/dR)` by centered differences on the first `n` nodes.
pub fn assemble_coupling(a0: &dyn Fn(f64) -> f64, h: f64, grid: &Grid, n: usize) -> DiscreteOperator {
    let mut b = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        let c = h * a0(grid.node(i)) / (2.0 * grid.spacing);
        if i + 1 < n {
            b.set(i, i + 1, C64::new(0.0, -c));
        }
        if i > 0 {
            b.set(i, i - 1, C64::new(0.0, c));
        }
    }
    DiscreteOperator::banded(b, Symmetry::General, "coupling")
}

/// Coupling profile `a0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingSpec {
    /// `amplitude * exp(-((R - center)/width)^2)`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    Zero,
}

impl CouplingSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            CouplingSpec::Gaussian { amplitude, center, width } => amplitude * (-((r - center) / width).powi(2)).exp(),
            CouplingSpec::Zero => 0.0,
        }
    }
}

/// `[[P1, h A0], [h A0^*, P2]]` on a shared grid.
#[derive(Clone, Debug)]
pub struct ChannelBlockOperator {
    pub p1: DiscreteOperator,
    pub p2: DiscreteOperator,
    /// The off-diagonal block `h A0`.
    pub coupling: DiscreteOperator,
    pub h: f64,
}

impl ChannelBlockOperator {
    pub fn new(p1: DiscreteOperator, p2: DiscreteOperator, a0: &DiscreteOperator, h: f64) -> Result<Self> {
        if p1.dim != p2.dim || p1.dim != a0.dim {
            return Err(Error::InvalidParameter("channel blocks do not share one grid".into()));
        }
        let b = a0.as_band().ok_or_else(|| Error::InvalidParameter("coupling must be banded".into()))?;
        let mut hb = b.clone();
        for i in 0..b.n {
            for j in b.row_range(i) {
                hb.set(i, j, b.get(i, j) * h);
            }
        }
        Ok(Self { p1, p2, coupling: DiscreteOperator::banded(hb, Symmetry::General, "h*coupling"), h })
    }

    pub fn n(&self) -> usize {
        self.p1.dim
    }

    pub fn symmetry(&self) -> Symmetry {
        match (self.p1.symmetry, self.p2.symmetry) {
            (Symmetry::RealSymmetric, Symmetry::RealSymmetric) => Symmetry::Hermitian,
            _ => Symmetry::General,
        }
    }

    /// The assembled `2n x 2n` matrix in channel-block order.
    pub fn assembled(&self) -> DiscreteOperator {
        let n = self.n();
        let mut m = faer::Mat::<C64>::zeros(2 * n, 2 * n);
        let c = self.coupling.as_band().unwrap();
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                m[(i, j)] = self.p1.get(i, j);
                m[(n + i, n + j)] = self.p2.get(i, j);
                m[(i, n + j)] = c.get(i, j);
                m[(n + j, i)] = c.get(i, j).conj();
            }
        }
        DiscreteOperator::dense(m, self.symmetry(), "two-channel")
    }

    /// The same matrix with channels interleaved node by node (`2i` is channel 1,
    /// `2i + 1` channel 2); permutation-similar to `assembled`, bandwidth 3.
    pub fn interleaved(&self) -> BandMatrix {
        let n = self.n();
        let mut b = BandMatrix::zeros(2 * n, 3, 3);
        let c = self.coupling.as_band().unwrap();
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                b.set(2 * i, 2 * j, self.p1.get(i, j));
                b.set(2 * i + 1, 2 * j + 1, self.p2.get(i, j));
                let v = c.get(i, j);
                if v != ZERO {
                    b.set(2 * i, 2 * j + 1, v);
                    b.set(2 * j + 1, 2 * i, v.conj());
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_arithmetic() {
        let g = Grid::new(1.0, 16).unwrap();
        assert_eq!(g.spacing * 17.0, 1.0);
        assert!(Grid::new(1.0, 3).is_err());
        let g2 = Grid::new(1.0, 33).unwrap();
        assert!((g.spacing / 2.0 - g2.spacing).abs() <= f64::EPSILON * g.spacing);
        assert_eq!(g.nodes().len(), 16);
        assert_eq!(g.count_below(0.5), 8);
    }

    #[test]
    fn stencil_is_second_order() {
        let h = 0.1;
        let mut errs = vec![];
        for n in [63usize, 127, 255] {
            let g = Grid::new(1.0, n).unwrap();
            let op = assemble_dirichlet(&|_| Ok(0.0), h, &g, None).unwrap();
            let u: Vec<C64> = g.nodes().iter().map(|&x| C64::new((std::f64::consts::PI * x).sin().powi(3), 0.0)).collect();
            let mut y = vec![ZERO; n];
            op.matvec(&u, &mut y);
            let err = g
                .nodes()
                .iter()
                .zip(&y)
                .map(|(&x, v)| {
                    let p = std::f64::consts::PI;
                    // -(sin^3)'' = -(6 sin cos^2 - 3 sin^3) p^2
                    let exact = -h * h * p * p * (6.0 * (p * x).sin() * (p * x).cos().powi(2) - 3.0 * (p * x).sin().powi(3));
                    (v.re - exact).abs()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let p1 = (errs[0] / errs[1]).log2();
        let p2 = (errs[1] / errs[2]).log2();
        assert!(p1 > 1.9 && p2 > 1.9, "{errs:?}");
    }

    #[test]
    fn band_roundtrip_and_export() {
        let g = Grid::new(2.0, 20).unwrap();
        let op = assemble_dirichlet(&|r| Ok(r * r), 0.3, &g, None).unwrap();
        let dense = op.to_dense();
        let back = BandMatrix::from_dense(&dense, 1, 1).unwrap();
        assert_eq!(&back, op.as_band().unwrap());
        let text = op.export_text();
        assert!(text.starts_with("# 20, real-symmetric\n"));
        let again = DiscreteOperator::import_text(&text).unwrap();
        assert_eq!(again.to_dense(), dense);
        assert!(BandMatrix::from_dense(&dense, 0, 0).is_err());
    }

    #[test]
    fn coupling_kills_constants_and_pairs_hermitian() {
        let g = Grid::new(10.0, 50).unwrap();
        let a = assemble_coupling(&|r| (-(r - 5.0) * (r - 5.0)).exp(), 0.05, &g, 50);
        let one = vec![C64::new(1.0, 0.0); 50];
        let mut y = vec![ZERO; 50];
        a.matvec(&one, &mut y);
        assert!(y[1..49].iter().all(|v| v.norm() == 0.0));
        let zero = assemble_coupling(&|_| 0.0, 0.05, &g, 50);
        assert!(zero.to_dense().col_iter().all(|c| c.iter().all(|v| *v == ZERO)));
        let p = assemble_dirichlet(&|r| Ok(r), 0.05, &g, None).unwrap();
        let blk = ChannelBlockOperator::new(p.clone(), p, &a, 0.05).unwrap();
        let m = blk.assembled();
        assert_eq!(m.symmetry, Symmetry::Hermitian);
        m.certify_symmetry().unwrap();
        let inter = blk.interleaved();
        let d = DiscreteOperator::banded(inter, Symmetry::Hermitian, "i");
        d.certify_symmetry().unwrap();
    }

    proptest! {
        #[test]
        fn distorted_is_complex_symmetric(theta in 0.0f64..0.45, s0 in 3.0f64..5.0) {
            use crate::defaults::default_model;
            let m = default_model();
            let g = Grid::new(12.0, 120).unwrap();
            let prof = DistortionProfile::new(s0 + 4.0, s0 + 5.0, 2, C64::new(0.0, theta)).unwrap();
            let reg = RegularizationProfile::new(4.0, 4.5, -180.0).unwrap();
            let op = assemble_distorted(&m, Channel::One, 0.05, &g, &prof, &reg).unwrap();
            prop_assert!(op.symmetry_defect() <= 1e-14);
        }

        #[test]
        fn band_matvec_matches_dense(seed in 0u64..1000) {
            let n = 12;
            let mut b = BandMatrix::zeros(n, 2, 1);
            let mut x = vec![ZERO; n];
            let mut s = seed as f64;
            let mut next = || { s = (s * 1.618_033_988 + 0.3).fract(); s - 0.5 };
            for i in 0..n {
                x[i] = C64::new(next(), next());
                for j in b.row_range(i) {
                    b.set(i, j, C64::new(next(), next()));
                }
            }
            let mut y = vec![ZERO; n];
            b.matvec(&x, &mut y);
            let d = b.to_dense();
            for i in 0..n {
                let v: C64 = (0..n).map(|j| d[(i, j)] * x[j]).sum();
                prop_assert!((v - y[i]).norm() < 1e-14);
            }
        }
    }
}
