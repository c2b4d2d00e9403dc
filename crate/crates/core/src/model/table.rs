use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalyticModel, Channel, PotentialModel, StarkFieldParams};
use crate::error::{Error, Result};

/// Parameters of the long-range continuation beyond the last table row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    pub e1_inf: f64,
    pub delta: f64,
    pub d: f64,
    pub c4: f64,
}

/// Natural cubic spline through `(R, W1, W2)` samples, continued by the
/// long-range tail beyond the last sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedModel {
    pub r: Vec<f64>,
    pub w: [Vec<f64>; 2],
    pub tail: TailParams,
    #[serde(skip)]
    m: [Vec<f64>; 2],
}

const MIN_ROWS: usize = 50;

fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    // Thomas algorithm on the interior equations
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
        c[i] = h1 / diag;
        d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

impl TabulatedModel {
    pub fn new(r: Vec<f64>, w1: Vec<f64>, w2: Vec<f64>, tail: TailParams) -> Result<Self> {
        if r.len() < MIN_ROWS {
            return Err(Error::Table(format!("need at least {MIN_ROWS} rows, got {}", r.len())));
        }
        if w1.len() != r.len() || w2.len() != r.len() {
            return Err(Error::Table("column lengths differ".into()));
        }
        if !(r[0] > 0.0) {
            return Err(Error::Table("R must be positive".into()));
        }
        if let Some(k) = r.windows(2).position(|p| !(p[1] > p[0])) {
            return Err(Error::Table(format!("R is not strictly increasing at row {}", k + 2)));
        }
        if r.iter().chain(&w1).chain(&w2).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite entry".into()));
        }
        let m = [natural_second_derivatives(&r, &w1), natural_second_derivatives(&r, &w2)];
        Ok(Self { r, w: [w1, w2], tail, m })
    }

    /// Reads a CSV file with header `R,W1,W2`.
    pub fn from_csv(path: &Path, tail: TailParams) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != ["R", "W1", "W2"] {
            return Err(Error::Table(format!("expected header R,W1,W2, found {}", header.join(","))));
        }
        let (mut r, mut w1, mut w2) = (vec![], vec![], vec![]);
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Table(format!("row {}: column {} is not a number", k + 2, i + 1)))
            };
            r.push(parse(0)?);
            w1.push(parse(1)?);
            w2.push(parse(2)?);
        }
        Self::new(r, w1, w2, tail)
    }

    /// Tabulates an analytic model, mostly useful for tests and examples.
    pub fn sample(model: &PotentialModel, r0: f64, r1: f64, rows: usize) -> Result<Self> {
        let a: &AnalyticModel = model
            .as_analytic()
            .ok_or_else(|| Error::Table("can only sample the analytic model".into()))?;
        let r: Vec<f64> = (0..rows).map(|k| r0 + (r1 - r0) * k as f64 / (rows - 1) as f64).collect();
        let w1 = r.iter().map(|&x| a.eval(Channel::One, x)).collect();
        let w2 = r.iter().map(|&x| a.eval(Channel::Two, x)).collect();
        let tail = TailParams {
            e1_inf: a.params.e1_inf,
            delta: a.params.delta,
            d: a.field.d,
            c4: a.params.c4,
        };
        Self::new(r, w1, w2, tail)
    }

    fn ensure_spline(&self) -> Option<[Vec<f64>; 2]> {
        if self.m[0].len() == self.r.len() {
            None
        } else {
            Some([
                natural_second_derivatives(&self.r, &self.w[0]),
                natural_second_derivatives(&self.r, &self.w[1]),
            ])
        }
    }

    fn tail_model(&self) -> AnalyticModel {
        // only limit() and tail() are used, the wells are placeholders
        let w = super::MorseWell { depth: 1.0, inv_width: 1.0, center: 2.0 };
        AnalyticModel {
            params: super::PotentialParams {
                e1_inf: self.tail.e1_inf,
                delta: self.tail.delta,
                c4: self.tail.c4,
                well1: w,
                well2: w,
                r_switch: 1.0,
            },
            field: StarkFieldParams { nu: 0.0, d: self.tail.d },
        }
    }

    pub fn limit(&self, ch: Channel) -> f64 {
        self.tail_model().limit(ch)
    }

    fn locate(&self, r: f64) -> usize {
        match self.r.binary_search_by(|p| p.partial_cmp(&r).unwrap()) {
            Ok(k) => k.min(self.r.len() - 2),
            Err(k) => k - 1,
        }
    }

    pub fn eval(&self, ch: Channel, r: f64) -> Result<f64> {
        let n = self.r.len();
        if r < self.r[0] {
            return Err(Error::Domain {
                op: "eval_potential",
                value: r,
                reason: "below the first table sample",
            });
        }
        if r > self.r[n - 1] {
            let t = self.tail_model();
            return Ok(t.limit(ch) + t.tail(ch, r));
        }
        let rebuilt = self.ensure_spline();
        let m = rebuilt.as_ref().unwrap_or(&self.m);
        let j = ch.index();
        let k = self.locate(r);
        let (x0, x1) = (self.r[k], self.r[k + 1]);
        let hk = x1 - x0;
        let a = (x1 - r) / hk;
        let b = (r - x0) / hk;
        let (y0, y1) = (self.w[j][k], self.w[j][k + 1]);
        let (m0, m1) = (m[j][k], m[j][k + 1]);
        Ok(a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * hk * hk / 6.0)
    }

    pub fn deriv(&self, ch: Channel, r: f64) -> Result<f64> {
        let n = self.r.len();
        if r < self.r[0] {
            return Err(Error::Domain {
                op: "eval_potential",
                value: r,
                reason: "below the first table sample",
            });
        }
        if r > self.r[n - 1] {
            let e = 1e-6 * r;
            let t = self.tail_model();
            return Ok((t.tail(ch, r + e) - t.tail(ch, r - e)) / (2.0 * e));
        }
        let rebuilt = self.ensure_spline();
        let m = rebuilt.as_ref().unwrap_or(&self.m);
        let j = ch.index();
        let k = self.locate(r);
        let (x0, x1) = (self.r[k], self.r[k + 1]);
        let hk = x1 - x0;
        let a = (x1 - r) / hk;
        let b = (r - x0) / hk;
        let (y0, y1) = (self.w[j][k], self.w[j][k + 1]);
        let (m0, m1) = (m[j][k], m[j][k + 1]);
        Ok((y1 - y0) / hk + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * hk / 6.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::default_model;

    #[test]
    fn spline_interpolates_samples_and_converges() {
        let m = default_model();
        let t = TabulatedModel::sample(&m, 2.0, 20.0, 600).unwrap();
        for k in 0..t.r.len() {
            assert!((t.eval(Channel::One, t.r[k]).unwrap() - t.w[0][k]).abs() < 1e-9);
        }
        let r = 6.123;
        let err = (t.eval(Channel::Two, r).unwrap() - m.eval(Channel::Two, r).unwrap()).abs();
        assert!(err < 1e-5, "{err}");
        let derr = (t.deriv(Channel::One, r).unwrap() - m.deriv(Channel::One, r).unwrap()).abs();
        assert!(derr < 1e-3, "{derr}");
    }

    #[test]
    fn table_validation() {
        let tail = TailParams { e1_inf: 0.0, delta: 1.0, d: 1.0, c4: 1.0 };
        let r: Vec<f64> = (1..=60).map(|k| k as f64).collect();
        let w = vec![0.0; 60];
        assert!(TabulatedModel::new(r[..40].to_vec(), w[..40].to_vec(), w[..40].to_vec(), tail).is_err());
        let mut bad = r.clone();
        bad[10] = bad[9];
        assert!(TabulatedModel::new(bad, w.clone(), w.clone(), tail).is_err());
        let t = TabulatedModel::new(r, w.clone(), w, tail).unwrap();
        assert!(t.eval(Channel::One, 0.5).is_err());
        let beyond = t.eval(Channel::One, 100.0).unwrap();
        assert!((beyond - (-1.0 + 0.5 / 1e4 - 1.375 / 1e8)).abs() < 1e-15);
    }

    #[test]
    fn reads_csv() {
        let dir = std::env::temp_dir().join(format!("bsr-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.csv");
        let mut s = String::from("R,W1,W2\n");
        for k in 1..=55 {
            let r = k as f64 * 0.2;
            s.push_str(&format!("{r},{},{}\n", -1.0 / r, 1.0 / r));
        }
        std::fs::write(&path, s).unwrap();
        let tail = TailParams { e1_inf: 0.0, delta: 1.0, d: 1.0, c4: 1.0 };
        let t = TabulatedModel::from_csv(&path, tail).unwrap();
        assert_eq!(t.r.len(), 55);
        std::fs::write(&path, "R,W2,W1\n1,2,3\n").unwrap();
        assert!(TabulatedModel::from_csv(&path, tail).is_err());
    }
}
