//! Run configuration: a JSON document whose omitted fields take the shipped
//! defaults. The fully resolved ("effective") configuration is what gets echoed
//! next to every output, and its hash is the run id.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::defaults;
use crate::discretize::CouplingSpec;
use crate::error::{Error, Result};
use crate::model::{
    AnalyticModel, PotentialModel, PotentialParams, RegularizationProfile, StarkFieldParams, TabulatedModel, TailParams,
};
use crate::setup::{MuRule, Problem, ProblemOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Analytic { params: PotentialParams },
    /// Two-column-per-channel CSV (`R,W1,W2`) with the analytic tail used beyond the table.
    Tabulated { path: PathBuf, tail: TailParams },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionConfig {
    pub mu: MuRule,
    pub pair_ratio: f64,
    pub s0: Option<f64>,
    pub s1: Option<f64>,
    pub smooth_order: u8,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self { mu: MuRule::Semiclassical, pair_ratio: defaults::MU_PAIR_RATIO, s0: None, s1: None, smooth_order: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub kappa: f64,
    pub r_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { kappa: defaults::KAPPA, r_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub alpha: f64,
    pub margin_factor: f64,
    pub cap_c: f64,
    pub fill_ramp: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            alpha: defaults::ALPHA,
            margin_factor: defaults::MARGIN_FACTOR,
            cap_c: defaults::CAP_C,
            fill_ramp: defaults::FILL_RAMP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub ladder: Vec<f64>,
    /// Log-spaced `h` samples used to locate avoided crossings.
    pub crossing_samples: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { ladder: defaults::H_LADDER.to_vec(), crossing_samples: 300 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub field: StarkFieldParams,
    pub distortion: DistortionConfig,
    pub regularization: Option<RegularizationProfile>,
    pub grid: GridConfig,
    pub window: WindowConfig,
    pub coupling: Option<CouplingSpec>,
    pub scan: ScanConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::Analytic { params: defaults::default_params() },
            field: defaults::default_field(),
            distortion: DistortionConfig::default(),
            regularization: None,
            grid: GridConfig::default(),
            window: WindowConfig::default(),
            coupling: None,
            scan: ScanConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        // relative table paths are taken relative to the config file
        if let ModelConfig::Tabulated { path: p, .. } = &mut cfg.model {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scan.ladder.is_empty() || self.scan.ladder.iter().any(|&h| !(h > 0.0 && h <= 0.5)) {
            return Err(Error::Config("scan.ladder must be a non-empty list of h in (0, 0.5]".into()));
        }
        if self.scan.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("scan.ladder must be strictly decreasing".into()));
        }
        if self.scan.crossing_samples < 2 {
            return Err(Error::Config("scan.crossing_samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn potential_model(&self) -> Result<PotentialModel> {
        Ok(match &self.model {
            ModelConfig::Analytic { params } => PotentialModel::Analytic(AnalyticModel::new(*params, self.field)?),
            ModelConfig::Tabulated { path, tail } => PotentialModel::Tabulated(TabulatedModel::from_csv(path, *tail)?),
        })
    }

    pub fn problem_options(&self) -> ProblemOptions {
        ProblemOptions {
            alpha: self.window.alpha,
            kappa: self.grid.kappa,
            fill_ramp: self.window.fill_ramp,
            smooth_order: self.distortion.smooth_order,
            s0: self.distortion.s0,
            s1: self.distortion.s1,
            r_max: self.grid.r_max,
            regularization: self.regularization,
            coupling: self.coupling,
            margin_factor: self.window.margin_factor,
            cap_c: self.window.cap_c,
            mu_rule: self.distortion.mu,
            mu_pair_ratio: self.distortion.pair_ratio,
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        self.validate()?;
        Problem::new(self.potential_model()?, &self.problem_options())
    }

    /// The configuration with every derived quantity written out.
    pub fn effective(&self, problem: &Problem) -> Self {
        let l = &problem.layout;
        let mut e = self.clone();
        e.distortion.s0 = Some(l.s0);
        e.distortion.s1 = Some(l.s1);
        e.grid.r_max = Some(l.r_max);
        e.regularization = Some(l.regularization);
        e.coupling = Some(l.coupling);
        e
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn config_hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// First 16 hex digits of [`RunConfig::config_hash`].
    pub fn run_id(&self) -> String {
        self.config_hash()[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"grid": {"kapa": 0.5}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"window": {"alpha": 0.1}, "extra": 1}"#).is_err());
    }

    #[test]
    fn effective_config_round_trips_and_hashes_stably() {
        let cfg = RunConfig::default();
        let p = cfg.problem().unwrap();
        let eff = cfg.effective(&p);
        let back = RunConfig::from_json(&eff.to_json()).unwrap();
        assert_eq!(back, eff);
        assert_eq!(back.run_id(), eff.run_id());
        assert_ne!(eff.run_id(), cfg.run_id());
        // the resolved layout is a fixed point
        let p2 = eff.problem().unwrap();
        assert_eq!(p2.layout, p.layout);
    }

    #[test]
    fn ladder_must_decrease() {
        let cfg = RunConfig::from_json(r#"{"scan": {"ladder": [0.02, 0.03]}}"#).unwrap();
        assert!(cfg.problem().is_err());
    }
}
