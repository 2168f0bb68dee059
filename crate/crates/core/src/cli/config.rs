//! Run configuration: JSON schema, validation and canonical digest.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::EnsembleConfig;
use crate::evolution::TestFunction;
use crate::fgn::{HurstParameter, SamplerKind, TimeGrid};
use crate::rng::SeedSpec;
use crate::stats::Thresholds;

use super::CliError;

/// Time grid specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Uniform { t_max: f64, steps: usize },
    Points(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Uniform { t_max: 1.0, steps: 64 }
    }
}

impl GridSpec {
    pub fn build(&self) -> crate::Result<TimeGrid> {
        match self {
            Self::Uniform { t_max, steps } => TimeGrid::uniform(*t_max, *steps),
            Self::Points(p) => TimeGrid::new(p.clone()),
        }
    }
}

/// What `sample` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    #[default]
    Eigenvalues,
    Matrix,
    Fbm,
}

/// Output table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Semicircle,
    Covariance,
    Moments,
    Transform,
    Repulsion,
    Selfsim,
    Holder,
    Residual,
    Identity,
    Lincomb,
    All,
}

impl Suite {
    pub const EACH: [Suite; 10] = [
        Suite::Semicircle,
        Suite::Covariance,
        Suite::Moments,
        Suite::Transform,
        Suite::Repulsion,
        Suite::Selfsim,
        Suite::Holder,
        Suite::Residual,
        Suite::Identity,
        Suite::Lincomb,
    ];

    /// Whether the suite draws random samples.
    pub fn samples(self) -> bool {
        !matches!(self, Suite::Moments | Suite::Transform | Suite::Identity)
    }

    pub fn expand(suites: &[Suite]) -> Vec<Suite> {
        let mut out: Vec<Suite> = if suites.contains(&Suite::All) {
            Self::EACH.to_vec()
        } else {
            suites.to_vec()
        };
        out.sort();
        out.dedup();
        out
    }
}

/// Parameters of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub suites: Vec<Suite>,
    /// Times of the semicircle, moment, transform and repulsion checks.
    pub times: Vec<f64>,
    /// `(s, t)` pairs of the covariance check.
    pub pairs: Vec<(f64, f64)>,
    /// Hurst values of the analytic moment check (defaults to `hurst`).
    pub moment_hursts: Vec<f64>,
    pub moment_order: usize,
    pub rk_step: f64,
    pub p: f64,
    pub bulk_fraction: f64,
    pub selfsim_times: Vec<f64>,
    pub test_functions: Vec<TestFunction>,
    /// Dimensions of the residual check.
    pub residual_n: Vec<usize>,
    pub lincomb_times: Vec<f64>,
    pub lincomb_coeffs: Vec<f64>,
    pub identity_sizes: Vec<usize>,
    pub identity_count: usize,
    pub thresholds: Thresholds,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            suites: vec![Suite::All],
            times: vec![0.5, 1.0, 2.0],
            pairs: vec![(1.0, 1.0), (1.0, 2.0), (0.5, 2.0)],
            moment_hursts: Vec::new(),
            moment_order: 8,
            rk_step: 1e-3,
            p: 1.5,
            bulk_fraction: 0.5,
            selfsim_times: vec![2.0],
            test_functions: vec![TestFunction::Square],
            residual_n: vec![10, 30, 90],
            lincomb_times: vec![1.0, 2.0],
            lincomb_coeffs: vec![1.0, -1.0],
            identity_sizes: (2..=10).collect(),
            identity_count: 20,
            thresholds: Thresholds::default(),
        }
    }
}

/// Full run configuration. Every run writes its resolved copy as
/// `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub hurst: f64,
    pub n: Vec<usize>,
    pub grid: GridSpec,
    pub replicas: usize,
    pub sampler: SamplerKind,
    pub out: PathBuf,
    pub format: Format,
    pub sample: SampleKind,
    pub verify: VerifyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            hurst: 0.7,
            n: vec![50],
            grid: GridSpec::default(),
            replicas: 50,
            sampler: SamplerKind::Auto,
            out: PathBuf::from("ncfbm-out"),
            format: Format::Csv,
            sample: SampleKind::Eigenvalues,
            verify: VerifyParams::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn hurst(&self) -> Result<HurstParameter, CliError> {
        HurstParameter::new(self.hurst).map_err(|e| invalid(e.to_string()))
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        self.grid.build().map_err(|e| invalid(e.to_string()))
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.seed)
    }

    /// Ensemble configuration for dimension `n`.
    pub fn ensemble(&self, n: usize) -> Result<EnsembleConfig, CliError> {
        let mut cfg = EnsembleConfig::new(n, self.hurst()?, self.time_grid()?, self.seed_spec(), self.replicas)
            .map_err(|e| invalid(e.to_string()))?;
        cfg.sampler = self.sampler;
        Ok(cfg)
    }

    /// Checks that need no sampling: ranges, list shapes and suite needs.
    pub fn validate(&self, sampling: bool) -> Result<(), CliError> {
        self.hurst()?;
        self.time_grid()?;
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(invalid("n must be a non-empty list of positive dimensions"));
        }
        if sampling && self.replicas == 0 {
            return Err(invalid("replicas must be >= 1 for sampling runs"));
        }
        let v = &self.verify;
        let positive = |name: &str, xs: &[f64]| {
            if xs.iter().all(|&x| x.is_finite() && x > 0.0) {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive")))
            }
        };
        positive("verify.times", &v.times)?;
        positive("verify.selfsim_times", &v.selfsim_times)?;
        positive("verify.lincomb_times", &v.lincomb_times)?;
        positive("verify.pairs", &v.pairs.iter().flat_map(|&(s, t)| [s, t]).collect::<Vec<_>>())?;
        for &h in &v.moment_hursts {
            HurstParameter::new(h).map_err(|e| invalid(e.to_string()))?;
        }
        if !(v.p > 1.0 && v.p < 2.0) {
            return Err(invalid("verify.p must lie in (1, 2)"));
        }
        if !(v.bulk_fraction > 0.0 && v.bulk_fraction <= 1.0) {
            return Err(invalid("verify.bulk_fraction must lie in (0, 1]"));
        }
        if !(v.rk_step > 0.0) {
            return Err(invalid("verify.rk_step must be positive"));
        }
        if v.lincomb_times.len() != v.lincomb_coeffs.len() || v.lincomb_times.is_empty() {
            return Err(invalid("verify.lincomb_times and lincomb_coeffs must have equal, non-zero length"));
        }
        if v.residual_n.contains(&0) || v.identity_sizes.contains(&0) {
            return Err(invalid("dimensions must be positive"));
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys, no whitespace).
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn digest(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_and_digest_is_stable() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
        let other = RunConfig { seed: 1, ..cfg.clone() };
        assert_ne!(other.digest(), cfg.digest());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"seed": 1, "bogus": 2}"#), Err(CliError::Config(_))));
        assert!(RunConfig::from_json(r#"{"verify": {"nope": 1}}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"seed": 3, "grid": {"points": [0, 0.5, 1]}, "n": [2, 4]}"#).unwrap();
        assert_eq!(cfg.time_grid().unwrap().len(), 3);
        assert_eq!(cfg.replicas, 50);
    }

    #[test]
    fn validation() {
        let ok = RunConfig::default();
        assert!(ok.validate(true).is_ok());
        assert!(RunConfig { hurst: 1.0, ..ok.clone() }.validate(false).is_err());
        assert!(RunConfig { n: vec![], ..ok.clone() }.validate(false).is_err());
        assert!(RunConfig { replicas: 0, ..ok.clone() }.validate(true).is_err());
        assert!(RunConfig { replicas: 0, ..ok.clone() }.validate(false).is_ok());
        let bad_grid = RunConfig { grid: GridSpec::Points(vec![0.0, 0.0]), ..ok.clone() };
        assert!(bad_grid.validate(false).is_err());
        let mut bad_p = ok.clone();
        bad_p.verify.p = 2.0;
        assert!(bad_p.validate(false).is_err());
    }

    #[test]
    fn suite_expansion() {
        assert_eq!(Suite::expand(&[Suite::All]).len(), 10);
        assert_eq!(Suite::expand(&[Suite::Moments, Suite::Moments]), vec![Suite::Moments]);
        assert!(!Suite::Identity.samples());
        assert!(Suite::Residual.samples());
    }
}
