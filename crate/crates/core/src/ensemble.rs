//! Scaled symmetric matrix fractional Brownian motion.
//!
//! `B_ij = b_ij` for `i < j`, `B_ii = √2 b_ii`, and `B⁽ⁿ⁾ = B / √n`, with all
//! `n(n+1)/2` entry paths independent fBm drawn jointly on the full grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{fbm_covariance, FbmSampler, HurstParameter, SamplerKind, TimeGrid};
use crate::matrix::SymMatrix;
use crate::rng::{SeedSpec, StreamLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub h: HurstParameter,
    pub grid: TimeGrid,
    pub seed: SeedSpec,
    pub replicas: usize,
    #[serde(default)]
    pub sampler: SamplerKind,
}

impl EnsembleConfig {
    pub fn new(n: usize, h: HurstParameter, grid: TimeGrid, seed: SeedSpec, replicas: usize) -> Result<Self> {
        let cfg = Self { n, h, grid, seed, replicas, sampler: SamplerKind::Auto };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("matrix dimension must be >= 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Domain("replicas must be >= 1".into()));
        }
        if self.replicas > u32::MAX as usize {
            return Err(Error::Domain("too many replicas".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: SeedSpec) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Matrices `B⁽ⁿ⁾(t)` for every grid time of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    pub grid: TimeGrid,
    pub matrices: Vec<SymMatrix>,
}

impl MatrixPath {
    pub fn dim(&self) -> usize {
        self.matrices.first().map_or(0, SymMatrix::dim)
    }

    pub fn at(&self, t: f64) -> Option<&SymMatrix> {
        self.grid.index_of(t).map(|k| &self.matrices[k])
    }
}

/// An ensemble with its entry sampler prepared once and shared by all
/// replicas.
#[derive(Debug, Clone)]
pub struct Ensemble {
    cfg: EnsembleConfig,
    sampler: FbmSampler,
}

impl Ensemble {
    pub fn new(cfg: EnsembleConfig) -> Result<Self> {
        cfg.validate()?;
        let sampler = FbmSampler::new(&cfg.grid, cfg.h, cfg.sampler)?;
        Ok(Self { cfg, sampler })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    /// Generates every grid time of replica `replica`.
    pub fn replica(&self, replica: usize) -> Result<MatrixPath> {
        if replica >= self.cfg.replicas {
            return Err(Error::Domain(format!(
                "replica {replica} out of range (replicas = {})",
                self.cfg.replicas
            )));
        }
        Ok(self.replica_unchecked(replica as u32))
    }

    fn replica_unchecked(&self, replica: u32) -> MatrixPath {
        let n = self.cfg.n;
        let grid = &self.cfg.grid;
        let times = grid.len();
        let off = 1.0 / (n as f64).sqrt();
        let diag = std::f64::consts::SQRT_2 * off;

        let mut matrices = vec![SymMatrix::zeros(n); times];
        let mut buf = vec![0.0; times];
        let mut slot = 0;
        for row in 0..n {
            for col in 0..=row {
                let mut stream = self.cfg.seed.stream(StreamLabel::new(replica, row as u32, col as u32));
                self.sampler.sample_into(&mut stream, &mut buf);
                let scale = if row == col { diag } else { off };
                for (m, v) in matrices.iter_mut().zip(&buf) {
                    m.packed_mut()[slot] = scale * v;
                }
                slot += 1;
            }
        }
        MatrixPath { grid: grid.clone(), matrices }
    }
}

/// Builds replica `replica` of the configured ensemble.
pub fn build_matrix_path(cfg: &EnsembleConfig, replica: usize) -> Result<MatrixPath> {
    Ensemble::new(cfg.clone())?.replica(replica)
}

/// Exact `E[(1/n) tr(B⁽ⁿ⁾(t) B⁽ⁿ⁾(s))] = c(s, t) · (n + 1) / n`.
pub fn expected_trace_covariance(n: usize, h: HurstParameter, s: f64, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("matrix dimension must be >= 1".into()));
    }
    Ok(fbm_covariance(s, t, h)? * finite_size_factor(n))
}

/// `(n + 1) / n`: the diagonal's doubled variance at finite size.
pub fn finite_size_factor(n: usize) -> f64 {
    (n as f64 + 1.0) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, h: f64, points: Vec<f64>, reps: usize) -> EnsembleConfig {
        EnsembleConfig::new(n, HurstParameter::new(h).unwrap(), TimeGrid::new(points).unwrap(), SeedSpec::new(11), reps).unwrap()
    }

    #[test]
    fn zero_start_and_symmetry() {
        let c = cfg(5, 0.7, vec![0.0, 0.25, 0.5, 0.75, 1.0], 3);
        let e = Ensemble::new(c).unwrap();
        for r in 0..3 {
            let p = e.replica(r).unwrap();
            assert!(p.matrices[0].is_zero());
            let d = p.matrices[4].to_dense();
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(d[i * 5 + j], d[j * 5 + i]);
                }
            }
        }
        assert!(e.replica(3).is_err());
    }

    #[test]
    fn config_validation() {
        let h = HurstParameter::new(0.7).unwrap();
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        assert!(EnsembleConfig::new(0, h, g.clone(), SeedSpec::new(0), 1).is_err());
        assert!(EnsembleConfig::new(2, h, g, SeedSpec::new(0), 0).is_err());
    }

    #[test]
    fn n_one_marginal_variance_is_two() {
        let reps = 20_000;
        let e = Ensemble::new(cfg(1, 0.65, vec![0.0, 1.0], reps)).unwrap();
        let xs: Vec<f64> = (0..reps).map(|r| e.replica(r).unwrap().matrices[1][(0, 0)]).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        let se = (xs.iter().map(|x| (x * x - var).powi(2)).sum::<f64>() / reps as f64).sqrt() / (reps as f64).sqrt();
        assert!((var - 2.0).abs() < 3.0 * se, "var {var} se {se}");
    }

    #[test]
    fn expected_trace_covariance_examples() {
        let h = HurstParameter::new(0.7).unwrap();
        for hh in [0.3, 0.6, 0.9] {
            let h = HurstParameter::new(hh).unwrap();
            assert!((expected_trace_covariance(1, h, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
            let big = expected_trace_covariance(1_000_000, h, 1.0, 1.0).unwrap();
            assert!((big - 1.0).abs() < 2e-6);
        }
        let v = expected_trace_covariance(4, h, 1.0, 2.0).unwrap();
        assert!((v - 2f64.powf(0.4) * 1.25).abs() < 1e-12, "{v}");
        assert!((v - 1.64939).abs() < 1e-5);
        assert!(expected_trace_covariance(4, h, -1.0, 2.0).is_err());
    }

    #[test]
    fn expected_trace_covariance_matches_entrywise_expansion() {
        // brute force: Σ_ij E[B_ij(t) B_ji(s)] / n with the per-entry variances
        let h = HurstParameter::new(0.62).unwrap();
        for n in [1usize, 2, 5, 9] {
            let (s, t) = (0.4, 1.3);
            let c = fbm_covariance(s, t, h).unwrap();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let scale = if i == j { 2.0 } else { 1.0 };
                    total += scale * c / n as f64;
                }
            }
            total /= n as f64;
            assert!((expected_trace_covariance(n, h, s, t).unwrap() - total).abs() < 1e-13);
        }
    }
}
