//! Monte Carlo estimators and statistical tests that compare finite-`n`
//! simulations with the semicircle limit.
//!
//! All estimators fan out over replicas with rayon, collect per-replica
//! values in replica order and reduce sequentially, so results do not
//! depend on the worker count.

pub mod ks;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ensemble::{expected_trace_covariance, Ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::evolution::{mean_se, TestFunction};
use crate::fgn::{fgn_autocovariance, CholeskySampler, CirculantSampler, HurstParameter, TimeGrid};
use crate::limitlaw::{ncfbm_covariance, SemicircleLaw};
use crate::matrix::SymMatrix;
use crate::rng::{SeedSpec, StreamLabel};
use crate::spectral::eigen::symmetric_eigenvalues;
use crate::spectral::{decompose, eig_gradient, gradient_norm_sq, EmpiricalMeasure, SpectrumPath};

pub use ks::{ks_distance, ks_two_sample};

/// Pass/fail thresholds of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Significance level of hypothesis tests.
    pub level: f64,
    /// z-score bound for estimator-vs-exact comparisons.
    pub z_max: f64,
    /// z-score bound for sampler autocovariances.
    pub z_autocovariance: f64,
    /// Frozen KS threshold for empirical spectra against the semicircle.
    pub ks_semicircle: f64,
    pub holder_slack_below: f64,
    pub holder_slack_above: f64,
    pub repulsion_max_ratio: f64,
    /// Allowed deviation of the repulsion time-slope, relative to `pH`.
    pub repulsion_slope_rel: f64,
    pub hoffman_wielandt_rel: f64,
    pub identity_tol: f64,
    pub moments_rel: f64,
    pub transform_abs: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            level: 0.01,
            z_max: 3.0,
            z_autocovariance: 4.0,
            ks_semicircle: 0.08,
            holder_slack_below: 0.4,
            holder_slack_above: 0.6,
            repulsion_max_ratio: 3.0,
            repulsion_slope_rel: 0.15,
            hoffman_wielandt_rel: 1e-9,
            identity_tol: 1e-10,
            moments_rel: 1e-6,
            transform_abs: 1e-8,
        }
    }
}

/// Outcome of one statistical or analytic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub statistics: BTreeMap<String, f64>,
    pub standard_errors: BTreeMap<String, f64>,
    /// The primary statistic compared against `threshold`.
    pub statistic: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// How `statistic` is compared with `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    AtLeast,
}

impl Comparison {
    pub fn holds(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Self::Below => statistic < threshold,
            Self::AtLeast => statistic >= threshold,
        }
    }
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, comparison: Comparison) -> Self {
        Self {
            name: name.into(),
            parameters: BTreeMap::new(),
            statistics: BTreeMap::new(),
            standard_errors: BTreeMap::new(),
            statistic,
            threshold,
            comparison,
            pass: comparison.holds(statistic, threshold),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn stat(mut self, key: &str, value: f64) -> Self {
        self.statistics.insert(key.to_string(), value);
        self
    }

    pub fn se(mut self, key: &str, value: f64) -> Self {
        self.standard_errors.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    fn with_config(self, cfg: &EnsembleConfig) -> Self {
        self.param("n", cfg.n)
            .param("h", cfg.h.value())
            .param("replicas", cfg.replicas)
            .param("seed", cfg.seed.master_seed)
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Runs `f` on every replica in parallel, returning results in replica order.
fn per_replica<T, F>(ens: &Ensemble, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Ensemble) -> Result<T> + Sync,
{
    (0..ens.config().replicas).into_par_iter().map(|r| f(r, ens)).collect()
}

fn grid_with(times: &[f64]) -> Result<TimeGrid> {
    let mut pts: Vec<f64> = std::iter::once(0.0).chain(times.iter().copied()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    TimeGrid::new(pts)
}

fn require_index(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.index_of(t).ok_or_else(|| Error::Domain(format!("time {t} is not on the grid")))
}

/// Per-replica KS distances between the spectrum at each of `times` and the
/// semicircle of variance `t^{2H}`.
pub fn semicircle_ks_distances(cfg: &EnsembleConfig, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let ens = Ensemble::new(EnsembleConfig { grid: grid_with(times)?, ..cfg.clone() })?;
    let idx: Vec<usize> = times.iter().map(|&t| require_index(&ens.config().grid, t)).collect::<Result<_>>()?;
    let laws: Vec<SemicircleLaw> = times.iter().map(|&t| SemicircleLaw::at_time(t, cfg.h)).collect::<Result<_>>()?;
    let per: Vec<Vec<f64>> = per_replica(&ens, |r, ens| {
        let path = ens.replica(r)?;
        idx.iter()
            .zip(&laws)
            .map(|(&k, law)| {
                let ev = symmetric_eigenvalues(&path.matrices[k].to_dense(), path.dim())?;
                ks_distance(&EmpiricalMeasure::new(ev), law)
            })
            .collect()
    })?;
    Ok((0..times.len()).map(|j| per.iter().map(|row| row[j]).collect()).collect())
}

/// Median of [`semicircle_ks_distances`] per time.
pub fn semicircle_ks_medians(cfg: &EnsembleConfig, times: &[f64]) -> Result<Vec<f64>> {
    Ok(semicircle_ks_distances(cfg, times)?.iter().map(|d| median(d)).collect())
}

/// Replica mean and standard error of `(1/n) tr(B⁽ⁿ⁾(t) B⁽ⁿ⁾(s))`.
pub fn trace_covariance_estimator(cfg: &EnsembleConfig, s: f64, t: f64) -> Result<(f64, f64)> {
    let ens = Ensemble::new(EnsembleConfig { grid: grid_with(&[s, t])?, ..cfg.clone() })?;
    let (is, it) = (require_index(&ens.config().grid, s)?, require_index(&ens.config().grid, t)?);
    let n = cfg.n as f64;
    let vals = per_replica(&ens, |r, ens| {
        let p = ens.replica(r)?;
        Ok(p.matrices[it].trace_product(&p.matrices[is]) / n)
    })?;
    Ok(mean_se(&vals))
}

/// Compares [`trace_covariance_estimator`] with the exact finite-`n` value
/// for each `(s, t)` pair.
pub fn trace_covariance_test(cfg: &EnsembleConfig, pairs: &[(f64, f64)], th: &Thresholds) -> Result<TestReport> {
    let mut worst: f64 = 0.0;
    let mut stats = Vec::new();
    for (k, &(s, t)) in pairs.iter().enumerate() {
        let sub = cfg.with_seed(cfg.seed.derive(k as u64));
        let (est, se) = trace_covariance_estimator(&sub, s, t)?;
        let exact = expected_trace_covariance(cfg.n, cfg.h, s, t)?;
        let z = (est - exact) / se;
        worst = worst.max(z.abs());
        stats.push((s, t, est, se, exact, z));
    }
    let mut rep = TestReport::new("covariance", worst, th.z_max, Comparison::Below)
        .with_config(cfg)
        .param("pairs", pairs);
    for (s, t, est, se, exact, z) in stats {
        let key = format!("s={s},t={t}");
        rep = rep
            .stat(&format!("{key}:estimate"), est)
            .stat(&format!("{key}:exact"), exact)
            .stat(&format!("{key}:z"), z)
            .se(&format!("{key}:estimate"), se);
    }
    // `pass` must be ≤: the z bound is inclusive
    rep.pass = worst <= th.z_max;
    Ok(rep)
}

/// Result of [`repulsion_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsionEstimate {
    /// `n^{2−p} · mean(spacing^{−p})`.
    pub scaled: f64,
    pub se: f64,
    /// Unscaled `mean(spacing^{−p})`.
    pub raw: f64,
    /// Zero spacings excluded from the average.
    pub excluded: usize,
}

/// Bulk spacing indices `[lo, hi)` among the `n − 1` consecutive gaps.
fn bulk_range(n: usize, bulk_fraction: f64) -> (usize, usize) {
    let gaps = n - 1;
    let lo = ((1.0 - bulk_fraction) / 2.0 * gaps as f64).floor() as usize;
    let hi = (((1.0 + bulk_fraction) / 2.0 * gaps as f64).ceil() as usize).min(gaps);
    (lo, hi.max(lo + 1))
}

/// `n^{2−p} E[|λ_i − λ_{i+1}|^{−p}]` averaged over the bulk gaps at time `t`.
pub fn repulsion_moment(cfg: &EnsembleConfig, p: f64, t: f64, bulk_fraction: f64) -> Result<RepulsionEstimate> {
    Ok(repulsion_moments(cfg, p, &[t], bulk_fraction)?[0])
}

/// [`repulsion_moment`] at several times from the same replica paths.
pub fn repulsion_moments(cfg: &EnsembleConfig, p: f64, times: &[f64], bulk_fraction: f64) -> Result<Vec<RepulsionEstimate>> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::Domain(format!("repulsion exponent {p} outside (1, 2)")));
    }
    if !(bulk_fraction > 0.0 && bulk_fraction <= 1.0) {
        return Err(Error::Domain(format!("bulk fraction {bulk_fraction} outside (0, 1]")));
    }
    if cfg.n < 2 {
        return Err(Error::UndefinedSpacing);
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("repulsion times must be positive".into()));
    }
    let ens = Ensemble::new(EnsembleConfig { grid: grid_with(times)?, ..cfg.clone() })?;
    let idx: Vec<usize> = times.iter().map(|&t| require_index(&ens.config().grid, t)).collect::<Result<_>>()?;
    let (lo, hi) = bulk_range(cfg.n, bulk_fraction);
    let per: Vec<Vec<(f64, usize)>> = per_replica(&ens, |r, ens| {
        let path = ens.replica(r)?;
        idx.iter()
            .map(|&k| {
                let ev = symmetric_eigenvalues(&path.matrices[k].to_dense(), path.dim())?;
                let mut sum = 0.0;
                let mut used = 0usize;
                let mut zero = 0usize;
                for i in lo..hi {
                    let gap = ev[i + 1] - ev[i];
                    if gap > 0.0 {
                        sum += gap.powf(-p);
                        used += 1;
                    } else {
                        zero += 1;
                    }
                }
                Ok((if used > 0 { sum / used as f64 } else { f64::NAN }, zero))
            })
            .collect()
    })?;
    let scale = (cfg.n as f64).powf(2.0 - p);
    Ok((0..times.len())
        .map(|j| {
            let vals: Vec<f64> = per.iter().map(|row| row[j].0).filter(|v| v.is_finite()).collect();
            let excluded = per.iter().map(|row| row[j].1).sum();
            let (raw, se) = mean_se(&vals);
            RepulsionEstimate { scaled: scale * raw, se: scale * se, raw, excluded }
        })
        .collect())
}

/// Repulsion scaling check: boundedness of the scaled estimate across `ns`
/// at time 1, and the `t^{−pH}` law across `times` at dimension `n_time`.
pub fn repulsion_test(
    cfg: &EnsembleConfig,
    p: f64,
    ns: &[usize],
    n_time: usize,
    times: &[f64],
    bulk_fraction: f64,
    th: &Thresholds,
) -> Result<TestReport> {
    let mut scaled = Vec::new();
    let mut rep_stats = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let sub = EnsembleConfig { n, seed: cfg.seed.derive(100 + k as u64), ..cfg.clone() };
        let est = repulsion_moment(&sub, p, 1.0, bulk_fraction)?;
        scaled.push(est.scaled);
        rep_stats.push((n, est));
    }
    let ratio = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);

    let sub = EnsembleConfig { n: n_time, seed: cfg.seed.derive(200), ..cfg.clone() };
    let over_time = repulsion_moments(&sub, p, times, bulk_fraction)?;
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = over_time.iter().map(|e| e.raw.ln()).collect();
    let slope = regression_slope(&xs, &ys);
    let ph = p * cfg.h.value();
    let slope_dev = (slope + ph).abs();
    let slope_ok = slope_dev <= th.repulsion_slope_rel * ph;
    let ratio_ok = ratio < th.repulsion_max_ratio;

    let mut rep = TestReport::new("repulsion", ratio, th.repulsion_max_ratio, Comparison::Below)
        .with_config(cfg)
        .param("p", p)
        .param("ns", ns)
        .param("n_time", n_time)
        .param("times", times)
        .param("bulk_fraction", bulk_fraction)
        .stat("n_ratio", ratio)
        .stat("t_slope", slope)
        .stat("t_slope_expected", -ph)
        .stat("t_slope_tolerance", th.repulsion_slope_rel * ph);
    for (n, est) in rep_stats {
        rep = rep.stat(&format!("scaled:n={n}"), est.scaled).se(&format!("scaled:n={n}"), est.se);
    }
    for (t, est) in times.iter().zip(&over_time) {
        rep = rep.stat(&format!("raw:t={t}"), est.raw).se(&format!("raw:t={t}"), est.se);
    }
    if !slope_ok {
        rep = rep.note(format!("time slope {slope:.4} deviates from {:.4} by {slope_dev:.4}", -ph));
    }
    rep.pass = ratio_ok && slope_ok;
    Ok(rep)
}

/// Two-sample KS between pooled `λ(t)` and pooled `t^H λ(1)` from
/// independent replica sets.
pub fn self_similarity_test(cfg: &EnsembleConfig, t: f64, th: &Thresholds) -> Result<TestReport> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time {t} must be positive")));
    }
    let pooled = |grid_t: f64, seed: SeedSpec, scale: f64| -> Result<Vec<f64>> {
        let ens = Ensemble::new(EnsembleConfig { grid: TimeGrid::new(vec![0.0, grid_t])?, seed, ..cfg.clone() })?;
        let per = per_replica(&ens, |r, ens| {
            let p = ens.replica(r)?;
            symmetric_eigenvalues(&p.matrices[1].to_dense(), p.dim())
        })?;
        Ok(per.into_iter().flatten().map(|x| scale * x).collect())
    };
    let direct = pooled(t, cfg.seed.derive(1), 1.0)?;
    let scaled = pooled(1.0, cfg.seed.derive(2), t.powf(cfg.h.value()))?;
    let (d, pval) = ks_two_sample(&direct, &scaled)?;
    Ok(TestReport::new("selfsim", pval, th.level, Comparison::AtLeast)
        .with_config(cfg)
        .param("t", t)
        .stat("ks_statistic", d)
        .stat("p_value", pval)
        .stat("pooled_size", direct.len() as f64))
}

/// Result of the increment-moment regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Slope of `log E|Δ⟨μ, f⟩|⁴` against `log Δt`; `None` when all
    /// increments vanish.
    pub slope: Option<f64>,
}

/// Fourth moments of `⟨μ_{t+Δ}, f⟩ − ⟨μ_t, f⟩` over the dyadic lags
/// `Δ ∈ {2⁻⁶, …, 2⁻²}·T` (those representable on the grid), averaged over
/// all start times of the uniform grid and over replicas.
pub fn holder_increment_moments(cfg: &EnsembleConfig, f: TestFunction) -> Result<HolderEstimate> {
    let dt = cfg
        .grid
        .uniform_step()
        .ok_or_else(|| Error::Resolution("increment test needs a uniform grid from 0".into()))?;
    let steps = cfg.grid.len() - 1;
    let lag_steps: Vec<usize> = (2..=6)
        .rev()
        .filter(|&j| steps % (1 << j) == 0)
        .map(|j| steps >> j)
        .collect();
    if lag_steps.len() < 4 {
        return Err(Error::Resolution(format!(
            "only {} dyadic lags representable on {steps} steps (need 4)",
            lag_steps.len()
        )));
    }
    let ens = Ensemble::new(cfg.clone())?;
    let per: Vec<Vec<f64>> = per_replica(&ens, |r, ens| {
        let p = ens.replica(r)?;
        let pairing: Vec<f64> = p
            .matrices
            .iter()
            .map(|m| Ok(EmpiricalMeasure::new(symmetric_eigenvalues(&m.to_dense(), m.dim())?).integrate(|x| f.value(x))))
            .collect::<Result<_>>()?;
        Ok(lag_steps
            .iter()
            .map(|&l| {
                let count = pairing.len() - l;
                (0..count).map(|k| (pairing[k + l] - pairing[k]).powi(4)).sum::<f64>() / count as f64
            })
            .collect())
    })?;
    let mut moments = Vec::new();
    let mut ses = Vec::new();
    for j in 0..lag_steps.len() {
        let vals: Vec<f64> = per.iter().map(|row| row[j]).collect();
        let (m, s) = mean_se(&vals);
        moments.push(m);
        ses.push(s);
    }
    let lags: Vec<f64> = lag_steps.iter().map(|&l| l as f64 * dt).collect();
    let slope = if moments.iter().all(|&m| m > 0.0) {
        let xs: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
        let ys: Vec<f64> = moments.iter().map(|m| m.ln()).collect();
        Some(regression_slope(&xs, &ys))
    } else {
        None
    };
    Ok(HolderEstimate { lags, moments, standard_errors: ses, slope })
}

/// Checks that the fourth increment moment scales like `Δt^{4H}`: the
/// fitted slope must lie in `[4H − slack_below, 4H + slack_above]`.
/// All-zero increments pass as degenerate.
pub fn holder_moment_test(cfg: &EnsembleConfig, f: TestFunction, th: &Thresholds) -> Result<TestReport> {
    let est = holder_increment_moments(cfg, f)?;
    let target = 4.0 * cfg.h.value();
    let (floor, ceil) = (target - th.holder_slack_below, target + th.holder_slack_above);
    let mut rep = match est.slope {
        Some(slope) => {
            let mut r = TestReport::new("holder", slope, floor, Comparison::AtLeast).stat("slope", slope);
            r.pass = slope >= floor && slope <= ceil;
            r
        }
        None => {
            let mut r = TestReport::new("holder", f64::INFINITY, floor, Comparison::AtLeast).note("degenerate: all increments are zero");
            r.pass = true;
            r
        }
    };
    rep = rep
        .with_config(cfg)
        .param("f", f.tag())
        .param("lags", &est.lags)
        .stat("target_4h", target)
        .stat("slope_upper", ceil);
    for (l, (m, s)) in est.lags.iter().zip(est.moments.iter().zip(&est.standard_errors)) {
        rep = rep.stat(&format!("moment:lag={l}"), *m).se(&format!("moment:lag={l}"), *s);
    }
    Ok(rep)
}

/// KS test of the spectrum of `Σ_i c_i B⁽ⁿ⁾(t_i)` against the semicircle of
/// variance `Σ_{ij} c_i c_j c(t_i, t_j)`; the statistic is the replica
/// median of the KS distance.
pub fn linear_combination_test(cfg: &EnsembleConfig, times: &[f64], coeffs: &[f64], th: &Thresholds) -> Result<TestReport> {
    let ds = linear_combination_ks(cfg, times, coeffs)?;
    let stat = median(&ds.distances);
    Ok(TestReport::new("lincomb", stat, th.ks_semicircle, Comparison::Below)
        .with_config(cfg)
        .param("times", times)
        .param("coeffs", coeffs)
        .stat("variance", ds.variance)
        .stat("median_ks", stat)
        .stat("max_ks", ds.distances.iter().cloned().fold(0.0, f64::max)))
}

/// Per-replica KS distances of a linear combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationKs {
    pub variance: f64,
    pub distances: Vec<f64>,
}

pub fn linear_combination_ks(cfg: &EnsembleConfig, times: &[f64], coeffs: &[f64]) -> Result<CombinationKs> {
    if times.len() != coeffs.len() || times.is_empty() {
        return Err(Error::Domain("times and coeffs must be non-empty and of equal length".into()));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Domain("combination times must be positive".into()));
    }
    let mut variance = 0.0;
    for (ti, ci) in times.iter().zip(coeffs) {
        for (tj, cj) in times.iter().zip(coeffs) {
            variance += ci * cj * ncfbm_covariance(*ti, *tj, cfg.h)?;
        }
    }
    if !(variance > 1e-12) {
        return Err(Error::DegenerateCombination(variance));
    }
    let law = SemicircleLaw::new(variance)?;
    let ens = Ensemble::new(EnsembleConfig { grid: grid_with(times)?, ..cfg.clone() })?;
    let idx: Vec<usize> = times.iter().map(|&t| require_index(&ens.config().grid, t)).collect::<Result<_>>()?;
    let distances = per_replica(&ens, |r, ens| {
        let p = ens.replica(r)?;
        let terms: Vec<(f64, &SymMatrix)> = coeffs.iter().zip(&idx).map(|(&c, &k)| (c, &p.matrices[k])).collect();
        let x = SymMatrix::linear_combination(&terms);
        ks_distance(&EmpiricalMeasure::new(symmetric_eigenvalues(&x.to_dense(), x.dim())?), &law)
    })?;
    Ok(CombinationKs { variance, distances })
}

/// The one-time Wigner check: a linear combination with a single unit
/// coefficient.
pub fn semicircle_test(cfg: &EnsembleConfig, t: f64, th: &Thresholds) -> Result<TestReport> {
    let mut rep = linear_combination_test(cfg, &[t], &[1.0], th)?;
    rep.name = "semicircle".into();
    Ok(rep)
}

/// Sorted-order Hoffman–Wielandt over every pair of grid times of every
/// replica.
pub fn hoffman_wielandt_test(cfg: &EnsembleConfig, th: &Thresholds) -> Result<TestReport> {
    let ens = Ensemble::new(cfg.clone())?;
    let per: Vec<(usize, usize, f64)> = per_replica(&ens, |r, ens| {
        let path = ens.replica(r)?;
        let spec = SpectrumPath::from_path_serial(&path, false)?;
        let mut pairs = 0;
        let mut violations = 0;
        let mut worst: f64 = f64::NEG_INFINITY;
        let k = path.grid.len();
        for a in 0..k {
            for b in (a + 1)..k {
                let lhs = crate::spectral::eigenvalue_distance_sq(&spec.eigenvalues[a], &spec.eigenvalues[b]);
                let rhs = path.matrices[b].sub(&path.matrices[a]).frobenius_norm_sq();
                pairs += 1;
                if lhs > rhs + th.hoffman_wielandt_rel * rhs {
                    violations += 1;
                }
                if rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                }
            }
        }
        Ok((pairs, violations, worst))
    })?;
    let pairs: usize = per.iter().map(|x| x.0).sum();
    let violations: usize = per.iter().map(|x| x.1).sum();
    let worst = per.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max);
    Ok(TestReport::new("hoffman_wielandt", violations as f64, 1.0, Comparison::Below)
        .with_config(cfg)
        .stat("pairs", pairs as f64)
        .stat("violations", violations as f64)
        .stat("max_lhs_over_rhs", worst))
}

/// Random symmetric test matrix with standard normal entries.
pub fn random_symmetric(n: usize, seed: SeedSpec, index: u32) -> SymMatrix {
    let mut m = SymMatrix::zeros(n);
    let mut s = seed.stream(StreamLabel::scalar(index));
    for v in m.packed_mut() {
        *v = s.next_normal();
    }
    m
}

/// Checks `Σ_{k≤h} (∂λ_i/∂b_kh)² = 2` for every eigenvalue of `count` random
/// matrices of each size, plus a central-difference check of the gradient.
pub fn gradient_identity_test(sizes: &[usize], count: usize, seed: SeedSpec, th: &Thresholds) -> Result<TestReport> {
    let mut worst_identity: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut index = 0u32;
    for &n in sizes {
        for _ in 0..count {
            let a = random_symmetric(n, seed, index);
            index += 1;
            let dec = decompose(&a, true)?;
            for i in 0..n {
                let g = eig_gradient(&dec, i)?;
                worst_identity = worst_identity.max((gradient_norm_sq(&g) - 2.0).abs());
            }
            worst_fd = worst_fd.max(gradient_fd_error(&a, &dec)?);
        }
    }
    let mut rep = TestReport::new("identity", worst_identity, th.identity_tol, Comparison::Below)
        .param("sizes", sizes)
        .param("count", count)
        .param("seed", seed.master_seed)
        .stat("max_identity_error", worst_identity)
        .stat("max_finite_difference_error", worst_fd)
        .stat("finite_difference_tolerance", 1e-5);
    rep.pass = worst_identity < th.identity_tol && worst_fd < 1e-5;
    Ok(rep)
}

/// Largest deviation between `eig_gradient` and central differences of the
/// eigenvalues with step `1e-6 ‖A‖_F`.
pub fn gradient_fd_error(a: &SymMatrix, dec: &crate::spectral::SymmetricEigen) -> Result<f64> {
    let n = a.dim();
    let step = 1e-6 * a.frobenius_norm();
    let mut worst: f64 = 0.0;
    let grads: Vec<Vec<f64>> = (0..n).map(|i| eig_gradient(dec, i)).collect::<Result<_>>()?;
    for h in 0..n {
        for k in 0..=h {
            let w = if h == k { std::f64::consts::SQRT_2 } else { 1.0 };
            let mut plus = a.clone();
            plus[(h, k)] += w * step;
            let mut minus = a.clone();
            minus[(h, k)] -= w * step;
            let lp = symmetric_eigenvalues(&plus.to_dense(), n)?;
            let lm = symmetric_eigenvalues(&minus.to_dense(), n)?;
            let slot = crate::matrix::packed_index(h, k);
            for i in 0..n {
                let fd = (lp[i] - lm[i]) / (2.0 * step);
                worst = worst.max((fd - grads[i][slot]).abs());
            }
        }
    }
    Ok(worst)
}

/// Sample autocovariances of circulant fGn at lags `0..=max_lag` compared
/// with the exact values, in units of standard error.
pub fn fgn_autocovariance_test(
    h: HurstParameter,
    steps: usize,
    paths: usize,
    max_lag: usize,
    seed: SeedSpec,
    th: &Thresholds,
) -> Result<TestReport> {
    if max_lag >= steps {
        return Err(Error::Domain("max lag must be below the path length".into()));
    }
    let dt = 1.0 / steps as f64;
    let sampler = CirculantSampler::new(steps, dt, h)?;
    let per: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|r| {
            let mut x = vec![0.0; steps];
            sampler.sample_increments(&mut seed.stream(StreamLabel::scalar(r as u32)), &mut x);
            (0..=max_lag)
                .map(|k| (0..steps - k).map(|i| x[i] * x[i + k]).sum::<f64>() / (steps - k) as f64)
                .collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut rep_stats = Vec::new();
    for k in 0..=max_lag {
        let vals: Vec<f64> = per.iter().map(|row| row[k]).collect();
        let (m, se) = mean_se(&vals);
        let exact = fgn_autocovariance(k, dt, h)?;
        let z = (m - exact) / se;
        worst = worst.max(z.abs());
        rep_stats.push((k, m, se, exact, z));
    }
    let mut rep = TestReport::new("fgn_autocovariance", worst, th.z_autocovariance, Comparison::Below)
        .param("h", h.value())
        .param("steps", steps)
        .param("paths", paths)
        .param("seed", seed.master_seed);
    for (k, m, se, exact, z) in rep_stats {
        rep = rep
            .stat(&format!("lag{k}:estimate"), m)
            .stat(&format!("lag{k}:exact"), exact)
            .stat(&format!("lag{k}:z"), z)
            .se(&format!("lag{k}:estimate"), se);
    }
    rep.pass = worst <= th.z_autocovariance;
    Ok(rep)
}

/// Two-sample KS between the final values of Cholesky and circulant fBm
/// paths on the same uniform grid.
pub fn sampler_equivalence_test(h: HurstParameter, steps: usize, paths: usize, seed: SeedSpec, th: &Thresholds) -> Result<TestReport> {
    let grid = TimeGrid::uniform(1.0, steps)?;
    let chol = CholeskySampler::new(&grid, h)?;
    let circ = CirculantSampler::new(steps, 1.0 / steps as f64, h)?;
    let (sa, sb) = (seed.derive(1), seed.derive(2));
    let (a, b): (Vec<f64>, Vec<f64>) = (0..paths)
        .into_par_iter()
        .map(|r| {
            let mut buf = vec![0.0; steps + 1];
            chol.sample_into(&mut sa.stream(StreamLabel::scalar(r as u32)), &mut buf);
            let x = buf[steps];
            circ.sample_into(&mut sb.stream(StreamLabel::scalar(r as u32)), &mut buf);
            (x, buf[steps])
        })
        .unzip();
    let (d, pval) = ks_two_sample(&a, &b)?;
    Ok(TestReport::new("sampler_equivalence", pval, th.level, Comparison::AtLeast)
        .param("h", h.value())
        .param("steps", steps)
        .param("paths", paths)
        .param("seed", seed.master_seed)
        .stat("ks_statistic", d)
        .stat("p_value", pval))
}

/// Analytic checks: moment hierarchy against Catalan closed forms.
pub fn moments_test(order: usize, hs: &[HurstParameter], times: &[f64], step: f64, th: &Thresholds) -> Result<TestReport> {
    use crate::evolution::{evolve_moments, MomentVector};
    use crate::limitlaw::catalan;
    let mut worst: f64 = 0.0;
    for &h in hs {
        for &t in times {
            let m = evolve_moments(&MomentVector::point_mass(order, 0.0)?, t, h, step)?;
            for j in 0..=order / 2 {
                let expect = catalan(j) as f64 * t.powf(2.0 * j as f64 * h.value());
                worst = worst.max(((m.values[2 * j] - expect) / expect).abs());
            }
        }
    }
    Ok(TestReport::new("moments", worst, th.moments_rel, Comparison::Below)
        .param("order", order)
        .param("h", hs.iter().map(|h| h.value()).collect::<Vec<_>>())
        .param("times", times)
        .param("step", step)
        .stat("max_relative_error", worst))
}

/// Analytic checks: characteristics solver against the closed-form
/// semicircle transform on `x ∈ [−4, 4]` (25 points) × `y ∈ {0.1, 1}`.
pub fn transform_test(h: HurstParameter, times: &[f64], th: &Thresholds) -> Result<TestReport> {
    use crate::evolution::{burgers_transform, PointMass};
    use crate::limitlaw::ComplexUpperPoint;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for &t in times {
        let law = SemicircleLaw::at_time(t, h)?;
        for y in [0.1, 1.0] {
            for k in 0..25 {
                let z = ComplexUpperPoint::from_parts(-4.0 + 8.0 * k as f64 / 24.0, y)?;
                let b = burgers_transform(z, t, h, &PointMass(0.0))?;
                worst = worst.max((b - law.transform(z)).norm());
                points += 1;
            }
        }
    }
    Ok(TestReport::new("transform", worst, th.transform_abs, Comparison::Below)
        .param("h", h.value())
        .param("times", times)
        .stat("max_abs_error", worst)
        .stat("points", points as f64))
}

/// Report wrapper around [`crate::evolution::residual_path`]: the mean
/// `|R_n(T)|` must decrease strictly across increasing `ns`.
pub fn residual_test(cfg: &EnsembleConfig, f: TestFunction, ns: &[usize], replicas: usize) -> Result<TestReport> {
    use crate::evolution::residual_path;
    let mut finals = Vec::new();
    let mut rep_stats = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let sub = EnsembleConfig { n, seed: cfg.seed.derive(300 + k as u64), ..cfg.clone() };
        let r = residual_path(&sub, f, replicas)?;
        let (m, s) = r.final_mean_abs();
        finals.push(m);
        rep_stats.push((n, m, s, r.warnings));
    }
    let decreasing = finals.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = finals.iter().map(|m| m.ln()).collect();
    let slope = regression_slope(&xs, &ys);
    let mut rep = TestReport::new("residual", slope, 0.0, Comparison::Below)
        .param("n", ns)
        .param("h", cfg.h.value())
        .param("replicas", replicas)
        .param("seed", cfg.seed.master_seed)
        .param("f", f.tag())
        .param("grid_points", cfg.grid.len())
        .stat("log_log_slope", slope);
    for (n, m, s, warnings) in rep_stats {
        rep = rep.stat(&format!("mean_abs_final:n={n}"), m).se(&format!("mean_abs_final:n={n}"), s);
        for w in warnings {
            rep = rep.note(format!("n={n}: {w}"));
        }
    }
    rep.pass = decreasing && slope < 0.0;
    Ok(rep)
}

/// Exact `E|tr B⁽ⁿ⁾(t)/n| = (2/√π) t^H / n` for the Gaussian trace.
pub fn trace_mean_abs(n: usize, h: HurstParameter, t: f64) -> f64 {
    2.0 / std::f64::consts::PI.sqrt() * t.powf(h.value()) / n as f64
}

/// Serializable summary of a parameter set, for reports.
pub fn describe(cfg: &EnsembleConfig) -> Value {
    json!({ "n": cfg.n, "h": cfg.h.value(), "replicas": cfg.replicas, "seed": cfg.seed.master_seed, "grid": cfg.grid.points() })
}
