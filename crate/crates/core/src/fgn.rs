//! Exact samplers for fractional Brownian motion.
//!
//! The covariance of fBm with Hurst index `H` is
//! `E[B(s) B(t)] = ½ (t^{2H} + s^{2H} − |t − s|^{2H})`.
//! Each path is drawn jointly on its grid, either by a Cholesky factor of the
//! full covariance matrix (any grid) or by circulant embedding of the
//! fractional Gaussian noise autocovariance (uniform grids from 0).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{GaussianStream, SeedSpec, StreamLabel};

const JITTER_MAX: f64 = 1e-12;
const EMBED_CLAMP_TOL: f64 = 1e-10;
const EMBED_FAIL_TOL: f64 = 1e-6;

/// Hurst index in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParameter(f64);

impl HurstParameter {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::Domain(format!("Hurst parameter {h} outside (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True on the range where the limit theorem is stated, `H ∈ (½, 1)`.
    pub fn is_long_memory(self) -> bool {
        self.0 > 0.5
    }
}

impl TryFrom<f64> for HurstParameter {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParameter> for f64 {
    fn from(h: HurstParameter) -> f64 {
        h.0
    }
}

impl fmt::Display for HurstParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Strictly increasing, finite, non-negative sampling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("no points".into()));
        }
        if let Some(bad) = points.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::InvalidGrid(format!("time {bad} is negative or not finite")));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `steps + 1` equally spaced points on `[0, t_max]`.
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(format!("uniform grid needs steps >= 1 and t_max > 0 (got {steps}, {t_max})")));
        }
        let dt = t_max / steps as f64;
        Self::new((0..=steps).map(|k| k as f64 * dt).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn starts_at_zero(&self) -> bool {
        self.points[0] == 0.0
    }

    pub fn last(&self) -> f64 {
        *self.points.last().expect("grid is non-empty")
    }

    /// Index of the grid point equal to `t` (within 1e-12 relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .iter()
            .position(|&p| (p - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Step size when the grid is `{0, dt, 2dt, ...}` with at least one step.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.points.len() < 2 || !self.starts_at_zero() {
            return None;
        }
        let dt = self.points[1];
        let uniform = self
            .points
            .iter()
            .enumerate()
            .all(|(k, &p)| (p - k as f64 * dt).abs() <= 1e-12 * p.max(dt));
        uniform.then_some(dt)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Vec<f64> {
        g.points
    }
}

/// One sampled scalar path.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} must be finite and non-negative")))
    }
}

/// `½ (t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, h: HurstParameter) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    Ok(covariance_unchecked(s, t, h.value()))
}

#[inline]
fn covariance_unchecked(s: f64, t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e))
}

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
pub fn fgn_autocovariance(k: usize, dt: f64, h: HurstParameter) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("step {dt} must be positive")));
    }
    Ok(fgn_autocov_unchecked(k, dt, h.value()))
}

fn fgn_autocov_unchecked(k: usize, dt: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    let k = k as f64;
    0.5 * dt.powf(e) * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Cholesky factorization with diagonal jitter escalating up to
/// `1e-12 · trace / m`. Returns the packed lower factor (row-major, full rows).
fn cholesky_with_jitter(cov: &[f64], m: usize) -> Result<Vec<f64>> {
    let trace: f64 = (0..m).map(|i| cov[i * m + i]).sum();
    let base = trace / m as f64;
    let mut jitter = 0.0;
    loop {
        match cholesky(cov, m, jitter) {
            Ok(l) => {
                if jitter > 0.0 {
                    log::debug!("cholesky succeeded with jitter {jitter:e}");
                }
                return Ok(l);
            }
            Err(err) => {
                jitter = if jitter == 0.0 { 1e-16 * base } else { jitter * 10.0 };
                if jitter > JITTER_MAX * base * (1.0 + 1e-9) {
                    return Err(err);
                }
            }
        }
    }
}

fn cholesky(a: &[f64], m: usize, jitter: f64) -> Result<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let mut d = a[j * m + j] + jitter;
        for k in 0..j {
            d -= l[j * m + k] * l[j * m + k];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: d, index: j });
        }
        let d = d.sqrt();
        l[j * m + j] = d;
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / d;
        }
    }
    Ok(l)
}

/// Prepared Cholesky sampler for an arbitrary grid.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    grid: TimeGrid,
    /// Offset of the first positive time (1 if the grid starts at 0).
    offset: usize,
    factor: Vec<f64>,
}

impl CholeskySampler {
    pub fn new(grid: &TimeGrid, h: HurstParameter) -> Result<Self> {
        let offset = usize::from(grid.starts_at_zero());
        let times = &grid.points()[offset..];
        let m = times.len();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] = covariance_unchecked(times[i], times[j], h.value());
            }
        }
        let factor = if m == 0 { Vec::new() } else { cholesky_with_jitter(&cov, m)? };
        Ok(Self { grid: grid.clone(), offset, factor })
    }

    pub fn sample_into(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        let m = self.grid.len() - self.offset;
        debug_assert_eq!(out.len(), self.grid.len());
        let mut z = vec![0.0; m];
        stream.fill(&mut z);
        out[..self.offset].fill(0.0);
        for i in 0..m {
            let row = &self.factor[i * m..i * m + i + 1];
            out[self.offset + i] = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    }
}

/// Prepared Davies–Harte sampler: fGn on `m` uniform steps via an FFT of
/// length `2m`.
#[derive(Clone)]
pub struct CirculantSampler {
    steps: usize,
    /// `sqrt(λ_k / 2m)` for the embedding eigenvalues `λ_k`.
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clamped: usize,
}

impl fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("steps", &self.steps)
            .field("clamped", &self.clamped)
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(steps: usize, dt: f64, h: HurstParameter) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Domain("circulant sampler needs at least one step".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("step {dt} must be positive")));
        }
        let size = 2 * steps;
        // first row of the minimal even embedding: γ(0..=m), γ(m-1..=1)
        let mut row: Vec<Complex64> = (0..=steps)
            .chain((1..steps).rev())
            .map(|k| Complex64::new(fgn_autocov_unchecked(k, dt, h.value()), 0.0))
            .collect();
        debug_assert_eq!(row.len(), size);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);

        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -EMBED_FAIL_TOL * max {
            return Err(Error::NegativeEmbedding { min, max });
        }
        let mut clamped = 0;
        let weights = row
            .iter()
            .map(|c| {
                if c.re < -EMBED_CLAMP_TOL * max {
                    clamped += 1;
                }
                (c.re.max(0.0) / size as f64).sqrt()
            })
            .collect();
        if clamped > 0 {
            log::warn!("circulant embedding: clamped {clamped} negative eigenvalues (min {min:e})");
        }
        Ok(Self { steps, weights, fft, clamped })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of embedding eigenvalues clamped to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Writes `steps` fGn increments.
    pub fn sample_increments(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.steps);
        let mut buf: Vec<Complex64> = self
            .weights
            .iter()
            .map(|&w| {
                let re = stream.next_normal();
                let im = stream.next_normal();
                Complex64::new(w * re, w * im)
            })
            .collect();
        self.fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re;
        }
    }

    /// Writes the cumulative path `0, X_1, X_1 + X_2, ...` of length `steps + 1`.
    pub fn sample_into(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.steps + 1);
        out[0] = 0.0;
        self.sample_increments(stream, &mut out[1..]);
        for k in 1..out.len() {
            out[k] += out[k - 1];
        }
    }
}

/// Which exact sampler to use for a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Circulant on uniform grids from 0, Cholesky otherwise.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

/// A sampler prepared once per `(grid, H)` and shared by every entry path.
#[derive(Debug, Clone)]
pub enum FbmSampler {
    Cholesky(CholeskySampler),
    Circulant { grid: TimeGrid, inner: CirculantSampler },
}

impl FbmSampler {
    pub fn new(grid: &TimeGrid, h: HurstParameter, kind: SamplerKind) -> Result<Self> {
        match (kind, grid.uniform_step()) {
            (SamplerKind::Cholesky, _) | (SamplerKind::Auto, None) => {
                Ok(Self::Cholesky(CholeskySampler::new(grid, h)?))
            }
            (SamplerKind::Circulant, None) => Err(Error::InvalidGrid(
                "circulant sampler requires a uniform grid starting at 0".into(),
            )),
            (_, Some(dt)) => match CirculantSampler::new(grid.len() - 1, dt, h) {
                Ok(inner) => Ok(Self::Circulant { grid: grid.clone(), inner }),
                Err(err @ Error::NegativeEmbedding { .. }) => {
                    log::warn!("{err}; falling back to Cholesky");
                    Ok(Self::Cholesky(CholeskySampler::new(grid, h)?))
                }
                Err(err) => Err(err),
            },
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            Self::Cholesky(c) => &c.grid,
            Self::Circulant { grid, .. } => grid,
        }
    }

    pub fn sample_into(&self, stream: &mut GaussianStream, out: &mut [f64]) {
        match self {
            Self::Cholesky(c) => c.sample_into(stream, out),
            Self::Circulant { inner, .. } => inner.sample_into(stream, out),
        }
    }

    pub fn sample(&self, stream: &mut GaussianStream) -> FbmPath {
        let grid = self.grid().clone();
        let mut values = vec![0.0; grid.len()];
        self.sample_into(stream, &mut values);
        FbmPath { grid, values }
    }
}

/// Exact joint sample of fBm on an arbitrary grid.
pub fn sample_fbm_cholesky(
    grid: &TimeGrid,
    h: HurstParameter,
    seed: SeedSpec,
    label: StreamLabel,
) -> Result<FbmPath> {
    let sampler = FbmSampler::Cholesky(CholeskySampler::new(grid, h)?);
    Ok(sampler.sample(&mut seed.stream(label)))
}

/// Exact fBm sample on `{0, dt, ..., m·dt}` by circulant embedding.
pub fn sample_fbm_circulant(
    steps: usize,
    dt: f64,
    h: HurstParameter,
    seed: SeedSpec,
    label: StreamLabel,
) -> Result<FbmPath> {
    let inner = CirculantSampler::new(steps, dt, h)?;
    let grid = TimeGrid::new((0..=steps).map(|k| k as f64 * dt).collect())?;
    let sampler = FbmSampler::Circulant { grid, inner };
    Ok(sampler.sample(&mut seed.stream(label)))
}
