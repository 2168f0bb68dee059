//! The limiting measure-valued evolution
//!
//! `⟨μ_t, f⟩ = ⟨μ_0, f⟩ + H ∫_0^t s^{2H−1} ∬ (f'(x) − f'(y))/(x − y) μ_s(dx) μ_s(dy) ds`
//!
//! in three forms: the closed moment hierarchy (`f = x^k`), the complex
//! Burgers equation for the Stieltjes transform (`f = 1/(z − x)`), and the
//! finite-`n` residual of the same identity along simulated eigenvalue paths.
//!
//! # Transform equation
//!
//! With `m_t(z) = ∫ μ_t(dx)/(z − x)` and `f(x) = 1/(z − x)`,
//!
//! ```text
//! (f'(x) − f'(y))/(x − y) = 1/((z−x)(z−y)²) + 1/((z−x)²(z−y))
//! ```
//!
//! and `∫ μ(dx)/(z − x)² = −∂_z m`, so the drift integrates to `−2 m ∂_z m`:
//!
//! ```text
//! ∂_t m = −2H t^{2H−1} m ∂_z m,   i.e.   ∂_τ m + m ∂_z m = 0,   τ = t^{2H}.
//! ```
//!
//! `m` is constant along the characteristics `z = w + τ m_0(w)`. For
//! `μ_0 = δ_0`, `m_0(w) = 1/w` and eliminating `w` gives
//! `τ m² − z m + 1 = 0`: the semicircle of variance `τ = t^{2H}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, EnsembleConfig};
use crate::error::{Error, Result};
use crate::fgn::{HurstParameter, TimeGrid};
use crate::limitlaw::ComplexUpperPoint;
use crate::spectral::{eigen::symmetric_eigenvalues, EmpiricalMeasure, SpectrumPath};

const HANKEL_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;

/// Truncated moment sequence `m_0..=m_K` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub t: f64,
    pub values: Vec<f64>,
}

impl MomentVector {
    /// Moments of `δ_0` up to even order `order`.
    pub fn point_mass(order: usize, t: f64) -> Result<Self> {
        Self::from_atoms(&[0.0], order, t)
    }

    /// Moments of the uniform measure on `atoms`.
    pub fn from_atoms(atoms: &[f64], order: usize, t: f64) -> Result<Self> {
        if order % 2 != 0 {
            return Err(Error::Domain(format!("moment order {order} must be even")));
        }
        if atoms.is_empty() {
            return Err(Error::Empty("atoms"));
        }
        let mu = EmpiricalMeasure::new(atoms.to_vec());
        let values = (0..=order).map(|k| mu.integrate(|x| x.powi(k as i32))).collect();
        Ok(Self { t, values })
    }

    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    /// Smallest eigenvalue of the Hankel matrix `(m_{i+j})_{i,j ≤ K/2}`.
    pub fn hankel_min_eigenvalue(&self) -> Result<f64> {
        let half = self.order() / 2 + 1;
        let mut h = vec![0.0; half * half];
        for i in 0..half {
            for j in 0..half {
                h[i * half + j] = self.values[i + j];
            }
        }
        Ok(symmetric_eigenvalues(&h, half)?[0])
    }

    fn check_hankel(&self) -> Result<()> {
        let scale = self.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let min = self.hankel_min_eigenvalue()?;
        if min < -HANKEL_TOL * scale {
            return Err(Error::Instability(min));
        }
        Ok(())
    }
}

/// `k Σ_{a+b=k−2} m_a m_b` for `k ≥ 2`, zero for `k < 2`.
fn hierarchy_kernel(m: &[f64]) -> Vec<f64> {
    (0..m.len())
        .map(|k| {
            if k < 2 {
                0.0
            } else {
                k as f64 * (0..=k - 2).map(|a| m[a] * m[k - 2 - a]).sum::<f64>()
            }
        })
        .collect()
}

/// `H t^{2H−1}`, with the `t → 0⁺` limit (0 for `H > ½`, ½ for `H = ½`).
fn time_weight(t: f64, h: HurstParameter) -> Result<f64> {
    let h = h.value();
    if t < 0.0 {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    if t == 0.0 {
        return match h {
            _ if h > 0.5 => Ok(0.0),
            _ if h == 0.5 => Ok(0.5),
            _ => Err(Error::Domain("t^{2H-1} is singular at t = 0 for H < 1/2".into())),
        };
    }
    Ok(h * t.powf(2.0 * h - 1.0))
}

/// `dm_k/dt = H t^{2H−1} k Σ_{a+b=k−2} m_a m_b`.
pub fn moment_rhs(m: &MomentVector, t: f64, h: HurstParameter) -> Result<Vec<f64>> {
    let w = time_weight(t, h)?;
    Ok(hierarchy_kernel(&m.values).into_iter().map(|v| w * v).collect())
}

/// Integrates the hierarchy from `m0.t` to `t1` with classical RK4.
///
/// The weight `t^{2H−1}` is not smooth at 0, so the integration runs in
/// `τ = t^{2H}`, where the system is autonomous:
/// `dm_k/dτ = (k/2) Σ_{a+b=k−2} m_a m_b`. The step count is
/// `⌈(t1 − t0)/step⌉`, spaced uniformly in `τ`.
pub fn evolve_moments(m0: &MomentVector, t1: f64, h: HurstParameter, step: f64) -> Result<MomentVector> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step {step} must be positive")));
    }
    let t0 = m0.t;
    if t0 < 0.0 || t1 < t0 {
        return Err(Error::Domain(format!("need 0 <= t0 <= t1 (got {t0}, {t1})")));
    }
    if m0.values.len() < 3 || t1 == t0 {
        return Ok(MomentVector { t: t1, values: m0.values.clone() });
    }
    let e = 2.0 * h.value();
    let (tau0, tau1) = (t0.powf(e), t1.powf(e));
    let steps = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let dtau = (tau1 - tau0) / steps as f64;

    let f = |m: &[f64]| -> Vec<f64> { hierarchy_kernel(m).into_iter().map(|v| 0.5 * v).collect() };
    let axpy = |m: &[f64], k: &[f64], a: f64| -> Vec<f64> { m.iter().zip(k).map(|(x, y)| x + a * y).collect() };

    let mut m = m0.values.clone();
    for _ in 0..steps {
        let k1 = f(&m);
        let k2 = f(&axpy(&m, &k1, 0.5 * dtau));
        let k3 = f(&axpy(&m, &k2, 0.5 * dtau));
        let k4 = f(&axpy(&m, &k3, dtau));
        for i in 0..m.len() {
            m[i] += dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let out = MomentVector { t: t1, values: m };
    out.check_hankel()?;
    Ok(out)
}

/// Stieltjes transform of the initial measure, with its `w`-derivative.
pub trait InitialTransform {
    fn value(&self, w: Complex64) -> Complex64;
    fn derivative(&self, w: Complex64) -> Complex64;
}

/// `δ_c`: `m_0(w) = 1/(w − c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass(pub f64);

impl InitialTransform for PointMass {
    fn value(&self, w: Complex64) -> Complex64 {
        (w - self.0).inv()
    }
    fn derivative(&self, w: Complex64) -> Complex64 {
        -((w - self.0) * (w - self.0)).inv()
    }
}

/// Uniform measure on finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure(pub Vec<f64>);

impl InitialTransform for AtomicMeasure {
    fn value(&self, w: Complex64) -> Complex64 {
        self.0.iter().map(|&a| (w - a).inv()).sum::<Complex64>() / self.0.len() as f64
    }
    fn derivative(&self, w: Complex64) -> Complex64 {
        -self.0.iter().map(|&a| ((w - a) * (w - a)).inv()).sum::<Complex64>() / self.0.len() as f64
    }
}

/// Solves `∂_τ m + m ∂_z m = 0` at `τ = t^{2H}` by characteristics: finds
/// `w ∈ C⁺` with `z = w + τ m_0(w)` by damped Newton from `w = z` and
/// returns `m_0(w)`.
pub fn burgers_transform(
    z: ComplexUpperPoint,
    t: f64,
    h: HurstParameter,
    mu0: &impl InitialTransform,
) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    let z = z.value();
    if t == 0.0 {
        return Ok(mu0.value(z));
    }
    let tau = t.powf(2.0 * h.value());
    let residual = |w: Complex64| w + tau * mu0.value(w) - z;
    let tol = NEWTON_TOL * (1.0 + z.norm());

    let mut w = z;
    let mut r = residual(w);
    let mut converged_at = None;
    for iter in 0..NEWTON_MAX_ITER {
        if r.norm() < tol {
            converged_at = Some(iter);
            break;
        }
        let jac = 1.0 + tau * mu0.derivative(w);
        let delta = r / jac;
        let mut scale = 1.0;
        let mut next = w - delta;
        let mut halvings = 0;
        while next.im <= 0.0 || !next.re.is_finite() {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::BranchError(next));
            }
            scale *= 0.5;
            next = w - scale * delta;
        }
        w = next;
        r = residual(w);
    }
    if converged_at.is_none() {
        return Err(Error::NewtonDivergence { iterations: NEWTON_MAX_ITER, last: w });
    }
    // two polishing steps to reach rounding level
    for _ in 0..2 {
        let next = w - residual(w) / (1.0 + tau * mu0.derivative(w));
        if next.im > 0.0 && residual(next).norm() <= r.norm() {
            w = next;
            r = residual(w);
        }
    }
    Ok(mu0.value(w))
}

/// Twice-differentiable test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestFunction {
    #[serde(rename = "one")]
    Constant,
    #[serde(rename = "x")]
    Identity,
    #[serde(rename = "x2")]
    Square,
    #[serde(rename = "x3")]
    Cube,
    #[serde(rename = "x4")]
    Quartic,
    /// `1/(1 + x²)`, bounded with bounded derivatives.
    #[serde(rename = "lorentz")]
    Lorentzian,
}

impl TestFunction {
    /// Polynomial moments plus one bounded `C²_b` function.
    pub const SUITE: [TestFunction; 5] = [Self::Identity, Self::Square, Self::Cube, Self::Quartic, Self::Lorentzian];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Constant => "one",
            Self::Identity => "x",
            Self::Square => "x2",
            Self::Cube => "x3",
            Self::Quartic => "x4",
            Self::Lorentzian => "lorentz",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [Self::Constant, Self::Identity, Self::Square, Self::Cube, Self::Quartic, Self::Lorentzian]
            .into_iter()
            .find(|f| f.tag() == tag)
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Identity => x,
            Self::Square => x * x,
            Self::Cube => x * x * x,
            Self::Quartic => x * x * x * x,
            Self::Lorentzian => 1.0 / (1.0 + x * x),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Self::Constant => 0.0,
            Self::Identity => 1.0,
            Self::Square => 2.0 * x,
            Self::Cube => 3.0 * x * x,
            Self::Quartic => 4.0 * x * x * x,
            Self::Lorentzian => -2.0 * x / (1.0 + x * x).powi(2),
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Self::Constant | Self::Identity => 0.0,
            Self::Square => 2.0,
            Self::Cube => 6.0 * x,
            Self::Quartic => 12.0 * x * x,
            Self::Lorentzian => (6.0 * x * x - 2.0) / (1.0 + x * x).powi(3),
        }
    }

    /// `(f'(x) − f'(y))/(x − y)`, and `f''(x)` on the diagonal.
    pub fn divided_difference(self, x: f64, y: f64) -> f64 {
        if x == y {
            self.d2(x)
        } else {
            (self.d1(x) - self.d1(y)) / (x - y)
        }
    }
}

/// `(1/n²) Σ_{i,j} k_f(λ_i, λ_j)`.
pub fn drift_functional(measure: &EmpiricalMeasure, f: TestFunction) -> f64 {
    let atoms = measure.atoms();
    let n = atoms.len();
    if n == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += f.d2(atoms[i]);
        for j in 0..i {
            sum += 2.0 * f.divided_difference(atoms[i], atoms[j]);
        }
    }
    sum / (n * n) as f64
}

/// Replica statistics of the fluctuation term `R_n(t)` along the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub n: usize,
    pub h: HurstParameter,
    pub f: TestFunction,
    pub grid: TimeGrid,
    pub replicas: usize,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub mean_abs: Vec<f64>,
    pub se_abs: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ResidualReport {
    pub fn final_mean_abs(&self) -> (f64, f64) {
        let k = self.grid.len() - 1;
        (self.mean_abs[k], self.se_abs[k])
    }
}

/// Computes
/// `R_n(t) = ⟨μ_t, f⟩ − ⟨μ_0, f⟩ − H ∫_0^t s^{2H−1} [D(μ_s, f) + (1/n²) Σ_i f''(λ_i(s))] ds`
/// along simulated eigenvalue paths (trapezoid rule on the grid). This is
/// the stochastic-integral remainder of the finite-`n` evolution identity.
pub fn residual_path(cfg: &EnsembleConfig, f: TestFunction, replicas: usize) -> Result<ResidualReport> {
    let h = cfg.h;
    if !h.is_long_memory() {
        return Err(Error::Domain("residual requires H > 1/2".into()));
    }
    if !cfg.grid.starts_at_zero() {
        return Err(Error::InvalidGrid("residual grid must start at 0".into()));
    }
    let mut warnings = Vec::new();
    if cfg.grid.len() < 16 {
        warnings.push(format!("coarse grid: {} points (< 16)", cfg.grid.len()));
    }
    if replicas < 30 {
        warnings.push(format!("{replicas} replicas (< 30): standard errors unreliable"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let ens = Ensemble::new(EnsembleConfig { replicas, ..cfg.clone() })?;
    let paths: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| residual_single(&ens, f, r))
        .collect::<Result<_>>()?;

    let times = cfg.grid.len();
    let mut report = ResidualReport {
        n: cfg.n,
        h,
        f,
        grid: cfg.grid.clone(),
        replicas,
        mean: vec![0.0; times],
        se: vec![0.0; times],
        mean_abs: vec![0.0; times],
        se_abs: vec![0.0; times],
        warnings,
    };
    for k in 0..times {
        let vals: Vec<f64> = paths.iter().map(|p| p[k]).collect();
        let (m, s) = mean_se(&vals);
        let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
        let (ma, sa) = mean_se(&abs);
        report.mean[k] = m;
        report.se[k] = s;
        report.mean_abs[k] = ma;
        report.se_abs[k] = sa;
    }
    Ok(report)
}

fn residual_single(ens: &Ensemble, f: TestFunction, replica: usize) -> Result<Vec<f64>> {
    let path = ens.replica(replica)?;
    let spec = SpectrumPath::from_path_serial(&path, false)?;
    let n = ens.config().n as f64;
    let h = ens.config().h;
    let times = path.grid.points();

    let pairing: Vec<f64> = spec.eigenvalues.iter().map(|ev| EmpiricalMeasure::new(ev.clone()).integrate(|x| f.value(x))).collect();
    let integrand: Vec<f64> = spec
        .eigenvalues
        .iter()
        .zip(times)
        .map(|(ev, &s)| {
            let w = time_weight(s, h)?;
            let mu = EmpiricalMeasure::new(ev.clone());
            let diag: f64 = ev.iter().map(|&x| f.d2(x)).sum::<f64>() / (n * n);
            Ok(w * (drift_functional(&mu, f) + diag))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    out.push(0.0);
    for k in 1..times.len() {
        integral += 0.5 * (times[k] - times[k - 1]) * (integrand[k] + integrand[k - 1]);
        out.push(pairing[k] - pairing[0] - integral);
    }
    Ok(out)
}

/// Sample mean and its standard error.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limitlaw::{catalan, SemicircleLaw};
    use crate::rng::SeedSpec;

    fn hp(h: f64) -> HurstParameter {
        HurstParameter::new(h).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let h = hp(0.7);
        let t = 1.3;
        // at m_2 = t^{2H}: dm_2/dt = 2H t^{2H−1}, dm_4/dt = 8H t^{4H−1}
        let m = MomentVector { t, values: vec![1.0, 0.0, t.powf(1.4), 0.0, 2.0 * t.powf(2.8)] };
        let d = moment_rhs(&m, t, h).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - 2.0 * 0.7 * t.powf(0.4)).abs() < 1e-13);
        assert!((d[4] - 8.0 * 0.7 * t.powf(1.8)).abs() < 1e-12);

        let delta = MomentVector::point_mass(8, 0.0).unwrap();
        assert!(moment_rhs(&delta, 0.0, h).unwrap().iter().all(|&v| v == 0.0));
        assert!(moment_rhs(&delta, 1e-12, h).unwrap().iter().all(|&v| v.abs() < 1e-4));
        assert!(moment_rhs(&delta, -1.0, h).is_err());
        assert!(MomentVector::point_mass(3, 0.0).is_err());
    }

    #[test]
    fn evolve_examples() {
        let h = hp(0.75);
        let m0 = MomentVector::point_mass(8, 0.0).unwrap();
        let same = evolve_moments(&m0, 0.0, h, 1e-3).unwrap();
        assert_eq!(same.values, m0.values);
        let m = evolve_moments(&m0, 1.0, h, 1e-3).unwrap();
        for (j, expect) in [(1, 1.0), (2, 2.0), (3, 5.0), (4, 14.0)] {
            assert!((m.values[2 * j] - expect).abs() < 1e-6 * expect, "j={j} {}", m.values[2 * j]);
        }
        let m = evolve_moments(&m0, 2.0, hp(0.6), 1e-3).unwrap();
        assert!((m.values[2] - 2f64.powf(1.2)).abs() < 1e-6 * 2.3);
        assert!((m.values[2] - 2.297_40).abs() < 1e-5);
        assert!(evolve_moments(&m0, 1.0, h, 0.0).is_err());
        assert!(evolve_moments(&m0, -1.0, h, 1e-3).is_err());
    }

    #[test]
    fn evolve_matches_catalan_closed_form() {
        for hv in [0.55, 0.75, 0.9] {
            for t in [0.5, 1.0, 2.0] {
                let m = evolve_moments(&MomentVector::point_mass(8, 0.0).unwrap(), t, hp(hv), 1e-3).unwrap();
                for j in 0..=4 {
                    let expect = catalan(j) as f64 * t.powf(2.0 * j as f64 * hv);
                    assert!(((m.values[2 * j] - expect) / expect).abs() < 1e-6);
                }
                for k in (1..8).step_by(2) {
                    assert_eq!(m.values[k], 0.0);
                }
            }
        }
    }

    #[test]
    fn evolve_from_atoms_stays_a_measure() {
        let m0 = MomentVector::from_atoms(&[-1.0, 0.5, 2.0], 6, 0.3).unwrap();
        let m = evolve_moments(&m0, 1.5, hp(0.8), 1e-3).unwrap();
        assert!(m.hankel_min_eigenvalue().unwrap() > -1e-9);
        assert!((m.values[0] - 1.0).abs() < 1e-15);
        // mean is conserved
        assert!((m.values[1] - m0.values[1]).abs() < 1e-14);
    }

    #[test]
    fn burgers_matches_closed_form() {
        let h = hp(0.75);
        let z = ComplexUpperPoint::from_parts(0.0, 3.0).unwrap();
        let m = burgers_transform(z, 1.0, h, &PointMass(0.0)).unwrap();
        assert!((m - Complex64::new(0.0, -0.302_775_637_731_995)).norm() < 1e-12);

        let z = ComplexUpperPoint::from_parts(0.7, 0.4).unwrap();
        assert_eq!(burgers_transform(z, 0.0, h, &PointMass(0.0)).unwrap(), z.value().inv());

        for t in [0.5, 1.0, 2.0] {
            let law = SemicircleLaw::at_time(t, h).unwrap();
            for y in [0.1, 1.0] {
                for k in 0..25 {
                    let x = -4.0 + 8.0 * k as f64 / 24.0;
                    let z = ComplexUpperPoint::from_parts(x, y).unwrap();
                    let b = burgers_transform(z, t, h, &PointMass(0.0)).unwrap();
                    assert!((b - law.transform(z)).norm() < 1e-8, "t={t} z={}", z.value());
                }
            }
        }
    }

    #[test]
    fn burgers_from_atoms_satisfies_characteristics() {
        let mu0 = AtomicMeasure(vec![-1.0, 1.0]);
        let h = hp(0.7);
        let t: f64 = 0.8;
        let tau = t.powf(1.4);
        let z = ComplexUpperPoint::from_parts(0.3, 0.5).unwrap();
        let m = burgers_transform(z, t, h, &mu0).unwrap();
        assert!(m.im < 0.0);
        // m = m_0(z − τ m)
        let back = mu0.value(z.value() - tau * m);
        assert!((back - m).norm() < 1e-10);
    }

    #[test]
    fn burgers_moments_match_hierarchy() {
        let h = hp(0.75);
        let t = 1.5;
        let law = SemicircleLaw::at_time(t, h).unwrap();
        let r = 4.0 * law.variance().sqrt();
        let ms = crate::limitlaw::transform_moments(|z| burgers_transform(z, t, h, &PointMass(0.0)), r, 6).unwrap();
        let hier = evolve_moments(&MomentVector::point_mass(6, 0.0).unwrap(), t, h, 1e-3).unwrap();
        for k in 0..=6 {
            let e = hier.values[k];
            if k % 2 == 0 {
                assert!(((ms[k] - e) / e).abs() < 1e-6, "k={k} {} vs {e}", ms[k]);
            } else {
                assert!(ms[k].abs() < 1e-6 * hier.values[k + 1]);
            }
        }
    }

    #[test]
    fn drift_examples() {
        let mu = EmpiricalMeasure::new(vec![-3.0, 0.1, 2.0, 5.0]);
        assert!((drift_functional(&mu, TestFunction::Square) - 2.0).abs() < 1e-15);
        let single = EmpiricalMeasure::new(vec![1.7]);
        assert_eq!(drift_functional(&single, TestFunction::Quartic), TestFunction::Quartic.d2(1.7));
        let pair = EmpiricalMeasure::new(vec![-1.0, 1.0]);
        assert!((drift_functional(&pair, TestFunction::Quartic) - 8.0).abs() < 1e-14);
        assert_eq!(drift_functional(&pair, TestFunction::Identity), 0.0);
    }

    #[test]
    fn divided_difference_is_continuous_and_symmetric() {
        for f in TestFunction::SUITE {
            for x in [-1.3, 0.0, 0.4, 2.2] {
                let k = f.divided_difference(x, x + 1e-6);
                assert!((k - f.d2(x)).abs() < 1e-4, "{f:?} x={x}");
                assert_eq!(f.divided_difference(x, 0.7), f.divided_difference(0.7, x));
            }
        }
    }

    #[test]
    fn test_function_derivatives() {
        let eps = 1e-5;
        for f in TestFunction::SUITE {
            assert_eq!(TestFunction::from_tag(f.tag()), Some(f));
            for x in [-1.1, 0.3, 1.9] {
                let d1 = (f.value(x + eps) - f.value(x - eps)) / (2.0 * eps);
                let d2 = (f.d1(x + eps) - f.d1(x - eps)) / (2.0 * eps);
                assert!((d1 - f.d1(x)).abs() < 1e-6 * f.d1(x).abs().max(1.0));
                assert!((d2 - f.d2(x)).abs() < 1e-6 * f.d2(x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn residual_of_constant_is_zero_and_starts_at_zero() {
        let cfg = EnsembleConfig::new(6, hp(0.7), TimeGrid::uniform(1.0, 16).unwrap(), SeedSpec::new(3), 5).unwrap();
        let rep = residual_path(&cfg, TestFunction::Constant, 5).unwrap();
        assert!(rep.mean.iter().all(|&v| v == 0.0));
        assert!(rep.mean_abs.iter().all(|&v| v == 0.0));
        assert!(!rep.warnings.is_empty());
        let rep = residual_path(&cfg, TestFunction::Square, 5).unwrap();
        assert_eq!(rep.mean_abs[0], 0.0);
    }

    #[test]
    fn residual_of_identity_is_normalized_trace() {
        // R_n(t) = tr B⁽ⁿ⁾(t) / n exactly
        let cfg = EnsembleConfig::new(5, hp(0.7), TimeGrid::uniform(1.0, 8).unwrap(), SeedSpec::new(12), 3).unwrap();
        let ens = Ensemble::new(cfg.clone()).unwrap();
        for r in 0..3 {
            let res = residual_single(&ens, TestFunction::Identity, r).unwrap();
            let path = ens.replica(r).unwrap();
            for (k, m) in path.matrices.iter().enumerate() {
                assert!((res[k] - m.trace() / 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_rejects_invalid_inputs() {
        let cfg = EnsembleConfig::new(3, hp(0.4), TimeGrid::uniform(1.0, 16).unwrap(), SeedSpec::new(1), 2).unwrap();
        assert!(residual_path(&cfg, TestFunction::Square, 2).is_err());
        let cfg = EnsembleConfig::new(3, hp(0.7), TimeGrid::new(vec![0.5, 1.0]).unwrap(), SeedSpec::new(1), 2).unwrap();
        assert!(residual_path(&cfg, TestFunction::Square, 2).is_err());
    }
}
