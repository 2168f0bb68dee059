//! Kolmogorov–Smirnov distances and the asymptotic Kolmogorov tail.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::limitlaw::SemicircleLaw;
use crate::spectral::EmpiricalMeasure;

/// `sup_x |F_emp(x) − F(x)|` over sorted samples, checking both one-sided
/// gaps at every atom.
pub fn ks_against_cdf(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// KS distance between an empirical spectral measure and a semicircle law.
pub fn ks_distance(measure: &EmpiricalMeasure, law: &SemicircleLaw) -> Result<f64> {
    ks_against_cdf(measure.atoms(), |x| law.cdf(x))
}

/// Two-sample statistic `sup_x |F_a(x) − F_b(x)|` (inputs need not be
/// sorted).
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // P(K ≤ λ) = √(2π)/λ Σ_j exp(−(2j−1)² π² / (8 λ²))
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|j| ((2 * j - 1) as f64).powi(2) * c).map(f64::exp).sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value of a KS statistic `d` with effective sample size
/// `n_eff` (Stephens' finite-sample correction).
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let rn = n_eff.sqrt();
    kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d)
}

/// Two-sample KS statistic and p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let d = ks_two_sample_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok((d, ks_p_value(d, na * nb / (na + nb))))
}
