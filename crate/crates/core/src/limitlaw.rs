//! The semicircle family with variance `σ² = t^{2H}` and its Stieltjes
//! transform.
//!
//! Sign convention: the transform is `m(z) = ∫ μ(dx) / (z − x)` for `z` in
//! the upper half-plane, so `m(z) ~ 1/z` at infinity and `Im m(z) < 0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fgn::HurstParameter;

pub use crate::fgn::fbm_covariance as ncfbm_covariance;

/// Semicircle law of variance `σ²` on `[−2σ, 2σ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemicircleLaw {
    variance: f64,
}

impl SemicircleLaw {
    pub fn new(variance: f64) -> Result<Self> {
        if variance > 0.0 && variance.is_finite() {
            Ok(Self { variance })
        } else {
            Err(Error::Domain(format!("semicircle variance {variance} must be positive")))
        }
    }

    /// The one-time law of the limit process: variance `t^{2H}`.
    pub fn at_time(t: f64, h: HurstParameter) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("time {t} must be positive")));
        }
        Self::new(t.powf(2.0 * h.value()))
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn radius(&self) -> f64 {
        2.0 * self.variance.sqrt()
    }

    pub fn density(&self, x: f64) -> f64 {
        let r2 = 4.0 * self.variance - x * x;
        if r2 <= 0.0 {
            0.0
        } else {
            r2.sqrt() / (2.0 * PI * self.variance)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let r = self.radius();
        if x <= -r {
            return 0.0;
        }
        if x >= r {
            return 1.0;
        }
        let v = 0.5 + x * (4.0 * self.variance - x * x).sqrt() / (4.0 * PI * self.variance) + (x / r).asin() / PI;
        v.clamp(0.0, 1.0)
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let r = self.radius();
        if p <= 0.0 {
            return -r;
        }
        if p >= 1.0 {
            return r;
        }
        let (mut lo, mut hi) = (-r, r);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `m_k`: zero for odd `k`, `Catalan(k/2) · σ^k` for even `k`.
    pub fn moment(&self, k: usize) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            catalan(k / 2) as f64 * self.variance.powi((k / 2) as i32)
        }
    }

    /// `m(z) = (z − √(z² − 4σ²)) / (2σ²)`, evaluated as `2 / (z + s)` with
    /// the root `s` chosen on the side of `z` (avoids cancellation at large
    /// `|z|`).
    pub fn transform(&self, z: ComplexUpperPoint) -> Complex64 {
        semicircle_transform(z.value(), self.variance)
    }
}

pub(crate) fn semicircle_transform(z: Complex64, variance: f64) -> Complex64 {
    let mut s = (z * z - 4.0 * variance).sqrt();
    if (z.conj() * s).re < 0.0 {
        s = -s;
    }
    2.0 / (z + s)
}

/// A point of the open upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexUpperPoint(Complex64);

impl ComplexUpperPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(Self(z))
        } else {
            Err(Error::Domain(format!("{z} is not in the upper half-plane")))
        }
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

/// Catalan numbers by the convolution recursion `C_{j+1} = Σ C_i C_{j−i}`.
pub fn catalan(j: usize) -> u64 {
    let mut c = vec![1u64; j + 1];
    for m in 1..=j {
        c[m] = (0..m).map(|i| c[i] * c[m - 1 - i]).sum();
    }
    c[j]
}

pub fn sc_density(x: f64, law: &SemicircleLaw) -> f64 {
    law.density(x)
}

pub fn sc_cdf(x: f64, law: &SemicircleLaw) -> f64 {
    law.cdf(x)
}

pub fn sc_moment(k: usize, law: &SemicircleLaw) -> f64 {
    law.moment(k)
}

pub fn sc_transform(z: ComplexUpperPoint, law: &SemicircleLaw) -> Complex64 {
    law.transform(z)
}

/// Recovers moments `m_0..=m_max_order` from a Stieltjes transform using its
/// expansion `m(z) = Σ_k m_k / z^{k+1}` on the circle `|z| = radius`.
///
/// Only upper half-plane evaluations are made; the lower half of the circle
/// is filled in by conjugate symmetry (the measure is real). Coefficients
/// come from the trapezoid rule on the circle, which is spectrally accurate
/// for `radius` well outside the support.
pub fn transform_moments<F>(transform: F, radius: f64, max_order: usize) -> Result<Vec<f64>>
where
    F: Fn(ComplexUpperPoint) -> Result<Complex64>,
{
    let nodes = 64usize.max(4 * (max_order + 1));
    let mut samples = Vec::with_capacity(nodes);
    // u = 1/z on the circle |u| = 1/radius at angles θ_j = 2π(j + ½)/N;
    // z is in C⁺ exactly when sin θ < 0.
    for j in 0..nodes {
        let theta = 2.0 * PI * (j as f64 + 0.5) / nodes as f64;
        let u = Complex64::from_polar(1.0 / radius, theta);
        let g = if theta.sin() < 0.0 {
            let z = ComplexUpperPoint::new(u.inv())?;
            transform(z)? / u
        } else {
            let z = ComplexUpperPoint::new(u.conj().inv())?;
            (transform(z)? / u.conj()).conj()
        };
        samples.push((theta, g));
    }
    Ok((0..=max_order)
        .map(|k| {
            let c: Complex64 = samples
                .iter()
                .map(|&(theta, g)| g * Complex64::from_polar(1.0, -(k as f64) * theta))
                .sum::<Complex64>()
                / nodes as f64;
            c.re * radius.powi(k as i32)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on a smooth integrand.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let panels = 32;
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let (lo, hi) = (a + i as f64 * w, a + (i + 1) as f64 * w);
                let m = 0.5 * (lo + hi);
                let (fa, fm, fb) = (f(lo), f(m), f(hi));
                rec(f, lo, hi, fa, fm, fb, w / 6.0 * (fa + 4.0 * fm + fb), tol / panels as f64, 18)
            })
            .sum()
    }

    /// `∫ g(x) ρ(x) dx` over the support via `x = 2σ sin θ`, which removes
    /// the square-root edge singularity.
    fn integrate_against(law: &SemicircleLaw, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let r = law.radius();
        let (a, b) = ((lo / r).clamp(-1.0, 1.0).asin(), (hi / r).clamp(-1.0, 1.0).asin());
        let f = |th: f64| {
            let x = r * th.sin();
            g(x) * law.density(x) * r * th.cos()
        };
        simpson(&f, a, b, 1e-14)
    }

    #[test]
    fn density_examples() {
        let law = SemicircleLaw::new(1.0).unwrap();
        assert!((law.density(0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(law.density(2.0), 0.0);
        assert_eq!(law.density(-2.5), 0.0);
        assert!(SemicircleLaw::new(0.0).is_err());
        assert!(SemicircleLaw::new(-1.0).is_err());
        let law = SemicircleLaw::new(1.7).unwrap();
        let mass = integrate_against(&law, &|_| 1.0, -law.radius(), law.radius());
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
    }

    #[test]
    fn cdf_examples() {
        let law = SemicircleLaw::new(1.0).unwrap();
        assert!((law.cdf(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(law.cdf(2.0), 1.0);
        assert_eq!(law.cdf(-2.0), 0.0);
        let quad = integrate_against(&law, &|_| 1.0, -2.0, 1.0);
        assert!((law.cdf(1.0) - quad).abs() < 1e-10);
    }

    #[test]
    fn cdf_is_antiderivative() {
        let law = SemicircleLaw::new(0.8).unwrap();
        let r = law.radius();
        let eps = 1e-6;
        for k in 1..=100 {
            let x = -r + 2.0 * r * k as f64 / 101.0;
            let fd = (law.cdf(x + eps) - law.cdf(x - eps)) / (2.0 * eps);
            assert!((fd - law.density(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let law = SemicircleLaw::new(2.3).unwrap();
        for p in [0.01, 0.2, 0.5, 0.77, 0.999] {
            assert!((law.cdf(law.quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn catalan_sequence() {
        let expect = [1u64, 1, 2, 5, 14, 42, 132, 429];
        for (j, &c) in expect.iter().enumerate() {
            assert_eq!(catalan(j), c);
        }
    }

    #[test]
    fn moments_match_quadrature() {
        let unit = SemicircleLaw::new(1.0).unwrap();
        assert_eq!(unit.moment(0), 1.0);
        assert_eq!(unit.moment(1), 0.0);
        assert_eq!(unit.moment(4), 2.0);
        assert_eq!(unit.moment(6), 5.0);
        assert_eq!(unit.moment(8), 14.0);
        for var in [1.0, 0.37, 2.0f64.powf(1.4)] {
            let law = SemicircleLaw::new(var).unwrap();
            for k in 0..=8 {
                let quad = integrate_against(&law, &|x| x.powi(k as i32), -law.radius(), law.radius());
                assert!((quad - law.moment(k)).abs() < 1e-9 * law.moment(k).abs().max(1.0), "k={k} var={var}");
            }
        }
    }

    #[test]
    fn moments_scale_self_similarly() {
        let h = HurstParameter::new(0.7).unwrap();
        let unit = SemicircleLaw::new(1.0).unwrap();
        for t in [0.5, 2.0, 3.3] {
            let law = SemicircleLaw::at_time(t, h).unwrap();
            for k in 0..=10 {
                let expect = t.powf(k as f64 * 0.7) * unit.moment(k);
                assert!((law.moment(k) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn transform_examples() {
        let law = SemicircleLaw::new(1.0).unwrap();
        let m = law.transform(ComplexUpperPoint::from_parts(0.0, 3.0).unwrap());
        let expect = Complex64::new(0.0, (3.0 - 13f64.sqrt()) / 2.0);
        assert!((m - expect).norm() < 1e-14, "{m}");
        assert!((m.im + 0.302_775_637_731_995).abs() < 1e-12);
        // numeric Stieltjes integral
        let z = Complex64::new(0.0, 3.0);
        let re = integrate_against(&law, &|x| (1.0 / (z - x)).re, -2.0, 2.0);
        let im = integrate_against(&law, &|x| (1.0 / (z - x)).im, -2.0, 2.0);
        assert!((m - Complex64::new(re, im)).norm() < 1e-10);

        let big = ComplexUpperPoint::from_parts(6e5, 8e5).unwrap();
        assert!((law.transform(big) - big.value().inv()).norm() < 1e-8);

        let tiny = SemicircleLaw::new(1e-14).unwrap();
        let z = ComplexUpperPoint::from_parts(0.3, 0.2).unwrap();
        assert!((tiny.transform(z) - z.value().inv()).norm() < 1e-10);

        assert!(ComplexUpperPoint::from_parts(1.0, 0.0).is_err());
        assert!(ComplexUpperPoint::from_parts(1.0, -1.0).is_err());
    }

    #[test]
    fn transform_branch_and_quadratic() {
        for var in [0.3, 1.0, 2.8] {
            let law = SemicircleLaw::new(var).unwrap();
            for xr in [-5.0, -2.0, -0.3, 0.0, 1.1, 3.9] {
                for yi in [1e-3, 0.1, 1.0, 10.0] {
                    let z = ComplexUpperPoint::from_parts(xr, yi).unwrap();
                    let m = law.transform(z);
                    assert!(m.im < 0.0);
                    let q = var * m * m - z.value() * m + 1.0;
                    assert!(q.norm() < 1e-12, "var={var} z={} q={q}", z.value());
                }
            }
        }
    }

    #[test]
    fn transform_expansion_reproduces_moments() {
        for var in [1.0, 0.45] {
            let law = SemicircleLaw::new(var).unwrap();
            let r = 4.0 * var.sqrt();
            let ms = transform_moments(|z| Ok(law.transform(z)), r, 6).unwrap();
            for (k, m) in ms.iter().enumerate() {
                let expect = law.moment(k);
                if expect == 0.0 {
                    assert!(m.abs() < 1e-6 * law.moment(k + 1).max(1.0), "k={k} {m}");
                } else {
                    assert!(((m - expect) / expect).abs() < 1e-6, "k={k} {m} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn ncfbm_covariance_is_fbm_covariance() {
        let h = HurstParameter::new(0.7).unwrap();
        assert!((ncfbm_covariance(2.0, 1.0, h).unwrap() - 2f64.powf(0.4)).abs() < 1e-14);
        assert_eq!(ncfbm_covariance(1.0, 1.0, h).unwrap(), 1.0);
    }
}
