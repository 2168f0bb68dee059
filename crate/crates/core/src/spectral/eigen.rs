//! Dense symmetric eigensolver: Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration (EISPACK `tred2`/`tql2`).

use crate::error::{Error, Result};

const MAX_ITER: usize = 64;

/// Eigenvalues in ascending order and, optionally, the matching
/// eigenvectors as the columns of a row-major `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
}

impl SymmetricEigen {
    /// Component `k` of eigenvector `i`.
    pub fn vector_component(&self, i: usize, k: usize) -> Option<f64> {
        self.vectors.as_ref().map(|v| v[k * self.n + i])
    }

    pub fn vector(&self, i: usize) -> Option<Vec<f64>> {
        self.vectors
            .as_ref()
            .map(|v| (0..self.n).map(|k| v[k * self.n + i]).collect())
    }
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(a, n, false)?.values)
}

/// Decomposes the symmetric matrix `a` (row-major, `n × n`; only the lower
/// triangle is read). Eigenvector signs are fixed so the largest-magnitude
/// component is positive, ties going to the lowest index.
pub fn symmetric_eigen(a: &[f64], n: usize, want_vectors: bool) -> Result<SymmetricEigen> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(SymmetricEigen { n, values: vec![], vectors: want_vectors.then(Vec::new) });
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            v[i * n + j] = a[i * n + j];
            v[j * n + i] = a[i * n + j];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e, n, want_vectors);
    tql2(&mut v, &mut d, &mut e, n, want_vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let vectors = want_vectors.then(|| {
        let mut out = vec![0.0; n * n];
        for (col, &src) in order.iter().enumerate() {
            let mut best = 0;
            for k in 1..n {
                if v[k * n + src].abs() > v[best * n + src].abs() {
                    best = k;
                }
            }
            let sign = if v[best * n + src] < 0.0 { -1.0 } else { 1.0 };
            for k in 0..n {
                out[k * n + col] = sign * v[k * n + src];
            }
        }
        out
    });
    Ok(SymmetricEigen { n, values, vectors })
}

fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize, accumulate: bool) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = v[j * n + j];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..(n - 1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize, rotate: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_ITER {
                    return Err(Error::NoConvergence { index: l, residual: e[l].abs() });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if rotate {
                        for k in 0..n {
                            let row = k * n;
                            h = v[row + i + 1];
                            v[row + i + 1] = s * v[row + i] + c * h;
                            v[row + i] = c * v[row + i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matvec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    fn sym_from(vals: &[f64], n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                a[i * n + j] = vals[k];
                a[j * n + i] = vals[k];
                k += 1;
            }
        }
        a
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let e = symmetric_eigen(&a, 3, true).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = [0.0, 1.0, 1.0, 0.0];
        let e = symmetric_eigen(&a, 2, true).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = e.vector(0).unwrap();
        let u1 = e.vector(1).unwrap();
        assert!((u0[0] - r).abs() < 1e-15 && (u0[1] + r).abs() < 1e-15, "{u0:?}");
        assert!((u1[0] - r).abs() < 1e-15 && (u1[1] - r).abs() < 1e-15, "{u1:?}");
    }

    #[test]
    fn one_by_one() {
        let e = symmetric_eigen(&[-2.5], 1, true).unwrap();
        assert_eq!(e.values, vec![-2.5]);
        assert_eq!(e.vectors.unwrap(), vec![1.0]);
    }

    #[test]
    fn zero_matrix() {
        let e = symmetric_eigen(&[0.0; 16], 4, true).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthonormality(n in 1usize..12, seed in proptest::collection::vec(-3.0f64..3.0, 78)) {
            let a = sym_from(&seed[..n * (n + 1) / 2], n);
            let e = symmetric_eigen(&a, n, true).unwrap();
            let u = e.vectors.as_ref().unwrap();
            let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for i in 0..n {
                let ui: Vec<f64> = (0..n).map(|k| u[k * n + i]).collect();
                let au = matvec(&a, &ui, n);
                let res: f64 = au.iter().zip(&ui).map(|(x, y)| (x - e.values[i] * y).powi(2)).sum::<f64>().sqrt();
                prop_assert!(res <= 1e-8 * fro);
                for j in 0..n {
                    let dot: f64 = (0..n).map(|k| u[k * n + i] * u[k * n + j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - target).abs() < 1e-9);
                }
            }
            // U Λ Uᵀ = A entrywise
            for r in 0..n {
                for c in 0..n {
                    let v: f64 = (0..n).map(|k| u[r * n + k] * e.values[k] * u[c * n + k]).sum();
                    prop_assert!((v - a[r * n + c]).abs() < 1e-8 * fro.max(1.0));
                }
            }
            let values_only = symmetric_eigenvalues(&a, n).unwrap();
            for (x, y) in values_only.iter().zip(&e.values) {
                prop_assert!((x - y).abs() <= 1e-10 * fro.max(1.0));
            }
        }
    }
}
