use std::ops::{Index, IndexMut};

/// Real symmetric matrix stored as its packed lower triangle.
///
/// Entry `(i, j)` and `(j, i)` share one slot, so symmetry is structural.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds from a dense row-major matrix, reading the lower triangle only.
    pub fn from_dense_lower(dense: &[f64], n: usize) -> Self {
        assert_eq!(dense.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = dense[i * n + j];
            }
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Packed lower triangle, row by row.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self[(i, j)];
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let v = self[(i, j)];
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// `Σ_k coeff_k · M_k` over matrices of equal dimension.
    pub fn linear_combination(terms: &[(f64, &SymMatrix)]) -> SymMatrix {
        let n = terms.first().map_or(0, |(_, m)| m.n);
        let mut out = Self::zeros(n);
        for (c, m) in terms {
            assert_eq!(m.n, n, "dimension mismatch");
            for (o, v) in out.data.iter_mut().zip(&m.data) {
                *o += c * v;
            }
        }
        out
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// `tr(A B)` for symmetric `A`, `B`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                let p = self[(i, j)] * other[(i, j)];
                s += if i == j { p } else { 2.0 * p };
            }
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[packed_index(i, j)]
    }
}

impl IndexMut<(usize, usize)> for SymMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[packed_index(i, j)]
    }
}
