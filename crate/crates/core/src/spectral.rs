//! Eigenvalue processes, empirical spectral measures and the eigenvalue
//! gradient identities.

pub mod eigen;

use rayon::prelude::*;

use crate::ensemble::MatrixPath;
use crate::error::{Error, Result};
use crate::fgn::TimeGrid;
use crate::matrix::{packed_index, SymMatrix};

pub use eigen::SymmetricEigen;

const DEGENERATE_SPACING: f64 = 1e-10;

/// Sorted eigenvalues of a symmetric matrix and optional eigenvectors.
pub fn decompose(matrix: &SymMatrix, want_vectors: bool) -> Result<SymmetricEigen> {
    eigen::symmetric_eigen(&matrix.to_dense(), matrix.dim(), want_vectors)
}

/// Eigenvalues (ascending) of every matrix of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPath {
    pub grid: TimeGrid,
    pub eigenvalues: Vec<Vec<f64>>,
    /// Row-major `n × n` per time; column `i` pairs with eigenvalue `i`.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl SpectrumPath {
    /// Decomposes each time of `path`. Times are processed in parallel and
    /// collected by index.
    pub fn from_path(path: &MatrixPath, want_vectors: bool) -> Result<Self> {
        let decs: Vec<SymmetricEigen> = path
            .matrices
            .par_iter()
            .map(|m| decompose(m, want_vectors))
            .collect::<Result<_>>()?;
        Ok(Self::from_decompositions(path.grid.clone(), decs, want_vectors))
    }

    /// Sequential variant for callers already running inside a replica-level
    /// parallel loop.
    pub fn from_path_serial(path: &MatrixPath, want_vectors: bool) -> Result<Self> {
        let decs = path
            .matrices
            .iter()
            .map(|m| decompose(m, want_vectors))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_decompositions(path.grid.clone(), decs, want_vectors))
    }

    fn from_decompositions(grid: TimeGrid, decs: Vec<SymmetricEigen>, want_vectors: bool) -> Self {
        let mut eigenvalues = Vec::with_capacity(decs.len());
        let mut eigenvectors = want_vectors.then(|| Vec::with_capacity(decs.len()));
        for d in decs {
            eigenvalues.push(d.values);
            if let (Some(out), Some(v)) = (eigenvectors.as_mut(), d.vectors) {
                out.push(v);
            }
        }
        Self { grid, eigenvalues, eigenvectors }
    }

    pub fn at(&self, t: f64) -> Option<&[f64]> {
        self.grid.index_of(t).map(|k| self.eigenvalues[k].as_slice())
    }

    pub fn measure(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.eigenvalues[k].clone())
    }
}

/// Uniform probability measure on the eigenvalues at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Atoms are sorted on construction.
    pub fn new(mut atoms: Vec<f64>) -> Self {
        atoms.sort_by(f64::total_cmp);
        Self { atoms }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `⟨μ, f⟩ = (1/n) Σ f(λ_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        if self.atoms.is_empty() {
            return 0.0;
        }
        self.atoms.iter().map(|&x| f(x)).sum::<f64>() / self.atoms.len() as f64
    }
}

pub fn empirical_measure(eigenvalues: &[f64]) -> EmpiricalMeasure {
    EmpiricalMeasure::new(eigenvalues.to_vec())
}

/// Gradient of `λ_i` with respect to the independent entry processes
/// `b_kh` (`k ≤ h`), ordered by packed lower-triangle index.
///
/// Off-diagonal entries enter `B` twice and diagonal ones with a `√2`
/// factor, giving `2 u_k u_h` and `√2 u_k²` respectively. The squared norm
/// is `2 (Σ_k u_k²)² = 2`.
pub fn eig_gradient(dec: &SymmetricEigen, i: usize) -> Result<Vec<f64>> {
    let n = dec.n;
    let vectors = dec
        .vectors
        .as_ref()
        .ok_or_else(|| Error::Domain("eigenvectors were not computed".into()))?;
    if i >= n {
        return Err(Error::Domain(format!("eigen index {i} out of range for n = {n}")));
    }
    if n > 1 {
        let gap = min_spacing(&dec.values)?;
        if gap <= DEGENERATE_SPACING {
            return Err(Error::DegenerateSpectrum { spacing: gap });
        }
    }
    let u = |k: usize| vectors[k * n + i];
    let mut grad = vec![0.0; n * (n + 1) / 2];
    for h in 0..n {
        for k in 0..=h {
            grad[packed_index(h, k)] = if h == k {
                std::f64::consts::SQRT_2 * u(k) * u(k)
            } else {
                2.0 * u(k) * u(h)
            };
        }
    }
    Ok(grad)
}

/// `Σ_{k≤h} (∂λ_i/∂b_kh)²`.
pub fn gradient_norm_sq(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum()
}

/// Sorted-order Hoffman–Wielandt comparison between two grid times:
/// `(Σ_i (λ_i(t2) − λ_i(t1))², ‖B(t2) − B(t1)‖_F²)`.
pub fn hoffman_wielandt_gap(path: &MatrixPath, spectrum: &SpectrumPath, t1: f64, t2: f64) -> Result<(f64, f64)> {
    let idx = |t: f64| {
        path.grid
            .index_of(t)
            .ok_or_else(|| Error::Domain(format!("time {t} is not on the grid")))
    };
    let (i1, i2) = (idx(t1)?, idx(t2)?);
    let lhs = eigenvalue_distance_sq(&spectrum.eigenvalues[i1], &spectrum.eigenvalues[i2]);
    let rhs = path.matrices[i2].sub(&path.matrices[i1]).frobenius_norm_sq();
    Ok((lhs, rhs))
}

/// `Σ_i (a_i − b_i)²` for two sorted spectra.
pub fn eigenvalue_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest gap between consecutive sorted eigenvalues.
pub fn min_spacing(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.len() < 2 {
        return Err(Error::UndefinedSpacing);
    }
    Ok(eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{Ensemble, EnsembleConfig};
    use crate::fgn::HurstParameter;
    use crate::rng::SeedSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    #[test]
    fn empirical_measure_examples() {
        assert_eq!(empirical_measure(&[2.5]).integrate(|x| x), 2.5);
        let mu = empirical_measure(&[3.0, -1.0, 0.5]);
        assert_eq!(mu.integrate(|_| 1.0), 1.0);
        assert_eq!(mu.atoms(), &[-1.0, 0.5, 3.0]);
        assert_eq!(empirical_measure(&[-1.0, 1.0]).integrate(|x| x * x), 1.0);
    }

    #[test]
    fn gradient_examples() {
        let one = decompose(&SymMatrix::from_diagonal(&[0.3]), true).unwrap();
        let g = eig_gradient(&one, 0).unwrap();
        assert!((g[0] - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((gradient_norm_sq(&g) - 2.0).abs() < 1e-15);

        let swap = SymMatrix::from_dense_lower(&[0.0, 0.0, 1.0, 0.0], 2);
        let dec = decompose(&swap, true).unwrap();
        let g = eig_gradient(&dec, 0).unwrap();
        // packed order: (0,0), (1,0), (1,1)
        let half_root2 = std::f64::consts::SQRT_2 / 2.0;
        assert!((g[0] - half_root2).abs() < 1e-15);
        assert!((g[1] + 1.0).abs() < 1e-15);
        assert!((g[2] - half_root2).abs() < 1e-15);
        assert!((gradient_norm_sq(&g) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_rejects_degenerate_spectrum() {
        let dec = decompose(&SymMatrix::identity(3), true).unwrap();
        assert!(matches!(eig_gradient(&dec, 1), Err(Error::DegenerateSpectrum { .. })));
        let dec = decompose(&SymMatrix::identity(3), false).unwrap();
        assert!(eig_gradient(&dec, 1).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 6;
        let a = random_sym(n, &mut rng);
        let dec = decompose(&a, true).unwrap();
        let step = 1e-6 * a.frobenius_norm();
        for i in 0..n {
            let grad = eig_gradient(&dec, i).unwrap();
            for h in 0..n {
                for k in 0..=h {
                    // b_kh enters B_kh (and B_hk) with weight 1, B_kk with √2
                    let w = if h == k { std::f64::consts::SQRT_2 } else { 1.0 };
                    let mut plus = a.clone();
                    plus[(h, k)] += w * step;
                    let mut minus = a.clone();
                    minus[(h, k)] -= w * step;
                    let lp = decompose(&plus, false).unwrap().values[i];
                    let lm = decompose(&minus, false).unwrap().values[i];
                    let fd = (lp - lm) / (2.0 * step);
                    assert!((fd - grad[packed_index(h, k)]).abs() < 1e-5, "i={i} ({h},{k}) fd={fd}");
                }
            }
        }
    }

    #[test]
    fn shift_by_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_sym(7, &mut rng);
        let c = 3.25;
        let shifted = SymMatrix::linear_combination(&[(1.0, &a), (c, &SymMatrix::identity(7))]);
        let d0 = decompose(&a, true).unwrap();
        let d1 = decompose(&shifted, true).unwrap();
        for i in 0..7 {
            assert!((d1.values[i] - d0.values[i] - c).abs() < 1e-10 * c.abs().max(1.0) * 10.0);
            let dot: f64 = (0..7).map(|k| d0.vector_component(i, k).unwrap() * d1.vector_component(i, k).unwrap()).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..15 {
            let a = random_sym(n, &mut rng);
            let d = decompose(&a, false).unwrap();
            let max = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((d.values.iter().sum::<f64>() - a.trace()).abs() <= 1e-9 * n as f64 * max.max(1e-300));
        }
    }

    #[test]
    fn hoffman_wielandt_examples() {
        let h = HurstParameter::new(0.7).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let cfg = EnsembleConfig::new(8, h, grid, SeedSpec::new(4), 50).unwrap();
        let ens = Ensemble::new(cfg).unwrap();
        for r in 0..50 {
            let path = ens.replica(r).unwrap();
            let spec = SpectrumPath::from_path(&path, false).unwrap();
            assert_eq!(hoffman_wielandt_gap(&path, &spec, 1.0, 1.0).unwrap(), (0.0, 0.0));
            let (lhs, rhs) = hoffman_wielandt_gap(&path, &spec, 0.5, 1.0).unwrap();
            assert!(lhs <= rhs + 1e-9 * rhs);
        }
        // commuting (diagonal) pair: equality
        let a = SymMatrix::from_diagonal(&[1.0, -2.0, 0.5]);
        let b = SymMatrix::from_diagonal(&[1.5, -1.0, 0.25]);
        let path = MatrixPath { grid: TimeGrid::new(vec![1.0, 2.0]).unwrap(), matrices: vec![a, b] };
        let spec = SpectrumPath::from_path(&path, false).unwrap();
        let (lhs, rhs) = hoffman_wielandt_gap(&path, &spec, 1.0, 2.0).unwrap();
        assert!((lhs - rhs).abs() < 1e-15, "{lhs} {rhs}");
        assert!(hoffman_wielandt_gap(&path, &spec, 1.0, 3.0).is_err());
    }

    #[test]
    fn min_spacing_examples() {
        assert_eq!(min_spacing(&[0.0, 1.0, 3.0]).unwrap(), 1.0);
        assert_eq!(min_spacing(&[0.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(min_spacing(&[1.0]), Err(Error::UndefinedSpacing)));
    }

    #[test]
    fn n_two_spectra_never_collide() {
        let h = HurstParameter::new(0.7).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let reps = 10_000;
        let ens = Ensemble::new(EnsembleConfig::new(2, h, grid, SeedSpec::new(2), reps).unwrap()).unwrap();
        let positive = (0..reps)
            .filter(|&r| {
                let p = ens.replica(r).unwrap();
                let d = decompose(&p.matrices[1], false).unwrap();
                min_spacing(&d.values).unwrap() > 0.0
            })
            .count();
        assert_eq!(positive, reps);
    }
}
