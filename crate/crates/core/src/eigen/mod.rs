//! Smallest eigenpairs of the generalized problem `K u = λ M u`.

mod lanczos;
pub mod ldlt;
pub mod ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{FeField, SparseSym};
use crate::mesh::TriMesh;

pub use ldlt::LdltFactor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("singular pivot at row {0}")]
    SingularPivot(usize),
    #[error("no convergence after {0} operator applications")]
    NoConvergence(usize),
    #[error("{size} eigenvalues starting at index {start} form a cluster larger than an even/odd pair")]
    AmbiguousCluster { start: usize, size: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: f64,
    /// Nodal coefficients with `uᵀ M u = 1`.
    pub vector: Vec<f64>,
    /// `‖K u − λ M u‖₂ / ‖u‖₂`.
    pub residual: f64,
    pub index_1based: usize,
    pub parity: Option<Parity>,
    /// `min(‖u − Pu‖, ‖u + Pu‖) / max(...)` in the M norm once classified.
    pub parity_defect: Option<f64>,
}

impl EigenPair {
    pub(crate) fn new(lambda: f64, vector: Vec<f64>, k: &SparseSym, m: &SparseSym, index_1based: usize) -> Self {
        let residual = residual(k, m, lambda, &vector);
        Self {
            lambda,
            vector,
            residual,
            index_1based,
            parity: None,
            parity_defect: None,
        }
    }

    pub fn field<'a>(&self, mesh: &'a TriMesh) -> FeField<'a> {
        FeField::new(mesh, self.vector.clone()).expect("eigenvector length matches mesh")
    }
}

pub fn residual(k: &SparseSym, m: &SparseSym, lambda: f64, u: &[f64]) -> f64 {
    let ku = k.mul_vec(u);
    let mu = m.mul_vec(u);
    let r: f64 = ku
        .iter()
        .zip(&mu)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let nu: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / nu
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Spectral shift σ; `K − σM` must be positive definite.
    pub shift: f64,
    pub block_size: usize,
    /// Ritz residual bound relative to the operator eigenvalue.
    pub ritz_tol: f64,
    /// Largest Krylov basis before a thick restart.
    pub max_basis: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: -1.0,
            block_size: 4,
            ritz_tol: 1e-11,
            max_basis: None,
            max_restarts: 200,
            seed: 0x5eed,
        }
    }
}

/// The `k` smallest eigenpairs in ascending order. Pairs whose residual
/// exceeds `tol` are reported as a convergence failure.
pub fn smallest_eigenpairs(
    k_mat: &SparseSym,
    m_mat: &SparseSym,
    k: usize,
    tol: f64,
) -> Result<Vec<EigenPair>, EigenError> {
    smallest_eigenpairs_with(k_mat, m_mat, k, tol, &EigenOptions::default())
}

pub fn smallest_eigenpairs_with(
    k_mat: &SparseSym,
    m_mat: &SparseSym,
    k: usize,
    tol: f64,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, EigenError> {
    let pairs = lanczos::solve(k_mat, m_mat, k, opts)?;
    if let Some(bad) = pairs.iter().find(|p| !(p.residual <= tol)) {
        return Err(EigenError::NoConvergence(bad.index_1based));
    }
    Ok(pairs)
}

#[derive(Clone, Debug, Default)]
pub struct SymmetryReport {
    /// Clusters of more than two eigenvalues, as `(first index, size)`.
    pub ambiguous: Vec<(usize, usize)>,
}

fn m_norm(m: &SparseSym, v: &[f64]) -> f64 {
    m.inner(v, v).max(0.0).sqrt()
}

fn parity_of(m: &SparseSym, perm: &[usize], u: &[f64]) -> (Parity, f64) {
    let pu: Vec<f64> = perm.iter().map(|&j| u[j]).collect();
    let minus: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a - b).collect();
    let plus: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a + b).collect();
    let (asym, sym) = (m_norm(m, &minus), m_norm(m, &plus));
    if asym <= sym {
        (Parity::Even, asym / sym)
    } else {
        (Parity::Odd, sym / asym)
    }
}

/// Labels each pair even or odd under the mirror permutation `perm`.
///
/// Eigenvalues closer than `gap_tol·|λ|` are grouped, and each group is
/// rotated onto the eigenvectors of the reflection restricted to its span.
/// Groups of more than two are rotated too but reported as ambiguous.
pub fn classify_symmetry(pairs: &mut [EigenPair], m: &SparseSym, perm: &[usize], gap_tol: f64) -> SymmetryReport {
    let mut report = SymmetryReport::default();
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() {
            let (a, b) = (pairs[end - 1].lambda, pairs[end].lambda);
            if (b - a).abs() > gap_tol * a.abs().max(b.abs()) {
                break;
            }
            end += 1;
        }
        if end - start > 1 {
            rotate_cluster(&mut pairs[start..end], m, perm);
            if end - start > 2 {
                report.ambiguous.push((pairs[start].index_1based, end - start));
            }
        }
        for p in &mut pairs[start..end] {
            let (parity, defect) = parity_of(m, perm, &p.vector);
            p.parity = Some(parity);
            p.parity_defect = Some(defect);
        }
        start = end;
    }
    report
}

fn rotate_cluster(pairs: &mut [EigenPair], m: &SparseSym, perm: &[usize]) {
    let c = pairs.len();
    let mus: Vec<Vec<f64>> = pairs.iter().map(|p| m.mul_vec(&p.vector)).collect();
    let r = DMatrix::from_fn(c, c, |i, j| {
        let puj: Vec<f64> = perm.iter().map(|&v| pairs[j].vector[v]).collect();
        let rij: f64 = mus[i].iter().zip(&puj).map(|(a, b)| a * b).sum();
        let pui: Vec<f64> = perm.iter().map(|&v| pairs[i].vector[v]).collect();
        let rji: f64 = mus[j].iter().zip(&pui).map(|(a, b)| a * b).sum();
        0.5 * (rij + rji)
    });
    let eig = SymmetricEigen::new(r);
    // even (reflection eigenvalue +1) first
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let old: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.clone()).collect();
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    for (slot, &idx) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(idx);
        let mut u = vec![0.0; old[0].len()];
        for (j, v) in old.iter().enumerate() {
            for (ui, vi) in u.iter_mut().zip(v) {
                *ui += y[j] * vi;
            }
        }
        let nu = m_norm(m, &u);
        for ui in &mut u {
            *ui /= nu;
        }
        lanczos::fix_sign(&mut u);
        // Rayleigh quotient within the cluster
        let lambda: f64 = (0..c).map(|j| y[j] * y[j] * lambdas[j]).sum();
        pairs[slot].vector = u;
        pairs[slot].lambda = lambda;
    }
}
