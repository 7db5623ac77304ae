//! Thick-restart block Lanczos for `K u = λ M u` in shift-invert mode.
//!
//! The operator `(K - σM)⁻¹ M` is self-adjoint in the M inner product, so
//! the basis is kept M-orthonormal by two passes of classical Gram-Schmidt
//! against every stored vector. The projected matrix is built from the
//! orthogonalization coefficients and symmetrized before the dense
//! eigensolve.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldlt::LdltFactor;
use super::{EigenError, EigenOptions, EigenPair};
use crate::fem::SparseSym;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct Workspace<'a> {
    m: &'a SparseSym,
    basis: Vec<Vec<f64>>,
}

impl Workspace<'_> {
    fn m_norm(&self, v: &[f64]) -> f64 {
        self.m.inner(v, v).max(0.0).sqrt()
    }

    /// Removes components along the basis; returns the coefficients.
    fn orthogonalize(&self, w: &mut [f64]) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.basis.len()];
        for _ in 0..2 {
            let mw = self.m.mul_vec(w);
            let c: Vec<f64> = self.basis.iter().map(|q| dot(q, &mw)).collect();
            for (q, &ci) in self.basis.iter().zip(&c) {
                axpy(-ci, q, w);
            }
            for (acc, ci) in coeffs.iter_mut().zip(c) {
                *acc += ci;
            }
        }
        coeffs
    }

    /// Appends `w` after orthogonalization, or a fresh random direction if
    /// `w` lies numerically in the span. Returns the coefficients of `w` on
    /// the basis, including the new vector.
    fn append(&mut self, mut w: Vec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let before = self.m_norm(&w);
        let mut coeffs = self.orthogonalize(&mut w);
        let mut r = self.m_norm(&w);
        if r <= 1e-10 * before.max(f64::MIN_POSITIVE) {
            loop {
                let mut fresh: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b = self.m_norm(&fresh);
                self.orthogonalize(&mut fresh);
                let rr = self.m_norm(&fresh);
                if rr > 1e-8 * b {
                    w = fresh;
                    r = rr;
                    break;
                }
            }
            coeffs.push(0.0);
        } else {
            coeffs.push(r);
        }
        for v in &mut w {
            *v /= r;
        }
        self.basis.push(w);
        coeffs
    }
}

fn start_block(n: usize, b: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..b)
        .map(|_| (0..n).map(|_| 1.0 + rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Computes the `k` smallest eigenpairs.
pub(super) fn solve(
    k_mat: &SparseSym,
    m_mat: &SparseSym,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, EigenError> {
    let n = k_mat.dim();
    if k == 0 || k > n || m_mat.dim() != n {
        return Err(EigenError::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional problem"
        )));
    }
    let sigma = opts.shift;
    let shifted = k_mat.add_scaled(m_mat, -sigma);
    let factor = LdltFactor::factorize(&shifted)?;
    let op = |v: &[f64]| factor.solve(&m_mat.mul_vec(v));

    let b = opts.block_size.clamp(1, n);
    let max_dim = opts.max_basis.unwrap_or((2 * k + 8 * b).max(k + 60)).min(n);
    let keep_target = (k + (k / 2).max(b)).min(max_dim.saturating_sub(2 * b));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut ws = Workspace {
        m: m_mat,
        basis: Vec::with_capacity(max_dim + b),
    };
    for v in start_block(n, b, opts.seed) {
        ws.append(v, &mut rng);
    }
    // h[i][j] = q_iᵀ M Op q_j, stored densely, grown as columns are added
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut applied = 0usize;
    let mut restarts = 0usize;
    let mut total_ops = 0usize;

    loop {
        // apply the operator to the newest unapplied block
        let block_end = ws.basis.len();
        let mut new_cols = Vec::new();
        for j in applied..block_end {
            let w = op(&ws.basis[j]);
            total_ops += 1;
            let coeffs = ws.append(w, &mut rng);
            new_cols.push((j, coeffs));
        }
        let dim = ws.basis.len();
        for row in &mut h {
            row.resize(dim, 0.0);
        }
        h.resize_with(dim, || vec![0.0; dim]);
        for (j, coeffs) in new_cols {
            for (i, c) in coeffs.into_iter().enumerate() {
                h[i][j] = c;
            }
        }
        applied = block_end;

        // Rayleigh-Ritz on the applied part
        let m = applied;
        let hm = DMatrix::from_fn(m, m, |i, j| 0.5 * (h[i][j] + h[j][i]));
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let coupling = |idx: usize| -> f64 {
            let y = eig.eigenvectors.column(idx);
            let mut s = 0.0;
            for row in h.iter().take(dim).skip(m) {
                let r: f64 = (0..m).map(|j| row[j] * y[j]).sum();
                s += r * r;
            }
            s.sqrt()
        };
        let wanted = k.min(m);
        let converged = wanted == k
            && order[..k].iter().all(|&idx| {
                let theta = eig.eigenvalues[idx];
                coupling(idx) <= opts.ritz_tol * theta.abs().max(1e-300)
            });
        if converged {
            let mut pairs = Vec::with_capacity(k);
            for (pos, &idx) in order[..k].iter().enumerate() {
                let theta = eig.eigenvalues[idx];
                let y = eig.eigenvectors.column(idx);
                let mut u = vec![0.0; n];
                for (j, q) in ws.basis.iter().take(m).enumerate() {
                    axpy(y[j], q, &mut u);
                }
                let mn = ws.m_norm(&u);
                for v in &mut u {
                    *v /= mn;
                }
                fix_sign(&mut u);
                let lambda = sigma + 1.0 / theta;
                pairs.push(EigenPair::new(lambda, u, k_mat, m_mat, pos + 1));
            }
            pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
            for (i, p) in pairs.iter_mut().enumerate() {
                p.index_1based = i + 1;
            }
            return Ok(pairs);
        }

        if dim + b > max_dim {
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(EigenError::NoConvergence(total_ops));
            }
            // thick restart: keep the leading Ritz vectors and the residual block
            let keep = keep_target.min(m);
            let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim + b);
            for &idx in &order[..keep] {
                let y = eig.eigenvectors.column(idx);
                let mut u = vec![0.0; n];
                for (j, q) in ws.basis.iter().take(m).enumerate() {
                    axpy(y[j], q, &mut u);
                }
                new_basis.push(u);
            }
            let residual_block: Vec<Vec<f64>> = ws.basis[m..dim].to_vec();
            let rb = residual_block.len();
            let mut new_h = vec![vec![0.0; keep + rb]; keep + rb];
            for (a, &idx) in order[..keep].iter().enumerate() {
                new_h[a][a] = eig.eigenvalues[idx];
                let y = eig.eigenvectors.column(idx);
                for (r, row) in h.iter().take(dim).skip(m).enumerate() {
                    let c: f64 = (0..m).map(|j| row[j] * y[j]).sum();
                    new_h[keep + r][a] = c;
                    new_h[a][keep + r] = c;
                }
            }
            new_basis.extend(residual_block);
            ws.basis = new_basis;
            // re-orthonormalize to wash out drift from the combination
            reorthonormalize(&mut ws);
            h = new_h;
            applied = keep;
        }
    }
}

/// One pass of modified Gram-Schmidt in the M inner product. Applied after
/// a restart, where the basis is orthonormal up to rounding.
fn reorthonormalize(ws: &mut Workspace<'_>) {
    for i in 0..ws.basis.len() {
        let (done, rest) = ws.basis.split_at_mut(i);
        let v = &mut rest[0];
        let mv = ws.m.mul_vec(v);
        for q in done.iter() {
            let c = dot(q, &mv);
            axpy(-c, q, v);
        }
        let nv = ws.m.inner(v, v).sqrt();
        for x in v.iter_mut() {
            *x /= nv;
        }
    }
}

/// Makes the largest-magnitude entry positive (first one on ties).
pub(crate) fn fix_sign(u: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if u.get(best).is_some_and(|&v| v < 0.0) {
        for v in u.iter_mut() {
            *v = -*v;
        }
    }
}
