//! Sparse LDLᵀ factorization without pivoting: elimination tree, column
//! counts, then an up-looking numeric phase.

use super::ordering::{approximate_minimum_degree, invert};
use super::EigenError;
use crate::fem::SparseSym;

const NONE: usize = usize::MAX;
/// Pivots below this fraction of the largest diagonal entry are singular.
const PIVOT_THRESHOLD: f64 = 1e-12;

/// `P A Pᵀ = L D Lᵀ` with unit lower triangular `L` stored by columns.
#[derive(Clone, Debug)]
pub struct LdltFactor {
    n: usize,
    /// `perm[k]` is the original row placed at position `k`.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Upper triangle (including diagonal) of `P A Pᵀ` by columns.
fn permuted_upper(a: &SparseSym, perm: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.dim();
    let pinv = invert(perm);
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, v) in a.row(i) {
            let (pi, pj) = (pinv[i], pinv[j]);
            if pi <= pj {
                cols[pj].push((pi, v));
            }
        }
    }
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::new();
    let mut ax = Vec::new();
    ap.push(0);
    for c in cols {
        for (i, v) in c {
            ai.push(i);
            ax.push(v);
        }
        ap.push(ai.len());
    }
    (ap, ai, ax)
}

fn etree(n: usize, ap: &[usize], ai: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut parent = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut work = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for &i0 in &ai[ap[j]..ap[j + 1]] {
            let mut i = i0;
            if i >= j {
                continue;
            }
            while work[i] != j {
                if parent[i] == NONE {
                    parent[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = parent[i];
            }
        }
    }
    (parent, lnz)
}

/// Number of off-diagonal nonzeros in `L` for the given ordering.
pub fn symbolic_nnz(a: &SparseSym, perm: &[usize]) -> usize {
    let (ap, ai, _) = permuted_upper(a, perm);
    etree(a.dim(), &ap, &ai).1.iter().sum()
}

impl LdltFactor {
    /// Factorizes with an approximate minimum degree ordering.
    pub fn factorize(a: &SparseSym) -> Result<Self, EigenError> {
        let perm = approximate_minimum_degree(a);
        Self::factorize_with(a, perm)
    }

    pub fn factorize_with(a: &SparseSym, perm: Vec<usize>) -> Result<Self, EigenError> {
        let n = a.dim();
        let (ap, ai, ax) = permuted_upper(a, &perm);
        let (parent, lnz) = etree(n, &ap, &ai);
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + lnz[j];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];
        let mut next = lp[..n].to_vec();
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut pattern = Vec::with_capacity(n);
        let mut stack = Vec::with_capacity(n);
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = PIVOT_THRESHOLD * scale;

        for k in 0..n {
            pattern.clear();
            for p in ap[k]..ap[k + 1] {
                let i = ai[p];
                if i == k {
                    d[k] += ax[p];
                    continue;
                }
                y[i] += ax[p];
                // reach of i in the elimination tree, stopping at k
                let mut j = i;
                stack.clear();
                while j != NONE && j < k && !marked[j] {
                    marked[j] = true;
                    stack.push(j);
                    j = parent[j];
                }
                while let Some(j) = stack.pop() {
                    pattern.push(j);
                }
            }
            // pattern holds a topological order in reverse; process from the end
            for idx in (0..pattern.len()).rev() {
                let c = pattern[idx];
                let yc = y[c];
                for q in lp[c]..next[c] {
                    y[li[q]] -= lx[q] * yc;
                }
                let l = yc * dinv[c];
                li[next[c]] = k;
                lx[next[c]] = l;
                next[c] += 1;
                d[k] -= yc * l;
                y[c] = 0.0;
                marked[c] = false;
            }
            if !(d[k].abs() > threshold) {
                return Err(EigenError::SingularPivot(perm[k]));
            }
            dinv[k] = 1.0 / d[k];
        }
        Ok(Self { n, perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }

    /// Off-diagonal nonzeros of `L`.
    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Number of negative pivots, which equals the number of negative
    /// eigenvalues of `A` by Sylvester's law of inertia.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        self.solve_permuted(&mut x);
        let mut out = vec![0.0; self.n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = x[k];
        }
        out
    }

    fn solve_permuted(&self, x: &mut [f64]) {
        for j in 0..self.n {
            let xj = x[j];
            for q in self.lp[j]..self.lp[j + 1] {
                x[self.li[q]] -= self.lx[q] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for q in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[q] * x[self.li[q]];
            }
            x[j] = s;
        }
    }

    /// `L D Lᵀ v` in permuted coordinates, for reconstruction checks.
    pub fn reconstruct_apply(&self, v: &[f64]) -> Vec<f64> {
        // w = Lᵀ v
        let mut w = v.to_vec();
        for j in 0..self.n {
            for q in self.lp[j]..self.lp[j + 1] {
                w[j] += self.lx[q] * v[self.li[q]];
            }
        }
        for (wj, dj) in w.iter_mut().zip(&self.d) {
            *wj *= dj;
        }
        let mut out = w.clone();
        for j in 0..self.n {
            for q in self.lp[j]..self.lp[j + 1] {
                out[self.li[q]] += self.lx[q] * w[j];
            }
        }
        out
    }
}
