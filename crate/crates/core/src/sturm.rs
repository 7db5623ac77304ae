//! One-dimensional Sturm-Liouville problem `−(g v′)′ = λ g v` on `[0, L]`.
//!
//! Everything is discretized with P1 elements on a uniform grid using the
//! weighted stiffness `∫ g v′w′` and mass `∫ g v w`. Dirichlet eigenvalues
//! come from bisection on the inertia of `K − τM`, boundary value problems
//! from a pivoted tridiagonal solve.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::NeckProfile;

/// Relative distance from the Dirichlet spectrum below which a BVP is refused.
pub const RESONANCE_GUARD: f64 = 1e-6;
/// Default number of grid intervals.
pub const DEFAULT_INTERVALS: usize = 4096;
/// `|Θ|` at or below this (per unit `a²`) is flagged as Neumann-resonant.
pub const NEUMANN_FLAG: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SturmError {
    #[error("{requested} eigenvalues requested but a grid of {intervals} intervals resolves at most {}", intervals / 4)]
    ResolutionExceeded { requested: usize, intervals: usize },
    #[error("lambda = {lambda} lies within the guard band of a Dirichlet eigenvalue")]
    NearResonance { lambda: f64 },
    #[error("internal mismatch: {0}")]
    InternalMismatch(String),
    #[error("zero count changed under grid doubling ({coarse} -> {fine})")]
    RefineNeeded { coarse: usize, fine: usize },
    #[error("boundary value is zero")]
    ZeroEndpoint,
    #[error("singular tridiagonal system")]
    Singular,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Weighted P1 matrices on a uniform grid. Index `i` runs over all `N + 1`
/// nodes; Dirichlet problems use the interior block.
#[derive(Clone, Debug)]
pub struct SLGrid {
    length: f64,
    g: Vec<f64>,
    k_diag: Vec<f64>,
    k_off: Vec<f64>,
    m_diag: Vec<f64>,
    m_off: Vec<f64>,
}

/// Pivoted Gaussian elimination for a tridiagonal system, overwriting `b`
/// with the solution. `dl`, `d`, `du` are the sub-, main and super-diagonal.
fn tridiagonal_solve(mut dl: Vec<f64>, mut d: Vec<f64>, mut du: Vec<f64>, b: &mut [f64]) -> Result<(), SturmError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    if n == 1 {
        if d[0] == 0.0 {
            return Err(SturmError::Singular);
        }
        b[0] /= d[0];
        return Ok(());
    }
    // dl[i] is reused for the second superdiagonal after a row swap
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(SturmError::Singular);
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let t = d[i + 1];
            d[i + 1] = du[i] - f * t;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -f * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = t;
            let t = b[i];
            b[i] = b[i + 1];
            b[i + 1] = t - f * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(SturmError::Singular);
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
    Ok(())
}

impl SLGrid {
    /// Grid of `intervals` cells with `g` sampled at the nodes.
    pub fn from_fn(length: f64, intervals: usize, g: impl Fn(f64) -> f64) -> Result<Self, SturmError> {
        if intervals < 4 || !(length > 0.0) {
            return Err(SturmError::InvalidGrid(format!(
                "need at least 4 intervals and positive length (got {intervals}, {length})"
            )));
        }
        let h = length / intervals as f64;
        let g: Vec<f64> = (0..=intervals)
            .map(|i| g(if i == intervals { length } else { i as f64 * h }))
            .collect();
        Self::from_samples(length, g)
    }

    pub fn new(profile: &NeckProfile, intervals: usize) -> Result<Self, SturmError> {
        Self::from_fn(profile.length(), intervals, |x| profile.eval(x))
    }

    fn from_samples(length: f64, g: Vec<f64>) -> Result<Self, SturmError> {
        let n = g.len() - 1;
        if let Some(bad) = g.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(SturmError::InvalidGrid(format!("g must be positive, found {bad}")));
        }
        let h = length / n as f64;
        let mut k_diag = vec![0.0; n + 1];
        let mut m_diag = vec![0.0; n + 1];
        let mut k_off = vec![0.0; n];
        let mut m_off = vec![0.0; n];
        for e in 0..n {
            let (ga, gb) = (g[e], g[e + 1]);
            let kk = 0.5 * (ga + gb) / h;
            k_diag[e] += kk;
            k_diag[e + 1] += kk;
            k_off[e] = -kk;
            m_diag[e] += h * (3.0 * ga + gb) / 12.0;
            m_diag[e + 1] += h * (ga + 3.0 * gb) / 12.0;
            m_off[e] = h * (ga + gb) / 12.0;
        }
        Ok(Self {
            length,
            g,
            k_diag,
            k_off,
            m_diag,
            m_off,
        })
    }

    pub fn intervals(&self) -> usize {
        self.g.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.intervals() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.intervals() {
            self.length
        } else {
            i as f64 * self.h()
        }
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// Same interval with twice the cells; `g` at new midpoints is the
    /// average of its neighbours.
    pub fn refined(&self) -> SLGrid {
        let n = self.intervals();
        let mut g = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            g.push(self.g[i]);
            g.push(0.5 * (self.g[i] + self.g[i + 1]));
        }
        g.push(self.g[n]);
        Self::from_samples(self.length, g).expect("refinement keeps g positive")
    }

    /// Number of Dirichlet eigenvalues strictly below `tau`, by Sylvester
    /// inertia of the interior block of `K − τM`.
    pub fn count_below(&self, tau: f64) -> usize {
        let n = self.intervals();
        let mut count = 0;
        let mut d_prev = 0.0;
        for i in 1..n {
            let a = self.k_diag[i] - tau * self.m_diag[i];
            let d = if i == 1 {
                a
            } else {
                let b = self.k_off[i - 1] - tau * self.m_off[i - 1];
                a - b * b / d_prev
            };
            let d = if d == 0.0 { -f64::MIN_POSITIVE } else { d };
            if d < 0.0 {
                count += 1;
            }
            d_prev = d;
        }
        count
    }

    /// The first `m` Dirichlet eigenvalues in ascending order.
    pub fn dirichlet_spectrum(&self, m: usize) -> Result<Vec<f64>, SturmError> {
        let n = self.intervals();
        if m > n / 4 {
            return Err(SturmError::ResolutionExceeded {
                requested: m,
                intervals: n,
            });
        }
        let mut hi = 1.0;
        while self.count_below(hi) < m {
            hi *= 2.0;
        }
        let mut out = Vec::with_capacity(m);
        for j in 1..=m {
            // smallest tau with count_below(tau) >= j
            let (mut lo, mut up) = (0.0f64, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if mid <= lo || mid >= up {
                    break;
                }
                if self.count_below(mid) >= j {
                    up = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + up));
        }
        Ok(out)
    }

    /// Fails with `NearResonance` if a Dirichlet eigenvalue lies within
    /// `guard·max(1, λ)` of `lambda`.
    pub fn check_resonance(&self, lambda: f64, guard: f64) -> Result<(), SturmError> {
        let delta = guard * lambda.abs().max(1.0);
        if self.count_below(lambda - delta) != self.count_below(lambda + delta) {
            return Err(SturmError::NearResonance { lambda });
        }
        Ok(())
    }

    /// Solves `−(gξ′)′ = λgξ` with `ξ(0) = a`, `ξ(L) = b`.
    pub fn solve_bvp(&self, lambda: f64, a: f64, b: f64) -> Result<Vec<f64>, SturmError> {
        self.check_resonance(lambda, RESONANCE_GUARD)?;
        let n = self.intervals();
        let interior = n - 1;
        let diag: Vec<f64> = (1..n).map(|i| self.k_diag[i] - lambda * self.m_diag[i]).collect();
        let off: Vec<f64> = (1..n - 1).map(|i| self.k_off[i] - lambda * self.m_off[i]).collect();
        let mut rhs = vec![0.0; interior];
        rhs[0] -= (self.k_off[0] - lambda * self.m_off[0]) * a;
        rhs[interior - 1] -= (self.k_off[n - 1] - lambda * self.m_off[n - 1]) * b;
        tridiagonal_solve(off.clone(), diag, off, &mut rhs)?;
        let mut xi = Vec::with_capacity(n + 1);
        xi.push(a);
        xi.extend(rhs);
        xi.push(b);
        Ok(xi)
    }

    /// `xᵀ (K − λM) x`, summed by element so constants give exactly zero
    /// stiffness energy.
    fn energy(&self, lambda: f64, x: &[f64]) -> f64 {
        let h = self.h();
        let mut s = 0.0;
        for e in 0..self.intervals() {
            let (ga, gb) = (self.g[e], self.g[e + 1]);
            let (u, v) = (x[e], x[e + 1]);
            let du = v - u;
            let stiff = 0.5 * (ga + gb) / h * du * du;
            let mass = h / 12.0 * ((3.0 * ga + gb) * u * u + 2.0 * (ga + gb) * u * v + (ga + 3.0 * gb) * v * v);
            s += stiff - lambda * mass;
        }
        s
    }

    /// `Θ_λ(a, b)` by quadrature, cross-checked against the endpoint form
    /// `[g ξ ξ′]₀ᴸ` with second-order one-sided derivatives.
    pub fn theta(&self, lambda: f64, a: f64, b: f64) -> Result<Theta, SturmError> {
        let xi = self.solve_bvp(lambda, a, b)?;
        Ok(self.theta_of(lambda, &xi))
    }

    fn theta_of(&self, lambda: f64, xi: &[f64]) -> Theta {
        let n = self.intervals();
        let h = self.h();
        let quadrature = self.energy(lambda, xi);
        let d0 = (-3.0 * xi[0] + 4.0 * xi[1] - xi[2]) / (2.0 * h);
        let dl = (3.0 * xi[n] - 4.0 * xi[n - 1] + xi[n - 2]) / (2.0 * h);
        let endpoint = self.g[n] * xi[n] * dl - self.g[0] * xi[0] * d0;
        Theta { quadrature, endpoint }
    }

    /// Quadrature `Θ` extrapolated from this grid and its refinement, which
    /// removes the `O(h²)` term. Fails with `InternalMismatch` when the
    /// quadrature and endpoint forms disagree by more than `max(1e−6, 5h)`
    /// relative.
    pub fn theta_checked(&self, lambda: f64, a: f64, b: f64) -> Result<f64, SturmError> {
        let t = self.theta(lambda, a, b)?;
        self.check_theta(&t, a, b)?;
        let fine = self.refined();
        let tf = fine.theta(lambda, a, b)?;
        Ok(richardson(t.quadrature, tf.quadrature))
    }

    fn check_theta(&self, t: &Theta, a: f64, b: f64) -> Result<(), SturmError> {
        let gmax = self.g.iter().fold(0.0f64, |m, v| m.max(*v));
        let scale = t.quadrature.abs().max((a * a + b * b) * gmax / self.length);
        let tol = (5.0 * self.h()).max(1e-6);
        if (t.quadrature - t.endpoint).abs() > tol * scale {
            return Err(SturmError::InternalMismatch(format!(
                "quadrature theta {} and endpoint theta {} disagree",
                t.quadrature, t.endpoint
            )));
        }
        Ok(())
    }
}

/// Second-order extrapolation from spacings `h` and `h / 2`.
fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theta {
    pub quadrature: f64,
    pub endpoint: f64,
}

/// Strict sign changes among node values, skipping exact zeros.
pub fn zero_count(xi: &[f64]) -> Result<usize, SturmError> {
    let (first, last) = match (xi.first(), xi.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(SturmError::ZeroEndpoint),
    };
    if first == 0.0 || last == 0.0 {
        return Err(SturmError::ZeroEndpoint);
    }
    let mut count = 0;
    let mut sign = first > 0.0;
    for &v in &xi[1..] {
        if v != 0.0 && (v > 0.0) != sign {
            count += 1;
            sign = v > 0.0;
        }
    }
    Ok(count)
}

/// Zero locations by linear interpolation between nodes of opposite sign.
pub fn zero_positions(grid: &SLGrid, xi: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in xi.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some((j, u)) = last {
            if (u > 0.0) != (v > 0.0) {
                let (xj, xi_) = (grid.x(j), grid.x(i));
                out.push(xj + (xi_ - xj) * u / (u - v));
            }
        }
        last = Some((i, v));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BranchOrder {
    EvenBelowOdd,
    OddBelowEven,
}

/// Neck data for one bulk eigenvalue μ.
#[derive(Clone, Debug, Serialize)]
pub struct SLAnalysis {
    pub taus: Vec<f64>,
    pub mu: f64,
    /// Boundary value used for both solutions (`ξ(0) = a`).
    pub a: f64,
    pub k: usize,
    #[serde(skip)]
    pub xi_even: Vec<f64>,
    #[serde(skip)]
    pub xi_odd: Vec<f64>,
    /// Quadrature values, extrapolated in `h`.
    pub theta_even: f64,
    pub theta_odd: f64,
    pub theta_even_endpoint: f64,
    pub theta_odd_endpoint: f64,
    pub n_even: usize,
    pub n_odd: usize,
    /// `|Θ| ≤ 1e−8·a²` for one of the branches.
    pub neumann_resonant: bool,
}

/// Zero counts of the even and odd solutions, determined by the parity of `k`.
pub fn expected_zero_counts(k: usize) -> (usize, usize) {
    if k % 2 == 0 {
        (k, k + 1)
    } else {
        (k + 1, k)
    }
}

/// Solves both symmetric boundary value problems at `mu` with boundary value
/// `a` and collects the first `m` Dirichlet eigenvalues.
pub fn analyze(grid: &SLGrid, mu: f64, a: f64, m: usize) -> Result<SLAnalysis, SturmError> {
    if a == 0.0 {
        return Err(SturmError::ZeroEndpoint);
    }
    grid.check_resonance(mu, RESONANCE_GUARD)?;
    let taus = grid.dirichlet_spectrum(m)?;
    let k = grid.count_below(mu);
    let xi_even = grid.solve_bvp(mu, a, a)?;
    let xi_odd = grid.solve_bvp(mu, a, -a)?;
    let te = grid.theta_of(mu, &xi_even);
    let to = grid.theta_of(mu, &xi_odd);
    grid.check_theta(&te, a, a)?;
    grid.check_theta(&to, a, -a)?;

    let fine = grid.refined();
    let n_even = zero_count(&xi_even)?;
    let n_odd = zero_count(&xi_odd)?;
    let fine_even = fine.solve_bvp(mu, a, a)?;
    let fine_odd = fine.solve_bvp(mu, a, -a)?;
    let fe = zero_count(&fine_even)?;
    let fo = zero_count(&fine_odd)?;
    let theta_even = richardson(te.quadrature, fine.energy(mu, &fine_even));
    let theta_odd = richardson(to.quadrature, fine.energy(mu, &fine_odd));
    if fe != n_even {
        return Err(SturmError::RefineNeeded {
            coarse: n_even,
            fine: fe,
        });
    }
    if fo != n_odd {
        return Err(SturmError::RefineNeeded {
            coarse: n_odd,
            fine: fo,
        });
    }
    if n_even % 2 != 0 || n_odd % 2 != 1 || n_even.abs_diff(n_odd) != 1 {
        return Err(SturmError::InternalMismatch(format!(
            "zero counts N_e = {n_even}, N_o = {n_odd} violate parity"
        )));
    }
    if expected_zero_counts(k) != (n_even, n_odd) {
        return Err(SturmError::InternalMismatch(format!(
            "zero counts ({n_even}, {n_odd}) inconsistent with k = {k}"
        )));
    }
    let flag = NEUMANN_FLAG * a * a;
    Ok(SLAnalysis {
        taus,
        mu,
        a,
        k,
        xi_even,
        xi_odd,
        theta_even,
        theta_odd,
        theta_even_endpoint: te.endpoint,
        theta_odd_endpoint: to.endpoint,
        n_even,
        n_odd,
        neumann_resonant: theta_even.abs() <= flag || theta_odd.abs() <= flag,
    })
}

/// Which branch lies lower, with the Θ ordering, the zero-count ordering and
/// the parity of `k` required to agree.
pub fn branch_order(an: &SLAnalysis) -> Result<BranchOrder, SturmError> {
    let by_theta = if an.theta_even < an.theta_odd {
        BranchOrder::EvenBelowOdd
    } else {
        BranchOrder::OddBelowEven
    };
    let by_zeros = if an.n_even < an.n_odd {
        BranchOrder::EvenBelowOdd
    } else {
        BranchOrder::OddBelowEven
    };
    let by_parity = if an.k % 2 == 0 {
        BranchOrder::EvenBelowOdd
    } else {
        BranchOrder::OddBelowEven
    };
    if by_theta != by_zeros || by_zeros != by_parity {
        return Err(SturmError::InternalMismatch(format!(
            "branch order disagrees: theta {by_theta:?}, zeros {by_zeros:?}, parity of k {by_parity:?}"
        )));
    }
    Ok(by_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat(length: f64, n: usize) -> SLGrid {
        SLGrid::from_fn(length, n, |_| 1.0).unwrap()
    }

    #[test]
    fn dirichlet_unit_interval() {
        let taus = flat(1.0, 4096).dirichlet_spectrum(5).unwrap();
        for (n, t) in taus.iter().enumerate() {
            let exact = ((n + 1) as f64 * PI).powi(2);
            assert!((t - exact).abs() < 1e-5 * exact, "{t} vs {exact}");
        }
    }

    #[test]
    fn dirichlet_length_two() {
        let taus = flat(2.0, 4096).dirichlet_spectrum(5).unwrap();
        let expect = [2.4674, 9.8696, 22.2066, 39.4784, 61.6850];
        for (t, e) in taus.iter().zip(expect) {
            assert!((t - e).abs() < 1e-4 * e);
        }
    }

    #[test]
    fn resolution_guard() {
        assert!(matches!(
            flat(1.0, 16).dirichlet_spectrum(5),
            Err(SturmError::ResolutionExceeded { .. })
        ));
    }

    #[test]
    fn symmetric_profile_modes_alternate() {
        let profile = NeckProfile::piecewise_linear(vec![1.0, 0.4, 0.7, 0.4, 1.0], 1.0);
        let grid = SLGrid::new(&profile, 256).unwrap();
        let taus = grid.dirichlet_spectrum(6).unwrap();
        // a Dirichlet mode solves the BVP with zero data; probe parity just
        // below each eigenvalue where the even/odd solutions blow up
        for (n, &t) in taus.iter().enumerate() {
            let lam = t * (1.0 - 1e-4);
            let xe = grid.solve_bvp(lam, 1.0, 1.0).unwrap();
            let xo = grid.solve_bvp(lam, 1.0, -1.0).unwrap();
            let amp = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // first mode is even, then odd, ...
            if n % 2 == 0 {
                assert!(amp(&xe) > 10.0 * amp(&xo), "mode {n}");
            } else {
                assert!(amp(&xo) > 10.0 * amp(&xe), "mode {n}");
            }
        }
    }

    #[test]
    fn linear_solution_at_zero() {
        let grid = flat(1.0, 64);
        let xi = grid.solve_bvp(0.0, 1.0, -1.0).unwrap();
        for (i, v) in xi.iter().enumerate() {
            assert!((v - (1.0 - 2.0 * grid.x(i))).abs() < 1e-10);
        }
        assert_eq!(zero_count(&xi).unwrap(), 1);
        let t = grid.theta(0.0, 1.0, -1.0).unwrap();
        assert!((t.quadrature - 4.0).abs() < 1e-10);
    }

    #[test]
    fn constant_solution_at_zero() {
        let profile = NeckProfile::piecewise_linear(vec![0.8, 0.3, 0.8], 1.5);
        let grid = SLGrid::new(&profile, 128).unwrap();
        let xi = grid.solve_bvp(0.0, 1.0, 1.0).unwrap();
        assert!(xi.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(grid.theta(0.0, 1.0, 1.0).unwrap().quadrature.abs() < 1e-9);
    }

    #[test]
    fn even_solution_closed_form() {
        let mu = 4.0 * PI * PI / 28f64.powf(2.0 / 3.0);
        let grid = flat(2.0, 4096);
        let xi = grid.solve_bvp(mu, 1.0, 1.0).unwrap();
        let s = mu.sqrt();
        for (i, v) in xi.iter().enumerate() {
            let exact = (s * (grid.x(i) - 1.0)).cos() / s.cos();
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn theta_closed_forms() {
        let mu: f64 = 4.2815;
        let grid = flat(2.0, 4096);
        let s = mu.sqrt();
        let te = grid.theta_checked(mu, 1.0, 1.0).unwrap();
        let to = grid.theta_checked(mu, 1.0, -1.0).unwrap();
        let ce = -2.0 * s * (s).tan();
        let co = 2.0 * s / (s).tan();
        assert!((te - ce).abs() < 1e-6 * ce.abs(), "{te} {ce}");
        assert!((to - co).abs() < 1e-6 * co.abs(), "{to} {co}");
    }

    #[test]
    fn near_resonance_refused() {
        let grid = flat(2.0, 512);
        let tau = grid.dirichlet_spectrum(2).unwrap()[1];
        assert!(matches!(
            grid.solve_bvp(tau * (1.0 + 1e-9), 1.0, 1.0),
            Err(SturmError::NearResonance { .. })
        ));
    }

    #[test]
    fn zero_counts() {
        assert_eq!(zero_count(&[1.0, 0.5, -0.5, -1.0]).unwrap(), 1);
        assert_eq!(zero_count(&[1.0, 0.0, 1.0]).unwrap(), 0);
        assert!(matches!(zero_count(&[0.0, 1.0]), Err(SturmError::ZeroEndpoint)));
    }

    #[test]
    fn below_first_tau_even_has_no_zeros() {
        let grid = flat(2.0, 1024);
        let an = analyze(&grid, 1.0, 1.0, 4).unwrap();
        assert_eq!((an.k, an.n_even, an.n_odd), (0, 0, 1));
        assert_eq!(branch_order(&an).unwrap(), BranchOrder::EvenBelowOdd);
    }

    #[test]
    fn k_four_table() {
        let grid = flat(2.0, 2048);
        let mu = PI * PI / 28f64.powf(2.0 / 3.0) + 4.0 * PI * PI;
        let an = analyze(&grid, mu, 1.0, 6).unwrap();
        assert_eq!((an.k, an.n_even, an.n_odd), (4, 4, 5));
        assert_eq!(branch_order(&an).unwrap(), BranchOrder::EvenBelowOdd);
    }

    #[test]
    fn k_one_is_odd_below_even() {
        let grid = flat(2.0, 2048);
        let an = analyze(&grid, 4.0 * PI * PI / 28f64.powf(2.0 / 3.0), 1.0, 4).unwrap();
        assert_eq!(an.k, 1);
        assert_eq!(branch_order(&an).unwrap(), BranchOrder::OddBelowEven);
    }

    #[test]
    fn mu_zero() {
        let grid = flat(1.0, 512);
        let an = analyze(&grid, 0.0, 1.0, 3).unwrap();
        assert!(an.theta_even.abs() < 1e-9, "{}", an.theta_even);
        assert!(an.neumann_resonant);
        assert!(an.theta_odd > 0.0);
        assert_eq!(branch_order(&an).unwrap(), BranchOrder::EvenBelowOdd);
    }

    #[test]
    fn zeros_interlace() {
        let profile = NeckProfile::piecewise_linear(vec![0.9, 0.35, 0.6, 0.35, 0.9], 2.0);
        let grid = SLGrid::new(&profile, 2048).unwrap();
        let taus = grid.dirichlet_spectrum(8).unwrap();
        let mu = 0.5 * (taus[5] + taus[6]);
        let an = analyze(&grid, mu, 1.0, 8).unwrap();
        let mut zs: Vec<(f64, bool)> = zero_positions(&grid, &an.xi_even)
            .into_iter()
            .map(|x| (x, true))
            .chain(zero_positions(&grid, &an.xi_odd).into_iter().map(|x| (x, false)))
            .collect();
        zs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in zs.windows(2) {
            assert_ne!(w[0].1, w[1].1);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn symmetric_profile(half: &[f64], length: f64) -> NeckProfile {
            let mut samples = half.to_vec();
            samples.extend(half.iter().rev().skip(1));
            NeckProfile::piecewise_linear(samples, length)
        }

        fn admissible(taus: &[f64], mu: f64) -> bool {
            taus.iter().all(|t| (t - mu).abs() > 1e-4 * mu.max(1.0))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]
            #[test]
            fn zero_count_table(frac in 0.0f64..1.0) {
                let grid = flat(2.0, 2048);
                let taus = grid.dirichlet_spectrum(10).unwrap();
                let mu = frac * taus[9];
                prop_assume!(mu > 0.0 && admissible(&taus, mu));
                let an = analyze(&grid, mu, 1.0, 10).unwrap();
                prop_assert_eq!((an.n_even, an.n_odd), expected_zero_counts(an.k));
                prop_assert_eq!(an.n_even % 2, 0);
                prop_assert_eq!(an.n_odd % 2, 1);
                branch_order(&an).unwrap();
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(50))]
            #[test]
            fn theta_orders_zero_counts(
                half in proptest::collection::vec(0.2f64..1.0, 2..5),
                length in 0.5f64..3.0,
                frac in 0.0f64..1.0,
                a in prop_oneof![0.2f64..2.0, -2.0f64..-0.2],
            ) {
                let grid = SLGrid::new(&symmetric_profile(&half, length), 2048).unwrap();
                let taus = grid.dirichlet_spectrum(8).unwrap();
                let mu = frac * taus[7];
                prop_assume!(mu > 0.0 && admissible(&taus, mu));
                let an = analyze(&grid, mu, a, 8).unwrap();
                prop_assert_eq!(an.n_even > an.n_odd, an.theta_even > an.theta_odd);
                prop_assert!((an.theta_even - an.theta_even_endpoint).abs()
                    <= (5.0 * grid.h()).max(1e-6) * an.theta_even.abs().max(a * a / length));
                let mut zs: Vec<(f64, bool)> = zero_positions(&grid, &an.xi_even)
                    .into_iter()
                    .map(|x| (x, true))
                    .chain(zero_positions(&grid, &an.xi_odd).into_iter().map(|x| (x, false)))
                    .collect();
                zs.sort_by(|p, q| p.0.total_cmp(&q.0));
                for w in zs.windows(2) {
                    prop_assert_ne!(w[0].1, w[1].1);
                }
            }
        }
    }
}
