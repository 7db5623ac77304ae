//! Closed forms: Neumann modes of rectangles, the merged limiting spectrum,
//! index and nodal-count predictions, and `Θ` for a constant profile.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::Parity;
use crate::nodal::eigen_index;

/// Relative gap below which two analytic values are treated as equal.
pub const TIE_GUARD: f64 = 1e-9;

/// Position of the second worked example's even branch as published, and
/// the deficiency derived from it. Both disagree with direct enumeration and
/// are carried as reference fields only.
pub const REFERENCE_SECOND_POSITION: usize = 31;
pub const REFERENCE_SECOND_DEFICIENCY: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("mu = {mu} is at a pole of the closed form")]
    Resonant { mu: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// `cos(jπX/M) cos(nπY/H)` on `[0, M] × [0, H]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectMode {
    pub j: usize,
    pub n: usize,
    pub width: f64,
    pub height: f64,
    pub lambda: f64,
    pub nodal_count: usize,
}

impl RectMode {
    pub fn new(j: usize, n: usize, width: f64, height: f64) -> Self {
        let lambda = PI * PI * ((j * j) as f64 / (width * width) + (n * n) as f64 / (height * height));
        Self {
            j,
            n,
            width,
            height,
            lambda,
            nodal_count: (j + 1) * (n + 1),
        }
    }

    /// Constant making the mode unit in `L²` of the rectangle.
    pub fn normalization(&self) -> f64 {
        let fx = if self.j == 0 { 1.0 } else { 0.5 };
        let fy = if self.n == 0 { 1.0 } else { 0.5 };
        1.0 / (self.width * self.height * fx * fy).sqrt()
    }

    /// Unnormalized value in the rectangle's own frame.
    pub fn shape(&self, x: f64, y: f64) -> f64 {
        (self.j as f64 * PI * x / self.width).cos() * (self.n as f64 * PI * y / self.height).cos()
    }

    /// `L²`-normalized value in the rectangle's own frame.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.normalization() * self.shape(x, y)
    }

    /// Nodal lines of cosine products form a grid, so they cross iff both
    /// factors vanish somewhere inside.
    pub fn has_crossings(&self) -> bool {
        self.j > 0 && self.n > 0
    }
}

/// The first `count` Neumann modes of `[0, width] × [0, height]`, ascending,
/// ties broken by `(n, j)`.
pub fn rect_spectrum(width: f64, height: f64, count: usize) -> Vec<RectMode> {
    assert!(width > 0.0 && height > 0.0, "rectangle sides must be positive");
    if count == 0 {
        return Vec::new();
    }
    // every mode with j or n beyond count - 1 lies above `count` others
    let mut modes: Vec<RectMode> = (0..count)
        .flat_map(|j| (0..count).map(move |n| RectMode::new(j, n, width, height)))
        .collect();
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then((a.n, a.j).cmp(&(b.n, b.j))));
    modes.truncate(count);
    modes
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LimitSource {
    /// A bulk eigenvalue, entered once for each of the two bulks.
    BulkDouble,
    NeckTau,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitEntry {
    pub source: LimitSource,
    pub value: f64,
}

/// Bulk eigenvalues (each twice) merged with the neck Dirichlet values.
#[derive(Clone, Debug, Serialize)]
pub struct LimitSpectrum {
    pub entries: Vec<LimitEntry>,
}

impl LimitSpectrum {
    pub fn new(bulk: &[f64], taus: &[f64]) -> Self {
        let mut entries: Vec<LimitEntry> = bulk
            .iter()
            .flat_map(|&v| {
                [LimitEntry {
                    source: LimitSource::BulkDouble,
                    value: v,
                }; 2]
            })
            .chain(taus.iter().map(|&v| LimitEntry {
                source: LimitSource::NeckTau,
                value: v,
            }))
            .collect();
        entries.sort_by(|a, b| a.value.total_cmp(&b.value));
        Self { entries }
    }

    /// 1-based positions of the bulk entries equal to `mu`.
    pub fn positions_of(&self, mu: f64) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.source == LimitSource::BulkDouble && (e.value - mu).abs() <= TIE_GUARD * mu.abs().max(1.0)
            })
            .map(|(i, _)| i + 1)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BranchIndices {
    pub even: usize,
    pub odd: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub mu: f64,
    pub index_in_bulk: usize,
    pub k: usize,
    pub indices: BranchIndices,
}

/// Branch positions for `k` neck values below `mu` and bulk index `index`:
/// the lower branch takes `2·index + k − 1`, and the lower branch is the
/// even one exactly when `k` is even.
pub fn branch_indices(index: usize, k: usize) -> BranchIndices {
    let low = 2 * index + k - 1;
    if k % 2 == 0 {
        BranchIndices {
            even: low,
            odd: low + 1,
        }
    } else {
        BranchIndices {
            even: low + 1,
            odd: low,
        }
    }
}

/// Index predictions for a simple bulk eigenvalue `mu` given the bulk
/// spectrum (ascending, long enough to contain `mu`) and the neck values.
pub fn predict_limit_indices(mu: f64, bulk: &[f64], taus: &[f64]) -> Result<LimitPrediction, AnalyticError> {
    let close = |a: f64, b: f64| (a - b).abs() <= TIE_GUARD * a.abs().max(b.abs()).max(1.0);
    let hits: Vec<usize> = (0..bulk.len()).filter(|&i| close(bulk[i], mu)).collect();
    let j = match hits.as_slice() {
        [] => {
            return Err(AnalyticError::InvalidInput(format!(
                "mu = {mu} is not in the supplied bulk spectrum"
            )))
        }
        [j] => *j,
        _ => {
            return Err(AnalyticError::AssumptionViolated(format!(
                "mu = {mu} is a multiple bulk eigenvalue"
            )))
        }
    };
    if let Some(t) = taus.iter().find(|&&t| close(t, mu)) {
        return Err(AnalyticError::AssumptionViolated(format!(
            "mu = {mu} coincides with the neck Dirichlet value {t}"
        )));
    }
    if taus.last().is_none_or(|&t| t < mu) {
        return Err(AnalyticError::InvalidInput(format!(
            "neck values must extend beyond mu = {mu} to determine k"
        )));
    }
    let index_in_bulk = eigen_index(bulk, j + 1, TIE_GUARD);
    let k = taus.iter().filter(|&&t| t < mu).count();
    Ok(LimitPrediction {
        mu,
        index_in_bulk,
        k,
        indices: branch_indices(index_in_bulk, k),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodalPrediction {
    pub even_bound: usize,
    pub odd_bound: usize,
    /// The bounds are attained when the bulk mode has no nodal crossings.
    pub equality_expected: bool,
}

/// Nodal-count bounds for the two branches of a bulk mode.
pub fn predict_nodal_counts(mode: &RectMode, k: usize) -> NodalPrediction {
    let b = branch_indices(mode.nodal_count, k);
    NodalPrediction {
        even_bound: b.even,
        odd_bound: b.odd,
        equality_expected: !mode.has_crossings(),
    }
}

/// `Θ_μ` for `g ≡ 1` on `[0, L]` with boundary data `(a, a)` (even) or
/// `(a, −a)` (odd).
pub fn closed_form_theta(mu: f64, length: f64, a: f64, parity: Parity) -> Result<f64, AnalyticError> {
    if !(mu >= 0.0) || !(length > 0.0) || a == 0.0 {
        return Err(AnalyticError::InvalidInput(format!(
            "need mu >= 0, L > 0 and a != 0 (got {mu}, {length}, {a})"
        )));
    }
    if mu == 0.0 {
        return Ok(match parity {
            Parity::Even => 0.0,
            Parity::Odd => 4.0 * a * a / length,
        });
    }
    let s = mu.sqrt();
    let half = 0.5 * s * length;
    // distance of √μ L / 2 from the poles of tan (even) or cot (odd)
    let (c, sn) = (half.cos(), half.sin());
    let denom = match parity {
        Parity::Even => c,
        Parity::Odd => sn,
    };
    if denom.abs() <= 1e-12 {
        return Err(AnalyticError::Resonant { mu });
    }
    Ok(match parity {
        Parity::Even => -2.0 * a * a * s * sn / c,
        Parity::Odd => 2.0 * a * a * s * c / sn,
    })
}

/// 1-based positions among the first `count` rectangle modes whose nodal
/// count equals their eigenvalue index.
pub fn courant_sharp_census(width: f64, height: f64, count: usize) -> Vec<usize> {
    let modes = rect_spectrum(width, height, count);
    let lambdas: Vec<f64> = modes.iter().map(|m| m.lambda).collect();
    (1..=count)
        .filter(|&j| eigen_index(&lambdas, j, TIE_GUARD) == modes[j - 1].nodal_count)
        .collect()
}

/// The bulk aspect used by both worked examples: `M² = 28^{2/3}`, `H = 1`.
pub fn example_width() -> f64 {
    28f64.powf(1.0 / 3.0)
}

/// `(j, n) = (2, 0)`: a crossing-free mode whose two branches are Courant
/// sharp on the dumbbell.
pub fn first_example_mode() -> RectMode {
    RectMode::new(2, 0, example_width(), 1.0)
}

/// `(j, n) = (1, 2)`: a mode with crossings and positive deficiency.
pub fn second_example_mode() -> RectMode {
    RectMode::new(1, 2, example_width(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sturm::SLGrid;
    use proptest::prelude::*;

    fn dirichlet_taus(length: f64, count: usize) -> Vec<f64> {
        (1..=count).map(|n| (n as f64 * PI / length).powi(2)).collect()
    }

    #[test]
    fn square_spectrum() {
        let v: Vec<f64> = rect_spectrum(1.0, 1.0, 4).iter().map(|m| m.lambda).collect();
        let pi2 = PI * PI;
        for (a, b) in v.iter().zip([0.0, pi2, pi2, 2.0 * pi2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn example_rectangle_values() {
        let modes = rect_spectrum(example_width(), 1.0, 20);
        assert!((modes[2].lambda - 4.2815).abs() < 1e-4);
        assert_eq!((modes[2].j, modes[2].n), (2, 0));
        let m = second_example_mode();
        assert!((m.lambda - 40.549).abs() < 1e-3);
        assert_eq!(m.nodal_count, 6);
    }

    #[test]
    fn normalization_is_exact() {
        let m = RectMode::new(3, 2, 1.7, 0.9);
        // midpoint rule is exact for trigonometric polynomials of low degree
        let (nx, ny) = (64, 64);
        let mut s = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                let x = (i as f64 + 0.5) * 1.7 / nx as f64;
                let y = (j as f64 + 0.5) * 0.9 / ny as f64;
                s += m.eval(x, y).powi(2);
            }
        }
        s *= 1.7 * 0.9 / (nx * ny) as f64;
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_example_indices() {
        let bulk: Vec<f64> = rect_spectrum(example_width(), 1.0, 30)
            .iter()
            .map(|m| m.lambda)
            .collect();
        let p = predict_limit_indices(first_example_mode().lambda, &bulk, &dirichlet_taus(2.0, 10)).unwrap();
        assert_eq!((p.index_in_bulk, p.k), (3, 1));
        assert_eq!(p.indices, BranchIndices { even: 7, odd: 6 });
    }

    #[test]
    fn zero_indices() {
        let bulk: Vec<f64> = rect_spectrum(example_width(), 1.0, 5)
            .iter()
            .map(|m| m.lambda)
            .collect();
        let p = predict_limit_indices(0.0, &bulk, &dirichlet_taus(2.0, 3)).unwrap();
        assert_eq!((p.index_in_bulk, p.k), (1, 0));
        assert_eq!(p.indices, BranchIndices { even: 1, odd: 2 });
    }

    #[test]
    fn second_example_by_enumeration() {
        let mu = second_example_mode().lambda;
        // brute force, independent of rect_spectrum
        let m2 = example_width().powi(2);
        let mut below = 0;
        for j in 0..40 {
            for n in 0..40 {
                if PI * PI * ((j * j) as f64 / m2 + (n * n) as f64) < mu {
                    below += 1;
                }
            }
        }
        assert_eq!(below, 14);
        let bulk: Vec<f64> = rect_spectrum(example_width(), 1.0, 40)
            .iter()
            .map(|m| m.lambda)
            .collect();
        let p = predict_limit_indices(mu, &bulk, &dirichlet_taus(2.0, 10)).unwrap();
        assert_eq!((p.index_in_bulk, p.k), (15, 4));
        assert_eq!(p.indices, BranchIndices { even: 33, odd: 34 });
    }

    #[test]
    fn assumption_violations() {
        let bulk = [0.0, 1.0, 1.0, 2.0];
        assert!(matches!(
            predict_limit_indices(1.0, &bulk, &[5.0]),
            Err(AnalyticError::AssumptionViolated(_))
        ));
        assert!(matches!(
            predict_limit_indices(2.0, &bulk, &[2.0, 5.0]),
            Err(AnalyticError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn nodal_predictions() {
        let w = example_width();
        let p = predict_nodal_counts(&RectMode::new(2, 0, w, 1.0), 1);
        assert_eq!((p.even_bound, p.odd_bound, p.equality_expected), (7, 6, true));
        let p = predict_nodal_counts(&RectMode::new(1, 2, w, 1.0), 4);
        assert_eq!((p.even_bound, p.odd_bound, p.equality_expected), (15, 16, false));
        let p = predict_nodal_counts(&RectMode::new(0, 0, w, 1.0), 0);
        assert_eq!((p.even_bound, p.odd_bound, p.equality_expected), (1, 2, true));
    }

    #[test]
    fn theta_special_values() {
        assert_eq!(closed_form_theta(0.0, 1.0, 1.0, Parity::Even).unwrap(), 0.0);
        assert_eq!(closed_form_theta(0.0, 1.0, 1.0, Parity::Odd).unwrap(), 4.0);
        let mu = 4.2815;
        let e = closed_form_theta(mu, 2.0, 1.0, Parity::Even).unwrap();
        let o = closed_form_theta(mu, 2.0, 1.0, Parity::Odd).unwrap();
        let s: f64 = mu.sqrt();
        assert!((e + 2.0 * s * s.tan()).abs() < 1e-12);
        assert!(e.signum() != o.signum());
        assert!(matches!(
            closed_form_theta(PI * PI, 1.0, 1.0, Parity::Even),
            Err(AnalyticError::Resonant { .. })
        ));
    }

    #[test]
    fn census() {
        assert_eq!(courant_sharp_census(1.01, 1.0, 15), vec![1, 2, 4, 9]);
    }

    #[test]
    fn limit_spectrum_doubles_bulk() {
        let s = LimitSpectrum::new(&[0.0, 3.0], &[1.0, 4.0]);
        let v: Vec<f64> = s.entries.iter().map(|e| e.value).collect();
        assert_eq!(v, vec![0.0, 0.0, 1.0, 3.0, 3.0, 4.0]);
        assert_eq!(s.positions_of(3.0), vec![4, 5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn merged_position_matches_formula(pick in 0usize..30, length in 0.5f64..3.0) {
            let bulk: Vec<f64> = rect_spectrum(example_width(), 1.0, 40).iter().map(|m| m.lambda).collect();
            let mu = bulk[pick];
            let taus = dirichlet_taus(length, 40);
            prop_assume!(taus.iter().all(|t| (t - mu).abs() > 1e-6 * mu.max(1.0)));
            let p = predict_limit_indices(mu, &bulk, &taus).unwrap();
            let pos = LimitSpectrum::new(&bulk, &taus).positions_of(mu);
            let (lo, hi) = (p.indices.even.min(p.indices.odd), p.indices.even.max(p.indices.odd));
            prop_assert_eq!(pos, vec![lo, hi]);
        }

        #[test]
        fn closed_form_matches_grid(mu in 0.5f64..60.0, length in prop_oneof![Just(1.0f64), Just(2.0f64)]) {
            let grid = SLGrid::from_fn(length, 4096, |_| 1.0).unwrap();
            prop_assume!(grid.check_resonance(mu, 1e-3).is_ok());
            let s = mu.sqrt() * length / 2.0;
            // stay away from the poles of tan and cot as well
            prop_assume!(s.cos().abs() > 1e-2 && s.sin().abs() > 1e-2);
            for (parity, b) in [(Parity::Even, 1.0), (Parity::Odd, -1.0)] {
                let exact = closed_form_theta(mu, length, 1.0, parity).unwrap();
                let t = grid.theta_checked(mu, 1.0, b).unwrap();
                prop_assert!((t - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{:?} {} {}", parity, t, exact);
            }
        }
    }

    #[test]
    fn normalization_chain() {
        // even extension to two copies, scaled to unit norm on the union
        let m = first_example_mode();
        let half = m.eval(m.width, 0.5) / 2f64.sqrt();
        let a = RectMode::new(2, 0, m.width, 1.0).normalization() * m.shape(m.width, 0.5);
        assert!((half - a / 2f64.sqrt()).abs() < 1e-15);
        assert!((2.0 * (half / m.eval(m.width, 0.5)).powi(2) - 1.0).abs() < 1e-15);
    }
}
