//! Thin-neck sweeps: follow the even and odd eigenvalue branches attached to
//! a bulk eigenvalue `μ` as `ε → 0` and compare them with the limiting
//! predictions.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::{
    self, predict_limit_indices, predict_nodal_counts, rect_spectrum, AnalyticError, BranchIndices, NodalPrediction,
    RectMode,
};
use crate::eigen::{classify_symmetry, smallest_eigenpairs_with, EigenError, EigenOptions, EigenPair, Parity};
use crate::fem::{assemble_mass, assemble_mass_region, assemble_stiffness, interpolate, norms, FeField, SparseSym};
use crate::geometry::{BulkShape, DumbbellSpec, Point};
use crate::mesh::{generate, refine_uniform, MeshError, Region, TriMesh};
use crate::nodal::{count_nodal_domains, eigen_index, DeficiencyRecord, NodalError};
use crate::sturm::{self, analyze, branch_order, BranchOrder, SLAnalysis, SLGrid, SturmError};

/// Eigenvalues closer than this (relative) share an index.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Relative gap below which computed pairs are rotated onto reflection
/// eigenvectors.
pub const SYMMETRY_GAP: f64 = 1e-6;
/// Allowed growth per step when checking that error ratios decrease.
pub const RATIO_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("no {parity:?} eigenvalue near mu = {mu} at epsilon = {epsilon}")]
    BranchNotFound { mu: f64, epsilon: f64, parity: Parity },
    #[error("slope fit needs at least 3 points, got {0}")]
    InsufficientData(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("theorem check failed: {0}")]
    TheoremViolation(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Sturm(#[from] SturmError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Nodal(#[from] NodalError),
}

/// Discretization settings for one sweep.
#[derive(Clone, Debug, Serialize)]
pub struct TrackOptions {
    pub h_bulk: f64,
    pub neck_layers: usize,
    /// Solve on the base mesh and on one uniform refinement, and extrapolate.
    pub richardson: bool,
    /// Extra eigenpairs beyond the larger predicted index.
    pub margin: usize,
    pub tol: f64,
    pub eigen: EigenOptions,
    pub nodal_threshold: f64,
    pub sl_intervals: usize,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            h_bulk: 0.05,
            neck_layers: 4,
            richardson: true,
            margin: 3,
            tol: 1e-6,
            eigen: EigenOptions::default(),
            nodal_threshold: crate::nodal::DEFAULT_THRESHOLD,
            sl_intervals: sturm::DEFAULT_INTERVALS,
        }
    }
}

/// A simple Neumann mode of a rectangular left bulk together with the
/// limiting one-dimensional data on the neck.
#[derive(Clone, Debug)]
pub struct Target {
    pub mode: RectMode,
    /// Distance of the attachment point from the bottom of the rectangle.
    pub offset: f64,
    pub analysis: SLAnalysis,
    pub prediction: analytic::LimitPrediction,
    pub nodal: NodalPrediction,
    grid: SLGrid,
}

impl Target {
    /// Builds the target for bulk mode `(j, n)` of the rectangular left bulk and
    /// checks the simplicity and non-vanishing assumptions.
    pub fn new(spec: &DumbbellSpec, j: usize, n: usize, sl_intervals: usize) -> Result<Self, AsymptoticsError> {
        let (width, height) = match spec.left.shape {
            BulkShape::Rectangle { width, height } => (width, height),
            BulkShape::Polygon(_) => {
                return Err(AsymptoticsError::InvalidInput(
                    "branch tracking needs a rectangular bulk".into(),
                ))
            }
        };
        let mode = RectMode::new(j, n, width, height);
        let offset = spec.left.offset;
        let phi_p0 = mode.eval(width, offset);
        if phi_p0.abs() <= 1e-12 * mode.normalization() {
            return Err(
                AnalyticError::AssumptionViolated(format!("mode ({j}, {n}) vanishes at the attachment point")).into(),
            );
        }
        let mut count = 16;
        let bulk = loop {
            let modes = rect_spectrum(width, height, count);
            if modes
                .last()
                .is_some_and(|m| m.lambda > mode.lambda * (1.0 + 1e-6) + 1e-9)
            {
                break modes;
            }
            count *= 2;
        };
        let bulk: Vec<f64> = bulk.iter().map(|m| m.lambda).collect();
        let grid = SLGrid::new(&spec.neck, sl_intervals)?;
        let m = (grid.count_below(mode.lambda) + 2).min(sl_intervals / 4);
        // boundary value under normalization on the union of both bulks
        let a = phi_p0 / 2f64.sqrt();
        let analysis = analyze(&grid, mode.lambda, a, m)?;
        let prediction = predict_limit_indices(mode.lambda, &bulk, &analysis.taus)?;
        let nodal = predict_nodal_counts(&mode, prediction.k);
        Ok(Self {
            mode,
            offset,
            analysis,
            prediction,
            nodal,
            grid,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mode.lambda
    }

    pub fn theta(&self, parity: Parity) -> f64 {
        match parity {
            Parity::Even => self.analysis.theta_even,
            Parity::Odd => self.analysis.theta_odd,
        }
    }

    pub fn bulk_index(&self) -> usize {
        self.prediction.index_in_bulk
    }

    /// Deficiency of the bulk mode itself.
    pub fn bulk_deficiency(&self) -> i64 {
        self.bulk_index() as i64 - self.mode.nodal_count as i64
    }

    pub fn order(&self) -> Result<BranchOrder, SturmError> {
        branch_order(&self.analysis)
    }

    /// Mode on the left bulk in neck coordinates, unit in `L²(Ω_L)`.
    fn phi_left(&self, p: Point) -> f64 {
        self.mode.eval(p[0] + self.mode.width, p[1] + self.offset)
    }

    /// Reflected extension to both bulks, unit in `L²` of their union.
    pub fn bulk_reference(&self, p: Point, length: f64, parity: Parity) -> f64 {
        let s = 1.0 / 2f64.sqrt();
        if p[0] <= 0.5 * length {
            s * self.phi_left(p)
        } else {
            let q = [length - p[0], p[1]];
            match parity {
                Parity::Even => s * self.phi_left(q),
                Parity::Odd => -s * self.phi_left(q),
            }
        }
    }

    /// Neck solution with the bulk reference's boundary values.
    pub fn neck_reference(&self, x: f64, parity: Parity) -> f64 {
        let xi = match parity {
            Parity::Even => &self.analysis.xi_even,
            Parity::Odd => &self.analysis.xi_odd,
        };
        let n = self.grid.intervals();
        let t = (x / self.grid.h()).clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        (1.0 - f) * xi[i] + f * xi[i + 1]
    }
}

/// The two branches at one `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub vertices: usize,
    pub lambda_even: f64,
    pub lambda_odd: f64,
    /// Base-mesh values; equal to the above when extrapolation is off.
    pub lambda_even_coarse: f64,
    pub lambda_odd_coarse: f64,
    pub index_even: usize,
    pub index_odd: usize,
    pub count_even: usize,
    pub count_odd: usize,
    pub count_stable_even: bool,
    pub count_stable_odd: bool,
    pub h1_err_bulk_even: f64,
    pub h1_err_bulk_odd: f64,
    pub h1_err_neck_even: f64,
    pub h1_err_neck_odd: f64,
    pub order: BranchOrder,
    /// Every computed eigenvalue on the finest mesh, ascending.
    pub spectrum: Vec<f64>,
    /// `(index, count, stable)` for every computed pair on the finest mesh.
    pub courant_checks: Vec<(usize, usize, bool)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchTrace {
    pub mu: f64,
    pub records: Vec<EpsilonRecord>,
}

struct Level {
    mesh: TriMesh,
    pairs: Vec<EigenPair>,
}

fn solve_level(mesh: TriMesh, count: usize, opts: &TrackOptions) -> Result<Level, AsymptoticsError> {
    let k = assemble_stiffness(&mesh);
    let m = assemble_mass(&mesh);
    let count = count.min(mesh.vertex_count());
    let mut pairs = smallest_eigenpairs_with(&k, &m, count, opts.tol, &opts.eigen)?;
    let perm = &mesh
        .mirror
        .as_ref()
        .ok_or_else(|| AsymptoticsError::InvalidInput("dumbbell mesh lacks its mirror map".into()))?
        .perm;
    classify_symmetry(&mut pairs, &m, perm, SYMMETRY_GAP);
    Ok(Level { mesh, pairs })
}

/// Picks, among pairs of the given parity within the window around `μ`,
/// the one overlapping most with the reference on the bulks. Returns its
/// position and the sign that aligns it with the reference.
fn select_branch(
    level: &Level,
    bulk_mass: &SparseSym,
    reference: &[f64],
    parity: Parity,
    mu: f64,
    window: f64,
) -> Option<(usize, f64)> {
    level
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.parity == Some(parity) && (p.lambda - mu).abs() <= window)
        .map(|(i, p)| (i, bulk_mass.inner(&p.vector, reference)))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, overlap)| (i, if overlap < 0.0 { -1.0 } else { 1.0 }))
}

struct Selected {
    lambda: f64,
    position: usize,
    vector: Vec<f64>,
}

fn select_both(
    level: &Level,
    target: &Target,
    spec: &DumbbellSpec,
    epsilon: f64,
) -> Result<[Selected; 2], AsymptoticsError> {
    let length = spec.length();
    let bulk_mass = assemble_mass_region(&level.mesh, Region::is_bulk);
    let window = (10.0 * epsilon * target.theta(Parity::Even).abs().max(target.theta(Parity::Odd).abs())).max(0.5);
    let mut out = Vec::with_capacity(2);
    for parity in [Parity::Even, Parity::Odd] {
        let reference: Vec<f64> = level
            .mesh
            .vertices
            .iter()
            .map(|&p| target.bulk_reference(p, length, parity))
            .collect();
        let (i, sign) = select_branch(level, &bulk_mass, &reference, parity, target.mu(), window).ok_or(
            AsymptoticsError::BranchNotFound {
                mu: target.mu(),
                epsilon,
                parity,
            },
        )?;
        let p = &level.pairs[i];
        out.push(Selected {
            lambda: p.lambda,
            position: i + 1,
            vector: p.vector.iter().map(|v| sign * v).collect(),
        });
    }
    let odd = out.pop().expect("two branches");
    let even = out.pop().expect("two branches");
    Ok([even, odd])
}

fn h1_errors(
    mesh: &TriMesh,
    u: &[f64],
    target: &Target,
    length: f64,
    parity: Parity,
) -> Result<(f64, f64), AsymptoticsError> {
    let field = FeField::new(mesh, u.to_vec()).map_err(|e| AsymptoticsError::InvalidInput(e.to_string()))?;
    let bulk = interpolate(mesh, |p| {
        if p[0] > 0.0 && p[0] < length {
            target.neck_reference(p[0], parity)
        } else {
            target.bulk_reference(p, length, parity)
        }
    })
    .map_err(|e| AsymptoticsError::InvalidInput(e.to_string()))?;
    let neck = interpolate(mesh, |p| target.neck_reference(p[0].clamp(0.0, length), parity))
        .map_err(|e| AsymptoticsError::InvalidInput(e.to_string()))?;
    let eb = norms(&field.sub(&bulk), Region::is_bulk).h1_sq();
    let en = norms(&field.sub(&neck), |r| r == Region::Neck).h1_sq();
    Ok((eb, en))
}

fn extrapolate(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

fn record_at(
    spec: &DumbbellSpec,
    target: &Target,
    epsilon: f64,
    opts: &TrackOptions,
) -> Result<EpsilonRecord, AsymptoticsError> {
    let spec = spec.with_epsilon(epsilon);
    spec.ensure_valid()
        .map_err(|e| AsymptoticsError::InvalidInput(e.to_string()))?;
    let count = target.prediction.indices.even.max(target.prediction.indices.odd) + opts.margin;
    let mesh = generate(&spec, opts.h_bulk, opts.neck_layers)?;
    let fine_mesh = opts.richardson.then(|| refine_uniform(&mesh));
    let coarse = solve_level(mesh, count, opts)?;
    let [ce, co] = select_both(&coarse, target, &spec, epsilon)?;
    let (fine, fe, fo) = match fine_mesh {
        Some(fm) => {
            let level = solve_level(fm, count, opts)?;
            let [e, o] = select_both(&level, target, &spec, epsilon)?;
            (Some(level), Some(e), Some(o))
        }
        None => (None, None, None),
    };
    let last = fine.as_ref().unwrap_or(&coarse);
    let (le, lo) = (fe.as_ref().unwrap_or(&ce), fo.as_ref().unwrap_or(&co));
    let lambdas: Vec<f64> = last.pairs.iter().map(|p| p.lambda).collect();
    let (lambda_even, lambda_odd) = match (&fe, &fo) {
        (Some(e), Some(o)) => (extrapolate(ce.lambda, e.lambda), extrapolate(co.lambda, o.lambda)),
        _ => (ce.lambda, co.lambda),
    };

    let count_of = |mesh: &TriMesh, u: &[f64]| -> Result<usize, AsymptoticsError> {
        let f = FeField::new(mesh, u.to_vec()).map_err(|e| AsymptoticsError::InvalidInput(e.to_string()))?;
        Ok(count_nodal_domains(&f, opts.nodal_threshold)?.count)
    };
    let count_even = count_of(&last.mesh, &le.vector)?;
    let count_odd = count_of(&last.mesh, &lo.vector)?;
    let stable_even = fine.is_none() || count_of(&coarse.mesh, &ce.vector)? == count_even;
    let stable_odd = fine.is_none() || count_of(&coarse.mesh, &co.vector)? == count_odd;

    let length = spec.length();
    let (h1_err_bulk_even, h1_err_neck_even) = h1_errors(&last.mesh, &le.vector, target, length, Parity::Even)?;
    let (h1_err_bulk_odd, h1_err_neck_odd) = h1_errors(&last.mesh, &lo.vector, target, length, Parity::Odd)?;

    // Courant bound over every computed pair; stability compares with the
    // base mesh pair at the same position when the spectra line up
    let mut courant_checks = Vec::with_capacity(last.pairs.len());
    for (i, p) in last.pairs.iter().enumerate() {
        let c = count_of(&last.mesh, &p.vector)?;
        let stable = match &fine {
            Some(_) => {
                let q = &coarse.pairs[i];
                q.parity == p.parity && count_of(&coarse.mesh, &q.vector)? == c
            }
            None => true,
        };
        courant_checks.push((eigen_index(&lambdas, i + 1, CLUSTER_TOL), c, stable));
    }

    Ok(EpsilonRecord {
        epsilon,
        vertices: last.mesh.vertex_count(),
        lambda_even,
        lambda_odd,
        lambda_even_coarse: ce.lambda,
        lambda_odd_coarse: co.lambda,
        index_even: eigen_index(&lambdas, le.position, CLUSTER_TOL),
        index_odd: eigen_index(&lambdas, lo.position, CLUSTER_TOL),
        count_even,
        count_odd,
        count_stable_even: stable_even,
        count_stable_odd: stable_odd,
        h1_err_bulk_even,
        h1_err_bulk_odd,
        h1_err_neck_even,
        h1_err_neck_odd,
        order: if lambda_even < lambda_odd {
            BranchOrder::EvenBelowOdd
        } else {
            BranchOrder::OddBelowEven
        },
        spectrum: lambdas,
        courant_checks,
    })
}

/// Solves the dumbbell at every `ε` (in parallel) and extracts both branches.
pub fn track_branches(
    spec: &DumbbellSpec,
    target: &Target,
    epsilons: &[f64],
    opts: &TrackOptions,
) -> Result<BranchTrace, AsymptoticsError> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(AsymptoticsError::InvalidInput(
            "epsilons must be nonempty and strictly decreasing".into(),
        ));
    }
    let records = epsilons
        .par_iter()
        .map(|&e| record_at(spec, target, e, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BranchTrace {
        mu: target.mu(),
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `y − μ` against `ε` through the origin.
pub fn fit_line_through_origin(eps: &[f64], values: &[f64], mu: f64) -> Result<SlopeFit, AsymptoticsError> {
    if eps.len() < 3 || eps.len() != values.len() {
        return Err(AsymptoticsError::InsufficientData(eps.len().min(values.len())));
    }
    let sxx: f64 = eps.iter().map(|e| e * e).sum();
    let sxy: f64 = eps.iter().zip(values).map(|(e, v)| e * (v - mu)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = eps.iter().zip(values).map(|(e, v)| (v - mu - slope * e).powi(2)).sum();
    let ss_tot: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, r_squared })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoTermFit {
    pub slope: f64,
    pub curvature: f64,
}

/// Least-squares fit of `y − μ = s·ε + c·ε²`. The quadratic term absorbs the
/// leading part of the `o(ε)` remainder, so `s` estimates the derivative at
/// `ε = 0` rather than a secant over the sweep.
pub fn fit_two_term(eps: &[f64], values: &[f64], mu: f64) -> Result<TwoTermFit, AsymptoticsError> {
    if eps.len() < 3 || eps.len() != values.len() {
        return Err(AsymptoticsError::InsufficientData(eps.len().min(values.len())));
    }
    let (mut s2, mut s3, mut s4, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (e, v) in eps.iter().zip(values) {
        let d = v - mu;
        s2 += e * e;
        s3 += e * e * e;
        s4 += e * e * e * e;
        b1 += e * d;
        b2 += e * e * d;
    }
    let det = s2 * s4 - s3 * s3;
    if !(det.abs() > 0.0) {
        return Err(AsymptoticsError::InvalidInput(
            "epsilons do not determine a two-term fit".into(),
        ));
    }
    Ok(TwoTermFit {
        slope: (b1 * s4 - b2 * s3) / det,
        curvature: (s2 * b2 - s3 * b1) / det,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    /// Secant fits through `(0, μ)`.
    pub even: SlopeFit,
    pub odd: SlopeFit,
    pub even_two_term: TwoTermFit,
    pub odd_two_term: TwoTermFit,
    pub target_even: f64,
    pub target_odd: f64,
    pub rel_dev_even: f64,
    pub rel_dev_odd: f64,
    pub rel_dev_even_two_term: f64,
    pub rel_dev_odd_two_term: f64,
}

fn rel_dev(value: f64, target: f64, scale: f64) -> f64 {
    (value - target).abs() / target.abs().max(scale)
}

pub fn fit_slope(trace: &BranchTrace, target: &Target) -> Result<SlopeReport, AsymptoticsError> {
    let eps: Vec<f64> = trace.records.iter().map(|r| r.epsilon).collect();
    let le: Vec<f64> = trace.records.iter().map(|r| r.lambda_even).collect();
    let lo: Vec<f64> = trace.records.iter().map(|r| r.lambda_odd).collect();
    let even = fit_line_through_origin(&eps, &le, trace.mu)?;
    let odd = fit_line_through_origin(&eps, &lo, trace.mu)?;
    let even_two_term = fit_two_term(&eps, &le, trace.mu)?;
    let odd_two_term = fit_two_term(&eps, &lo, trace.mu)?;
    let (te, to) = (target.theta(Parity::Even), target.theta(Parity::Odd));
    // a zero target is compared on the scale of the other branch
    let scale = 1e-3 * te.abs().max(to.abs());
    Ok(SlopeReport {
        even,
        odd,
        even_two_term,
        odd_two_term,
        target_even: te,
        target_odd: to,
        rel_dev_even: rel_dev(even.slope, te, scale),
        rel_dev_odd: rel_dev(odd.slope, to, scale),
        rel_dev_even_two_term: rel_dev(even_two_term.slope, te, scale),
        rel_dev_odd_two_term: rel_dev(odd_two_term.slope, to, scale),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRatios {
    pub epsilons: Vec<f64>,
    pub bulk_even: Vec<f64>,
    pub bulk_odd: Vec<f64>,
    pub neck_even: Vec<f64>,
    pub neck_odd: Vec<f64>,
    /// Every series decreases (up to the slack) as `ε` decreases.
    pub consistent: bool,
}

/// Each series must not grow by more than `RATIO_SLACK` relative per step.
/// Values at rounding level count as decreasing.
pub fn decreasing_with_slack(series: &[f64]) -> bool {
    series
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + RATIO_SLACK) || w[1] <= 1e-14)
}

pub fn eigfn_error_ratios(trace: &BranchTrace) -> ErrorRatios {
    let r = |f: fn(&EpsilonRecord) -> f64| -> Vec<f64> { trace.records.iter().map(|x| f(x) / x.epsilon).collect() };
    let bulk_even = r(|x| x.h1_err_bulk_even);
    let bulk_odd = r(|x| x.h1_err_bulk_odd);
    let neck_even = r(|x| x.h1_err_neck_even);
    let neck_odd = r(|x| x.h1_err_neck_odd);
    let consistent = [&bulk_even, &bulk_odd, &neck_even, &neck_odd]
        .iter()
        .all(|s| decreasing_with_slack(s));
    ErrorRatios {
        epsilons: trace.records.iter().map(|x| x.epsilon).collect(),
        bulk_even,
        bulk_odd,
        neck_even,
        neck_odd,
        consistent,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchDeficiency {
    pub epsilon: f64,
    pub even: DeficiencyRecord,
    pub odd: DeficiencyRecord,
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlSummary {
    pub k: usize,
    pub a: f64,
    pub theta_even: f64,
    pub theta_odd: f64,
    pub n_even: usize,
    pub n_odd: usize,
    pub order: BranchOrder,
    pub neumann_resonant: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictReport {
    pub schema: u32,
    pub mu: f64,
    pub mode: (usize, usize),
    pub bulk_index: usize,
    pub bulk_nodal_count: usize,
    pub bulk_deficiency: i64,
    pub bulk_courant_sharp: bool,
    pub sl: SlSummary,
    pub predicted_indices: BranchIndices,
    pub observed_indices: Vec<BranchIndices>,
    pub indices_match: bool,
    pub nodal_prediction: NodalPrediction,
    pub observed_counts: Vec<(usize, usize)>,
    pub counts_within_bounds: bool,
    pub deficiencies: Vec<BranchDeficiency>,
    /// Branch deficiency is at least twice the bulk deficiency on every
    /// stable record, with equality for crossing-free modes.
    pub deficiency_bound_holds: bool,
    /// Both branches at the smallest `ε` are Courant sharp exactly when the
    /// bulk mode is.
    pub sharpness_transfers: bool,
    pub courant_sharp: bool,
    pub ordering_matches: bool,
    pub courant_bound_holds: bool,
    pub slopes: Option<SlopeReport>,
    pub error_ratios: Option<ErrorRatios>,
    pub trace: BranchTrace,
}

/// Assembles every comparison for a completed trace. Fails with
/// `TheoremViolation` if a hard check does not hold on stable data.
pub fn verdict(target: &Target, trace: BranchTrace) -> Result<VerdictReport, AsymptoticsError> {
    let order = target.order()?;
    let pred = target.prediction.indices;
    let observed_indices: Vec<BranchIndices> = trace
        .records
        .iter()
        .map(|r| BranchIndices {
            even: r.index_even,
            odd: r.index_odd,
        })
        .collect();
    let indices_match = observed_indices.iter().all(|o| *o == pred);
    let observed_counts: Vec<(usize, usize)> = trace.records.iter().map(|r| (r.count_even, r.count_odd)).collect();
    let bounds = target.nodal;
    let counts_within_bounds = trace
        .records
        .iter()
        .filter(|r| r.count_stable_even && r.count_stable_odd)
        .all(|r| r.count_even <= bounds.even_bound && r.count_odd <= bounds.odd_bound);
    let bulk_def = target.bulk_deficiency();
    let deficiencies: Vec<BranchDeficiency> = trace
        .records
        .iter()
        .map(|r| BranchDeficiency {
            epsilon: r.epsilon,
            even: DeficiencyRecord::new(r.index_even, r.count_even),
            odd: DeficiencyRecord::new(r.index_odd, r.count_odd),
            stable: r.count_stable_even && r.count_stable_odd,
        })
        .collect();
    let crossing_free = !target.mode.has_crossings();
    let deficiency_bound_holds = deficiencies.iter().filter(|d| d.stable).all(|d| {
        [d.even, d.odd]
            .iter()
            .all(|x| x.deficiency >= 2 * bulk_def && (!crossing_free || x.deficiency == 2 * bulk_def))
    });
    let bulk_sharp = bulk_def == 0;
    let last = deficiencies.last().expect("trace is nonempty");
    let courant_sharp = last.even.courant_sharp && last.odd.courant_sharp;
    let sharpness_transfers = !last.stable || courant_sharp == bulk_sharp;
    let ordering_matches = trace.records.iter().all(|r| r.order == order);
    let courant_bound_holds = trace
        .records
        .iter()
        .flat_map(|r| r.courant_checks.iter())
        .filter(|c| c.2)
        .all(|c| c.1 <= c.0);
    let slopes = if trace.records.len() >= 3 {
        Some(fit_slope(&trace, target)?)
    } else {
        None
    };
    let error_ratios = (trace.records.len() >= 2).then(|| eigfn_error_ratios(&trace));
    let an = &target.analysis;
    let report = VerdictReport {
        schema: 1,
        mu: target.mu(),
        mode: (target.mode.j, target.mode.n),
        bulk_index: target.bulk_index(),
        bulk_nodal_count: target.mode.nodal_count,
        bulk_deficiency: bulk_def,
        bulk_courant_sharp: bulk_sharp,
        sl: SlSummary {
            k: an.k,
            a: an.a,
            theta_even: an.theta_even,
            theta_odd: an.theta_odd,
            n_even: an.n_even,
            n_odd: an.n_odd,
            order,
            neumann_resonant: an.neumann_resonant,
        },
        predicted_indices: pred,
        observed_indices,
        indices_match,
        nodal_prediction: bounds,
        observed_counts,
        counts_within_bounds,
        deficiencies,
        deficiency_bound_holds,
        sharpness_transfers,
        courant_sharp,
        ordering_matches,
        courant_bound_holds,
        slopes,
        error_ratios,
        trace,
    };
    let mut failed = Vec::new();
    if !report.deficiency_bound_holds {
        failed.push("branch deficiency below twice the bulk deficiency");
    }
    if !report.sharpness_transfers {
        failed.push("Courant sharpness differs between bulk mode and branches");
    }
    if !report.courant_bound_holds {
        failed.push("a stable nodal count exceeds its eigenvalue index");
    }
    if !failed.is_empty() {
        let evidence = serde_json::to_string(&report.deficiencies).unwrap_or_default();
        return Err(AsymptoticsError::TheoremViolation(format!(
            "{}; deficiencies: {evidence}",
            failed.join("; ")
        )));
    }
    Ok(report)
}
