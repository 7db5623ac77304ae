//! Dumbbell geometry: two mirror-image bulks joined by a thin neck.
//!
//! Everything is expressed in neck coordinates. The neck occupies
//! `[0, L] x [0, eps * g(x)]`, the left bulk lies in `x <= 0` with its
//! attachment point `p0` at the origin, and the right bulk is the reflection
//! of the left one across the vertical line `x = L / 2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

/// Symmetry tolerance for neck profile samples.
const PROFILE_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid dumbbell geometry: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    Constant(f64),
    PiecewiseLinear,
}

/// Neck height profile `g`, sampled uniformly on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeckProfile {
    samples: Vec<f64>,
    length: f64,
    kind: ProfileKind,
}

impl NeckProfile {
    pub fn constant(value: f64, length: f64) -> Self {
        Self {
            samples: vec![value, value],
            length,
            kind: ProfileKind::Constant(value),
        }
    }

    pub fn piecewise_linear(samples: Vec<f64>, length: f64) -> Self {
        Self {
            samples,
            length,
            kind: ProfileKind::PiecewiseLinear,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Number of linear pieces.
    pub fn pieces(&self) -> usize {
        self.samples.len().saturating_sub(1).max(1)
    }

    /// x-coordinate of sample `i`.
    pub fn sample_x(&self, i: usize) -> f64 {
        let n = self.pieces();
        if i == n {
            self.length
        } else {
            self.length * i as f64 / n as f64
        }
    }

    /// Linear interpolation of the samples, clamped to `[0, L]`.
    pub fn eval(&self, x: f64) -> f64 {
        if let ProfileKind::Constant(v) = self.kind {
            return v;
        }
        let n = self.pieces();
        let t = (x / self.length).clamp(0.0, 1.0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let s = t - i as f64;
        self.samples[i] * (1.0 - s) + self.samples[i + 1] * s
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Exact integral of the piecewise-linear profile over `[0, L]`.
    pub fn integral(&self) -> f64 {
        let h = self.length / self.pieces() as f64;
        self.samples.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    }

    fn violations(&self, out: &mut Vec<String>) {
        if self.samples.len() < 2 {
            out.push("g needs at least 2 samples".into());
            return;
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            out.push(format!("neck length {} must be positive", self.length));
        }
        if self.samples.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            out.push("g must be strictly positive".into());
        }
        if self.max() > 1.0 {
            out.push(format!("g maximum {} exceeds 1", self.max()));
        }
        let n = self.samples.len();
        if (0..n).any(|i| (self.samples[i] - self.samples[n - 1 - i]).abs() > PROFILE_SYMMETRY_TOL) {
            out.push("g must be symmetric: g(x) = g(L - x)".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BulkShape {
    Rectangle {
        width: f64,
        height: f64,
    },
    /// Counterclockwise vertex list in the polygon's own coordinates.
    Polygon(Vec<Point>),
}

/// Which edge of the bulk carries the neck.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttachEdge {
    /// Right side of a rectangle.
    Right,
    /// Polygon edge `i -> i+1`; must be vertical and traversed upward.
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkDomain {
    pub shape: BulkShape,
    pub edge: AttachEdge,
    /// Distance of `p0` from the lower end of the attachment edge.
    pub offset: f64,
    /// Half-length `ell` of the flat boundary segment centred at `p0`.
    pub flat_halfwidth: f64,
}

impl BulkDomain {
    pub fn rectangle(width: f64, height: f64, offset: f64, flat_halfwidth: f64) -> Self {
        Self {
            shape: BulkShape::Rectangle { width, height },
            edge: AttachEdge::Right,
            offset,
            flat_halfwidth,
        }
    }

    /// Rectangle with the neck attached at the middle of its right edge.
    pub fn rectangle_mid(width: f64, height: f64, flat_halfwidth: f64) -> Self {
        Self::rectangle(width, height, 0.5 * height, flat_halfwidth)
    }

    /// Vertices in the bulk's own frame, counterclockwise, plus the index of
    /// the attachment edge.
    fn raw_polygon(&self) -> (Vec<Point>, usize) {
        match (&self.shape, self.edge) {
            (BulkShape::Rectangle { width, height }, _) => {
                (vec![[0.0, 0.0], [*width, 0.0], [*width, *height], [0.0, *height]], 1)
            }
            (BulkShape::Polygon(v), AttachEdge::Index(i)) => (v.clone(), i),
            (BulkShape::Polygon(v), AttachEdge::Right) => {
                // rightmost upward vertical edge
                let n = v.len();
                let i = (0..n)
                    .filter(|&i| v[i][0] == v[(i + 1) % n][0] && v[(i + 1) % n][1] > v[i][1])
                    .max_by(|&a, &b| v[a][0].total_cmp(&v[b][0]))
                    .unwrap_or(0);
                (v.clone(), i)
            }
        }
    }

    /// Counterclockwise polygon of `Omega_L` in neck coordinates (p0 at the
    /// origin) and the index of the attachment edge.
    pub fn left_polygon(&self) -> (Vec<Point>, usize) {
        let (poly, e) = self.raw_polygon();
        if poly.is_empty() {
            return (poly, 0);
        }
        let a = poly[e % poly.len()];
        let origin = [a[0], a[1] + self.offset];
        let shifted = poly.iter().map(|p| [p[0] - origin[0], p[1] - origin[1]]).collect();
        (shifted, e % poly.len())
    }

    pub fn area(&self) -> f64 {
        match &self.shape {
            BulkShape::Rectangle { width, height } => width * height,
            BulkShape::Polygon(v) => signed_area(v),
        }
    }

    fn violations(&self, out: &mut Vec<String>) {
        if let BulkShape::Rectangle { width, height } = self.shape {
            if !(width > 0.0 && height > 0.0) {
                out.push(format!("rectangle {width}x{height} must have positive sides"));
                return;
            }
        }
        let (poly, e) = self.raw_polygon();
        if poly.len() < 3 {
            out.push("bulk polygon needs at least 3 vertices".into());
            return;
        }
        if signed_area(&poly) <= 0.0 {
            out.push("bulk polygon must have positive (counterclockwise) area".into());
        }
        if !is_simple(&poly) {
            out.push("bulk polygon must be simple".into());
        }
        let a = poly[e];
        let b = poly[(e + 1) % poly.len()];
        if a[0] != b[0] || b[1] <= a[1] {
            out.push(format!("attachment edge {e} must be vertical and traversed upward"));
            return;
        }
        if poly.iter().any(|p| p[0] > a[0]) {
            out.push("bulk must lie entirely left of its attachment edge".into());
        }
        let len = b[1] - a[1];
        if !(self.flat_halfwidth > 0.0) {
            out.push("flat segment half-length must be positive".into());
        }
        if self.offset - self.flat_halfwidth < 0.0 || self.offset + self.flat_halfwidth > len {
            out.push(format!(
                "flat segment [{}, {}] does not fit on attachment edge of length {len}",
                self.offset - self.flat_halfwidth,
                self.offset + self.flat_halfwidth
            ));
        }
    }
}

/// Reflection across the vertical line `x = L / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mirror {
    pub length: f64,
}

impl Mirror {
    pub fn apply(&self, p: Point) -> Point {
        [self.length - p[0], p[1]]
    }

    pub fn axis(&self) -> f64 {
        0.5 * self.length
    }
}

/// Full description of a symmetric dumbbell `Omega_eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumbbellSpec {
    pub left: BulkDomain,
    pub neck: NeckProfile,
    pub epsilon: f64,
}

impl DumbbellSpec {
    pub fn new(left: BulkDomain, neck: NeckProfile, epsilon: f64) -> Self {
        Self { left, neck, epsilon }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn length(&self) -> f64 {
        self.neck.length()
    }

    pub fn p0(&self) -> Point {
        [0.0, 0.0]
    }

    pub fn p1(&self) -> Point {
        self.mirror_map().apply(self.p0())
    }

    pub fn mirror_map(&self) -> Mirror {
        Mirror {
            length: self.neck.length(),
        }
    }

    /// Area of the separated domain `Omega_L u Omega_R`.
    pub fn bulk_area(&self) -> f64 {
        2.0 * self.left.area()
    }

    pub fn neck_area(&self, epsilon: f64) -> f64 {
        epsilon * self.neck.integral()
    }

    /// Every violated invariant, with a readable reason. Empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.neck.violations(&mut out);
        self.left.violations(&mut out);
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            out.push(format!("epsilon {} must lie in (0, 1]", self.epsilon));
        }
        if self.neck.samples.len() >= 2 {
            let ell = self.left.flat_halfwidth;
            for g_end in [self.neck.samples[0], *self.neck.samples.last().unwrap()] {
                let opening = self.epsilon * g_end;
                if opening >= ell {
                    let msg = format!("neck opening {opening} exceeds flat segment half-length {ell}");
                    if !out.contains(&msg) {
                        out.push(msg);
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), GeometryError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(GeometryError::InvalidSpec(v))
        }
    }

    /// Boundary of `Omega_eps` as closed counterclockwise loops (first point
    /// not repeated). For `epsilon > 0` this is one loop; for `epsilon == 0`
    /// it is the two bulk outlines.
    pub fn boundary_polyline(&self, epsilon: f64) -> Result<Vec<Vec<Point>>, GeometryError> {
        let check = if epsilon > 0.0 {
            self.with_epsilon(epsilon)
        } else {
            self.clone()
        };
        check.ensure_valid()?;
        let (poly, e) = self.left.left_polygon();
        let n = poly.len();
        let mirror = self.mirror_map();
        if epsilon == 0.0 {
            let right: Vec<Point> = poly.iter().rev().map(|&p| mirror.apply(p)).collect();
            return Ok(vec![poly, right]);
        }
        let b = (e + 1) % n;
        // left bulk from the top of the attachment edge round to its bottom
        let left_part: Vec<Point> = (0..n).map(|i| poly[(b + i) % n]).collect();
        let mut out = left_part.clone();
        out.push([0.0, 0.0]);
        out.push([self.length(), 0.0]);
        out.extend(left_part.iter().rev().map(|&p| mirror.apply(p)));
        let m = self.neck.samples.len();
        for i in (0..m).rev() {
            out.push([self.neck.sample_x(i), epsilon * self.neck.samples[i]]);
        }
        Ok(vec![out])
    }
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o = |p: Point, q: Point, r: Point| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let d1 = o(a, b, c);
    let d2 = o(a, b, d);
    let d3 = o(c, d, a);
    let d4 = o(c, d, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0 && r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

/// True when no two non-adjacent edges intersect.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_rect() -> DumbbellSpec {
        let m = 28f64.powf(1.0 / 3.0);
        DumbbellSpec::new(
            BulkDomain::rectangle_mid(m, 1.0, 0.25),
            NeckProfile::constant(1.0, 2.0),
            0.1,
        )
    }

    #[test]
    fn valid_example_dumbbell() {
        let mut s = example_rect();
        s.left = BulkDomain::rectangle_mid(3.0366, 1.0, 0.25);
        assert!(s.validate().is_empty(), "{:?}", s.validate());
    }

    #[test]
    fn opening_too_wide() {
        let mut s = example_rect();
        s.left = BulkDomain::rectangle_mid(3.0366, 1.0, 0.25);
        s.epsilon = 0.3;
        assert_eq!(
            s.validate(),
            vec!["neck opening 0.3 exceeds flat segment half-length 0.25".to_string()]
        );
    }

    #[test]
    fn zero_sample_rejected() {
        let mut s = example_rect();
        s.neck = NeckProfile::piecewise_linear(vec![0.5, 0.0, 0.5], 2.0);
        assert!(s.validate().contains(&"g must be strictly positive".to_string()));
    }

    #[test]
    fn asymmetric_profile_rejected() {
        let mut s = example_rect();
        s.neck = NeckProfile::piecewise_linear(vec![0.5, 0.7, 0.6], 2.0);
        assert!(s.validate().iter().any(|v| v.contains("symmetric")));
    }

    #[test]
    fn feasibility_is_monotone_in_epsilon() {
        let s = example_rect();
        for eps in [0.2, 0.1, 0.05, 0.001] {
            assert!(s.with_epsilon(eps).validate().is_empty());
        }
    }

    #[test]
    fn polyline_contains_neck_corners_and_is_symmetric() {
        let s = example_rect();
        let loops = s.boundary_polyline(0.1).unwrap();
        assert_eq!(loops.len(), 1);
        let poly = &loops[0];
        for c in [[0.0, 0.0], [2.0, 0.0], [2.0, 0.1], [0.0, 0.1]] {
            assert!(poly.contains(&c), "missing corner {c:?}");
        }
        assert!(is_simple(poly));
        assert!(signed_area(poly) > 0.0);
        let mirror = s.mirror_map();
        for p in poly {
            let q = mirror.apply(*p);
            assert!(poly
                .iter()
                .any(|r| (r[0] - q[0]).abs() < 1e-12 && (r[1] - q[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn polyline_area_matches_parts() {
        let mut s = example_rect();
        s.neck = NeckProfile::piecewise_linear(vec![0.6, 0.3, 0.2, 0.3, 0.6], 2.0);
        let poly = &s.boundary_polyline(0.1).unwrap()[0];
        let expect = s.bulk_area() + s.neck_area(0.1);
        assert!((signed_area(poly) - expect).abs() <= 1e-10 * expect);
    }

    #[test]
    fn pwl_top_edge_sampled_at_profile_nodes() {
        let mut s = example_rect();
        let samples = vec![0.6, 0.3, 0.2, 0.3, 0.6];
        s.neck = NeckProfile::piecewise_linear(samples.clone(), 2.0);
        let poly = &s.boundary_polyline(0.1).unwrap()[0];
        let top: Vec<&Point> = poly
            .iter()
            .filter(|p| p[0] >= 0.0 && p[0] <= 2.0 && p[1] > 0.0 && p[1] <= 0.1)
            .collect();
        assert_eq!(top.len(), samples.len());
        for p in &top {
            let q = s.mirror_map().apply(**p);
            assert!(top
                .iter()
                .any(|r| (r[0] - q[0]).abs() <= 1e-12 && (r[1] - q[1]).abs() <= 1e-12));
        }
    }

    #[test]
    fn zero_epsilon_gives_two_bulks() {
        let s = example_rect();
        let loops = s.boundary_polyline(0.0).unwrap();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| signed_area(l) > 0.0));
        assert!(loops[0].iter().all(|p| p[0] <= 0.0));
        assert!(loops[1].iter().all(|p| p[0] >= 2.0));
    }

    #[test]
    fn mirror_is_an_involution() {
        let s = example_rect();
        let m = s.mirror_map();
        assert_eq!(m.apply(s.p0()), s.p1());
        assert_eq!(s.p1(), [2.0, 0.0]);
        let poly = &s.boundary_polyline(0.1).unwrap()[0];
        for i in 0..100 {
            let t = i as f64 / 100.0;
            let a = poly[i % poly.len()];
            let b = poly[(i + 1) % poly.len()];
            let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let back = m.apply(m.apply(q));
            assert!((back[0] - q[0]).abs() <= 1e-14 && back[1] == q[1]);
        }
        let axis = [1.0, 0.037];
        assert_eq!(m.apply(axis), axis);
    }

    #[test]
    fn polygon_bulk_with_indexed_edge() {
        // pentagon with a vertical right edge 1 -> 2
        let pent = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.6], [-0.3, 0.8]];
        let bulk = BulkDomain {
            shape: BulkShape::Polygon(pent),
            edge: AttachEdge::Index(1),
            offset: 0.5,
            flat_halfwidth: 0.3,
        };
        let s = DumbbellSpec::new(bulk, NeckProfile::constant(1.0, 1.0), 0.1);
        assert!(s.validate().is_empty(), "{:?}", s.validate());
        let (poly, e) = s.left.left_polygon();
        assert_eq!(poly[e], [0.0, -0.5]);
        let loops = s.boundary_polyline(0.1).unwrap();
        assert!(is_simple(&loops[0]));
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!is_simple(&bow));
    }
}
