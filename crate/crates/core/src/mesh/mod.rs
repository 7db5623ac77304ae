//! Conforming, mirror-symmetric triangulations of dumbbell domains.
//!
//! The left bulk is meshed by Delaunay refinement with the neck opening
//! forced in as fixed vertices, the left half of the neck is a structured
//! grid, and the right half of the domain is produced by reflecting
//! everything across the neck midline. The vertex permutation realising the
//! reflection is stored with the mesh.

mod delaunay;
mod io;
mod refine;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{DumbbellSpec, Point};

pub use io::{read_mesh, read_mesh_file, write_mesh, write_mesh_file};
pub use refine::refine_uniform;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    BulkLeft,
    BulkRight,
    Neck,
}

impl Region {
    pub fn is_bulk(self) -> bool {
        matches!(self, Region::BulkLeft | Region::BulkRight)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Region::BulkLeft => 0,
            Region::BulkRight => 1,
            Region::Neck => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Region::BulkLeft,
            1 => Region::BulkRight,
            2 => Region::Neck,
            _ => return None,
        })
    }

    fn mirrored(self) -> Self {
        match self {
            Region::BulkLeft => Region::BulkRight,
            Region::BulkRight => Region::BulkLeft,
            Region::Neck => Region::Neck,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Marker {
    BulkBoundary,
    NeckTop,
    NeckBottom,
    InterfaceLeft,
    InterfaceRight,
}

impl Marker {
    pub fn is_interface(self) -> bool {
        matches!(self, Marker::InterfaceLeft | Marker::InterfaceRight)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Marker::BulkBoundary => 0,
            Marker::NeckTop => 1,
            Marker::NeckBottom => 2,
            Marker::InterfaceLeft => 3,
            Marker::InterfaceRight => 4,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Marker::BulkBoundary,
            1 => Marker::NeckTop,
            2 => Marker::NeckBottom,
            3 => Marker::InterfaceLeft,
            4 => Marker::InterfaceRight,
            _ => return None,
        })
    }

    fn mirrored(self) -> Self {
        match self {
            Marker::InterfaceLeft => Marker::InterfaceRight,
            Marker::InterfaceRight => Marker::InterfaceLeft,
            m => m,
        }
    }
}

/// Reflection `x -> length - x` as a vertex permutation.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshMirror {
    pub perm: Vec<usize>,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Boundary edges oriented with the domain on their left. Interface edges
    /// between bulk and neck are listed too even though they are interior.
    pub boundary_edges: Vec<([usize; 2], Marker)>,
    pub mirror: Option<MeshMirror>,
}

pub(crate) fn triangle_area(p: [Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Smallest interior angle in radians.
pub fn triangle_min_angle(p: [Point; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = (u[0] * v[1] - u[1] * v[0]).abs();
        let dot = u[0] * v[0] + u[1] * v[1];
        best = best.min(cross.atan2(dot));
    }
    best
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(self.triangle_points(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, keep: impl Fn(Region) -> bool) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| keep(self.regions[t]))
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// All undirected edges as sorted pairs, in first-seen order, together
    /// with the number of triangles sharing each.
    pub fn edges(&self) -> Vec<((usize, usize), usize)> {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut out: Vec<((usize, usize), usize)> = Vec::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let k = edge_key(tri[i], tri[(i + 1) % 3]);
                match index.get(&k) {
                    Some(&e) => out[e].1 += 1,
                    None => {
                        index.insert(k, out.len());
                        out.push((k, 1));
                    }
                }
            }
        }
        out
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&((a, b), _)| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest angle over triangles whose region passes `keep`, in degrees.
    pub fn min_angle_deg(&self, keep: impl Fn(Region) -> bool) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| keep(self.regions[t]))
            .map(|t| triangle_min_angle(self.triangle_points(t)).to_degrees())
            .fold(f64::INFINITY, f64::min)
    }

    /// V - E + T.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Checks the structural invariants, returning every violation found.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.vertices.len();
        if self.regions.len() != self.triangles.len() {
            out.push("region count differs from triangle count".into());
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                out.push(format!("triangle {t} references a missing vertex"));
                return out;
            }
            if !(self.triangle_area(t) > 0.0) {
                out.push(format!("triangle {t} has non-positive area"));
            }
        }
        if let Some(p) = self
            .vertices
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            out.push(format!("vertex {p} is not finite"));
        }
        let counts: HashMap<(usize, usize), usize> = self.edges().into_iter().collect();
        let mut listed: HashMap<(usize, usize), Marker> = HashMap::new();
        for &([a, b], m) in &self.boundary_edges {
            let k = edge_key(a, b);
            if listed.insert(k, m).is_some() {
                out.push(format!("boundary edge ({a},{b}) listed twice"));
            }
            match counts.get(&k) {
                None => out.push(format!("boundary edge ({a},{b}) is not a mesh edge")),
                Some(&1) => {}
                Some(&2) if m.is_interface() => {}
                Some(&c) => out.push(format!("edge ({a},{b}) marked {m:?} is shared by {c} triangles")),
            }
        }
        for (&(a, b), &c) in &counts {
            if c > 2 {
                out.push(format!("edge ({a},{b}) shared by {c} triangles"));
            }
            if c == 1 && !listed.contains_key(&(a, b)) {
                out.push(format!("boundary edge ({a},{b}) carries no marker"));
            }
        }
        if let Some(mirror) = &self.mirror {
            out.extend(self.mirror_violations(mirror));
        }
        out
    }

    fn mirror_violations(&self, mirror: &MeshMirror) -> Vec<String> {
        let mut out = Vec::new();
        let p = &mirror.perm;
        let n = self.vertices.len();
        if p.len() != n || p.iter().any(|&j| j >= n) {
            return vec!["mirror is not a permutation of the vertices".into()];
        }
        if (0..n).any(|i| p[p[i]] != i) {
            out.push("mirror is not an involution".into());
        }
        let tol = 4.0 * f64::EPSILON * mirror.length.max(1.0);
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[p[i]]);
            if (mirror.length - a[0] - b[0]).abs() > tol || a[1] != b[1] {
                out.push(format!("vertex {i} is not mirrored by vertex {}", p[i]));
                break;
            }
        }
        let mut tris: HashMap<[usize; 3], Region> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut k = *tri;
            k.sort_unstable();
            tris.insert(k, self.regions[t]);
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut k = tri.map(|v| p[v]);
            k.sort_unstable();
            if tris.get(&k) != Some(&self.regions[t].mirrored()) {
                out.push(format!("mirror image of triangle {t} is missing"));
                break;
            }
        }
        let edges: HashMap<(usize, usize), Marker> = self
            .boundary_edges
            .iter()
            .map(|&([a, b], m)| (edge_key(a, b), m))
            .collect();
        for (&(a, b), &m) in &edges {
            if edges.get(&edge_key(p[a], p[b])) != Some(&m.mirrored()) {
                out.push(format!("mirror image of boundary edge ({a},{b}) is missing"));
                break;
            }
        }
        out
    }

    /// Triangulates a counterclockwise polygon as a single bulk region with
    /// every boundary edge marked as bulk boundary.
    pub fn from_polygon(polygon: &[Point], h: f64) -> Result<TriMesh, MeshError> {
        let pm = delaunay::refine_polygon(polygon, &vec![false; polygon.len()], h)?;
        let regions = vec![Region::BulkLeft; pm.triangles.len()];
        Ok(TriMesh {
            vertices: pm.vertices,
            triangles: pm.triangles,
            regions,
            boundary_edges: pm
                .boundary
                .into_iter()
                .map(|(e, _)| (e, Marker::BulkBoundary))
                .collect(),
            mirror: None,
        })
    }

    /// `[0, width] × [0, height]` split into `nx × ny` cells, each cut along
    /// its rising diagonal.
    pub fn structured_rectangle(width: f64, height: f64, nx: usize, ny: usize) -> TriMesh {
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(([id(i, 0), id(i + 1, 0)], Marker::BulkBoundary));
            boundary_edges.push(([id(i + 1, ny), id(i, ny)], Marker::BulkBoundary));
        }
        for j in 0..ny {
            boundary_edges.push(([id(nx, j), id(nx, j + 1)], Marker::BulkBoundary));
            boundary_edges.push(([id(0, j + 1), id(0, j)], Marker::BulkBoundary));
        }
        TriMesh {
            vertices,
            regions: vec![Region::BulkLeft; triangles.len()],
            triangles,
            boundary_edges,
            mirror: None,
        }
    }
}

/// Height fraction of row `j` out of `layers`.
fn row_height(top: f64, j: usize, layers: usize) -> f64 {
    if j == layers {
        top
    } else {
        top * j as f64 / layers as f64
    }
}

struct LeftBulk {
    mesh: TriMesh,
    /// Vertex indices along the opening, bottom to top.
    opening: Vec<usize>,
}

fn mesh_left_bulk(spec: &DumbbellSpec, h: f64, layers: usize) -> Result<LeftBulk, MeshError> {
    if let Err(e) = spec.ensure_valid() {
        return Err(MeshError::MeshFailure(e.to_string()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::MeshFailure(format!(
            "target edge length {h} must be positive"
        )));
    }
    if layers < 2 {
        return Err(MeshError::MeshFailure(format!(
            "neck_layers = {layers} must be at least 2"
        )));
    }
    let eps = spec.epsilon;
    if !(eps > 0.0) {
        return Err(MeshError::MeshFailure(
            "epsilon must be positive to mesh the neck".into(),
        ));
    }
    let (poly, e) = spec.left.left_polygon();
    let top = eps * spec.neck.eval(0.0);
    let n = poly.len();
    // augmented polygon: opening points inserted after the attachment edge start
    let mut aug = Vec::with_capacity(n + layers + 1);
    let mut protected = Vec::with_capacity(n + layers + 1);
    let mut opening = Vec::with_capacity(layers + 1);
    for i in 0..n {
        aug.push(poly[i]);
        protected.push(false);
        if i == e {
            for j in 0..=layers {
                opening.push(aug.len());
                aug.push([0.0, row_height(top, j, layers)]);
                protected.push(j < layers);
            }
        }
    }
    let pm = delaunay::refine_polygon(&aug, &protected, h)?;
    let mut boundary_edges = Vec::with_capacity(pm.boundary.len());
    for ([a, b], origin) in pm.boundary {
        let marker = if protected[origin] {
            Marker::InterfaceLeft
        } else {
            Marker::BulkBoundary
        };
        boundary_edges.push(([a, b], marker));
    }
    let regions = vec![Region::BulkLeft; pm.triangles.len()];
    Ok(LeftBulk {
        mesh: TriMesh {
            vertices: pm.vertices,
            triangles: pm.triangles,
            regions,
            boundary_edges,
            mirror: None,
        },
        opening,
    })
}

/// Mesh of the left bulk alone, with the neck opening vertices placed as in
/// [`generate`]. Opening edges carry the `InterfaceLeft` marker.
pub fn generate_bulk(spec: &DumbbellSpec, h_bulk: f64, neck_layers: usize) -> Result<TriMesh, MeshError> {
    Ok(mesh_left_bulk(spec, h_bulk, neck_layers)?.mesh)
}

/// Number of neck columns: even, a multiple of the profile's piece count, and
/// fine enough that the horizontal spacing does not exceed `h`.
fn neck_columns(length: f64, pieces: usize, h: f64) -> usize {
    let step = if pieces % 2 == 0 { pieces } else { 2 * pieces };
    let mut nx = step;
    while length / nx as f64 > h {
        nx += step;
    }
    nx
}

/// Meshes the full dumbbell `spec` at its own epsilon.
pub fn generate(spec: &DumbbellSpec, h_bulk: f64, neck_layers: usize) -> Result<TriMesh, MeshError> {
    let LeftBulk { mesh: bulk, opening } = mesh_left_bulk(spec, h_bulk, neck_layers)?;
    let length = spec.length();
    let eps = spec.epsilon;
    let nx = neck_columns(length, spec.neck.pieces(), h_bulk);
    let half = nx / 2;
    let layers = neck_layers;

    let mut vertices = bulk.vertices.clone();
    let mut triangles = bulk.triangles.clone();
    let mut regions = bulk.regions.clone();
    let mut boundary_edges = bulk.boundary_edges.clone();

    // grid[i][j] for columns 0..=half
    let mut grid: Vec<Vec<usize>> = vec![opening.clone()];
    for i in 1..=half {
        let x = if i == half {
            length * 0.5
        } else {
            length * i as f64 / nx as f64
        };
        let top = eps * spec.neck.eval(x);
        let col = (0..=layers)
            .map(|j| {
                vertices.push([x, row_height(top, j, layers)]);
                vertices.len() - 1
            })
            .collect();
        grid.push(col);
    }
    for i in 0..half {
        for j in 0..layers {
            let (a, b) = (grid[i][j], grid[i + 1][j]);
            let (c, d) = (grid[i + 1][j + 1], grid[i][j + 1]);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
            regions.push(Region::Neck);
            regions.push(Region::Neck);
        }
        boundary_edges.push(([grid[i][0], grid[i + 1][0]], Marker::NeckBottom));
        boundary_edges.push(([grid[i + 1][layers], grid[i][layers]], Marker::NeckTop));
    }

    // reflect everything off the axis column
    let left_count = vertices.len();
    let axis: Vec<bool> = {
        let mut on = vec![false; left_count];
        for &v in &grid[half] {
            on[v] = true;
        }
        on
    };
    let mut perm: Vec<usize> = (0..left_count).collect();
    for v in 0..left_count {
        if !axis[v] {
            let p = vertices[v];
            perm[v] = vertices.len();
            vertices.push([length - p[0], p[1]]);
            perm.push(v);
        }
    }
    let left_tris = triangles.len();
    for t in 0..left_tris {
        let [a, b, c] = triangles[t];
        triangles.push([perm[a], perm[c], perm[b]]);
        regions.push(regions[t].mirrored());
    }
    for k in 0..boundary_edges.len() {
        let ([a, b], m) = boundary_edges[k];
        boundary_edges.push(([perm[b], perm[a]], m.mirrored()));
    }
    let mesh = TriMesh {
        vertices,
        triangles,
        regions,
        boundary_edges,
        mirror: Some(MeshMirror { perm, length }),
    };
    let problems = mesh.check_invariants();
    if !problems.is_empty() {
        return Err(MeshError::MeshFailure(problems.join("; ")));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BulkDomain, NeckProfile};

    fn rect_spec(eps: f64) -> DumbbellSpec {
        DumbbellSpec::new(
            BulkDomain::rectangle_mid(3.0366, 1.0, 0.25),
            NeckProfile::constant(1.0, 2.0),
            eps,
        )
    }

    #[test]
    fn rectangle_dumbbell_invariants() {
        let m = generate(&rect_spec(0.1), 0.05, 4).unwrap();
        assert!(m.check_invariants().is_empty());
        assert_eq!(m.euler_characteristic(), 1);
        assert!((m.area() - (2.0 * 3.0366 + 0.2)).abs() < 1e-9);
        assert!(m.min_angle_deg(Region::is_bulk) >= 20.0);
        for t in (0..m.triangle_count()).filter(|&t| m.regions[t].is_bulk()) {
            let p = m.triangle_points(t);
            for i in 0..3 {
                let (a, b) = (p[i], p[(i + 1) % 3]);
                let l = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                assert!(l <= 0.05 * (1.0 + 1e-12), "{l} {a:?} {b:?}");
            }
        }
    }

    #[test]
    fn mirror_coordinates_are_exact() {
        let m = generate(&rect_spec(0.1), 0.05, 4).unwrap();
        let mirror = m.mirror.as_ref().unwrap();
        for (i, p) in m.vertices.iter().enumerate() {
            let q = m.vertices[mirror.perm[i]];
            if p[0] <= mirror.length * 0.5 {
                assert_eq!(q[0], mirror.length - p[0]);
            }
            assert_eq!(q[1], p[1]);
        }
    }

    #[test]
    fn layers_below_two_rejected() {
        assert!(matches!(
            generate(&rect_spec(0.1), 0.05, 1),
            Err(MeshError::MeshFailure(_))
        ));
    }

    #[test]
    fn piecewise_linear_neck_area() {
        let spec = DumbbellSpec::new(
            BulkDomain::rectangle_mid(1.0, 1.0, 0.3),
            NeckProfile::piecewise_linear(vec![0.5, 1.0, 0.75, 1.0, 0.5], 1.0),
            0.05,
        );
        let m = generate(&spec, 0.1, 3).unwrap();
        assert!(m.check_invariants().is_empty());
        let neck = m.region_area(|r| r == Region::Neck);
        assert!((neck - spec.neck_area(0.05)).abs() < 1e-12);
        assert!((m.area() - (2.0 + spec.neck_area(0.05))).abs() < 1e-10);
    }

    #[test]
    fn interface_vertices_shared() {
        let m = generate(&rect_spec(0.05), 0.1, 4).unwrap();
        let iface: Vec<_> = m
            .boundary_edges
            .iter()
            .filter(|(_, mk)| *mk == Marker::InterfaceLeft)
            .collect();
        assert_eq!(iface.len(), 4);
        for ([a, b], _) in iface {
            assert_eq!(m.vertices[*a][0], 0.0);
            assert_eq!(m.vertices[*b][0], 0.0);
        }
    }

    #[test]
    fn bulk_only_mesh() {
        let m = generate_bulk(&rect_spec(0.05), 0.1, 4).unwrap();
        assert!(m.check_invariants().is_empty());
        assert!((m.area() - 3.0366).abs() < 1e-12);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn structured_rectangle_is_valid() {
        let m = TriMesh::structured_rectangle(2.0, 1.0, 8, 4);
        assert!(m.check_invariants().is_empty(), "{:?}", m.check_invariants());
        assert_eq!((m.vertex_count(), m.triangle_count()), (45, 64));
        assert!((m.area() - 2.0).abs() < 1e-12);
        assert_eq!(m.euler_characteristic(), 1);
    }
}
