//! P1 finite elements: stiffness and consistent mass matrices, nodal
//! interpolation and region-restricted norms.

use thiserror::Error;

use crate::geometry::Point;
use crate::mesh::{Region, TriMesh};

#[derive(Debug, Error, PartialEq)]
pub enum FemError {
    #[error("function is not finite at vertex {vertex} ({x}, {y})")]
    NonFinite { vertex: usize, x: f64, y: f64 },
    #[error("field has {found} coefficients but the mesh has {expected} vertices")]
    LengthMismatch { expected: usize, found: usize },
}

/// Symmetric sparse matrix in CSR form with both triangles stored and
/// column indices sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from per-row sorted column lists with zero values.
    pub fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Dense symmetric input, keeping entries that are not exactly zero plus
    /// the diagonal.
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<usize>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| (0..r.len()).filter(|&j| j == i || r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(&rows);
        for (i, r) in a.iter().enumerate() {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = r[m.col_idx[k]];
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut m = Self::from_pattern(&rows);
        m.values.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let cols = &self.col_idx[lo..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, xi) in x.iter().enumerate().take(self.n) {
            let mut r = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                r += self.values[k] * y[self.col_idx[k]];
            }
            s += xi * r;
        }
        s
    }

    /// Infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// `self + alpha * other`; both must share a pattern.
    pub fn add_scaled(&self, other: &SparseSym, alpha: f64) -> SparseSym {
        assert!(
            self.row_ptr == other.row_ptr && self.col_idx == other.col_idx,
            "sparsity patterns differ"
        );
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += alpha * w;
        }
        out
    }
}

/// Nodal values of a P1 function on a mesh.
#[derive(Clone, Debug)]
pub struct FeField<'a> {
    mesh: &'a TriMesh,
    coeffs: Vec<f64>,
}

impl<'a> FeField<'a> {
    pub fn new(mesh: &'a TriMesh, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != mesh.vertex_count() {
            return Err(FemError::LengthMismatch {
                expected: mesh.vertex_count(),
                found: coeffs.len(),
            });
        }
        Ok(Self { mesh, coeffs })
    }

    pub fn mesh(&self) -> &'a TriMesh {
        self.mesh
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `self - other` on the same mesh.
    pub fn sub(&self, other: &FeField<'_>) -> FeField<'a> {
        FeField {
            mesh: self.mesh,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> FeField<'a> {
        FeField {
            mesh: self.mesh,
            coeffs: self.coeffs.iter().map(|a| s * a).collect(),
        }
    }
}

pub fn interpolate<'a>(mesh: &'a TriMesh, f: impl Fn(Point) -> f64) -> Result<FeField<'a>, FemError> {
    let mut coeffs = Vec::with_capacity(mesh.vertex_count());
    for (vertex, &p) in mesh.vertices.iter().enumerate() {
        let v = f(p);
        if !v.is_finite() {
            return Err(FemError::NonFinite {
                vertex,
                x: p[0],
                y: p[1],
            });
        }
        coeffs.push(v);
    }
    Ok(FeField { mesh, coeffs })
}

/// Gradient coefficients `(b, c)` and area of a triangle; the gradient of
/// the i-th hat function is `(b_i, c_i) / (2A)`.
fn element_geometry(p: [Point; 3]) -> ([f64; 3], [f64; 3], f64) {
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let area = 0.5 * (b[0] * c[1] - b[1] * c[0]);
    (b, c, area)
}

pub fn element_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let (b, c, area) = element_geometry(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

pub fn element_mass(p: [Point; 3]) -> [[f64; 3]; 3] {
    let (_, _, area) = element_geometry(p);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

fn mesh_pattern(mesh: &TriMesh) -> SparseSym {
    let mut rows: Vec<Vec<usize>> = (0..mesh.vertex_count()).map(|i| vec![i]).collect();
    for t in &mesh.triangles {
        for &a in t {
            for &b in t {
                rows[a].push(b);
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    SparseSym::from_pattern(&rows)
}

fn assemble(mesh: &TriMesh, keep: impl Fn(Region) -> bool, element: fn([Point; 3]) -> [[f64; 3]; 3]) -> SparseSym {
    let mut a = mesh_pattern(mesh);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if !keep(mesh.regions[t]) {
            continue;
        }
        let e = element(mesh.triangle_points(t));
        for i in 0..3 {
            for j in 0..3 {
                a.add_to(tri[i], tri[j], e[i][j]);
            }
        }
    }
    a
}

pub fn assemble_stiffness(mesh: &TriMesh) -> SparseSym {
    assemble(mesh, |_| true, element_stiffness)
}

pub fn assemble_mass(mesh: &TriMesh) -> SparseSym {
    assemble(mesh, |_| true, element_mass)
}

/// Stiffness over the triangles whose region passes `keep`, on the full
/// mesh pattern.
pub fn assemble_stiffness_region(mesh: &TriMesh, keep: impl Fn(Region) -> bool) -> SparseSym {
    assemble(mesh, keep, element_stiffness)
}

pub fn assemble_mass_region(mesh: &TriMesh, keep: impl Fn(Region) -> bool) -> SparseSym {
    assemble(mesh, keep, element_mass)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub l2_sq: f64,
    pub h1_semi_sq: f64,
}

impl Norms {
    pub fn h1_sq(&self) -> f64 {
        self.l2_sq + self.h1_semi_sq
    }
}

/// Squared L² norm and H¹ seminorm of `u` over triangles passing `keep`.
pub fn norms(u: &FeField<'_>, keep: impl Fn(Region) -> bool) -> Norms {
    let mesh = u.mesh;
    let mut out = Norms {
        l2_sq: 0.0,
        h1_semi_sq: 0.0,
    };
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if !keep(mesh.regions[t]) {
            continue;
        }
        let p = mesh.triangle_points(t);
        let v = tri.map(|i| u.coeffs[i]);
        let k = element_stiffness(p);
        let m = element_mass(p);
        for i in 0..3 {
            for j in 0..3 {
                out.l2_sq += v[i] * m[i][j] * v[j];
                out.h1_semi_sq += v[i] * k[i][j] * v[j];
            }
        }
    }
    out
}
