//! Nodal domains of P1 fields, eigenvalue indices and nodal deficiency.

use serde::Serialize;
use thiserror::Error;

use crate::fem::FeField;

/// Default relative threshold below which a vertex counts as zero.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodalError {
    #[error("every vertex is below the zero threshold")]
    AllBelowThreshold,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Clone, Debug, Serialize)]
pub struct NodalPartition {
    /// Component id per vertex, `None` for near-zero vertices.
    pub labels: Vec<Option<usize>>,
    pub count: usize,
    pub signs: Vec<Sign>,
    /// Lumped vertex area per component.
    pub areas: Vec<f64>,
    pub threshold: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Joins edge-adjacent vertices of equal strict sign. Component ids are
/// assigned in order of their lowest vertex index.
pub fn count_nodal_domains(u: &FeField<'_>, rel_threshold: f64) -> Result<NodalPartition, NodalError> {
    let mesh = u.mesh();
    let c = u.coeffs();
    let max = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_threshold * max;
    let sign: Vec<Option<Sign>> = c
        .iter()
        .map(|&v| {
            if v.abs() <= cut || max == 0.0 {
                None
            } else if v > 0.0 {
                Some(Sign::Positive)
            } else {
                Some(Sign::Negative)
            }
        })
        .collect();
    if sign.iter().all(Option::is_none) {
        return Err(NodalError::AllBelowThreshold);
    }
    let mut ds = DisjointSet::new(c.len());
    for ((a, b), _) in mesh.edges() {
        if sign[a].is_some() && sign[a] == sign[b] {
            ds.union(a, b);
        }
    }
    let mut root_id = vec![usize::MAX; c.len()];
    let mut labels = vec![None; c.len()];
    let mut signs = Vec::new();
    for v in 0..c.len() {
        if let Some(s) = sign[v] {
            let r = ds.find(v);
            if root_id[r] == usize::MAX {
                root_id[r] = signs.len();
                signs.push(s);
            }
            labels[v] = Some(root_id[r]);
        }
    }
    let mut areas = vec![0.0; signs.len()];
    for t in 0..mesh.triangle_count() {
        let third = mesh.triangle_area(t) / 3.0;
        for &v in &mesh.triangles[t] {
            if let Some(id) = labels[v] {
                areas[id] += third;
            }
        }
    }
    Ok(NodalPartition {
        labels,
        count: signs.len(),
        signs,
        areas,
        threshold: rel_threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Stability {
    pub count: usize,
    pub refined_count: usize,
    pub stable: bool,
}

/// Compares the count of `coarse` with that of the same field on a refined
/// mesh, supplied by the caller.
pub fn stability_check(
    coarse: &FeField<'_>,
    refined: &FeField<'_>,
    rel_threshold: f64,
) -> Result<Stability, NodalError> {
    let count = count_nodal_domains(coarse, rel_threshold)?.count;
    let refined_count = count_nodal_domains(refined, rel_threshold)?.count;
    Ok(Stability {
        count,
        refined_count,
        stable: count == refined_count,
    })
}

/// 1-based position of the first eigenvalue in the cluster containing
/// `lambdas[j - 1]`. Neighbours within `cluster_tol` relative gap are one
/// cluster.
pub fn eigen_index(lambdas: &[f64], j: usize, cluster_tol: f64) -> usize {
    assert!(j >= 1 && j <= lambdas.len(), "index {j} out of range");
    let mut i = j - 1;
    while i > 0 {
        let (lo, hi) = (lambdas[i - 1], lambdas[i]);
        if hi - lo <= cluster_tol * hi.abs().max(lo.abs()).max(1.0) {
            i -= 1;
        } else {
            break;
        }
    }
    i + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeficiencyRecord {
    pub index: usize,
    pub count: usize,
    pub deficiency: i64,
    pub courant_sharp: bool,
    /// A negative deficiency contradicts Courant's theorem and marks a
    /// numerical failure.
    pub negative: bool,
}

impl DeficiencyRecord {
    pub fn new(index: usize, count: usize) -> Self {
        let deficiency = index as i64 - count as i64;
        Self {
            index,
            count,
            deficiency,
            courant_sharp: deficiency == 0,
            negative: deficiency < 0,
        }
    }
}

/// Records for eigenpairs `1..=counts.len()` of the ascending `lambdas`.
pub fn deficiency(lambdas: &[f64], counts: &[usize], cluster_tol: f64) -> Result<Vec<DeficiencyRecord>, NodalError> {
    if counts.len() > lambdas.len() {
        return Err(NodalError::LengthMismatch(format!(
            "{} counts for {} eigenvalues",
            counts.len(),
            lambdas.len()
        )));
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(j, &c)| DeficiencyRecord::new(eigen_index(lambdas, j + 1, cluster_tol), c))
        .collect())
}
