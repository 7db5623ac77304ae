use std::collections::HashMap;

use super::{edge_key, MeshMirror, TriMesh};

/// Splits every triangle into four through its edge midpoints.
///
/// Midpoints of mirrored edge pairs are computed once on the left half and
/// reflected, so the refined mesh keeps exact symmetry.
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    let edges = mesh.edges();
    let nv = mesh.vertices.len();
    let index: HashMap<(usize, usize), usize> = edges.iter().enumerate().map(|(e, &(k, _))| (k, nv + e)).collect();
    let mut vertices = mesh.vertices.clone();
    vertices.resize(nv + edges.len(), [0.0, 0.0]);
    let midpoint = |a: usize, b: usize| {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    };

    let mut perm = None;
    match &mesh.mirror {
        None => {
            for (e, &((a, b), _)) in edges.iter().enumerate() {
                vertices[nv + e] = midpoint(a, b);
            }
        }
        Some(MeshMirror { perm: p, length }) => {
            let length = *length;
            let axis = length * 0.5;
            let mut new_perm = p.clone();
            new_perm.resize(nv + edges.len(), usize::MAX);
            for (e, &((a, b), _)) in edges.iter().enumerate() {
                let me = nv + e;
                let partner = index[&edge_key(p[a], p[b])];
                let m = midpoint(a, b);
                new_perm[me] = partner;
                if partner == me {
                    vertices[me] = [axis, m[1]];
                } else if m[0] < axis || (m[0] == axis && me < partner) {
                    vertices[me] = m;
                    vertices[partner] = [length - m[0], m[1]];
                }
            }
            perm = Some(MeshMirror { perm: new_perm, length });
        }
    }

    let mid = |a: usize, b: usize| index[&edge_key(a, b)];
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    let mut regions = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        regions.extend([mesh.regions[t]; 4]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for &([a, b], m) in &mesh.boundary_edges {
        let ab = mid(a, b);
        boundary_edges.push(([a, ab], m));
        boundary_edges.push(([ab, b], m));
    }
    TriMesh {
        vertices,
        triangles,
        regions,
        boundary_edges,
        mirror: perm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BulkDomain, DumbbellSpec, NeckProfile};
    use crate::mesh::generate;

    fn mesh() -> TriMesh {
        let spec = DumbbellSpec::new(
            BulkDomain::rectangle_mid(1.2, 1.0, 0.3),
            NeckProfile::piecewise_linear(vec![0.6, 1.0, 0.6], 1.0),
            0.08,
        );
        generate(&spec, 0.2, 2).unwrap()
    }

    #[test]
    fn counts_and_invariants() {
        let m = mesh();
        let r = refine_uniform(&m);
        assert_eq!(r.triangle_count(), 4 * m.triangle_count());
        assert_eq!(r.vertex_count(), m.vertex_count() + m.edges().len());
        assert!(r.check_invariants().is_empty(), "{:?}", r.check_invariants());
        assert_eq!(r.euler_characteristic(), 1);
        assert!((r.area() - m.area()).abs() < 1e-12 * m.area());
        assert!((r.max_edge_length() - 0.5 * m.max_edge_length()).abs() < 1e-12);
    }

    #[test]
    fn twice_refined_keeps_mirror() {
        let r = refine_uniform(&refine_uniform(&mesh()));
        assert!(r.check_invariants().is_empty());
    }
}
