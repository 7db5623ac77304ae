//! SVG rendering of a field's sign pattern and zero level set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::geometry::Point;
use crate::mesh::TriMesh;
use crate::nodal::{NodalPartition, Sign};

const POSITIVE: &str = "#d6604d";
const NEGATIVE: &str = "#4393c3";
const UNSIGNED: &str = "#f7f7f7";

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Point where the linear interpolant crosses zero along each edge with
/// endpoints of strictly opposite sign.
fn crossing(mesh: &TriMesh, u: &[f64], e: EdgeKey) -> Point {
    let (p, q) = (mesh.vertices[e.0], mesh.vertices[e.1]);
    let t = u[e.0] / (u[e.0] - u[e.1]);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Zero-crossing segments chained into polylines. Each polyline is a list
/// of crossed edges.
pub fn zero_polylines(mesh: &TriMesh, u: &[f64]) -> Vec<Vec<Point>> {
    let mut adj: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
    for tri in &mesh.triangles {
        let crossed: Vec<EdgeKey> = (0..3)
            .map(|i| key(tri[i], tri[(i + 1) % 3]))
            .filter(|&(a, b)| u[a] * u[b] < 0.0)
            .collect();
        if let [e1, e2] = crossed[..] {
            adj.entry(e1).or_default().push(e2);
            adj.entry(e2).or_default().push(e1);
        }
    }
    let mut seen: BTreeSet<EdgeKey> = BTreeSet::new();
    let mut out = Vec::new();
    // open chains first, starting at their ends, then closed loops
    let starts: Vec<EdgeKey> = adj
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(k, _)| *k)
        .chain(adj.keys().copied())
        .collect();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut chain = vec![s];
        seen.insert(s);
        let mut cur = s;
        while let Some(&next) = adj[&cur].iter().find(|n| !seen.contains(n)) {
            seen.insert(next);
            chain.push(next);
            cur = next;
        }
        if adj[&cur].contains(&s) && chain.len() > 2 {
            chain.push(s);
        }
        out.push(chain.into_iter().map(|e| crossing(mesh, u, e)).collect());
    }
    out
}

/// Triangles filled by the sign of their mean value, the boundary outline
/// and the zero level set. The view box is the mesh bounding box with `y`
/// pointing up.
pub fn export_svg(mesh: &TriMesh, u: &[f64], partition: &NodalPartition) -> String {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &mesh.vertices {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (w, h) = (x1 - x0, y1 - y0);
    let stroke = 0.002 * w.max(h);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{x0} {y0} {w} {h}">"#
    );
    let _ = writeln!(s, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, y0 + y1);
    let _ = writeln!(s, r#"<g id="signs" stroke="none">"#);
    for tri in &mesh.triangles {
        let mean = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        let labeled = tri.iter().filter_map(|&v| partition.labels[v]).next();
        let fill = match (labeled.map(|l| partition.signs[l]), mean) {
            (None, _) => UNSIGNED,
            (Some(_), m) if m > 0.0 => POSITIVE,
            (Some(_), m) if m < 0.0 => NEGATIVE,
            (Some(Sign::Positive), _) => POSITIVE,
            (Some(Sign::Negative), _) => NEGATIVE,
        };
        let p = tri.map(|v| mesh.vertices[v]);
        let _ = writeln!(
            s,
            r#"<polygon points="{},{} {},{} {},{}" fill="{fill}"/>"#,
            p[0][0], p[0][1], p[1][0], p[1][1], p[2][0], p[2][1]
        );
    }
    let _ = writeln!(s, "</g>");
    let mut d = String::new();
    for ([a, b], marker) in &mesh.boundary_edges {
        if marker.is_interface() {
            continue;
        }
        let (p, q) = (mesh.vertices[*a], mesh.vertices[*b]);
        let _ = write!(d, "M{},{}L{},{}", p[0], p[1], q[0], q[1]);
    }
    let _ = writeln!(
        s,
        r#"<path id="boundary" d="{d}" fill="none" stroke="black" stroke-width="{stroke}"/>"#
    );
    let _ = writeln!(
        s,
        r#"<g id="nodal-lines" fill="none" stroke="black" stroke-width="{stroke}">"#
    );
    for line in zero_polylines(mesh, u) {
        let pts: Vec<String> = line.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(s, "</g>\n</g>\n</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate;
    use crate::nodal::count_nodal_domains;
    use std::f64::consts::PI;

    fn render(f: impl Fn(Point) -> f64) -> (String, usize) {
        let m = 28f64.cbrt();
        let mesh = TriMesh::from_polygon(&[[0.0, 0.0], [m, 0.0], [m, 1.0], [0.0, 1.0]], 0.08).unwrap();
        let u = interpolate(&mesh, f).unwrap();
        let part = count_nodal_domains(&u, 1e-8).unwrap();
        let lines = zero_polylines(&mesh, u.coeffs()).len();
        (export_svg(&mesh, u.coeffs(), &part), lines)
    }

    #[test]
    fn constant_mode() {
        let (svg, lines) = render(|_| 1.0);
        assert_eq!(lines, 0);
        assert!(!svg.contains(NEGATIVE));
        assert!(!svg.contains("<polyline"));
        assert!(svg.contains(&format!("viewBox=\"0 0 {} 1\"", 28f64.cbrt())));
    }

    #[test]
    fn two_vertical_lines() {
        let m = 28f64.cbrt();
        let (svg, lines) = render(|p| (2.0 * PI * p[0] / m).cos());
        assert_eq!(lines, 2);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    }
}
