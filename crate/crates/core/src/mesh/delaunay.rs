//! Delaunay refinement of a simple polygon.
//!
//! Bowyer-Watson insertion on exact predicates, with Ruppert-style quality
//! refinement: encroached boundary segments are split at their midpoints and
//! skinny or oversized interior triangles receive their circumcentres.
//! Segments flagged as protected are never split; points that would land in
//! their diametral lens are rejected instead.

use std::collections::{HashMap, VecDeque};

use robust::{incircle, orient2d, Coord};

use super::MeshError;
use crate::geometry::{point_in_polygon, Point};

const NONE: usize = usize::MAX;
/// Circumradius to shortest edge bound; sqrt(2) gives angles above 20.7 degrees.
const QUALITY_BOUND: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [usize; 3],
    /// `nb[i]` is the neighbour across the edge opposite `v[i]`.
    nb: [usize; 3],
    alive: bool,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: usize,
    b: usize,
    origin: usize,
    protected: bool,
    alive: bool,
}

/// Output of [`refine_polygon`].
pub(crate) struct PolygonMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges, oriented counterclockwise, with the index of the input
    /// polygon edge they came from.
    pub boundary: Vec<([usize; 2], usize)>,
}

fn coord(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

struct Triangulation {
    pts: Vec<Point>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    vert_tri: Vec<usize>,
    last: usize,
}

impl Triangulation {
    fn new(bbox_min: Point, bbox_max: Point) -> Self {
        let cx = 0.5 * (bbox_min[0] + bbox_max[0]);
        let cy = 0.5 * (bbox_min[1] + bbox_max[1]);
        let d = (bbox_max[0] - bbox_min[0]).max(bbox_max[1] - bbox_min[1]).max(1e-3);
        let pts = vec![
            [cx - 30.0 * d, cy - 20.0 * d],
            [cx + 30.0 * d, cy - 20.0 * d],
            [cx, cy + 30.0 * d],
        ];
        Self {
            pts,
            tris: vec![Tri {
                v: [0, 1, 2],
                nb: [NONE; 3],
                alive: true,
            }],
            free: Vec::new(),
            vert_tri: vec![0, 0, 0],
            last: 0,
        }
    }

    fn is_super(&self, v: usize) -> bool {
        v < 3
    }

    fn orient(&self, a: usize, b: usize, p: Point) -> f64 {
        orient2d(coord(self.pts[a]), coord(self.pts[b]), coord(p))
    }

    fn in_circle(&self, t: usize, p: Point) -> bool {
        let v = self.tris[t].v;
        incircle(
            coord(self.pts[v[0]]),
            coord(self.pts[v[1]]),
            coord(self.pts[v[2]]),
            coord(p),
        ) > 0.0
    }

    fn locate(&self, p: Point) -> Option<usize> {
        let mut t = if self.tris[self.last].alive {
            self.last
        } else {
            self.tris.iter().position(|t| t.alive)?
        };
        let mut k = 0usize;
        'walk: for _ in 0..4 * self.tris.len() + 16 {
            let tri = self.tris[t];
            for j in 0..3 {
                let i = (j + k) % 3;
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) < 0.0 {
                    if tri.nb[i] == NONE {
                        return None;
                    }
                    t = tri.nb[i];
                    k += 1;
                    continue 'walk;
                }
            }
            return Some(t);
        }
        // fall back to exhaustive search
        (0..self.tris.len()).find(|&t| {
            let tri = self.tris[t];
            tri.alive && (0..3).all(|i| self.orient(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) >= 0.0)
        })
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        if let Some(i) = self.free.pop() {
            self.tris[i] = tri;
            i
        } else {
            self.tris.push(tri);
            self.tris.len() - 1
        }
    }

    /// Inserts `p`, returning its index and the new triangles.
    fn insert(&mut self, p: Point) -> Result<(usize, Vec<usize>), MeshError> {
        let start = self
            .locate(p)
            .ok_or_else(|| MeshError::MeshFailure("point outside triangulation".into()))?;
        if self.tris[start].v.iter().any(|&v| self.pts[v] == p) {
            return Err(MeshError::MeshFailure(format!("duplicate point {p:?}")));
        }
        let mut cavity = vec![start];
        let mut in_cavity = HashMap::new();
        in_cavity.insert(start, true);
        let mut boundary: Vec<(usize, usize, usize)> = Vec::new();
        let mut stack = vec![start];
        while let Some(t) = stack.pop() {
            let tri = self.tris[t];
            for i in 0..3 {
                let n = tri.nb[i];
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if n == NONE {
                    boundary.push((a, b, NONE));
                    continue;
                }
                match in_cavity.get(&n) {
                    Some(true) => {}
                    Some(false) => boundary.push((a, b, n)),
                    None => {
                        let inside = self.in_circle(n, p);
                        in_cavity.insert(n, inside);
                        if inside {
                            cavity.push(n);
                            stack.push(n);
                        } else {
                            boundary.push((a, b, n));
                        }
                    }
                }
            }
        }
        let pi = self.pts.len();
        self.pts.push(p);
        self.vert_tri.push(NONE);
        for &t in &cavity {
            self.tris[t].alive = false;
            self.free.push(t);
        }
        let mut by_start = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, outside) in &boundary {
            let t = self.alloc(Tri {
                v: [a, b, pi],
                nb: [NONE, NONE, outside],
                alive: true,
            });
            if outside != NONE {
                let o = &mut self.tris[outside];
                for j in 0..3 {
                    if o.v[(j + 1) % 3] == b && o.v[(j + 2) % 3] == a {
                        o.nb[j] = t;
                    }
                }
            }
            by_start.insert(a, t);
            created.push(t);
        }
        for &t in &created {
            let [a, b, _] = self.tris[t].v;
            let next = *by_start
                .get(&b)
                .ok_or_else(|| MeshError::MeshFailure("non-manifold cavity".into()))?;
            self.tris[t].nb[0] = next;
            self.tris[next].nb[1] = t;
            self.vert_tri[a] = t;
            self.vert_tri[b] = t;
        }
        self.vert_tri[pi] = created[0];
        self.last = created[0];
        Ok((pi, created))
    }

    /// Triangle containing the directed edge `a -> b` and the local index of
    /// the vertex opposite it.
    fn find_edge(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let start = self.vert_tri[a];
        if start == NONE {
            return None;
        }
        let mut t = start;
        for _ in 0..256 {
            let tri = self.tris[t];
            let i = tri.v.iter().position(|&v| v == a)?;
            if tri.v[(i + 1) % 3] == b {
                return Some((t, (i + 2) % 3));
            }
            // rotate counterclockwise around a
            let next = tri.nb[(i + 2) % 3];
            if next == NONE || next == start {
                break;
            }
            t = next;
        }
        // other direction (vertex on the hull)
        let mut t = start;
        for _ in 0..256 {
            let tri = self.tris[t];
            let i = tri.v.iter().position(|&v| v == a)?;
            if tri.v[(i + 1) % 3] == b {
                return Some((t, (i + 2) % 3));
            }
            let next = tri.nb[(i + 1) % 3];
            if next == NONE || next == start {
                break;
            }
            t = next;
        }
        None
    }
}

fn encroaches_circle(a: Point, b: Point, p: Point) -> bool {
    (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]) < 0.0
}

/// Point sees the segment under an angle of at least 120 degrees.
fn encroaches_lens(a: Point, b: Point, p: Point) -> bool {
    let dot = (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]);
    dot < -0.5 * (dist2(a, p) * dist2(b, p)).sqrt()
}

struct Refiner<'a> {
    tri: Triangulation,
    segs: Vec<Segment>,
    polygon: &'a [Point],
    h: f64,
    max_vertices: usize,
    /// Triangles that cannot be improved without splitting a protected segment.
    stuck: HashMap<[usize; 3], ()>,
}

impl Refiner<'_> {
    fn seg_encroached_by(&self, s: &Segment, p: Point) -> bool {
        let a = self.tri.pts[s.a];
        let b = self.tri.pts[s.b];
        if s.protected {
            encroaches_lens(a, b, p)
        } else {
            encroaches_circle(a, b, p)
        }
    }

    fn seg_encroached(&self, si: usize) -> bool {
        let s = self.segs[si];
        if !s.protected && dist2(self.tri.pts[s.a], self.tri.pts[s.b]) > self.h * self.h {
            return true;
        }
        match self.tri.find_edge(s.a, s.b).or_else(|| self.tri.find_edge(s.b, s.a)) {
            None => true,
            Some((t, opp)) => {
                let tr = self.tri.tris[t];
                let mut apexes = vec![tr.v[opp]];
                let n = tr.nb[opp];
                if n != NONE {
                    let on = self.tri.tris[n];
                    if let Some(k) = (0..3).find(|&k| on.nb[k] == t) {
                        apexes.push(on.v[k]);
                    }
                }
                apexes
                    .into_iter()
                    .filter(|&v| !self.tri.is_super(v))
                    .any(|v| self.seg_encroached_by(&s, self.tri.pts[v]))
            }
        }
    }

    fn check_size(&self) -> Result<(), MeshError> {
        if self.tri.pts.len() > self.max_vertices {
            return Err(MeshError::MeshFailure(format!(
                "refinement exceeded {} vertices (small input angle?)",
                self.max_vertices
            )));
        }
        Ok(())
    }

    fn split_segment(&mut self, si: usize, queue: &mut VecDeque<usize>) -> Result<Vec<usize>, MeshError> {
        let s = self.segs[si];
        if s.protected {
            return Err(MeshError::MeshFailure(
                "protected interface segment is encroached or missing".into(),
            ));
        }
        let a = self.tri.pts[s.a];
        let b = self.tri.pts[s.b];
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (mi, created) = self.tri.insert(m)?;
        self.check_size()?;
        self.segs[si].alive = false;
        for (x, y) in [(s.a, mi), (mi, s.b)] {
            self.segs.push(Segment {
                a: x,
                b: y,
                alive: true,
                ..s
            });
            queue.push_back(self.segs.len() - 1);
        }
        // the new vertex may encroach neighbours
        for (j, other) in self.segs.iter().enumerate() {
            if other.alive && other.a != mi && other.b != mi && self.seg_encroached_by(other, m) {
                queue.push_back(j);
            }
        }
        Ok(created)
    }

    fn drain_segments(
        &mut self,
        queue: &mut VecDeque<usize>,
        tri_queue: &mut VecDeque<usize>,
    ) -> Result<(), MeshError> {
        while let Some(si) = queue.pop_front() {
            if !self.segs[si].alive || !self.seg_encroached(si) {
                continue;
            }
            let created = self.split_segment(si, queue)?;
            tri_queue.extend(created);
        }
        Ok(())
    }

    fn interior(&self, t: usize) -> bool {
        let v = self.tri.tris[t].v;
        if v.iter().any(|&x| self.tri.is_super(x)) {
            return false;
        }
        let p = v.map(|x| self.tri.pts[x]);
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        point_in_polygon(c, self.polygon)
    }

    fn is_bad(&self, t: usize) -> bool {
        let p = self.tri.tris[t].v.map(|x| self.tri.pts[x]);
        let e = [dist2(p[1], p[2]), dist2(p[2], p[0]), dist2(p[0], p[1])];
        let shortest = e.iter().copied().fold(f64::INFINITY, f64::min);
        let longest = e.iter().copied().fold(0.0, f64::max);
        if longest > self.h * self.h {
            return true;
        }
        let c = circumcenter(p[0], p[1], p[2]);
        dist2(c, p[0]) > QUALITY_BOUND * QUALITY_BOUND * shortest
    }

    fn run(&mut self) -> Result<(), MeshError> {
        let mut seg_queue: VecDeque<usize> = (0..self.segs.len()).collect();
        let mut tri_queue: VecDeque<usize> = VecDeque::new();
        self.drain_segments(&mut seg_queue, &mut tri_queue)?;
        tri_queue = (0..self.tri.tris.len()).filter(|&t| self.tri.tris[t].alive).collect();
        while let Some(t) = tri_queue.pop_front() {
            if !self.tri.tris[t].alive || !self.interior(t) || !self.is_bad(t) {
                continue;
            }
            let key = self.tri.tris[t].v;
            if self.stuck.contains_key(&key) {
                continue;
            }
            let p = key.map(|x| self.tri.pts[x]);
            let c = circumcenter(p[0], p[1], p[2]);
            let encroached: Vec<usize> = (0..self.segs.len())
                .filter(|&j| self.segs[j].alive && self.seg_encroached_by(&self.segs[j], c))
                .collect();
            if !encroached.is_empty() {
                let splittable: Vec<usize> = encroached
                    .iter()
                    .copied()
                    .filter(|&j| !self.segs[j].protected)
                    .collect();
                if splittable.is_empty() {
                    self.stuck.insert(key, ());
                    continue;
                }
                for j in splittable {
                    if self.segs[j].alive {
                        let created = self.split_segment(j, &mut seg_queue)?;
                        tri_queue.extend(created);
                    }
                }
                self.drain_segments(&mut seg_queue, &mut tri_queue)?;
                tri_queue.push_back(t);
                continue;
            }
            if !point_in_polygon(c, self.polygon) {
                self.stuck.insert(key, ());
                continue;
            }
            let (_, created) = self.tri.insert(c)?;
            self.check_size()?;
            tri_queue.extend(created);
        }
        Ok(())
    }
}

/// Laplacian smoothing of interior vertices; a move is kept only if it does
/// not shrink the smallest angle among the incident triangles or stretch an
/// edge beyond `h`.
fn smooth(vertices: &mut [Point], triangles: &[[usize; 3]], fixed: &[bool], h: f64, sweeps: usize) {
    let n = vertices.len();
    let mut star: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            star[v].push(t);
        }
    }
    let min_angle = |verts: &[Point], ts: &[usize]| -> f64 {
        ts.iter()
            .map(|&t| super::triangle_min_angle(triangles[t].map(|v| verts[v])))
            .fold(f64::INFINITY, f64::min)
    };
    for _ in 0..sweeps {
        for v in 0..n {
            if fixed[v] || star[v].is_empty() {
                continue;
            }
            let mut sum = [0.0, 0.0];
            let mut count = 0.0;
            for &t in &star[v] {
                for &w in &triangles[t] {
                    if w != v {
                        sum[0] += vertices[w][0];
                        sum[1] += vertices[w][1];
                        count += 1.0;
                    }
                }
            }
            let old = vertices[v];
            let before = min_angle(vertices, &star[v]);
            vertices[v] = [sum[0] / count, sum[1] / count];
            let ok = star[v].iter().all(|&t| {
                let p = triangles[t].map(|w| vertices[w]);
                super::triangle_area(p) > 0.0 && (0..3).all(|i| dist2(p[i], p[(i + 1) % 3]) <= h * h)
            });
            if !ok || min_angle(vertices, &star[v]) < before {
                vertices[v] = old;
            }
        }
    }
}

/// Triangulates the interior of a simple counterclockwise polygon with edges
/// no longer than `h`. Edge `i` runs from `polygon[i]` to `polygon[i + 1]`;
/// `protected[i]` forbids splitting it. The first `polygon.len()` output
/// vertices are the polygon vertices in order.
pub(crate) fn refine_polygon(polygon: &[Point], protected: &[bool], h: f64) -> Result<PolygonMesh, MeshError> {
    let n = polygon.len();
    if n < 3 || protected.len() != n || !(h > 0.0) {
        return Err(MeshError::MeshFailure("degenerate polygon input".into()));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in polygon {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let area = crate::geometry::signed_area(polygon);
    if !(area > 0.0) {
        return Err(MeshError::MeshFailure("polygon has non-positive area".into()));
    }
    let mut tri = Triangulation::new(lo, hi);
    for &p in polygon {
        tri.insert(p)?;
    }
    let segs = (0..n)
        .map(|i| Segment {
            a: i + 3,
            b: (i + 1) % n + 3,
            origin: i,
            protected: protected[i],
            alive: true,
        })
        .collect();
    let max_vertices = (200.0 * area / (h * h)) as usize + 50 * n + 20_000;
    let mut refiner = Refiner {
        tri,
        segs,
        polygon,
        h,
        max_vertices,
        stuck: HashMap::new(),
    };
    refiner.run()?;

    let tri = &refiner.tri;
    let interior: Vec<usize> = (0..tri.tris.len())
        .filter(|&t| tri.tris[t].alive && refiner.interior(t))
        .collect();
    let mut remap = vec![NONE; tri.pts.len()];
    let mut vertices = Vec::new();
    // polygon vertices first, in order
    for i in 0..n {
        remap[i + 3] = vertices.len();
        vertices.push(tri.pts[i + 3]);
    }
    let mut triangles = Vec::with_capacity(interior.len());
    for &t in &interior {
        let v = tri.tris[t].v.map(|x| {
            if remap[x] == NONE {
                remap[x] = vertices.len();
                vertices.push(tri.pts[x]);
            }
            remap[x]
        });
        triangles.push(v);
    }
    let mut boundary = Vec::new();
    let mut fixed = vec![false; vertices.len()];
    for s in refiner.segs.iter().filter(|s| s.alive) {
        let (a, b) = (remap[s.a], remap[s.b]);
        if a == NONE || b == NONE {
            return Err(MeshError::MeshFailure("boundary segment lost".into()));
        }
        fixed[a] = true;
        fixed[b] = true;
        boundary.push(([a, b], s.origin));
    }
    // sort boundary edges along the polygon
    boundary.sort_by(|x, y| {
        x.1.cmp(&y.1).then_with(|| {
            let o = polygon[x.1];
            dist2(vertices[x.0[0]], o).total_cmp(&dist2(vertices[y.0[0]], o))
        })
    });
    smooth(&mut vertices, &triangles, &fixed, h, 4);
    Ok(PolygonMesh {
        vertices,
        triangles,
        boundary,
    })
}
