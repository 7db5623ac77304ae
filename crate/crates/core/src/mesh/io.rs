//! Plain-text mesh format.
//!
//! ```text
//! dbmesh 1
//! V E T
//! x y            (V lines)
//! i j k region   (T lines)
//! i j marker     (E lines)
//! ```
//!
//! Regions are coded 0 = left bulk, 1 = right bulk, 2 = neck; markers 0 = bulk
//! boundary, 1 = neck top, 2 = neck bottom, 3/4 = left/right interface. The
//! mirror permutation is not stored; it is rebuilt on read by exact
//! coordinate matching.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Marker, MeshError, MeshMirror, Region, TriMesh};

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "dbmesh 1")?;
    writeln!(
        w,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.boundary_edges.len(),
        mesh.triangles.len()
    )?;
    for p in &mesh.vertices {
        writeln!(w, "{:?} {:?}", p[0], p[1])?;
    }
    for (t, r) in mesh.triangles.iter().zip(&mesh.regions) {
        writeln!(w, "{} {} {} {}", t[0], t[1], t[2], r.code())?;
    }
    for ([a, b], m) in &mesh.boundary_edges {
        writeln!(w, "{a} {b} {}", m.code())?;
    }
    Ok(())
}

pub fn write_mesh_file(mesh: &TriMesh, path: &Path) -> Result<(), MeshError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_mesh(mesh, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn read_mesh_file(path: &Path) -> Result<TriMesh, MeshError> {
    read_mesh(BufReader::new(std::fs::File::open(path)?))
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<String>), MeshError> {
        loop {
            self.number += 1;
            match self.inner.next() {
                None => {
                    return Err(parse_err(
                        self.number,
                        format!("unexpected end of file, expected {what}"),
                    ))
                }
                Some(line) => {
                    let line = line?;
                    let fields: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
                    if !fields.is_empty() {
                        return Ok((self.number, fields));
                    }
                }
            }
        }
    }
}

fn parse_fields<T: std::str::FromStr>(
    line: usize,
    fields: &[String],
    count: usize,
    what: &str,
) -> Result<Vec<T>, MeshError> {
    if fields.len() != count {
        return Err(parse_err(
            line,
            format!("{what}: expected {count} fields, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>()
                .map_err(|_| parse_err(line, format!("{what}: cannot parse {f:?}")))
        })
        .collect()
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<TriMesh, MeshError> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
    };
    let (ln, header) = lines.next_fields("header")?;
    if header != ["dbmesh", "1"] {
        return Err(parse_err(ln, "expected header \"dbmesh 1\""));
    }
    let (ln, counts) = lines.next_fields("counts")?;
    let counts: Vec<usize> = parse_fields(ln, &counts, 3, "counts")?;
    let (nv, ne, nt) = (counts[0], counts[1], counts[2]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, f) = lines.next_fields("vertex")?;
        let xy: Vec<f64> = parse_fields(ln, &f, 2, "vertex")?;
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(parse_err(ln, "vertex coordinate is not finite"));
        }
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut regions = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, f) = lines.next_fields("triangle")?;
        let v: Vec<usize> = parse_fields(ln, &f, 4, "triangle")?;
        if v[..3].iter().any(|&i| i >= nv) {
            return Err(parse_err(ln, format!("triangle index out of range (V = {nv})")));
        }
        let region = u8::try_from(v[3])
            .ok()
            .and_then(Region::from_code)
            .ok_or_else(|| parse_err(ln, format!("unknown region code {}", v[3])))?;
        triangles.push([v[0], v[1], v[2]]);
        regions.push(region);
    }
    let mut boundary_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, f) = lines.next_fields("edge")?;
        let v: Vec<usize> = parse_fields(ln, &f, 3, "edge")?;
        if v[..2].iter().any(|&i| i >= nv) {
            return Err(parse_err(ln, format!("edge index out of range (V = {nv})")));
        }
        let marker = u8::try_from(v[2])
            .ok()
            .and_then(Marker::from_code)
            .ok_or_else(|| parse_err(ln, format!("unknown marker code {}", v[2])))?;
        boundary_edges.push(([v[0], v[1]], marker));
    }
    loop {
        lines.number += 1;
        match lines.inner.next() {
            None => break,
            Some(line) => {
                if !line?.trim().is_empty() {
                    return Err(parse_err(lines.number, "content after declared counts"));
                }
            }
        }
    }
    let mut mesh = TriMesh {
        vertices,
        triangles,
        regions,
        boundary_edges,
        mirror: None,
    };
    mesh.mirror = rebuild_mirror(&mesh);
    Ok(mesh)
}

/// Recovers the reflection across the neck midline from exact coordinates.
fn rebuild_mirror(mesh: &TriMesh) -> Option<MeshMirror> {
    let length = mesh
        .triangles
        .iter()
        .zip(&mesh.regions)
        .filter(|(_, r)| **r == Region::Neck)
        .flat_map(|(t, _)| t.iter().map(|&v| mesh.vertices[v][0]))
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))?;
    let axis = length * 0.5;
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let lookup: HashMap<(u64, u64), usize> = mesh.vertices.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    let n = mesh.vertices.len();
    let mut perm = vec![usize::MAX; n];
    for (i, p) in mesh.vertices.iter().enumerate() {
        if p[0] == axis {
            perm[i] = i;
        } else if p[0] < axis {
            let j = *lookup.get(&key([length - p[0], p[1]]))?;
            perm[i] = j;
            perm[j] = i;
        }
    }
    if perm.contains(&usize::MAX) {
        return None;
    }
    Some(MeshMirror { perm, length })
}
