//! Structured conforming triangulations of axis-aligned rectangles.
//!
//! Cells are split along alternating diagonals (checkerboard pattern), which
//! keeps uniform refinement `n -> 2n` a strict refinement: every fine triangle
//! lies inside exactly one coarse triangle. Triangles are oriented
//! counterclockwise. Edge normals point from the lower-index incident triangle
//! to the higher-index one (outward on the boundary); the jump sign cancels in
//! all norms, so the convention is free.

use crate::error::{Error, Result};

/// Axis-aligned rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rectangle { x0, y0, x1, y1 }
    }

    /// The square (-2,2)^2 used by the annulus experiment.
    pub fn symmetric_square(half_width: f64) -> Self {
        Rectangle::new(-half_width, -half_width, half_width, half_width)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// An edge of the triangulation.
///
/// `vertices` is stored with the smaller vertex index first. `left` is the
/// lower-index incident triangle; `right` is the higher-index one, or `None`
/// on the boundary. `normal` is the unit normal pointing from `left` into
/// `right` (outward for boundary edges).
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub vertices: (usize, usize),
    pub left: usize,
    pub right: Option<usize>,
    pub normal: [f64; 2],
    pub length: f64,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }
}

/// Conforming triangulation of a rectangle.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: Rectangle,
    /// Subdivisions per axis used to build the mesh.
    pub subdivisions: usize,
    /// Vertex coordinates, lexicographic by (y, x).
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// All edges, interior and boundary.
    pub edges: Vec<Edge>,
    /// For each triangle its three edge indices, opposite local vertices 0,1,2.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Per-triangle diameter (longest edge).
    pub h_k: Vec<f64>,
}

/// Build the alternating-diagonal triangulation of `domain` with `n`
/// subdivisions per axis. Vertex numbering is lexicographic by (y, x), cells
/// are visited row by row, so the construction is deterministic.
pub fn build_structured_mesh(domain: Rectangle, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "mesh subdivisions must be at least 1".into(),
        ));
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
        return Err(Error::InvalidInput(format!(
            "degenerate rectangle [{}, {}] x [{}, {}]",
            domain.x0, domain.x1, domain.y0, domain.y1
        )));
    }

    let sx = (domain.x1 - domain.x0) / n as f64;
    let sy = (domain.y1 - domain.y0) / n as f64;

    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Exact endpoints keep the tiling identity tight.
            let x = if i == n { domain.x1 } else { domain.x0 + i as f64 * sx };
            let y = if j == n { domain.y1 } else { domain.y0 + j as f64 * sy };
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = vid(i, j);
            let b = vid(i + 1, j);
            let c = vid(i + 1, j + 1);
            let d = vid(i, j + 1);
            if (i + j) % 2 == 0 {
                // diagonal a-c
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                // diagonal b-d
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }

    let mesh = finish_mesh(domain, n, vertices, triangles)?;
    Ok(mesh)
}

/// Assemble edge topology and metrics from vertices and triangles.
/// Also used by tests that permute the raw arrays.
pub fn finish_mesh(
    domain: Rectangle,
    subdivisions: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
) -> Result<Mesh> {
    use std::collections::HashMap;

    for (t, tri) in triangles.iter().enumerate() {
        let a = signed_area(&vertices, tri);
        if a <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "triangle {t} is not counterclockwise (signed area {a})"
            )));
        }
    }

    // key: sorted vertex pair -> (edge slot, incident triangles)
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (u.min(v), u.max(v));
            map.entry(key).or_default().push(t);
        }
    }

    // Deterministic edge order: sorted by vertex pair.
    let mut keys: Vec<(usize, usize)> = map.keys().copied().collect();
    keys.sort_unstable();

    let mut edges = Vec::with_capacity(keys.len());
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    for key in keys {
        let mut tris = map[&key].clone();
        tris.sort_unstable();
        if tris.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "edge {key:?} shared by {} triangles",
                tris.len()
            )));
        }
        let left = tris[0];
        let right = tris.get(1).copied();
        let p0 = vertices[key.0];
        let p1 = vertices[key.1];
        let dx = p1[0] - p0[0];
        let dy = p1[1] - p0[1];
        let length = dx.hypot(dy);
        let mut normal = [dy / length, -dx / length];
        // Point the normal away from the left triangle.
        let cl = centroid(&vertices, &triangles[left]);
        let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
        if normal[0] * (mid[0] - cl[0]) + normal[1] * (mid[1] - cl[1]) < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        edge_index.insert(key, edges.len());
        edges.push(Edge {
            vertices: key,
            left,
            right,
            normal,
            length,
        });
    }

    let mut triangle_edges = Vec::with_capacity(triangles.len());
    let mut h_k = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let mut te = [0usize; 3];
        let mut h: f64 = 0.0;
        for k in 0..3 {
            let (u, v) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (u.min(v), u.max(v));
            let e = edge_index[&key];
            te[k] = e;
            h = h.max(edges[e].length);
        }
        triangle_edges.push(te);
        h_k.push(h);
    }

    Ok(Mesh {
        domain,
        subdivisions,
        vertices,
        triangles,
        edges,
        triangle_edges,
        h_k,
    })
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn centroid(vertices: &[[f64; 2]], tri: &[usize; 3]) -> [f64; 2] {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    [
        (a[0] + b[0] + c[0]) / 3.0,
        (a[1] + b[1] + c[1]) / 3.0,
    ]
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    /// (h_min, h_max) over the triangle diameters.
    pub fn metrics(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &h in &self.h_k {
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    /// Locate the triangle containing (x, y) and its barycentric coordinates.
    /// Points outside the domain are clamped to it.
    pub fn locate(&self, x: f64, y: f64) -> (usize, [f64; 3]) {
        let n = self.subdivisions;
        let sx = (self.domain.x1 - self.domain.x0) / n as f64;
        let sy = (self.domain.y1 - self.domain.y0) / n as f64;
        let fx = ((x - self.domain.x0) / sx).clamp(0.0, n as f64 - 1e-12);
        let fy = ((y - self.domain.y0) / sy).clamp(0.0, n as f64 - 1e-12);
        let i = (fx.floor() as usize).min(n - 1);
        let j = (fy.floor() as usize).min(n - 1);
        let cell = 2 * (j * n + i);
        // pick the half-cell by the local coordinates relative to the diagonal
        let u = fx - i as f64;
        let v = fy - j as f64;
        let t = if (i + j) % 2 == 0 {
            // diagonal from (0,0) to (1,1): lower triangle has v <= u
            if v <= u {
                cell
            } else {
                cell + 1
            }
        } else {
            // diagonal from (1,0) to (0,1): lower triangle has u + v <= 1
            if u + v <= 1.0 {
                cell
            } else {
                cell + 1
            }
        };
        (t, self.barycentric(t, x, y))
    }

    /// Barycentric coordinates of (x, y) with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: f64, y: f64) -> [f64; 3] {
        let tri = &self.triangles[t];
        let [a, b, c] = [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ];
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Deterministic content hash (FNV-1a over coordinates and connectivity),
    /// used to match trajectory checkpoints to meshes.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for v in &self.vertices {
            eat(&v[0].to_bits().to_le_bytes());
            eat(&v[1].to_bits().to_le_bytes());
        }
        for t in &self.triangles {
            for &i in t {
                eat(&(i as u64).to_le_bytes());
            }
        }
        h
    }

    /// Plain-text dump: header, vertex lines, triangle index lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str("# acfem mesh v1\n");
        out.push_str(&format!(
            "# domain {} {} {} {}\n",
            self.domain.x0, self.domain.y0, self.domain.x1, self.domain.y1
        ));
        out.push_str(&format!(
            "# vertices {} triangles {}\n",
            self.n_vertices(),
            self.n_triangles()
        ));
        for v in &self.vertices {
            out.push_str(&format!("{:.17e} {:.17e}\n", v[0], v[1]));
        }
        for t in &self.triangles {
            out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_split() {
        let m = build_structured_mesh(Rectangle::new(0.0, 0.0, 1.0, 1.0), 1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        let interior = m.edges.iter().filter(|e| e.is_interior()).count();
        assert_eq!(interior, 1);
        assert_eq!(m.n_edges(), 5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_structured_mesh(Rectangle::new(0.0, 0.0, 1.0, 1.0), 0).is_err());
        assert!(build_structured_mesh(Rectangle::new(0.0, 0.0, 0.0, 1.0), 4).is_err());
        assert!(build_structured_mesh(Rectangle::new(1.0, 0.0, 0.0, 1.0), 4).is_err());
    }

    #[test]
    fn tiling_identity() {
        for n in [1, 3, 8, 17] {
            let m = build_structured_mesh(Rectangle::symmetric_square(2.0), n).unwrap();
            let total: f64 = (0..m.n_triangles()).map(|t| m.triangle_area(t)).sum();
            assert!((total - 16.0).abs() <= 1e-12 * 16.0, "n={n}: area {total}");
        }
    }

    #[test]
    fn diameters_and_metrics() {
        // unit right triangles with legs 1 appear for n=1 on the unit square
        let m = build_structured_mesh(Rectangle::new(0.0, 0.0, 1.0, 1.0), 1).unwrap();
        for &h in &m.h_k {
            assert!((h - 2f64.sqrt()).abs() < 1e-15);
        }
        // uniform structured mesh: one diameter up to congruence
        let m = build_structured_mesh(Rectangle::symmetric_square(2.0), 6).unwrap();
        let (lo, hi) = m.metrics();
        assert!((lo - hi).abs() < 1e-14);
        // refinement halves the metrics
        let m2 = build_structured_mesh(Rectangle::symmetric_square(2.0), 12).unwrap();
        let (lo2, hi2) = m2.metrics();
        assert!((hi2 - 0.5 * hi).abs() < 1e-14);
        assert!((lo2 - 0.5 * lo).abs() < 1e-14);
    }

    #[test]
    fn paper_mesh_regime() {
        // n=64 on (-2,2)^2: cell side 1/16, diameter sqrt(2)/16 ~ 0.088,
        // the structured stand-in for the paper's h_max ~ 0.065 regime.
        let m = build_structured_mesh(Rectangle::symmetric_square(2.0), 64).unwrap();
        let (_, hi) = m.metrics();
        assert!((hi - 2f64.sqrt() * 4.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn refinement_monotonicity() {
        let mut prev = f64::INFINITY;
        for n in 1..=12 {
            let m = build_structured_mesh(Rectangle::symmetric_square(2.0), n).unwrap();
            let (_, hi) = m.metrics();
            assert!(hi < prev);
            prev = hi;
        }
    }

    #[test]
    fn edge_bookkeeping() {
        let m = build_structured_mesh(Rectangle::symmetric_square(2.0), 5).unwrap();
        for e in &m.edges {
            match e.right {
                Some(r) => {
                    assert!(e.left < r);
                    // both incident triangles list the edge with opposite orientation
                    let dir = |t: usize| {
                        let tri = &m.triangles[t];
                        for k in 0..3 {
                            let (u, v) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                            if (u.min(v), u.max(v)) == e.vertices {
                                return u < v;
                            }
                        }
                        panic!("edge not found in incident triangle");
                    };
                    assert_ne!(dir(e.left), dir(r));
                }
                None => {
                    // boundary edge: normal points outward
                    let c = centroid(&m.vertices, &m.triangles[e.left]);
                    let p0 = m.vertices[e.vertices.0];
                    let p1 = m.vertices[e.vertices.1];
                    let mid = [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])];
                    let d = e.normal[0] * (mid[0] - c[0]) + e.normal[1] * (mid[1] - c[1]);
                    assert!(d > 0.0);
                }
            }
        }
        // each interior edge shared by exactly two triangles, boundary by one
        let nb = m.edges.iter().filter(|e| !e.is_interior()).count();
        assert_eq!(nb, 4 * 5);
        assert_eq!(m.n_edges(), 3 * 25 + 2 * 5);
    }

    #[test]
    fn locate_roundtrip() {
        let m = build_structured_mesh(Rectangle::symmetric_square(2.0), 7).unwrap();
        for &(x, y) in &[(0.1, -1.3), (-2.0, -2.0), (2.0, 2.0), (1.99, -0.77), (0.0, 0.0)] {
            let (t, l) = m.locate(x, y);
            assert!(l.iter().all(|&c| c >= -1e-12));
            let tri = &m.triangles[t];
            let px = l[0] * m.vertices[tri[0]][0]
                + l[1] * m.vertices[tri[1]][0]
                + l[2] * m.vertices[tri[2]][0];
            let py = l[0] * m.vertices[tri[0]][1]
                + l[1] * m.vertices[tri[1]][1]
                + l[2] * m.vertices[tri[2]][1];
            assert!((px - x).abs() < 1e-12 && (py - y).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_nests_triangles() {
        // every fine triangle lies inside one coarse triangle
        let coarse = build_structured_mesh(Rectangle::symmetric_square(2.0), 3).unwrap();
        let fine = build_structured_mesh(Rectangle::symmetric_square(2.0), 6).unwrap();
        for t in 0..fine.n_triangles() {
            let tri = &fine.triangles[t];
            let c = centroid(&fine.vertices, tri);
            let (ct, _) = coarse.locate(c[0], c[1]);
            for &v in tri {
                let p = fine.vertices[v];
                let l = coarse.barycentric(ct, p[0], p[1]);
                assert!(l.iter().all(|&x| x >= -1e-12), "fine tri {t} leaves coarse {ct}");
            }
        }
    }

    #[test]
    fn dump_has_documented_layout() {
        let m = build_structured_mesh(Rectangle::new(0.0, 0.0, 1.0, 1.0), 1).unwrap();
        let d = m.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert!(lines[0].starts_with("# acfem mesh"));
        assert_eq!(lines.len(), 3 + 4 + 2);
    }
}
