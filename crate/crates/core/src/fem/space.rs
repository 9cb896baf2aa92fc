//! Quadratic Lagrange finite elements on a triangulation.
//!
//! Degrees of freedom sit at vertices and edge midpoints and are numbered
//! lexicographically by (y, x); on structured meshes this produces the
//! (2n+1)^2 fine-lattice ordering with O(n) matrix bandwidth. The space owns
//! the quadrature rules and lazily caches the mass and stiffness matrices,
//! the assembly scatter pattern and the factorizations used by projections
//! and dual norms.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fem::linalg::{BandLu, CsrMatrix};
use crate::fem::quadrature::{EdgeRule, TriangleRule};
use crate::mesh::Mesh;

/// Barycentric coordinates of the six local nodes (vertices, then midpoints
/// of edges 01, 12, 20).
pub const LOCAL_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
];

/// P2 basis values at a barycentric point.
pub fn basis_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub struct FESpace {
    pub mesh: Arc<Mesh>,
    pub n_dofs: usize,
    /// Global dof ids per triangle, local order of `LOCAL_NODES`.
    pub tri_dofs: Vec<[usize; 6]>,
    /// Coordinates of each dof node.
    pub dof_coords: Vec<[f64; 2]>,
    /// Dof id of each vertex and of each edge midpoint.
    pub vertex_dof: Vec<usize>,
    pub edge_dof: Vec<usize>,
    pub volume_rule: TriangleRule,
    pub edge_rule: EdgeRule,
    /// Basis values at the volume quadrature points, `[q][local]`.
    pub basis_at_quad: Vec<[f64; 6]>,
    /// Per-triangle barycentric gradients (rows: grad lambda_0..2).
    pub grad_lambda: Vec<[[f64; 2]; 3]>,
    pub area: Vec<f64>,

    mass: OnceLock<CsrMatrix>,
    stiffness: OnceLock<CsrMatrix>,
    pattern: OnceLock<AssemblyPattern>,
    mass_lu: OnceLock<BandLu>,
    h1_lu: OnceLock<BandLu>,
}

/// CSR pattern shared by all assembled matrices plus, per triangle, the value
/// index of each local (i, j) pair.
pub struct AssemblyPattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub scatter: Vec<[[usize; 6]; 6]>,
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>) -> Arc<FESpace> {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();

        // dof nodes: vertices then edge midpoints, renumbered lexicographically
        let mut nodes: Vec<([f64; 2], usize)> = Vec::with_capacity(nv + ne);
        for (i, v) in mesh.vertices.iter().enumerate() {
            nodes.push((*v, i));
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            let p0 = mesh.vertices[edge.vertices.0];
            let p1 = mesh.vertices[edge.vertices.1];
            nodes.push(([0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])], nv + e));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (nodes[a].0, nodes[b].0);
            pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
        });
        let n_dofs = nodes.len();
        let mut vertex_dof = vec![0usize; nv];
        let mut edge_dof = vec![0usize; ne];
        let mut dof_coords = vec![[0.0; 2]; n_dofs];
        for (dof, &slot) in order.iter().enumerate() {
            let (xy, raw) = nodes[slot];
            dof_coords[dof] = xy;
            if raw < nv {
                vertex_dof[raw] = dof;
            } else {
                edge_dof[raw - nv] = dof;
            }
        }

        let mut tri_dofs = Vec::with_capacity(mesh.n_triangles());
        let mut grad_lambda = Vec::with_capacity(mesh.n_triangles());
        let mut area = Vec::with_capacity(mesh.n_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let te = mesh.triangle_edges[t];
            // edge te[k] is opposite local vertex k: te[2] joins v0 v1, etc.
            tri_dofs.push([
                vertex_dof[tri[0]],
                vertex_dof[tri[1]],
                vertex_dof[tri[2]],
                edge_dof[te[2]],
                edge_dof[te[0]],
                edge_dof[te[1]],
            ]);
            let [p0, p1, p2] = [
                mesh.vertices[tri[0]],
                mesh.vertices[tri[1]],
                mesh.vertices[tri[2]],
            ];
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            let gx = [(p2[1] - p0[1]) / det, -(p2[0] - p0[0]) / det];
            let gy = [-(p1[1] - p0[1]) / det, (p1[0] - p0[0]) / det];
            grad_lambda.push([[-gx[0] - gy[0], -gx[1] - gy[1]], gx, gy]);
            area.push(0.5 * det);
        }

        let volume_rule = TriangleRule::default_volume();
        let basis_at_quad = volume_rule.points.iter().map(|&l| basis_values(l)).collect();

        Arc::new(FESpace {
            mesh,
            n_dofs,
            tri_dofs,
            dof_coords,
            vertex_dof,
            edge_dof,
            volume_rule,
            edge_rule: EdgeRule::default_edge(),
            basis_at_quad,
            grad_lambda,
            area,
            mass: OnceLock::new(),
            stiffness: OnceLock::new(),
            pattern: OnceLock::new(),
            mass_lu: OnceLock::new(),
            h1_lu: OnceLock::new(),
        })
    }

    pub fn n_triangles(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn n_quad(&self) -> usize {
        self.volume_rule.len()
    }

    /// Gradients of the six basis functions at a barycentric point of
    /// triangle `t`.
    pub fn basis_gradients(&self, t: usize, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda[t];
        let mut out = [[0.0; 2]; 6];
        for d in 0..2 {
            out[0][d] = (4.0 * l[0] - 1.0) * g[0][d];
            out[1][d] = (4.0 * l[1] - 1.0) * g[1][d];
            out[2][d] = (4.0 * l[2] - 1.0) * g[2][d];
            out[3][d] = 4.0 * (l[0] * g[1][d] + l[1] * g[0][d]);
            out[4][d] = 4.0 * (l[1] * g[2][d] + l[2] * g[1][d]);
            out[5][d] = 4.0 * (l[2] * g[0][d] + l[0] * g[2][d]);
        }
        out
    }

    /// Laplacians of the six basis functions on triangle `t` (constants).
    pub fn basis_laplacians(&self, t: usize) -> [f64; 6] {
        let g = &self.grad_lambda[t];
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        [
            4.0 * dot(g[0], g[0]),
            4.0 * dot(g[1], g[1]),
            4.0 * dot(g[2], g[2]),
            8.0 * dot(g[0], g[1]),
            8.0 * dot(g[1], g[2]),
            8.0 * dot(g[2], g[0]),
        ]
    }

    /// Physical coordinates of a barycentric point of triangle `t`.
    pub fn physical_point(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let tri = &self.mesh.triangles[t];
        let [a, b, c] = [
            self.mesh.vertices[tri[0]],
            self.mesh.vertices[tri[1]],
            self.mesh.vertices[tri[2]],
        ];
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    pub fn pattern(&self) -> &AssemblyPattern {
        self.pattern.get_or_init(|| {
            let n = self.n_dofs;
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for dofs in &self.tri_dofs {
                for &i in dofs {
                    for &j in dofs {
                        adj[i].push(j);
                    }
                }
            }
            let mut row_ptr = vec![0usize; n + 1];
            let mut cols = Vec::new();
            for (i, row) in adj.iter_mut().enumerate() {
                row.sort_unstable();
                row.dedup();
                cols.extend_from_slice(row);
                row_ptr[i + 1] = cols.len();
            }
            let csr = CsrMatrix::from_pattern(n, n, row_ptr.clone(), cols.clone());
            let scatter = self
                .tri_dofs
                .iter()
                .map(|dofs| {
                    let mut s = [[0usize; 6]; 6];
                    for (a, &i) in dofs.iter().enumerate() {
                        for (b, &j) in dofs.iter().enumerate() {
                            s[a][b] = csr.index_of(i, j).expect("pattern covers triangle");
                        }
                    }
                    s
                })
                .collect();
            AssemblyPattern {
                row_ptr,
                cols,
                scatter,
            }
        })
    }

    /// Zero matrix with the space's sparsity pattern.
    pub fn zero_matrix(&self) -> CsrMatrix {
        let p = self.pattern();
        CsrMatrix::from_pattern(self.n_dofs, self.n_dofs, p.row_ptr.clone(), p.cols.clone())
    }

    pub fn mass_matrix(&self) -> &CsrMatrix {
        self.mass
            .get_or_init(|| crate::fem::assemble::assemble_mass(self, None))
    }

    pub fn stiffness_matrix(&self) -> &CsrMatrix {
        self.stiffness
            .get_or_init(|| crate::fem::assemble::assemble_stiffness(self))
    }

    pub fn mass_lu(&self) -> &BandLu {
        self.mass_lu
            .get_or_init(|| BandLu::factor(self.mass_matrix()).expect("mass matrix is SPD"))
    }

    /// Factorization of K + M, the Riesz map of the discrete H^1 inner
    /// product used by the dual norm.
    pub fn h1_lu(&self) -> &BandLu {
        self.h1_lu.get_or_init(|| {
            let a = CsrMatrix::linear_combination(
                1.0,
                self.stiffness_matrix(),
                1.0,
                self.mass_matrix(),
            );
            BandLu::factor(&a).expect("K + M is SPD")
        })
    }
}

/// Finite element function: a coefficient vector over a space.
#[derive(Clone)]
pub struct FEFunction {
    pub space: Arc<FESpace>,
    pub coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn new(space: Arc<FESpace>, coeffs: Vec<f64>) -> Result<FEFunction> {
        if coeffs.len() != space.n_dofs {
            return Err(Error::InvalidInput(format!(
                "coefficient length {} does not match dof count {}",
                coeffs.len(),
                space.n_dofs
            )));
        }
        Ok(FEFunction { space, coeffs })
    }

    pub fn zero(space: Arc<FESpace>) -> FEFunction {
        let n = space.n_dofs;
        FEFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn constant(space: Arc<FESpace>, c: f64) -> FEFunction {
        let n = space.n_dofs;
        FEFunction {
            space,
            coeffs: vec![c; n],
        }
    }

    /// Nodal interpolation of a pointwise function.
    pub fn interpolate(space: &Arc<FESpace>, f: impl Fn(f64, f64) -> f64) -> FEFunction {
        let coeffs = space
            .dof_coords
            .iter()
            .map(|&[x, y]| f(x, y))
            .collect();
        FEFunction {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn eval_on_tri(&self, t: usize, l: [f64; 3]) -> f64 {
        let n = basis_values(l);
        let dofs = &self.space.tri_dofs[t];
        (0..6).map(|k| self.coeffs[dofs[k]] * n[k]).sum()
    }

    pub fn grad_on_tri(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let g = self.space.basis_gradients(t, l);
        let dofs = &self.space.tri_dofs[t];
        let mut out = [0.0; 2];
        for k in 0..6 {
            out[0] += self.coeffs[dofs[k]] * g[k][0];
            out[1] += self.coeffs[dofs[k]] * g[k][1];
        }
        out
    }

    /// Laplacian on triangle `t` (P2: constant per triangle).
    pub fn laplacian_on_tri(&self, t: usize) -> f64 {
        let d = self.space.basis_laplacians(t);
        let dofs = &self.space.tri_dofs[t];
        (0..6).map(|k| self.coeffs[dofs[k]] * d[k]).sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (t, l) = self.space.mesh.locate(x, y);
        self.eval_on_tri(t, l)
    }

    /// a * self + b * other (same space).
    pub fn lin_comb(&self, a: f64, b: f64, other: &FEFunction) -> FEFunction {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&u, &v)| a * u + b * v)
            .collect();
        FEFunction {
            space: self.space.clone(),
            coeffs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rectangle};

    fn space(n: usize) -> Arc<FESpace> {
        let mesh = build_structured_mesh(Rectangle::symmetric_square(2.0), n).unwrap();
        FESpace::new(Arc::new(mesh))
    }

    #[test]
    fn dof_count_is_vertices_plus_edges() {
        for n in [1, 2, 5] {
            let s = space(n);
            assert_eq!(s.n_dofs, s.mesh.n_vertices() + s.mesh.n_edges());
            assert_eq!(s.n_dofs, (2 * n + 1) * (2 * n + 1));
        }
    }

    #[test]
    fn evaluation_at_dof_node_returns_coefficient() {
        let s = space(3);
        let f = FEFunction::interpolate(&s, |x, y| x * x + 0.5 * y - x * y);
        for (dof, &[x, y]) in s.dof_coords.iter().enumerate() {
            let v = f.eval(x, y);
            assert!(
                (v - f.coeffs[dof]).abs() < 1e-12,
                "dof {dof} at ({x},{y}): {v} vs {}",
                f.coeffs[dof]
            );
        }
    }

    #[test]
    fn p2_reproduces_quadratics_exactly() {
        let s = space(4);
        let q = |x: f64, y: f64| 1.0 + 2.0 * x - y + 0.5 * x * x + x * y - 2.0 * y * y;
        let f = FEFunction::interpolate(&s, q);
        for &(x, y) in &[(0.3, -1.7), (1.9, 0.05), (-0.33, 0.41)] {
            assert!((f.eval(x, y) - q(x, y)).abs() < 1e-12);
        }
        // gradient too
        let (t, l) = s.mesh.locate(0.3, -1.7);
        let g = f.grad_on_tri(t, l);
        assert!((g[0] - (2.0 + 0.3 + (-1.7))).abs() < 1e-12);
        assert!((g[1] - (-1.0 + 0.3 - 4.0 * (-1.7))).abs() < 1e-12);
        // Laplacian of the quadratic is 0.5*2 - 2*2*... : 1 - 4 = -3
        assert!((f.laplacian_on_tri(t) - (1.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn h1_conformity_across_edges() {
        let s = space(3);
        let f = FEFunction::interpolate(&s, |x, y| (x + 0.3).powi(2) - y * x);
        for e in s.mesh.edges.iter().filter(|e| e.is_interior()) {
            let p0 = s.mesh.vertices[e.vertices.0];
            let p1 = s.mesh.vertices[e.vertices.1];
            for theta in [0.21, 0.5, 0.83] {
                let x = p0[0] + theta * (p1[0] - p0[0]);
                let y = p0[1] + theta * (p1[1] - p0[1]);
                let lt = s.mesh.barycentric(e.left, x, y);
                let rt = s.mesh.barycentric(e.right.unwrap(), x, y);
                let vl = f.eval_on_tri(e.left, lt);
                let vr = f.eval_on_tri(e.right.unwrap(), rt);
                assert!((vl - vr).abs() < 1e-12);
            }
        }
    }
}
