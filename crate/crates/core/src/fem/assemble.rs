//! Matrix and load-vector assembly over the volume quadrature rule.
//!
//! Local matrices are computed on the upper triangle and mirrored, so the
//! assembled matrices are exactly symmetric. All integrands go through the
//! single degree-8 rule owned by the space.

use crate::fem::space::FESpace;

/// Values of a scalar field at every volume quadrature point, indexed
/// `[t * n_quad + q]`. The common carrier for weights and integrands.
#[derive(Clone, Debug)]
pub struct QuadValues {
    pub vals: Vec<f64>,
    pub n_quad: usize,
}

impl QuadValues {
    pub fn from_fn(space: &FESpace, mut f: impl FnMut(usize, [f64; 2]) -> f64) -> QuadValues {
        let nq = space.n_quad();
        let mut vals = Vec::with_capacity(space.n_triangles() * nq);
        for t in 0..space.n_triangles() {
            for q in 0..nq {
                let xy = space.physical_point(t, space.volume_rule.points[q]);
                vals.push(f(t, xy));
            }
        }
        QuadValues { vals, n_quad: nq }
    }

    /// Values of `map(u_h)` at the quadrature points of a coefficient vector.
    pub fn from_coeffs(space: &FESpace, coeffs: &[f64], map: impl Fn(f64) -> f64) -> QuadValues {
        let nq = space.n_quad();
        let mut vals = Vec::with_capacity(space.n_triangles() * nq);
        for t in 0..space.n_triangles() {
            let dofs = &space.tri_dofs[t];
            for q in 0..nq {
                let n = &space.basis_at_quad[q];
                let mut u = 0.0;
                for k in 0..6 {
                    u += coeffs[dofs[k]] * n[k];
                }
                vals.push(map(u));
            }
        }
        QuadValues { vals, n_quad: nq }
    }

    #[inline]
    pub fn at(&self, t: usize, q: usize) -> f64 {
        self.vals[t * self.n_quad + q]
    }
}

/// Mass matrix, optionally weighted: M_ij = int w(x) chi_i chi_j dx.
/// With a weight bounded below by a positive constant the result is positive
/// definite.
pub fn assemble_mass(space: &FESpace, weight: Option<&QuadValues>) -> crate::fem::linalg::CsrMatrix {
    let mut m = space.zero_matrix();
    let pattern = space.pattern();
    let rule = &space.volume_rule;
    let nq = rule.len();
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        let mut local = [[0.0f64; 6]; 6];
        for q in 0..nq {
            let w = match weight {
                Some(qv) => rule.weights[q] * qv.at(t, q),
                None => rule.weights[q],
            } * jac;
            let n = &space.basis_at_quad[q];
            for i in 0..6 {
                let wni = w * n[i];
                for j in i..6 {
                    local[i][j] += wni * n[j];
                }
            }
        }
        let scatter = &pattern.scatter[t];
        for i in 0..6 {
            for j in i..6 {
                m.vals[scatter[i][j]] += local[i][j];
                if j > i {
                    m.vals[scatter[j][i]] += local[i][j];
                }
            }
        }
    }
    m
}

/// Stiffness matrix K_ij = int grad chi_i . grad chi_j dx. The kernel is
/// spanned by the constant function (pure Neumann setting).
pub fn assemble_stiffness(space: &FESpace) -> crate::fem::linalg::CsrMatrix {
    let mut k = space.zero_matrix();
    let pattern = space.pattern();
    let rule = &space.volume_rule;
    let nq = rule.len();
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        let mut local = [[0.0f64; 6]; 6];
        for q in 0..nq {
            let w = rule.weights[q] * jac;
            let g = space.basis_gradients(t, rule.points[q]);
            for i in 0..6 {
                for j in i..6 {
                    local[i][j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        let scatter = &pattern.scatter[t];
        for i in 0..6 {
            for j in i..6 {
                k.vals[scatter[i][j]] += local[i][j];
                if j > i {
                    k.vals[scatter[j][i]] += local[i][j];
                }
            }
        }
    }
    k
}

/// Load vector l_i = int f chi_i dx for data given at quadrature points.
pub fn assemble_load(space: &FESpace, f: &QuadValues) -> Vec<f64> {
    let mut load = vec![0.0; space.n_dofs];
    let rule = &space.volume_rule;
    let nq = rule.len();
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        let dofs = &space.tri_dofs[t];
        for q in 0..nq {
            let w = rule.weights[q] * f.at(t, q) * jac;
            let n = &space.basis_at_quad[q];
            for k in 0..6 {
                load[dofs[k]] += w * n[k];
            }
        }
    }
    load
}
