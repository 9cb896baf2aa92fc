//! Computable norms: L^p by quadrature sampling, L^infinity as a max over a
//! fixed per-triangle sample set (quadrature points plus the six Lagrange
//! nodes), the discrete H^-1 dual norm through the Riesz representative in
//! the same space, and the L^2 projection.
//!
//! The L^p values for p other than 2 and the L^infinity values are sampling
//! surrogates; the same fixed sample set is used everywhere so sweeps stay
//! comparable. The discrete dual norm is a lower bound of the continuous
//! H^-1 norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_load, QuadValues};
use crate::fem::space::{FEFunction, FESpace, LOCAL_NODES};

/// Exponents accepted by the norm routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormP {
    L2,
    L3,
    L4,
    L6,
    LInf,
}

impl NormP {
    pub fn from_value(p: f64) -> Result<NormP> {
        if p.is_infinite() {
            return Ok(NormP::LInf);
        }
        match p as u32 {
            2 => Ok(NormP::L2),
            3 => Ok(NormP::L3),
            4 => Ok(NormP::L4),
            6 => Ok(NormP::L6),
            _ => Err(Error::InvalidInput(format!("unsupported norm exponent {p}"))),
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            NormP::L2 => 2.0,
            NormP::L3 => 3.0,
            NormP::L4 => 4.0,
            NormP::L6 => 6.0,
            NormP::LInf => f64::INFINITY,
        }
    }
}

/// A scalar field evaluable on triangles; the seam between FE functions and
/// derived pointwise quantities.
pub trait TriField {
    fn at(&self, t: usize, bary: [f64; 3], xy: [f64; 2]) -> f64;
}

impl TriField for FEFunction {
    fn at(&self, t: usize, bary: [f64; 3], _xy: [f64; 2]) -> f64 {
        self.eval_on_tri(t, bary)
    }
}

/// Wrap a closure as a field.
pub struct FnField<F: Fn(usize, [f64; 3], [f64; 2]) -> f64>(pub F);

impl<F: Fn(usize, [f64; 3], [f64; 2]) -> f64> TriField for FnField<F> {
    fn at(&self, t: usize, bary: [f64; 3], xy: [f64; 2]) -> f64 {
        self.0(t, bary, xy)
    }
}

/// L^p norm of a field. Finite p by quadrature; p = infinity as the max over
/// quadrature points and the nodal lattice.
pub fn norm_lp(space: &FESpace, field: &dyn TriField, p: NormP) -> f64 {
    match p {
        NormP::LInf => {
            let mut m = 0.0f64;
            for t in 0..space.n_triangles() {
                for &l in space
                    .volume_rule
                    .points
                    .iter()
                    .chain(LOCAL_NODES.iter())
                {
                    let xy = space.physical_point(t, l);
                    m = m.max(field.at(t, l, xy).abs());
                }
            }
            m
        }
        _ => {
            let pe = p.exponent();
            let mut acc = 0.0;
            for t in 0..space.n_triangles() {
                let jac = 2.0 * space.area[t];
                for (q, &l) in space.volume_rule.points.iter().enumerate() {
                    let xy = space.physical_point(t, l);
                    let v = field.at(t, l, xy).abs();
                    acc += space.volume_rule.weights[q] * jac * v.powf(pe);
                }
            }
            acc.powf(1.0 / pe)
        }
    }
}

/// L^p norm of |grad v| for an FE function.
pub fn grad_norm_lp(v: &FEFunction, p: NormP) -> f64 {
    let space = &v.space;
    let mag = |t: usize, l: [f64; 3]| {
        let g = v.grad_on_tri(t, l);
        g[0].hypot(g[1])
    };
    match p {
        NormP::LInf => {
            let mut m = 0.0f64;
            for t in 0..space.n_triangles() {
                for &l in space.volume_rule.points.iter().chain(LOCAL_NODES.iter()) {
                    m = m.max(mag(t, l));
                }
            }
            m
        }
        _ => {
            let pe = p.exponent();
            let mut acc = 0.0;
            for t in 0..space.n_triangles() {
                let jac = 2.0 * space.area[t];
                for (q, &l) in space.volume_rule.points.iter().enumerate() {
                    acc += space.volume_rule.weights[q] * jac * mag(t, l).powf(pe);
                }
            }
            acc.powf(1.0 / pe)
        }
    }
}

/// L^2 norm squared of an FE function through the mass matrix.
pub fn l2_norm_sq(v: &FEFunction) -> f64 {
    v.space.mass_matrix().bilinear(&v.coeffs, &v.coeffs).max(0.0)
}

/// Discrete H^-1 norm of a functional given by its load vector:
/// solve (K + M) w = l and return sqrt(l^T w). Equals the supremum of
/// <g, v>/||v||_1 over the discrete space.
pub fn dual_norm_neg1(space: &FESpace, load: &[f64]) -> f64 {
    let w = space.h1_lu().solve(load);
    let s: f64 = load.iter().zip(&w).map(|(a, b)| a * b).sum();
    s.max(0.0).sqrt()
}

/// L^2-orthogonal projection of a pointwise function onto the space.
pub fn l2_project(space: &Arc<FESpace>, f: impl Fn(f64, f64) -> f64) -> Result<FEFunction> {
    let qv = QuadValues::from_fn(space, |_, xy| f(xy[0], xy[1]));
    let load = assemble_load(space, &qv);
    let coeffs = space.mass_lu().solve(&load);
    // verify the solve
    let mut r = space.mass_matrix().matvec_alloc(&coeffs);
    let mut rmax = 0.0f64;
    let mut bmax = 0.0f64;
    for (ri, bi) in r.iter_mut().zip(&load) {
        rmax = rmax.max((*ri - bi).abs());
        bmax = bmax.max(bi.abs());
    }
    if rmax > 1e-10 * (1.0 + bmax) {
        return Err(Error::Numerical(format!(
            "projection solve residual {rmax:.3e}"
        )));
    }
    FEFunction::new(space.clone(), coeffs)
}
