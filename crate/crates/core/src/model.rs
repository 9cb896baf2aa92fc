//! Model data: the double-well potential, the mobility, the convex entropy
//! with G'' = 1/b, the growth/bound constants entering the estimates, and the
//! relative (Bregman) functionals.
//!
//! Bound constants are certified on a finite validation interval [-m, m]
//! rather than on all of R: the exact solution stays in [-1, 1] by the
//! maximum principle and discrete overshoot is monitored, so m = 1.5 leaves
//! headroom while keeping the constants finite for the quartic mobility.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::quadrature::gauss_legendre_unit;
use crate::fem::{grad_norm_lp, norm_lp, FEFunction, FnField, NormP, QuadValues};

/// Default half-width of the validation interval.
pub const DEFAULT_VALIDATION_RANGE: f64 = 1.5;

/// Energy density. The quartic double well f(s) = (s^2-1)^2 / 4 with minima
/// at +-1 is the production choice; the quadratic s^2/2 (f' linear) exists
/// as a linearization test case for scheme and interpolation oracles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    #[serde(rename = "quartic")]
    QuarticDoubleWell,
    #[serde(rename = "quadratic")]
    Quadratic,
}

impl Potential {
    pub fn f(&self, s: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => {
                let q = s * s - 1.0;
                0.25 * q * q
            }
            Potential::Quadratic => 0.5 * s * s,
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => s * s * s - s,
            Potential::Quadratic => s,
        }
    }

    pub fn d2f(&self, s: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 3.0 * s * s - 1.0,
            Potential::Quadratic => 1.0,
        }
    }

    pub fn d3f(&self, s: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 6.0 * s,
            Potential::Quadratic => 0.0,
        }
    }

    pub fn d4f(&self, _s: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 6.0,
            Potential::Quadratic => 0.0,
        }
    }

    /// f(s), f''(s) >= -f1.
    pub fn f1(&self) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 1.0,
            Potential::Quadratic => 0.0,
        }
    }

    /// Growth constants with |f^(k)(s)| <= f2^(k) + f3^(k) |s|^(4-k).
    pub fn f2(&self, k: usize) -> f64 {
        match self {
            Potential::QuarticDoubleWell => [0.25, 1.0, 1.0, 0.0, 6.0][k],
            Potential::Quadratic => [0.5, 0.5, 1.0, 0.0, 0.0][k],
        }
    }

    pub fn f3(&self, k: usize) -> f64 {
        match self {
            Potential::QuarticDoubleWell => [0.25, 2.0, 3.0, 6.0, 0.0][k],
            Potential::Quadratic => [0.5, 0.5, 0.0, 0.0, 0.0][k],
        }
    }

    /// Coefficient c with |f''(a) - f''(b)| <= c |a - b| for |a| <= a_max,
    /// |b| <= b_max. For the quartic f''' = 6s gives the sharp
    /// c = 3 (a_max + b_max).
    pub fn d2f_diff_coeff(&self, a_max: f64, b_max: f64) -> f64 {
        match self {
            Potential::QuarticDoubleWell => 3.0 * (a_max + b_max),
            Potential::Quadratic => 0.0,
        }
    }
}

/// Mobility b(phi), non-degenerate: 0 < b1 <= b <= b2 on the validation
/// interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Mobility {
    #[serde(rename = "constant")]
    Constant { value: f64 },
    /// b(s) = 1 + amplitude * (s^2 - 1)^2; the experiment uses amplitude 1/10.
    #[serde(rename = "quartic_well")]
    QuarticWell { amplitude: f64 },
}

impl Mobility {
    pub fn b(&self, s: f64) -> f64 {
        match *self {
            Mobility::Constant { value } => value,
            Mobility::QuarticWell { amplitude } => {
                let q = s * s - 1.0;
                1.0 + amplitude * q * q
            }
        }
    }

    pub fn db(&self, s: f64) -> f64 {
        match *self {
            Mobility::Constant { .. } => 0.0,
            Mobility::QuarticWell { amplitude } => 4.0 * amplitude * s * (s * s - 1.0),
        }
    }

    pub fn d2b(&self, s: f64) -> f64 {
        match *self {
            Mobility::Constant { .. } => 0.0,
            Mobility::QuarticWell { amplitude } => amplitude * (12.0 * s * s - 4.0),
        }
    }
}

/// Tabulated entropy G with G'' = 1/b, G'(0) = G(0) = 0.
///
/// Values of G' = int_0^s 1/b and G(s) = int_0^s (s - v)/b(v) dv are
/// accumulated by per-segment Gauss quadrature on a Chebyshev-extrema grid
/// and evaluated by local cubic interpolation; G sits inside quadrature
/// loops, so evaluation must stay cheap.
#[derive(Clone, Debug)]
pub struct Entropy {
    pub mobility: Mobility,
    pub range: f64,
    nodes: Vec<f64>,
    g: Vec<f64>,
    gp: Vec<f64>,
}

impl Entropy {
    pub fn build(mobility: Mobility, range: f64) -> Entropy {
        const N: usize = 4096;
        let m = range;
        // Chebyshev extrema, ordered increasing
        let nodes: Vec<f64> = (0..N)
            .map(|k| -m * (std::f64::consts::PI * k as f64 / (N - 1) as f64).cos())
            .collect();

        // per-segment integrals of 1/b and v/b with 10-point Gauss
        let (gq, gw) = gauss_legendre_unit(10);
        let seg = |a: f64, b: f64| -> (f64, f64) {
            let mut i1 = 0.0;
            let mut iv = 0.0;
            for (x, w) in gq.iter().zip(&gw) {
                let v = a + x * (b - a);
                let inv = 1.0 / mobility.b(v);
                i1 += w * inv;
                iv += w * v * inv;
            }
            ((b - a) * i1, (b - a) * iv)
        };

        // prefix sums from the left end
        let mut p1 = vec![0.0; N];
        let mut pv = vec![0.0; N];
        for k in 1..N {
            let (a, b) = (nodes[k - 1], nodes[k]);
            let (d1, dv) = seg(a, b);
            p1[k] = p1[k - 1] + d1;
            pv[k] = pv[k - 1] + dv;
        }
        // anchor the antiderivatives at 0
        let k0 = nodes.partition_point(|&x| x < 0.0);
        let (a0, _) = (nodes[k0 - 1], nodes[k0]);
        let (d1, dv) = seg(a0, 0.0);
        let p1_at_0 = p1[k0 - 1] + d1;
        let pv_at_0 = pv[k0 - 1] + dv;

        let mut g = vec![0.0; N];
        let mut gp = vec![0.0; N];
        for k in 0..N {
            let i1 = p1[k] - p1_at_0; // int_0^{s_k} 1/b
            let iv = pv[k] - pv_at_0; // int_0^{s_k} v/b
            gp[k] = i1;
            g[k] = nodes[k] * i1 - iv;
        }
        Entropy {
            mobility,
            range,
            nodes,
            g,
            gp,
        }
    }

    /// (G(s), G'(s)); domain error outside the table range.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        let m = self.range;
        if !(s >= -m && s <= m) {
            return Err(Error::EntropyRange {
                value: s,
                lo: -m,
                hi: m,
            });
        }
        let n = self.nodes.len();
        // segment index from the Chebyshev parametrization
        let t = (-(s / m)).clamp(-1.0, 1.0).acos() / std::f64::consts::PI * (n - 1) as f64;
        let k = (t.floor() as usize).min(n - 2);
        // 4-point Lagrange stencil around segment k
        let lo = k.saturating_sub(1).min(n - 4);
        let xs = &self.nodes[lo..lo + 4];
        let mut gv = 0.0;
        let mut gpv = 0.0;
        for i in 0..4 {
            let mut li = 1.0;
            for j in 0..4 {
                if i != j {
                    li *= (s - xs[j]) / (xs[i] - xs[j]);
                }
            }
            gv += li * self.g[lo + i];
            gpv += li * self.gp[lo + i];
        }
        Ok((gv, gpv))
    }

    /// Bregman distance G(a|b) = G(a) - G(b) - G'(b)(a-b); nonnegative by
    /// convexity.
    pub fn bregman(&self, a: f64, b: f64) -> Result<f64> {
        let (ga, _) = self.eval(a)?;
        let (gb, gpb) = self.eval(b)?;
        Ok(ga - gb - gpb * (a - b))
    }
}

/// Constants entering the stability estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModelConstants {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub f1: f64,
    pub f2: [f64; 5],
    pub f3: [f64; 5],
    /// C2 = 1/2 + 3/b1
    pub c2: f64,
    /// C3 = 1 + 3 b2
    pub c3: f64,
    /// C4 = b3 + 6 b3^2 / b1^2
    pub c4: f64,
    /// H^1 -> L^6 embedding constant (configuration input, default 1).
    pub c_i: f64,
    /// H^1 -> L^{2q} embedding constant (configuration input, default 1).
    pub c_e: f64,
    /// Validation interval half-width the b-constants were derived on.
    pub range: f64,
}

impl ModelConstants {
    /// C1 as a function of the reconstruction's sup norm.
    pub fn c1(&self, phi_hat_inf: f64) -> f64 {
        self.f2[3] + self.f3[3] * (1.0 + phi_hat_inf)
    }
}

/// Derive the (A2)/(A3) constants on the validation interval by dense
/// sampling; the f-constants are the analytic values of the quartic.
pub fn derive_bound_constants(
    mobility: Mobility,
    potential: Potential,
    range: f64,
    c_i: f64,
    c_e: f64,
) -> Result<ModelConstants> {
    const SAMPLES: usize = 200_001;
    let mut b1 = f64::INFINITY;
    let mut b2 = f64::NEG_INFINITY;
    let mut b3 = 0.0f64;
    let mut b4 = 0.0f64;
    for k in 0..SAMPLES {
        let s = -range + 2.0 * range * k as f64 / (SAMPLES - 1) as f64;
        let b = mobility.b(s);
        b1 = b1.min(b);
        b2 = b2.max(b);
        b3 = b3.max(mobility.db(s).abs());
        b4 = b4.max(mobility.d2b(s).abs());
    }
    if b1 <= 0.0 {
        return Err(Error::ModelAssumption(format!(
            "mobility not positive on [-{range}, {range}] (min {b1})"
        )));
    }
    Ok(ModelConstants {
        b1,
        b2,
        b3,
        b4,
        f1: potential.f1(),
        f2: [0, 1, 2, 3, 4].map(|k| potential.f2(k)),
        f3: [0, 1, 2, 3, 4].map(|k| potential.f3(k)),
        c2: 0.5 + 3.0 / b1,
        c3: 1.0 + 3.0 * b2,
        c4: b3 + 6.0 * b3 * b3 / (b1 * b1),
        c_i,
        c_e,
        range,
    })
}

/// Everything downstream modules need about the model.
#[derive(Clone, Debug)]
pub struct Model {
    pub potential: Potential,
    pub mobility: Mobility,
    pub entropy: Arc<Entropy>,
    pub constants: ModelConstants,
}

impl Model {
    pub fn new(
        potential: Potential,
        mobility: Mobility,
        range: f64,
        c_i: f64,
        c_e: f64,
    ) -> Result<Model> {
        let constants = derive_bound_constants(mobility, potential, range, c_i, c_e)?;
        Ok(Model {
            potential,
            mobility,
            entropy: Arc::new(Entropy::build(mobility, range)),
            constants,
        })
    }

    /// Experiment defaults: quartic well potential, b = 1 + (phi^2-1)^2/10.
    pub fn experiment_default() -> Model {
        Model::new(
            Potential::QuarticDoubleWell,
            Mobility::QuarticWell { amplitude: 0.1 },
            DEFAULT_VALIDATION_RANGE,
            1.0,
            1.0,
        )
        .expect("default model is admissible")
    }

    pub fn constant_mobility(value: f64) -> Model {
        Model::new(
            Potential::QuarticDoubleWell,
            Mobility::Constant { value },
            DEFAULT_VALIDATION_RANGE,
            1.0,
            1.0,
        )
        .expect("constant mobility is admissible")
    }
}

/// Relative energy E(phi | phi_hat) = 1/2 ||grad(phi - phi_hat)||^2
/// + 1/gamma int f(phi) - f(phi_hat) - f'(phi_hat)(phi - phi_hat).
pub fn relative_energy(
    potential: Potential,
    phi: &FEFunction,
    phi_hat: &FEFunction,
    gamma: f64,
) -> f64 {
    let space = &phi.space;
    let diff = phi.lin_comb(1.0, -1.0, phi_hat);
    let grad_sq = {
        let k = space.stiffness_matrix();
        k.bilinear(&diff.coeffs, &diff.coeffs)
    };
    let mut bregman = 0.0;
    let rule = &space.volume_rule;
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        for (q, &l) in rule.points.iter().enumerate() {
            let a = phi.eval_on_tri(t, l);
            let b = phi_hat.eval_on_tri(t, l);
            let fb = potential.f(a) - potential.f(b) - potential.df(b) * (a - b);
            bregman += rule.weights[q] * jac * fb;
        }
    }
    0.5 * grad_sq + bregman / gamma
}

/// Entropy Bregman distance G(phi | phi_hat) = int G(phi) - G(phi_hat)
/// - G'(phi_hat)(phi - phi_hat).
pub fn bregman_g(entropy: &Entropy, phi: &FEFunction, phi_hat: &FEFunction) -> Result<f64> {
    let space = &phi.space;
    let rule = &space.volume_rule;
    let mut acc = 0.0;
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        for (q, &l) in rule.points.iter().enumerate() {
            let a = phi.eval_on_tri(t, l);
            let b = phi_hat.eval_on_tri(t, l);
            acc += rule.weights[q] * jac * entropy.bregman(a, b)?;
        }
    }
    Ok(acc)
}

/// Relative dissipation D_phi(mu | mu_hat) = || b(phi)^{1/2} (mu - mu_hat) ||^2.
pub fn relative_dissipation(
    mobility: Mobility,
    phi: &FEFunction,
    mu: &FEFunction,
    mu_hat: &FEFunction,
) -> f64 {
    let space = &phi.space;
    let rule = &space.volume_rule;
    let mut acc = 0.0;
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        for (q, &l) in rule.points.iter().enumerate() {
            let d = mu.eval_on_tri(t, l) - mu_hat.eval_on_tri(t, l);
            acc += rule.weights[q] * jac * mobility.b(phi.eval_on_tri(t, l)) * d * d;
        }
    }
    acc
}

/// Numerical check of the gamma-smallness property
/// gamma f(a|b) + G(a|b) >= (b1/2)(a-b)^2 on the sampled range.
///
/// `worst_coefficient` is the smallest sampled value of
/// (gamma f(a|b) + G(a|b)) / (a-b)^2; the property holds when it is at
/// least b1/2. The check is reported per run, never assumed.
pub struct GammaSmallness {
    pub holds: bool,
    pub worst_coefficient: f64,
    pub required: f64,
    pub worst_pair: (f64, f64),
}

pub fn check_gamma_smallness(model: &Model, gamma: f64) -> GammaSmallness {
    const N: usize = 201;
    let m = model.constants.range;
    let b1 = model.constants.b1;
    let mut worst = f64::INFINITY;
    let mut pair = (0.0, 0.0);
    for i in 0..N {
        let a = -m + 2.0 * m * i as f64 / (N - 1) as f64;
        for j in 0..N {
            let b = -m + 2.0 * m * j as f64 / (N - 1) as f64;
            let d2 = (a - b) * (a - b);
            if d2 < 1e-12 {
                continue;
            }
            let fb = model.potential.f(a)
                - model.potential.f(b)
                - model.potential.df(b) * (a - b);
            let gb = model.entropy.bregman(a, b).expect("samples in range");
            let coeff = (gamma * fb + gb) / d2;
            if coeff < worst {
                worst = coeff;
                pair = (a, b);
            }
        }
    }
    GammaSmallness {
        holds: worst >= 0.5 * b1 - 1e-12,
        worst_coefficient: worst,
        required: 0.5 * b1,
        worst_pair: pair,
    }
}

/// Norm helpers shared by estimator and certificate assembly.
pub fn fe_norm(space: &crate::fem::FESpace, f: &FEFunction, p: NormP) -> f64 {
    norm_lp(space, f, p)
}

pub fn fe_grad_norm(f: &FEFunction, p: NormP) -> f64 {
    grad_norm_lp(f, p)
}

/// Quadrature values of f'(phi_h) for a coefficient vector.
pub fn df_quad_values(space: &crate::fem::FESpace, potential: Potential, coeffs: &[f64]) -> QuadValues {
    QuadValues::from_coeffs(space, coeffs, |u| potential.df(u))
}

/// Difference field as a TriField (for norms of pointwise expressions).
pub fn field_of(f: impl Fn(usize, [f64; 3], [f64; 2]) -> f64) -> FnField<impl Fn(usize, [f64; 3], [f64; 2]) -> f64> {
    FnField(f)
}
