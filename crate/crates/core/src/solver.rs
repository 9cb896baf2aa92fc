//! Time stepping for the discrete scheme: implicit Euler in phi and mu with
//! the mobility frozen at the old state, solved by Newton on the monolithic
//! 2x2 block system in (phi, mu). The block layout interleaves the fields
//! (dof i -> rows 2i, 2i+1) to keep the band width proportional to the
//! scalar one.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assemble::{assemble_load, assemble_mass, QuadValues};
use crate::fem::linalg::{BandLu, CsrMatrix};
use crate::fem::space::{FEFunction, FESpace};
use crate::model::Model;

/// Absolute l-infinity tolerance on the nonlinear residual.
pub const NEWTON_TOL: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 25;

/// Uniform-in-time discrete trajectory: t^j = j * tau exactly.
#[derive(Clone)]
pub struct Trajectory {
    pub space: Arc<FESpace>,
    pub gamma: f64,
    pub tau: f64,
    /// Coefficients of phi_h^0 .. phi_h^N.
    pub phi: Vec<Vec<f64>>,
    /// Coefficients of mu_h^0 .. mu_h^N; mu_h^0 from the initialization
    /// identity.
    pub mu: Vec<Vec<f64>>,
    /// Discrete free energy per node.
    pub energies: Vec<f64>,
    /// Newton iterations per step (length N).
    pub newton_iters: Vec<usize>,
    pub mesh_hash: u64,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.phi.len() - 1
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.tau
    }

    pub fn t_end(&self) -> f64 {
        self.n_steps() as f64 * self.tau
    }

    pub fn phi_fn(&self, j: usize) -> FEFunction {
        FEFunction {
            space: self.space.clone(),
            coeffs: self.phi[j].clone(),
        }
    }

    pub fn mu_fn(&self, j: usize) -> FEFunction {
        FEFunction {
            space: self.space.clone(),
            coeffs: self.mu[j].clone(),
        }
    }

    /// Linear-in-time interpolant of phi at t^n + theta * tau.
    pub fn phi_at(&self, n: usize, theta: f64) -> FEFunction {
        let a = &self.phi[n];
        let b = &self.phi[n + 1];
        let coeffs = a
            .iter()
            .zip(b)
            .map(|(&u, &v)| (1.0 - theta) * u + theta * v)
            .collect();
        FEFunction {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Largest sampled sup norm of phi along the trajectory (overshoot
    /// monitor).
    pub fn max_phi_inf(&self) -> f64 {
        let mut m = 0.0f64;
        for c in &self.phi {
            for &v in c {
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Failure carrying the part of the trajectory computed so far.
pub struct SimulationFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl fmt::Debug for SimulationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SimulationFailure({}, {} nodes computed)",
            self.error,
            self.partial.phi.len()
        )
    }
}

/// mu_h^0 from the initialization identity:
/// <mu_h^0, xi> = <grad phi_h^0, grad xi> + <f'(phi_h^0), xi>/gamma.
pub fn initial_chemical_potential(
    space: &Arc<FESpace>,
    model: &Model,
    phi0: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let k = space.stiffness_matrix();
    let mut rhs = k.matvec_alloc(phi0);
    let df = QuadValues::from_coeffs(space, phi0, |u| model.potential.df(u));
    let load = assemble_load(space, &df);
    for (r, l) in rhs.iter_mut().zip(&load) {
        *r += l / gamma;
    }
    let mu0 = space.mass_lu().solve(&rhs);
    // verify against the mass system
    let mut res = space.mass_matrix().matvec_alloc(&mu0);
    let mut rmax = 0.0f64;
    let mut bmax = 0.0f64;
    for (ri, bi) in res.iter_mut().zip(&rhs) {
        rmax = rmax.max((*ri - bi).abs());
        bmax = bmax.max(bi.abs());
    }
    if rmax > 1e-10 * (1.0 + bmax) {
        return Err(Error::Numerical(format!(
            "initial chemical potential solve residual {rmax:.3e}"
        )));
    }
    Ok(mu0)
}

/// Result of one accepted time step.
pub struct StepResult {
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Interleaved block matrix builder for the Newton systems of one mesh.
struct BlockSystem {
    n: usize,
    block: CsrMatrix,
    /// scalar pattern value index -> the four block value indices
    /// (phi-phi, phi-mu, mu-phi, mu-mu)
    map: Vec<[usize; 4]>,
}

impl BlockSystem {
    fn new(space: &FESpace) -> BlockSystem {
        let pat = space.pattern();
        let n = space.n_dofs;
        let nnz = pat.cols.len();
        let mut row_ptr = vec![0usize; 2 * n + 1];
        let mut cols = vec![0usize; 4 * nnz];
        let mut map = vec![[0usize; 4]; nnz];
        for i in 0..n {
            let r = pat.row_ptr[i + 1] - pat.row_ptr[i];
            row_ptr[2 * i + 1] = 4 * pat.row_ptr[i] + 2 * r;
            row_ptr[2 * i + 2] = 4 * pat.row_ptr[i + 1];
            for (o, k) in (pat.row_ptr[i]..pat.row_ptr[i + 1]).enumerate() {
                let j = pat.cols[k];
                let base_top = 4 * pat.row_ptr[i] + 2 * o;
                let base_bot = 4 * pat.row_ptr[i] + 2 * r + 2 * o;
                cols[base_top] = 2 * j;
                cols[base_top + 1] = 2 * j + 1;
                cols[base_bot] = 2 * j;
                cols[base_bot + 1] = 2 * j + 1;
                map[k] = [base_top, base_top + 1, base_bot, base_bot + 1];
            }
        }
        let block = CsrMatrix {
            n_rows: 2 * n,
            n_cols: 2 * n,
            row_ptr,
            cols,
            vals: vec![0.0; 4 * nnz],
        };
        BlockSystem { n, block, map }
    }

    /// Fill [[M/tau, B], [-(K + Mf2/gamma), M]] from matrices sharing the
    /// scalar pattern.
    fn fill(
        &mut self,
        tau: f64,
        gamma: f64,
        mass: &CsrMatrix,
        stiffness: &CsrMatrix,
        b_mass: &CsrMatrix,
        f2_mass: &CsrMatrix,
    ) {
        for (k, idx) in self.map.iter().enumerate() {
            self.block.vals[idx[0]] = mass.vals[k] / tau;
            self.block.vals[idx[1]] = b_mass.vals[k];
            self.block.vals[idx[2]] = -(stiffness.vals[k] + f2_mass.vals[k] / gamma);
            self.block.vals[idx[3]] = mass.vals[k];
        }
    }

    fn n(&self) -> usize {
        self.n
    }
}

/// One implicit Euler step with explicit mobility, Newton-solved.
pub struct TimeStepper<'a> {
    pub space: &'a Arc<FESpace>,
    pub model: &'a Model,
    pub gamma: f64,
    pub tau: f64,
    block: BlockSystem,
}

impl<'a> TimeStepper<'a> {
    pub fn new(space: &'a Arc<FESpace>, model: &'a Model, gamma: f64, tau: f64) -> TimeStepper<'a> {
        TimeStepper {
            space,
            model,
            gamma,
            tau,
            block: BlockSystem::new(space),
        }
    }

    /// Advance (phi^n, mu-start) to (phi^{n+1}, mu^{n+1}). The Newton
    /// iteration differentiates f'(phi) exactly; the mobility block stays
    /// frozen at b(phi^n).
    pub fn advance(&mut self, step: usize, phi_n: &[f64]) -> Result<StepResult> {
        let space = self.space;
        let model = self.model;
        let (gamma, tau) = (self.gamma, self.tau);
        let n = self.block.n();
        let mass = space.mass_matrix();
        let stiffness = space.stiffness_matrix();

        let b_vals = QuadValues::from_coeffs(space, phi_n, |u| model.mobility.b(u));
        let b_mass = assemble_mass(space, Some(&b_vals));

        // initial guess: phi = phi^n, mu compatible with the second equation
        let mut phi = phi_n.to_vec();
        let mut mu = {
            let mut rhs = stiffness.matvec_alloc(&phi);
            let df = QuadValues::from_coeffs(space, &phi, |u| model.potential.df(u));
            let load = assemble_load(space, &df);
            for (r, l) in rhs.iter_mut().zip(&load) {
                *r += l / gamma;
            }
            space.mass_lu().solve(&rhs)
        };

        let m_phi_n = mass.matvec_alloc(phi_n);
        let mut history = Vec::new();
        for it in 0..=NEWTON_MAX_ITER {
            // residuals
            let m_phi = mass.matvec_alloc(&phi);
            let b_mu = b_mass.matvec_alloc(&mu);
            let m_mu = mass.matvec_alloc(&mu);
            let k_phi = stiffness.matvec_alloc(&phi);
            let df = QuadValues::from_coeffs(space, &phi, |u| model.potential.df(u));
            let load_df = assemble_load(space, &df);

            let mut res = vec![0.0; 2 * n];
            let mut rmax = 0.0f64;
            for i in 0..n {
                let r1 = (m_phi[i] - m_phi_n[i]) / tau + b_mu[i];
                let r2 = m_mu[i] - k_phi[i] - load_df[i] / gamma;
                res[2 * i] = r1;
                res[2 * i + 1] = r2;
                rmax = rmax.max(r1.abs()).max(r2.abs());
            }
            history.push(rmax);
            if rmax <= NEWTON_TOL {
                return Ok(StepResult {
                    phi,
                    mu,
                    iterations: it,
                    residual_history: history,
                });
            }
            if it == NEWTON_MAX_ITER {
                break;
            }

            // Jacobian solve
            let f2_vals = QuadValues::from_coeffs(space, &phi, |u| model.potential.d2f(u));
            let f2_mass = assemble_mass(space, Some(&f2_vals));
            self.block
                .fill(tau, gamma, mass, stiffness, &b_mass, &f2_mass);
            let lu = BandLu::factor(&self.block.block)?;
            for r in res.iter_mut() {
                *r = -*r;
            }
            lu.solve_in_place(&mut res);
            for i in 0..n {
                phi[i] += res[2 * i];
                mu[i] += res[2 * i + 1];
            }
        }
        Err(Error::StepFailure {
            step,
            residual: *history.last().unwrap(),
            iterations: NEWTON_MAX_ITER,
        })
    }
}

/// Discrete free energy E(phi) = int |grad phi|^2 / 2 + f(phi)/gamma.
pub fn discrete_energy(space: &FESpace, model: &Model, phi: &[f64], gamma: f64) -> f64 {
    let k = space.stiffness_matrix();
    let grad_sq = k.bilinear(phi, phi);
    let rule = &space.volume_rule;
    let mut fint = 0.0;
    for t in 0..space.n_triangles() {
        let jac = 2.0 * space.area[t];
        let dofs = &space.tri_dofs[t];
        for q in 0..rule.len() {
            let nb = &space.basis_at_quad[q];
            let mut u = 0.0;
            for kk in 0..6 {
                u += phi[dofs[kk]] * nb[kk];
            }
            fint += rule.weights[q] * jac * model.potential.f(u);
        }
    }
    0.5 * grad_sq + fint / gamma
}

/// Run the scheme from phi_h^0 = pi_h(phi0) for `n_steps` steps of size tau.
pub fn run_simulation(
    space: &Arc<FESpace>,
    model: &Model,
    gamma: f64,
    tau: f64,
    n_steps: usize,
    phi0: impl Fn(f64, f64) -> f64,
) -> std::result::Result<Trajectory, SimulationFailure> {
    let mesh_hash = space.mesh.content_hash();
    let empty = |error: Error| SimulationFailure {
        error,
        partial: Trajectory {
            space: space.clone(),
            gamma,
            tau,
            phi: Vec::new(),
            mu: Vec::new(),
            energies: Vec::new(),
            newton_iters: Vec::new(),
            mesh_hash,
        },
    };

    let proj = crate::fem::l2_project(space, phi0).map_err(&empty)?;
    let mu0 = initial_chemical_potential(space, model, &proj.coeffs, gamma).map_err(&empty)?;

    let mut traj = Trajectory {
        space: space.clone(),
        gamma,
        tau,
        phi: vec![proj.coeffs],
        mu: vec![mu0],
        energies: Vec::new(),
        newton_iters: Vec::new(),
        mesh_hash,
    };
    traj.energies
        .push(discrete_energy(space, model, &traj.phi[0], gamma));

    let mut stepper = TimeStepper::new(space, model, gamma, tau);
    for step in 0..n_steps {
        let phi_n = traj.phi.last().unwrap().clone();
        match stepper.advance(step, &phi_n) {
            Ok(r) => {
                traj.energies
                    .push(discrete_energy(space, model, &r.phi, gamma));
                traj.phi.push(r.phi);
                traj.mu.push(r.mu);
                traj.newton_iters.push(r.iterations);
            }
            Err(error) => {
                return Err(SimulationFailure {
                    error,
                    partial: traj,
                });
            }
        }
    }
    Ok(traj)
}

/// Versioned plain-text checkpoint of a trajectory.
pub fn save_trajectory(traj: &Trajectory, path: &std::path::Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str("acfem-trajectory v1\n");
    let _ = writeln!(out, "gamma = {:.17e}", traj.gamma);
    let _ = writeln!(out, "tau = {:.17e}", traj.tau);
    let _ = writeln!(out, "steps = {}", traj.n_steps());
    let _ = writeln!(out, "dofs = {}", traj.space.n_dofs);
    let _ = writeln!(out, "mesh_hash = {:016x}", traj.mesh_hash);
    for j in 0..traj.phi.len() {
        let _ = writeln!(out, "node {j}");
        let line = |c: &[f64]| {
            c.iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "phi {}", line(&traj.phi[j]));
        let _ = writeln!(out, "mu {}", line(&traj.mu[j]));
        let _ = writeln!(out, "energy {:.17e}", traj.energies[j]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_trajectory(path: &std::path::Path, space: &Arc<FESpace>) -> Result<Trajectory> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "acfem-trajectory v1" {
        return Err(Error::Format(format!(
            "unsupported trajectory header '{header}'"
        )));
    }
    let mut gamma = None;
    let mut tau = None;
    let mut steps = None;
    let mut dofs = None;
    let mut mesh_hash = None;
    for _ in 0..5 {
        let line = lines.next().ok_or_else(|| Error::Format("truncated trajectory header".into()))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line '{line}'")))?;
        let v = v.trim();
        match k.trim() {
            "gamma" => gamma = Some(v.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?),
            "tau" => tau = Some(v.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?),
            "steps" => steps = Some(v.parse::<usize>().map_err(|e| Error::Format(e.to_string()))?),
            "dofs" => dofs = Some(v.parse::<usize>().map_err(|e| Error::Format(e.to_string()))?),
            "mesh_hash" => {
                mesh_hash =
                    Some(u64::from_str_radix(v, 16).map_err(|e| Error::Format(e.to_string()))?)
            }
            other => return Err(Error::Format(format!("unknown header key '{other}'"))),
        }
    }
    let (gamma, tau, steps, dofs, mesh_hash) = (
        gamma.ok_or_else(|| Error::Format("missing gamma".into()))?,
        tau.ok_or_else(|| Error::Format("missing tau".into()))?,
        steps.ok_or_else(|| Error::Format("missing steps".into()))?,
        dofs.ok_or_else(|| Error::Format("missing dofs".into()))?,
        mesh_hash.ok_or_else(|| Error::Format("missing mesh_hash".into()))?,
    );
    if dofs != space.n_dofs {
        return Err(Error::Format(format!(
            "checkpoint has {dofs} dofs, space has {}",
            space.n_dofs
        )));
    }
    if mesh_hash != space.mesh.content_hash() {
        return Err(Error::Format("checkpoint mesh hash mismatch".into()));
    }
    let mut traj = Trajectory {
        space: space.clone(),
        gamma,
        tau,
        phi: Vec::with_capacity(steps + 1),
        mu: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        newton_iters: vec![0; steps],
        mesh_hash,
    };
    let parse_vec = |line: &str, tag: &str| -> Result<Vec<f64>> {
        let rest = line
            .strip_prefix(tag)
            .ok_or_else(|| Error::Format(format!("expected '{tag}' line")))?;
        let v: std::result::Result<Vec<f64>, _> =
            rest.split_whitespace().map(|t| t.parse::<f64>()).collect();
        let v = v.map_err(|e| Error::Format(e.to_string()))?;
        if v.len() != dofs {
            return Err(Error::Format(format!(
                "coefficient line has {} values, expected {dofs}",
                v.len()
            )));
        }
        Ok(v)
    };
    for j in 0..=steps {
        let node = lines
            .next()
            .ok_or_else(|| Error::Format("truncated node block".into()))?;
        if node != format!("node {j}") {
            return Err(Error::Format(format!("expected 'node {j}', got '{node}'")));
        }
        let phi = parse_vec(
            lines.next().ok_or_else(|| Error::Format("missing phi".into()))?,
            "phi ",
        )?;
        let mu = parse_vec(
            lines.next().ok_or_else(|| Error::Format("missing mu".into()))?,
            "mu ",
        )?;
        let eline = lines
            .next()
            .ok_or_else(|| Error::Format("missing energy".into()))?;
        let energy = eline
            .strip_prefix("energy ")
            .ok_or_else(|| Error::Format("expected energy line".into()))?
            .parse::<f64>()
            .map_err(|e| Error::Format(e.to_string()))?;
        traj.phi.push(phi);
        traj.mu.push(mu);
        traj.energies.push(energy);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::norms::l2_project;
    use crate::mesh::{build_structured_mesh, finish_mesh, Rectangle};
    use crate::model::{Mobility, Model, Potential};

    fn space(n: usize) -> Arc<FESpace> {
        let mesh = build_structured_mesh(Rectangle::symmetric_square(2.0), n).unwrap();
        FESpace::new(Arc::new(mesh))
    }

    #[test]
    fn initial_mu_of_steady_minimum_is_zero() {
        let s = space(3);
        let model = Model::experiment_default();
        let phi0 = vec![1.0; s.n_dofs];
        let mu0 = initial_chemical_potential(&s, &model, &phi0, 0.0625).unwrap();
        for v in mu0 {
            assert!(v.abs() < 1e-10);
        }
        // phi = 0 is a critical point of the quartic too
        let phi0 = vec![0.0; s.n_dofs];
        let mu0 = initial_chemical_potential(&s, &model, &phi0, 0.0625).unwrap();
        for v in mu0 {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn initial_mu_matches_dense_oracle() {
        let s = space(2);
        let model = Model::experiment_default();
        let gamma = 0.25;
        let phi0 = l2_project(&s, |x, _| x).unwrap();
        let mu0 = initial_chemical_potential(&s, &model, &phi0.coeffs, gamma).unwrap();

        let k = s.stiffness_matrix();
        let mut rhs = k.matvec_alloc(&phi0.coeffs);
        let df = QuadValues::from_coeffs(&s, &phi0.coeffs, |u| model.potential.df(u));
        let load = assemble_load(&s, &df);
        for (r, l) in rhs.iter_mut().zip(&load) {
            *r += l / gamma;
        }
        let dense = s.mass_matrix().to_dense();
        let want = crate::fem::linalg::testing::dense_solve(&dense, &rhs).unwrap();
        for (a, b) in mu0.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let s = space(3);
        let model = Model::experiment_default();
        let mut stepper = TimeStepper::new(&s, &model, 0.0625, 0.01);
        let phi_n = vec![1.0; s.n_dofs];
        let r = stepper.advance(0, &phi_n).unwrap();
        for v in &r.phi {
            assert!((v - 1.0).abs() < 1e-10);
        }
        for v in &r.mu {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn linear_potential_step_matches_linear_oracle() {
        // b = 1 and f'(s) = s make the scheme linear:
        // [M/tau, M; -(K + M/gamma), M] [phi; mu] = [M phi_n / tau; 0]
        let s = space(2);
        let model = Model::new(Potential::Quadratic, Mobility::Constant { value: 1.0 }, 1.5, 1.0, 1.0)
            .unwrap();
        let gamma = 0.5;
        let tau = 0.01;
        let phi_n = l2_project(&s, |x, y| 0.4 * x - 0.1 * y * y).unwrap().coeffs;

        let mut stepper = TimeStepper::new(&s, &model, gamma, tau);
        let r = stepper.advance(0, &phi_n).unwrap();

        // dense oracle on the block system
        let n = s.n_dofs;
        let m = s.mass_matrix().to_dense();
        let k = s.stiffness_matrix().to_dense();
        let mut a = vec![vec![0.0; 2 * n]; 2 * n];
        let mut rhs = vec![0.0; 2 * n];
        let m_phi_n = s.mass_matrix().matvec_alloc(&phi_n);
        for i in 0..n {
            for j in 0..n {
                a[i][j] = m[i][j] / tau;
                a[i][n + j] = m[i][j];
                a[n + i][j] = -(k[i][j] + m[i][j] / gamma);
                a[n + i][n + j] = m[i][j];
            }
            rhs[i] = m_phi_n[i] / tau;
        }
        let x = crate::fem::linalg::testing::dense_solve(&a, &rhs).unwrap();
        for i in 0..n {
            assert!((r.phi[i] - x[i]).abs() < 1e-10, "phi dof {i}");
            assert!((r.mu[i] - x[n + i]).abs() < 1e-10, "mu dof {i}");
        }
        // linear problem: Newton converges in one update
        assert!(r.iterations <= 1);
    }

    #[test]
    fn newton_contraction_is_superlinear() {
        let s = space(4);
        let model = Model::experiment_default();
        let gamma: f64 = 0.0625;
        let tau = 0.05; // deliberately large so the first residual is visible
        let phi_n = l2_project(&s, |x, y| {
            let r = x.hypot(y);
            -((0.4 - r).max(r - 1.0) / (2.0 * gamma).sqrt()).tanh()
        })
        .unwrap()
        .coeffs;
        let mut stepper = TimeStepper::new(&s, &model, gamma, tau);
        let r = stepper.advance(0, &phi_n).unwrap();
        let h = &r.residual_history;
        assert!(h.len() >= 3, "history {h:?}");
        // some step contracts at least quadratically up to a safety factor
        let quadraticish = h.windows(2).any(|w| w[1] <= 10.0 * w[0] * w[0] + 1e-14);
        assert!(quadraticish, "history {h:?}");
    }

    #[test]
    fn one_step_run_equals_advance() {
        let s = space(2);
        let model = Model::experiment_default();
        let gamma = 0.0625;
        let tau = 0.001;
        let init = |x: f64, y: f64| 0.3 * (x + y) * 0.25;
        let traj = run_simulation(&s, &model, gamma, tau, 1, init).unwrap();
        assert_eq!(traj.n_steps(), 1);

        let phi0 = l2_project(&s, init).unwrap().coeffs;
        let mut stepper = TimeStepper::new(&s, &model, gamma, tau);
        let r = stepper.advance(0, &phi0).unwrap();
        for (a, b) in traj.phi[1].iter().zip(&r.phi) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_decreases_for_small_steps() {
        let s = space(6);
        let model = Model::experiment_default();
        let gamma: f64 = 0.0625;
        let tau = 0.05 * gamma;
        let traj = run_simulation(&s, &model, gamma, tau, 10, |x, y| {
            let r = x.hypot(y);
            -((0.4 - r).max(r - 1.0) / (2.0 * gamma).sqrt()).tanh()
        })
        .unwrap();
        for w in traj.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "energy went up: {w:?}");
        }
    }

    #[test]
    fn discrete_energy_closed_forms() {
        let s = space(4);
        let model = Model::experiment_default();
        let gamma = 0.25;
        let one = vec![1.0; s.n_dofs];
        assert!(discrete_energy(&s, &model, &one, gamma).abs() < 1e-12);
        let zero = vec![0.0; s.n_dofs];
        let e0 = discrete_energy(&s, &model, &zero, gamma);
        assert!((e0 - 16.0 * 0.25 / gamma).abs() < 1e-11);
        // phi = x (exactly representable): E = 8 + (92/15)/gamma
        let vx = crate::fem::FEFunction::interpolate(&s, |x, _| x);
        let ex = discrete_energy(&s, &model, &vx.coeffs, gamma);
        assert!((ex - (8.0 + 92.0 / 15.0 / gamma)).abs() < 1e-10, "{ex}");
    }

    #[test]
    fn scheme_invariant_under_mesh_relabeling() {
        // permute triangle order of a tiny mesh; dof numbering is
        // coordinate-sorted, so fields must match to rounding
        let base = build_structured_mesh(Rectangle::symmetric_square(2.0), 2).unwrap();
        let mut tris = base.triangles.clone();
        tris.reverse();
        let permuted = finish_mesh(base.domain, base.subdivisions, base.vertices.clone(), tris).unwrap();

        let s1 = FESpace::new(Arc::new(base));
        let s2 = FESpace::new(Arc::new(permuted));
        let model = Model::experiment_default();
        let init = |x: f64, y: f64| 0.5 * (x * 0.7).sin() - 0.2 * y;
        let t1 = run_simulation(&s1, &model, 0.0625, 0.001, 2, init).unwrap();
        let t2 = run_simulation(&s2, &model, 0.0625, 0.001, 2, init).unwrap();
        for (a, b) in t1.phi[2].iter().zip(&t2.phi[2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_checkpoint_roundtrip() {
        let s = space(2);
        let model = Model::experiment_default();
        let traj = run_simulation(&s, &model, 0.0625, 0.001, 2, |x, y| 0.1 * x * y).unwrap();
        let dir = std::env::temp_dir().join("acfem_test_traj");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.txt");
        save_trajectory(&traj, &path).unwrap();
        let back = load_trajectory(&path, &s).unwrap();
        assert_eq!(back.n_steps(), 2);
        assert_eq!(back.gamma, traj.gamma);
        assert_eq!(back.tau, traj.tau);
        for j in 0..=2 {
            for (a, b) in traj.phi[j].iter().zip(&back.phi[j]) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in traj.mu[j].iter().zip(&back.mu[j]) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // wrong space is rejected
        let s3 = space(3);
        assert!(load_trajectory(&path, &s3).is_err());
    }
}
