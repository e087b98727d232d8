//! Single-cell nonlinear transmission problem: time stepping, the discrete
//! Steklov-Poincare reduction to an interface ODE, and runtime monitors.

mod energy;
mod steklov;

pub use energy::{energy_monitor, EnergyReport};
pub use steklov::{discrete_steklov, run_reduced, SteklovOperator};

use std::f64::consts::FRAC_PI_2;

use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_interface_mass, matvec, pcg, solve, stiffness_system, DofMap, InterfaceMass,
    MembraneCoupling,
};
use crate::membrane::{cutoff, sigma_m, MembraneModel, MembraneState, ModelParams};
use crate::mesh::InterfaceMesh;

/// Harmonic polynomial boundary data
/// `c + g.(x - o) + a ((x-o)_1^2 - (x-o)_2^2) + b (x-o)_1 (x-o)_2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HarmonicData {
    pub constant: f64,
    pub gradient: [f64; 2],
    pub saddle: f64,
    pub twist: f64,
    pub origin: [f64; 2],
}

impl HarmonicData {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Potential `E x` of a uniform applied field along the x axis.
    pub fn uniform_field(e: f64) -> Self {
        Self { gradient: [e, 0.0], ..Self::default() }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.gradient == [0.0, 0.0] && self.saddle == 0.0 && self.twist == 0.0
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let (x, y) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        self.constant + self.gradient[0] * x + self.gradient[1] * y + self.saddle * (x * x - y * y) + self.twist * x * y
    }

    pub fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        let (x, y) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [
            self.gradient[0] + 2.0 * self.saddle * x + self.twist * y,
            self.gradient[1] - 2.0 * self.saddle * y + self.twist * x,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct TransmissionProblem {
    pub mesh: InterfaceMesh,
    pub params: ModelParams,
    pub boundary: HarmonicData,
    pub model: MembraneModel,
    /// Time step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    /// Membrane thickness used in the transmission law (m).
    pub delta: f64,
    /// Jump `[u]` at `t = 0`, one value per interface pair; zero if absent.
    pub initial_jump: Option<Vec<f64>>,
    /// Keep `v` at every step in the trace.
    pub record_history: bool,
    /// Relative residual for the linear solves.
    pub solver_tol: f64,
}

impl TransmissionProblem {
    pub fn new(
        mesh: InterfaceMesh,
        params: ModelParams,
        boundary: HarmonicData,
        model: MembraneModel,
        dt: f64,
        t_end: f64,
    ) -> Self {
        let delta = params.delta;
        Self {
            mesh,
            params,
            boundary,
            model,
            dt,
            t_end,
            delta,
            initial_jump: None,
            record_history: false,
            solver_tol: 1e-13,
        }
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "dt = {}, t_end = {}, delta = {} must be positive",
                self.dt, self.t_end, self.delta
            )));
        }
        if let Some(s) = &self.initial_jump {
            if s.len() != self.mesh.num_pairs() {
                return Err(Error::InvalidInput(format!(
                    "initial jump has {} values for {} interface nodes",
                    s.len(),
                    self.mesh.num_pairs()
                )));
            }
        }
        Ok(())
    }
}

/// Time series and final profiles of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TmpTrace {
    /// Sample times (s), starting at 0.
    pub times: Vec<f64>,
    /// Transmembrane potential at the pole (V).
    pub v_pole: Vec<f64>,
    /// Capacitive membrane energy `c_m / (2 delta) |v|^2` integrated over the membrane.
    pub energy: Vec<f64>,
    /// `|v|` in L2 of the membrane.
    pub v_norm: Vec<f64>,
    /// `max |v|` over the membrane.
    pub v_max: Vec<f64>,
    /// `int sigma |grad u|^2` over the domain; empty for reduced runs.
    pub bulk_energy: Vec<f64>,
    /// Arc angle of every interface node about its cell center (rad).
    pub theta: Vec<f64>,
    pub v_final: Vec<f64>,
    pub n_final: Vec<f64>,
    /// `v` at every sample, when requested.
    pub v_history: Option<Vec<Vec<f64>>>,
    /// Times at which `max |v|` exceeded the cutoff level.
    pub cutoff_events: Vec<f64>,
    pub pole: usize,
    pub equator: usize,
    /// Membrane quadrature weights.
    pub mass: Vec<f64>,
    /// `|G|` in L2 of the membrane, the forcing of the interface ODE.
    pub forcing_norm: f64,
    pub delta: f64,
}

impl TmpTrace {
    /// `(theta, v, N)` along the membrane, sorted by angle.
    pub fn profile(&self) -> Vec<(f64, f64, f64)> {
        let mut rows: Vec<(f64, f64, f64)> = (0..self.theta.len())
            .map(|k| (self.theta[k], self.v_final[k], self.n_final[k]))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows
    }

    pub fn final_pole(&self) -> f64 {
        *self.v_pole.last().unwrap()
    }

    pub fn final_equator(&self) -> f64 {
        self.v_final[self.equator]
    }

    fn record(&mut self, t: f64, v: &[f64], c_m: f64, keep: bool) {
        let norm2: f64 = self.mass.iter().zip(v).map(|(m, v)| m * v * v).sum();
        self.times.push(t);
        self.v_pole.push(v[self.pole]);
        self.energy.push(0.5 * c_m / self.delta * norm2);
        self.v_norm.push(norm2.sqrt());
        self.v_max.push(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        if let Some(h) = self.v_history.as_mut().filter(|_| keep) {
            h.push(v.to_vec());
        }
    }
}

/// Interface node of maximal x, and the node of the same cell closest to
/// arc angle pi/2.
pub(crate) fn pole_and_equator(mesh: &InterfaceMesh) -> (usize, usize) {
    let m = mesh.num_pairs();
    let pole = (0..m)
        .max_by(|&a, &b| mesh.pair_position(a)[0].total_cmp(&mesh.pair_position(b)[0]).then(b.cmp(&a)))
        .unwrap_or(0);
    let cell = mesh.pair_cell.get(pole).copied().unwrap_or(0);
    let equator = (0..m)
        .filter(|&k| mesh.pair_cell[k] == cell)
        .min_by(|&a, &b| {
            (mesh.pair_angle(a) - FRAC_PI_2)
                .abs()
                .total_cmp(&(mesh.pair_angle(b) - FRAC_PI_2).abs())
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    (pole, equator)
}

/// Membrane coefficient `c_k` with the cutoff applied: the law is
/// `sigma_m(v_M, N) v_M`, written as `c_k v`.
pub(crate) fn membrane_coefficient(model: MembraneModel, v: f64, n: f64, p: &ModelParams) -> Result<f64> {
    let vm = cutoff(v, p.cutoff);
    let s = sigma_m(model, vm, n, p)?;
    Ok(if vm == v { s } else { s * vm / v })
}

/// Boundary values of `data` on the Dirichlet vertices, zero elsewhere.
pub(crate) fn dirichlet_offsets(mesh: &InterfaceMesh, dofs: &DofMap, data: &HarmonicData) -> Vec<f64> {
    mesh.vertices
        .iter()
        .enumerate()
        .map(|(v, p)| if dofs.vertex_dof[v].is_none() { data.eval(*p) } else { 0.0 })
        .collect()
}

/// Field with prescribed membrane jump (outer minus inner) and boundary data.
pub fn constrained_jump_field(
    mesh: &InterfaceMesh,
    sigma: [f64; 2],
    boundary: &HarmonicData,
    jump: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let dofs = DofMap::new(mesh, crate::fem::BoundaryMode::Dirichlet, true);
    let mut offsets = dirichlet_offsets(mesh, &dofs, boundary);
    for (pair, w) in mesh.interface_pairs.iter().zip(jump) {
        offsets[pair.outer] = *w;
    }
    let sys = stiffness_system(mesh, &dofs, sigma, Some(&offsets))?;
    let x = solve(&sys, tol)?;
    Ok(dofs.expand(&x, Some(&offsets)))
}

/// Time stepper for a [`TransmissionProblem`].
///
/// Each step freezes `sigma_m` at the current state, solves the linear
/// transmission problem with a backward-Euler membrane law, then advances
/// the pore state by one RK4 step with the new voltage.
pub struct CellSolver<'a> {
    problem: &'a TransmissionProblem,
    dofs: DofMap,
    offsets: Vec<f64>,
    matrix: CsrMatrix<f64>,
    coupling: MembraneCoupling,
    mass: InterfaceMass,
    /// Solution with zero jump; the unknown is the correction to it.
    x_ref: Vec<f64>,
    /// Right-hand side of the correction without membrane terms.
    rhs_ref: Vec<f64>,
    x: Vec<f64>,
    grads: Vec<([[f64; 2]; 3], f64)>,
    forcing_norm: f64,
    pub state: MembraneState,
    pub cutoff_events: Vec<f64>,
}

impl<'a> CellSolver<'a> {
    pub fn new(problem: &'a TransmissionProblem) -> Result<Self> {
        problem.validate()?;
        Self::new_unchecked(problem)
    }

    /// Skips parameter validation. Only meant for exercising runtime monitors
    /// with deliberately invalid parameters.
    pub fn new_unchecked(problem: &'a TransmissionProblem) -> Result<Self> {
        let mesh = &problem.mesh;
        let p = &problem.params;
        let sigma = [p.sigma_i, p.sigma_e];
        let dofs = DofMap::dirichlet(mesh);
        let offsets = dirichlet_offsets(mesh, &dofs, &problem.boundary);
        let base = stiffness_system(mesh, &dofs, sigma, Some(&offsets))?;
        let mass = assemble_interface_mass(mesh);
        let coupling = MembraneCoupling::new(&base, &dofs, &mass);

        let zero = vec![0.0; mesh.num_pairs()];
        let u_ref = constrained_jump_field(mesh, sigma, &problem.boundary, &zero, problem.solver_tol)?;
        let x_ref = dofs.restrict(&u_ref);
        let mut kx = vec![0.0; dofs.n_dofs];
        matvec(&base.matrix, &x_ref, &mut kx);
        let rhs_ref: Vec<f64> = base.rhs.iter().zip(&kx).map(|(b, k)| b - k).collect();
        // c_k is minus the residual at the outer copy: the flux the zero-jump
        // field pushes through the membrane.
        let forcing_norm = dofs
            .couples
            .iter()
            .zip(&mass.weights)
            .map(|(&(_, o), m)| rhs_ref[o] * rhs_ref[o] / m)
            .sum::<f64>()
            .sqrt();

        let mut state = MembraneState::rest(mesh.num_pairs(), problem.model, p);
        let x = match &problem.initial_jump {
            Some(s) => {
                state.v = s.clone();
                let u0 = constrained_jump_field(mesh, sigma, &problem.boundary, s, problem.solver_tol)?;
                dofs.restrict(&u0).iter().zip(&x_ref).map(|(a, b)| a - b).collect()
            }
            None => vec![0.0; dofs.n_dofs],
        };
        let grads = (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect::<Result<_>>()?;
        Ok(Self {
            problem,
            matrix: base.matrix.clone(),
            dofs,
            offsets,
            coupling,
            mass,
            x_ref,
            rhs_ref,
            x,
            grads,
            forcing_norm,
            state,
            cutoff_events: Vec::new(),
        })
    }

    pub fn mass(&self) -> &InterfaceMass {
        &self.mass
    }

    pub fn forcing_norm(&self) -> f64 {
        self.forcing_norm
    }

    /// Current potential at every vertex.
    pub fn field(&self) -> Vec<f64> {
        let x: Vec<f64> = self.x.iter().zip(&self.x_ref).map(|(a, b)| a + b).collect();
        self.dofs.expand(&x, Some(&self.offsets))
    }

    /// `int sigma |grad u|^2` for the current field.
    pub fn bulk_energy(&self) -> f64 {
        let u = self.field();
        let p = &self.problem.params;
        let mesh = &self.problem.mesh;
        mesh.triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let (g, area) = &self.grads[t];
                let mut d = [0.0; 2];
                for a in 0..3 {
                    d[0] += u[tri[a]] * g[a][0];
                    d[1] += u[tri[a]] * g[a][1];
                }
                let s = [p.sigma_i, p.sigma_e][mesh.tags[t].index()];
                s * area * (d[0] * d[0] + d[1] * d[1])
            })
            .sum()
    }

    pub fn step(&mut self) -> Result<()> {
        let pb = self.problem;
        let p = &pb.params;
        let cap = p.c_m / (pb.delta * pb.dt);
        let d = (0..self.state.v.len())
            .map(|k| Ok(cap + membrane_coefficient(pb.model, self.state.v[k], self.state.n[k], p)? / pb.delta))
            .collect::<Result<Vec<f64>>>()?;
        self.coupling.apply(&mut self.matrix, &d);
        let mut rhs = self.rhs_ref.clone();
        for ((&(i, o), m), v) in self.dofs.couples.iter().zip(&self.mass.weights).zip(&self.state.v) {
            let r = m * cap * v;
            rhs[o] += r;
            rhs[i] -= r;
        }
        let max_iter = 20 * self.dofs.n_dofs + 100;
        pcg(&self.matrix, &rhs, &mut self.x, pb.solver_tol, max_iter)?;
        for (k, &(i, o)) in self.dofs.couples.iter().enumerate() {
            self.state.v[k] = self.x[o] - self.x[i];
        }
        self.state.advance_pores(pb.model, pb.dt, p);
        self.state.t += pb.dt;
        if self.state.v.iter().any(|v| v.abs() > p.cutoff) {
            self.cutoff_events.push(self.state.t);
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<TmpTrace> {
        let pb = self.problem;
        let (pole, equator) = pole_and_equator(&pb.mesh);
        let mut trace = TmpTrace {
            times: Vec::new(),
            v_pole: Vec::new(),
            energy: Vec::new(),
            v_norm: Vec::new(),
            v_max: Vec::new(),
            bulk_energy: Vec::new(),
            theta: (0..pb.mesh.num_pairs()).map(|k| pb.mesh.pair_angle(k)).collect(),
            v_final: Vec::new(),
            n_final: Vec::new(),
            v_history: pb.record_history.then(Vec::new),
            cutoff_events: Vec::new(),
            pole,
            equator,
            mass: self.mass.weights.clone(),
            forcing_norm: self.forcing_norm,
            delta: pb.delta,
        };
        trace.record(0.0, &self.state.v, pb.params.c_m, true);
        trace.bulk_energy.push(self.bulk_energy());
        for k in 1..=pb.steps() {
            self.step()?;
            self.state.t = k as f64 * pb.dt;
            trace.record(self.state.t, &self.state.v, pb.params.c_m, true);
            trace.bulk_energy.push(self.bulk_energy());
        }
        trace.v_final = self.state.v.clone();
        trace.n_final = self.state.n.clone();
        trace.cutoff_events = std::mem::take(&mut self.cutoff_events);
        Ok(trace)
    }
}

/// Convenience wrapper: validates, builds a solver and runs it.
pub fn run(problem: &TransmissionProblem) -> Result<TmpTrace> {
    CellSolver::new(problem)?.run()
}
