use super::{homogenize_mesh, interpolate_square, solve_macro, EffectiveTensors, KernelGrid};
use crate::cell::{CellSolver, HarmonicData, TransmissionProblem};
use crate::error::{Error, Result};
use crate::membrane::{MembraneModel, ModelParams};
use crate::mesh::{build_square_mesh, tile_mesh, InterfaceMesh, Square};

/// Periodic micro problem on `[0, domain_size]^2` with cells of size
/// `eps L` and membrane thickness `eps delta0`.
#[derive(Debug, Clone)]
pub struct MicroConfig {
    pub eps: f64,
    pub domain_size: f64,
    pub params: ModelParams,
    pub model: MembraneModel,
    pub boundary: HarmonicData,
    pub dt: f64,
    pub steps: usize,
    /// Keep the potential at every step.
    pub keep_fields: bool,
}

#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub mesh: InterfaceMesh,
    pub times: Vec<f64>,
    /// `int_0^t int sigma |grad u|^2 + (1/eps) int_Gamma [u]^2(t)`.
    pub energy_lhs: Vec<f64>,
    /// `int_Gamma [u]^2(t)`.
    pub jump_l2: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

/// Runs the cell time stepper on the tiled mesh. `s1` is the initial jump
/// profile per cell as a function of arc angle; the jump starts at `eps s1`.
pub fn solve_micro(
    unit: &InterfaceMesh,
    cfg: &MicroConfig,
    s1: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<MicroSolution> {
    let mesh = tile_mesh(unit, cfg.eps, cfg.domain_size)?;
    let mut pb = TransmissionProblem::new(
        mesh,
        cfg.params,
        cfg.boundary,
        cfg.model,
        cfg.dt,
        cfg.dt * cfg.steps as f64,
    );
    pb.delta = cfg.eps * cfg.params.delta;
    if let Some(f) = s1 {
        pb.initial_jump = Some((0..pb.mesh.num_pairs()).map(|k| cfg.eps * f(pb.mesh.pair_angle(k))).collect());
    }
    let mut solver = CellSolver::new(&pb)?;
    let mass = solver.mass().clone();
    let mut out = MicroSolution {
        mesh: pb.mesh.clone(),
        times: Vec::with_capacity(cfg.steps + 1),
        energy_lhs: Vec::with_capacity(cfg.steps + 1),
        jump_l2: Vec::with_capacity(cfg.steps + 1),
        fields: Vec::new(),
    };
    let mut dissipated = 0.0;
    for n in 0..=cfg.steps {
        if n > 0 {
            solver.step()?;
            dissipated += cfg.dt * solver.bulk_energy();
        }
        let j = mass.inner(&solver.state.v, &solver.state.v);
        out.times.push(n as f64 * cfg.dt);
        out.jump_l2.push(j);
        out.energy_lhs.push(dissipated + j / cfg.eps);
        if cfg.keep_fields {
            out.fields.push(solver.field());
        }
    }
    Ok(out)
}

/// Inputs of [`convergence_study`].
#[derive(Debug, Clone)]
pub struct ConvergenceSetup {
    pub params: ModelParams,
    pub model: MembraneModel,
    pub boundary: HarmonicData,
    pub domain_size: f64,
    pub dt: f64,
    pub steps: usize,
    /// Structured macro mesh divisions per side.
    pub macro_divisions: usize,
    /// Error window `[a, b]^2` as fractions of the domain side.
    pub window: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    /// `sum_n dt int_window |u_eps - u0|` over the time samples after 0.
    pub errors: Vec<f64>,
    /// The same error divided by `sum_n dt int_window |u0|`.
    pub relative_errors: Vec<f64>,
    /// Largest left side of the micro energy estimate over time.
    pub energy_lhs: Vec<f64>,
    /// Largest `int_Gamma [u]^2 / eps` over time.
    pub scaled_jump: Vec<f64>,
    pub tensors: EffectiveTensors,
}

/// L1 distance between the micro solutions for each `eps` and the
/// homogenized solution, over an interior window and the whole time grid.
pub fn convergence_study(unit: &InterfaceMesh, setup: &ConvergenceSetup, eps_list: &[f64]) -> Result<ConvergenceReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("eps list must be non-empty and strictly decreasing".into()));
    }
    let grid = KernelGrid { dt: setup.dt, samples: setup.steps + 1, substeps: 1 };
    let tensors = homogenize_mesh(unit, &setup.params, &grid, None)?;
    let square = build_square_mesh(Square { origin: [0.0, 0.0], size: setup.domain_size }, setup.macro_divisions)?;
    let u0 = solve_macro(&square, &tensors, &setup.boundary, setup.dt, setup.steps)?;
    let (lo, hi) = (setup.window[0] * setup.domain_size, setup.window[1] * setup.domain_size);
    let mut errors = Vec::new();
    let mut relative = Vec::new();
    let mut energy = Vec::new();
    let mut scaled = Vec::new();
    for &eps in eps_list {
        let cfg = MicroConfig {
            eps,
            domain_size: setup.domain_size,
            params: setup.params,
            model: setup.model,
            boundary: setup.boundary,
            dt: setup.dt,
            steps: setup.steps,
            keep_fields: true,
        };
        let micro = solve_micro(unit, &cfg, None)?;
        energy.push(micro.energy_lhs.iter().cloned().fold(0.0, f64::max));
        scaled.push(micro.jump_l2.iter().cloned().fold(0.0, f64::max) / eps);
        let areas = micro.mesh.lumped_vertex_areas();
        let inside: Vec<usize> = (0..micro.mesh.vertices.len())
            .filter(|&v| {
                let p = micro.mesh.vertices[v];
                (lo..=hi).contains(&p[0]) && (lo..=hi).contains(&p[1])
            })
            .collect();
        let macro_at: Vec<Vec<f64>> = u0
            .fields
            .iter()
            .map(|f| inside.iter().map(|&v| interpolate_square(&square, f, micro.mesh.vertices[v])).collect())
            .collect();
        let (mut err, mut norm) = (0.0, 0.0);
        for n in 1..=setup.steps {
            for (k, &v) in inside.iter().enumerate() {
                err += setup.dt * areas[v] * (micro.fields[n][v] - macro_at[n][k]).abs();
                norm += setup.dt * areas[v] * macro_at[n][k].abs();
            }
        }
        errors.push(err);
        relative.push(if norm > 0.0 { err / norm } else { err });
    }
    Ok(ConvergenceReport { eps: eps_list.to_vec(), errors, relative_errors: relative, energy_lhs: energy, scaled_jump: scaled, tensors })
}
