//! Single-cell demonstration and the scale-convergence experiment.

use std::time::Instant;

use epihom_core::cell::{energy_monitor, run, HarmonicData, TmpTrace, TransmissionProblem};
use epihom_core::homogenization::{convergence_study, ConvergenceReport, ConvergenceSetup};
use epihom_core::mesh::build_unit_cell_mesh;

use crate::config::{Experiment, SweepSpec};
use crate::CliError;

/// One single-cell run per applied field strength.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCellResult {
    pub fields: Vec<f64>,
    pub traces: Vec<TmpTrace>,
    pub wall_time_s: Vec<f64>,
}

/// Runs the cell solver for every field strength in `spec.values`, with the
/// field along x and the potential centered on the cell. Each trace is
/// checked against the steady-state energy bound.
pub fn run_single_cell_demo(spec: &SweepSpec) -> Result<SingleCellResult, CliError> {
    if spec.experiment != Experiment::SingleCell {
        return Err(CliError::ConfigInvalid(format!(
            "demo-cell needs experiment = \"single_cell\", found {}",
            spec.experiment.name()
        )));
    }
    let mesh = build_unit_cell_mesh(&spec.geometry, spec.mesh_h)?;
    let mut out = SingleCellResult { fields: Vec::new(), traces: Vec::new(), wall_time_s: Vec::new() };
    for &e in &spec.values {
        let start = Instant::now();
        let boundary = HarmonicData { gradient: [e, 0.0], origin: spec.geometry.center(), ..HarmonicData::zero() };
        let problem = TransmissionProblem::new(
            mesh.clone(),
            spec.params,
            boundary,
            spec.model,
            spec.single_cell.dt_s,
            spec.single_cell.t_end_s,
        );
        let trace = run(&problem)?;
        energy_monitor(&trace, &spec.params)?;
        out.fields.push(e);
        out.traces.push(trace);
        out.wall_time_s.push(start.elapsed().as_secs_f64());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub report: ConvergenceReport,
    pub wall_time_s: f64,
}

/// Micro solutions for every `eps` in `spec.values` against the homogenized
/// solution on a square domain.
pub fn run_convergence(spec: &SweepSpec) -> Result<ConvergenceResult, CliError> {
    if spec.experiment != Experiment::Convergence {
        return Err(CliError::ConfigInvalid(format!("{} is not a convergence study", spec.experiment.name())));
    }
    let start = Instant::now();
    let unit = build_unit_cell_mesh(&spec.geometry, spec.mesh_h)?;
    let c = spec.convergence;
    let mid = 0.5 * c.domain_size;
    let setup = ConvergenceSetup {
        params: spec.params,
        model: spec.model,
        boundary: HarmonicData { gradient: c.gradient, saddle: c.saddle, origin: [mid, mid], ..HarmonicData::zero() },
        domain_size: c.domain_size,
        dt: c.dt,
        steps: c.steps,
        macro_divisions: c.macro_divisions,
        window: c.window,
    };
    let eps: Vec<f64> = spec.values.iter().rev().copied().collect();
    let report = convergence_study(&unit, &setup, &eps)?;
    Ok(ConvergenceResult { report, wall_time_s: start.elapsed().as_secs_f64() })
}
