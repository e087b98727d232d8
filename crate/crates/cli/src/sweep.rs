//! Sensitivity sweeps over the effective tensors.

use std::time::Instant;

use epihom_core::fem::Tensor2;
use epihom_core::geometry::CellGeometry;
use epihom_core::homogenization::homogenize;
use epihom_core::membrane::ModelParams;
use rayon::prelude::*;

use crate::config::{Experiment, SweepSpec};
use crate::eig::{eig2x2_symmetric, magnitude_ratio};
use crate::CliError;

/// `|A0| < DEGENERATE_TOL sigma0` marks the anisotropy ratio as undefined.
pub const DEGENERATE_TOL: f64 = 1e-10;

/// Tensors of one successful point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTensors {
    /// Mesh-measured volume fraction.
    pub volume_fraction: f64,
    pub sigma0: f64,
    pub a0: Tensor2,
    /// `l1 >= l2` of `A0`.
    pub a0_eig: [f64; 2],
    /// `max |l| / min |l|` of `A0`; 1 when degenerate.
    pub a0_ratio: f64,
    pub a0_degenerate: bool,
    pub a1_0: Tensor2,
    pub a1_eig: [f64; 2],
    pub a1_ratio: f64,
    pub a1_degenerate: bool,
    pub kernel_dt: f64,
    pub kernel: Vec<Tensor2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub value: f64,
    /// Error text when the point failed.
    pub outcome: Result<PointTensors, String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: Experiment,
    pub records: Vec<PointRecord>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Geometry and parameters of one sweep point.
pub fn point_setup(spec: &SweepSpec, value: f64) -> (CellGeometry, ModelParams) {
    let mut params = spec.params;
    let base = spec.geometry;
    let geom = match spec.experiment {
        Experiment::ConductivityRatio => {
            params.sigma_i = value * params.sigma_e;
            base
        }
        Experiment::Excentricity => {
            let mut g = CellGeometry::ellipse_with_fraction(base.cell_size, value, base.volume_fraction(), base.lattice_angle);
            g.center_offset = base.center_offset;
            g
        }
        Experiment::VolumeFraction => base.scaled_to_fraction(value),
        Experiment::LatticeAngle => CellGeometry { lattice_angle: value, ..base },
        Experiment::SingleCell | Experiment::Convergence => base,
    };
    (geom, params)
}

fn anisotropy(m: &Tensor2, scale: f64) -> ([f64; 2], f64, bool) {
    let e = eig2x2_symmetric(m);
    let norm = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    match magnitude_ratio(e.values) {
        Some(r) if norm >= DEGENERATE_TOL * scale => (e.values, r, false),
        _ => (e.values, 1.0, true),
    }
}

/// Homogenizes one point.
pub fn evaluate_point(spec: &SweepSpec, value: f64) -> Result<PointTensors, CliError> {
    let (geom, params) = point_setup(spec, value);
    geom.validate()?;
    let grid = spec.kernel_for(&params);
    let (_, t) = homogenize(&geom, &params, spec.mesh_h, &grid)?;
    let (a0_eig, a0_ratio, a0_degenerate) = anisotropy(&t.a0, t.sigma0);
    let a1_0 = t.a1[0];
    let a1_scale = a1_0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let (a1_eig, a1_ratio, a1_degenerate) = anisotropy(&a1_0, if a1_scale > 0.0 { a1_scale } else { 1.0 });
    Ok(PointTensors {
        volume_fraction: t.volume_fraction,
        sigma0: t.sigma0,
        a0: t.a0,
        a0_eig,
        a0_ratio,
        a0_degenerate,
        a1_0,
        a1_eig,
        a1_ratio,
        a1_degenerate,
        kernel_dt: t.kernel_dt,
        kernel: t.a1,
    })
}

/// Worker count from `EPIHOM_WORKERS`; `None` lets the pool decide.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("EPIHOM_WORKERS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::ConfigInvalid(format!("EPIHOM_WORKERS = {s:?} is not a count"))),
        },
        Err(_) => Ok(None),
    }
}

/// Evaluates every swept value on a worker pool; results keep input order.
/// A failing point is recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult, CliError> {
    if !spec.experiment.is_sweep() {
        return Err(CliError::ConfigInvalid(format!("{} is not a tensor sweep", spec.experiment.name())));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::ConfigInvalid(format!("worker pool: {e}")))?;
    let records = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&value| {
                let start = Instant::now();
                let outcome = evaluate_point(spec, value).map_err(|e| e.to_string());
                PointRecord { value, outcome, wall_time_s: start.elapsed().as_secs_f64() }
            })
            .collect()
    });
    Ok(SweepResult { experiment: spec.experiment, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn spec(text: &str) -> SweepSpec {
        parse_config_str(&format!(
            "output_dir = \"unused\"\n{text}\n[numerics]\nmesh_h_m = 1.25e-5\nkernel_samples = 8\nkernel_substeps = 2\n"
        ))
        .unwrap()
    }

    #[test]
    fn equal_conductivities_are_degenerate() {
        let s = spec("experiment = \"conductivity_ratio\"\nvalues = [0.091, 1.0, 10.0]");
        let r = run_sweep(&s, Some(2)).unwrap();
        assert_eq!(r.records.len(), 3);
        let mid = r.records[1].outcome.as_ref().unwrap();
        assert!(mid.a0_degenerate && mid.a0_ratio == 1.0);
        for k in [0, 2] {
            let p = r.records[k].outcome.as_ref().unwrap();
            assert!(!p.a0_degenerate && p.a0_ratio.is_finite());
            assert!(p.a0_eig[0] >= p.a0_eig[1] && p.a0_eig[0] <= 0.0);
        }
    }

    #[test]
    fn failed_points_do_not_stop_the_sweep() {
        // a/b = 6 at this fraction reaches the unit-cell boundary
        let s = spec("experiment = \"excentricity\"\nvalues = [1.0, 6.0]");
        let r = run_sweep(&s, Some(1)).unwrap();
        assert!(r.records[0].outcome.is_ok());
        let e = r.records[1].outcome.as_ref().unwrap_err();
        assert!(e.starts_with("cell-intersects-boundary"), "{e}");
        assert_eq!(r.failures(), 1);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let s = spec("experiment = \"volume_fraction\"\nvalues = [0.1, 0.2, 0.3]");
        let a = run_sweep(&s, Some(1)).unwrap();
        let b = run_sweep(&s, Some(3)).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.outcome, y.outcome);
        }
    }

    #[test]
    fn single_cell_is_not_a_sweep() {
        let s = spec("experiment = \"single_cell\"");
        assert_eq!(run_sweep(&s, None).unwrap_err().exit_code(), 2);
    }
}
