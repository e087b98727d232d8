use super::TmpTrace;
use crate::error::{Error, Result};
use crate::membrane::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Admissible `|v|` in L2 of the membrane.
    pub bound: f64,
    /// Largest observed `|v|`.
    pub max_norm: f64,
    pub max_time: f64,
}

/// Checks `|v(t)| <= max(|v(0)|, 1.1 |G| delta / sigma_m0)` on every sample.
///
/// Testing the equation against `v` with `sigma_m >= sigma_m0` bounds the
/// steady state by `|G| delta / sigma_m0`; backward Euler keeps each step
/// below the larger of the previous norm and that level.
pub fn energy_monitor(trace: &TmpTrace, params: &ModelParams) -> Result<EnergyReport> {
    if trace.v_norm.is_empty() {
        return Err(Error::InvalidInput("empty trace".into()));
    }
    let steady = trace.forcing_norm * trace.delta / params.sigma_m0.abs();
    let bound = trace.v_norm[0].max(1.1 * steady);
    let mut report = EnergyReport { bound, max_norm: 0.0, max_time: 0.0 };
    for (t, n) in trace.times.iter().zip(&trace.v_norm) {
        if !(n.is_finite() && *n <= bound) {
            return Err(Error::BlowUpDetected { time: *t, norm: *n, bound });
        }
        if *n > report.max_norm {
            report.max_norm = *n;
            report.max_time = *t;
        }
    }
    Ok(report)
}
