use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical and model parameters. Defaults are the Table 1 values of the
/// reference cell; `q`, `sigma_m0`, `cutoff`, the static-law constants and the
/// relaxation-law constants are not sourced from that table and are
/// configurable placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Intracellular conductivity (S/m).
    pub sigma_i: f64,
    /// Extracellular conductivity (S/m).
    pub sigma_e: f64,
    /// Unit-cell side length (m).
    pub cell_size: f64,
    /// Cell radius (m).
    pub radius: f64,
    /// Membrane thickness (m).
    pub delta: f64,
    /// Pore radius, in the units of the reference table.
    pub r_p: f64,
    /// Pore conductivity, in the units of the reference table.
    pub sigma_p: f64,
    /// Characteristic electroporation voltage (V).
    pub v_ep: f64,
    /// Pore creation rate coefficient (1/(m^2 s)).
    pub alpha: f64,
    /// Equilibrium pore density (1/m^2).
    pub n0: f64,
    /// Membrane capacitance (F/m^2).
    pub c_m: f64,
    /// Pore-creation exponent (dimensionless), must exceed 1.
    pub q: f64,
    /// Baseline membrane conductivity (S/m).
    pub sigma_m0: f64,
    /// Conductance per pore (S m); `beta_formula` gives the default.
    pub beta: f64,
    /// Voltage cutoff level `M` (V).
    pub cutoff: f64,
    /// Rest potential (V).
    pub u_ref: f64,
    /// Static law amplitude `K` (S/m).
    pub k_static: f64,
    /// Static law exponent (1/V).
    pub beta_exp: f64,
    /// Relaxation law: opening time (s).
    pub tau_ep: f64,
    /// Relaxation law: resealing time (s).
    pub tau_res: f64,
    /// Relaxation law: switch steepness (1/V).
    pub k_ep: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let mut p = Self {
            sigma_i: 0.455,
            sigma_e: 5.0,
            cell_size: 2e-4,
            radius: 0.5e-4,
            delta: 5e-9,
            r_p: 0.76,
            sigma_p: 0.0746,
            v_ep: 0.258,
            alpha: 1e9,
            n0: 1.5e9,
            c_m: 9.5e-12,
            q: 2.46,
            sigma_m0: 1.9,
            beta: 0.0,
            cutoff: 1.5,
            u_ref: 0.0,
            k_static: 0.1,
            beta_exp: 10.0,
            tau_ep: 1e-6,
            tau_res: 60.0,
            k_ep: 40.0,
        };
        p.beta = beta_formula(&p);
        p
    }
}

/// Conductance per pore: `2 pi r_p^2 sigma_p delta / (pi r_p + 2 delta)`.
pub fn beta_formula(p: &ModelParams) -> f64 {
    use std::f64::consts::PI;
    2.0 * PI * p.r_p * p.r_p * p.sigma_p * p.delta / (PI * p.r_p + 2.0 * p.delta)
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_i", self.sigma_i),
            ("sigma_e", self.sigma_e),
            ("cell_size", self.cell_size),
            ("radius", self.radius),
            ("delta", self.delta),
            ("r_p", self.r_p),
            ("sigma_p", self.sigma_p),
            ("v_ep", self.v_ep),
            ("alpha", self.alpha),
            ("n0", self.n0),
            ("c_m", self.c_m),
            ("q", self.q),
            ("sigma_m0", self.sigma_m0),
            ("beta", self.beta),
            ("cutoff", self.cutoff),
            ("beta_exp", self.beta_exp),
            ("tau_ep", self.tau_ep),
            ("tau_res", self.tau_res),
            ("k_ep", self.k_ep),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.k_static >= 0.0) {
            return Err(Error::InvalidParams(format!("k_static = {} must be non-negative", self.k_static)));
        }
        if !self.u_ref.is_finite() {
            return Err(Error::InvalidParams("u_ref must be finite".into()));
        }
        if self.q <= 1.0 {
            return Err(Error::InvalidParams(format!("q = {} must exceed 1", self.q)));
        }
        if self.cutoff <= self.v_ep {
            return Err(Error::InvalidParams(format!(
                "cutoff {} must exceed v_ep {}",
                self.cutoff, self.v_ep
            )));
        }
        Ok(())
    }

    /// Membrane conductivity of the linearized law at rest, `sigma_m0 + beta n0`.
    pub fn sigma_m_rest(&self) -> f64 {
        self.sigma_m0 + self.beta * self.n0
    }
}
