use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{constrained_jump_field, membrane_coefficient, pole_and_equator, HarmonicData, TmpTrace};
use crate::error::{Error, Result};
use crate::fem::{assemble_interface_mass, assemble_stiffness, matvec};
use crate::membrane::{MembraneModel, MembraneState, ModelParams};
use crate::mesh::InterfaceMesh;

/// Dense realization of the interface operator.
///
/// `s` is the Schur complement of the bulk stiffness onto membrane jumps
/// (zero boundary data), `c` the flux of the zero-jump field with the given
/// boundary data. In terms of nodal jumps `w` the reduced membrane law reads
/// `M ((c_m/delta) dw/dt + (sigma_m/delta) w) + S w = -c`, i.e.
/// `Lambda = M^-1 S` and `G = -M^-1 c`.
#[derive(Debug, Clone)]
pub struct SteklovOperator {
    pub s: DMatrix<f64>,
    pub c: Vec<f64>,
    pub mass: Vec<f64>,
    pub theta: Vec<f64>,
    pub pole: usize,
    pub equator: usize,
}

impl SteklovOperator {
    pub fn size(&self) -> usize {
        self.c.len()
    }

    /// `Lambda w = M^-1 S w`.
    pub fn apply_lambda(&self, w: &[f64]) -> Vec<f64> {
        let sw = &self.s * DVector::from_column_slice(w);
        sw.iter().zip(&self.mass).map(|(a, m)| a / m).collect()
    }

    /// `<Lambda w, w>` in the membrane inner product, which equals `w^T S w`.
    pub fn form(&self, w: &[f64]) -> f64 {
        let x = DVector::from_column_slice(w);
        x.dot(&(&self.s * &x))
    }

    pub fn g(&self) -> Vec<f64> {
        self.c.iter().zip(&self.mass).map(|(c, m)| -c / m).collect()
    }

    /// `|G|` in L2 of the membrane.
    pub fn forcing_norm(&self) -> f64 {
        self.c.iter().zip(&self.mass).map(|(c, m)| c * c / m).sum::<f64>().sqrt()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.s.amax();
        if scale == 0.0 {
            0.0
        } else {
            (&self.s - self.s.transpose()).amax() / scale
        }
    }
}

/// Eliminates all bulk unknowns: one constrained-jump solve per interface
/// node plus one for the boundary data.
pub fn discrete_steklov(
    mesh: &InterfaceMesh,
    sigma_i: f64,
    sigma_e: f64,
    boundary: &HarmonicData,
    tol: f64,
) -> Result<SteklovOperator> {
    let m = mesh.num_pairs();
    if m == 0 {
        return Err(Error::SchurFailure("mesh has no interface".into()));
    }
    let sigma = [sigma_i, sigma_e];
    let full = assemble_stiffness(mesh, sigma_i, sigma_e)?;
    let flux = |u: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        matvec(&full.matrix, u, &mut r);
        mesh.interface_pairs.iter().map(|p| r[p.outer]).collect()
    };
    let zero = HarmonicData::zero();
    let columns = (0..m)
        .into_par_iter()
        .map(|l| {
            let mut w = vec![0.0; m];
            w[l] = 1.0;
            constrained_jump_field(mesh, sigma, &zero, &w, tol).map(|u| flux(&u))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::SchurFailure(e.to_string()))?;
    let s = DMatrix::from_fn(m, m, |k, l| columns[l][k]);
    let u_g = constrained_jump_field(mesh, sigma, boundary, &vec![0.0; m], tol)
        .map_err(|e| Error::SchurFailure(e.to_string()))?;
    let c = flux(&u_g);
    let (pole, equator) = pole_and_equator(mesh);
    Ok(SteklovOperator {
        s,
        c,
        mass: assemble_interface_mass(mesh).weights,
        theta: (0..m).map(|k| mesh.pair_angle(k)).collect(),
        pole,
        equator,
    })
}

/// Integrates the interface ODE with the scheme of the full solver: frozen
/// membrane conductivity, backward Euler in `v`, RK4 for the pore state.
pub fn run_reduced(
    op: &SteklovOperator,
    params: &ModelParams,
    model: MembraneModel,
    dt: f64,
    t_end: f64,
    delta: f64,
    initial_jump: Option<&[f64]>,
) -> Result<TmpTrace> {
    let m = op.size();
    let steps = ((t_end / dt).round() as usize).max(1);
    let cap = params.c_m / (delta * dt);
    let mut state = MembraneState::rest(m, model, params);
    if let Some(s) = initial_jump {
        state.v = s.to_vec();
    }
    let mut trace = TmpTrace {
        times: Vec::new(),
        v_pole: Vec::new(),
        energy: Vec::new(),
        v_norm: Vec::new(),
        v_max: Vec::new(),
        bulk_energy: Vec::new(),
        theta: op.theta.clone(),
        v_final: Vec::new(),
        n_final: Vec::new(),
        v_history: Some(Vec::new()),
        cutoff_events: Vec::new(),
        pole: op.pole,
        equator: op.equator,
        mass: op.mass.clone(),
        forcing_norm: op.forcing_norm(),
        delta,
    };
    trace.record(0.0, &state.v, params.c_m, true);
    for k in 1..=steps {
        let mut a = op.s.clone();
        let mut b = DVector::zeros(m);
        for i in 0..m {
            let ck = membrane_coefficient(model, state.v[i], state.n[i], params)?;
            a[(i, i)] += op.mass[i] * (cap + ck / delta);
            b[i] = op.mass[i] * cap * state.v[i] - op.c[i];
        }
        let w = a.lu().solve(&b).ok_or(Error::SingularMatrix)?;
        state.v.copy_from_slice(w.as_slice());
        state.advance_pores(model, dt, params);
        state.t = k as f64 * dt;
        if state.v.iter().any(|v| v.abs() > params.cutoff) {
            trace.cutoff_events.push(state.t);
        }
        trace.record(state.t, &state.v, params.c_m, true);
    }
    trace.v_final = state.v;
    trace.n_final = state.n;
    Ok(trace)
}
