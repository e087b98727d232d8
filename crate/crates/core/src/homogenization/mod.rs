//! Cell problems, effective parameters, the homogenized memory-kernel
//! equation and the periodic micro model it approximates.

mod cell_problems;
mod macro_solve;
mod micro;

pub use cell_problems::{
    compute_chi1, imperfect_interface_tensor, periodic_jump_field, solve_chi0, transform_t, Chi0, KernelGrid,
    TField,
};
pub use macro_solve::{interpolate_square, solve_macro, MacroSolution};
pub use micro::{convergence_study, solve_micro, ConvergenceReport, ConvergenceSetup, MicroConfig, MicroSolution};

use crate::error::Result;
use crate::fem::Tensor2;
use crate::geometry::CellGeometry;
use crate::membrane::ModelParams;
use crate::mesh::{build_unit_cell_mesh, InterfaceMesh};

/// Effective parameters of the homogenized equation
/// `div[(sigma0 I + A0) grad u0 + kappa int_0^t A1(t - s) grad u0(s) ds - F] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTensors {
    /// `sigma_i f + sigma_e (1 - f)` (S/m).
    pub sigma0: f64,
    /// Mesh-measured volume fraction of the cell.
    pub volume_fraction: f64,
    /// Instantaneous correction; symmetric and negative semidefinite.
    pub a0: Tensor2,
    /// Spacing of the kernel samples (s).
    pub kernel_dt: f64,
    /// `A1(k kernel_dt)`.
    pub a1: Vec<Tensor2>,
    /// Source term samples, present when an initial jump profile was given.
    pub f: Option<Vec<[f64; 2]>>,
    /// Scale of the memory term, `delta0 / c_m`.
    pub kappa: f64,
}

impl EffectiveTensors {
    /// `sigma0 I + A0`.
    pub fn instantaneous(&self) -> Tensor2 {
        let a = self.a0;
        [[self.sigma0 + a[0][0], a[0][1]], [a[1][0], self.sigma0 + a[1][1]]]
    }

    /// `A1` at lag `t`, linear between samples and zero past the last one.
    pub fn a1_at(&self, t: f64) -> Tensor2 {
        sample(&self.a1, self.kernel_dt, t).unwrap_or([[0.0; 2]; 2])
    }

    pub fn f_at(&self, t: f64) -> [f64; 2] {
        let Some(f) = &self.f else { return [0.0; 2] };
        let as_t: Vec<Tensor2> = f.iter().map(|v| [*v, [0.0; 2]]).collect();
        sample(&as_t, self.kernel_dt, t).map_or([0.0; 2], |m| m[0])
    }

    /// `kappa int_0^inf A1`, by the trapezoid rule on the samples.
    pub fn kernel_integral(&self) -> Tensor2 {
        let mut out = [[0.0; 2]; 2];
        let n = self.a1.len();
        for (k, a) in self.a1.iter().enumerate() {
            let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 } * self.kernel_dt * self.kappa;
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += w * a[i][j];
                }
            }
        }
        out
    }
}

fn sample(series: &[Tensor2], dt: f64, t: f64) -> Option<Tensor2> {
    if series.is_empty() || t < 0.0 {
        return None;
    }
    let x = t / dt;
    let k = x.floor() as usize;
    if k + 1 >= series.len() {
        return (k + 1 == series.len() && (x - k as f64) < 1e-9).then(|| series[k]);
    }
    let w = x - k as f64;
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (1.0 - w) * series[k][i][j] + w * series[k + 1][i][j];
        }
    }
    Some(out)
}

/// Eigenvalues `(l1, l2)` with `l1 >= l2` of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &Tensor2) -> (f64, f64) {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mid = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    (mid + rad, mid - rad)
}

/// `(1/|Y|) sum_edges l_e n_j (q(a) + q(b)) / 2` for nodal membrane values `q`.
fn membrane_moment(mesh: &InterfaceMesh, q: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (e, &[a, b]) in mesh.interface_edges.iter().enumerate() {
        let l = mesh.edge_length(e);
        let n = mesh.edge_normal(e);
        let avg = 0.5 * (q[a] + q[b]);
        out[0] += l * n[0] * avg;
        out[1] += l * n[1] * avg;
    }
    let area = mesh.total_area();
    [out[0] / area, out[1] / area]
}

/// `(1/|Y|) int_Gamma (sigma_e v+ - sigma_i v-) n` for a field `v`.
fn flux_moment(mesh: &InterfaceMesh, params: &ModelParams, v: &[f64]) -> [f64; 2] {
    let q: Vec<f64> = mesh
        .interface_pairs
        .iter()
        .map(|p| params.sigma_e * v[p.outer] - params.sigma_i * v[p.inner])
        .collect();
    membrane_moment(mesh, &q)
}

/// Evaluates `sigma0`, `A0`, `A1` on the kernel grid and, when a field
/// `T(S1)` is supplied, `F`. Membrane integrals use the edge trapezoid rule;
/// `[sigma] = sigma_e - sigma_i` goes with the normal pointing out of the cell.
pub fn effective_tensors(
    mesh: &InterfaceMesh,
    chi0: &Chi0,
    chi1: &[TField; 2],
    params: &ModelParams,
    delta0: f64,
    t_s1: Option<&TField>,
) -> EffectiveTensors {
    let f = mesh.volume_fraction();
    let sigma0 = params.sigma_i * f + params.sigma_e * (1.0 - f);
    let jump = params.sigma_e - params.sigma_i;
    let mut a0 = [[0.0; 2]; 2];
    for h in 0..2 {
        let q: Vec<f64> = mesh.interface_pairs.iter().map(|p| jump * chi0.chi[h][p.inner]).collect();
        let m = membrane_moment(mesh, &q);
        a0[0][h] = m[0];
        a0[1][h] = m[1];
    }
    let samples = chi1[0].fields.len();
    let a1 = (0..samples)
        .map(|k| {
            let mut a = [[0.0; 2]; 2];
            for h in 0..2 {
                let m = flux_moment(mesh, params, &chi1[h].fields[k]);
                a[0][h] = m[0];
                a[1][h] = m[1];
            }
            a
        })
        .collect();
    let kernel_dt = if chi1[0].times.len() > 1 { chi1[0].times[1] - chi1[0].times[0] } else { 0.0 };
    EffectiveTensors {
        sigma0,
        volume_fraction: f,
        a0,
        kernel_dt,
        a1,
        f: t_s1.map(|t| t.fields.iter().map(|v| flux_moment(mesh, params, v)).collect()),
        kappa: delta0 / params.c_m,
    }
}

/// Full pipeline on one unit cell: mesh, correctors and tensors.
pub fn homogenize(
    geometry: &CellGeometry,
    params: &ModelParams,
    h: f64,
    grid: &KernelGrid,
) -> Result<(InterfaceMesh, EffectiveTensors)> {
    let mesh = build_unit_cell_mesh(geometry, h)?;
    let tensors = homogenize_mesh(&mesh, params, grid, None)?;
    Ok((mesh, tensors))
}

/// Correctors and tensors on an existing unit-cell mesh. `s1` is an initial
/// jump profile as a function of the arc angle.
pub fn homogenize_mesh(
    mesh: &InterfaceMesh,
    params: &ModelParams,
    grid: &KernelGrid,
    s1: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<EffectiveTensors> {
    let delta0 = params.delta;
    let chi0 = solve_chi0(mesh, params.sigma_i, params.sigma_e)?;
    let chi1 = compute_chi1(mesh, &chi0, params, delta0, grid)?;
    let t_s1 = match s1 {
        Some(f) => {
            let s: Vec<f64> = (0..mesh.num_pairs()).map(|k| f(mesh.pair_angle(k))).collect();
            Some(transform_t(mesh, &s, params, delta0, grid)?)
        }
        None => None,
    };
    Ok(effective_tensors(mesh, &chi0, &chi1, params, delta0, t_s1.as_ref()))
}

#[cfg(test)]
mod tests;
