use crate::error::{Error, Result};
use crate::fem::{
    assemble_interface_mass, gradient_load, pcg, stiffness_system, BoundaryMode, DofMap, MembraneCoupling,
};
use crate::membrane::{rk4_step, MembraneModel, ModelParams};
use crate::mesh::{InterfaceMesh, Subdomain};

const CELL_TOL: f64 = 1e-12;

fn pin_vertex(mesh: &InterfaceMesh) -> Result<usize> {
    mesh.boundary_vertices
        .first()
        .copied()
        .ok_or_else(|| Error::CellProblemSingular("mesh has no boundary vertex to pin".into()))
}

fn solve_pinned(
    mesh: &InterfaceMesh,
    dofs: &DofMap,
    sigma: [f64; 2],
    offsets: Option<&[f64]>,
    load: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut sys = stiffness_system(mesh, dofs, sigma, offsets)?;
    if let Some(l) = load {
        sys.rhs.iter_mut().zip(l).for_each(|(r, l)| *r += l);
    }
    let mut x = vec![0.0; dofs.n_dofs];
    pcg(&sys.matrix, &sys.rhs, &mut x, CELL_TOL, 20 * dofs.n_dofs + 100)
        .map_err(|e| Error::CellProblemSingular(e.to_string()))?;
    Ok(dofs.expand(&x, offsets))
}

/// Subtracts the area-weighted mean over the cell.
pub(crate) fn remove_mean(u: &mut [f64], areas: &[f64]) {
    let total: f64 = areas.iter().sum();
    let mean = u.iter().zip(areas).map(|(u, a)| u * a).sum::<f64>() / total;
    u.iter_mut().for_each(|v| *v -= mean);
}

/// Static correctors, one per coordinate direction.
#[derive(Debug, Clone)]
pub struct Chi0 {
    /// Vertex values of `chi0_h`, zero mean, equal on both membrane copies.
    pub chi: [Vec<f64>; 2],
    /// `sigma (grad chi0_h - e_h) . n` on the membrane, per interface node.
    pub flux: [Vec<f64>; 2],
}

/// Periodic correctors solving `div(sigma (grad chi - e_h)) = 0` with no jump
/// across the membrane.
///
/// The flux trace is the residual of the inner-subdomain form at each
/// membrane node divided by its quadrature weight, the discrete counterpart
/// of the normal flux.
pub fn solve_chi0(mesh: &InterfaceMesh, sigma_i: f64, sigma_e: f64) -> Result<Chi0> {
    let dofs = DofMap::new(mesh, BoundaryMode::Periodic, true).pinned(pin_vertex(mesh)?);
    let sigma = [sigma_i, sigma_e];
    let areas = mesh.lumped_vertex_areas();
    let mass = assemble_interface_mass(mesh);
    let grads = (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect::<Result<Vec<_>>>()?;
    let mut chi: [Vec<f64>; 2] = Default::default();
    let mut flux: [Vec<f64>; 2] = Default::default();
    for h in 0..2 {
        let q: Vec<[f64; 2]> = mesh
            .tags
            .iter()
            .map(|t| {
                let mut e = [0.0; 2];
                e[h] = sigma[t.index()];
                e
            })
            .collect();
        let load = gradient_load(mesh, &dofs, &q)?;
        let mut u = solve_pinned(mesh, &dofs, sigma, None, Some(&load))?;
        remove_mean(&mut u, &areas);
        let mut r = vec![0.0; mesh.vertices.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if mesh.tags[t] != Subdomain::Inner {
                continue;
            }
            let (g, area) = &grads[t];
            let mut d = [0.0; 2];
            for a in 0..3 {
                d[0] += u[tri[a]] * g[a][0];
                d[1] += u[tri[a]] * g[a][1];
            }
            d[h] -= 1.0;
            for a in 0..3 {
                r[tri[a]] += area * sigma_i * (d[0] * g[a][0] + d[1] * g[a][1]);
            }
        }
        flux[h] = mesh.interface_pairs.iter().zip(&mass.weights).map(|(p, w)| r[p.inner] / w).collect();
        chi[h] = u;
    }
    Ok(Chi0 { chi, flux })
}

/// Uniform time grid for kernel sampling, with backward-Euler substeps
/// between samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid {
    pub dt: f64,
    pub samples: usize,
    pub substeps: usize,
}

impl KernelGrid {
    /// 64 samples over five relaxation times `c_m / sigma_m(0)` of the
    /// linearized membrane.
    pub fn default_for(params: &ModelParams) -> Self {
        let tau = params.c_m / params.sigma_m_rest();
        Self { dt: 5.0 * tau / 63.0, samples: 64, substeps: 8 }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|k| k as f64 * self.dt).collect()
    }

    pub fn end(&self) -> f64 {
        (self.samples.saturating_sub(1)) as f64 * self.dt
    }
}

/// Time-sampled periodic field.
#[derive(Debug, Clone, PartialEq)]
pub struct TField {
    pub times: Vec<f64>,
    /// Vertex values at each sample, zero mean.
    pub fields: Vec<Vec<f64>>,
    /// `int_Gamma [v]^2` at each sample.
    pub jump_l2: Vec<f64>,
    /// Largest relative change of `sigma_m(0, t)` seen while stepping.
    pub sigma_m_drift: f64,
}

impl TField {
    /// Membrane jump (outer minus inner) at sample `k`.
    pub fn jump(&self, mesh: &InterfaceMesh, k: usize) -> Vec<f64> {
        mesh.interface_pairs.iter().map(|p| self.fields[k][p.outer] - self.fields[k][p.inner]).collect()
    }
}

/// Periodic field with prescribed membrane jump, zero mean.
pub fn periodic_jump_field(mesh: &InterfaceMesh, sigma: [f64; 2], jump: &[f64]) -> Result<Vec<f64>> {
    let dofs = DofMap::new(mesh, BoundaryMode::Periodic, true).pinned(pin_vertex(mesh)?);
    let mut offsets = vec![0.0; mesh.vertices.len()];
    for (p, w) in mesh.interface_pairs.iter().zip(jump) {
        offsets[p.outer] = *w;
    }
    let mut u = solve_pinned(mesh, &dofs, sigma, Some(&offsets), None)?;
    remove_mean(&mut u, &mesh.lumped_vertex_areas());
    Ok(u)
}

/// The transform `T`: periodic transmission problem with the linearized
/// membrane law `(c_m/delta0) d[v]/dt + (sigma_m(0)/delta0)[v] = sigma dv/dn`
/// and initial jump `s`, sampled on `grid`.
pub fn transform_t(
    mesh: &InterfaceMesh,
    s: &[f64],
    params: &ModelParams,
    delta0: f64,
    grid: &KernelGrid,
) -> Result<TField> {
    if s.len() != mesh.num_pairs() {
        return Err(Error::InvalidInput(format!(
            "jump has {} values for {} interface nodes",
            s.len(),
            mesh.num_pairs()
        )));
    }
    let sigma = [params.sigma_i, params.sigma_e];
    let areas = mesh.lumped_vertex_areas();
    let mass = assemble_interface_mass(mesh);
    let dofs = DofMap::new(mesh, BoundaryMode::Periodic, false).pinned(pin_vertex(mesh)?);
    let base = stiffness_system(mesh, &dofs, sigma, None)?;
    let coupling = MembraneCoupling::new(&base, &dofs, &mass);
    let h = grid.dt / grid.substeps.max(1) as f64;
    let cap = params.c_m / (delta0 * h);
    let sm = params.sigma_m_rest();
    let mut matrix = base.matrix.clone();
    coupling.apply(&mut matrix, &vec![cap + sm / delta0; mass.weights.len()]);

    let jump_l2 = |u: &[f64]| -> f64 {
        mesh.interface_pairs
            .iter()
            .zip(&mass.weights)
            .map(|(p, w)| w * (u[p.outer] - u[p.inner]).powi(2))
            .sum()
    };
    let u0 = periodic_jump_field(mesh, sigma, s)?;
    let mut x = dofs.restrict(&u0);
    let mut v: Vec<f64> = s.to_vec();
    let mut out = TField {
        times: grid.times(),
        jump_l2: vec![jump_l2(&u0)],
        fields: vec![u0],
        sigma_m_drift: 0.0,
    };
    // Pore density at rest, advanced alongside to confirm sigma_m(0, t) stays put.
    let mut n_rest = params.n0;
    let mut rhs = vec![0.0; dofs.n_dofs];
    for _ in 1..grid.samples {
        for _ in 0..grid.substeps.max(1) {
            rhs.iter_mut().for_each(|r| *r = 0.0);
            for ((&(i, o), w), vk) in dofs.couples.iter().zip(&mass.weights).zip(&v) {
                let r = w * cap * vk;
                rhs[o] += r;
                rhs[i] -= r;
            }
            pcg(&matrix, &rhs, &mut x, CELL_TOL, 20 * dofs.n_dofs + 100)?;
            for (k, &(i, o)) in dofs.couples.iter().enumerate() {
                v[k] = x[o] - x[i];
            }
            n_rest = rk4_step(MembraneModel::NeuKrassowska, 0.0, n_rest, h, params);
            let s_now = params.sigma_m0 + params.beta * n_rest;
            out.sigma_m_drift = out.sigma_m_drift.max(((s_now - sm) / sm).abs());
        }
        let mut u = dofs.expand(&x, None);
        remove_mean(&mut u, &areas);
        out.jump_l2.push(jump_l2(&u));
        out.fields.push(u);
    }
    Ok(out)
}

/// `chi1_h = T(flux trace of chi0_h)` for both directions.
pub fn compute_chi1(
    mesh: &InterfaceMesh,
    chi0: &Chi0,
    params: &ModelParams,
    delta0: f64,
    grid: &KernelGrid,
) -> Result<[TField; 2]> {
    let (a, b) = rayon::join(
        || transform_t(mesh, &chi0.flux[0], params, delta0, grid),
        || transform_t(mesh, &chi0.flux[1], params, delta0, grid),
    );
    Ok([a?, b?])
}

/// Effective tensor of the steady imperfect-interface cell problem
/// `int sigma grad chi . grad psi + int (sigma_m/delta0) [chi][psi] = int sigma e_h . grad psi`,
/// returned as the full `sigma_eff = <sigma (I - grad chi)>`.
pub fn imperfect_interface_tensor(
    mesh: &InterfaceMesh,
    params: &ModelParams,
    sigma_m: f64,
    delta0: f64,
) -> Result<[[f64; 2]; 2]> {
    let sigma = [params.sigma_i, params.sigma_e];
    let mass = assemble_interface_mass(mesh);
    let dofs = DofMap::new(mesh, BoundaryMode::Periodic, false).pinned(pin_vertex(mesh)?);
    let mut sys = stiffness_system(mesh, &dofs, sigma, None)?;
    let coupling = MembraneCoupling::new(&sys, &dofs, &mass);
    coupling.apply(&mut sys.matrix, &vec![sigma_m / delta0; mass.weights.len()]);
    let mut out = [[0.0; 2]; 2];
    let area = mesh.total_area();
    for h in 0..2 {
        let q: Vec<[f64; 2]> = mesh
            .tags
            .iter()
            .map(|t| {
                let mut e = [0.0; 2];
                e[h] = sigma[t.index()];
                e
            })
            .collect();
        let load = gradient_load(mesh, &dofs, &q)?;
        let mut x = vec![0.0; dofs.n_dofs];
        pcg(&sys.matrix, &load, &mut x, CELL_TOL, 20 * dofs.n_dofs + 100)?;
        let u = dofs.expand(&x, None);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let (g, a) = mesh.hat_gradients(t)?;
            let s = sigma[mesh.tags[t].index()];
            let mut d = [0.0; 2];
            for k in 0..3 {
                d[0] += u[tri[k]] * g[k][0];
                d[1] += u[tri[k]] * g[k][1];
            }
            for j in 0..2 {
                let e = if j == h { 1.0 } else { 0.0 };
                out[j][h] += s * a * (e - d[j]) / area;
            }
        }
    }
    Ok(out)
}
