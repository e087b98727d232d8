use super::{sym_eigenvalues, EffectiveTensors};
use crate::cell::HarmonicData;
use crate::error::{Error, Result};
use crate::fem::{assemble_operator, gradient_load, pcg, BoundaryMode, DofMap, Tensor2};
use crate::mesh::InterfaceMesh;

#[derive(Debug, Clone, PartialEq)]
pub struct MacroSolution {
    pub times: Vec<f64>,
    /// Vertex values at each time.
    pub fields: Vec<Vec<f64>>,
}

fn sym(m: Tensor2) -> Tensor2 {
    let b = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], b], [b, m[1][1]]]
}

fn axpy(out: &mut Tensor2, w: f64, m: &Tensor2) {
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += w * m[i][j];
        }
    }
}

fn apply(m: &Tensor2, g: [f64; 2]) -> [f64; 2] {
    [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
}

/// Time-marches the homogenized equation with Dirichlet data on the outer
/// boundary of `mesh` (membrane copies, if any, are merged).
///
/// The memory integral uses the trapezoid rule over the full history; its
/// current-time weight `dt/2 A1(0)` is kept in the operator. Only symmetric
/// parts enter the operator: for constant coefficients the antisymmetric part
/// integrates to a boundary term that vanishes against the test functions.
pub fn solve_macro(
    mesh: &InterfaceMesh,
    tensors: &EffectiveTensors,
    boundary: &HarmonicData,
    dt: f64,
    steps: usize,
) -> Result<MacroSolution> {
    let c0 = sym(tensors.instantaneous());
    let mut c1 = c0;
    axpy(&mut c1, 0.5 * dt * tensors.kappa, &sym(tensors.a1_at(0.0)));
    for c in [&c0, &c1] {
        let (_, lo) = sym_eigenvalues(c);
        if !(lo > 0.0) {
            return Err(Error::NoncoerciveEffectiveTensor(lo));
        }
    }
    let dofs = DofMap::new(mesh, BoundaryMode::Dirichlet, true);
    let offsets: Vec<f64> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(v, p)| if dofs.vertex_dof[v].is_none() { boundary.eval(*p) } else { 0.0 })
        .collect();
    let sys0 = assemble_operator(mesh, &dofs, &|_| c0, Some(&offsets))?;
    let sys1 = assemble_operator(mesh, &dofs, &|_| c1, Some(&offsets))?;
    let grads = (0..mesh.triangles.len()).map(|t| mesh.hat_gradients(t)).collect::<Result<Vec<_>>>()?;
    let gradient = |u: &[f64]| -> Vec<[f64; 2]> {
        mesh.triangles
            .iter()
            .zip(&grads)
            .map(|(tri, (g, _))| {
                let mut d = [0.0; 2];
                for a in 0..3 {
                    d[0] += u[tri[a]] * g[a][0];
                    d[1] += u[tri[a]] * g[a][1];
                }
                d
            })
            .collect()
    };
    let max_iter = 20 * dofs.n_dofs + 100;
    let mut x = vec![0.0; dofs.n_dofs];
    let mut history: Vec<Vec<[f64; 2]>> = Vec::with_capacity(steps + 1);
    let mut out = MacroSolution { times: Vec::with_capacity(steps + 1), fields: Vec::with_capacity(steps + 1) };
    for n in 0..=steps {
        let t = n as f64 * dt;
        let sys = if n == 0 { &sys0 } else { &sys1 };
        let mut rhs = sys.rhs.clone();
        if n > 0 || tensors.f.is_some() {
            // q = F(t_n) - kappa sum_j w_j A1(t_n - t_j) grad u_j over j < n
            let f = tensors.f_at(t);
            let mut q: Vec<[f64; 2]> = vec![f; mesh.triangles.len()];
            for (j, gj) in history.iter().enumerate() {
                let w = if j == 0 { 0.5 } else { 1.0 } * dt * tensors.kappa;
                let a = tensors.a1_at(t - j as f64 * dt);
                if a == [[0.0; 2]; 2] {
                    continue;
                }
                for (qt, g) in q.iter_mut().zip(gj) {
                    let ag = apply(&a, *g);
                    qt[0] -= w * ag[0];
                    qt[1] -= w * ag[1];
                }
            }
            let load = gradient_load(mesh, &dofs, &q)?;
            rhs.iter_mut().zip(&load).for_each(|(r, l)| *r += l);
        }
        pcg(&sys.matrix, &rhs, &mut x, 1e-12, max_iter)?;
        let u = dofs.expand(&x, Some(&offsets));
        history.push(gradient(&u));
        out.times.push(t);
        out.fields.push(u);
    }
    Ok(out)
}

/// Evaluates a field on the structured mesh of `build_square_mesh` at `p`.
pub fn interpolate_square(mesh: &InterfaceMesh, values: &[f64], p: [f64; 2]) -> f64 {
    let n = mesh.boundary_divisions;
    let hx = mesh.domain.size / n as f64;
    let sx = ((p[0] - mesh.domain.origin[0]) / hx).clamp(0.0, n as f64);
    let sy = ((p[1] - mesh.domain.origin[1]) / hx).clamp(0.0, n as f64);
    let i = (sx.floor() as usize).min(n - 1);
    let j = (sy.floor() as usize).min(n - 1);
    let (s, t) = (sx - i as f64, sy - j as f64);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let (u00, u10, u11, u01) = (values[id(i, j)], values[id(i + 1, j)], values[id(i + 1, j + 1)], values[id(i, j + 1)]);
    if s >= t {
        u00 + s * (u10 - u00) + t * (u11 - u10)
    } else {
        u00 + t * (u01 - u00) + s * (u11 - u01)
    }
}
