use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::dofs::DofMap;
use crate::error::Result;
use crate::mesh::InterfaceMesh;

/// Constant 2x2 coefficient tensor, row-major.
pub type Tensor2 = [[f64; 2]; 2];

pub fn isotropic(s: f64) -> Tensor2 {
    [[s, 0.0], [0.0, s]]
}

/// Square sparse matrix with its right-hand side. Eliminated vertices and
/// their values are kept in `dirichlet` as `(vertex, value)`.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<(usize, f64)>,
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dumps the matrix as `row col value` lines.
    pub fn triplets_text(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.matrix.triplet_iter() {
            s.push_str(&format!("{i} {j} {v:.17e}\n"));
        }
        s
    }
}

pub fn matvec(a: &CsrMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in offsets[i]..offsets[i + 1] {
            s += vals[k] * x[cols[k]];
        }
        *yi = s;
    }
}

/// Position of entry `(i, j)` in the CSR value array.
pub fn csr_index(a: &CsrMatrix<f64>, i: usize, j: usize) -> Option<usize> {
    let (lo, hi) = (a.row_offsets()[i], a.row_offsets()[i + 1]);
    a.col_indices()[lo..hi].binary_search(&j).ok().map(|k| lo + k)
}

/// `max |A - A^T| / max |A|`.
pub fn symmetry_defect(a: &CsrMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, j, v) in a.triplet_iter() {
        scale = scale.max(v.abs());
        let t = csr_index(a, j, i).map_or(0.0, |k| a.values()[k]);
        worst = worst.max((v - t).abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Assembles `int grad(psi) . C_T grad(u)` over the mesh, `C_T = coeff(t)`.
///
/// The vertex value is `u_v = x[dof(v)] + offset_v` (just `offset_v` for
/// eliminated vertices); offsets move to the right-hand side. Interface
/// couples receive explicit zero entries so a membrane term can later be
/// added in place.
pub fn assemble_operator(
    mesh: &InterfaceMesh,
    dofs: &DofMap,
    coeff: &dyn Fn(usize) -> Tensor2,
    offsets: Option<&[f64]>,
) -> Result<SparseSystem> {
    let n = dofs.n_dofs;
    let mut coo = CooMatrix::new(n, n);
    let mut rhs = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = mesh.hat_gradients(t)?;
        let c = coeff(t);
        for a in 0..3 {
            let Some(da) = dofs.vertex_dof[tri[a]] else { continue };
            let cga = [
                c[0][0] * g[a][0] + c[1][0] * g[a][1],
                c[0][1] * g[a][0] + c[1][1] * g[a][1],
            ];
            for b in 0..3 {
                let kab = area * (cga[0] * g[b][0] + cga[1] * g[b][1]);
                match dofs.vertex_dof[tri[b]] {
                    Some(db) => coo.push(da, db, kab),
                    None => {}
                }
                if let Some(o) = offsets {
                    rhs[da] -= kab * o[tri[b]];
                }
            }
        }
    }
    for &(i, o) in &dofs.couples {
        if i != o {
            coo.push(i, i, 0.0);
            coo.push(o, o, 0.0);
            coo.push(i, o, 0.0);
            coo.push(o, i, 0.0);
        }
    }
    let dirichlet = match offsets {
        Some(o) => (0..mesh.vertices.len())
            .filter(|&v| dofs.vertex_dof[v].is_none())
            .map(|v| (v, o[v]))
            .collect(),
        None => Vec::new(),
    };
    Ok(SparseSystem { matrix: CsrMatrix::from(&coo), rhs, dirichlet })
}

/// Piecewise-constant isotropic conductivity, `sigma[0]` inner and `sigma[1]` outer.
pub fn stiffness_system(
    mesh: &InterfaceMesh,
    dofs: &DofMap,
    sigma: [f64; 2],
    offsets: Option<&[f64]>,
) -> Result<SparseSystem> {
    assemble_operator(mesh, dofs, &|t| isotropic(sigma[mesh.tags[t].index()]), offsets)
}

/// P1 stiffness with one unknown per vertex and no coupling across the membrane.
pub fn assemble_stiffness(mesh: &InterfaceMesh, sigma_inner: f64, sigma_outer: f64) -> Result<SparseSystem> {
    stiffness_system(mesh, &DofMap::free(mesh), [sigma_inner, sigma_outer], None)
}

/// `int q_T . grad(psi)` for a piecewise-constant vector field `q`.
pub fn gradient_load(mesh: &InterfaceMesh, dofs: &DofMap, q: &[[f64; 2]]) -> Result<Vec<f64>> {
    let mut rhs = vec![0.0; dofs.n_dofs];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = mesh.hat_gradients(t)?;
        for a in 0..3 {
            if let Some(d) = dofs.vertex_dof[tri[a]] {
                rhs[d] += area * (q[t][0] * g[a][0] + q[t][1] * g[a][1]);
            }
        }
    }
    Ok(rhs)
}

/// Lumped mass on the membrane, one weight per interface pair: half the
/// length of each adjacent interface edge.
#[derive(Debug, Clone)]
pub struct InterfaceMass {
    pub weights: Vec<f64>,
}

impl InterfaceMass {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `int_Gamma w z dS` for nodal jump values.
    pub fn inner(&self, w: &[f64], z: &[f64]) -> f64 {
        self.weights.iter().zip(w).zip(z).map(|((m, a), b)| m * a * b).sum()
    }

    pub fn norm(&self, w: &[f64]) -> f64 {
        self.inner(w, w).sqrt()
    }

    /// The diagonal mass in jump space as a sparse system (zero right-hand side).
    pub fn as_system(&self) -> SparseSystem {
        let n = self.weights.len();
        let mut coo = CooMatrix::new(n, n);
        for (k, &w) in self.weights.iter().enumerate() {
            coo.push(k, k, w);
        }
        SparseSystem { matrix: CsrMatrix::from(&coo), rhs: vec![0.0; n], dirichlet: Vec::new() }
    }
}

pub fn assemble_interface_mass(mesh: &InterfaceMesh) -> InterfaceMass {
    let mut weights = vec![0.0; mesh.interface_pairs.len()];
    for (e, &[i, j]) in mesh.interface_edges.iter().enumerate() {
        let half = 0.5 * mesh.edge_length(e);
        weights[i] += half;
        weights[j] += half;
    }
    InterfaceMass { weights }
}

/// In-place update of a matrix by the membrane term
/// `sum_k m_k d_k [psi]_k [u]_k`, where `[u]_k = u_out - u_in`.
#[derive(Debug, Clone)]
pub struct MembraneCoupling {
    base: Vec<f64>,
    slots: Vec<[usize; 4]>,
    masses: Vec<f64>,
}

impl MembraneCoupling {
    /// `system` must come from [`assemble_operator`] with an unmerged interface.
    pub fn new(system: &SparseSystem, dofs: &DofMap, mass: &InterfaceMass) -> Self {
        let a = &system.matrix;
        let slots = dofs
            .couples
            .iter()
            .map(|&(i, o)| {
                let at = |r, c| csr_index(a, r, c).expect("membrane couple missing from sparsity pattern");
                [at(i, i), at(o, o), at(i, o), at(o, i)]
            })
            .collect();
        Self { base: a.values().to_vec(), slots, masses: mass.weights.clone() }
    }

    /// Overwrites `matrix` values with base + membrane term for coefficients `d`.
    pub fn apply(&self, matrix: &mut CsrMatrix<f64>, d: &[f64]) {
        let vals = matrix.values_mut();
        vals.copy_from_slice(&self.base);
        for ((s, m), dk) in self.slots.iter().zip(&self.masses).zip(d) {
            let c = m * dk;
            vals[s[0]] += c;
            vals[s[1]] += c;
            vals[s[2]] -= c;
            vals[s[3]] -= c;
        }
    }
}
