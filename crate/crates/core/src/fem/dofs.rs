use crate::mesh::InterfaceMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Every boundary vertex carries its own unknown.
    Free,
    /// Boundary vertices are eliminated (prescribed values).
    Dirichlet,
    /// Opposite sides of the domain share unknowns.
    Periodic,
}

/// Vertex to unknown map. `None` marks an eliminated (Dirichlet) vertex.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub vertex_dof: Vec<Option<usize>>,
    pub n_dofs: usize,
    /// `(dof of the inner copy, dof of the outer copy)` per interface pair.
    /// Both entries are equal when the interface is merged.
    pub couples: Vec<(usize, usize)>,
}

impl DofMap {
    pub fn new(mesh: &InterfaceMesh, mode: BoundaryMode, merge_interface: bool) -> Self {
        let nv = mesh.vertices.len();
        let mut rep: Vec<usize> = match mode {
            BoundaryMode::Periodic => mesh.periodic_representatives(),
            _ => (0..nv).collect(),
        };
        if merge_interface {
            for p in &mesh.interface_pairs {
                rep[p.outer] = rep[p.inner];
            }
        }
        let mut constrained = vec![false; nv];
        if mode == BoundaryMode::Dirichlet {
            for &v in &mesh.boundary_vertices {
                constrained[v] = true;
            }
        }
        let mut rep_dof = vec![None; nv];
        let mut vertex_dof = vec![None; nv];
        let mut n = 0;
        for v in 0..nv {
            if constrained[v] {
                continue;
            }
            let r = rep[v];
            let d = *rep_dof[r].get_or_insert_with(|| {
                n += 1;
                n - 1
            });
            vertex_dof[v] = Some(d);
        }
        let couples = mesh
            .interface_pairs
            .iter()
            .map(|p| {
                (
                    vertex_dof[p.inner].expect("interface vertices are never constrained"),
                    vertex_dof[p.outer].expect("interface vertices are never constrained"),
                )
            })
            .collect();
        Self { vertex_dof, n_dofs: n, couples }
    }

    pub fn free(mesh: &InterfaceMesh) -> Self {
        Self::new(mesh, BoundaryMode::Free, false)
    }

    pub fn dirichlet(mesh: &InterfaceMesh) -> Self {
        Self::new(mesh, BoundaryMode::Dirichlet, false)
    }

    pub fn periodic(mesh: &InterfaceMesh, merge_interface: bool) -> Self {
        Self::new(mesh, BoundaryMode::Periodic, merge_interface)
    }

    /// Removes the unknown of `vertex` (and of every vertex sharing it),
    /// fixing it to the offset value. Used to remove the constant nullspace
    /// of periodic problems.
    pub fn pinned(&self, vertex: usize) -> Self {
        let Some(gone) = self.vertex_dof[vertex] else { return self.clone() };
        let shift = |d: usize| if d > gone { d - 1 } else { d };
        let vertex_dof = self
            .vertex_dof
            .iter()
            .map(|d| d.filter(|&d| d != gone).map(shift))
            .collect();
        let couples = self.couples.iter().map(|&(i, o)| (shift(i), shift(o))).collect();
        Self { vertex_dof, n_dofs: self.n_dofs - 1, couples }
    }

    /// Expands a dof vector to vertex values, adding per-vertex offsets.
    pub fn expand(&self, x: &[f64], offsets: Option<&[f64]>) -> Vec<f64> {
        self.vertex_dof
            .iter()
            .enumerate()
            .map(|(v, d)| d.map_or(0.0, |d| x[d]) + offsets.map_or(0.0, |o| o[v]))
            .collect()
    }

    /// Restricts vertex values to dof values (last writer wins on shared dofs).
    pub fn restrict(&self, values: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs];
        for (v, d) in self.vertex_dof.iter().enumerate() {
            if let Some(d) = d {
                x[*d] = values[v];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellGeometry;
    use crate::mesh::build_unit_cell_mesh;

    #[test]
    fn every_vertex_gets_one_dof() {
        let mesh = build_unit_cell_mesh(&CellGeometry::circle(2e-4, 0.5e-4), 2e-4 / 16.0).unwrap();
        let free = DofMap::free(&mesh);
        assert_eq!(free.n_dofs, mesh.vertices.len());
        assert_eq!(free.couples.len(), mesh.interface_pairs.len());
        for (k, p) in mesh.interface_pairs.iter().enumerate() {
            assert_eq!(free.couples[k], (p.inner, p.outer));
        }
        let dir = DofMap::dirichlet(&mesh);
        assert_eq!(dir.n_dofs, mesh.vertices.len() - mesh.boundary_vertices.len());
        let per = DofMap::periodic(&mesh, true);
        let nb = mesh.boundary_divisions;
        assert_eq!(
            per.n_dofs,
            mesh.vertices.len() - mesh.interface_pairs.len() - (4 * nb - (2 * nb - 1))
        );
        assert!(per.couples.iter().all(|(a, b)| a == b));
    }
}
