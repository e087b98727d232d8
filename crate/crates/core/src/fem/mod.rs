//! P1 finite elements on [`InterfaceMesh`](crate::mesh::InterfaceMesh):
//! degree-of-freedom maps, assembly and linear solvers.

mod assembly;
mod dofs;
mod solver;

pub use assembly::{
    assemble_interface_mass, assemble_operator, assemble_stiffness, csr_index, gradient_load,
    isotropic, matvec, stiffness_system, symmetry_defect, InterfaceMass, MembraneCoupling,
    SparseSystem, Tensor2,
};
pub use dofs::{BoundaryMode, DofMap};
pub use solver::{pcg, solve, solve_dense, SolveStats, DENSE_LIMIT};
