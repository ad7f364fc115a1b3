//! Multipatch topology, dof layouts and patch-local assembly of the cG and
//! SIP-dG systems.

mod dofs;
mod jump;
mod patch;
mod topology;

pub use dofs::{Discretization, DofClass, ExtraBlock, Formulation, PatchLayout};
pub use jump::{build_jump_operators, scaling_weights, JumpOperators, JumpRow, LocalJump, Scaling};
pub use patch::{
    assemble_all, assemble_global, assemble_patch, dg_energy, dg_norm_squared, dirichlet_lifting, local_vectors, AssemblyOptions, NeighborTrace, PatchAssembly,
    PatchSystem, Problem,
};
pub(crate) use patch::{element_rule, for_each_side_point};
pub use topology::{
    box_grid, build_topology, check_matching, BoundaryKind, GeometryFile, Interface, MultiPatchTopology, Orientation, PatchEntry, SideRole, MATCH_TOL,
};
