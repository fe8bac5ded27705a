//! Hierarchical meshes over dyadically nested tensor grids and the
//! (truncated) hierarchical B-spline basis built on them.

mod mesh;
mod space;

pub use mesh::{Cell, CellState, HierarchicalMesh};
pub use space::{support_cells, ActiveFunction, CellBasis, FieldPoint, HierarchicalSpace, LocalBasis};

/// Build the hierarchical space of a mesh; `truncated` selects THB over HB.
pub fn build_space(mesh: HierarchicalMesh, truncated: bool) -> crate::Result<HierarchicalSpace> {
    HierarchicalSpace::new(mesh, truncated)
}
