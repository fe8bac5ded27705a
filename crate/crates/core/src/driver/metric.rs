use crate::error::{Error, Result};
use crate::hierarchy::{Cell, HierarchicalSpace};
use crate::quadrature::QuadratureRule;

fn covering(space: &HierarchicalSpace, c: Cell) -> Option<usize> {
    (0..=c.level).rev().find_map(|l| space.cell_index(c.ancestor(l)))
}

/// Cells of the common refinement of two meshes over the same hierarchy.
fn overlay(a: &HierarchicalSpace, b: &HierarchicalSpace) -> Vec<Cell> {
    let mut out = Vec::new();
    let mut stack: Vec<Cell> = a.cells().iter().map(|c| c.cell).collect();
    while let Some(c) = stack.pop() {
        let mb = b.mesh();
        if mb.contains_cell(c) && mb.is_refined(c) {
            stack.extend(c.children());
        } else {
            out.push(c);
        }
    }
    out.sort();
    out
}

/// Relative L2 distance `||u - u_ref|| / ||u_ref||`, integrated exactly on
/// the common refinement of both meshes.
pub fn error_metric(space: &HierarchicalSpace, u: &[f64], ref_space: &HierarchicalSpace, u_ref: &[f64]) -> Result<f64> {
    space.check_len(u)?;
    ref_space.check_len(u_ref)?;
    let (ma, mb) = (space.mesh(), ref_space.mesh());
    if ma.geometry() != mb.geometry() || ma.base() != mb.base() || ma.degree() != mb.degree() {
        return Err(Error::Structure("fields live on different level hierarchies".into()));
    }
    let rule = QuadratureRule::gauss(ma.degree().max(mb.degree()) + 1);
    let area = ma.geometry().area();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for c in overlay(space, ref_space) {
        let ka = covering(space, c).ok_or_else(|| Error::Structure(format!("cell {c:?} not covered")))?;
        let kb = covering(ref_space, c).ok_or_else(|| Error::Structure(format!("cell {c:?} not covered")))?;
        let pb = ma.parametric_box(c);
        for (eta, wy) in rule.mapped(pb[1][0], pb[1][1]) {
            for (xi, wx) in rule.mapped(pb[0][0], pb[0][1]) {
                let w = wx * wy * area;
                let va = space.combine(ka, u, [xi, eta], 0).value;
                let vb = ref_space.combine(kb, u_ref, [xi, eta], 0).value;
                diff += w * (va - vb) * (va - vb);
                norm += w * vb * vb;
            }
        }
    }
    if norm == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((diff / norm).sqrt())
}
