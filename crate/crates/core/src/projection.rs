//! Field transfer between hierarchical spaces.

use crate::assembly::{assemble_mass, assemble_normal_penalty, BasisCache};
use crate::error::{Error, Result};
use crate::hierarchy::{Cell, HierarchicalSpace};
use crate::quadrature::QuadratureRule;
use crate::sparse::solve;

/// L2 projection of a pointwise function given in physical coordinates.
pub fn l2_project(space: &HierarchicalSpace, f: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let cache = BasisCache::new(space);
    let mass = assemble_mass(&cache);
    let rule = QuadratureRule::gauss(space.degree() + 1);
    let g = space.mesh().geometry();
    let mut rhs = vec![0.0; space.num_functions()];
    for (k, cb) in space.cells().iter().enumerate() {
        let pb = space.mesh().parametric_box(cb.cell);
        for (eta, wy) in rule.mapped(pb[1][0], pb[1][1]) {
            for (xi, wx) in rule.mapped(pb[0][0], pb[0][1]) {
                let fx = f(g.to_physical([xi, eta]));
                let w = wx * wy * g.area() * fx;
                let lb = space.cell_basis(k, [xi, eta], 0);
                for (a, &fid) in cb.functions.iter().enumerate() {
                    rhs[fid] += w * lb.values[a];
                }
            }
        }
    }
    solve(&mass, &rhs).map_err(|e| Error::Structure(format!("mass matrix solve failed: {e}")))
}

fn same_hierarchy(a: &HierarchicalSpace, b: &HierarchicalSpace) -> Result<()> {
    let (ma, mb) = (a.mesh(), b.mesh());
    if ma.degree() != mb.degree()
        || ma.base() != mb.base()
        || ma.num_levels() != mb.num_levels()
        || ma.geometry() != mb.geometry()
    {
        return Err(Error::Structure("spaces belong to different level hierarchies".into()));
    }
    Ok(())
}

/// Active cell of `space` containing `c` (an ancestor of `c` or `c` itself).
fn covering_cell(space: &HierarchicalSpace, c: Cell) -> Option<usize> {
    (0..=c.level).rev().find_map(|l| space.cell_index(c.ancestor(l)))
}

/// Exact re-representation of a field on a refined space.
///
/// Every cell of `old` must be covered by cells of `new` of equal or finer
/// level.
pub fn refine_transfer(coeffs: &[f64], old: &HierarchicalSpace, new: &HierarchicalSpace) -> Result<Vec<f64>> {
    same_hierarchy(old, new)?;
    old.check_len(coeffs)?;
    let p = new.degree();
    let nloc = (p + 1) * (p + 1);
    let mesh = new.mesh();
    let mut out = vec![0.0; new.num_functions()];
    // functions are ordered by level, so coarser coefficients are known
    // before they are needed
    for (fid, f) in new.functions().iter().enumerate() {
        let cell = crate::hierarchy::support_cells(mesh, f.level, f.index)
            .find(|&c| mesh.is_active(c))
            .ok_or_else(|| Error::Structure(format!("active function {f:?} has no active cell")))?;
        let kn = new.cell_index(cell).expect("active cell");
        let ko = covering_cell(old, cell).ok_or_else(|| {
            Error::Structure(format!("cell {cell:?} is coarser in the new space; spaces are not nested"))
        })?;
        let oc = old.cells()[ko].cell;
        let local = old.refine_local(oc, &old.local_field_coefficients(ko, coeffs), cell);
        let loc = (f.index[0] - cell.i) + (p + 1) * (f.index[1] - cell.j);
        let cb = &new.cells()[kn];
        let mut c = local[loc];
        for (k, &g) in cb.functions.iter().enumerate() {
            if g != fid && new.functions()[g].level < f.level {
                c -= out[g] * cb.coefs[k * nloc + loc];
            }
        }
        out[fid] = c;
    }
    Ok(out)
}

/// Penalized L2 projection onto a coarser space:
/// `(M_c + P) u_c = int N_c u_f`, with `P` the boundary normal-derivative
/// penalty scaled by `eps_p`. Cross integrals use the fine active cells.
pub fn coarse_project(
    coeffs: &[f64],
    fine: &HierarchicalSpace,
    coarse: &HierarchicalSpace,
    eps_p: f64,
) -> Result<Vec<f64>> {
    let cache = BasisCache::new(coarse);
    coarse_project_many(&[coeffs], fine, coarse, &cache, eps_p).map(|mut v| v.remove(0))
}

/// [`coarse_project`] for several fields sharing one coarse system.
pub fn coarse_project_many(
    fields: &[&[f64]],
    fine: &HierarchicalSpace,
    coarse: &HierarchicalSpace,
    coarse_cache: &BasisCache,
    eps_p: f64,
) -> Result<Vec<Vec<f64>>> {
    same_hierarchy(fine, coarse)?;
    for f in fields {
        fine.check_len(f)?;
    }
    let mut a = assemble_mass(coarse_cache);
    if eps_p > 0.0 {
        a.axpy(1.0, &assemble_normal_penalty(coarse_cache, eps_p));
    }
    let rhs = cross_integrals(fields, fine, coarse)?;
    rhs.iter().map(|b| solve(&a, b)).collect()
}

/// `b_i = int N_c,i u_f` for each fine field, integrated over the fine cells.
pub fn cross_integrals(fields: &[&[f64]], fine: &HierarchicalSpace, coarse: &HierarchicalSpace) -> Result<Vec<Vec<f64>>> {
    let rule = QuadratureRule::gauss(fine.degree() + 1);
    let area = fine.mesh().geometry().area();
    let mut rhs = vec![vec![0.0; coarse.num_functions()]; fields.len()];
    for (kf, cb) in fine.cells().iter().enumerate() {
        let kc = covering_cell(coarse, cb.cell).ok_or_else(|| {
            Error::Structure(format!("fine cell {:?} is coarser than the target mesh", cb.cell))
        })?;
        let cc = &coarse.cells()[kc];
        let pb = fine.mesh().parametric_box(cb.cell);
        for (eta, wy) in rule.mapped(pb[1][0], pb[1][1]) {
            for (xi, wx) in rule.mapped(pb[0][0], pb[0][1]) {
                let w = wx * wy * area;
                let lf = fine.cell_basis(kf, [xi, eta], 0);
                let lc = coarse.cell_basis(kc, [xi, eta], 0);
                for (field, out) in fields.iter().zip(rhs.iter_mut()) {
                    let uf: f64 = cb.functions.iter().zip(&lf.values).map(|(&g, &n)| field[g] * n).sum();
                    for (a, &g) in cc.functions.iter().enumerate() {
                        out[g] += w * uf * lc.values[a];
                    }
                }
            }
        }
    }
    Ok(rhs)
}
