use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::hierarchy::mesh::{Cell, HierarchicalMesh};
use crate::splines::UnivariateRefinement;

/// Active hierarchical basis function: tensor B-spline `index` of `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActiveFunction {
    pub level: usize,
    pub index: [usize; 2],
}

/// Extraction data of one active cell.
///
/// `coefs` holds one row of `(p+1)^2` entries per function in `functions`:
/// the restriction of that (truncated) hierarchical function to the cell,
/// written in the tensor B-splines of the cell's own level that are nonzero
/// there (local index `a + (p+1) * b`).
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub cell: Cell,
    pub functions: Vec<usize>,
    pub coefs: Vec<f64>,
}

/// Basis values at one point, aligned with `CellBasis::functions`.
#[derive(Clone, Debug, Default)]
pub struct LocalBasis {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub laplacians: Vec<f64>,
}

/// Field value, gradient and Laplacian at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldPoint {
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

/// (Truncated) hierarchical B-spline space over a hierarchical mesh.
#[derive(Clone, Debug)]
pub struct HierarchicalSpace {
    mesh: HierarchicalMesh,
    truncated: bool,
    functions: Vec<ActiveFunction>,
    cells: Vec<CellBasis>,
    cell_lookup: Vec<Vec<usize>>,
    refinements: Vec<[UnivariateRefinement; 2]>,
}

const NONE: usize = usize::MAX;

impl HierarchicalSpace {
    pub fn new(mesh: HierarchicalMesh, truncated: bool) -> Result<Self> {
        mesh.validate()?;
        let p = mesh.degree();
        let nloc = (p + 1) * (p + 1);
        let nlev = mesh.num_levels();

        let mut refinements = Vec::with_capacity(nlev.saturating_sub(1));
        for l in 0..nlev.saturating_sub(1) {
            let (c, f) = (mesh.level_space(l), mesh.level_space(l + 1));
            refinements.push([
                UnivariateRefinement::new(&c.knots[0], &f.knots[0])?,
                UnivariateRefinement::new(&c.knots[1], &f.knots[1])?,
            ]);
        }

        let active_cells = mesh.active_cells();
        let mut cell_lookup: Vec<Vec<usize>> = (0..nlev)
            .map(|l| {
                let [nx, ny] = mesh.dims(l);
                vec![NONE; nx * ny]
            })
            .collect();
        for (k, c) in active_cells.iter().enumerate() {
            let nx = mesh.dims(c.level)[0];
            cell_lookup[c.level][c.i + nx * c.j] = k;
        }

        let mut functions = Vec::new();
        for l in 0..nlev {
            let [fx, fy] = mesh.level_space(l).num_basis();
            for b in 0..fy {
                for a in 0..fx {
                    let mut all_in = true;
                    let mut any_active = false;
                    for c in support_cells(&mesh, l, [a, b]) {
                        if !mesh.in_domain(c) {
                            all_in = false;
                            break;
                        }
                        any_active |= mesh.is_active(c);
                    }
                    if all_in && any_active {
                        functions.push(ActiveFunction { level: l, index: [a, b] });
                    }
                }
            }
        }

        let mut per_cell: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); active_cells.len()];
        for (fid, f) in functions.iter().enumerate() {
            let nb = mesh.level_space(f.level).num_basis();
            let mut repr: BTreeMap<usize, f64> = BTreeMap::new();
            repr.insert(f.index[0] + nb[0] * f.index[1], 1.0);
            let mut level = f.level;
            loop {
                let nb = mesh.level_space(level).num_basis();
                let [ncx, _] = mesh.dims(level);
                let mut touched = BTreeSet::new();
                let mut deeper = false;
                for &g in repr.keys() {
                    for c in support_cells(&mesh, level, [g % nb[0], g / nb[0]]) {
                        if mesh.is_active(c) {
                            touched.insert((c.j, c.i));
                        } else if mesh.is_refined(c) {
                            deeper = true;
                        }
                    }
                }
                for (cj, ci) in touched {
                    let mut local = vec![0.0; nloc];
                    let mut nonzero = false;
                    for b in 0..=p {
                        for a in 0..=p {
                            let g = (ci + a) + nb[0] * (cj + b);
                            if let Some(&v) = repr.get(&g) {
                                local[a + (p + 1) * b] = v;
                                nonzero |= v != 0.0;
                            }
                        }
                    }
                    if nonzero {
                        per_cell[cell_lookup[level][ci + ncx * cj]].push((fid, local));
                    }
                }
                if !deeper || level + 1 >= nlev {
                    break;
                }
                // express on the next level, keep only functions reaching
                // into Omega^{level+1}, truncate those fully inside it
                let [rx, ry] = &refinements[level];
                let fine_nb = mesh.level_space(level + 1).num_basis();
                let mut next: BTreeMap<usize, f64> = BTreeMap::new();
                for (&g, &c) in &repr {
                    let (a, b) = (g % nb[0], g / nb[0]);
                    for &(j, cy) in &ry.rows[b] {
                        for &(i, cx) in &rx.rows[a] {
                            *next.entry(i + fine_nb[0] * j).or_insert(0.0) += c * cx * cy;
                        }
                    }
                }
                next.retain(|&g, v| {
                    if *v == 0.0 {
                        return false;
                    }
                    let mut any_in = false;
                    let mut all_in = true;
                    for c in support_cells(&mesh, level + 1, [g % fine_nb[0], g / fine_nb[0]]) {
                        if mesh.in_domain(c) {
                            any_in = true;
                        } else {
                            all_in = false;
                        }
                    }
                    any_in && !(truncated && all_in)
                });
                repr = next;
                level += 1;
            }
        }

        let cells = active_cells
            .iter()
            .zip(per_cell)
            .map(|(&cell, list)| {
                let mut functions = Vec::with_capacity(list.len());
                let mut coefs = Vec::with_capacity(list.len() * nloc);
                for (fid, local) in list {
                    functions.push(fid);
                    coefs.extend(local);
                }
                CellBasis {
                    cell,
                    functions,
                    coefs,
                }
            })
            .collect();

        Ok(Self {
            mesh,
            truncated,
            functions,
            cells,
            cell_lookup,
            refinements,
        })
    }

    pub fn mesh(&self) -> &HierarchicalMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> HierarchicalMesh {
        self.mesh
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn degree(&self) -> usize {
        self.mesh.degree()
    }

    pub fn num_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[ActiveFunction] {
        &self.functions
    }

    pub fn cells(&self) -> &[CellBasis] {
        &self.cells
    }

    pub fn cell_index(&self, c: Cell) -> Option<usize> {
        if !self.mesh.contains_cell(c) {
            return None;
        }
        let nx = self.mesh.dims(c.level)[0];
        let k = self.cell_lookup[c.level][c.i + nx * c.j];
        (k != NONE).then_some(k)
    }

    /// Active functions per level.
    pub fn functions_per_level(&self) -> Vec<usize> {
        let mut out = vec![0; self.mesh.num_levels()];
        for f in &self.functions {
            out[f.level] += 1;
        }
        out
    }

    /// For every active cell, the active functions not vanishing on it with
    /// their levels.
    pub fn cell_function_incidence(&self) -> Vec<(Cell, Vec<(usize, usize)>)> {
        self.cells
            .iter()
            .map(|cb| {
                let v = cb
                    .functions
                    .iter()
                    .map(|&f| (f, self.functions[f].level))
                    .collect();
                (cb.cell, v)
            })
            .collect()
    }

    /// Univariate knot-insertion masks from `level` to `level + 1`.
    pub fn refinement(&self, level: usize) -> &[UnivariateRefinement; 2] {
        &self.refinements[level]
    }

    /// Tensor B-splines of the cell level nonzero on the cell, evaluated at
    /// a parametric point (local index `a + (p+1) * b`). Derivatives are
    /// physical.
    pub fn tensor_local(&self, cell: Cell, xi: [f64; 2], nders: usize) -> LocalBasis {
        let p = self.degree();
        let space = self.mesh.level_space(cell.level);
        let ex = space.knots[0].eval_in_span(cell.i + p, xi[0], nders);
        let ey = space.knots[1].eval_in_span(cell.j + p, xi[1], nders);
        let g = self.mesh.geometry();
        let (sx, sy) = (1.0 / g.extent(0), 1.0 / g.extent(1));
        let n = (p + 1) * (p + 1);
        let mut out = LocalBasis {
            values: Vec::with_capacity(n),
            grads: Vec::with_capacity(if nders > 0 { n } else { 0 }),
            laplacians: Vec::with_capacity(if nders > 1 { n } else { 0 }),
        };
        for b in 0..=p {
            for a in 0..=p {
                let (nx, ny) = (ex.ders[0][a], ey.ders[0][b]);
                out.values.push(nx * ny);
                if nders > 0 {
                    out.grads
                        .push([ex.ders[1][a] * ny * sx, nx * ey.ders[1][b] * sy]);
                }
                if nders > 1 {
                    out.laplacians.push(
                        ex.ders[2][a] * ny * sx * sx + nx * ey.ders[2][b] * sy * sy,
                    );
                }
            }
        }
        out
    }

    /// Hierarchical basis functions of an active cell evaluated at a
    /// parametric point inside (or on the boundary of) the cell.
    pub fn cell_basis(&self, cell_index: usize, xi: [f64; 2], nders: usize) -> LocalBasis {
        let cb = &self.cells[cell_index];
        let t = self.tensor_local(cb.cell, xi, nders);
        let nloc = t.values.len();
        let nf = cb.functions.len();
        let mut out = LocalBasis {
            values: vec![0.0; nf],
            grads: if nders > 0 { vec![[0.0; 2]; nf] } else { Vec::new() },
            laplacians: if nders > 1 { vec![0.0; nf] } else { Vec::new() },
        };
        for k in 0..nf {
            let row = &cb.coefs[k * nloc..(k + 1) * nloc];
            let mut v = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            let mut lap = 0.0;
            for (l, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                v += c * t.values[l];
                if nders > 0 {
                    gx += c * t.grads[l][0];
                    gy += c * t.grads[l][1];
                }
                if nders > 1 {
                    lap += c * t.laplacians[l];
                }
            }
            out.values[k] = v;
            if nders > 0 {
                out.grads[k] = [gx, gy];
            }
            if nders > 1 {
                out.laplacians[k] = lap;
            }
        }
        out
    }

    /// Evaluate a coefficient vector at physical points.
    pub fn eval_field(&self, coeffs: &[f64], points: &[[f64; 2]], nders: usize) -> Result<Vec<FieldPoint>> {
        self.check_len(coeffs)?;
        points
            .iter()
            .map(|&x| {
                let cell = self.mesh.locate_physical(x)?;
                let k = self.cell_index(cell).expect("located cell is active");
                let xi = self.mesh.geometry().to_parametric(x);
                let xi = [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)];
                Ok(self.combine(k, coeffs, xi, nders))
            })
            .collect()
    }

    pub(crate) fn combine(&self, cell_index: usize, coeffs: &[f64], xi: [f64; 2], nders: usize) -> FieldPoint {
        let lb = self.cell_basis(cell_index, xi, nders);
        let mut fp = FieldPoint::default();
        for (k, &f) in self.cells[cell_index].functions.iter().enumerate() {
            let c = coeffs[f];
            fp.value += c * lb.values[k];
            if nders > 0 {
                fp.grad[0] += c * lb.grads[k][0];
                fp.grad[1] += c * lb.grads[k][1];
            }
            if nders > 1 {
                fp.laplacian += c * lb.laplacians[k];
            }
        }
        fp
    }

    pub(crate) fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.num_functions() {
            return Err(Error::Structure(format!(
                "coefficient vector has length {} but the space has {} functions",
                coeffs.len(),
                self.num_functions()
            )));
        }
        Ok(())
    }

    /// Local tensor coefficients of a field on an active cell.
    pub fn local_field_coefficients(&self, cell_index: usize, coeffs: &[f64]) -> Vec<f64> {
        let cb = &self.cells[cell_index];
        let p = self.degree();
        let nloc = (p + 1) * (p + 1);
        let mut out = vec![0.0; nloc];
        for (k, &f) in cb.functions.iter().enumerate() {
            let c = coeffs[f];
            for (o, &w) in out.iter_mut().zip(&cb.coefs[k * nloc..(k + 1) * nloc]) {
                *o += c * w;
            }
        }
        out
    }

    /// Rewrite local coefficients of a level-`cell.level` polynomial piece
    /// in the tensor B-splines of the descendant `target`.
    pub fn refine_local(&self, cell: Cell, local: &[f64], target: Cell) -> Vec<f64> {
        let p = self.degree();
        let mut cur = local.to_vec();
        let mut c = cell;
        while c.level < target.level {
            let child = target.ancestor(c.level + 1);
            let [rx, ry] = &self.refinements[c.level];
            let tx = local_mask(rx, c.i, child.i, p);
            let ty = local_mask(ry, c.j, child.j, p);
            let mut next = vec![0.0; cur.len()];
            for b in 0..=p {
                for a in 0..=p {
                    let v = cur[a + (p + 1) * b];
                    if v == 0.0 {
                        continue;
                    }
                    for bb in 0..=p {
                        let wy = ty[b][bb];
                        if wy == 0.0 {
                            continue;
                        }
                        for aa in 0..=p {
                            next[aa + (p + 1) * bb] += v * tx[a][aa] * wy;
                        }
                    }
                }
            }
            cur = next;
            c = child;
        }
        cur
    }
}

/// Level cells in the support of tensor function `index` on `level`.
pub fn support_cells(mesh: &HierarchicalMesh, level: usize, index: [usize; 2]) -> impl Iterator<Item = Cell> {
    let p = mesh.degree();
    let [nx, ny] = mesh.dims(level);
    let (x0, x1) = (index[0].saturating_sub(p), index[0].min(nx - 1));
    let (y0, y1) = (index[1].saturating_sub(p), index[1].min(ny - 1));
    (y0..=y1).flat_map(move |j| (x0..=x1).map(move |i| Cell::new(level, i, j)))
}

/// `mask[a][a2]`: weight of fine function `child + a2` in coarse function
/// `parent + a`.
fn local_mask(r: &UnivariateRefinement, parent: usize, child: usize, p: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; p + 1]; p + 1];
    for (a, row) in m.iter_mut().enumerate() {
        for &(fi, w) in &r.rows[parent + a] {
            if fi >= child && fi <= child + p {
                row[fi - child] = w;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splines::Rect;

    #[test]
    fn single_level_space_is_tensor_space() {
        let m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 1, 0).unwrap();
        let s = HierarchicalSpace::new(m, true).unwrap();
        assert_eq!(s.num_functions(), 36);
        for cb in s.cells() {
            assert_eq!(cb.functions.len(), 9);
            // identity extraction
            for (k, row) in cb.coefs.chunks(9).enumerate() {
                assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
                assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 8);
                let f = s.functions()[cb.functions[k]];
                let local = (f.index[0] - cb.cell.i) + 3 * (f.index[1] - cb.cell.j);
                assert_eq!(row[local], 1.0);
            }
        }
    }

    #[test]
    fn interior_single_refined_cell_adds_no_fine_function() {
        let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 2, 0).unwrap();
        m.refine_cell(Cell::new(0, 1, 1)).unwrap();
        let s = HierarchicalSpace::new(m.clone(), true).unwrap();
        // support-inclusion oracle over all level-1 functions
        let nb = m.level_space(1).num_basis();
        let mut oracle = 0;
        for b in 0..nb[1] {
            for a in 0..nb[0] {
                if support_cells(&m, 1, [a, b]).all(|c| m.in_domain(c)) {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 0);
        assert_eq!(s.functions_per_level(), vec![36, 0]);
    }

    #[test]
    fn constant_field_everywhere() {
        let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 3, 0).unwrap();
        m.refine_cell(Cell::new(0, 0, 0)).unwrap();
        m.refine_cell(Cell::new(0, 1, 0)).unwrap();
        m.refine_cell(Cell::new(0, 0, 1)).unwrap();
        m.refine_cell(Cell::new(0, 1, 1)).unwrap();
        m.refine_cell(Cell::new(1, 1, 1)).unwrap();
        let s = HierarchicalSpace::new(m, true).unwrap();
        let c = vec![2.5; s.num_functions()];
        let pts: Vec<[f64; 2]> = (0..50).map(|k| [k as f64 / 49.0, (k * 7 % 50) as f64 / 49.0]).collect();
        for fp in s.eval_field(&c, &pts, 2).unwrap() {
            assert!((fp.value - 2.5).abs() < 1e-12);
            assert!(fp.grad[0].abs() < 1e-10 && fp.grad[1].abs() < 1e-10);
            assert!(fp.laplacian.abs() < 1e-8);
        }
        assert!(matches!(s.eval_field(&c, &[[1.5, 0.0]], 0), Err(Error::OutsideDomain(..))));
        assert!(s.eval_field(&c[1..], &pts, 0).is_err());
    }
}
