//! Error indicators, marking, admissible refinement and conservative
//! coarsening.
//!
//! Admissibility of class `mu` is maintained through support extensions:
//! refining a level-`l` cell `Q` also refines the active level-`(l-mu+1)`
//! cells meeting `S(Q, l-mu+2)`, and a parent is reactivated only when no
//! refined cell of level `l+mu-2` reaches its children through its own
//! support extension.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assembly::BasisCache;
use crate::error::{Error, Result};
use crate::hierarchy::{Cell, HierarchicalMesh, HierarchicalSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndicatorKind {
    /// `1 - |mean(u)| / binodal`
    Field,
    /// `mean(|grad u|)`
    Gradient,
}

/// One indicator value per active cell, in the space's cell order.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub kind: IndicatorKind,
    pub cells: Vec<Cell>,
    pub values: Vec<f64>,
}

pub fn indicator_field(space: &HierarchicalSpace, cache: &BasisCache, u: &[f64], binodal: f64) -> IndicatorField {
    let values = cache
        .cell_integrals(u)
        .into_iter()
        .map(|(iu, _, area)| 1.0 - (iu / (area * binodal)).abs())
        .collect();
    IndicatorField {
        kind: IndicatorKind::Field,
        cells: space.cells().iter().map(|c| c.cell).collect(),
        values,
    }
}

pub fn indicator_gradient(space: &HierarchicalSpace, cache: &BasisCache, u: &[f64]) -> IndicatorField {
    let values = cache
        .cell_integrals(u)
        .into_iter()
        .map(|(_, ig, area)| ig / area)
        .collect();
    IndicatorField {
        kind: IndicatorKind::Gradient,
        cells: space.cells().iter().map(|c| c.cell).collect(),
        values,
    }
}

pub fn compute_indicator(
    kind: IndicatorKind,
    space: &HierarchicalSpace,
    cache: &BasisCache,
    u: &[f64],
    binodal: f64,
) -> IndicatorField {
    match kind {
        IndicatorKind::Field => indicator_field(space, cache, u, binodal),
        IndicatorKind::Gradient => indicator_gradient(space, cache, u),
    }
}

/// Marked cells, ordered by level then index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkSet {
    cells: BTreeSet<Cell>,
}

impl MarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: Cell) -> bool {
        self.cells.insert(c)
    }

    pub fn contains(&self, c: &Cell) -> bool {
        self.cells.contains(c)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter()
    }

    pub fn at_level(&self, level: usize) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied().filter(move |c| c.level == level)
    }

    /// Same format as the mesh dump body.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c.level, c.i, c.j);
        }
        s
    }
}

impl FromIterator<Cell> for MarkSet {
    fn from_iter<I: IntoIterator<Item = Cell>>(iter: I) -> Self {
        Self {
            cells: iter.into_iter().collect(),
        }
    }
}

/// Split active cells into refinement (value above threshold, below the
/// finest level) and coarsening (value at or below threshold, level >= 1)
/// candidates.
pub fn mark(indicator: &IndicatorField, threshold: f64, mesh: &HierarchicalMesh) -> (MarkSet, MarkSet) {
    let finest = mesh.num_levels() - 1;
    let mut refine = MarkSet::new();
    let mut coarsen = MarkSet::new();
    for (&c, &v) in indicator.cells.iter().zip(&indicator.values) {
        if v > threshold {
            if c.level < finest {
                refine.insert(c);
            }
        } else if c.level >= 1 {
            coarsen.insert(c);
        }
    }
    (refine, coarsen)
}

/// Support extension `S(Q, k)`: level-`k` cells in the union of supports of
/// the level-`k` tensor B-splines not vanishing on `Q`, as index ranges
/// `([i0, i1], [j0, j1])`.
pub fn support_extension_range(mesh: &HierarchicalMesh, q: Cell, k: usize) -> ([usize; 2], [usize; 2]) {
    let p = mesh.degree();
    let [nx, ny] = mesh.dims(k);
    let range = |a: usize, n: usize| -> [usize; 2] {
        let (lo, hi) = if k <= q.level {
            let s = q.level - k;
            (a >> s, a >> s)
        } else {
            let s = k - q.level;
            (a << s, ((a + 1) << s) - 1)
        };
        [lo.saturating_sub(p), (hi + p).min(n - 1)]
    };
    (range(q.i, nx), range(q.j, ny))
}

pub fn support_extension(mesh: &HierarchicalMesh, q: Cell, k: usize) -> Vec<Cell> {
    let ([i0, i1], [j0, j1]) = support_extension_range(mesh, q, k);
    (j0..=j1)
        .flat_map(|j| (i0..=i1).map(move |i| Cell::new(k, i, j)))
        .collect()
}

/// Cells of `level` (satisfying `keep`) that meet the level-`k` region
/// `([i0, i1], [j0, j1])`, with `level >= k` or `level < k`.
fn cells_meeting(
    level: usize,
    k: usize,
    ([i0, i1], [j0, j1]): ([usize; 2], [usize; 2]),
    keep: impl Fn(Cell) -> bool,
) -> Vec<Cell> {
    let (ri, rj) = if level >= k {
        let s = level - k;
        ([i0 << s, ((i1 + 1) << s) - 1], [j0 << s, ((j1 + 1) << s) - 1])
    } else {
        let s = k - level;
        ([i0 >> s, i1 >> s], [j0 >> s, j1 >> s])
    };
    let mut out = Vec::new();
    for j in rj[0]..=rj[1] {
        for i in ri[0]..=ri[1] {
            let c = Cell::new(level, i, j);
            if keep(c) {
                out.push(c);
            }
        }
    }
    out
}

/// `N_r(Q, mu)`: active cells of level `l-mu+1` meeting `S(Q, l-mu+2)`.
pub fn refine_neighborhood(mesh: &HierarchicalMesh, q: Cell, mu: usize) -> Vec<Cell> {
    if q.level + 1 < mu {
        return Vec::new();
    }
    let target = q.level + 1 - mu;
    let k = target + 1;
    let region = support_extension_range(mesh, q, k);
    cells_meeting(target, k, region, |c| mesh.is_active(c))
}

/// `N_c(Q, mu)` for a refined cell `Q` of level `l-1`: cells of level
/// `l+mu-1` present in the mesh (active or refined) that meet `S(Q, l)`.
pub fn coarsen_neighborhood(mesh: &HierarchicalMesh, q: Cell, mu: usize) -> Vec<Cell> {
    let l = q.level + 1;
    let target = l + mu - 1;
    if target >= mesh.num_levels() {
        return Vec::new();
    }
    let region = support_extension_range(mesh, q, l);
    cells_meeting(target, l, region, |c| mesh.in_domain(c))
}

fn check_mu(mu: usize) -> Result<()> {
    if mu < 2 {
        return Err(Error::Config(format!("admissibility class mu = {mu} must be at least 2")));
    }
    Ok(())
}

/// Refine the marked cells and the cells required to stay admissible.
pub fn refine(mesh: &mut HierarchicalMesh, marked: &MarkSet, mu: usize) -> Result<()> {
    check_mu(mu)?;
    let n = mesh.num_levels();
    let mut per_level: Vec<BTreeSet<Cell>> = vec![BTreeSet::new(); n];
    for &c in marked.iter() {
        if !mesh.contains_cell(c) || !mesh.is_active(c) {
            return Err(Error::Structure(format!("marked cell {c:?} is not active")));
        }
        per_level[c.level].insert(c);
    }
    for l in (0..n).rev() {
        let cells = std::mem::take(&mut per_level[l]);
        for &q in &cells {
            for c in refine_neighborhood(mesh, q, mu) {
                per_level[c.level].insert(c);
            }
        }
        for q in cells {
            mesh.refine_cell(q)?;
        }
    }
    Ok(())
}

/// Reactivate parents whose four children are all marked, unless the
/// coarsening neighborhood forbids it. Returns the reactivated cells.
pub fn coarsen(mesh: &mut HierarchicalMesh, marked: &MarkSet, mu: usize) -> Result<Vec<Cell>> {
    check_mu(mu)?;
    for &c in marked.iter() {
        if !mesh.contains_cell(c) || !mesh.is_active(c) || c.level == 0 {
            return Err(Error::Structure(format!(
                "coarsening mark {c:?} is not an active cell of level >= 1"
            )));
        }
    }
    let mut reactivated = Vec::new();
    for l in (1..mesh.num_levels()).rev() {
        let parents: BTreeSet<Cell> = marked
            .at_level(l)
            .filter_map(|c| c.parent())
            .collect();
        for p in parents {
            let children = p.children();
            if !children.iter().all(|ch| marked.contains(ch) && mesh.is_active(*ch)) {
                continue;
            }
            if !coarsen_neighborhood(mesh, p, mu).is_empty() {
                continue;
            }
            mesh.reactivate_cell(p)?;
            reactivated.push(p);
        }
    }
    Ok(reactivated)
}

/// Admissibility report: cells whose incident functions span more than
/// `mu` levels.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `(cell, min level, max level)`
    pub offending: Vec<(Cell, usize, usize)>,
}

pub fn check_admissible(space: &HierarchicalSpace, mu: usize) -> AdmissibilityReport {
    let mut offending = Vec::new();
    for cb in space.cells() {
        let levels = cb.functions.iter().map(|&f| space.functions()[f].level);
        let (lo, hi) = levels.fold((usize::MAX, 0), |(lo, hi), l| (lo.min(l), hi.max(l)));
        if lo != usize::MAX && hi - lo + 1 > mu {
            offending.push((cb.cell, lo, hi));
        }
    }
    AdmissibilityReport {
        admissible: offending.is_empty(),
        offending,
    }
}
