use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::splines::{Rect, TensorSpace};

/// Cell of the level-`level` tensor grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: usize,
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(level: usize, i: usize, j: usize) -> Self {
        Self { level, i, j }
    }

    pub fn parent(&self) -> Option<Cell> {
        (self.level > 0).then(|| Cell::new(self.level - 1, self.i / 2, self.j / 2))
    }

    pub fn children(&self) -> [Cell; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [
            Cell::new(l, i, j),
            Cell::new(l, i + 1, j),
            Cell::new(l, i, j + 1),
            Cell::new(l, i + 1, j + 1),
        ]
    }

    /// Ancestor (or self) at a coarser or equal level.
    pub fn ancestor(&self, level: usize) -> Cell {
        debug_assert!(level <= self.level);
        let s = self.level - level;
        Cell::new(level, self.i >> s, self.j >> s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    /// Not part of the level domain (covered by a coarser active cell).
    Outside,
    Active,
    /// Deactivated: replaced by its four children.
    Refined,
}

/// Hierarchical mesh over dyadically nested tensor grids.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalMesh {
    levels: Vec<TensorSpace>,
    states: Vec<Vec<CellState>>,
}

impl HierarchicalMesh {
    /// Mesh with every cell of `active_level` active and all coarser cells
    /// refined.
    pub fn uniform(
        degree: usize,
        base: [usize; 2],
        geometry: Rect,
        num_levels: usize,
        active_level: usize,
    ) -> Result<Self> {
        if num_levels == 0 {
            return Err(Error::Config("at least one hierarchical level is required".into()));
        }
        if active_level >= num_levels {
            return Err(Error::Config(format!(
                "active level {active_level} exceeds the finest level {}",
                num_levels - 1
            )));
        }
        let mut levels = vec![TensorSpace::uniform(degree, base, geometry)?];
        for _ in 1..num_levels {
            let next = levels.last().expect("nonempty").dyadic_refine();
            levels.push(next);
        }
        let states = levels
            .iter()
            .enumerate()
            .map(|(l, s)| {
                let [nx, ny] = s.num_elements();
                let st = match l.cmp(&active_level) {
                    std::cmp::Ordering::Less => CellState::Refined,
                    std::cmp::Ordering::Equal => CellState::Active,
                    std::cmp::Ordering::Greater => CellState::Outside,
                };
                vec![st; nx * ny]
            })
            .collect();
        Ok(Self { levels, states })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn degree(&self) -> usize {
        self.levels[0].degree()
    }

    pub fn geometry(&self) -> Rect {
        self.levels[0].geometry
    }

    pub fn base(&self) -> [usize; 2] {
        self.levels[0].num_elements()
    }

    pub fn level_space(&self, level: usize) -> &TensorSpace {
        &self.levels[level]
    }

    pub fn dims(&self, level: usize) -> [usize; 2] {
        let [nx, ny] = self.base();
        [nx << level, ny << level]
    }

    fn slot(&self, c: Cell) -> usize {
        c.i + self.dims(c.level)[0] * c.j
    }

    pub fn contains_cell(&self, c: Cell) -> bool {
        if c.level >= self.num_levels() {
            return false;
        }
        let [nx, ny] = self.dims(c.level);
        c.i < nx && c.j < ny
    }

    pub fn state(&self, c: Cell) -> CellState {
        if !self.contains_cell(c) {
            return CellState::Outside;
        }
        self.states[c.level][self.slot(c)]
    }

    pub fn is_active(&self, c: Cell) -> bool {
        self.state(c) == CellState::Active
    }

    pub fn is_refined(&self, c: Cell) -> bool {
        self.state(c) == CellState::Refined
    }

    /// Whether the cell belongs to the level domain Omega^level.
    pub fn in_domain(&self, c: Cell) -> bool {
        self.state(c) != CellState::Outside
    }

    /// Active cells ordered by level, then `(i, j)`.
    pub fn active_cells(&self) -> Vec<Cell> {
        (0..self.num_levels())
            .flat_map(|l| self.active_cells_at(l))
            .collect()
    }

    pub fn active_cells_at(&self, level: usize) -> Vec<Cell> {
        let [nx, ny] = self.dims(level);
        let mut out = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                if self.states[level][i + nx * j] == CellState::Active {
                    out.push(Cell::new(level, i, j));
                }
            }
        }
        out
    }

    pub fn num_active_cells(&self) -> usize {
        self.states
            .iter()
            .map(|s| s.iter().filter(|&&c| c == CellState::Active).count())
            .sum()
    }

    pub fn active_counts_per_level(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|s| s.iter().filter(|&&c| c == CellState::Active).count())
            .collect()
    }

    /// Finest level holding at least one active cell.
    pub fn finest_active_level(&self) -> usize {
        (0..self.num_levels())
            .rev()
            .find(|&l| self.states[l].contains(&CellState::Active))
            .unwrap_or(0)
    }

    /// Parametric box `[[xi_lo, xi_hi], [eta_lo, eta_hi]]`.
    pub fn parametric_box(&self, c: Cell) -> [[f64; 2]; 2] {
        let [nx, ny] = self.dims(c.level);
        [
            [c.i as f64 / nx as f64, (c.i + 1) as f64 / nx as f64],
            [c.j as f64 / ny as f64, (c.j + 1) as f64 / ny as f64],
        ]
    }

    pub fn physical_box(&self, c: Cell) -> [[f64; 2]; 2] {
        let b = self.parametric_box(c);
        let g = self.geometry();
        let lo = g.to_physical([b[0][0], b[1][0]]);
        let hi = g.to_physical([b[0][1], b[1][1]]);
        [[lo[0], hi[0]], [lo[1], hi[1]]]
    }

    pub fn cell_size(&self, c: Cell) -> [f64; 2] {
        let [nx, ny] = self.dims(c.level);
        let g = self.geometry();
        [g.extent(0) / nx as f64, g.extent(1) / ny as f64]
    }

    pub fn cell_area(&self, c: Cell) -> f64 {
        let [hx, hy] = self.cell_size(c);
        hx * hy
    }

    /// Replace an active cell by its four children.
    pub fn refine_cell(&mut self, c: Cell) -> Result<()> {
        if !self.is_active(c) {
            return Err(Error::Structure(format!("cell {c:?} is not active")));
        }
        if c.level + 1 >= self.num_levels() {
            return Err(Error::Structure(format!(
                "cell {c:?} is already at the finest level"
            )));
        }
        let slot = self.slot(c);
        self.states[c.level][slot] = CellState::Refined;
        for ch in c.children() {
            let s = self.slot(ch);
            self.states[ch.level][s] = CellState::Active;
        }
        Ok(())
    }

    /// Reactivate a refined cell whose four children are active.
    pub fn reactivate_cell(&mut self, c: Cell) -> Result<()> {
        if !self.is_refined(c) || !c.children().iter().all(|ch| self.is_active(*ch)) {
            return Err(Error::Structure(format!(
                "cell {c:?} cannot be reactivated: children are not all active leaves"
            )));
        }
        let slot = self.slot(c);
        self.states[c.level][slot] = CellState::Active;
        for ch in c.children() {
            let s = self.slot(ch);
            self.states[ch.level][s] = CellState::Outside;
        }
        Ok(())
    }

    /// Active cell containing the parametric point.
    pub fn locate(&self, xi: [f64; 2]) -> Result<Cell> {
        for &x in &xi {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(x));
            }
        }
        let index = |x: f64, n: usize| ((x * n as f64).floor() as usize).min(n - 1);
        let [nx, ny] = self.dims(0);
        let mut c = Cell::new(0, index(xi[0], nx), index(xi[1], ny));
        loop {
            match self.state(c) {
                CellState::Active => return Ok(c),
                CellState::Refined => {
                    let [nx, ny] = self.dims(c.level + 1);
                    let (ci, cj) = (index(xi[0], nx), index(xi[1], ny));
                    c = Cell::new(c.level + 1, ci.clamp(2 * c.i, 2 * c.i + 1), cj.clamp(2 * c.j, 2 * c.j + 1));
                }
                CellState::Outside => {
                    return Err(Error::Structure("inconsistent hierarchical mesh".into()))
                }
            }
        }
    }

    pub fn locate_physical(&self, x: [f64; 2]) -> Result<Cell> {
        let xi = self.geometry().to_parametric(x);
        let tol = 1e-14;
        if xi.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) {
            return Err(Error::OutsideDomain(x[0], x[1]));
        }
        self.locate([xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)])
    }

    /// Sum of active cell areas; equals the domain area for a valid mesh.
    pub fn active_area(&self) -> f64 {
        self.active_cells().iter().map(|&c| self.cell_area(c)).sum()
    }

    /// Check nesting of the level domains.
    pub fn validate(&self) -> Result<()> {
        for l in 0..self.num_levels() {
            let [nx, ny] = self.dims(l);
            for j in 0..ny {
                for i in 0..nx {
                    let c = Cell::new(l, i, j);
                    let st = self.state(c);
                    if l == 0 && st == CellState::Outside {
                        return Err(Error::Structure(format!("level-0 cell {c:?} is not covered")));
                    }
                    if l > 0 && st != CellState::Outside {
                        let p = c.parent().expect("level > 0");
                        if !self.is_refined(p) {
                            return Err(Error::Structure(format!(
                                "cell {c:?} lies outside the nested domain of its parent"
                            )));
                        }
                    }
                    if st == CellState::Refined {
                        if l + 1 >= self.num_levels() {
                            return Err(Error::Structure(format!("finest cell {c:?} marked refined")));
                        }
                        if c.children().iter().any(|ch| !self.in_domain(*ch)) {
                            return Err(Error::Structure(format!(
                                "refined cell {c:?} has uncovered children"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Cells of levels `0..=level` that were never refined (active, or not
    /// activated yet).
    pub fn never_refined_set(&self, level: usize) -> BTreeSet<Cell> {
        let mut out = BTreeSet::new();
        for l in 0..=level.min(self.num_levels() - 1) {
            let [nx, ny] = self.dims(l);
            for i in 0..nx {
                for j in 0..ny {
                    let c = Cell::new(l, i, j);
                    if !self.is_refined(c) {
                        out.insert(c);
                    }
                }
            }
        }
        out
    }

    /// Text dump: metadata comments followed by one `level i j` line per
    /// active cell.
    pub fn dump(&self) -> String {
        let g = self.geometry();
        let [bx, by] = self.base();
        let mut s = String::new();
        let _ = writeln!(s, "# thbch-mesh 1");
        let _ = writeln!(s, "# degree {}", self.degree());
        let _ = writeln!(s, "# base {bx} {by}");
        let _ = writeln!(s, "# levels {}", self.num_levels());
        let _ = writeln!(s, "# domain {} {} {} {}", g.min[0], g.min[1], g.max[0], g.max[1]);
        for c in self.active_cells() {
            let _ = writeln!(s, "{} {} {}", c.level, c.i, c.j);
        }
        s
    }

    /// Rebuild a mesh from the active cells of a dump.
    pub fn from_dump(text: &str) -> Result<Self> {
        let mut degree = None;
        let mut base = None;
        let mut levels = None;
        let mut domain = Rect::UNIT;
        let mut cells = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let ctx = || format!("mesh dump line {}", no + 1);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let nums = |rest: &str| -> Result<Vec<f64>> {
                rest.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| Error::parse(ctx(), e)))
                    .collect()
            };
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                let (key, tail) = rest.split_once(' ').unwrap_or((rest, ""));
                match key {
                    "degree" => degree = Some(nums(tail)?[0] as usize),
                    "base" => {
                        let v = nums(tail)?;
                        if v.len() != 2 {
                            return Err(Error::parse(ctx(), "base needs two values"));
                        }
                        base = Some([v[0] as usize, v[1] as usize]);
                    }
                    "levels" => levels = Some(nums(tail)?[0] as usize),
                    "domain" => {
                        let v = nums(tail)?;
                        if v.len() != 4 {
                            return Err(Error::parse(ctx(), "domain needs four values"));
                        }
                        domain = Rect::new([v[0], v[1]], [v[2], v[3]])?;
                    }
                    _ => {}
                }
                continue;
            }
            let v: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| Error::parse(ctx(), e)))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::parse(ctx(), "expected `level i j`"));
            }
            cells.push(Cell::new(v[0], v[1], v[2]));
        }
        let missing = |k: &str| Error::parse("mesh dump", format!("missing `# {k}` header"));
        let degree = degree.ok_or_else(|| missing("degree"))?;
        let base = base.ok_or_else(|| missing("base"))?;
        let levels = levels.ok_or_else(|| missing("levels"))?;
        Self::from_active_cells(degree, base, domain, levels, &cells)
    }

    pub fn from_active_cells(
        degree: usize,
        base: [usize; 2],
        geometry: Rect,
        num_levels: usize,
        cells: &[Cell],
    ) -> Result<Self> {
        let mut mesh = Self::uniform(degree, base, geometry, num_levels, 0)?;
        for s in mesh.states.iter_mut() {
            s.fill(CellState::Outside);
        }
        for &c in cells {
            if !mesh.contains_cell(c) {
                return Err(Error::Structure(format!("cell {c:?} outside the level grid")));
            }
            if mesh.state(c) != CellState::Outside {
                return Err(Error::Structure(format!("cell {c:?} listed twice or overlaps")));
            }
            let slot = mesh.slot(c);
            mesh.states[c.level][slot] = CellState::Active;
            for l in 0..c.level {
                let a = c.ancestor(l);
                let s = mesh.slot(a);
                if mesh.states[l][s] == CellState::Active {
                    return Err(Error::Structure(format!("cell {c:?} overlaps active cell {a:?}")));
                }
                mesh.states[l][s] = CellState::Refined;
            }
        }
        mesh.validate()?;
        let area = mesh.active_area();
        let total = mesh.geometry().area();
        if (area - total).abs() > 1e-12 * total.max(1.0) {
            return Err(Error::Structure(format!(
                "active cells cover area {area} instead of {total}"
            )));
        }
        Ok(mesh)
    }
}
