//! Univariate and tensor-product B-spline spaces.
//!
//! Knot values produced by the public constructors are dyadic rationals, so
//! midpoint insertion is exact in binary floating point and knots are compared
//! with `==` throughout.

use crate::error::{Error, Result};

/// Open knot vector of a univariate spline space.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Open uniform knot vector on [0, 1] with `elements` spans and simple
    /// interior knots (maximal smoothness C^{p-1}).
    pub fn open_uniform(degree: usize, elements: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("spline degree must be positive".into()));
        }
        if elements == 0 {
            return Err(Error::Config("at least one element is required".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|k| k as f64 / elements as f64));
        knots.extend(std::iter::repeat(1.0).take(degree + 1));
        Ok(Self { degree, knots })
    }

    /// Arbitrary open knot vector on [0, 1]. Interior multiplicities up to the
    /// degree are accepted.
    pub fn from_knots(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::Structure(format!("invalid knot vector: {msg}")));
        if degree == 0 {
            return bad("degree must be positive");
        }
        if knots.len() < 2 * (degree + 1) {
            return bad("too few knots");
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return bad("knots must be nondecreasing");
        }
        let n = knots.len();
        if knots[..=degree].iter().any(|&k| k != 0.0) || knots[n - degree - 1..].iter().any(|&k| k != 1.0) {
            return bad("knot vector must be open on [0, 1]");
        }
        let kv = Self { degree, knots };
        for b in &kv.breakpoints()[1..kv.breakpoints().len() - 1] {
            if kv.multiplicity(*b) > degree {
                return bad("interior multiplicity exceeds the degree");
            }
        }
        Ok(kv)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::with_capacity(self.knots.len());
        for &k in &self.knots {
            if out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn multiplicity(&self, x: f64) -> usize {
        self.knots.iter().filter(|&&k| k == x).count()
    }

    /// Knot span index `i` with `knots[i] <= x < knots[i + 1]`; `x = 1` maps
    /// to the last nonempty span.
    pub fn find_span(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(x));
        }
        let n = self.num_basis();
        if x >= self.knots[n] {
            return Ok(n - 1);
        }
        // first index with knots[idx] > x, minus one
        let idx = self.knots.partition_point(|&k| k <= x);
        Ok(idx - 1)
    }

    /// Span of element `e` (elements counted between distinct breakpoints).
    pub fn element_span(&self, e: usize) -> usize {
        let bp = self.breakpoints();
        let start = bp[e];
        self.knots.partition_point(|&k| k <= start) - 1
    }

    /// Values and derivatives of the `p + 1` basis functions that are nonzero
    /// on the span containing `x`.
    pub fn eval_basis(&self, x: f64, nders: usize) -> Result<BasisEval> {
        let span = self.find_span(x)?;
        Ok(self.eval_in_span(span, x, nders))
    }

    /// Evaluate the nonzero functions of a given span at `x`. The point is
    /// not required to lie inside the span, which lets callers evaluate the
    /// one-sided polynomial pieces on element boundaries.
    pub fn eval_in_span(&self, span: usize, x: f64, nders: usize) -> BasisEval {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; nders + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let top = nders.min(p);
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=top {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if rk >= 0 {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(top + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        BasisEval { span, ders }
    }

    /// Insert the midpoint of every nonempty span once.
    pub fn insert_midpoints(&self) -> Self {
        let bp = self.breakpoints();
        let mut knots = self.knots.clone();
        knots.extend(bp.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        Self {
            degree: self.degree,
            knots,
        }
    }
}

/// Output of [`KnotVector::eval_basis`]: `ders[k][j]` is the k-th derivative
/// of basis function `span - p + j`.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub span: usize,
    pub ders: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn first_index(&self, degree: usize) -> usize {
        self.span - degree
    }
}

/// Knot-insertion mask between two nested univariate spaces:
/// `coarse_j = sum_i rows[j][i].1 * fine_{rows[j][i].0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateRefinement {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub fine_dim: usize,
}

impl UnivariateRefinement {
    pub fn new(coarse: &KnotVector, fine: &KnotVector) -> Result<Self> {
        if coarse.degree != fine.degree {
            return Err(Error::Structure("spaces have different degrees".into()));
        }
        // fine knots must contain the coarse multiset
        let mut extra = Vec::new();
        let (mut i, mut j) = (0, 0);
        while j < fine.knots.len() {
            if i < coarse.knots.len() && coarse.knots[i] == fine.knots[j] {
                i += 1;
            } else {
                extra.push(fine.knots[j]);
            }
            j += 1;
        }
        if i != coarse.knots.len() {
            return Err(Error::Structure("spaces are not nested".into()));
        }

        let p = coarse.degree;
        let n = coarse.num_basis();
        // columns[j] = current coefficients of coarse function j
        let mut columns: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                c
            })
            .collect();
        let mut knots = coarse.knots.clone();
        for &x in &extra {
            let k = knots.partition_point(|&t| t <= x) - 1;
            for col in columns.iter_mut() {
                let mut next = vec![0.0; col.len() + 1];
                for (i, slot) in next.iter_mut().enumerate() {
                    *slot = if i + p <= k {
                        col[i]
                    } else if i > k {
                        col[i - 1]
                    } else {
                        let alpha = (x - knots[i]) / (knots[i + p] - knots[i]);
                        alpha * col[i] + (1.0 - alpha) * col[i - 1]
                    };
                }
                *col = next;
            }
            knots.insert(k + 1, x);
        }
        let rows = columns
            .into_iter()
            .map(|col| {
                col.into_iter()
                    .enumerate()
                    .filter(|(_, c)| *c != 0.0)
                    .collect()
            })
            .collect();
        Ok(Self {
            rows,
            fine_dim: fine.num_basis(),
        })
    }
}

/// Axis-aligned physical rectangle; the geometry map is the affine map from
/// the unit square onto it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub const UNIT: Rect = Rect {
        min: [0.0, 0.0],
        max: [1.0, 1.0],
    };

    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        if !(max[0] > min[0] && max[1] > min[1]) {
            return Err(Error::Config("domain rectangle must have positive extent".into()));
        }
        Ok(Self { min, max })
    }

    pub fn extent(&self, dir: usize) -> f64 {
        self.max[dir] - self.min[dir]
    }

    pub fn area(&self) -> f64 {
        self.extent(0) * self.extent(1)
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.min[0] + xi[0] * self.extent(0),
            self.min[1] + xi[1] * self.extent(1),
        ]
    }

    pub fn to_parametric(&self, x: [f64; 2]) -> [f64; 2] {
        [
            (x[0] - self.min[0]) / self.extent(0),
            (x[1] - self.min[1]) / self.extent(1),
        ]
    }
}

/// Mesh element of a tensor-product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub level: usize,
    pub index: [usize; 2],
    /// `[[xi_lo, xi_hi], [eta_lo, eta_hi]]`
    pub parametric: [[f64; 2]; 2],
    pub physical: [[f64; 2]; 2],
}

/// Tensor-product spline space of one hierarchical level.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpace {
    pub knots: [KnotVector; 2],
    pub level: usize,
    pub geometry: Rect,
}

impl TensorSpace {
    pub fn uniform(degree: usize, elements: [usize; 2], geometry: Rect) -> Result<Self> {
        Ok(Self {
            knots: [
                KnotVector::open_uniform(degree, elements[0])?,
                KnotVector::open_uniform(degree, elements[1])?,
            ],
            level: 0,
            geometry,
        })
    }

    pub fn degree(&self) -> usize {
        self.knots[0].degree()
    }

    pub fn num_basis(&self) -> [usize; 2] {
        [self.knots[0].num_basis(), self.knots[1].num_basis()]
    }

    pub fn dimension(&self) -> usize {
        let [a, b] = self.num_basis();
        a * b
    }

    pub fn num_elements(&self) -> [usize; 2] {
        [self.knots[0].num_elements(), self.knots[1].num_elements()]
    }

    pub fn dyadic_refine(&self) -> Self {
        Self {
            knots: [self.knots[0].insert_midpoints(), self.knots[1].insert_midpoints()],
            level: self.level + 1,
            geometry: self.geometry,
        }
    }

    /// Elements in lexicographic order, first direction fastest.
    pub fn elements(&self) -> Vec<Element> {
        let bx = self.knots[0].breakpoints();
        let by = self.knots[1].breakpoints();
        let mut out = Vec::with_capacity((bx.len() - 1) * (by.len() - 1));
        for j in 0..by.len() - 1 {
            for i in 0..bx.len() - 1 {
                let parametric = [[bx[i], bx[i + 1]], [by[j], by[j + 1]]];
                let lo = self.geometry.to_physical([bx[i], by[j]]);
                let hi = self.geometry.to_physical([bx[i + 1], by[j + 1]]);
                out.push(Element {
                    level: self.level,
                    index: [i, j],
                    parametric,
                    physical: [[lo[0], hi[0]], [lo[1], hi[1]]],
                });
            }
        }
        out
    }

    /// Evaluate a coefficient vector (first index fastest) at a parametric point.
    pub fn eval(&self, coeffs: &[f64], xi: [f64; 2]) -> Result<f64> {
        let p = self.degree();
        let ex = self.knots[0].eval_basis(xi[0], 0)?;
        let ey = self.knots[1].eval_basis(xi[1], 0)?;
        let nx = self.knots[0].num_basis();
        let (fx, fy) = (ex.first_index(p), ey.first_index(p));
        let mut s = 0.0;
        for (b, vy) in ey.ders[0].iter().enumerate() {
            for (a, vx) in ex.ders[0].iter().enumerate() {
                s += coeffs[(fx + a) + nx * (fy + b)] * vx * vy;
            }
        }
        Ok(s)
    }
}

/// Two-scale relation between a tensor space and its dyadic refinement.
#[derive(Clone, Debug)]
pub struct TwoScaleOperator {
    pub univariate: [UnivariateRefinement; 2],
    coarse_dims: [usize; 2],
    fine_dims: [usize; 2],
}

impl TwoScaleOperator {
    pub fn new(coarse: &TensorSpace, fine: &TensorSpace) -> Result<Self> {
        let univariate = [
            UnivariateRefinement::new(&coarse.knots[0], &fine.knots[0])?,
            UnivariateRefinement::new(&coarse.knots[1], &fine.knots[1])?,
        ];
        Ok(Self {
            univariate,
            coarse_dims: coarse.num_basis(),
            fine_dims: fine.num_basis(),
        })
    }

    /// Fine-level coefficients of the coarse tensor function `index`.
    pub fn row(&self, index: usize) -> Vec<(usize, f64)> {
        let (a, b) = (index % self.coarse_dims[0], index / self.coarse_dims[0]);
        let mut out = Vec::new();
        for &(j, cy) in &self.univariate[1].rows[b] {
            for &(i, cx) in &self.univariate[0].rows[a] {
                out.push((i + self.fine_dims[0] * j, cx * cy));
            }
        }
        out
    }

    /// Map coarse coefficients to fine coefficients of the same function.
    pub fn apply(&self, coarse: &[f64]) -> Vec<f64> {
        let mut fine = vec![0.0; self.fine_dims[0] * self.fine_dims[1]];
        for (k, &c) in coarse.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (i, w) in self.row(k) {
                fine[i] += c * w;
            }
        }
        fine
    }
}

/// Convenience wrapper used by evaluation code.
pub fn two_scale(coarse: &TensorSpace, fine: &TensorSpace) -> Result<TwoScaleOperator> {
    TwoScaleOperator::new(coarse, fine)
}
