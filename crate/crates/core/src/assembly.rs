//! Galerkin assembly of the Cahn-Hilliard operators.
//!
//! All integrals are evaluated cell by cell with a `(p+1) x (p+1)` Gauss rule
//! on the active cells of the hierarchical mesh; boundary integrals use the
//! `(p+1)`-point rule on the boundary edges of active cells. Every matrix is
//! built on the same cell-coupling sparsity pattern so that linear
//! combinations are plain value-array operations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{Cell, HierarchicalSpace};
use crate::quadrature::QuadratureRule;
use crate::sparse::{CsrMatrix, SparsityPattern};

/// Physical coefficients of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Interface coefficient lambda.
    pub lambda: f64,
    /// Double-well coefficients: `F(u) = sigma/4 (u^2 - nu/sigma)^2`.
    pub sigma: f64,
    pub nu: f64,
    /// Nitsche penalty constant epsilon_N.
    pub nitsche: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        // sigma = 0 is accepted: it gives the linear model used in tests
        if !(self.lambda > 0.0 && self.sigma >= 0.0 && self.nu > 0.0 && self.nitsche > 0.0) {
            return Err(Error::Config(format!("material parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Binodal value `sqrt(nu / sigma)`.
    pub fn binodal(&self) -> f64 {
        (self.nu / self.sigma).sqrt()
    }
}

/// Double-well potential and its first three derivatives at one value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleWell {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
    pub d3f: f64,
}

pub fn double_well(u: f64, params: &MaterialParams) -> DoubleWell {
    let MaterialParams { sigma, nu, .. } = *params;
    let f = if sigma > 0.0 {
        let w = u * u - nu / sigma;
        0.25 * sigma * w * w
    } else {
        // sigma -> 0 limit up to the divergent constant nu^2/(4 sigma)
        -0.5 * nu * u * u
    };
    DoubleWell {
        f,
        df: sigma * u * u * u - nu * u,
        d2f: 3.0 * sigma * u * u - nu,
        d3f: 6.0 * sigma * u,
    }
}

/// Basis data at the quadrature points of one active cell.
#[derive(Clone, Debug)]
struct CellQuad {
    functions: Vec<usize>,
    positions: Vec<usize>,
    /// physical quadrature weights
    weights: Vec<f64>,
    /// `nq x nf`, row-major per point
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
    laplacians: Vec<f64>,
    area: f64,
}

/// Basis data at the quadrature points of one boundary edge.
#[derive(Clone, Debug)]
struct EdgeQuad {
    cell: usize,
    weights: Vec<f64>,
    /// edge length, the Nitsche characteristic size
    h: f64,
    /// normal derivatives, `nq x nf`
    normal: Vec<f64>,
    laplacians: Vec<f64>,
}

/// Quadrature-point evaluations of the hierarchical basis, cached per mesh.
#[derive(Clone, Debug)]
pub struct BasisCache {
    pattern: Arc<SparsityPattern>,
    cells: Vec<CellQuad>,
    edges: Vec<EdgeQuad>,
    rule: QuadratureRule,
    domain_area: f64,
}

impl BasisCache {
    /// Cache with the default `(p+1)`-point rule.
    pub fn new(space: &HierarchicalSpace) -> Self {
        Self::with_rule(space, QuadratureRule::gauss(space.degree() + 1))
    }

    pub fn with_rule(space: &HierarchicalSpace, rule: QuadratureRule) -> Self {
        let n = space.num_functions();
        let pattern = Arc::new(SparsityPattern::from_groups(
            n,
            space.cells().iter().map(|c| c.functions.as_slice()),
        ));
        let mesh = space.mesh();
        let g = mesh.geometry();
        let mut cells = Vec::with_capacity(space.cells().len());
        let mut edges = Vec::new();
        for (k, cb) in space.cells().iter().enumerate() {
            let pb = mesh.parametric_box(cb.cell);
            let area = mesh.cell_area(cb.cell);
            let nf = cb.functions.len();
            let nq = rule.order() * rule.order();
            let mut cq = CellQuad {
                functions: cb.functions.clone(),
                positions: pattern.block_positions(&cb.functions),
                weights: Vec::with_capacity(nq),
                values: Vec::with_capacity(nq * nf),
                grads: Vec::with_capacity(nq * nf),
                laplacians: Vec::with_capacity(nq * nf),
                area,
            };
            for (eta, wy) in rule.mapped(pb[1][0], pb[1][1]) {
                for (xi, wx) in rule.mapped(pb[0][0], pb[0][1]) {
                    let lb = space.cell_basis(k, [xi, eta], 2);
                    cq.weights.push(wx * wy * g.area());
                    cq.values.extend_from_slice(&lb.values);
                    cq.grads.extend_from_slice(&lb.grads);
                    cq.laplacians.extend_from_slice(&lb.laplacians);
                }
            }
            cells.push(cq);

            for side in boundary_sides(mesh, cb.cell) {
                // side: 0 left, 1 right, 2 bottom, 3 top
                let (dir, fixed, normal) = match side {
                    0 => (1, pb[0][0], [-1.0, 0.0]),
                    1 => (1, pb[0][1], [1.0, 0.0]),
                    2 => (0, pb[1][0], [0.0, -1.0]),
                    _ => (0, pb[1][1], [0.0, 1.0]),
                };
                let len = (pb[dir][1] - pb[dir][0]) * g.extent(dir);
                let mut eq = EdgeQuad {
                    cell: k,
                    weights: Vec::new(),
                    h: len,
                    normal: Vec::new(),
                    laplacians: Vec::new(),
                };
                for (t, w) in rule.mapped(pb[dir][0], pb[dir][1]) {
                    let xi = if dir == 1 { [fixed, t] } else { [t, fixed] };
                    let lb = space.cell_basis(k, xi, 2);
                    eq.weights.push(w * g.extent(dir));
                    eq.normal
                        .extend(lb.grads.iter().map(|gr| gr[0] * normal[0] + gr[1] * normal[1]));
                    eq.laplacians.extend_from_slice(&lb.laplacians);
                }
                edges.push(eq);
            }
        }
        Self {
            pattern,
            cells,
            edges,
            rule,
            domain_area: g.area(),
        }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn num_functions(&self) -> usize {
        self.pattern.dim()
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn domain_area(&self) -> f64 {
        self.domain_area
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Per-cell `(integral of u, integral of |grad u|, cell area)`.
    pub fn cell_integrals(&self, u: &[f64]) -> Vec<(f64, f64, f64)> {
        self.cells
            .iter()
            .map(|cq| {
                let nf = cq.functions.len();
                let mut iu = 0.0;
                let mut ig = 0.0;
                for (q, &w) in cq.weights.iter().enumerate() {
                    let (val, grad) = field_at(cq, q, nf, u);
                    iu += w * val;
                    ig += w * grad[0].hypot(grad[1]);
                }
                (iu, ig, cq.area)
            })
            .collect()
    }
}

fn boundary_sides(mesh: &crate::hierarchy::HierarchicalMesh, c: Cell) -> Vec<usize> {
    let [nx, ny] = mesh.dims(c.level);
    let mut s = Vec::new();
    if c.i == 0 {
        s.push(0);
    }
    if c.i + 1 == nx {
        s.push(1);
    }
    if c.j == 0 {
        s.push(2);
    }
    if c.j + 1 == ny {
        s.push(3);
    }
    s
}

#[inline]
fn field_at(cq: &CellQuad, q: usize, nf: usize, u: &[f64]) -> (f64, [f64; 2]) {
    let vals = &cq.values[q * nf..(q + 1) * nf];
    let grads = &cq.grads[q * nf..(q + 1) * nf];
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for (k, &f) in cq.functions.iter().enumerate() {
        let c = u[f];
        v += c * vals[k];
        g[0] += c * grads[k][0];
        g[1] += c * grads[k][1];
    }
    (v, g)
}

pub fn assemble_mass(cache: &BasisCache) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for cq in &cache.cells {
        let nf = cq.functions.len();
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in cq.weights.iter().enumerate() {
            let v = &cq.values[q * nf..(q + 1) * nf];
            for a in 0..nf {
                let wa = w * v[a];
                for b in 0..nf {
                    block[a * nf + b] += wa * v[b];
                }
            }
        }
        m.add_block(&cq.positions, &block);
    }
    m
}

/// Gram matrix of gradients, `int grad N_i . grad N_j`.
pub fn assemble_gradient_gram(cache: &BasisCache) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for cq in &cache.cells {
        let nf = cq.functions.len();
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in cq.weights.iter().enumerate() {
            let g = &cq.grads[q * nf..(q + 1) * nf];
            for a in 0..nf {
                for b in 0..nf {
                    block[a * nf + b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        m.add_block(&cq.positions, &block);
    }
    m
}

/// Boundary normal-derivative penalty `int_dOmega (dN_i/dn) h eps (dN_j/dn) ds`.
pub fn assemble_normal_penalty(cache: &BasisCache, eps: f64) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for eq in &cache.edges {
        let cq = &cache.cells[eq.cell];
        let nf = cq.functions.len();
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in eq.weights.iter().enumerate() {
            let dn = &eq.normal[q * nf..(q + 1) * nf];
            let s = w * eq.h * eps;
            for a in 0..nf {
                for b in 0..nf {
                    block[a * nf + b] += s * dn[a] * dn[b];
                }
            }
        }
        m.add_block(&cq.positions, &block);
    }
    m
}

/// The linear fourth-order and boundary operators.
#[derive(Clone, Debug)]
pub struct StiffnessTerms {
    /// `int lambda lap N_i lap N_j`
    pub laplacian: CsrMatrix,
    /// `int_dOmega (dN_i/dn) lambda lap N_j ds`
    pub boundary: CsrMatrix,
    /// `int_dOmega (dN_i/dn) h eps_N (dN_j/dn) ds`
    pub nitsche: CsrMatrix,
}

pub fn assemble_stiffness_terms(cache: &BasisCache, params: &MaterialParams) -> StiffnessTerms {
    let mut lap = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for cq in &cache.cells {
        let nf = cq.functions.len();
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in cq.weights.iter().enumerate() {
            let l = &cq.laplacians[q * nf..(q + 1) * nf];
            let s = w * params.lambda;
            for a in 0..nf {
                for b in 0..nf {
                    block[a * nf + b] += s * l[a] * l[b];
                }
            }
        }
        lap.add_block(&cq.positions, &block);
    }
    let mut bnd = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for eq in &cache.edges {
        let cq = &cache.cells[eq.cell];
        let nf = cq.functions.len();
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in eq.weights.iter().enumerate() {
            let dn = &eq.normal[q * nf..(q + 1) * nf];
            let l = &eq.laplacians[q * nf..(q + 1) * nf];
            let s = w * params.lambda;
            for a in 0..nf {
                for b in 0..nf {
                    block[a * nf + b] += s * dn[a] * l[b];
                }
            }
        }
        bnd.add_block(&cq.positions, &block);
    }
    StiffnessTerms {
        laplacian: lap,
        boundary: bnd,
        nitsche: assemble_normal_penalty(cache, params.nitsche),
    }
}

/// Nonlinear vector `Fbar_i = int F''(u) grad N_i . grad u` and its Jacobian
/// `K_F`, both at the coefficient vector `u`.
pub fn assemble_nonlinear(cache: &BasisCache, params: &MaterialParams, u: &[f64]) -> (Vec<f64>, CsrMatrix) {
    let mut fbar = vec![0.0; cache.num_functions()];
    let mut kf = CsrMatrix::zeros(Arc::clone(&cache.pattern));
    for cq in &cache.cells {
        let nf = cq.functions.len();
        let mut fl = vec![0.0; nf];
        let mut block = vec![0.0; nf * nf];
        for (q, &w) in cq.weights.iter().enumerate() {
            let (val, gu) = field_at(cq, q, nf, u);
            let dw = double_well(val, params);
            let vals = &cq.values[q * nf..(q + 1) * nf];
            let grads = &cq.grads[q * nf..(q + 1) * nf];
            for a in 0..nf {
                let ga = grads[a];
                let gdu = ga[0] * gu[0] + ga[1] * gu[1];
                fl[a] += w * dw.d2f * gdu;
                let s3 = w * dw.d3f * gdu;
                let s2 = w * dw.d2f;
                for b in 0..nf {
                    let gb = grads[b];
                    block[a * nf + b] += s2 * (ga[0] * gb[0] + ga[1] * gb[1]) + s3 * vals[b];
                }
            }
        }
        for (k, &f) in cq.functions.iter().enumerate() {
            fbar[f] += fl[k];
        }
        kf.add_block(&cq.positions, &block);
    }
    (fbar, kf)
}

/// Nonlinear vector only.
pub fn assemble_fbar(cache: &BasisCache, params: &MaterialParams, u: &[f64]) -> Vec<f64> {
    let mut fbar = vec![0.0; cache.num_functions()];
    for cq in &cache.cells {
        let nf = cq.functions.len();
        for (q, &w) in cq.weights.iter().enumerate() {
            let (val, gu) = field_at(cq, q, nf, u);
            let d2f = double_well(val, params).d2f;
            let grads = &cq.grads[q * nf..(q + 1) * nf];
            for (a, &f) in cq.functions.iter().enumerate() {
                fbar[f] += w * d2f * (grads[a][0] * gu[0] + grads[a][1] * gu[1]);
            }
        }
    }
    fbar
}

/// Ginzburg-Landau free energy `int F(u) + lambda/2 |grad u|^2`.
pub fn free_energy(cache: &BasisCache, params: &MaterialParams, u: &[f64]) -> f64 {
    let mut e = 0.0;
    for cq in &cache.cells {
        let nf = cq.functions.len();
        for (q, &w) in cq.weights.iter().enumerate() {
            let (val, g) = field_at(cq, q, nf, u);
            e += w * (double_well(val, params).f + 0.5 * params.lambda * (g[0] * g[0] + g[1] * g[1]));
        }
    }
    e
}

/// `int u dx`.
pub fn total_mass(cache: &BasisCache, u: &[f64]) -> f64 {
    cache.cell_integrals(u).iter().map(|c| c.0).sum()
}

/// Operators of one mesh, reused while the mesh is unchanged.
#[derive(Clone, Debug)]
pub struct SystemOperators {
    pub cache: BasisCache,
    pub mass: CsrMatrix,
    pub stiffness: StiffnessTerms,
    /// `K_lap - K_bnd - K_bnd^T + M_N`
    pub linear: CsrMatrix,
    pub params: MaterialParams,
}

impl SystemOperators {
    pub fn assemble(space: &HierarchicalSpace, params: &MaterialParams) -> Self {
        let cache = BasisCache::new(space);
        let mass = assemble_mass(&cache);
        let stiffness = assemble_stiffness_terms(&cache, params);
        let mut linear = stiffness.laplacian.clone();
        linear.axpy(-1.0, &stiffness.boundary);
        linear.axpy(-1.0, &stiffness.boundary.transpose());
        linear.axpy(1.0, &stiffness.nitsche);
        Self {
            cache,
            mass,
            stiffness,
            linear,
            params: *params,
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

/// `R = M v + Fbar(u) + (K_lap - K_bnd - K_bnd^T + M_N) u`
pub fn residual(ops: &SystemOperators, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut r = assemble_fbar(&ops.cache, &ops.params, u);
    ops.mass.matvec_add(1.0, v, &mut r);
    ops.linear.matvec_add(1.0, u, &mut r);
    r
}
