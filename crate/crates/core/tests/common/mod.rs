//! Test-side oracles that do not share code paths with the library's
//! per-cell extraction.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thbch::adaptivity::{coarsen, refine, MarkSet};
use thbch::splines::two_scale;
use thbch::{Cell, HierarchicalMesh, HierarchicalSpace, Rect};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Whether the level-`l` cell `c` lies inside Omega^{l+1}.
fn inside_next(mesh: &HierarchicalMesh, c: Cell) -> bool {
    c.level + 1 < mesh.num_levels() && c.children().iter().all(|ch| mesh.in_domain(*ch))
}

fn support(mesh: &HierarchicalMesh, level: usize, a: usize, b: usize) -> Vec<Cell> {
    let p = mesh.degree();
    let [nx, ny] = mesh.dims(level);
    let mut out = Vec::new();
    for j in b.saturating_sub(p)..=b.min(ny - 1) {
        for i in a.saturating_sub(p)..=a.min(nx - 1) {
            out.push(Cell::new(level, i, j));
        }
    }
    out
}

/// Active functions from the support-inclusion definition:
/// `supp ⊆ Omega^l` and `supp ⊄ Omega^{l+1}`.
pub fn active_functions_oracle(mesh: &HierarchicalMesh) -> Vec<(usize, [usize; 2])> {
    let mut out = Vec::new();
    for l in 0..mesh.num_levels() {
        let [fx, fy] = mesh.level_space(l).num_basis();
        for b in 0..fy {
            for a in 0..fx {
                let s = support(mesh, l, a, b);
                if s.iter().all(|c| mesh.in_domain(*c)) && !s.iter().all(|c| inside_next(mesh, *c)) {
                    out.push((l, [a, b]));
                }
            }
        }
    }
    out
}

/// Finest-level tensor coefficients of every active (truncated)
/// hierarchical function, computed with global two-scale vectors.
pub fn global_representations(space: &HierarchicalSpace) -> Vec<Vec<f64>> {
    let mesh = space.mesh();
    let nlev = mesh.num_levels();
    let ops: Vec<_> = (0..nlev - 1)
        .map(|l| two_scale(mesh.level_space(l), mesh.level_space(l + 1)).unwrap())
        .collect();
    space
        .functions()
        .iter()
        .map(|f| {
            let nb = mesh.level_space(f.level).num_basis();
            let mut v = vec![0.0; nb[0] * nb[1]];
            v[f.index[0] + nb[0] * f.index[1]] = 1.0;
            for l in f.level..nlev - 1 {
                v = ops[l].apply(&v);
                if space.is_truncated() {
                    let nb = mesh.level_space(l + 1).num_basis();
                    for b in 0..nb[1] {
                        for a in 0..nb[0] {
                            if support(mesh, l + 1, a, b).iter().all(|c| mesh.in_domain(*c)) {
                                v[a + nb[0] * b] = 0.0;
                            }
                        }
                    }
                }
            }
            v
        })
        .collect()
}

/// Field value at a parametric point by brute-force summation of all
/// active functions.
pub fn brute_force_value(space: &HierarchicalSpace, reps: &[Vec<f64>], coeffs: &[f64], xi: [f64; 2]) -> f64 {
    let finest = space.mesh().level_space(space.mesh().num_levels() - 1);
    let mut total = vec![0.0; reps[0].len()];
    for (r, c) in reps.iter().zip(coeffs) {
        for (t, v) in total.iter_mut().zip(r) {
            *t += c * v;
        }
    }
    finest.eval(&total, xi).unwrap()
}

pub fn random_points(rng: &mut impl Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()
}

/// Random admissible mesh built with the library's refine on random marks.
pub fn random_mesh(rng: &mut impl Rng, degree: usize, base: usize, levels: usize, mu: usize, rounds: usize) -> HierarchicalMesh {
    let mut m = HierarchicalMesh::uniform(degree, [base, base], Rect::UNIT, levels, 0).unwrap();
    for _ in 0..rounds {
        let marks: MarkSet = m
            .active_cells()
            .into_iter()
            .filter(|c| c.level + 1 < levels && rng.gen_bool(0.15))
            .collect();
        refine(&mut m, &marks, mu).unwrap();
    }
    m
}

/// One random refine or coarsen mutation.
pub fn random_mutation(rng: &mut impl Rng, m: &mut HierarchicalMesh, mu: usize) -> bool {
    let levels = m.num_levels();
    if rng.gen_bool(0.5) {
        let marks: MarkSet = m
            .active_cells()
            .into_iter()
            .filter(|c| c.level + 1 < levels && rng.gen_bool(0.1))
            .collect();
        refine(m, &marks, mu).unwrap();
        true
    } else {
        let marks: MarkSet = m
            .active_cells()
            .into_iter()
            .filter(|c| c.level >= 1 && rng.gen_bool(0.7))
            .collect();
        let before = m.clone();
        let re = coarsen(m, &marks, mu).unwrap();
        // conservativeness
        for p in &re {
            assert!(p.children().iter().all(|c| marks.contains(c) && before.is_active(*c)));
        }
        false
    }
}

/// Gauss points and weights on `[a, b]` subdivided into `k` pieces with a
/// midpoint rule; used as a refined-quadrature oracle.
pub fn midpoint_rule(a: f64, b: f64, k: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / k as f64;
    (0..k).map(|i| (a + (i as f64 + 0.5) * h, h)).collect()
}
