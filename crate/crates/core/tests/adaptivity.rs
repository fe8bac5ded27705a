use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thbch::adaptivity::{
    coarsen, coarsen_neighborhood, indicator_field, indicator_gradient, mark, refine, refine_neighborhood,
    support_extension,
};
use thbch::projection::l2_project;
use thbch::{
    check_admissible, BasisCache, Cell, HierarchicalMesh, HierarchicalSpace, IndicatorField, IndicatorKind, MarkSet,
    Rect,
};

mod common;

/// Union of the supports of level-`k` tensor functions nonzero on `q`, by
/// explicit enumeration of the functions.
fn support_extension_oracle(mesh: &HierarchicalMesh, q: Cell, k: usize) -> BTreeSet<Cell> {
    let p = mesh.degree();
    let dims = mesh.dims(k);
    let nb = mesh.level_space(k).num_basis();
    let region = |a: usize| -> (usize, usize) {
        if k <= q.level {
            (a >> (q.level - k), a >> (q.level - k))
        } else {
            let s = k - q.level;
            (a << s, ((a + 1) << s) - 1)
        }
    };
    let (x0, x1) = region(q.i);
    let (y0, y1) = region(q.j);
    let nonzero = |f: usize, c0: usize, c1: usize| (c0..=c1).any(|e| e <= f && f <= e + p);
    let mut out = BTreeSet::new();
    for fb in 0..nb[1] {
        for fa in 0..nb[0] {
            if nonzero(fa, x0, x1) && nonzero(fb, y0, y1) {
                for j in fb.saturating_sub(p)..=fb.min(dims[1] - 1) {
                    for i in fa.saturating_sub(p)..=fa.min(dims[0] - 1) {
                        out.insert(Cell::new(k, i, j));
                    }
                }
            }
        }
    }
    out
}

fn overlaps(m: &HierarchicalMesh, a: Cell, b: Cell) -> bool {
    let (ba, bb) = (m.parametric_box(a), m.parametric_box(b));
    let tol = 1e-14;
    (0..2).all(|d| ba[d][0] < bb[d][1] - tol && bb[d][0] < ba[d][1] - tol)
}

fn all_cells(m: &HierarchicalMesh, level: usize) -> Vec<Cell> {
    let [nx, ny] = m.dims(level);
    (0..ny).flat_map(|j| (0..nx).map(move |i| Cell::new(level, i, j))).collect()
}

#[test]
fn support_extension_matches_enumeration() {
    let m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 4, 0).unwrap();
    for q in [Cell::new(1, 0, 0), Cell::new(1, 3, 4), Cell::new(2, 15, 7), Cell::new(0, 2, 3)] {
        for k in 0..4 {
            let got: BTreeSet<Cell> = support_extension(&m, q, k).into_iter().collect();
            assert_eq!(got, support_extension_oracle(&m, q, k), "Q={q:?} k={k}");
        }
    }
}

#[test]
fn neighborhoods_match_brute_force() {
    let mut rng = common::rng(21);
    for mu in [2, 3] {
        for _ in 0..3 {
            let m = common::random_mesh(&mut rng, 2, 4, 4, mu, 3);
            for q in m.active_cells() {
                let l = q.level;
                if l + 1 >= mu {
                    let ext = support_extension_oracle(&m, q, l + 2 - mu);
                    let expected: Vec<Cell> = all_cells(&m, l + 1 - mu)
                        .into_iter()
                        .filter(|c| m.is_active(*c) && ext.iter().any(|e| overlaps(&m, *c, *e)))
                        .collect();
                    let mut got = refine_neighborhood(&m, q, mu);
                    got.sort();
                    let mut expected = expected;
                    expected.sort();
                    assert_eq!(got, expected, "N_r of {q:?}, mu={mu}");
                }
                if let Some(parent) = q.parent() {
                    let target = parent.level + mu;
                    if target < m.num_levels() {
                        let ext = support_extension_oracle(&m, parent, parent.level + 1);
                        let expected: Vec<Cell> = all_cells(&m, target)
                            .into_iter()
                            .filter(|c| m.in_domain(*c) && ext.iter().any(|e| overlaps(&m, *c, *e)))
                            .collect();
                        let mut got = coarsen_neighborhood(&m, parent, mu);
                        got.sort();
                        let mut expected = expected;
                        expected.sort();
                        assert_eq!(got, expected, "N_c of {parent:?}, mu={mu}");
                    }
                }
            }
        }
    }
}

#[test]
fn ungraded_refinement_is_detected() {
    // nested square blocks refined without grading
    let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 3, 0).unwrap();
    for (level, range) in [(0, 1..=2), (1, 3..=4)] {
        for j in range.clone() {
            for i in range.clone() {
                m.refine_cell(Cell::new(level, i, j)).unwrap();
            }
        }
    }
    let s = HierarchicalSpace::new(m, true).unwrap();
    let rep = check_admissible(&s, 2);
    assert!(!rep.admissible);
    assert!(rep.offending.iter().all(|&(_, lo, hi)| hi - lo + 1 > 2));
    assert!(check_admissible(&s, 3).admissible);
}

#[test]
fn graded_refinement_cascades() {
    let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 4, 0).unwrap();
    for c in [Cell::new(0, 1, 1), Cell::new(1, 2, 2), Cell::new(2, 4, 4)] {
        refine(&mut m, &MarkSet::from_iter([c]), 2).unwrap();
        assert!(m.is_refined(c));
        let s = HierarchicalSpace::new(m.clone(), true).unwrap();
        assert!(check_admissible(&s, 2).admissible);
    }
    // the last refinement forced coarser neighbours to refine
    assert!(m.active_counts_per_level()[0] < 15);
}

#[test]
fn invalid_marks_are_rejected() {
    let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 3, 0).unwrap();
    assert!(refine(&mut m, &MarkSet::from_iter([Cell::new(1, 0, 0)]), 2).is_err());
    assert!(refine(&mut m, &MarkSet::from_iter([Cell::new(0, 0, 0)]), 1).is_err());
    assert!(coarsen(&mut m, &MarkSet::from_iter([Cell::new(0, 0, 0)]), 2).is_err());
}

#[test]
fn coarsening_requires_all_children_marked() {
    let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 2, 0).unwrap();
    let p = Cell::new(0, 2, 2);
    m.refine_cell(p).unwrap();
    let kids = p.children();
    let partial: MarkSet = kids[..3].iter().copied().collect();
    assert!(coarsen(&mut m, &partial, 2).unwrap().is_empty());
    let full: MarkSet = kids.iter().copied().collect();
    assert_eq!(coarsen(&mut m, &full, 2).unwrap(), vec![p]);
    assert!(m.is_active(p));
}

#[test]
fn coarsening_keeps_grading() {
    // a graded three-level refinement: coarsening the middle level alone must be refused
    let mut m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 4, 0).unwrap();
    refine(&mut m, &MarkSet::from_iter([Cell::new(0, 1, 1)]), 2).unwrap();
    refine(&mut m, &MarkSet::from_iter([Cell::new(1, 2, 2)]), 2).unwrap();
    refine(&mut m, &MarkSet::from_iter([Cell::new(2, 4, 4)]), 2).unwrap();
    let level1: MarkSet = m.active_cells().into_iter().filter(|c| c.level == 1).collect();
    coarsen(&mut m, &level1, 2).unwrap();
    let s = HierarchicalSpace::new(m.clone(), true).unwrap();
    assert!(check_admissible(&s, 2).admissible);
    assert!(m.is_refined(Cell::new(2, 4, 4)));
    assert!(m.is_refined(Cell::new(0, 1, 1)));
}

fn tanh_space() -> (HierarchicalSpace, Vec<f64>) {
    let mut m = HierarchicalMesh::uniform(2, [16, 16], Rect::UNIT, 2, 0).unwrap();
    refine(&mut m, &MarkSet::from_iter([Cell::new(0, 7, 7), Cell::new(0, 8, 8)]), 2).unwrap();
    let s = HierarchicalSpace::new(m, true).unwrap();
    // the linear term keeps |grad u| away from zero, where it is not smooth
    let u = l2_project(&s, |x| 0.9 * ((x[0] + 0.3 * x[1] - 0.55) / 0.1).tanh() + 0.2 * x[1]).unwrap();
    (s, u)
}

/// Cell averages of value and gradient norm by a 40x40 midpoint rule.
fn cell_average_oracle(s: &HierarchicalSpace, u: &[f64], c: Cell) -> (f64, f64) {
    let b = s.mesh().parametric_box(c);
    let rx = common::midpoint_rule(b[0][0], b[0][1], 40);
    let ry = common::midpoint_rule(b[1][0], b[1][1], 40);
    let pts: Vec<[f64; 2]> = ry.iter().flat_map(|&(y, _)| rx.iter().map(move |&(x, _)| [x, y])).collect();
    let vals = s.eval_field(u, &pts, 1).unwrap();
    let n = vals.len() as f64;
    let mean = vals.iter().map(|f| f.value).sum::<f64>() / n;
    let grad = vals.iter().map(|f| f.grad[0].hypot(f.grad[1])).sum::<f64>() / n;
    (mean, grad)
}

#[test]
fn indicators_match_refined_quadrature() {
    let (s, u) = tanh_space();
    let cache = BasisCache::new(&s);
    let fi = indicator_field(&s, &cache, &u, 1.0);
    let gi = indicator_gradient(&s, &cache, &u);
    assert_eq!(fi.kind, IndicatorKind::Field);
    for (k, cb) in s.cells().iter().enumerate() {
        assert_eq!(fi.cells[k], cb.cell);
        let (mean, grad) = cell_average_oracle(&s, &u, cb.cell);
        assert!((fi.values[k] - (1.0 - mean.abs())).abs() < 1e-3, "{:?} {} {}", cb.cell, fi.values[k], mean);
        assert!((gi.values[k] - grad).abs() < 1e-3 * grad.max(1.0), "{:?} {} {}", cb.cell, gi.values[k], grad);
    }
}

#[test]
fn marking_splits_on_threshold() {
    let m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 2, 0).unwrap();
    let mut m1 = m.clone();
    m1.refine_cell(Cell::new(0, 0, 0)).unwrap();
    let cells = m1.active_cells();
    let values: Vec<f64> = cells.iter().map(|c| if c.i % 2 == 0 { 0.5 } else { 0.1 }).collect();
    let ind = IndicatorField {
        kind: IndicatorKind::Field,
        cells: cells.clone(),
        values,
    };
    let (r, c) = mark(&ind, 0.1, &m1);
    for cell in &cells {
        let above = cell.i % 2 == 0;
        assert_eq!(r.contains(cell), above && cell.level == 0);
        assert_eq!(c.contains(cell), !above && cell.level == 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sequences_stay_admissible(seed in any::<u64>(), mu in 2usize..4, p in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = HierarchicalMesh::uniform(p, [8, 8], Rect::UNIT, 4, 0).unwrap();
        for _ in 0..6 {
            let before = m.clone();
            let refined = common::random_mutation(&mut rng, &mut m, mu);
            if refined {
                // refinement never removes refined cells
                for l in 0..before.num_levels() {
                    for c in all_cells(&before, l) {
                        if before.is_refined(c) {
                            prop_assert!(m.is_refined(c));
                        }
                    }
                }
            }
            let s = HierarchicalSpace::new(m.clone(), true).unwrap();
            let rep = check_admissible(&s, mu);
            prop_assert!(rep.admissible, "offending {:?}", rep.offending);
            prop_assert!((m.active_area() - 1.0).abs() < 1e-12);
            let ones = vec![1.0; s.num_functions()];
            let pts = common::random_points(&mut rng, 20);
            for fp in s.eval_field(&ones, &pts, 0).unwrap() {
                prop_assert!((fp.value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn marked_cells_are_refined(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = common::random_mesh(&mut rng, 2, 4, 4, 2, 2);
        let marks: MarkSet = m.active_cells().into_iter().filter(|c| c.level < 3 && rng.gen_bool(0.2)).collect();
        refine(&mut m, &marks, 2).unwrap();
        for c in marks.iter() {
            prop_assert!(m.is_refined(*c));
        }
    }
}
