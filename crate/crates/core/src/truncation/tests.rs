use super::*;
use crate::grid::ExtensionMode;

fn square(n: usize) -> GridDomain {
    GridDomain::cube(2, -1.0, 1.0, n).unwrap()
}

fn affine(d: &GridDomain, a: [f64; 2]) -> ScalarField {
    ScalarField::from_fn(d, |x| a[0] * x[0] + a[1] * x[1] + 0.25).unwrap()
}

fn power(d: &GridDomain, beta: f64) -> ScalarField {
    ScalarField::from_fn(d, |x| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(beta)).unwrap()
}

#[test]
fn constant_gradient_gives_constant_maximal() {
    let d = square(16);
    let f = affine(&d, [0.6, 0.8]);
    let m = restricted_maximal(&gradient(&f), &dyadic_radii(&d)).unwrap();
    for v in m.values.values() {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
    assert!(matches!(restricted_maximal(&gradient(&f), &[]), Err(TruncationError::EmptyLadder)));
}

#[test]
fn maximal_of_identity_field_at_origin() {
    // mean of |y| over B(0, 1) in the plane is 2/3
    let d = square(64);
    let g = VectorField::new(vec![
        ScalarField::from_fn(&d, |x| x[0]).unwrap(),
        ScalarField::from_fn(&d, |x| x[1]).unwrap(),
    ])
    .unwrap();
    let radii: Vec<f64> = dyadic_radii(&d).into_iter().filter(|r| *r <= 1.0).collect();
    let m = restricted_maximal(&g, &radii).unwrap();
    let at0 = crate::grid::ball_average(&g.norm_field(), &[1e-9, 1e-9], 1.0).unwrap();
    assert!((at0 - 2.0 / 3.0).abs() < 0.02, "{at0}");
    let c = d.locate(&[1e-9, 1e-9]).unwrap();
    assert!((m.values.get(c) - 2.0 / 3.0).abs() < 0.03, "{}", m.values.get(c));
}

#[test]
fn larger_ladder_never_decreases_maximal() {
    let d = square(32);
    let f = power(&d, 1.5);
    let all = dyadic_radii(&d);
    let small = restricted_maximal(&gradient(&f), &all[..3]).unwrap();
    let big = restricted_maximal(&gradient(&f), &all).unwrap();
    for (a, b) in small.values.values().iter().zip(big.values.values()) {
        assert!(b >= a);
    }
}

#[test]
fn affine_truncation_sets_are_all_or_nothing() {
    let d = square(16);
    let m = restricted_maximal(&gradient(&affine(&d, [0.6, 0.8])), &dyadic_radii(&d)).unwrap();
    assert_eq!(truncation_set(&m, 1.0 + 1e-9).unwrap().count(), d.len());
    assert!(truncation_set(&m, 0.99).unwrap().is_empty());
    assert!(matches!(truncation_set(&m, 0.0), Err(TruncationError::InvalidAlpha(_))));
}

#[test]
fn sets_nest_and_scale() {
    let d = square(32);
    let f = power(&d, 1.5);
    let g = gradient(&f);
    let radii = dyadic_radii(&d);
    let m = restricted_maximal(&g, &radii).unwrap();
    let m2 = restricted_maximal(&g.scaled(2.0).unwrap(), &radii).unwrap();
    let alphas = [0.3, 0.6, 0.9, 1.2, 1.5];
    let sets: Vec<RegionMask> = alphas.iter().map(|&a| truncation_set(&m, a).unwrap()).collect();
    for w in sets.windows(2) {
        assert!(w[0].is_subset_of(&w[1]));
    }
    for (a, s) in alphas.iter().zip(&sets) {
        assert_eq!(mask_closure(s), *s);
        assert_eq!(truncation_set(&m2, 2.0 * a).unwrap(), *s);
    }
}

#[test]
fn telescoping_for_affine_is_flat() {
    // x is a cell center, where the partial-cell stencil is symmetric
    let d = square(64);
    let f = affine(&d, [0.3, -0.4]).with_extension(ExtensionMode::Reflect);
    let m = restricted_maximal(&gradient(&f), &dyadic_radii(&d)).unwrap();
    let (fstar, _) = representative(&f, None).unwrap();
    let rep = telescoping_defect(&f, &fstar, &m, &[0.109375, 0.046875], 0.4, 1.0, 3).unwrap();
    assert!(rep.max_defect() < 1e-10, "{rep:?}");
    assert!(matches!(
        telescoping_defect(&f, &fstar, &m, &[0.109375, 0.046875], 0.4, 0.1, 3),
        Err(TruncationError::PointNotInSet(_))
    ));
    assert!(matches!(
        telescoping_defect(&f, &fstar, &m, &[0.109375, 0.046875], 0.4, 1.0, 8),
        Err(TruncationError::LadderTooDeep { .. })
    ));
}

#[test]
fn telescoping_sum_reproduces_endpoint_gap() {
    let d = square(128);
    let f = ScalarField::from_fn(&d, |x| (2.0 * x[0]).sin() * x[1] + x[1] * x[1]).unwrap();
    let m = restricted_maximal(&gradient(&f), &dyadic_radii(&d)).unwrap();
    let (fstar, flagged) = representative(&f, None).unwrap();
    assert!(flagged.is_empty());
    let x = [0.2109375, -0.1015625];
    let rep = telescoping_defect(&f, &fstar, &m, &x, 0.25, 4.0, 4).unwrap();
    let r_k = 0.25 / 16.0;
    // the remaining tail beyond the ladder is O(r_K^2)
    assert!((rep.telescoped() - rep.endpoint_gap).abs() < 4.0 * r_k * r_k + 1e-3 * r_k, "{rep:?}");
    assert!(rep.max_defect() < 1.0);
}

#[test]
fn lipschitz_of_affine_is_exact() {
    let d = square(32);
    let f = affine(&d, [0.3, -0.4]);
    let full = RegionMask::full(&d);
    let none = RegionMask::empty(&d);
    let e = lipschitz_constant_on_mask(&f, &full, &none, 10, 0).unwrap();
    assert!(e.exhaustive);
    assert!((e.constant - 0.5).abs() < 1e-12, "{}", e.constant);
    let c = ScalarField::constant(&d, 3.0);
    assert_eq!(lipschitz_constant_on_mask(&c, &full, &none, 10, 0).unwrap().constant, 0.0);
    assert!(matches!(lipschitz_constant_on_mask(&c, &none, &none, 10, 0), Err(TruncationError::EmptyMask)));
}

#[test]
fn sampled_lipschitz_is_seed_deterministic() {
    let d = square(80);
    let f = power(&d, 1.5);
    let full = RegionMask::full(&d);
    let none = RegionMask::empty(&d);
    let a = lipschitz_constant_on_mask(&f, &full, &none, 5000, 7).unwrap();
    let b = lipschitz_constant_on_mask(&f, &full, &none, 5000, 7).unwrap();
    assert!(!a.exhaustive);
    assert_eq!(a, b);
    assert!(a.constant <= 1.5 * 2f64.sqrt().sqrt() + 1e-9);
}

#[test]
fn ladder_for_affine_reports_slope() {
    let d = square(64);
    let f = affine(&d, [0.3, -0.4]);
    let lad = truncation_ladder(&f, &[0.4, 0.5 + 1e-9, 1.0], &LadderOptions::default()).unwrap();
    assert!(lad.is_nested());
    assert!(lad.masks[0].is_empty());
    assert_eq!(lad.lipschitz[0], 0.0);
    assert!((lad.lipschitz[1] - 0.5).abs() < 1e-10, "{:?}", lad.lipschitz);
    assert!(matches!(
        truncation_ladder(&f, &[1.0, 0.5], &LadderOptions::default()),
        Err(TruncationError::AlphasNotIncreasing)
    ));
}

#[test]
fn cutoffs_are_one_inside_and_vanish_outside() {
    let d = square(64);
    let boxes = NestedBoxes::new(&d, 3);
    for k in 1..=3 {
        let z = boxes.cutoff(&d, k);
        let inner = boxes.closed_mask(&d, k);
        for i in 0..d.len() {
            let x = d.center(i);
            let dist = (0..2).map(|a| (x[a] + 1.0).min(1.0 - x[a])).fold(f64::INFINITY, f64::min);
            if inner.contains(i) {
                assert_eq!(z.get(i), 1.0);
            }
            if dist <= boxes.margins[k] {
                assert_eq!(z.get(i), 0.0);
            }
        }
    }
}

#[test]
fn exhaustion_of_smooth_function() {
    let d = square(32);
    let f = ScalarField::from_fn(&d, |x| (x[0] + 0.5 * x[1]).sin()).unwrap();
    let lad = exhaustion(&f, None, 3, 2.0, &LadderOptions::default()).unwrap();
    assert!(lad.is_nested());
    for m in &lad.masks {
        assert_eq!(mask_closure(m), *m);
    }
    // with the automatic thresholds every cell of closure(Ω_l) is kept
    let boxes = NestedBoxes::new(&d, 3);
    for (l, m) in lad.masks.iter().enumerate() {
        assert_eq!(m.count(), boxes.closed_mask(&d, l + 1).count());
    }
    assert!(matches!(
        exhaustion(&f, Some(&[1.0, 2.0]), 3, 2.0, &LadderOptions::default()),
        Err(TruncationError::LadderShorterThanNesting { alphas: 2, nested: 3 })
    ));
}

#[test]
fn chebyshev_check_trivial_cases() {
    let d = square(16);
    let f = power(&d, 1.5);
    let c = chebyshev_bound_check(&f, 10.0, 0.0, 2.0);
    assert_eq!(c.lhs, 0.0);
    assert_eq!(c.ratio, 0.0);
    assert!(c.rhs_without_constant > 0.0);
}

#[test]
fn luzin_selection_trivial_cases() {
    let d = square(32);
    let f = ScalarField::from_fn(&d, |x| x[0] * x[1]).unwrap();
    let lad = truncation_ladder(&f, &[10.0], &LadderOptions::default()).unwrap();
    let b = RegionMask::segment(&d, &[-0.5, 0.01], &[0.5, 0.01]);
    let cfg = CapacityConfig::default();
    let s = luzin_select(&b, &lad, 1e-3, LuzinMode::Hausdorff, &cfg).unwrap();
    assert_eq!(s.selected, b);
    assert_eq!(s.residual, 0.0);
    let vacuous = luzin_select(&b, &lad, 100.0, LuzinMode::Hausdorff, &cfg).unwrap();
    assert_eq!(vacuous.level, 0);
    assert!(vacuous.selected.is_empty());
    let tiny = truncation_ladder(&f, &[1e-6], &LadderOptions::default()).unwrap();
    assert!(matches!(
        luzin_select(&b, &tiny, 1e-3, LuzinMode::Hausdorff, &cfg),
        Err(TruncationError::ResidualNeverBelowEps { .. })
    ));
    assert!(matches!(
        luzin_select(&b, &tiny, 1e-3, LuzinMode::Capacity { p: 2.0 }, &cfg),
        Err(TruncationError::PreconditionUnmet(_))
    ));
}

#[test]
fn quasi_cover_for_smooth_function_is_empty() {
    let d = square(32);
    let f = ScalarField::from_fn(&d, |x| 0.5 * x[0] - 0.25 * x[1] * x[1]).unwrap();
    let q = quasi_lipschitz_cover(&f, 1.0, 2.0, None, &LadderOptions::default()).unwrap();
    assert!(q.cover.is_empty());
    assert_eq!(q.capacity.value, 0.0);
    // global constant of f on the measured core
    let core = RegionMask::core(&d, REPRESENTATIVE_COLLAR);
    let (fstar, _) = representative(&f, None).unwrap();
    let g = lipschitz_constant_on_mask(&fstar, &core, &RegionMask::empty(&d), 200_000, 0).unwrap();
    assert_eq!(q.lipschitz, g.constant);
}
