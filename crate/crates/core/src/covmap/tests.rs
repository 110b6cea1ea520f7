use super::*;

fn square(n: usize) -> GridDomain {
    GridDomain::cube(2, -1.0, 1.0, n).unwrap()
}

fn bump(d: &GridDomain, c: [f64; 2], r: f64) -> ScalarField {
    ScalarField::from_fn(d, |y| {
        let s = ((y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2)) / (r * r);
        if s < 1.0 { (1.0 - s).powi(3) } else { 0.0 }
    })
    .unwrap()
}

#[test]
fn analytic_tags_round_trip() {
    for m in [
        AnalyticMap::Identity,
        AnalyticMap::Scaling(2.0),
        AnalyticMap::Fold,
        AnalyticMap::ComplexSquare,
        AnalyticMap::RadialStretch(0.5),
    ] {
        assert_eq!(AnalyticMap::parse(&m.as_str()), Some(m));
    }
    assert_eq!(AnalyticMap::parse("twist"), None);
}

#[test]
fn jacobian_of_corpus_maps() {
    let d = square(32);
    let id = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    assert!(jacobian(&id).values().iter().all(|j| (j - 1.0).abs() < 1e-12));
    let sq = SobolevMap::from_analytic(&d, AnalyticMap::ComplexSquare).unwrap();
    let j = jacobian(&sq);
    for i in 0..d.len() {
        let x = d.center(i);
        assert!((j.get(i) - 4.0 * (x[0] * x[0] + x[1] * x[1])).abs() < 1e-10);
    }
}

#[test]
fn jacobian_scales_by_power_of_two_exactly() {
    let d = square(24);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::ComplexSquare).unwrap();
    let j = jacobian(&phi);
    let j2 = jacobian(&phi.scaled(2.0).unwrap());
    for (a, b) in j.values().iter().zip(j2.values()) {
        assert_eq!(*b, 4.0 * a);
    }
}

#[test]
fn component_count_is_checked() {
    let d = square(8);
    let c = ScalarField::zeros(&d);
    assert!(matches!(SobolevMap::new(vec![c]), Err(CovError::ComponentCount { .. })));
}

#[test]
fn identity_counts_are_one_on_the_set() {
    let d = square(32);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    let a = RegionMask::ball(&d, &[0.0, 0.0], 0.6);
    let m = multiplicity(&phi, &a, &d, 3).unwrap();
    for i in 0..d.len() {
        assert_eq!(m.get(i), a.contains(i) as u32);
    }
}

#[test]
fn fold_doubles_counts() {
    let d = square(32);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Fold).unwrap();
    let m = multiplicity(&phi, &RegionMask::full(&d), &d, 2).unwrap();
    let collar = m.collar();
    for i in 0..d.len() {
        let x = d.center(i);
        if x[0] < 0.0 {
            assert_eq!(m.get(i), 0);
        } else if !collar.contains(i) {
            assert_eq!(m.get(i), 2, "{x:?}");
        } else {
            // both sheets touch across the fold and merge into one cluster
            assert!(m.get(i) >= 1);
        }
    }
}

#[test]
fn complex_square_counts_two_inside_annulus() {
    let d = square(64);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::ComplexSquare).unwrap();
    let a = RegionMask::from_fn(&d, |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        (0.3..=0.9).contains(&r)
    });
    let s = auto_subdivision(&phi, &a, &d);
    let m = multiplicity(&phi, &a, &d, s).unwrap();
    let collar = m.collar();
    for i in 0..d.len() {
        let y = d.center(i);
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        if r > 0.12 && r < 0.78 && !collar.contains(i) {
            assert_eq!(m.get(i), 2, "{y:?}");
        }
    }
}

#[test]
fn identity_and_scaling_balance_exactly() {
    let d = square(32);
    let u = ScalarField::constant(&d, 1.0);
    let id = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    let a = RegionMask::full(&d);
    let m = multiplicity(&id, &a, &d, 2).unwrap();
    let lhs = lhs_integral(&id, &a, &u).unwrap();
    assert!(relative_gap(lhs, rhs_integral(&m, &u, None).unwrap()) < 1e-12);

    let t = GridDomain::cube(2, -2.0, 2.0, 32).unwrap();
    let sc = SobolevMap::from_analytic(&d, AnalyticMap::Scaling(2.0)).unwrap();
    let v = ScalarField::from_fn(&t, |y| 1.0 + 0.25 * y[0] + 0.125 * y[0] * y[1] + 0.5).unwrap();
    let m = multiplicity(&sc, &a, &t, 2).unwrap();
    let lhs = lhs_integral(&sc, &a, &v).unwrap();
    let rhs = rhs_integral(&m, &v, None).unwrap();
    assert!(relative_gap(lhs, rhs) < 1e-12, "{lhs} {rhs}");
}

#[test]
fn negative_test_function_is_rejected() {
    let d = square(8);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    let u = ScalarField::constant(&d, -1.0);
    assert!(matches!(lhs_integral(&phi, &RegionMask::full(&d), &u), Err(CovError::NegativeTestFunction(_))));
}

#[test]
fn lhs_is_additive_over_separated_sets() {
    let d = square(48);
    let t = square(48);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::ComplexSquare).unwrap();
    let u = bump(&t, [0.1, 0.2], 0.5);
    let a1 = RegionMask::ball(&d, &[-0.4, 0.0], 0.3);
    let a2 = RegionMask::ball(&d, &[0.4, 0.1], 0.25);
    let both = a1.union(&a2).unwrap();
    let l = lhs_integral(&phi, &both, &u).unwrap();
    let l1 = lhs_integral(&phi, &a1, &u).unwrap();
    let l2 = lhs_integral(&phi, &a2, &u).unwrap();
    assert!((l - l1 - l2).abs() <= 1e-12 * l.abs().max(1.0));
    let s = 4;
    let m = multiplicity(&phi, &both, &t, s).unwrap();
    let m1 = multiplicity(&phi, &a1, &t, s).unwrap();
    let m2 = multiplicity(&phi, &a2, &t, s).unwrap();
    for i in 0..t.len() {
        assert_eq!(m.get(i), m1.get(i) + m2.get(i));
    }
}

#[test]
fn singular_set_of_smooth_map_is_empty_for_affine() {
    let d = square(32);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    let s = singular_set(&phi, 1.5, None, &CapacityConfig::default()).unwrap();
    assert!(s.mask.is_empty());
    assert_eq!(s.capacity, 0.0);
}

#[test]
fn radial_stretch_singular_set_sits_at_origin() {
    let d = square(64);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::RadialStretch(0.5)).unwrap();
    let s = singular_set(&phi, 1.2, Some(&[1.0, 2.0, 4.0]), &CapacityConfig::default()).unwrap();
    assert!(!s.mask.is_empty());
    assert!(s.mask.max_distance_from(&[0.0, 0.0]) < 0.2, "{}", s.mask.max_distance_from(&[0.0, 0.0]));
}

#[test]
fn fold_check_closes_the_gap() {
    let d = square(64);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Fold).unwrap();
    let u = bump(&d, [0.5, 0.1], 0.35);
    let rep = change_of_variables_check(&phi, &RegionMask::full(&d), &u, &CovConfig::default()).unwrap();
    assert!(rep.gap < 0.02, "{rep:?}");
    assert_eq!(rep.rhs, rep.rhs_unexcised);
    assert!(rep.to_text().contains("gap = "));
}

#[test]
fn probe_rejects_non_null_candidates() {
    let d = square(16);
    let phi = SobolevMap::from_analytic(&d, AnalyticMap::Identity).unwrap();
    let lvl = ProbeLevel { map: phi.clone(), target: d.clone(), candidates: vec![RegionMask::full(&d)] };
    let cfg = CovConfig::default();
    assert!(matches!(
        luzin_n_probe(&[lvl.clone(), lvl], NullMode::Measure, 1.5, &cfg),
        Err(CovError::CandidateNotNull(0))
    ));
    assert!(matches!(luzin_n_probe(&[], NullMode::Measure, 1.5, &cfg), Err(CovError::NoLevels)));
}

#[test]
fn probe_on_segments_decays() {
    let cfg = CovConfig::default();
    let levels: Vec<ProbeLevel> = [16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let d = square(n);
            ProbeLevel {
                map: SobolevMap::from_analytic(&d, AnalyticMap::ComplexSquare).unwrap(),
                target: d.clone(),
                candidates: vec![RegionMask::segment(&d, &[-0.5, 0.3], &[0.5, 0.31])],
            }
        })
        .collect();
    let rep = luzin_n_probe(&levels, NullMode::Measure, 1.5, &cfg).unwrap();
    assert_eq!(rep.image_decay[0], Decay::Decaying, "{rep:?}");
}
