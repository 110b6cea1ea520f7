use super::*;

fn parse(text: &str) -> Result<Scenario> {
    Scenario::parse("t", text)
}

#[test]
fn repeated_keys_form_lists() {
    let s = parse("kind = truncation\nentry = affine\nresolution = 16\nresolution = 32\nalpha = 1 2\n").unwrap();
    assert_eq!(s.resolutions, vec![16, 32]);
    assert_eq!(s.alphas, vec![1.0, 2.0]);
    assert_eq!(s.dim, 2);
    assert_eq!(s.seed, 0);
}

#[test]
fn capacity_without_p_names_the_exponent() {
    let e = parse("kind = capacity\nentry = ball\nresolution = 32\n").unwrap_err();
    assert_eq!(e.to_string(), "exponent p required for kind=capacity");
}

#[test]
fn unknown_key_and_wrong_entry_kind_are_rejected() {
    assert!(matches!(parse("kind = hausdorff\nentry = point\nresolution = 32\nfoo = 1\n"), Err(ScenarioError::UnknownKey(_))));
    assert!(matches!(parse("kind = hausdorff\nentry = affine\nresolution = 32\n"), Err(ScenarioError::Invalid { key: "entry", .. })));
    assert!(matches!(parse("kind = hausdorff\nentry = nope\nresolution = 32\n"), Err(ScenarioError::Corpus(_))));
    assert!(matches!(parse("kind = hausdorff\nentry = point\n"), Err(ScenarioError::Missing { .. })));
    assert!(matches!(parse("kind hausdorff\n"), Err(ScenarioError::Syntax { line: 1, .. })));
}

#[test]
fn decreasing_alphas_are_rejected() {
    let e = parse("kind = truncation\nentry = affine\nresolution = 16\nalpha = 2 1\n").unwrap_err();
    assert!(matches!(e, ScenarioError::Invalid { key: "alpha", .. }));
}

#[test]
fn hausdorff_point_decays_and_segment_matches_length() {
    let s = parse("kind = hausdorff\nentry = point\nresolutions = 64 128 256\n").unwrap();
    let checks = run_scenario(&s, None).unwrap();
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    assert!(checks.iter().any(|c| c.id == "decay"));
    let s = parse("kind = hausdorff\nentry = segment\nresolutions = 64 128\n").unwrap();
    let checks = run_scenario(&s, None).unwrap();
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
}

#[test]
fn truncation_affine_reproduces_slope() {
    let s = parse("kind = truncation\nentry = affine\nresolution = 64\n").unwrap();
    let checks = run_scenario(&s, None).unwrap();
    let slope = checks.iter().find(|c| c.id == "n64_affine_exact_slope").expect("slope row");
    assert!(slope.pass, "{slope:?}");
    assert!(checks.iter().all(|c| c.pass), "{checks:?}");
}

#[test]
fn csv_quotes_commas_and_carries_seed() {
    let c = Check::close("a,b".into(), 1.0, 1.0, 0.1, TRIVIAL, "x");
    let csv = checks_csv(&[c], 7);
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("\"a,b\","));
    assert!(row.ends_with(",7"));
}

#[test]
fn derived_rows_need_an_oracle_name() {
    let c = Check::close("x".into(), 1.0, 1.0, 0.1, DERIVED, "");
    assert!(c.pass);
    let mut v = vec![c];
    require_oracles(&mut v);
    assert!(!v[0].pass);
}
