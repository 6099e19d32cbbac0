use dualtraj::{objective, parse_system_file, registry, rk45, Params};

const FIXTURE: &str = include_str!("fixtures/logistic.sys");

#[test]
fn fixture_matches_builtin() {
    let parsed = parse_system_file(FIXTURE).unwrap();
    let builtin = registry("logistic", &Params::new()).unwrap();
    assert_eq!(parsed.y0, builtin.y0);
    assert_eq!(parsed.steps, builtin.steps);
    assert_eq!(parsed.horizon, builtin.horizon);
    assert_eq!(parsed.system.a_slices(), builtin.system.a_slices());
    assert_eq!(parsed.system.linear(), builtin.system.linear());
}

#[test]
fn fixture_integrates_like_builtin() {
    let parsed = parse_system_file(FIXTURE).unwrap();
    let builtin = registry("logistic", &Params::new()).unwrap();
    let grid = parsed.grid();
    let a = dualtraj::integrate::resample(&rk45(&parsed, 1e-3, 1e-6).unwrap(), &grid).unwrap();
    let b = dualtraj::integrate::resample(&rk45(&builtin, 1e-3, 1e-6).unwrap(), &grid).unwrap();
    assert_eq!(a, b);
    assert!(objective(&parsed, &a).unwrap() < 1e-8);
}
