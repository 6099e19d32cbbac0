use dualtraj::canonical::{self, DualField};
use dualtraj::protocol::{pick_winner, Winner};
use dualtraj::{registry, Columns, Params, Trajectory};
use proptest::prelude::*;

fn spec(name: &str, n: usize, t: f64) -> dualtraj::IvpSpec {
    let mut p = Params::new();
    p.insert("n".into(), n as f64);
    p.insert("T".into(), t);
    registry(name, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collected_form_matches_direct(
        sys in 0usize..3,
        n in 1usize..12,
        t in 0.05f64..5.0,
        vals in prop::collection::vec(-4.0f64..4.0, 72),
    ) {
        let s = spec(dualtraj::model::SYSTEM_NAMES[sys], n, t);
        let d = s.dim();
        let y = Trajectory::new(&s, Columns::from_fn(d, n, |i, k| vals[(i + d * k) % 36])).unwrap();
        let dual = DualField { sig: Columns::from_fn(d, n, |i, k| vals[36 + (i + d * k) % 36]) };
        let a = canonical::xi_direct(&s, &y, &dual).unwrap();
        let b = canonical::xi_collected(&s, &y, &dual).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn dual_map_recovers_objective(
        sys in 0usize..3,
        n in 1usize..12,
        vals in prop::collection::vec(-4.0f64..4.0, 36),
    ) {
        let s = spec(dualtraj::model::SYSTEM_NAMES[sys], n, 1.0);
        let d = s.dim();
        let y = Trajectory::new(&s, Columns::from_fn(d, n, |i, k| vals[(i + d * k) % 36])).unwrap();
        let p = dualtraj::objective(&s, &y).unwrap();
        let xi = canonical::xi_direct(&s, &y, &canonical::dual_map(&s, &y).unwrap()).unwrap();
        prop_assert!((p - xi).abs() <= 1e-10 * p.max(1.0));
    }

    #[test]
    fn winner_is_lower_objective(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let w = pick_winner(a, b);
        if b < a * (1.0 - 1e-11) {
            prop_assert_eq!(w, Winner::Cd);
        } else if b >= a {
            prop_assert_eq!(w, Winner::Rk);
        }
    }
}
