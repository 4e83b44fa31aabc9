use proptest::prelude::*;

use elcc_core::reliability::{search_load_adjustment, LoadAdjustmentResult, ReliabilityError, SearchOptions};

fn run(peak: f64, options: &SearchOptions, f: impl Fn(f64) -> f64) -> Result<LoadAdjustmentResult, ReliabilityError> {
    search_load_adjustment::<ReliabilityError, _>(peak, options, |la| Ok(f(la)))
}

fn iteration_bound(r: &LoadAdjustmentResult, eps: f64) -> usize {
    let bracket = &r.trace[r.expansions - 1];
    let width = bracket.la_max - bracket.la_min;
    let bisections = if width > eps { (width / eps).log2().ceil() as usize } else { 0 };
    r.expansions + bisections
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linear_stub_is_recovered(crossing in -400.0f64..400.0, slope in 0.01f64..5.0, eps in 0.1f64..5.0) {
        let options = SearchOptions { epsilon_la: eps, ..SearchOptions::default() };
        let r = run(1000.0, &options, |la| (0.2 + slope * (la - crossing)).max(0.0)).unwrap();
        prop_assert!((r.la - crossing).abs() <= eps, "la {} vs {}", r.la, crossing);
        prop_assert!(r.iterations <= iteration_bound(&r, eps));
    }

    #[test]
    fn step_stub_is_recovered(crossing in -450.0f64..450.0) {
        let options = SearchOptions::default();
        let r = run(1000.0, &options, |la| if la < crossing { 0.0 } else { 3.0 }).unwrap();
        prop_assert!((r.la - crossing).abs() <= 1.0);
        prop_assert!(!r.exact_hit);
        prop_assert!(r.la_max - r.la_min <= 1.0);
        prop_assert!(r.iterations <= iteration_bound(&r, 1.0));
    }

    #[test]
    fn trace_brackets_only_shrink(crossing in -300.0f64..300.0) {
        let r = run(800.0, &SearchOptions::default(), |la| (la - crossing).exp().min(100.0) * 0.2).unwrap();
        let closed: Vec<_> = r.trace.iter().skip(r.expansions - 1).collect();
        for w in closed.windows(2) {
            prop_assert!(w[1].la_min >= w[0].la_min && w[1].la_max <= w[0].la_max);
        }
    }
}

#[test]
fn crossing_beyond_limit_is_not_bracketable() {
    let err = run(100.0, &SearchOptions::default(), |la| if la < 80.0 { 0.0 } else { 1.0 }).unwrap_err();
    match err {
        ReliabilityError::NonBracketable { low_la, high_la, .. } => {
            assert_eq!(low_la, 50.0);
            assert!(high_la.is_infinite());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_options_are_rejected() {
    let bad_target = SearchOptions {
        target_lolh: 0.0,
        ..SearchOptions::default()
    };
    assert!(matches!(run(100.0, &bad_target, |_| 0.0), Err(ReliabilityError::BadTarget(_))));
    let bad_eps = SearchOptions {
        epsilon_la: -1.0,
        ..SearchOptions::default()
    };
    assert!(matches!(run(100.0, &bad_eps, |_| 0.0), Err(ReliabilityError::BadEpsilon(_))));
}
