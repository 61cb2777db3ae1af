use proptest::prelude::*;
use toolsched::env::{BaselineKind, TerminationCause};
use toolsched::eval::stats::{mann_whitney, mean_ci95};
use toolsched::eval::{compare, evaluate, evaluate_observed, pool, CompareError, ScriptedPolicy};
use toolsched::WorldConfig;

fn run(kind: BaselineKind, n: usize, seed: u64) -> toolsched::eval::EvalReport {
    evaluate(&mut ScriptedPolicy::new(kind), &WorldConfig::bundled_default(), n, seed, false)
}

#[test]
fn random_succeeds_less_often_than_greedy() {
    let random = run(BaselineKind::Random, 200, 0);
    let greedy = run(BaselineKind::Greedy, 200, 0);
    assert!(random.success_rate < greedy.success_rate, "{} vs {}", random.success_rate, greedy.success_rate);
}

#[test]
fn identical_calls_give_identical_reports() {
    assert_eq!(run(BaselineKind::Random, 40, 9), run(BaselineKind::Random, 40, 9));
    assert_ne!(run(BaselineKind::Random, 40, 9).returns, run(BaselineKind::Random, 40, 10).returns);
}

#[test]
fn single_episode_has_no_interval() {
    let r = run(BaselineKind::Greedy, 1, 3);
    assert!(!r.ci_defined());
    assert_eq!(r.episodes, 1);
    assert_eq!(r.mean_return, r.returns[0]);
    assert!(run(BaselineKind::Greedy, 30, 3).ci_defined());
    assert!(!run(BaselineKind::Greedy, 29, 3).ci_defined());
}

#[test]
fn outcome_rates_partition_the_episodes() {
    for kind in BaselineKind::ALL {
        let r = run(kind, 60, 2);
        for rate in [r.success_rate, r.crash_rate, r.timeout_rate] {
            assert!((0.0..=1.0).contains(&rate));
        }
        assert!((r.success_rate + r.crash_rate + r.timeout_rate - 1.0).abs() < 1e-12);
        if let Some(x) = r.redundant_activation_rate {
            assert!((0.0..=1.0).contains(&x));
        }
    }
}

#[test]
fn greedy_is_always_redundant_when_it_can_be() {
    let r = run(BaselineKind::Greedy, 50, 1);
    assert!(r.redundant_opportunities > 0);
    assert_eq!(r.redundant_activation_rate, Some(1.0));
}

#[test]
fn activation_distances_cover_executed_calls_only() {
    // With the shield on, greedy's refused calls must not enter the statistic.
    let cfg = WorldConfig {
        initial_energy: 4000.0,
        ..WorldConfig::bundled_default()
    };
    let mut executed = 0u64;
    let mut overridden = 0u64;
    let r = evaluate_observed(&mut ScriptedPolicy::new(BaselineKind::Greedy), &cfg, 40, 5, true, &mut |_, t| {
        executed += u64::from(t.info.server.is_some());
        overridden += u64::from(t.info.overridden);
    });
    assert!(overridden > 0, "scenario should trigger the shield");
    assert_eq!(r.overrides, overridden);
    let recorded = (r.activation_distances_standard.len() + r.activation_distances_semantic.len()) as u64;
    assert_eq!(recorded, executed);
    assert_eq!(r.activations_standard + r.activations_semantic, executed);
    for (d, q) in r.activation_distances_standard.iter().zip(&r.activation_ratios_standard) {
        assert!((d / 150.0 - q).abs() < 1e-12 && *q <= 1.0);
    }
}

#[test]
fn comparing_a_report_with_itself_shows_no_difference() {
    let r = run(BaselineKind::CostAware, 50, 4);
    let c = compare(&[r.clone(), r]).unwrap();
    assert_eq!(c.pairs.len(), 1);
    assert_eq!(c.pairs[0].mean_gap, 0.0);
    assert!(c.pairs[0].test.p_value > 0.9);
}

#[test]
fn ordering_is_invariant_to_input_order() {
    let reports: Vec<_> = BaselineKind::ALL.iter().map(|&k| run(k, 50, 6)).collect();
    let forward = compare(&reports).unwrap();
    let mut rev = reports.clone();
    rev.reverse();
    assert_eq!(compare(&rev).unwrap(), forward);
    rev.swap(0, 1);
    assert_eq!(compare(&rev).unwrap(), forward);
    assert_eq!(forward.ranking[0].method, "costaware");
    assert_eq!(forward.ranking[2].method, "random");
}

#[test]
fn compare_needs_matching_scenarios() {
    let a = run(BaselineKind::Greedy, 5, 0);
    let mut cfg = WorldConfig::bundled_default();
    cfg.goal_radius = 25.0;
    let b = evaluate(&mut ScriptedPolicy::new(BaselineKind::Random), &cfg, 5, 0, false);
    assert!(matches!(compare(&[a.clone(), b]), Err(CompareError::ScenarioMismatch { .. })));
    assert!(matches!(compare(&[a]), Err(CompareError::TooFew(1))));
}

#[test]
fn pooling_seeds_concatenates_episodes() {
    let parts: Vec<_> = (0..3).map(|s| run(BaselineKind::Greedy, 20, s)).collect();
    let p = pool(&parts).unwrap();
    assert_eq!(p.episodes, 60);
    let all: Vec<f64> = parts.iter().flat_map(|r| r.returns.iter().copied()).collect();
    assert_eq!(p.returns, all);
    let crashes = parts.iter().map(|r| r.crash_rate * 20.0).sum::<f64>() / 60.0;
    assert!((p.crash_rate - crashes).abs() < 1e-12);
    assert_eq!(
        p.episode_summaries.iter().filter(|s| s.cause == TerminationCause::Depleted).count() as f64 / 60.0,
        p.crash_rate
    );
}

// Reference values from an asymptotic two-sided Mann–Whitney test with
// continuity and tie corrections in an independent statistics package.
#[test]
fn rank_sum_matches_reference_values() {
    let a = [1.5, 2.0, 2.0, 3.7, 4.1, 5.0, 5.0, 6.2];
    let b = [0.3, 1.0, 2.0, 2.5, 3.0, 3.0, 4.1];
    let t = mann_whitney(&a, &b);
    assert_eq!(t.u, 40.5);
    assert!((t.p_value - 0.162_265_688_436_321_72).abs() < 1e-12, "{}", t.p_value);

    let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 3.2).collect();
    let t = mann_whitney(&a, &b);
    assert_eq!(t.u, 276.0);
    assert!((t.p_value - 0.010_314_672_402_337_998).abs() < 1e-12, "{}", t.p_value);
}

/// U by direct pair counting, ties counted as one half.
fn u_by_pairs(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            u += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    u
}

proptest! {
    #[test]
    fn rank_u_equals_pair_count(
        a in prop::collection::vec(-5i32..5, 1..25),
        b in prop::collection::vec(-5i32..5, 1..25),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let t = mann_whitney(&a, &b);
        prop_assert_eq!(t.u, u_by_pairs(&a, &b));
        let swapped = mann_whitney(&b, &a);
        prop_assert!((t.p_value - swapped.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&t.p_value));
    }

    #[test]
    fn interval_contains_the_mean(xs in prop::collection::vec(-1e3f64..1e3, 30..80)) {
        let (lo, hi) = mean_ci95(&xs).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!(lo <= m + 1e-9 && m <= hi + 1e-9);
    }
}
