use bayesvis_core::analysis::interval::central_interval;
use bayesvis_core::analysis::{bootstrap_effect_size, mann_whitney_u, EffectScale};
use bayesvis_core::cafe::UnconstrainedParams;
use bayesvis_core::samples::{Direction, IntervalCondition, Provenance, SampleSidecar, Schema};
use bayesvis_core::scoring::reward::divergence_reward;
use bayesvis_core::scoring::utility::{OptionUtility, Payoff};
use bayesvis_core::scoring::{expected_utility, kl_divergence, multibet_click, symmetric_kl, MultiBetState, UtilitySpec};
use bayesvis_core::{CategoricalDistribution, JointSamples, Observability, VariableSpec};
use proptest::prelude::*;

fn store(columns: usize, values: Vec<f64>) -> JointSamples {
    let schema = Schema::new(
        (0..columns)
            .map(|i| VariableSpec::new(format!("v{i}"), Observability::Observable, i, "min"))
            .collect(),
    )
    .unwrap();
    let rows = values.len() / columns;
    JointSamples::new(schema, rows, values, Provenance::Posterior, 0).unwrap()
}

fn matrix(max_cols: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_cols, 1usize..60).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(-50.0f64..50.0, d * n)))
}

fn distribution(n: usize) -> impl Strategy<Value = CategoricalDistribution> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        CategoricalDistribution::from_weights((0..w.len()).map(|i| i.to_string()).collect(), &w).unwrap()
    })
}

fn pair() -> impl Strategy<Value = (CategoricalDistribution, CategoricalDistribution)> {
    (2usize..10).prop_flat_map(|n| (distribution(n), distribution(n)))
}

proptest! {
    #[test]
    fn multibet_never_exceeds_budget(
        n in 1usize..=8,
        m in 1u32..=20,
        clicks in prop::collection::vec((0usize..10, 0u32..=22, any::<bool>()), 0..60),
    ) {
        let mut state = MultiBetState::new(n, m);
        for (column, row, was_selected) in clicks {
            let before = state.clone();
            match multibet_click(&state, column, row, was_selected) {
                Ok(next) => state = next,
                Err(_) => prop_assert_eq!(&state, &before),
            }
            prop_assert!(state.chips().iter().sum::<u32>() <= m);
        }
    }

    #[test]
    fn deselect_then_select_restores_column(
        chips in prop::collection::vec(0u32..4, 1..6),
        extra in 0u32..8,
        column_seed in any::<usize>(),
        offset in 1u32..8,
    ) {
        let m = chips.iter().sum::<u32>() + extra;
        prop_assume!(m > 0);
        let column = column_seed % chips.len();
        let state = MultiBetState::from_chips(chips.clone(), m).unwrap();
        let row = chips[column] + offset;
        prop_assume!(row <= chips[column] + state.remaining());
        let up = multibet_click(&state, column, row, false).unwrap();
        let down = multibet_click(&up, column, row, true).unwrap();
        prop_assert_eq!(down.chips()[column], row - 1);
        if offset == 1 {
            prop_assert_eq!(down.chips(), state.chips());
        }
    }

    #[test]
    fn divergences_are_non_negative_and_zero_on_identity((p, q) in pair()) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let (pq, qp) = (symmetric_kl(&p, &q).unwrap(), symmetric_kl(&q, &p).unwrap());
        prop_assert!((pq - qp).abs() <= 1e-12 * pq.max(1.0));
    }

    #[test]
    fn reward_is_monotone_in_divergence(a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(divergence_reward(lo) >= divergence_reward(hi));
        prop_assert_eq!(divergence_reward(0.0), 10.0);
    }

    #[test]
    fn prob_event_partitions_rows((d, values) in matrix(3), threshold in -60.0f64..60.0) {
        let js = store(d, values);
        let at_least = js.prob_event("v0", threshold, Direction::AtLeast).unwrap();
        let below = js.prob_event("v0", threshold, Direction::Below).unwrap();
        prop_assert_eq!(at_least + below, 1.0);
    }

    #[test]
    fn marginal_stats_ignore_row_order((d, values) in matrix(3), seed in any::<u64>()) {
        let js = store(d, values.clone());
        let mut order: Vec<usize> = (0..js.rows()).collect();
        let mut state = seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let shuffled: Vec<f64> = order.iter().flat_map(|&r| values[r * d..(r + 1) * d].to_vec()).collect();
        let other = store(d, shuffled);
        for c in 0..d {
            let name = format!("v{c}");
            prop_assert_eq!(js.marginal_stats(&name).unwrap(), other.marginal_stats(&name).unwrap());
        }
    }

    #[test]
    fn blob_round_trip((d, values) in matrix(5)) {
        let js = store(d, values);
        let blob = js.to_blob();
        let sidecar: SampleSidecar = serde_json::from_str(&serde_json::to_string(&js.sidecar()).unwrap()).unwrap();
        let back = JointSamples::load(&blob, &sidecar).unwrap();
        prop_assert_eq!(back.to_blob(), blob);
        prop_assert_eq!(back, js);
    }

    #[test]
    fn conditioning_twice_stays_in_first_support(
        (d, values) in matrix(2),
        lo in -50.0f64..0.0,
        width in 1.0f64..60.0,
        seed in any::<u64>(),
    ) {
        let js = store(d, values);
        let conds = [IntervalCondition::new("v0", lo, lo + width)];
        let first = match js.condition(&conds, 200, seed) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let second = first.condition(&conds, 200, seed.wrapping_add(1)).unwrap();
        let parent: Vec<&[f64]> = first.iter_rows().collect();
        for row in second.iter_rows() {
            prop_assert!(parent.contains(&row));
            prop_assert!(row[0] >= lo && row[0] <= lo + width);
        }
    }

    #[test]
    fn expected_utility_is_linear(
        (d, values) in matrix(3),
        scales in prop::collection::vec(-3.0f64..3.0, 3),
        w1 in prop::collection::vec(0.01f64..1.0, 3),
        w2 in prop::collection::vec(0.01f64..1.0, 3),
        lambda in 0.0f64..=1.0,
    ) {
        let js = store(d, values);
        let labels: Vec<String> = (0..3).map(|i| format!("o{i}")).collect();
        let utility = UtilitySpec::PerOption {
            options: scales
                .iter()
                .enumerate()
                .map(|(i, &s)| OptionUtility {
                    variable: format!("v{}", i % d),
                    payoff: Payoff::Linear { scale: s, offset: 1.0 },
                })
                .collect(),
        };
        let p = CategoricalDistribution::from_weights(labels.clone(), &w1).unwrap();
        let q = CategoricalDistribution::from_weights(labels.clone(), &w2).unwrap();
        let mix: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let mix = CategoricalDistribution::from_weights(labels, &mix).unwrap();
        let lhs = expected_utility(&js, &utility, &mix).unwrap();
        let rhs = lambda * expected_utility(&js, &utility, &p).unwrap()
            + (1.0 - lambda) * expected_utility(&js, &utility, &q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn u_statistics_sum_to_pair_count(
        a in prop::collection::vec(0u8..10, 1..40),
        b in prop::collection::vec(0u8..10, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ab.u + ba.u, (a.len() * b.len()) as f64);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    }

    #[test]
    fn central_interval_is_antisymmetric(values in prop::collection::vec(-10.0f64..10.0, 1..80), level in 0.05f64..0.95) {
        let (lo, hi) = central_interval(&values, level).unwrap();
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        let (nlo, nhi) = central_interval(&negated, level).unwrap();
        prop_assert!((nlo + hi).abs() < 1e-12 && (nhi + lo).abs() < 1e-12);
    }

    #[test]
    fn effect_size_flips_sign(
        a in prop::collection::vec(0.0f64..10.0, 3..30),
        b in prop::collection::vec(0.0f64..10.0, 3..30),
        seed in any::<u64>(),
    ) {
        prop_assume!(a != b);
        if let Ok(ab) = bootstrap_effect_size(&a, &b, 50, seed, EffectScale::default()) {
            let ba = bootstrap_effect_size(&b, &a, 50, seed, EffectScale::default()).unwrap();
            prop_assert!((ab.effect + ba.effect).abs() < 1e-9);
        }
    }

    #[test]
    fn unconstrained_round_trip(coords in prop::collection::vec(-3.0f64..3.0, 12)) {
        let u = UnconstrainedParams::new(coords.clone()).unwrap();
        let back = u.to_constrained().to_unconstrained().unwrap();
        for (x, y) in coords.iter().zip(back.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
