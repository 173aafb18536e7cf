use proptest::prelude::*;

use repeaterlab::estimators::{transition_sequence, visit_count_variance};
use repeaterlab::markov::{EquilibriumMethod, DEFAULT_EQUILIBRIUM_TOL};
use repeaterlab::protocol::closed_form::{equilibrium_multiheralded, equilibrium_shs};
use repeaterlab::{MultiHeraldParams, ProtocolParams, StochasticMatrix, TwoLinkParams};

/// Row-stochastic matrices with 1..=5 states; some entries are exactly zero.
fn stochastic_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=5).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n), n).prop_map(
            |mut rows| {
                for (i, row) in rows.iter_mut().enumerate() {
                    let total: f64 = row.iter().sum();
                    if total == 0.0 {
                        row[i] = 1.0;
                    } else {
                        row.iter_mut().for_each(|x| *x /= total);
                    }
                }
                rows
            },
        )
    })
}

/// Matrices whose entries are all positive, hence ergodic.
fn positive_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=5).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0.02f64..1.0, n), n).prop_map(|mut rows| {
            for row in &mut rows {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
            }
            rows
        })
    })
}

fn prob() -> impl Strategy<Value = f64> {
    0.01f64..=1.0
}

fn params() -> impl Strategy<Value = ProtocolParams> {
    prop_oneof![
        (prop::collection::vec(prob(), 1..5), 0.1f64..10.0)
            .prop_map(|(round_probs, tau)| ProtocolParams::Multiherald { round_probs, tau }),
        (prob(), prob(), prob(), 0.1f64..10.0).prop_map(|(l, r, s, tau)| ProtocolParams::Shs {
            left_probs: vec![l],
            right_probs: vec![r],
            swap_prob: s,
            tau
        }),
        (prob(), prob(), prob(), prob(), prob()).prop_map(|(l1, l2, r1, r2, s)| ProtocolParams::Dhs {
            left_probs: vec![l1, l2],
            right_probs: vec![r1, r2],
            swap_prob: s,
            tau: 1.0
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matrix_powers_stay_stochastic(rows in stochastic_rows(), k in 0u64..300) {
        let m = StochasticMatrix::validate(rows).unwrap();
        let pk = m.matrix_power(k);
        for i in 0..m.n() {
            let sum: f64 = pk.row(i).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10, "row {i} sums to {sum}");
            prop_assert!(pk.row(i).iter().all(|&x| x >= -1e-15));
        }
    }

    #[test]
    fn equilibrium_is_stationary_and_methods_agree(rows in positive_rows()) {
        let m = StochasticMatrix::validate(rows).unwrap();
        let direct = m.equilibrium(DEFAULT_EQUILIBRIUM_TOL).unwrap();
        let power = m.equilibrium_with(EquilibriumMethod::power_iteration(), 1e-14).unwrap();
        prop_assert!(m.stationarity_residual(direct.probs()) < 1e-12);
        for (a, b) in direct.probs().iter().zip(power.probs()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for s in 0..m.n() {
            let t = m.mean_return_time(s).unwrap();
            prop_assert!((t * direct.probs()[s] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hitting_moments_satisfy_first_step_equations(rows in positive_rows(), t in 0usize..5) {
        let n = rows.len();
        let target = t % n;
        let m = StochasticMatrix::validate(rows.clone()).unwrap();
        let stats = m.hitting_stats(target).unwrap();
        let mean = |s: usize| if s == target { 0.0 } else { stats.mean_from(s).unwrap() };
        let second = |s: usize| {
            if s == target { 0.0 } else { stats.variance_from(s).unwrap() + mean(s) * mean(s) }
        };
        for i in (0..n).filter(|&i| i != target) {
            // h_i = 1 + sum_j P_ij h_j, s_i = 1 + sum_j P_ij (2 h_j + s_j)
            let h: f64 = 1.0 + (0..n).map(|j| rows[i][j] * mean(j)).sum::<f64>();
            let s2: f64 = 1.0 + (0..n).map(|j| rows[i][j] * (2.0 * mean(j) + second(j))).sum::<f64>();
            prop_assert!((h - mean(i)).abs() < 1e-9 * mean(i).max(1.0));
            prop_assert!((s2 - second(i)).abs() < 1e-8 * second(i).max(1.0));
            prop_assert!(stats.variance_from(i).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn visit_variance_matches_quadratic_sum(rows in positive_rows(), horizon in 1u64..60) {
        let n = rows.len();
        let m = StochasticMatrix::validate(rows).unwrap();
        let (start, success) = (0, n - 1);
        let a = transition_sequence(&m, start, success, horizon);
        let b = transition_sequence(&m, success, success, horizon);
        let mut direct = 0.0;
        for k in 0..a.len() {
            direct += a[k] * (1.0 - a[k]);
            for l in k + 1..a.len() {
                direct += 2.0 * a[k] * (b[l - k - 1] - a[l]);
            }
        }
        let fast = visit_count_variance(&m, start, success, horizon);
        prop_assert!((fast - direct).abs() < 1e-9 * direct.abs().max(1.0));
        prop_assert!(fast >= -1e-9);
    }

    #[test]
    fn params_json_round_trip(p in params()) {
        let text = serde_json::to_string(&p).unwrap();
        let back: ProtocolParams = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn matrix_json_round_trip(rows in stochastic_rows()) {
        let m = StochasticMatrix::validate(rows).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: StochasticMatrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.rows(), m.rows());
    }

    #[test]
    fn built_chains_agree_with_closed_forms(p in params()) {
        let chain = p.build().unwrap();
        let pi = chain.matrix().equilibrium(DEFAULT_EQUILIBRIUM_TOL).unwrap().probs()[chain.success_state()];
        if let Some(cf) = p.closed_form_equilibrium().unwrap() {
            prop_assert!((pi - cf).abs() < 1e-10, "solver {pi}, closed form {cf}");
        }
        let stats = chain.matrix().hitting_stats(chain.success_state()).unwrap();
        let mean = stats.mean_from(chain.start_state()).unwrap();
        prop_assert!(mean >= 1.0);
        if let Some(cf) = p.closed_form_latency_variance().unwrap() {
            let var = stats.variance_from(chain.start_state()).unwrap();
            prop_assert!((var - cf).abs() < 1e-7 * cf.abs().max(1.0), "solver {var}, closed form {cf}");
        }
    }

    #[test]
    fn multiherald_equilibrium_is_monotone(p in prop::collection::vec(0.05f64..0.95, 1..5), i in 0usize..4, bump in 0.001f64..0.05) {
        let i = i % p.len();
        let base = equilibrium_multiheralded(&MultiHeraldParams::new(p.clone()).unwrap());
        let mut raised = p.clone();
        raised[i] += bump;
        let higher = equilibrium_multiheralded(&MultiHeraldParams::new(raised).unwrap());
        prop_assert!(higher > base);
    }

    #[test]
    fn shs_equilibrium_is_monotone_and_symmetric(pl in 0.05f64..0.95, pr in 0.05f64..0.95, ps in 0.05f64..=1.0, bump in 0.001f64..0.05) {
        let pi = |l, r, s| equilibrium_shs(&TwoLinkParams::single(l, r, s).unwrap()).unwrap();
        let base = pi(pl, pr, ps);
        prop_assert!((base - pi(pr, pl, ps)).abs() < 1e-12);
        prop_assert!(pi(pl + bump, pr, ps) > base);
        prop_assert!(pi(pl, pr + bump, ps) > base);
        prop_assert!(base <= 0.5 + 1e-15);
    }
}
