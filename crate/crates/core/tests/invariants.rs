use proptest::prelude::*;
use wind::bon::{bon_closed_form_operator, bon_exact_operator};
use wind::metrics::{kl_policies, log_win_objective, wr_objective};
use wind::{avg_l1, duality_gap, win_rate, wind_exact_step, PreferenceGame, TabularPolicy};

fn game_and_policies() -> impl Strategy<Value = (PreferenceGame, TabularPolicy, TabularPolicy)> {
    (1usize..4, 2usize..7).prop_flat_map(|(nx, ny)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..4, ny), nx),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, ny), nx),
            prop::collection::vec(prop::collection::vec(0.01f64..1.0, ny), nx),
        )
            .prop_map(|(r, a, b)| {
                let rewards: Vec<Vec<f64>> = r
                    .iter()
                    .map(|row| row.iter().map(|&v| f64::from(v)).collect())
                    .collect();
                let norm = |rows: Vec<Vec<f64>>| {
                    let rows: Vec<Vec<f64>> = rows
                        .into_iter()
                        .map(|row| {
                            let s: f64 = row.iter().sum();
                            row.iter().map(|v| v / s).collect()
                        })
                        .collect();
                    let n = rows[0].len();
                    let logs = rows.iter().flatten().map(|v| v.ln()).collect();
                    TabularPolicy::from_log_weights(rows.len(), n, logs).unwrap()
                };
                (
                    PreferenceGame::with_uniform_rho(&rewards).unwrap(),
                    norm(a),
                    norm(b),
                )
            })
    })
}

proptest! {
    #[test]
    fn pref_plus_transpose_is_ones((g, _, _) in game_and_policies()) {
        for x in 0..g.num_prompts() {
            for y in 0..g.num_responses() {
                for y2 in 0..g.num_responses() {
                    prop_assert_eq!(g.pref(x, y, y2) + g.pref(x, y2, y), 1.0);
                    prop_assert!(g.pref_geq(x, y, y2) >= g.pref(x, y, y2));
                }
            }
        }
    }

    #[test]
    fn fast_products_match_dense((g, a, _) in game_and_policies()) {
        let ny = g.num_responses();
        let mut out = vec![0.0; ny];
        for x in 0..g.num_prompts() {
            g.pref_times(x, &a.row(x), &mut out);
            for (f, d) in out.iter().zip(g.pref_times_dense(x, &a.row(x))) {
                prop_assert!((f - d).abs() < 1e-14);
            }
            g.log_pref_geq_times(x, a.log_row(x), &mut out);
            for (f, d) in out.iter().zip(g.pref_geq_times_dense(x, &a.row(x))) {
                prop_assert!((f.exp() - d).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn win_rate_is_antisymmetric((g, a, b) in game_and_policies()) {
        let s = win_rate(&a, &b, &g).unwrap() + win_rate(&b, &a, &g).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!((win_rate(&a, &a, &g).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn divergences_are_in_range((g, a, b) in game_and_policies()) {
        prop_assert!(kl_policies(&a, &b, g.rho()) >= 0.0);
        prop_assert!(kl_policies(&a, &a, g.rho()).abs() < 1e-15);
        let d = avg_l1(&a, &b, g.rho()).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
    }

    #[test]
    fn objectives_at_reference((g, a, _) in game_and_policies(), beta in 0.0f64..2.0) {
        prop_assert!((wr_objective(&a, &g, &a, beta) - 0.5).abs() < 1e-12);
        let lw = log_win_objective(&a, &a, &g, &a, beta);
        prop_assert!(lw.is_finite() || lw == f64::NEG_INFINITY);
    }

    #[test]
    fn bon_outputs_are_policies((g, a, _) in game_and_policies(), n in 1usize..6) {
        let closed = bon_closed_form_operator(&a, &g, n).unwrap();
        let exact = bon_exact_operator(&a, &g, n).unwrap();
        for pi in [&closed, &exact] {
            for x in 0..g.num_prompts() {
                let s: f64 = pi.row(x).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
        if n == 1 {
            prop_assert!(avg_l1(&closed, &exact, g.rho()).unwrap() < 1e-12);
            prop_assert!(avg_l1(&closed, &a, g.rho()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn bon_fixes_point_masses(ny in 2usize..8, pick in 0usize..8, n in 1usize..6, seed in 0u64..100) {
        let y = pick % ny;
        let rewards: Vec<f64> = (0..ny).map(|k| ((k as u64 * 7 + seed) % 5) as f64).collect();
        let g = PreferenceGame::with_uniform_rho(&[rewards]).unwrap();
        let pm = TabularPolicy::point_mass(ny, &[y]);
        prop_assert_eq!(bon_closed_form_operator(&pm, &g, n).unwrap().prob(0, y), 1.0);
        prop_assert_eq!(bon_exact_operator(&pm, &g, n).unwrap().prob(0, y), 1.0);
    }

    #[test]
    fn duality_gap_is_nonnegative((g, a, r) in game_and_policies(), beta in 0.01f64..2.0) {
        prop_assert!(duality_gap(&a, &g, &r, beta).unwrap() >= -1e-10);
        prop_assert!(duality_gap(&a, &g, &r, 0.0).unwrap() >= -1e-10);
    }

    #[test]
    fn wind_step_is_normalized((g, a, r) in game_and_policies(), beta in 0.0f64..2.0, eta in 0.01f64..20.0) {
        let next = wind_exact_step(&a, &g, &r, beta, eta).unwrap();
        for x in 0..g.num_prompts() {
            let s: f64 = next.row(x).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
