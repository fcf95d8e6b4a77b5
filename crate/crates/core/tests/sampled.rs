use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wind::sampled::{
    conditional_mean_oracle, inner_minimize, risk_kl, risk_nce, risk_sq, sample_batch,
    wind_sampled, Judge, ParamPolicy, ProxyParams, RiskEval, SampleBatch,
};
use wind::{avg_l1, LossKind, PreferenceGame, SolverConfig, TabularPolicy};

fn small_game(seed: u64) -> PreferenceGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
        .collect();
    PreferenceGame::with_uniform_rho(&rewards).unwrap()
}

#[test]
fn sq_fit_reaches_cell_means() {
    let g = small_game(1);
    let judge = Judge::exact(&g);
    let theta = ParamPolicy::tabular(2, 3, vec![0.0; 6]).unwrap();
    let pp = ProxyParams::new(0.5, 1.0, theta.clone(), theta.clone()).unwrap();
    let batch = sample_batch(&theta, &g, &judge, 2000, 0.5, 4).unwrap();
    let fit = inner_minimize(|th| risk_sq(th, &batch, &pp), &theta, 200, 0.5).unwrap();
    for x in 0..2 {
        for y in 0..3 {
            let cell: Vec<f64> = batch
                .samples
                .iter()
                .filter(|s| s.x == x && s.y == y)
                .map(|s| pp.target(x, y, s.judged))
                .collect();
            let mean = cell.iter().sum::<f64>() / cell.len() as f64;
            assert!((fit.theta.logit(x, y) - mean).abs() < 1e-6);
        }
    }
    assert!(fit.risks.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn optimal_start_is_returned_unchanged() {
    let g = PreferenceGame::two_response_demo();
    let judge = Judge::exact(&g);
    let zeros = ParamPolicy::tabular(1, 2, vec![0.0; 2]).unwrap();
    let pp = ProxyParams::new(1.0, 1.0, zeros.clone(), zeros.clone()).unwrap();
    let batch = SampleBatch::exhaustive(&zeros, &g, &judge, 0.5).unwrap();
    let psi = conditional_mean_oracle(&g, &pp, &judge).unwrap();
    let start = zeros.with_params(psi).unwrap();
    let fit = inner_minimize(|th| risk_sq(th, &batch, &pp), &start, 50, 0.5).unwrap();
    assert_eq!(fit.theta, start);
    assert!(fit.risks.len() <= 2);
}

#[test]
fn kl_and_nce_fits_decrease_risk() {
    let g = small_game(2);
    let judge = Judge::exact(&g);
    let theta = ParamPolicy::tabular(2, 3, vec![0.0; 6]).unwrap();
    let pp = ProxyParams::new(1.0, 1.0, theta.clone(), theta.clone()).unwrap();
    let batch = sample_batch(&theta, &g, &judge, 500, 0.5, 8).unwrap();
    let kl = inner_minimize(|th| risk_kl(th, &batch, &pp), &theta, 200, 0.5).unwrap();
    assert!(kl.final_risk() < 0.75 * kl.risks[0]);
    // per cell the fitted win probability approaches the empirical win rate
    for x in 0..2 {
        for y in 0..3 {
            let wins: Vec<f64> = batch
                .samples
                .iter()
                .filter(|s| s.x == x && s.y == y)
                .map(|s| f64::from(u8::from(s.win)))
                .collect();
            let rate = wins.iter().sum::<f64>() / wins.len() as f64;
            let z = pp.implied_win(x, y, kl.theta.logit(x, y));
            assert!(
                (z - rate.clamp(1e-6, 1.0 - 1e-6)).abs() < 1e-4,
                "{z} vs {rate}"
            );
        }
    }
    let nce = inner_minimize(|th| risk_nce(th, &batch, &pp, 0.5), &theta, 200, 0.5).unwrap();
    assert!(nce.final_risk() < nce.risks[0]);
}

#[test]
fn non_finite_risk_is_an_error() {
    let theta = ParamPolicy::tabular(1, 1, vec![0.0]).unwrap();
    let err = inner_minimize(
        |_| RiskEval {
            value: f64::NAN,
            grad: vec![0.0],
            curvature: vec![0.0],
        },
        &theta,
        5,
        0.5,
    )
    .unwrap_err();
    assert!(err.is_numerical());
}

#[test]
fn offsets_shift_the_fit_but_not_the_policy() {
    let g = small_game(3);
    let judge = Judge::exact(&g);
    let theta = ParamPolicy::tabular(2, 3, vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.5]).unwrap();
    let pp = ProxyParams::new(0.5, 1.0, theta.clone(), theta.clone()).unwrap();
    let shifted = pp.clone().with_offsets(vec![0.7, -1.3], 2.0).unwrap();
    let batch = SampleBatch::exhaustive(&theta, &g, &judge, 0.5).unwrap();
    let a = inner_minimize(|th| risk_sq(th, &batch, &pp), &theta, 200, 0.5)
        .unwrap()
        .theta;
    let b = inner_minimize(|th| risk_sq(th, &batch, &shifted), &theta, 200, 0.5)
        .unwrap()
        .theta;
    for x in 0..2 {
        for y in 0..3 {
            let want = [0.7, -1.3][x];
            assert!((b.logit(x, y) - a.logit(x, y) - want).abs() < 1e-9);
        }
    }
    let (pa, pb) = (a.to_tabular().unwrap(), b.to_tabular().unwrap());
    assert!(avg_l1(&pa, &pb, g.rho()).unwrap() < 1e-9);
}

#[test]
fn linear_features_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = small_game(4);
    let judge = Judge::exact(&g);
    let dim = 3;
    let feats: Vec<f64> = (0..2 * 3 * dim).map(|_| rng.gen_range(0.0..0.3)).collect();
    let theta = ParamPolicy::linear(2, 3, dim, feats, vec![0.3, 0.4, 0.2]).unwrap();
    let zeros = ParamPolicy::tabular(2, 3, vec![0.0; 6]).unwrap();
    let pp = ProxyParams::new(1.0, 1.0, zeros.clone(), zeros).unwrap();
    let batch = sample_batch(&theta, &g, &judge, 64, 0.5, 2).unwrap();

    // the feature Gram matrix under the sampling policy is positive definite
    let pi = theta.to_tabular().unwrap();
    let mut gram = [[0.0; 3]; 3];
    for x in 0..2 {
        for y in 0..3 {
            let w = g.rho()[x] * pi.prob(x, y);
            let f: Vec<f64> = (0..dim)
                .map(|k| {
                    let mut e = vec![0.0; dim];
                    e[k] = 1.0;
                    theta.with_params(e).unwrap().logit(x, y)
                })
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    gram[i][j] += w * f[i] * f[j];
                }
            }
        }
    }
    let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
        - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
        + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
    assert!(gram[0][0] > 0.0 && det > 0.0);

    for eval in [
        &(|th: &ParamPolicy| risk_sq(th, &batch, &pp)) as &dyn Fn(&ParamPolicy) -> RiskEval,
        &|th: &ParamPolicy| risk_kl(th, &batch, &pp),
        &|th: &ParamPolicy| risk_nce(th, &batch, &pp, 0.5),
    ] {
        let grad = eval(&theta).grad;
        for k in 0..dim {
            let mut up = theta.params().to_vec();
            let mut down = up.clone();
            up[k] += 1e-5;
            down[k] -= 1e-5;
            let fd = (eval(&theta.with_params(up).unwrap()).value
                - eval(&theta.with_params(down).unwrap()).value)
                / 2e-5;
            assert!(
                (fd - grad[k]).abs() <= 1e-5 * grad[k].abs().max(1e-3),
                "{fd} vs {}",
                grad[k]
            );
        }
    }
}

#[test]
fn total_tie_game_stays_at_reference() {
    let g = PreferenceGame::with_uniform_rho(&[vec![1.0; 4], vec![0.0; 4]]).unwrap();
    let judge = Judge::exact(&g);
    let pi_ref = TabularPolicy::from_probs(&[vec![0.1, 0.2, 0.3, 0.4], vec![0.25; 4]]).unwrap();
    let theta0 = ParamPolicy::from_policy(&pi_ref).unwrap();
    for loss in [LossKind::Sq, LossKind::Kl] {
        let cfg = SolverConfig {
            beta: 1.0,
            eta: 1.0,
            iters: 10,
            batch_size: 2048,
            loss,
            ..Default::default()
        };
        let (theta, trace) = wind_sampled(&g, &judge, &theta0, &cfg, Some(&pi_ref)).unwrap();
        assert_eq!(trace.len(), 11);
        let d = avg_l1(&theta.to_tabular().unwrap(), &pi_ref, g.rho()).unwrap();
        assert!(d <= 0.05, "{loss}: {d}");
    }
}

#[test]
fn sampled_runs_are_deterministic() {
    let g = small_game(6);
    let judge = Judge::exact(&g);
    let theta0 = ParamPolicy::tabular(2, 3, vec![0.0; 6]).unwrap();
    let cfg = SolverConfig {
        beta: 1.0,
        iters: 5,
        batch_size: 256,
        seed: 42,
        ..Default::default()
    };
    let a = wind_sampled(&g, &judge, &theta0, &cfg, None).unwrap();
    let b = wind_sampled(&g, &judge, &theta0, &cfg, None).unwrap();
    assert_eq!(a, b);
    let zero_beta = SolverConfig { beta: 0.0, ..cfg };
    assert!(wind_sampled(&g, &judge, &theta0, &zero_beta, None).is_err());
}
