use wind::experiments::{
    designed_bound_game, generate_game, limit_policy_oracle, run_beta_sweep, run_bound_check,
    run_no_mixing, ExperimentSpec, GameSource,
};
use wind::{avg_l1, c_beta, Error, TabularPolicy};

fn small_sweep() -> ExperimentSpec {
    ExperimentSpec {
        game: GameSource::Generated {
            num_prompts: 3,
            num_responses: 10,
        },
        iters: 200,
        grid: vec![0.01, 0.05, 0.1],
        ..ExperimentSpec::beta_sweep()
    }
}

#[test]
fn no_mixing_starts_at_the_initial_distances() {
    let spec = ExperimentSpec {
        game: GameSource::Generated {
            num_prompts: 4,
            num_responses: 12,
        },
        ..ExperimentSpec::no_mixing()
    };
    let res = run_no_mixing(&spec, 3).unwrap();
    let tr = res.trace("distances").unwrap();
    assert_eq!(tr.len(), spec.iters + 1);
    let game = generate_game(&spec, 3).unwrap();
    let pi_ref = TabularPolicy::uniform(4, 12);
    let limit = limit_policy_oracle(&game, &pi_ref).unwrap();
    let first = &tr.rows()[0].1;
    assert_eq!(first[0], avg_l1(&limit, &pi_ref, game.rho()).unwrap());
    // WIND starts from its own Dirichlet draw
    assert!(first[1] > 0.0 && first[1] < 2.0);
    assert_eq!(res, run_no_mixing(&spec, 3).unwrap());
}

#[test]
fn sweep_is_bit_identical_across_runs() {
    let spec = small_sweep();
    let a = run_beta_sweep(&spec, 7).unwrap();
    let b = run_beta_sweep(&spec, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.summary.rows.len(), 3);
    let d = a.summary.column("d_l1_final").unwrap();
    assert!(d[0] < d[2]);
}

#[test]
fn bound_check_rejects_large_beta() {
    let mut spec = ExperimentSpec::bound_check();
    spec.top_mass = 0.2;
    spec.grid = vec![0.01, 1.0];
    let (game, pi_ref) = designed_bound_game(&spec, 0).unwrap();
    let c = c_beta(&game, &pi_ref).unwrap();
    assert!(c.is_finite());
    match run_bound_check(&spec, 0).unwrap_err() {
        Error::BetaAboveThreshold { beta, c_beta } => {
            assert_eq!(beta, 1.0);
            assert_eq!(c_beta, c);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn uniform_reference_has_no_threshold() {
    let (game, _) = designed_bound_game(&ExperimentSpec::bound_check(), 1).unwrap();
    let uniform = TabularPolicy::uniform(game.num_prompts(), game.num_responses());
    assert_eq!(c_beta(&game, &uniform).unwrap(), f64::INFINITY);
}

#[test]
fn bound_check_passes_on_seeds() {
    let spec = ExperimentSpec {
        iters: 4000,
        grid: vec![0.01, 0.05],
        ..ExperimentSpec::bound_check()
    };
    for seed in 0..3 {
        let res = run_bound_check(&spec, seed).unwrap();
        assert!(res
            .summary
            .column("pass")
            .unwrap()
            .iter()
            .all(|&p| p == 1.0));
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ExperimentSpec::beta_sweep();
    spec.grid.clear();
    assert!(run_beta_sweep(&spec, 0).is_err());
    let mut spec = ExperimentSpec::no_mixing();
    spec.iters = 0;
    assert!(run_no_mixing(&spec, 0).is_err());
}
