//! Contextual-bandit experiments: no-mixing convergence, the β sweep, the
//! equilibrium-gap bound check and sampled-WIND convergence.
//!
//! Every result is a pure function of `(spec, seed)`.

use crate::bon::BonMode;
use crate::config::{LossKind, SolverConfig};
use crate::error::{Error, Result};
use crate::exact::{c_beta, equilibrium_gap_bound, wind_exact_solve, wind_exact_step};
use crate::game::PreferenceGame;
use crate::iterative::{iterative_bon, iterative_step};
use crate::metrics::avg_l1;
use crate::policy::TabularPolicy;
use crate::sampled::{wind_sampled, Judge, JudgeMode, ParamPolicy};
use crate::trace::Trace;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    NoMixing,
    BetaSweep,
    BoundCheck,
    SampledConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    /// i.i.d. standard-normal rewards with uniform `ρ` and uniform reference.
    Generated {
        num_prompts: usize,
        num_responses: usize,
    },
    Explicit(PreferenceGame),
}

/// Starting policy for the WIND side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    UniformRef,
    /// Each row drawn from the flat Dirichlet distribution.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub game: GameSource,
    pub seeds: Vec<u64>,
    /// β values for the sweep and bound check; the first entry is the β of
    /// sampled convergence. Unused by the no-mixing run.
    pub grid: Vec<f64>,
    pub iters: usize,
    pub eta: f64,
    pub n: usize,
    pub init: InitKind,
    pub mode: BonMode,
    /// Reference mass on the best response of the designed bound-check game.
    pub top_mass: f64,
    /// Batch-size ladder for sampled convergence.
    pub batch_sizes: Vec<usize>,
    pub loss: LossKind,
    pub nce_p: f64,
    /// Judge perturbation for sampled convergence; 0 means exact.
    pub judge_delta: f64,
    pub inner_steps: usize,
    pub inner_lr: f64,
}

impl ExperimentSpec {
    fn base(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            game: GameSource::Generated {
                num_prompts: 20,
                num_responses: 100,
            },
            seeds: (0..5).collect(),
            grid: Vec::new(),
            iters: 50,
            eta: 1.0,
            n: 2,
            init: InitKind::UniformRef,
            mode: BonMode::ClosedForm,
            top_mass: 0.9,
            batch_sizes: vec![4096],
            loss: LossKind::Sq,
            nce_p: 0.5,
            judge_delta: 0.0,
            inner_steps: 200,
            inner_lr: 0.5,
        }
    }

    /// 20×100 games, `n = 2`, `η = 16`, Dirichlet start for WIND, 50 steps.
    pub fn no_mixing() -> Self {
        ExperimentSpec {
            eta: 16.0,
            init: InitKind::Dirichlet,
            ..Self::base(ExperimentKind::NoMixing)
        }
    }

    /// β from 0.01 to 0.1 in ten steps, `T = 5000`, `η = 1`, three seeds.
    pub fn beta_sweep() -> Self {
        ExperimentSpec {
            seeds: (0..3).collect(),
            grid: linspace(0.01, 0.1, 10),
            iters: 5000,
            ..Self::base(ExperimentKind::BetaSweep)
        }
    }

    /// Four prompts, three responses, reference mass 0.9 on the best one.
    pub fn bound_check() -> Self {
        ExperimentSpec {
            game: GameSource::Generated {
                num_prompts: 4,
                num_responses: 3,
            },
            grid: vec![0.005, 0.01, 0.02],
            iters: 10_000,
            ..Self::base(ExperimentKind::BoundCheck)
        }
    }

    /// 4×8 games, `β = η = 1`, 30 rounds, batch ladder 256/1024/4096, 20 seeds.
    pub fn sampled_convergence() -> Self {
        ExperimentSpec {
            game: GameSource::Generated {
                num_prompts: 4,
                num_responses: 8,
            },
            seeds: (0..20).collect(),
            grid: vec![1.0],
            iters: 30,
            batch_sizes: vec![256, 1024, 4096],
            ..Self::base(ExperimentKind::SampledConvergence)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters < 1 {
            return Err(Error::config("T", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(
                "eta",
                format!("must be finite and > 0, got {}", self.eta),
            ));
        }
        if self.n < 1 {
            return Err(Error::config("n", "must be >= 1"));
        }
        if self.kind != ExperimentKind::NoMixing {
            if self.grid.is_empty() {
                return Err(Error::config("grid", "must not be empty"));
            }
            if let Some(b) = self.grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
                return Err(Error::config(
                    "beta",
                    format!("grid values must be finite and > 0, got {b}"),
                ));
            }
        }
        if let GameSource::Generated {
            num_prompts,
            num_responses,
        } = self.game
        {
            if num_prompts == 0 || num_responses == 0 {
                return Err(Error::config(
                    "num_responses",
                    "game dimensions must be >= 1",
                ));
            }
            if self.kind == ExperimentKind::BoundCheck && num_responses < 2 {
                return Err(Error::config(
                    "num_responses",
                    "bound check needs at least 2 responses",
                ));
            }
        }
        if self.kind == ExperimentKind::BoundCheck && !(self.top_mass > 0.0 && self.top_mass < 1.0)
        {
            return Err(Error::config("top_mass", "must lie in (0, 1)"));
        }
        if self.kind == ExperimentKind::SampledConvergence {
            if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
                return Err(Error::config("M", "batch sizes must be >= 1"));
            }
            if !(0.0..0.5).contains(&self.judge_delta) {
                return Err(Error::config("delta", "must lie in [0, 1/2)"));
            }
        }
        self.mode.validate()
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

/// Rows of named numbers summarizing a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Summary {
    fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Summary {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Traces and summary of one `(spec, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub seed: u64,
    /// Labelled traces, e.g. one per β or per batch size.
    pub traces: Vec<(String, Trace)>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn trace(&self, label: &str) -> Option<&Trace> {
        self.traces.iter().find(|(l, _)| l == label).map(|(_, t)| t)
    }
}

/// Reward table for `seed`; uniform `ρ`.
pub fn generate_game(spec: &ExperimentSpec, seed: u64) -> Result<PreferenceGame> {
    match &spec.game {
        GameSource::Explicit(g) => Ok(g.clone()),
        GameSource::Generated {
            num_prompts,
            num_responses,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rewards: Vec<Vec<f64>> = (0..*num_prompts)
                .map(|_| {
                    (0..*num_responses)
                        .map(|_| rng.sample(StandardNormal))
                        .collect()
                })
                .collect();
            let game = PreferenceGame::with_uniform_rho(&rewards)?;
            if !game.has_distinct_rewards() {
                return Err(Error::InvalidGame(format!(
                    "seed {seed} produced tied rewards"
                )));
            }
            Ok(game)
        }
    }
}

/// The no-mixing limit: `π_ref` restricted to the optimal responses of each
/// prompt and renormalized.
pub fn limit_policy_oracle(game: &PreferenceGame, pi_ref: &TabularPolicy) -> Result<TabularPolicy> {
    pi_ref.check_shape(game.num_prompts(), game.num_responses())?;
    pi_ref.require_positive("pi_ref")?;
    let ny = game.num_responses();
    let mut out = vec![f64::NEG_INFINITY; game.num_prompts() * ny];
    for x in 0..game.num_prompts() {
        for &y in game.optimal_set(x) {
            out[x * ny + y] = pi_ref.log_prob(x, y);
        }
    }
    TabularPolicy::from_log_weights(game.num_prompts(), ny, out)
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    // separate stream from the reward draws
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn initial_policy(spec: &ExperimentSpec, game: &PreferenceGame, seed: u64) -> TabularPolicy {
    match spec.init {
        InitKind::UniformRef => TabularPolicy::uniform(game.num_prompts(), game.num_responses()),
        InitKind::Dirichlet => TabularPolicy::dirichlet(
            game.num_prompts(),
            game.num_responses(),
            &mut init_rng(seed),
        ),
    }
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::config(
            "kind",
            format!("expected {kind:?}, got {:?}", spec.kind),
        ));
    }
    Ok(())
}

/// Iterative best-of-n without mixing (started at the uniform reference)
/// against unregularized WIND (started at `spec.init`), both measured by
/// `avg_l1` to the no-mixing limit. Trace `distances` has columns
/// `d_l1_ibon`, `d_l1_wind` for iterations `0..=T`.
pub fn run_no_mixing(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::NoMixing)?;
    let game = generate_game(spec, seed)?;
    let pi_ref = TabularPolicy::uniform(game.num_prompts(), game.num_responses());
    let limit = limit_policy_oracle(&game, &pi_ref)?;
    let cfg = SolverConfig {
        iters: spec.iters,
        ..SolverConfig::no_mixing(spec.n)?
    };
    let (_, ibon) = iterative_bon(&pi_ref, &game, &cfg, false, spec.mode, Some(&limit))?;
    let ibon_d = ibon.column("d_l1").expect("target column");

    let mut trace = Trace::new(["d_l1_ibon", "d_l1_wind"]);
    trace.set_meta("experiment", "no-mixing");
    trace.set_meta("seed", seed);
    trace.set_meta("eta", spec.eta);
    trace.set_meta("n", spec.n);
    let mut pi = initial_policy(spec, &game, seed);
    for t in 0..=spec.iters {
        if t > 0 {
            pi = wind_exact_step(&pi, &game, &pi_ref, 0.0, spec.eta)?;
        }
        trace.push(t as u64, vec![ibon_d[t], avg_l1(&limit, &pi, game.rho())?])?;
    }
    let mut summary = Summary::new(["seed", "d_l1_ibon_final", "d_l1_wind_final"]);
    summary.rows.push(vec![
        seed as f64,
        trace.last("d_l1_ibon").unwrap(),
        trace.last("d_l1_wind").unwrap(),
    ]);
    Ok(ExperimentResult {
        spec: spec.clone(),
        seed,
        traces: vec![("distances".into(), trace)],
        summary,
    })
}

fn sweep_cell(
    spec: &ExperimentSpec,
    game: &PreferenceGame,
    init: &TabularPolicy,
    beta: f64,
) -> Result<Trace> {
    let pi_ref = TabularPolicy::uniform(game.num_prompts(), game.num_responses());
    let cfg = SolverConfig::with_mixing_preset(beta, spec.eta, spec.n)?;
    let every = (spec.iters / 100).max(1);
    let mut trace = Trace::new(["d_l1_between"]);
    trace.set_meta("beta", beta);
    let mut ibon = init.clone();
    let mut wind = init.clone();
    trace.push(0, vec![avg_l1(&ibon, &wind, game.rho())?])?;
    for t in 1..=spec.iters {
        ibon = iterative_step(&ibon, &pi_ref, game, &cfg, true, spec.mode, t)?;
        wind = wind_exact_step(&wind, game, &pi_ref, beta, spec.eta)?;
        if t % every == 0 || t == spec.iters {
            trace.push(t as u64, vec![avg_l1(&ibon, &wind, game.rho())?])?;
        }
    }
    Ok(trace)
}

/// For each β in the grid: iterative best-of-n with the mixing preset and
/// regularized WIND, both from the same start, for `T` steps. Summary
/// columns `beta`, `d_l1_final`, `seed`; one trace per β of the distance
/// between the two iterates.
pub fn run_beta_sweep(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::BetaSweep)?;
    let game = generate_game(spec, seed)?;
    let init = initial_policy(spec, &game, seed);
    let traces = spec
        .grid
        .par_iter()
        .map(|&beta| sweep_cell(spec, &game, &init, beta))
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Summary::new(["beta", "d_l1_final", "seed"]);
    for (&beta, trace) in spec.grid.iter().zip(&traces) {
        summary
            .rows
            .push(vec![beta, trace.last("d_l1_between").unwrap(), seed as f64]);
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        seed,
        traces: spec
            .grid
            .iter()
            .map(|b| format!("beta={b}"))
            .zip(traces)
            .collect(),
        summary,
    })
}

/// The bound-check game for `seed`: rewards are a seeded permutation of
/// `0, 1, …, |Y|−1` per prompt and the reference puts `top_mass` on the best
/// response, spreading the rest evenly.
pub fn designed_bound_game(
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<(PreferenceGame, TabularPolicy)> {
    let (nx, ny) = match spec.game {
        GameSource::Generated {
            num_prompts,
            num_responses,
        } => (num_prompts, num_responses),
        GameSource::Explicit(ref g) => (g.num_prompts(), g.num_responses()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rewards = Vec::with_capacity(nx);
    let mut ref_rows = Vec::with_capacity(nx);
    for _ in 0..nx {
        let mut r: Vec<f64> = (0..ny).map(|y| y as f64).collect();
        r.shuffle(&mut rng);
        let best = r.iter().position(|&v| v == (ny - 1) as f64).unwrap();
        let rest = (1.0 - spec.top_mass) / (ny - 1) as f64;
        ref_rows.push(
            (0..ny)
                .map(|y| if y == best { spec.top_mass } else { rest })
                .collect::<Vec<_>>(),
        );
        rewards.push(r);
    }
    let game = PreferenceGame::with_uniform_rho(&rewards)?;
    let pi_ref = TabularPolicy::from_probs(&ref_rows)?;
    Ok((game, pi_ref))
}

/// For each β in the grid: the ρ-weighted distance between the mixing
/// iterative best-of-n limit and the WIND equilibrium, against the
/// per-prompt bound. Summary columns `beta`, `measured`, `bound`, `pass`.
pub fn run_bound_check(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::BoundCheck)?;
    let (game, pi_ref) = designed_bound_game(spec, seed)?;
    let c = c_beta(&game, &pi_ref)?;
    if let Some(&beta) = spec.grid.iter().find(|&&b| b >= c) {
        return Err(Error::BetaAboveThreshold { beta, c_beta: c });
    }
    let cells = spec
        .grid
        .par_iter()
        .map(|&beta| -> Result<(Vec<f64>, Trace)> {
            let cfg = SolverConfig {
                iters: spec.iters,
                tol_residual: 1e-13,
                ..SolverConfig::with_mixing_preset(beta, spec.eta, spec.n)?
            };
            let (ibon, _) = iterative_bon(&pi_ref, &game, &cfg, true, spec.mode, None)?;
            let (report, trace) = wind_exact_solve(&game, &pi_ref, &pi_ref, &cfg, None)?;
            let measured = avg_l1(&ibon, &report.policy, game.rho())?;
            let bound: f64 = equilibrium_gap_bound(&game, &pi_ref, beta)?
                .iter()
                .zip(game.rho())
                .map(|(b, r)| b * r)
                .sum();
            let pass = measured <= bound + 1e-9;
            Ok((
                vec![beta, measured, bound, f64::from(u8::from(pass))],
                trace,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Summary::new(["beta", "measured", "bound", "pass"]);
    let mut traces = Vec::new();
    for ((row, trace), beta) in cells.into_iter().zip(&spec.grid) {
        summary.rows.push(row);
        traces.push((format!("beta={beta}"), trace));
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        seed,
        traces,
        summary,
    })
}

/// Sampled WIND from the uniform reference against the exact equilibrium,
/// once per batch size in the ladder. Traces carry `kl_to_star` and
/// `d_l1_to_star` per round; summary columns `M`, `kl_final`, `d_l1_final`,
/// `seed`.
pub fn run_sampled_convergence(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    expect_kind(spec, ExperimentKind::SampledConvergence)?;
    let game = generate_game(spec, seed)?;
    let (nx, ny) = (game.num_prompts(), game.num_responses());
    let pi_ref = TabularPolicy::uniform(nx, ny);
    let beta = spec.grid[0];
    let exact_cfg = SolverConfig {
        beta,
        eta: spec.eta,
        iters: 100_000,
        tol_residual: 1e-12,
        ..Default::default()
    };
    let (star, _) = wind_exact_solve(&game, &pi_ref, &pi_ref, &exact_cfg, None)?;
    let judge = if spec.judge_delta > 0.0 {
        Judge::new(
            &game,
            JudgeMode::Perturbed {
                delta: spec.judge_delta,
                seed,
            },
        )?
    } else {
        Judge::exact(&game)
    };
    let theta0 = ParamPolicy::tabular(nx, ny, vec![0.0; nx * ny])?;
    let mut summary = Summary::new(["M", "kl_final", "d_l1_final", "seed"]);
    let mut traces = Vec::new();
    for &m in &spec.batch_sizes {
        let cfg = SolverConfig {
            beta,
            eta: spec.eta,
            iters: spec.iters,
            batch_size: m,
            loss: spec.loss,
            nce_p: spec.nce_p,
            seed,
            inner_steps: spec.inner_steps,
            inner_lr: spec.inner_lr,
            ..Default::default()
        };
        let (_, trace) = wind_sampled(&game, &judge, &theta0, &cfg, Some(&star.policy))?;
        summary.rows.push(vec![
            m as f64,
            trace.last("kl_to_star").unwrap(),
            trace.last("d_l1_to_star").unwrap(),
            seed as f64,
        ]);
        traces.push((format!("M={m}"), trace));
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        seed,
        traces,
        summary,
    })
}

/// Dispatch on `spec.kind` for one seed.
pub fn run_experiment(spec: &ExperimentSpec, seed: u64) -> Result<ExperimentResult> {
    match spec.kind {
        ExperimentKind::NoMixing => run_no_mixing(spec, seed),
        ExperimentKind::BetaSweep => run_beta_sweep(spec, seed),
        ExperimentKind::BoundCheck => run_bound_check(spec, seed),
        ExperimentKind::SampledConvergence => run_sampled_convergence(spec, seed),
    }
}

/// Run every seed of `spec` in parallel; results keep seed order.
pub fn run_all_seeds(spec: &ExperimentSpec) -> Result<Vec<ExperimentResult>> {
    spec.validate()?;
    spec.seeds
        .par_iter()
        .map(|&s| run_experiment(spec, s))
        .collect()
}
