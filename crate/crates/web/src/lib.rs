//! Browser bindings for three small experiments. Every entry point returns
//! a JSON string so the page needs no generated type glue.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use wind::experiments::{self, ExperimentSpec, GameSource};
use wind::sampled::{wind_sampled, Judge, ParamPolicy};
use wind::{wind_exact_solve, PreferenceGame, SolverConfig, TabularPolicy};

/// Largest table the page may request; keeps a single call under a second or so.
pub const MAX_CELLS: usize = 20_000;
pub const MAX_ITERS: usize = 20_000;

fn limits(num_prompts: usize, num_responses: usize, iters: usize) -> Result<(), String> {
    if num_prompts * num_responses > MAX_CELLS {
        return Err(format!("game has more than {MAX_CELLS} cells"));
    }
    if iters > MAX_ITERS {
        return Err(format!("at most {MAX_ITERS} iterations"));
    }
    Ok(())
}

fn generated(num_prompts: usize, num_responses: usize) -> GameSource {
    GameSource::Generated {
        num_prompts,
        num_responses,
    }
}

/// Distance to the no-mixing limit for iterative best-of-n and for WIND
/// started at a Dirichlet draw.
pub fn no_mixing_curves_json(
    num_prompts: usize,
    num_responses: usize,
    eta: f64,
    iters: usize,
    seed: u64,
) -> Result<String, String> {
    limits(num_prompts, num_responses, iters)?;
    let spec = ExperimentSpec {
        game: generated(num_prompts, num_responses),
        seeds: vec![seed],
        eta,
        iters,
        ..ExperimentSpec::no_mixing()
    };
    let r = experiments::run_no_mixing(&spec, seed).map_err(|e| e.to_string())?;
    let t = r.trace("distances").expect("distances trace");
    Ok(json!({
        "iter": t.iters(),
        "ibon": t.column("d_l1_ibon").unwrap(),
        "wind": t.column("d_l1_wind").unwrap(),
    })
    .to_string())
}

/// Final distance between mixed iterative best-of-n and WIND for `count`
/// values of β between `lo` and `hi`.
pub fn beta_sweep_json(
    num_prompts: usize,
    num_responses: usize,
    lo: f64,
    hi: f64,
    count: usize,
    iters: usize,
    seed: u64,
) -> Result<String, String> {
    limits(num_prompts, num_responses, iters)?;
    if count == 0 || count > 50 || !(lo > 0.0 && hi >= lo) {
        return Err("need 0 < lo <= hi and 1..=50 grid points".into());
    }
    let spec = ExperimentSpec {
        game: generated(num_prompts, num_responses),
        seeds: vec![seed],
        grid: experiments::linspace(lo, hi, count),
        iters,
        ..ExperimentSpec::beta_sweep()
    };
    let r = experiments::run_beta_sweep(&spec, seed).map_err(|e| e.to_string())?;
    Ok(json!({
        "beta": r.summary.column("beta").unwrap(),
        "d_l1": r.summary.column("d_l1_final").unwrap(),
    })
    .to_string())
}

/// Exact WIND against sampled WIND on the two-response game with rewards
/// (1, 0) and a uniform reference.
pub fn two_response_json(
    beta: f64,
    eta: f64,
    batch_size: usize,
    rounds: usize,
    seed: u64,
) -> Result<String, String> {
    if rounds > 200 || batch_size > 100_000 {
        return Err("at most 200 rounds and 100000 samples per round".into());
    }
    let game = PreferenceGame::two_response_demo();
    let pi_ref = TabularPolicy::uniform(1, 2);
    let cfg = SolverConfig {
        beta,
        eta,
        iters: rounds,
        batch_size,
        seed,
        ..Default::default()
    };
    let exact_cfg = SolverConfig {
        iters: 100_000,
        tol_residual: 1e-12,
        ..cfg.clone()
    };
    let (star, _) =
        wind_exact_solve(&game, &pi_ref, &pi_ref, &exact_cfg, None).map_err(|e| e.to_string())?;
    let theta0 = ParamPolicy::tabular(1, 2, vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let (theta, trace) = wind_sampled(
        &game,
        &Judge::exact(&game),
        &theta0,
        &cfg,
        Some(&star.policy),
    )
    .map_err(|e| e.to_string())?;
    let sampled = theta.to_tabular().map_err(|e| e.to_string())?;
    Ok(json!({
        "exact": star.policy.row(0),
        "sampled": sampled.row(0),
        "residual": star.residual,
        "round": trace.iters(),
        "kl": trace.column("kl_to_star").unwrap(),
        "d_l1": trace.column("d_l1_to_star").unwrap(),
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn no_mixing_curves(
    num_prompts: usize,
    num_responses: usize,
    eta: f64,
    iters: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(no_mixing_curves_json(
        num_prompts,
        num_responses,
        eta,
        iters,
        seed,
    ))
}

#[wasm_bindgen]
pub fn beta_sweep(
    num_prompts: usize,
    num_responses: usize,
    lo: f64,
    hi: f64,
    count: usize,
    iters: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(beta_sweep_json(
        num_prompts,
        num_responses,
        lo,
        hi,
        count,
        iters,
        seed,
    ))
}

#[wasm_bindgen]
pub fn two_response(
    beta: f64,
    eta: f64,
    batch_size: usize,
    rounds: usize,
    seed: u64,
) -> Result<String, JsValue> {
    js(two_response_json(beta, eta, batch_size, rounds, seed))
}

/// Parse one of the returned strings; used by the native tests.
pub fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid JSON")
}
