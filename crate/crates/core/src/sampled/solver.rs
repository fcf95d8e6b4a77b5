use super::batch::sample_batch;
use super::inner::inner_minimize;
use super::judge::Judge;
use super::param::ParamPolicy;
use super::proxy::ProxyParams;
use super::risk::{evaluate, Risk};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use crate::metrics::{avg_l1, kl_policies};
use crate::policy::TabularPolicy;
use crate::trace::Trace;

/// Seed of the batch drawn in round `round` (0-based).
pub fn round_seed(seed: u64, round: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Sample-based WIND: `cfg.iters` rounds of drawing `cfg.batch_size` tuples
/// from the current policy and fitting the next parameters to the proxy
/// target built from frozen snapshots. `policy0` doubles as the reference
/// policy.
///
/// With `reference` the trace has columns `kl_to_star` (`KL(π* ‖ π_θt)`) and
/// `d_l1_to_star` for rounds `0..=T`; otherwise it records the fitted
/// `risk` for rounds `1..=T`.
pub fn wind_sampled(
    game: &PreferenceGame,
    judge: &Judge,
    policy0: &ParamPolicy,
    cfg: &SolverConfig,
    reference: Option<&TabularPolicy>,
) -> Result<(ParamPolicy, Trace)> {
    cfg.validate()?;
    if cfg.beta <= 0.0 {
        return Err(Error::config("beta", "sampled WIND needs beta > 0"));
    }
    if policy0.num_prompts() != game.num_prompts()
        || policy0.num_responses() != game.num_responses()
    {
        return Err(Error::shape(
            format!("{}x{}", game.num_prompts(), game.num_responses()),
            format!("{}x{}", policy0.num_prompts(), policy0.num_responses()),
        ));
    }
    if let Some(r) = reference {
        r.check_shape(game.num_prompts(), game.num_responses())?;
    }
    let risk = Risk::from_loss(cfg.loss, cfg.nce_p);
    let mut trace = match reference {
        Some(_) => Trace::new(["kl_to_star", "d_l1_to_star"]),
        None => Trace::new(["risk"]),
    };
    trace.set_meta("solver", "wind-sampled");
    trace.set_meta("loss", cfg.loss);
    trace.set_meta("M", cfg.batch_size);
    trace.set_meta("seed", cfg.seed);

    let distances = |theta: &ParamPolicy, r: &TabularPolicy| -> Result<Vec<f64>> {
        let pi = theta.to_tabular()?;
        Ok(vec![
            kl_policies(r, &pi, game.rho()),
            avg_l1(r, &pi, game.rho())?,
        ])
    };
    let mut theta = policy0.clone();
    if let Some(r) = reference {
        trace.push(0, distances(&theta, r)?)?;
    }
    for round in 0..cfg.iters {
        let batch = sample_batch(
            &theta,
            game,
            judge,
            cfg.batch_size,
            cfg.nce_p,
            round_seed(cfg.seed, round),
        )?;
        let pp = ProxyParams::new(cfg.beta, cfg.eta, theta.clone(), policy0.clone())?;
        let fit = inner_minimize(
            |th| evaluate(risk, th, &batch, &pp),
            &theta,
            cfg.inner_steps,
            cfg.inner_lr,
        )?;
        let row = match reference {
            Some(r) => distances(&fit.theta, r)?,
            None => vec![fit.final_risk()],
        };
        trace.push(round as u64 + 1, row)?;
        theta = fit.theta;
    }
    Ok((theta, trace))
}
