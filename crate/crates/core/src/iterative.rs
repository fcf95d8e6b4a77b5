//! Iterative best-of-n: repeatedly replace the policy by its best-of-n
//! policy, optionally mixed geometrically with the current iterate and the
//! reference.

use crate::bon::{bon_operator, BonMode};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use crate::metrics::{avg_l1, kl_policies};
use crate::numeric::{normalize_log_row, scaled};
use crate::policy::TabularPolicy;
use crate::trace::Trace;

/// One mixed step: `log π' = α₁·log π^{(n)} + α₂·log π + (1−α₁−α₂)·log π_ref`,
/// normalized.
pub fn mix_step(
    bon: &TabularPolicy,
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    alpha1: f64,
    alpha2: f64,
) -> Result<TabularPolicy> {
    let alpha_ref = (1.0 - alpha1 - alpha2).max(0.0);
    let ny = pi.num_responses();
    let mut out = Vec::with_capacity(pi.log_probs().len());
    for x in 0..pi.num_prompts() {
        let (b, p, r) = (bon.log_row(x), pi.log_row(x), pi_ref.log_row(x));
        let start = out.len();
        for y in 0..ny {
            out.push(scaled(alpha1, b[y]) + scaled(alpha2, p[y]) + scaled(alpha_ref, r[y]));
        }
        normalize_log_row(&mut out[start..]);
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// One round of iterative best-of-n from `pi`; `round` (1-based) only
/// varies the Monte Carlo seed between rounds.
pub fn iterative_step(
    pi: &TabularPolicy,
    pi_ref: &TabularPolicy,
    game: &PreferenceGame,
    cfg: &SolverConfig,
    mixing: bool,
    mode: BonMode,
    round: usize,
) -> Result<TabularPolicy> {
    let round_mode = match mode {
        BonMode::MonteCarlo { samples, seed } => BonMode::MonteCarlo {
            samples,
            seed: seed.wrapping_add((round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        },
        m => m,
    };
    let bon = bon_operator(pi, game, cfg.n, round_mode)?;
    if mixing {
        mix_step(&bon, pi, pi_ref, cfg.alpha1, cfg.alpha2)
    } else {
        Ok(bon)
    }
}

/// Run `cfg.iters` rounds of iterative best-of-n starting from `pi_ref`.
///
/// Without mixing the update is `π_{t+1} = π_t^{(n)}`; with mixing it is
/// [`mix_step`] using `cfg.alpha1` and `cfg.alpha2`. When `target` is given
/// the trace has columns `d_l1` and `kl_target` (`KL(target ‖ π_t)`) for
/// iterations `0..=T`; otherwise it records `l1_change` between successive
/// iterates for `1..=T`.
pub fn iterative_bon(
    pi_ref: &TabularPolicy,
    game: &PreferenceGame,
    cfg: &SolverConfig,
    mixing: bool,
    mode: BonMode,
    target: Option<&TabularPolicy>,
) -> Result<(TabularPolicy, Trace)> {
    cfg.validate()?;
    mode.validate()?;
    pi_ref.check_shape(game.num_prompts(), game.num_responses())?;
    if mixing {
        pi_ref.require_positive("pi_ref")?;
    }
    if let Some(t) = target {
        t.check_shape(game.num_prompts(), game.num_responses())?;
    }
    let rho = game.rho();
    let mut trace = match target {
        Some(_) => Trace::new(["d_l1", "kl_target"]),
        None => Trace::new(["l1_change"]),
    };
    trace.set_meta("solver", "iterative-bon");
    trace.set_meta("n", cfg.n);
    trace.set_meta("mixing", mixing);
    if mixing {
        trace.set_meta("alpha1", cfg.alpha1);
        trace.set_meta("alpha2", cfg.alpha2);
    }

    let mut pi = pi_ref.clone();
    if let Some(t) = target {
        trace.push(0, vec![avg_l1(t, &pi, rho)?, kl_policies(t, &pi, rho)])?;
    }
    for step in 1..=cfg.iters {
        let next = iterative_step(&pi, pi_ref, game, cfg, mixing, mode, step)?;
        if next.log_probs().iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!("iterate {step} has NaN entries")));
        }
        match target {
            Some(t) => trace.push(
                step as u64,
                vec![avg_l1(t, &next, rho)?, kl_policies(t, &next, rho)],
            )?,
            None => trace.push(step as u64, vec![avg_l1(&pi, &next, rho)?])?,
        }
        pi = next;
    }
    Ok((pi, trace))
}
