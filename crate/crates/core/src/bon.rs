//! Best-of-n operators on tabular policies.
//!
//! Three views of "draw n responses, keep the highest-reward one":
//! the closed form `n·π·(P̄π)^{n-1}` (renormalized), the exact order-statistics
//! distribution with uniform tie-breaking, and a seeded Monte Carlo estimate.

use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use crate::numeric::{log1m_exp, log_add_exp, normalize_log_row};
use crate::policy::TabularPolicy;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Which best-of-n operator drives iterative best-of-n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BonMode {
    /// `n·π(y)·(P̄_x(y,:)π)^{n−1}`, renormalized per prompt.
    ClosedForm,
    /// Exact distribution of the selected response.
    OrderStatistics,
    /// Empirical frequencies over `samples` draws per prompt.
    MonteCarlo { samples: usize, seed: u64 },
}

impl BonMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            BonMode::MonteCarlo { samples: 0, .. } => Err(Error::config(
                "mc_samples",
                "Monte Carlo BoN needs at least one sample",
            )),
            _ => Ok(()),
        }
    }
}

fn check(pi: &TabularPolicy, game: &PreferenceGame, n: usize) -> Result<()> {
    pi.check_shape(game.num_prompts(), game.num_responses())?;
    if n < 1 {
        return Err(Error::config("n", "must be >= 1"));
    }
    Ok(())
}

/// Unnormalized log of the closed-form best-of-n weights,
/// `log n + log π(y) + (n−1)·log(P̄_x(y,:)π)`, row-major.
pub(crate) fn closed_form_log_weights(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    n: usize,
) -> Vec<f64> {
    let ny = game.num_responses();
    let ln_n = (n as f64).ln();
    let exponent = (n - 1) as f64;
    let mut out = vec![0.0; pi.num_prompts() * ny];
    let mut geq = vec![0.0; ny];
    for x in 0..pi.num_prompts() {
        let row = pi.log_row(x);
        game.log_pref_geq_times(x, row, &mut geq);
        for y in 0..ny {
            out[x * ny + y] = if row[y] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if exponent == 0.0 {
                ln_n + row[y]
            } else {
                ln_n + row[y] + exponent * geq[y]
            };
        }
    }
    out
}

/// Closed-form best-of-n operator, renormalized (the raw expression sums to
/// more than one because a response weakly beats itself).
pub fn bon_closed_form_operator(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    n: usize,
) -> Result<TabularPolicy> {
    check(pi, game, n)?;
    TabularPolicy::from_log_weights(
        pi.num_prompts(),
        pi.num_responses(),
        closed_form_log_weights(pi, game, n),
    )
}

/// Exact best-of-n distribution with ties among drawn maximizers broken
/// uniformly.
///
/// For a reward level `k` with cumulative mass `F_k` (levels at or below `k`)
/// and mass `m_k`, the selected response lands in level `k` with probability
/// `F_k^n − F_{k−1}^n`, split across the level in proportion to `π`.
pub fn bon_exact_operator(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    n: usize,
) -> Result<TabularPolicy> {
    check(pi, game, n)?;
    let ny = game.num_responses();
    let nf = n as f64;
    let mut out = vec![f64::NEG_INFINITY; pi.num_prompts() * ny];
    for x in 0..pi.num_prompts() {
        let row = pi.log_row(x);
        let dst = &mut out[x * ny..(x + 1) * ny];
        let mut log_below = f64::NEG_INFINITY;
        for level in game.reward_levels(x) {
            let log_mass = level
                .iter()
                .fold(f64::NEG_INFINITY, |acc, &y| log_add_exp(acc, row[y]));
            let log_upto = log_add_exp(log_below, log_mass);
            if log_mass > f64::NEG_INFINITY {
                // log(F_k^n − F_{k−1}^n) − log m_k
                let log_level = nf * log_upto + log1m_exp(nf * (log_below - log_upto)) - log_mass;
                for &y in level {
                    dst[y] = row[y] + log_level;
                }
            }
            log_below = log_upto;
        }
        normalize_log_row(dst);
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// Seeded Monte Carlo estimate of the best-of-n distribution. Prompt `x`
/// draws from its own ChaCha stream, so results do not depend on scheduling.
pub fn bon_monte_carlo(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<TabularPolicy> {
    check(pi, game, n)?;
    BonMode::MonteCarlo { samples, seed }.validate()?;
    let ny = game.num_responses();
    let mut out = Vec::with_capacity(pi.num_prompts() * ny);
    let mut draws = vec![0usize; n];
    for x in 0..pi.num_prompts() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(x as u64);
        let probs = pi.row(x);
        let sampler = WeightedIndex::new(&probs)
            .map_err(|e| Error::InvalidPolicy(format!("row {x}: {e}")))?;
        let mut counts = vec![0u64; ny];
        for _ in 0..samples {
            for d in draws.iter_mut() {
                *d = sampler.sample(&mut rng);
            }
            let top = draws
                .iter()
                .map(|&y| game.level_index(x, y))
                .max()
                .expect("n >= 1");
            let winners: Vec<usize> = draws
                .iter()
                .copied()
                .filter(|&y| game.level_index(x, y) == top)
                .collect();
            let pick = if winners.len() == 1 {
                winners[0]
            } else {
                winners[rng.gen_range(0..winners.len())]
            };
            counts[pick] += 1;
        }
        out.extend(counts.iter().map(|&c| (c as f64 / samples as f64).ln()));
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// Apply the operator selected by `mode`.
pub fn bon_operator(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    n: usize,
    mode: BonMode,
) -> Result<TabularPolicy> {
    match mode {
        BonMode::ClosedForm => bon_closed_form_operator(pi, game, n),
        BonMode::OrderStatistics => bon_exact_operator(pi, game, n),
        BonMode::MonteCarlo { samples, seed } => bon_monte_carlo(pi, game, n, samples, seed),
    }
}
