//! Scalar metrics on policies: win rate, KL, average ℓ1 and the two
//! objectives built from them.

use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use crate::policy::TabularPolicy;

fn check_pair(a: &TabularPolicy, b: &TabularPolicy) -> Result<()> {
    b.check_shape(a.num_prompts(), a.num_responses())
}

/// `P(π ≻ π') = E_x πₓᵀ P_x π'ₓ`.
pub fn win_rate(pi: &TabularPolicy, pi2: &TabularPolicy, game: &PreferenceGame) -> Result<f64> {
    pi.check_shape(game.num_prompts(), game.num_responses())?;
    check_pair(pi, pi2)?;
    let mut buf = vec![0.0; game.num_responses()];
    let mut total = 0.0;
    for x in 0..game.num_prompts() {
        game.pref_times(x, &pi2.row(x), &mut buf);
        let inner: f64 = pi.row(x).iter().zip(&buf).map(|(p, q)| p * q).sum();
        total += game.rho()[x] * inner;
    }
    Ok(total)
}

/// Per-prompt `KL(π(·|x) ‖ π'(·|x))`; `+inf` when absolute continuity fails.
pub fn kl_row(log_p: &[f64], log_q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&lp, &lq) in log_p.iter().zip(log_q) {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        if lq == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        s += lp.exp() * (lp - lq);
    }
    s.max(0.0)
}

/// `E_{x∼ρ} KL(π(·|x) ‖ π'(·|x))`.
///
/// # Panics
/// On shape mismatch between the two policies and `rho`.
pub fn kl_policies(pi: &TabularPolicy, pi2: &TabularPolicy, rho: &[f64]) -> f64 {
    check_pair(pi, pi2).expect("kl_policies: policy shapes differ");
    assert_eq!(rho.len(), pi.num_prompts(), "kl_policies: rho length");
    rho.iter()
        .enumerate()
        .map(|(x, &w)| w * kl_row(pi.log_row(x), pi2.log_row(x)))
        .sum()
}

/// `E_{x∼ρ} ‖πₓ − π'ₓ‖₁`.
pub fn avg_l1(pi: &TabularPolicy, pi2: &TabularPolicy, rho: &[f64]) -> Result<f64> {
    check_pair(pi, pi2)?;
    if rho.len() != pi.num_prompts() {
        return Err(Error::shape(pi.num_prompts(), rho.len()));
    }
    Ok(per_prompt_l1(pi, pi2)
        .iter()
        .zip(rho)
        .map(|(d, w)| d * w)
        .sum())
}

/// `‖πₓ − π'ₓ‖₁` for every prompt.
pub fn per_prompt_l1(pi: &TabularPolicy, pi2: &TabularPolicy) -> Vec<f64> {
    (0..pi.num_prompts())
        .map(|x| {
            pi.log_row(x)
                .iter()
                .zip(pi2.log_row(x))
                .map(|(a, b)| (a.exp() - b.exp()).abs())
                .sum()
        })
        .collect()
}

/// KL-regularized win rate against the reference:
/// `P(π ≻ π_ref) − β·KL(π ‖ π_ref)`.
pub fn wr_objective(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> f64 {
    let wr = win_rate(pi, pi_ref, game).expect("wr_objective: shape mismatch");
    if beta == 0.0 {
        return wr;
    }
    wr - beta * kl_policies(pi, pi_ref, game.rho())
}

/// The log-win-rate payoff
/// `E_{x, y∼π}[log E_{y'∼π'} P̄_x(y, y')] − β·KL(π ‖ π_ref)`.
///
/// Returns `-inf` when some response with positive mass under `π` never
/// weakly beats `π'`.
pub fn log_win_objective(
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> f64 {
    pi.check_shape(game.num_prompts(), game.num_responses())
        .expect("log_win_objective: shape mismatch");
    check_pair(pi, pi2).expect("log_win_objective: shape mismatch");
    let mut buf = vec![0.0; game.num_responses()];
    let mut total = 0.0;
    for x in 0..game.num_prompts() {
        game.log_pref_geq_times(x, pi2.log_row(x), &mut buf);
        let mut inner = 0.0;
        for (&lp, &lw) in pi.log_row(x).iter().zip(&buf) {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            if lw == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            inner += lp.exp() * lw;
        }
        total += game.rho()[x] * inner;
    }
    if beta == 0.0 {
        return total;
    }
    total - beta * kl_policies(pi, pi_ref, game.rho())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> PreferenceGame {
        PreferenceGame::with_uniform_rho(&[vec![3.0, 2.0, 1.0]]).unwrap()
    }

    #[test]
    fn win_rate_examples() {
        let g = three();
        let u = TabularPolicy::uniform(1, 3);
        let best = TabularPolicy::point_mass(3, &[0]);
        assert_eq!(win_rate(&u, &u, &g).unwrap(), 0.5);
        assert!((win_rate(&best, &u, &g).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        let wrong = TabularPolicy::uniform(2, 3);
        assert!(win_rate(&wrong, &u, &g).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = TabularPolicy::from_probs(&[vec![0.75, 0.25]]).unwrap();
        let u = TabularPolicy::uniform(1, 2);
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert!((kl_policies(&p, &u, &[1.0]) - expected).abs() < 1e-15);
        assert!((expected - 0.130812).abs() < 1e-6);
        assert_eq!(kl_policies(&p, &p, &[1.0]), 0.0);
        let pm = TabularPolicy::point_mass(2, &[0]);
        assert_eq!(kl_policies(&u, &pm, &[1.0]), f64::INFINITY);
        assert!(kl_policies(&pm, &u, &[1.0]).is_finite());
    }

    #[test]
    fn l1_examples() {
        let p = TabularPolicy::from_probs(&[vec![0.75, 0.25]]).unwrap();
        let u = TabularPolicy::uniform(1, 2);
        assert!((avg_l1(&p, &u, &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(avg_l1(&p, &p, &[1.0]).unwrap(), 0.0);
        let a = TabularPolicy::point_mass(3, &[0, 1]);
        let b = TabularPolicy::point_mass(3, &[2, 0]);
        assert_eq!(avg_l1(&a, &b, &[0.5, 0.5]).unwrap(), 2.0);
        assert!(avg_l1(&a, &b, &[1.0]).is_err());
    }

    #[test]
    fn wr_objective_examples() {
        let g = three();
        let u = TabularPolicy::uniform(1, 3);
        assert_eq!(wr_objective(&u, &g, &u, 0.7), 0.5);
        let best = TabularPolicy::point_mass(3, &[0]);
        assert!((wr_objective(&best, &g, &u, 0.0) - 5.0 / 6.0).abs() < 1e-15);

        let tie = PreferenceGame::with_uniform_rho(&[vec![0.0, 0.0]]).unwrap();
        let p = TabularPolicy::from_probs(&[vec![0.75, 0.25]]).unwrap();
        let u2 = TabularPolicy::uniform(1, 2);
        let v = wr_objective(&p, &tie, &u2, 1.0);
        assert!((v - (0.5 - (0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln()))).abs() < 1e-15);
        assert!((v - 0.369188).abs() < 1e-6);
    }

    #[test]
    fn log_win_examples() {
        let g = three();
        let u = TabularPolicy::uniform(1, 3);
        let v = log_win_objective(&u, &u, &g, &u, 0.0);
        let expected = (0.0 + (2.0f64 / 3.0).ln() + (1.0f64 / 3.0).ln()) / 3.0;
        assert!((v - expected).abs() < 1e-15);
        assert!((v + 0.501359).abs() < 1e-6);

        let best = TabularPolicy::point_mass(3, &[0]);
        assert_eq!(log_win_objective(&best, &best, &g, &u, 0.0), 0.0);

        let worst = TabularPolicy::point_mass(3, &[2]);
        let p = TabularPolicy::from_probs(&[vec![0.5, 0.3, 0.2]]).unwrap();
        let v = log_win_objective(&p, &worst, &g, &u, 0.8);
        assert!((v + 0.8 * kl_policies(&p, &u, &[1.0])).abs() < 1e-15);

        // lower responses never weakly beat the best one
        assert_eq!(log_win_objective(&u, &best, &g, &u, 0.0), f64::NEG_INFINITY);
    }
}
