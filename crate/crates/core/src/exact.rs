//! Distribution-level dynamics for the regularized win-rate game: the
//! magnetic mirror-descent step, its solver, best responses and equilibrium
//! diagnostics.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use crate::metrics::{avg_l1, kl_policies, kl_row};
use crate::numeric::{log_sum_exp, normalize_log_row};
use crate::policy::TabularPolicy;
use crate::trace::Trace;

/// Outcome of [`wind_exact_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub policy: TabularPolicy,
    /// `avg_l1(π, BR(π))` at the returned policy.
    pub residual: f64,
    pub duality_gap: f64,
    /// Number of update steps applied.
    pub iters_used: usize,
    pub converged: bool,
}

fn check(pi: &TabularPolicy, game: &PreferenceGame, pi_ref: &TabularPolicy) -> Result<()> {
    pi.check_shape(game.num_prompts(), game.num_responses())?;
    pi_ref.check_shape(game.num_prompts(), game.num_responses())
}

/// One mirror-descent step,
/// `π' ∝ π^{1/(1+βη)} · π_ref^{βη/(1+βη)} · exp(η/(1+βη) · P_x π)`.
///
/// With `β = 0` the reference drops out and the step is the unregularized
/// multiplicative-weights self-play update.
pub fn wind_exact_step(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
    eta: f64,
) -> Result<TabularPolicy> {
    check(pi, game, pi_ref)?;
    if !(beta >= 0.0) || !(eta > 0.0) {
        return Err(Error::config("beta/eta", "need beta >= 0 and eta > 0"));
    }
    pi.require_positive("pi")?;
    if beta > 0.0 {
        pi_ref.require_positive("pi_ref")?;
    }
    let ny = game.num_responses();
    let be = beta * eta;
    let denom = 1.0 + be;
    let mut out = vec![0.0; pi.num_prompts() * ny];
    let mut payoff = vec![0.0; ny];
    for x in 0..pi.num_prompts() {
        game.pref_times(x, &pi.row(x), &mut payoff);
        let lp = pi.log_row(x);
        let lr = pi_ref.log_row(x);
        let dst = &mut out[x * ny..(x + 1) * ny];
        for y in 0..ny {
            let anchor = if be > 0.0 { be * lr[y] } else { 0.0 };
            dst[y] = (lp[y] + anchor + eta * payoff[y]) / denom;
        }
        normalize_log_row(dst);
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// Exact maximizer of `π' ↦ π'ᵀ P_x π_x − β·KL(π' ‖ π_ref)` per prompt:
/// `π_ref ⊙ exp(P_x π_x / β)`, normalized.
pub fn best_response(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<TabularPolicy> {
    check(pi, game, pi_ref)?;
    if beta == 0.0 {
        return Err(Error::ZeroBeta);
    }
    if !(beta > 0.0) {
        return Err(Error::config("beta", "must be > 0"));
    }
    pi_ref.require_positive("pi_ref")?;
    let ny = game.num_responses();
    let mut out = vec![0.0; pi.num_prompts() * ny];
    let mut payoff = vec![0.0; ny];
    for x in 0..pi.num_prompts() {
        game.pref_times(x, &pi.row(x), &mut payoff);
        let lr = pi_ref.log_row(x);
        let dst = &mut out[x * ny..(x + 1) * ny];
        for y in 0..ny {
            dst[y] = lr[y] + payoff[y] / beta;
        }
        normalize_log_row(dst);
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// Unregularized best response: uniform over the responses maximizing
/// `P_x π_x`.
pub fn argmax_response(pi: &TabularPolicy, game: &PreferenceGame) -> Result<TabularPolicy> {
    pi.check_shape(game.num_prompts(), game.num_responses())?;
    let ny = game.num_responses();
    let mut out = vec![f64::NEG_INFINITY; pi.num_prompts() * ny];
    let mut payoff = vec![0.0; ny];
    for x in 0..pi.num_prompts() {
        game.pref_times(x, &pi.row(x), &mut payoff);
        let top = payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for y in 0..ny {
            if payoff[y] >= top - 1e-14 {
                out[x * ny + y] = 0.0;
            }
        }
    }
    TabularPolicy::from_log_weights(pi.num_prompts(), ny, out)
}

/// `avg_l1(π, BR(π))`; zero exactly at the regularized fixed point.
pub fn fixed_point_residual(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<f64> {
    let br = best_response(pi, game, pi_ref, beta)?;
    avg_l1(pi, &br, game.rho())
}

/// Exploitability of `π` in the regularized win-rate game:
/// `E_x[BRₓᵀ P_x πₓ − β·KL(BRₓ ‖ refₓ)] − (1/2 − β·E_x KL(πₓ ‖ refₓ))`.
///
/// At `β = 0` the argmax best response is used and the gap reduces to
/// `max_{π'} P(π' ≻ π) − 1/2`.
pub fn duality_gap(
    pi: &TabularPolicy,
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<f64> {
    check(pi, game, pi_ref)?;
    let br = if beta == 0.0 {
        argmax_response(pi, game)?
    } else {
        best_response(pi, game, pi_ref, beta)?
    };
    let ny = game.num_responses();
    let mut payoff = vec![0.0; ny];
    let mut br_value = 0.0;
    for x in 0..game.num_prompts() {
        game.pref_times(x, &pi.row(x), &mut payoff);
        let gain: f64 = br.row(x).iter().zip(&payoff).map(|(b, p)| b * p).sum();
        let reg = if beta > 0.0 {
            beta * kl_row(br.log_row(x), pi_ref.log_row(x))
        } else {
            0.0
        };
        br_value += game.rho()[x] * (gain - reg);
    }
    let own = if beta > 0.0 {
        0.5 - beta * kl_policies(pi, pi_ref, game.rho())
    } else {
        0.5
    };
    Ok(br_value - own)
}

/// Iterate [`wind_exact_step`] from `pi0` until the fixed-point residual
/// drops to `cfg.tol_residual` or `cfg.iters` steps have been taken.
///
/// The trace has a `residual` column, plus `kl_to_star` (`KL(π* ‖ π_t)`) and
/// `d_l1_to_star` when `reference` is given.
pub fn wind_exact_solve(
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    pi0: &TabularPolicy,
    cfg: &SolverConfig,
    reference: Option<&TabularPolicy>,
) -> Result<(EquilibriumReport, Trace)> {
    cfg.validate()?;
    if cfg.beta <= 0.0 {
        return Err(Error::config("beta", "the exact solver needs beta > 0"));
    }
    check(pi0, game, pi_ref)?;
    pi0.require_positive("pi0")?;
    pi_ref.require_positive("pi_ref")?;
    if let Some(r) = reference {
        r.check_shape(game.num_prompts(), game.num_responses())?;
    }
    let mut trace = match reference {
        Some(_) => Trace::new(["residual", "kl_to_star", "d_l1_to_star"]),
        None => Trace::new(["residual"]),
    };
    trace.set_meta("solver", "wind-exact");
    trace.set_meta("beta", cfg.beta);
    trace.set_meta("eta", cfg.eta);

    let (nx, ny) = (game.num_prompts(), game.num_responses());
    let rho = game.rho();
    let (beta, be) = (cfg.beta, cfg.beta * cfg.eta);
    let denom = 1.0 + be;
    let ref_log = pi_ref.log_probs();
    let star = reference.map(|r| {
        (
            r.log_probs(),
            r.log_probs().iter().map(|v| v.exp()).collect::<Vec<_>>(),
        )
    });

    // The step and the residual at π_t share P·π_t, and normalizing the step
    // yields the next iterate's probabilities, so one pass per iteration
    // suffices.
    let mut logp = pi0.log_probs().to_vec();
    let mut probs: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
    let mut payoff = vec![0.0; nx * ny];
    let mut buf = vec![0.0; ny];
    let mut steps = 0;
    let residual = loop {
        let mut residual = 0.0;
        for x in 0..nx {
            let cells = x * ny..(x + 1) * ny;
            game.pref_times(x, &probs[cells.clone()], &mut payoff[cells.clone()]);
            let (lr, pay, p) = (
                &ref_log[cells.clone()],
                &payoff[cells.clone()],
                &probs[cells.clone()],
            );
            let mut top = f64::NEG_INFINITY;
            for y in 0..ny {
                buf[y] = lr[y] + pay[y] / beta;
                top = top.max(buf[y]);
            }
            let mut total = 0.0;
            for b in buf.iter_mut() {
                *b = (*b - top).exp();
                total += *b;
            }
            let l1: f64 = p.iter().zip(&buf).map(|(a, b)| (a - b / total).abs()).sum();
            residual += rho[x] * l1;
        }
        if !residual.is_finite() {
            return Err(Error::NonFinite(format!("residual at step {steps}")));
        }
        let mut row = vec![residual];
        if let Some((star_log, star_p)) = &star {
            let (mut kl, mut l1) = (0.0, 0.0);
            for x in 0..nx {
                let (mut kx, mut lx) = (0.0, 0.0);
                for c in x * ny..(x + 1) * ny {
                    if star_p[c] > 0.0 {
                        kx += star_p[c] * (star_log[c] - logp[c]);
                    }
                    lx += (star_p[c] - probs[c]).abs();
                }
                kl += rho[x] * kx.max(0.0);
                l1 += rho[x] * lx;
            }
            row.push(kl);
            row.push(l1);
        }
        trace.push(steps as u64, row)?;
        if residual <= cfg.tol_residual || steps == cfg.iters {
            break residual;
        }
        for x in 0..nx {
            let cells = x * ny..(x + 1) * ny;
            let lp = &mut logp[cells.clone()];
            let mut top = f64::NEG_INFINITY;
            for (c, v) in cells.clone().zip(lp.iter_mut()) {
                let anchor = if be > 0.0 { be * ref_log[c] } else { 0.0 };
                *v = (*v + anchor + cfg.eta * payoff[c]) / denom;
                top = top.max(*v);
            }
            let mut total = 0.0;
            for (v, p) in lp.iter().zip(&mut probs[cells.clone()]) {
                *p = (v - top).exp();
                total += *p;
            }
            let shift = top + total.ln();
            for (v, p) in lp.iter_mut().zip(&mut probs[cells]) {
                *v -= shift;
                *p /= total;
            }
        }
        steps += 1;
    };
    let pi = TabularPolicy::from_log_weights(nx, ny, logp)?;
    let gap = duality_gap(&pi, game, pi_ref, cfg.beta)?;
    let report = EquilibriumReport {
        converged: residual <= cfg.tol_residual,
        policy: pi,
        residual,
        duality_gap: gap,
        iters_used: steps,
    };
    Ok((report, trace))
}

/// Threshold below which the iterative best-of-n and WIND equilibria are
/// exponentially close:
/// `min_{x, y∉Y*(x)} Σ_{Y*} ref / (4·max{log(ref(y)/max_{Y*} ref), 0})`,
/// `+inf` when every denominator vanishes.
pub fn c_beta(game: &PreferenceGame, pi_ref: &TabularPolicy) -> Result<f64> {
    pi_ref.check_shape(game.num_prompts(), game.num_responses())?;
    pi_ref.require_positive("pi_ref")?;
    let mut best = f64::INFINITY;
    for x in 0..game.num_prompts() {
        let opt = game.optimal_set(x);
        let lr = pi_ref.log_row(x);
        let top_log = opt.iter().map(|&y| lr[y]).fold(f64::NEG_INFINITY, f64::max);
        let opt_mass = log_sum_exp(&opt.iter().map(|&y| lr[y]).collect::<Vec<_>>()).exp();
        for y in (0..game.num_responses()).filter(|y| !opt.contains(y)) {
            let d = (lr[y] - top_log).max(0.0);
            if d > 0.0 {
                best = best.min(opt_mass / (4.0 * d));
            }
        }
    }
    Ok(best)
}

/// Per-prompt ℓ1 bound `4(|Y|−|Y*(x)|)·exp(−Σ_{Y*} ref / (4β))` between the
/// two equilibria, valid for `β ∈ (0, c_β)`.
pub fn equilibrium_gap_bound(
    game: &PreferenceGame,
    pi_ref: &TabularPolicy,
    beta: f64,
) -> Result<Vec<f64>> {
    pi_ref.check_shape(game.num_prompts(), game.num_responses())?;
    if !(beta > 0.0) {
        return Err(Error::config("beta", "bound needs beta > 0"));
    }
    Ok((0..game.num_prompts())
        .map(|x| {
            let opt = game.optimal_set(x);
            let mass: f64 = opt.iter().map(|&y| pi_ref.prob(x, y)).sum();
            let k = (game.num_responses() - opt.len()) as f64;
            4.0 * k * (-mass / (4.0 * beta)).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sigmoid;

    fn two() -> PreferenceGame {
        PreferenceGame::two_response_demo()
    }

    fn policy_a(pa: f64) -> TabularPolicy {
        TabularPolicy::from_probs(&[vec![pa, 1.0 - pa]]).unwrap()
    }

    #[test]
    fn step_from_uniform() {
        let u = TabularPolicy::uniform(1, 2);
        let next = wind_exact_step(&u, &two(), &u, 1.0, 1.0).unwrap();
        assert!((next.prob(0, 0) - sigmoid(0.25)).abs() < 1e-15);
        assert!((next.prob(0, 0) - 0.562177).abs() < 1e-6);
    }

    #[test]
    fn analytic_fixed_point_is_stationary() {
        let u = TabularPolicy::uniform(1, 2);
        for beta in [0.25, 1.0, 3.0] {
            let star = policy_a(sigmoid(1.0 / (2.0 * beta)));
            let next = wind_exact_step(&star, &two(), &u, beta, 0.7).unwrap();
            assert!((next.prob(0, 0) - star.prob(0, 0)).abs() < 1e-12);
            let br = best_response(&star, &two(), &u, beta).unwrap();
            assert!((br.prob(0, 0) - star.prob(0, 0)).abs() < 1e-12);
            assert!(fixed_point_residual(&star, &two(), &u, beta).unwrap() < 1e-12);
        }
    }

    #[test]
    fn total_tie_game_keeps_reference() {
        let g = PreferenceGame::with_uniform_rho(&[vec![2.0; 3]]).unwrap();
        let r = TabularPolicy::from_probs(&[vec![0.2, 0.3, 0.5]]).unwrap();
        let next = wind_exact_step(&r, &g, &r, 0.5, 2.0).unwrap();
        assert!(avg_l1(&next, &r, g.rho()).unwrap() < 1e-15);
        let other = TabularPolicy::from_probs(&[vec![0.6, 0.3, 0.1]]).unwrap();
        let br = best_response(&other, &g, &r, 0.3).unwrap();
        assert!(avg_l1(&br, &r, g.rho()).unwrap() < 1e-15);
        assert_eq!(fixed_point_residual(&r, &g, &r, 0.3).unwrap(), 0.0);
        assert_eq!(duality_gap(&r, &g, &r, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn best_response_and_residual_from_uniform() {
        let u = TabularPolicy::uniform(1, 2);
        let br = best_response(&u, &two(), &u, 1.0).unwrap();
        assert!((br.prob(0, 0) - sigmoid(0.5)).abs() < 1e-15);
        let res = fixed_point_residual(&u, &two(), &u, 1.0).unwrap();
        assert!((res - 2.0 * (sigmoid(0.5) - 0.5)).abs() < 1e-15);
        assert!((res - 0.244918).abs() < 1e-6);
        assert_eq!(best_response(&u, &two(), &u, 0.0), Err(Error::ZeroBeta));
    }

    #[test]
    fn gap_from_uniform() {
        let u = TabularPolicy::uniform(1, 2);
        let s = sigmoid(0.5);
        let kl = s * (2.0 * s).ln() + (1.0 - s) * (2.0 * (1.0 - s)).ln();
        let expected = s * 0.75 + (1.0 - s) * 0.25 - kl - 0.5;
        let gap = duality_gap(&u, &two(), &u, 1.0).unwrap();
        assert!((gap - expected).abs() < 1e-15);
        assert!((gap - 0.0309298).abs() < 1e-6);
        // closed form: β·log E_ref exp(Pπ/β) − 1/2
        let closed = (0.5 * (0.75f64).exp() + 0.5 * (0.25f64).exp()).ln() - 0.5;
        assert!((gap - closed).abs() < 1e-15);
    }

    #[test]
    fn unregularized_gap() {
        let g = PreferenceGame::with_uniform_rho(&[vec![3.0, 2.0, 1.0]]).unwrap();
        let u = TabularPolicy::uniform(1, 3);
        let gap = duality_gap(&u, &g, &u, 0.0).unwrap();
        assert!((gap - (5.0 / 6.0 - 0.5)).abs() < 1e-15);
        let best = TabularPolicy::point_mass(3, &[0]);
        assert!(duality_gap(&best, &g, &u, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn solver_recovers_sigmoid() {
        let u = TabularPolicy::uniform(1, 2);
        let cfg = SolverConfig {
            beta: 1.0,
            eta: 1.0,
            ..Default::default()
        };
        let (rep, trace) = wind_exact_solve(&two(), &u, &u, &cfg, None).unwrap();
        assert!(rep.converged);
        assert!(rep.residual <= 1e-10);
        assert!((rep.policy.prob(0, 0) - sigmoid(0.5)).abs() < 1e-10);
        assert!((sigmoid(0.5) - 0.622459).abs() < 1e-6);
        assert_eq!(trace.len(), rep.iters_used + 1);
        assert!(rep.duality_gap.abs() <= 1e-9);

        let (again, t2) = wind_exact_solve(&two(), &u, &rep.policy, &cfg, None).unwrap();
        assert_eq!(again.iters_used, 0);
        assert_eq!(t2.len(), 1);
    }

    #[test]
    fn solver_matches_repeated_steps() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g =
            PreferenceGame::with_uniform_rho(&[vec![0.3, 0.1, 0.3, 0.9], vec![2.0, 1.0, 0.0, 1.5]])
                .unwrap();
        let r = TabularPolicy::dirichlet(2, 4, &mut rng);
        let pi0 = TabularPolicy::dirichlet(2, 4, &mut rng);
        let star = TabularPolicy::dirichlet(2, 4, &mut rng);
        let cfg = SolverConfig {
            beta: 0.3,
            eta: 0.7,
            iters: 12,
            tol_residual: 1e-300,
            ..Default::default()
        };
        let (rep, trace) = wind_exact_solve(&g, &r, &pi0, &cfg, Some(&star)).unwrap();
        assert_eq!(rep.iters_used, 12);
        let mut pi = pi0.clone();
        for t in 0..=12 {
            if t > 0 {
                pi = wind_exact_step(&pi, &g, &r, 0.3, 0.7).unwrap();
            }
            let row = &trace.rows()[t].1;
            assert!((row[0] - fixed_point_residual(&pi, &g, &r, 0.3).unwrap()).abs() < 1e-13);
            assert!((row[1] - kl_policies(&star, &pi, g.rho())).abs() < 1e-13);
            assert!((row[2] - avg_l1(&star, &pi, g.rho()).unwrap()).abs() < 1e-13);
        }
        assert!(avg_l1(&pi, &rep.policy, g.rho()).unwrap() < 1e-13);
    }

    #[test]
    fn solver_rejects_point_mass_start() {
        let u = TabularPolicy::uniform(1, 2);
        let pm = TabularPolicy::point_mass(2, &[0]);
        let cfg = SolverConfig {
            beta: 1.0,
            ..Default::default()
        };
        assert_eq!(
            wind_exact_solve(&two(), &u, &pm, &cfg, None).unwrap_err(),
            Error::NonInterior("pi0")
        );
        assert!(wind_exact_step(&pm, &two(), &u, 1.0, 1.0).is_err());
    }

    #[test]
    fn c_beta_examples() {
        let g = two();
        let u = TabularPolicy::uniform(1, 2);
        assert_eq!(c_beta(&g, &u).unwrap(), f64::INFINITY);
        let r = TabularPolicy::from_probs(&[vec![0.2, 0.8]]).unwrap();
        let c = c_beta(&g, &r).unwrap();
        assert!((c - 0.2 / (4.0 * 4f64.ln())).abs() < 1e-15);
        assert!((c - 0.036068).abs() < 1e-6);

        // a fully tied prompt contributes nothing
        let g2 = PreferenceGame::with_uniform_rho(&[vec![1.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let r2 = TabularPolicy::from_probs(&[vec![0.2, 0.8], vec![0.1, 0.9]]).unwrap();
        assert!((c_beta(&g2, &r2).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn bound_examples() {
        let g = PreferenceGame::with_uniform_rho(&[vec![1.0, 0.0, -1.0], vec![4.0; 3]]).unwrap();
        let r = TabularPolicy::from_probs(&[vec![0.9, 0.05, 0.05], vec![0.2, 0.3, 0.5]]).unwrap();
        let b = equilibrium_gap_bound(&g, &r, 0.005).unwrap();
        assert!((b[0] - 8.0 * (-45.0f64).exp()).abs() < 1e-30);
        assert!((b[0] / 2.29e-19 - 1.0).abs() < 0.01);
        assert_eq!(b[1], 0.0);
        let grid = [0.001, 0.01, 0.05, 0.1, 1.0];
        let vals: Vec<f64> = grid
            .iter()
            .map(|&beta| equilibrium_gap_bound(&g, &r, beta).unwrap()[0])
            .collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }
}
