//! Reward-induced preference games over a finite prompt and response set.

use crate::error::{Error, Result};

/// Responses of one prompt sorted by reward, grouped into tie levels.
#[derive(Debug, Clone, PartialEq)]
struct RankedPrompt {
    /// Response indices in ascending reward order.
    order: Vec<usize>,
    /// `order[bounds[k]..bounds[k + 1]]` is the k-th tie level.
    bounds: Vec<usize>,
    /// Tie level of every response.
    level_of: Vec<usize>,
}

impl RankedPrompt {
    fn new(rewards: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..rewards.len()).collect();
        order.sort_by(|&a, &b| rewards[a].total_cmp(&rewards[b]).then(a.cmp(&b)));
        let mut bounds = vec![0];
        let mut level_of = vec![0; rewards.len()];
        for i in 0..order.len() {
            // exact equality: ties are bitwise ties
            if i > 0 && rewards[order[i]] != rewards[order[i - 1]] {
                bounds.push(i);
            }
            level_of[order[i]] = bounds.len() - 1;
        }
        bounds.push(order.len());
        RankedPrompt {
            order,
            bounds,
            level_of,
        }
    }

    fn num_levels(&self) -> usize {
        self.bounds.len() - 1
    }

    fn level(&self, k: usize) -> &[usize] {
        &self.order[self.bounds[k]..self.bounds[k + 1]]
    }
}

/// A contextual preference game induced by a reward table.
///
/// `pref` holds the three-valued comparison `P_x(y, y')` (1 / 0.5 / 0 for
/// win / tie / loss) and `pref_geq` the weak comparison `P̄_x(y, y')`
/// (1 when `r(x, y) >= r(x, y')`). Both are stored densely, row-major as
/// `[x][y][y']`, and mirrored by a sorted-rank structure that evaluates
/// matrix-vector products in `O(|Y|)` per prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceGame {
    num_prompts: usize,
    num_responses: usize,
    rho: Vec<f64>,
    rewards: Vec<f64>,
    pref: Vec<f64>,
    pref_geq: Vec<f64>,
    optimal_sets: Vec<Vec<usize>>,
    ranked: Vec<RankedPrompt>,
}

impl PreferenceGame {
    /// Build the game from a `|X| x |Y|` reward table and a prompt
    /// distribution with full support.
    pub fn from_rewards(rewards: &[Vec<f64>], rho: Vec<f64>) -> Result<Self> {
        let num_prompts = rewards.len();
        if num_prompts == 0 {
            return Err(Error::InvalidGame("prompt set is empty".into()));
        }
        let num_responses = rewards[0].len();
        if num_responses == 0 {
            return Err(Error::InvalidGame("response set is empty".into()));
        }
        if let Some(row) = rewards.iter().find(|r| r.len() != num_responses) {
            return Err(Error::shape(
                format!("{num_responses} responses per prompt"),
                row.len(),
            ));
        }
        if rewards.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::InvalidGame("rewards must be finite".into()));
        }
        if rho.len() != num_prompts {
            return Err(Error::shape(
                format!("rho of length {num_prompts}"),
                rho.len(),
            ));
        }
        if rho.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidGame(
                "rho must be strictly positive on every prompt (full support)".into(),
            ));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGame(format!(
                "rho must sum to 1 within 1e-12, sums to {total}"
            )));
        }

        let ny = num_responses;
        let mut pref = vec![0.0; num_prompts * ny * ny];
        let mut pref_geq = vec![0.0; num_prompts * ny * ny];
        let mut optimal_sets = Vec::with_capacity(num_prompts);
        let mut ranked = Vec::with_capacity(num_prompts);
        for (x, row) in rewards.iter().enumerate() {
            for (y, &ry) in row.iter().enumerate() {
                for (y2, &ry2) in row.iter().enumerate() {
                    let idx = (x * ny + y) * ny + y2;
                    pref[idx] = if ry > ry2 {
                        1.0
                    } else if ry == ry2 {
                        0.5
                    } else {
                        0.0
                    };
                    pref_geq[idx] = if ry >= ry2 { 1.0 } else { 0.0 };
                }
            }
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            optimal_sets.push((0..ny).filter(|&y| row[y] == best).collect());
            ranked.push(RankedPrompt::new(row));
        }
        Ok(PreferenceGame {
            num_prompts,
            num_responses,
            rho,
            rewards: rewards.iter().flatten().copied().collect(),
            pref,
            pref_geq,
            optimal_sets,
            ranked,
        })
    }

    /// Same as [`PreferenceGame::from_rewards`] with a uniform prompt distribution.
    pub fn with_uniform_rho(rewards: &[Vec<f64>]) -> Result<Self> {
        let n = rewards.len().max(1);
        Self::from_rewards(rewards, vec![1.0 / n as f64; rewards.len()])
    }

    /// Single prompt, two responses with `r(a) > r(b)`.
    pub fn two_response_demo() -> Self {
        Self::with_uniform_rho(&[vec![1.0, 0.0]]).expect("valid demo game")
    }

    pub fn num_prompts(&self) -> usize {
        self.num_prompts
    }

    pub fn num_responses(&self) -> usize {
        self.num_responses
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn reward(&self, x: usize, y: usize) -> f64 {
        self.rewards[x * self.num_responses + y]
    }

    pub fn rewards_row(&self, x: usize) -> &[f64] {
        &self.rewards[x * self.num_responses..(x + 1) * self.num_responses]
    }

    pub fn pref(&self, x: usize, y: usize, y2: usize) -> f64 {
        self.pref[(x * self.num_responses + y) * self.num_responses + y2]
    }

    pub fn pref_geq(&self, x: usize, y: usize, y2: usize) -> f64 {
        self.pref_geq[(x * self.num_responses + y) * self.num_responses + y2]
    }

    /// `Y*(x)`, the responses of maximal reward.
    pub fn optimal_set(&self, x: usize) -> &[usize] {
        &self.optimal_sets[x]
    }

    /// Number of distinct reward values at prompt `x`.
    pub fn num_reward_levels(&self, x: usize) -> usize {
        self.ranked[x].num_levels()
    }

    /// Tie levels of prompt `x` in ascending reward order.
    pub fn reward_levels(&self, x: usize) -> impl Iterator<Item = &[usize]> + '_ {
        let r = &self.ranked[x];
        (0..r.num_levels()).map(move |k| r.level(k))
    }

    /// Whether every prompt has pairwise distinct rewards.
    pub fn has_distinct_rewards(&self) -> bool {
        (0..self.num_prompts).all(|x| self.num_reward_levels(x) == self.num_responses)
    }

    /// `(P_x p)_y` for every `y`, via prefix sums over the reward order.
    pub fn pref_times(&self, x: usize, probs: &[f64], out: &mut [f64]) {
        let r = &self.ranked[x];
        let mut below = 0.0;
        for k in 0..r.num_levels() {
            let level = r.level(k);
            let mass: f64 = level.iter().map(|&y| probs[y]).sum();
            for &y in level {
                out[y] = below + 0.5 * mass;
            }
            below += mass;
        }
    }

    /// `(P_x p)_y` by a dense matrix-vector product.
    pub fn pref_times_dense(&self, x: usize, probs: &[f64]) -> Vec<f64> {
        (0..self.num_responses)
            .map(|y| {
                (0..self.num_responses)
                    .map(|y2| self.pref(x, y, y2) * probs[y2])
                    .sum()
            })
            .collect()
    }

    /// `log (P̄_x p)_y` for every `y` from log-probabilities, so that masses far
    /// below the smallest positive double remain representable.
    pub fn log_pref_geq_times(&self, x: usize, log_probs: &[f64], out: &mut [f64]) {
        let r = &self.ranked[x];
        let mut acc = f64::NEG_INFINITY;
        for k in 0..r.num_levels() {
            let level = r.level(k);
            for &y in level {
                acc = crate::numeric::log_add_exp(acc, log_probs[y]);
            }
            for &y in level {
                out[y] = acc;
            }
        }
    }

    /// `(P̄_x p)_y` by a dense matrix-vector product.
    pub fn pref_geq_times_dense(&self, x: usize, probs: &[f64]) -> Vec<f64> {
        (0..self.num_responses)
            .map(|y| {
                (0..self.num_responses)
                    .map(|y2| self.pref_geq(x, y, y2) * probs[y2])
                    .sum()
            })
            .collect()
    }

    pub(crate) fn level_index(&self, x: usize, y: usize) -> usize {
        self.ranked[x].level_of[y]
    }
}
