use super::judge::Judge;
use super::param::ParamPolicy;
use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use rand::distributions::{Bernoulli, Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One `(x, y, y')` draw with its judge label and noise label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: usize,
    pub y: usize,
    pub y2: usize,
    /// `P̂_x(y, y')` as reported by the judge.
    pub judged: f64,
    /// Draw from `Ber(P̂_x(y, y'))`.
    pub win: bool,
    /// Draw from `Ber(p)`, used by the NCE loss.
    pub noise: bool,
    /// Contribution to the empirical average (`1/M` for sampled batches).
    pub weight: f64,
}

/// Training data for one round of sampled WIND.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<Sample>,
    /// `None` for exhaustive enumeration.
    pub seed: Option<u64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every `(x, y, y', win, noise)` combination weighted by its probability
    /// under `ρ`, `policy`, the judge and `Ber(p)`; zero-weight entries are
    /// dropped. Averages over this batch are population expectations.
    pub fn exhaustive(
        policy: &ParamPolicy,
        game: &PreferenceGame,
        judge: &Judge,
        p: f64,
    ) -> Result<Self> {
        let pi = policy.to_tabular()?;
        let ny = game.num_responses();
        let mut samples = Vec::new();
        for x in 0..game.num_prompts() {
            let row = pi.row(x);
            for y in 0..ny {
                for y2 in 0..ny {
                    let base = game.rho()[x] * row[y] * row[y2];
                    let judged = judge.prob(x, y, y2);
                    for (win, pw) in [(true, judged), (false, 1.0 - judged)] {
                        for (noise, pn) in [(true, p), (false, 1.0 - p)] {
                            let weight = base * pw * pn;
                            if weight > 0.0 {
                                samples.push(Sample {
                                    x,
                                    y,
                                    y2,
                                    judged,
                                    win,
                                    noise,
                                    weight,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(SampleBatch {
            samples,
            seed: None,
        })
    }
}

/// Draw `m` tuples `x ∼ ρ`, `y, y' ∼ π(·|x)` with their Bernoulli labels,
/// deterministically from `seed`.
pub fn sample_batch(
    policy: &ParamPolicy,
    game: &PreferenceGame,
    judge: &Judge,
    m: usize,
    p: f64,
    seed: u64,
) -> Result<SampleBatch> {
    if m == 0 {
        return Err(Error::config("M", "must be >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config(
            "nce_p",
            format!("must lie in (0, 1), got {p}"),
        ));
    }
    if policy.num_prompts() != game.num_prompts() || policy.num_responses() != game.num_responses()
    {
        return Err(Error::shape(
            format!("{}x{}", game.num_prompts(), game.num_responses()),
            format!("{}x{}", policy.num_prompts(), policy.num_responses()),
        ));
    }
    let pi = policy.to_tabular()?;
    let prompts = WeightedIndex::new(game.rho()).map_err(|e| Error::InvalidGame(e.to_string()))?;
    let rows = (0..game.num_prompts())
        .map(|x| WeightedIndex::new(pi.row(x)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidPolicy(e.to_string()))?;
    let noise_dist = Bernoulli::new(p).map_err(|e| Error::config("nce_p", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = 1.0 / m as f64;
    let samples = (0..m)
        .map(|_| {
            let x = prompts.sample(&mut rng);
            let y = rows[x].sample(&mut rng);
            let y2 = rows[x].sample(&mut rng);
            let judged = judge.prob(x, y, y2);
            let win = rand::Rng::gen_bool(&mut rng, judged);
            let noise = noise_dist.sample(&mut rng);
            Sample {
                x,
                y,
                y2,
                judged,
                win,
                noise,
                weight,
            }
        })
        .collect();
    Ok(SampleBatch {
        samples,
        seed: Some(seed),
    })
}
