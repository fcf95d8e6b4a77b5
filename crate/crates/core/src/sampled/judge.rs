use crate::error::{Error, Result};
use crate::game::PreferenceGame;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the judge relates to the true preference matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JudgeMode {
    Exact,
    /// Every entry is shifted by a seeded draw from `[-delta, delta]` and
    /// clipped to `[0, 1]`.
    Perturbed {
        delta: f64,
        seed: u64,
    },
}

/// Preference oracle `P̂_x(y, y')` queried by sampled WIND.
#[derive(Debug, Clone, PartialEq)]
pub struct Judge {
    mode: JudgeMode,
    num_responses: usize,
    table: Vec<f64>,
}

impl Judge {
    pub fn new(game: &PreferenceGame, mode: JudgeMode) -> Result<Self> {
        let (nx, ny) = (game.num_prompts(), game.num_responses());
        let mut table = Vec::with_capacity(nx * ny * ny);
        for x in 0..nx {
            for y in 0..ny {
                for y2 in 0..ny {
                    table.push(game.pref(x, y, y2));
                }
            }
        }
        if let JudgeMode::Perturbed { delta, seed } = mode {
            if !(0.0..0.5).contains(&delta) {
                return Err(Error::config(
                    "delta",
                    format!("must lie in [0, 1/2), got {delta}"),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in table.iter_mut() {
                let shift = delta * rng.gen_range(-1.0..=1.0);
                *v = (*v + shift).clamp(0.0, 1.0);
            }
        }
        Ok(Judge {
            mode,
            num_responses: ny,
            table,
        })
    }

    pub fn exact(game: &PreferenceGame) -> Self {
        Self::new(game, JudgeMode::Exact).expect("exact judge is always valid")
    }

    pub fn mode(&self) -> JudgeMode {
        self.mode
    }

    pub fn prob(&self, x: usize, y: usize, y2: usize) -> f64 {
        self.table[(x * self.num_responses + y) * self.num_responses + y2]
    }

    /// `max |P̂ − P|` over every entry.
    pub fn max_deviation(&self, game: &PreferenceGame) -> f64 {
        let ny = self.num_responses;
        let mut worst: f64 = 0.0;
        for x in 0..game.num_prompts() {
            for y in 0..ny {
                for y2 in 0..ny {
                    worst = worst.max((self.prob(x, y, y2) - game.pref(x, y, y2)).abs());
                }
            }
        }
        worst
    }
}
