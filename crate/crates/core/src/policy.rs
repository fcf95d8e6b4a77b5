//! Tabular policies stored as per-prompt log-probability rows.

use crate::error::{Error, Result};
use crate::numeric::normalize_log_row;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Smallest linear-space probability an interior policy may carry.
pub const DEFAULT_INTERIOR_FLOOR: f64 = 1e-300;

/// A conditional distribution `π(·|x)` for every prompt.
///
/// Probabilities are held in log space. A log-probability of `-inf` is an
/// exact zero; iterates of best-of-n style dynamics routinely reach masses
/// far below the smallest positive double.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    num_prompts: usize,
    num_responses: usize,
    log_probs: Vec<f64>,
}

impl TabularPolicy {
    /// Validate and wrap linear-space rows.
    pub fn from_probs(rows: &[Vec<f64>]) -> Result<Self> {
        let num_prompts = rows.len();
        let num_responses = rows.first().map_or(0, Vec::len);
        if num_prompts == 0 || num_responses == 0 {
            return Err(Error::InvalidPolicy("policy table is empty".into()));
        }
        let mut log_probs = Vec::with_capacity(num_prompts * num_responses);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != num_responses {
                return Err(Error::shape(num_responses, row.len()));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!(
                    "row {x} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidPolicy(format!(
                    "row {x} sums to {s}, not 1 within 1e-12"
                )));
            }
            log_probs.extend(row.iter().map(|p| p.ln()));
        }
        let mut pi = TabularPolicy {
            num_prompts,
            num_responses,
            log_probs,
        };
        pi.renormalize();
        Ok(pi)
    }

    /// Normalize arbitrary log-weights row by row. Entries may be `-inf`, but
    /// every row needs at least one finite entry and none may be `+inf`/NaN.
    pub fn from_log_weights(
        num_prompts: usize,
        num_responses: usize,
        log_weights: Vec<f64>,
    ) -> Result<Self> {
        if log_weights.len() != num_prompts * num_responses {
            return Err(Error::shape(num_prompts * num_responses, log_weights.len()));
        }
        if log_weights
            .iter()
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::NonFinite("log-weights contain NaN or +inf".into()));
        }
        let mut pi = TabularPolicy {
            num_prompts,
            num_responses,
            log_probs: log_weights,
        };
        for x in 0..num_prompts {
            if pi.log_row(x).iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(Error::InvalidPolicy(format!("row {x} has no mass")));
            }
        }
        pi.renormalize();
        Ok(pi)
    }

    pub fn uniform(num_prompts: usize, num_responses: usize) -> Self {
        TabularPolicy {
            num_prompts,
            num_responses,
            log_probs: vec![-(num_responses as f64).ln(); num_prompts * num_responses],
        }
    }

    /// Point mass on `support[x]` at every prompt.
    pub fn point_mass(num_responses: usize, support: &[usize]) -> Self {
        let mut log_probs = vec![f64::NEG_INFINITY; support.len() * num_responses];
        for (x, &y) in support.iter().enumerate() {
            log_probs[x * num_responses + y] = 0.0;
        }
        TabularPolicy {
            num_prompts: support.len(),
            num_responses,
            log_probs,
        }
    }

    /// Rows drawn from Dirichlet(1, ..., 1) by normalizing i.i.d. unit-rate
    /// exponentials.
    pub fn dirichlet<R: Rng + ?Sized>(
        num_prompts: usize,
        num_responses: usize,
        rng: &mut R,
    ) -> Self {
        let log_weights = (0..num_prompts * num_responses)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                e.ln()
            })
            .collect();
        TabularPolicy::from_log_weights(num_prompts, num_responses, log_weights)
            .expect("exponential draws are positive")
    }

    pub fn num_prompts(&self) -> usize {
        self.num_prompts
    }

    pub fn num_responses(&self) -> usize {
        self.num_responses
    }

    pub fn log_row(&self, x: usize) -> &[f64] {
        &self.log_probs[x * self.num_responses..(x + 1) * self.num_responses]
    }

    pub fn log_prob(&self, x: usize, y: usize) -> f64 {
        self.log_probs[x * self.num_responses + y]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.log_prob(x, y).exp()
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.log_row(x).iter().map(|v| v.exp()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_prompts).map(|x| self.row(x)).collect()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Every entry is at least `floor` in linear space.
    pub fn is_interior_with(&self, floor: f64) -> bool {
        let lf = floor.ln();
        self.log_probs.iter().all(|&v| v >= lf)
    }

    pub fn is_interior(&self) -> bool {
        self.is_interior_with(DEFAULT_INTERIOR_FLOOR)
    }

    /// No response has exactly zero mass (every log-probability is finite).
    pub fn is_positive(&self) -> bool {
        self.log_probs.iter().all(|v| v.is_finite())
    }

    pub(crate) fn require_positive(&self, name: &'static str) -> Result<()> {
        if self.is_positive() {
            Ok(())
        } else {
            Err(Error::NonInterior(name))
        }
    }

    pub(crate) fn check_shape(&self, num_prompts: usize, num_responses: usize) -> Result<()> {
        if self.num_prompts != num_prompts || self.num_responses != num_responses {
            return Err(Error::shape(
                format!("{num_prompts}x{num_responses}"),
                format!("{}x{}", self.num_prompts, self.num_responses),
            ));
        }
        Ok(())
    }

    fn renormalize(&mut self) {
        let ny = self.num_responses;
        for row in self.log_probs.chunks_mut(ny) {
            normalize_log_row(row);
        }
    }
}
