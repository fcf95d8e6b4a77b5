use super::judge::Judge;
use super::param::ParamPolicy;
use crate::error::{Error, Result};
use crate::game::PreferenceGame;

/// Frozen inputs of one round's regression target: step sizes, the current
/// and reference snapshots and the per-prompt offsets `Z_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyParams {
    pub beta: f64,
    pub eta: f64,
    theta_t: ParamPolicy,
    theta_ref: ParamPolicy,
    offsets: Vec<f64>,
    // cached logit tables of the two snapshots
    logits_t: Vec<f64>,
    logits_ref: Vec<f64>,
}

impl ProxyParams {
    /// Snapshots with zero offsets.
    pub fn new(beta: f64, eta: f64, theta_t: ParamPolicy, theta_ref: ParamPolicy) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::config(
                "beta",
                format!("must be finite and >= 0, got {beta}"),
            ));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::config(
                "eta",
                format!("must be finite and > 0, got {eta}"),
            ));
        }
        if theta_t.num_prompts() != theta_ref.num_prompts()
            || theta_t.num_responses() != theta_ref.num_responses()
        {
            return Err(Error::shape(
                format!("{}x{}", theta_t.num_prompts(), theta_t.num_responses()),
                format!("{}x{}", theta_ref.num_prompts(), theta_ref.num_responses()),
            ));
        }
        let logits_t = theta_t.logits();
        let logits_ref = theta_ref.logits();
        Ok(ProxyParams {
            beta,
            eta,
            offsets: vec![0.0; theta_t.num_prompts()],
            theta_t,
            theta_ref,
            logits_t,
            logits_ref,
        })
    }

    /// Replace the offsets; each must be finite with magnitude at most `bound`.
    pub fn with_offsets(mut self, offsets: Vec<f64>, bound: f64) -> Result<Self> {
        if offsets.len() != self.offsets.len() {
            return Err(Error::shape(self.offsets.len(), offsets.len()));
        }
        if let Some(bad) = offsets.iter().find(|z| !(z.abs() <= bound)) {
            return Err(Error::config(
                "z_t",
                format!("offset {bad} exceeds bound {bound}"),
            ));
        }
        self.offsets = offsets;
        Ok(self)
    }

    pub fn theta_t(&self) -> &ParamPolicy {
        &self.theta_t
    }

    pub fn theta_ref(&self) -> &ParamPolicy {
        &self.theta_ref
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub(crate) fn num_responses(&self) -> usize {
        self.theta_t.num_responses()
    }

    pub(crate) fn logit_t(&self, x: usize, y: usize) -> f64 {
        self.logits_t[x * self.num_responses() + y]
    }

    pub(crate) fn logit_ref(&self, x: usize, y: usize) -> f64 {
        self.logits_ref[x * self.num_responses() + y]
    }

    /// Regression target given the judged preference `P̂_x(y, y')`.
    pub fn target(&self, x: usize, y: usize, judged: f64) -> f64 {
        let be = self.beta * self.eta;
        (self.logit_t(x, y) + be * self.logit_ref(x, y) + self.eta * judged) / (1.0 + be)
            + self.offsets[x]
    }

    /// The implied win probability of logit `phi` at `(x, y)`:
    /// `((1+βη)/η)·φ − φ_t/η − β·φ_ref − ((1+βη)/η)·Z_t(x)`.
    pub fn implied_win(&self, x: usize, y: usize, phi: f64) -> f64 {
        let a = self.win_slope();
        a * phi
            - self.logit_t(x, y) / self.eta
            - self.beta * self.logit_ref(x, y)
            - a * self.offsets[x]
    }

    /// `∂ implied_win / ∂ φ`.
    pub fn win_slope(&self) -> f64 {
        (1.0 + self.beta * self.eta) / self.eta
    }
}

/// `(φ_t + βη·φ_ref + η·P̂_x(y, y'))/(1+βη) + Z_t(x)`.
pub fn proxy_target(pp: &ProxyParams, judge: &Judge, x: usize, y: usize, y2: usize) -> f64 {
    pp.target(x, y, judge.prob(x, y, y2))
}

/// Conditional mean of the proxy target over `y' ∼ π_θt(·|x)`, row-major
/// `[x][y]`: the minimizer of the population squared risk.
pub fn conditional_mean_oracle(
    game: &PreferenceGame,
    pp: &ProxyParams,
    judge: &Judge,
) -> Result<Vec<f64>> {
    let pi = pp.theta_t().to_tabular()?;
    let ny = game.num_responses();
    let mut out = Vec::with_capacity(game.num_prompts() * ny);
    for x in 0..game.num_prompts() {
        let row = pi.row(x);
        for y in 0..ny {
            let mean_pref: f64 = (0..ny).map(|y2| row[y2] * judge.prob(x, y, y2)).sum();
            out.push(pp.target(x, y, mean_pref));
        }
    }
    Ok(out)
}

/// `E_{x∼ρ, y,y'∼π_θt}[(target − table(x, y))²]` by exhaustive summation.
pub fn population_sq_risk(
    game: &PreferenceGame,
    pp: &ProxyParams,
    judge: &Judge,
    table: &[f64],
) -> Result<f64> {
    let pi = pp.theta_t().to_tabular()?;
    let ny = game.num_responses();
    if table.len() != game.num_prompts() * ny {
        return Err(Error::shape(game.num_prompts() * ny, table.len()));
    }
    let mut total = 0.0;
    for x in 0..game.num_prompts() {
        let row = pi.row(x);
        for y in 0..ny {
            for y2 in 0..ny {
                let r = proxy_target(pp, judge, x, y, y2) - table[x * ny + y];
                total += game.rho()[x] * row[y] * row[y2] * r * r;
            }
        }
    }
    Ok(total)
}
