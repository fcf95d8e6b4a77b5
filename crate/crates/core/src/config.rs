use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Empirical risk minimized in each round of sampled WIND.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Sq,
    Kl,
    Nce,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sq" => Ok(LossKind::Sq),
            "kl" => Ok(LossKind::Kl),
            "nce" => Ok(LossKind::Nce),
            other => Err(Error::config(
                "loss",
                format!("expected sq|kl|nce, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Sq => "sq",
            LossKind::Kl => "kl",
            LossKind::Nce => "nce",
        })
    }
}

/// Hyperparameters shared by every solver.
///
/// Fields are public for struct-update construction; call
/// [`SolverConfig::validated`] (solvers do so on entry) to enforce ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// KL regularization strength, `>= 0`.
    pub beta: f64,
    /// Mirror-descent learning rate, `> 0`.
    pub eta: f64,
    /// Best-of-n sample count, `>= 1`.
    pub n: usize,
    /// Weight of the best-of-n policy in the geometric mixture.
    pub alpha1: f64,
    /// Weight of the current iterate in the geometric mixture.
    pub alpha2: f64,
    /// Iteration (or round) budget.
    pub iters: usize,
    /// Samples per round for sampled WIND.
    pub batch_size: usize,
    pub loss: LossKind,
    /// Noise rate for the NCE loss, in `(0, 1)`.
    pub nce_p: f64,
    pub seed: u64,
    pub tol_residual: f64,
    pub inner_steps: usize,
    pub inner_lr: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 0.1,
            eta: 1.0,
            n: 2,
            alpha1: 1.0,
            alpha2: 0.0,
            iters: 10_000,
            batch_size: 4096,
            loss: LossKind::Sq,
            nce_p: 0.5,
            seed: 0,
            tol_residual: 1e-10,
            inner_steps: 200,
            inner_lr: 0.5,
        }
    }
}

impl SolverConfig {
    /// Mixing rates under which iterative best-of-n solves the regularized
    /// log-win-rate game: `α₁ = η/((1+βη)(n−1))`, `α₂ = (n−1−η)/((1+βη)(n−1))`.
    pub fn with_mixing_preset(beta: f64, eta: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("n", "mixing preset needs n >= 2"));
        }
        let m = (n - 1) as f64;
        if eta > m {
            return Err(Error::config(
                "eta",
                format!("mixing preset needs eta <= n - 1 = {m}, got {eta}"),
            ));
        }
        let d = (1.0 + beta * eta) * m;
        SolverConfig {
            beta,
            eta,
            n,
            alpha1: eta / d,
            alpha2: (m - eta) / d,
            ..Default::default()
        }
        .validated()
    }

    /// Rates for the plain `π_{t+1} = π_t^{(n)}` recursion.
    pub fn no_mixing(n: usize) -> Result<Self> {
        SolverConfig {
            beta: 0.0,
            n,
            alpha1: 1.0,
            alpha2: 0.0,
            ..Default::default()
        }
        .validated()
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(key: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite"))
            }
        }
        finite("beta", self.beta)?;
        finite("eta", self.eta)?;
        finite("alpha1", self.alpha1)?;
        finite("alpha2", self.alpha2)?;
        finite("nce_p", self.nce_p)?;
        finite("inner_lr", self.inner_lr)?;
        if self.beta < 0.0 {
            return Err(Error::config(
                "beta",
                format!("must be >= 0, got {}", self.beta),
            ));
        }
        if self.eta <= 0.0 {
            return Err(Error::config(
                "eta",
                format!("must be > 0, got {}", self.eta),
            ));
        }
        if self.n < 1 {
            return Err(Error::config("n", "must be >= 1"));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 <= 1.0) {
            return Err(Error::config(
                "alpha1",
                format!("must lie in (0, 1], got {}", self.alpha1),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha2) {
            return Err(Error::config(
                "alpha2",
                format!("must lie in [0, 1], got {}", self.alpha2),
            ));
        }
        if self.alpha1 + self.alpha2 > 1.0 + 1e-12 {
            return Err(Error::config("alpha2", "alpha1 + alpha2 must not exceed 1"));
        }
        if self.iters < 1 {
            return Err(Error::config("T", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("M", "must be >= 1"));
        }
        if !(self.nce_p > 0.0 && self.nce_p < 1.0) {
            return Err(Error::config(
                "nce_p",
                format!("must lie in (0, 1), got {}", self.nce_p),
            ));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::config("tol_residual", "must be > 0"));
        }
        if self.inner_steps < 1 {
            return Err(Error::config("inner_steps", "must be >= 1"));
        }
        if self.inner_lr <= 0.0 {
            return Err(Error::config("inner_lr", "must be > 0"));
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}
