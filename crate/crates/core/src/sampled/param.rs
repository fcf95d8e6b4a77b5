use crate::error::{Error, Result};
use crate::numeric::normalize_log_row;
use crate::policy::TabularPolicy;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// One free logit per `(x, y)`.
    TabularLogit { logits: Vec<f64> },
    /// `logit(y|x) = features(x, y) · theta`.
    LinearFeature {
        dim: usize,
        features: Vec<f64>,
        theta: Vec<f64>,
    },
}

/// Softmax policy over a logit model, either a free table or linear in fixed
/// per-`(x, y)` features.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPolicy {
    num_prompts: usize,
    num_responses: usize,
    kind: Kind,
}

fn all_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidPolicy(format!("{what} must be finite")))
    }
}

impl ParamPolicy {
    pub fn tabular(num_prompts: usize, num_responses: usize, logits: Vec<f64>) -> Result<Self> {
        if num_prompts == 0 || num_responses == 0 {
            return Err(Error::InvalidPolicy("empty prompt or response set".into()));
        }
        if logits.len() != num_prompts * num_responses {
            return Err(Error::shape(num_prompts * num_responses, logits.len()));
        }
        all_finite(&logits, "logits")?;
        Ok(ParamPolicy {
            num_prompts,
            num_responses,
            kind: Kind::TabularLogit { logits },
        })
    }

    /// Tabular logits equal to `log π`; `π` must give every response positive
    /// mass.
    pub fn from_policy(pi: &TabularPolicy) -> Result<Self> {
        if !pi.is_positive() {
            return Err(Error::NonInterior("policy"));
        }
        Self::tabular(
            pi.num_prompts(),
            pi.num_responses(),
            pi.log_probs().to_vec(),
        )
    }

    /// Linear logits; `features` is row-major `[x][y][k]` with `k < dim`.
    pub fn linear(
        num_prompts: usize,
        num_responses: usize,
        dim: usize,
        features: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if num_prompts == 0 || num_responses == 0 || dim == 0 {
            return Err(Error::InvalidPolicy(
                "empty prompt, response or feature set".into(),
            ));
        }
        if features.len() != num_prompts * num_responses * dim {
            return Err(Error::shape(
                num_prompts * num_responses * dim,
                features.len(),
            ));
        }
        if theta.len() != dim {
            return Err(Error::shape(dim, theta.len()));
        }
        all_finite(&features, "features")?;
        all_finite(&theta, "theta")?;
        Ok(ParamPolicy {
            num_prompts,
            num_responses,
            kind: Kind::LinearFeature {
                dim,
                features,
                theta,
            },
        })
    }

    pub fn num_prompts(&self) -> usize {
        self.num_prompts
    }

    pub fn num_responses(&self) -> usize {
        self.num_responses
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self.kind, Kind::TabularLogit { .. })
    }

    /// The trainable parameters (logit table or `theta`).
    pub fn params(&self) -> &[f64] {
        match &self.kind {
            Kind::TabularLogit { logits } => logits,
            Kind::LinearFeature { theta, .. } => theta,
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Same model with new trainable parameters.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.num_params() {
            return Err(Error::shape(self.num_params(), params.len()));
        }
        all_finite(&params, "parameters")?;
        let kind = match &self.kind {
            Kind::TabularLogit { .. } => Kind::TabularLogit { logits: params },
            Kind::LinearFeature { dim, features, .. } => Kind::LinearFeature {
                dim: *dim,
                features: features.clone(),
                theta: params,
            },
        };
        Ok(ParamPolicy { kind, ..*self })
    }

    pub fn logit(&self, x: usize, y: usize) -> f64 {
        let cell = x * self.num_responses + y;
        match &self.kind {
            Kind::TabularLogit { logits } => logits[cell],
            Kind::LinearFeature {
                dim,
                features,
                theta,
            } => features[cell * dim..(cell + 1) * dim]
                .iter()
                .zip(theta)
                .map(|(f, t)| f * t)
                .sum(),
        }
    }

    /// All logits, row-major `[x][y]`.
    pub fn logits(&self) -> Vec<f64> {
        match &self.kind {
            Kind::TabularLogit { logits } => logits.clone(),
            _ => (0..self.num_prompts)
                .flat_map(|x| (0..self.num_responses).map(move |y| (x, y)))
                .map(|(x, y)| self.logit(x, y))
                .collect(),
        }
    }

    /// Add `coef · ∂logit(y|x)/∂params` into `grad`.
    pub(crate) fn add_logit_grad(&self, x: usize, y: usize, coef: f64, grad: &mut [f64]) {
        let cell = x * self.num_responses + y;
        match &self.kind {
            Kind::TabularLogit { .. } => grad[cell] += coef,
            Kind::LinearFeature { dim, features, .. } => {
                for (g, f) in grad.iter_mut().zip(&features[cell * dim..(cell + 1) * dim]) {
                    *g += coef * f;
                }
            }
        }
    }

    /// Add `coef · (∂logit(y|x)/∂params)²` elementwise into `curv`.
    pub(crate) fn add_logit_curvature(&self, x: usize, y: usize, coef: f64, curv: &mut [f64]) {
        let cell = x * self.num_responses + y;
        match &self.kind {
            Kind::TabularLogit { .. } => curv[cell] += coef,
            Kind::LinearFeature { dim, features, .. } => {
                for (c, f) in curv.iter_mut().zip(&features[cell * dim..(cell + 1) * dim]) {
                    *c += coef * f * f;
                }
            }
        }
    }

    /// Row-wise softmax of the logits.
    pub fn to_tabular(&self) -> Result<TabularPolicy> {
        let mut logp = self.logits();
        for row in logp.chunks_mut(self.num_responses) {
            normalize_log_row(row);
        }
        TabularPolicy::from_log_weights(self.num_prompts, self.num_responses, logp)
    }
}
