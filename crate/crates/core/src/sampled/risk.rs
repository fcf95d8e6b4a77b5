use super::batch::SampleBatch;
use super::param::ParamPolicy;
use super::proxy::ProxyParams;
use crate::config::LossKind;

/// Clamp applied to the implied win probability in the KL and NCE losses.
pub const ZETA_EPS: f64 = 1e-6;

/// Which empirical risk to minimize, with the NCE noise rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Risk {
    Sq,
    Kl,
    Nce { p: f64 },
}

impl Risk {
    pub fn from_loss(loss: LossKind, nce_p: f64) -> Self {
        match loss {
            LossKind::Sq => Risk::Sq,
            LossKind::Kl => Risk::Kl,
            LossKind::Nce => Risk::Nce { p: nce_p },
        }
    }
}

/// Risk value with its gradient and a diagonal curvature estimate (used as a
/// preconditioner), all with respect to the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub curvature: Vec<f64>,
}

/// Accumulate `Σ wᵢ·ℓ(φ_θ(yᵢ|xᵢ))` given per-sample `(loss, dloss/dφ, d²loss/dφ²)`.
fn accumulate(
    theta: &ParamPolicy,
    batch: &SampleBatch,
    per_sample: impl Fn(&super::batch::Sample, f64) -> (f64, f64, f64),
) -> RiskEval {
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.num_params()];
    let mut curvature = vec![0.0; theta.num_params()];
    let tabular = theta.is_tabular();
    let logits = if tabular { theta.params() } else { &[][..] };
    let ny = theta.num_responses();
    for s in &batch.samples {
        let phi = if tabular {
            logits[s.x * ny + s.y]
        } else {
            theta.logit(s.x, s.y)
        };
        let (l, d1, d2) = per_sample(s, phi);
        value += s.weight * l;
        theta.add_logit_grad(s.x, s.y, s.weight * d1, &mut grad);
        theta.add_logit_curvature(s.x, s.y, s.weight * d2, &mut curvature);
    }
    RiskEval {
        value,
        grad,
        curvature,
    }
}

/// Mean squared error between the proxy target and `φ_θ(y|x)`.
pub fn risk_sq(theta: &ParamPolicy, batch: &SampleBatch, pp: &ProxyParams) -> RiskEval {
    accumulate(theta, batch, |s, phi| {
        let r = pp.target(s.x, s.y, s.judged) - phi;
        (r * r, -2.0 * r, 2.0)
    })
}

/// Bernoulli log-loss of the judge labels under the implied win probability,
/// clamped to `[ε, 1−ε]`. Inside the clamp the gradient is evaluated at the
/// clamped value so descent can leave a saturated region.
pub fn risk_kl(theta: &ParamPolicy, batch: &SampleBatch, pp: &ProxyParams) -> RiskEval {
    let a = pp.win_slope();
    accumulate(theta, batch, |s, phi| {
        let z = pp
            .implied_win(s.x, s.y, phi)
            .clamp(ZETA_EPS, 1.0 - ZETA_EPS);
        if s.win {
            (-z.ln(), -a / z, a * a / (z * z))
        } else {
            (
                -(1.0 - z).ln(),
                a / (1.0 - z),
                a * a / ((1.0 - z) * (1.0 - z)),
            )
        }
    })
}

/// Noise-contrastive loss with noise rate `p`; the implied win probability is
/// clamped below at `ε`.
pub fn risk_nce(theta: &ParamPolicy, batch: &SampleBatch, pp: &ProxyParams, p: f64) -> RiskEval {
    let a = pp.win_slope();
    accumulate(theta, batch, |s, phi| {
        let z = pp.implied_win(s.x, s.y, phi).max(ZETA_EPS);
        let data = f64::from(u8::from(s.win) + u8::from(!s.noise));
        let noise = f64::from(u8::from(!s.win) + u8::from(s.noise));
        let loss = -(data * (z / (z + p)).ln() + noise * (p / (z + p)).ln());
        let d1 = -data / z + (data + noise) / (z + p);
        let d2 = data / (z * z) - (data + noise) / ((z + p) * (z + p));
        (loss, a * d1, a * a * d2.abs())
    })
}

pub fn evaluate(
    risk: Risk,
    theta: &ParamPolicy,
    batch: &SampleBatch,
    pp: &ProxyParams,
) -> RiskEval {
    match risk {
        Risk::Sq => risk_sq(theta, batch, pp),
        Risk::Kl => risk_kl(theta, batch, pp),
        Risk::Nce { p } => risk_nce(theta, batch, pp, p),
    }
}

#[cfg(test)]
mod tests {
    use super::super::batch::Sample;
    use super::*;

    fn one(win: bool, noise: bool, judged: f64) -> SampleBatch {
        SampleBatch {
            samples: vec![Sample {
                x: 0,
                y: 0,
                y2: 1,
                judged,
                win,
                noise,
                weight: 1.0,
            }],
            seed: None,
        }
    }

    fn zero_pp() -> ProxyParams {
        let z = ParamPolicy::tabular(1, 2, vec![0.0; 2]).unwrap();
        ProxyParams::new(1.0, 1.0, z.clone(), z).unwrap()
    }

    #[test]
    fn sq_examples() {
        let theta = ParamPolicy::tabular(1, 2, vec![0.0, 0.0]).unwrap();
        let r = risk_sq(&theta, &one(true, true, 1.0), &zero_pp());
        assert_eq!(r.value, 0.25);
        let fit = ParamPolicy::tabular(1, 2, vec![0.5, 0.0]).unwrap();
        assert_eq!(risk_sq(&fit, &one(true, true, 1.0), &zero_pp()).value, 0.0);
    }

    #[test]
    fn kl_examples() {
        let theta = ParamPolicy::tabular(1, 2, vec![0.25, 0.0]).unwrap();
        let r = risk_kl(&theta, &one(true, false, 1.0), &zero_pp());
        assert!((r.value - 2f64.ln()).abs() < 1e-15);
        // ζ = 2φ hits the label exactly
        let hi = ParamPolicy::tabular(1, 2, vec![0.5, 0.0]).unwrap();
        assert!(
            risk_kl(&hi, &one(true, false, 1.0), &zero_pp()).value
                <= -(1.0 - ZETA_EPS).ln() + 1e-15
        );
        let lo = ParamPolicy::tabular(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(
            risk_kl(&lo, &one(false, false, 0.0), &zero_pp()).value
                <= -(1.0 - ZETA_EPS).ln() + 1e-15
        );
    }

    #[test]
    fn nce_examples() {
        let theta = ParamPolicy::tabular(1, 2, vec![0.25, 0.0]).unwrap();
        let pp = zero_pp();
        let expected = 2.0 * 2f64.ln();
        for (win, noise) in [(true, true), (true, false), (false, true)] {
            let r = risk_nce(&theta, &one(win, noise, 1.0), &pp, 0.5);
            assert!((r.value - expected).abs() < 1e-15, "{win} {noise}");
        }
    }

    #[test]
    fn saturated_kl_still_has_gradient() {
        let theta = ParamPolicy::tabular(1, 2, vec![0.0, 0.0]).unwrap();
        let r = risk_kl(&theta, &one(true, false, 1.0), &zero_pp());
        assert!(r.grad[0] < 0.0);
    }
}
