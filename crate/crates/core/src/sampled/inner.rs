use super::param::ParamPolicy;
use super::risk::RiskEval;
use crate::error::{Error, Result};

/// Result of [`inner_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub theta: ParamPolicy,
    /// Risk at every accepted iterate, starting with `theta_init`.
    pub risks: Vec<f64>,
}

impl InnerResult {
    pub fn final_risk(&self) -> f64 {
        *self.risks.last().expect("at least the initial risk")
    }
}

const MAX_HALVINGS: usize = 60;

/// Diagonally preconditioned gradient descent with a backtracking line
/// search that only accepts non-increasing risk.
///
/// Each step starts from `lr` along `-grad / curvature` and halves until the
/// risk does not increase; the loop stops after `steps` steps, when no
/// acceptable step exists, or when the parameter change vanishes.
pub fn inner_minimize(
    objective: impl Fn(&ParamPolicy) -> RiskEval,
    theta_init: &ParamPolicy,
    steps: usize,
    lr: f64,
) -> Result<InnerResult> {
    if steps == 0 {
        return Err(Error::config("inner_steps", "must be >= 1"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::config(
            "inner_lr",
            format!("must be finite and > 0, got {lr}"),
        ));
    }
    let check = |ev: &RiskEval, at: usize| -> Result<()> {
        if ev.value.is_finite() && ev.grad.iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!(
                "risk {} at inner step {at} (|grad|max {})",
                ev.value,
                ev.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()))
            )))
        }
    };
    let mut theta = theta_init.clone();
    let mut ev = objective(&theta);
    check(&ev, 0)?;
    let mut risks = vec![ev.value];
    for step in 1..=steps {
        let cmax = ev.curvature.iter().fold(0.0f64, |m, c| m.max(*c));
        let floor = if cmax > 0.0 { 1e-8 * cmax } else { 1.0 };
        let dir: Vec<f64> = ev
            .grad
            .iter()
            .zip(&ev.curvature)
            .map(|(g, c)| g / c.max(floor))
            .collect();
        let dir_max = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if dir_max == 0.0 {
            break;
        }
        let mut s = lr;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = theta
                .params()
                .iter()
                .zip(&dir)
                .map(|(t, d)| t - s * d)
                .collect();
            if cand.iter().all(|v| v.is_finite()) {
                let cand = theta.with_params(cand)?;
                let cev = objective(&cand);
                check(&cev, step)?;
                if cev.value <= ev.value {
                    accepted = Some((cand, cev));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((cand, cev)) = accepted else { break };
        theta = cand;
        ev = cev;
        risks.push(ev.value);
        if s * dir_max < 1e-13 {
            break;
        }
    }
    Ok(InnerResult { theta, risks })
}
