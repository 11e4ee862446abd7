use serde::{Deserialize, Serialize};

/// Per-sample loss split into the value part and the sigma part, with
/// partial derivatives under the stop-gradient rule: the TD error inside the
/// sigma part is a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub q_loss: f64,
    pub sigma_loss: f64,
    pub dq: f64,
    pub dsigma: f64,
}

impl LossTerms {
    pub fn loss(&self) -> f64 {
        self.q_loss + self.sigma_loss
    }

    /// Scales only the value part, as importance weights do.
    pub fn weight_q(self, w: f64) -> Self {
        Self {
            q_loss: w * self.q_loss,
            dq: w * self.dq,
            ..self
        }
    }
}

/// `(g - q)^2 + ((g - q)^2 - sigma^2)^2`.
pub fn vdqn_loss(q_sa: f64, sigma_sa: f64, g: f64) -> LossTerms {
    let delta = g - q_sa;
    let d2 = delta * delta;
    let gap = d2 - sigma_sa * sigma_sa;
    LossTerms {
        q_loss: d2,
        sigma_loss: gap * gap,
        dq: -2.0 * delta,
        dsigma: -4.0 * sigma_sa * gap,
    }
}

/// `(g - q)^2 + (|g - q| - sigma)^2`.
pub fn tddqn_loss(q_sa: f64, sigma_sa: f64, g: f64) -> LossTerms {
    let delta = g - q_sa;
    let gap = delta.abs() - sigma_sa;
    LossTerms {
        q_loss: delta * delta,
        sigma_loss: gap * gap,
        dq: -2.0 * delta,
        dsigma: -2.0 * gap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Plain squared TD error; the sigma head is left untrained.
    Dqn,
    VDqn,
    TdDqn,
}

impl LossKind {
    pub fn terms(self, q_sa: f64, sigma_sa: f64, g: f64) -> LossTerms {
        match self {
            LossKind::Dqn => {
                let delta = g - q_sa;
                LossTerms {
                    q_loss: delta * delta,
                    sigma_loss: 0.0,
                    dq: -2.0 * delta,
                    dsigma: 0.0,
                }
            }
            LossKind::VDqn => vdqn_loss(q_sa, sigma_sa, g),
            LossKind::TdDqn => tddqn_loss(q_sa, sigma_sa, g),
        }
    }
}
