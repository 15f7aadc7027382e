//! DPO objective, its analytic gradient, and the warmup + cosine
//! learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.1;

/// Summed log-probabilities (nats) of the chosen and rejected responses
/// under the policy and the frozen reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoInputs {
    pub logp_policy_chosen: f64,
    pub logp_policy_rejected: f64,
    pub logp_ref_chosen: f64,
    pub logp_ref_rejected: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl DpoInputs {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("logp_policy_chosen", self.logp_policy_chosen),
            ("logp_policy_rejected", self.logp_policy_rejected),
            ("logp_ref_chosen", self.logp_ref_chosen),
            ("logp_ref_rejected", self.logp_ref_rejected),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::data(format!("{name} is not finite ({v})")));
            }
            if v > 0.0 {
                return Err(Error::data(format!(
                    "{name} is a log-probability and must be <= 0, got {v}"
                )));
            }
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::data(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// `beta * ((pc - rc) - (pr - rr))`.
    pub fn margin(&self) -> f64 {
        self.beta
            * ((self.logp_policy_chosen - self.logp_ref_chosen)
                - (self.logp_policy_rejected - self.logp_ref_rejected))
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(z) = softplus(-z)`.
pub fn dpo_loss(x: &DpoInputs) -> Result<f64> {
    x.validate()?;
    Ok(softplus(-x.margin()))
}

/// Partial derivatives of the loss with respect to the policy's chosen and
/// rejected log-probabilities: `(g, -g)` with `g = -beta * sigmoid(-z)`.
pub fn dpo_grad(x: &DpoInputs) -> Result<(f64, f64)> {
    x.validate()?;
    let g = -x.beta * sigmoid(-x.margin());
    Ok((g, -g))
}

/// Linear warmup to `peak_lr`, then cosine decay to `floor_lr` at
/// `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
    #[serde(default)]
    pub floor_lr: f64,
}

impl LrSchedule {
    /// Warmup length `ceil(ratio * total_steps)`.
    pub fn from_warmup_ratio(
        peak_lr: f64,
        ratio: f64,
        total_steps: u64,
        floor_lr: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::config(format!(
                "warmup ratio must be in [0, 1), got {ratio}"
            )));
        }
        let s = LrSchedule {
            peak_lr,
            warmup_steps: (ratio * total_steps as f64 - 1e-9).ceil().max(0.0) as u64,
            total_steps,
            floor_lr,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return Err(Error::config("peak_lr must be positive"));
        }
        if !(self.floor_lr.is_finite() && self.floor_lr >= 0.0 && self.floor_lr <= self.peak_lr) {
            return Err(Error::config("floor_lr must be in [0, peak_lr]"));
        }
        if self.warmup_steps >= self.total_steps {
            return Err(Error::config(format!(
                "warmup_steps ({}) must be < total_steps ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        Ok(())
    }
}

pub fn lr_at_step(s: u64, sched: &LrSchedule) -> Result<f64> {
    sched.validate()?;
    if s > sched.total_steps {
        return Err(Error::data(format!(
            "step {s} is past total_steps {}",
            sched.total_steps
        )));
    }
    if s < sched.warmup_steps {
        return Ok(sched.peak_lr * s as f64 / sched.warmup_steps as f64);
    }
    if s == sched.warmup_steps {
        return Ok(sched.peak_lr);
    }
    let progress =
        (s - sched.warmup_steps) as f64 / (sched.total_steps - sched.warmup_steps) as f64;
    Ok(sched.floor_lr
        + 0.5 * (sched.peak_lr - sched.floor_lr) * (1.0 + (std::f64::consts::PI * progress).cos()))
}
