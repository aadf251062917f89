//! Particle samplers over any [`GuidedModel`].
//!
//! Every sampler consumes a caller-supplied [`SimRng`] and is deterministic
//! given it. Products of weights are accumulated in log-space.

mod baselines;
mod dmc;
mod ind;
mod rejection;
mod resample;
mod smc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baselines::{best_of_n, sis_run};
pub use dmc::dmc_restart_run;
pub use ind::{smc_ind_run, smc_ind_run_coupled, IndConfig};
pub use rejection::{action_level_sampler, smc_rs_run};
pub use resample::resample;
pub use smc::{smc_option2, smc_run};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    #[default]
    Strict,
    Clamp,
}

/// How DMC-with-restart chooses the final acceptance constant `Z̃`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZTilde {
    /// `C_inf · Ẑ_1` with `Ẑ_1 = E_{π_ref}[V̂(x_1)]` computed exactly.
    #[default]
    CinfTimesZhat1,
    /// `2 Ŵ_H` from one pilot pass.
    Pilot2WhatH,
    Explicit(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub particles: usize,
    pub resampling: Resampling,
    pub eta: f64,
    pub c_inf: Option<f64>,
    pub z_tilde: ZTilde,
    pub max_restarts: usize,
    pub strictness: Strictness,
    /// Keep per-step particle, ancestor and weight lists in the run record.
    pub record: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            particles: 1,
            resampling: Resampling::Multinomial,
            eta: 1.0,
            c_inf: None,
            z_tilde: ZTilde::CinfTimesZhat1,
            max_restarts: 1000,
            strictness: Strictness::Strict,
            record: false,
        }
    }
}

impl SamplerConfig {
    pub fn with_particles(particles: usize) -> Self {
        SamplerConfig {
            particles,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("particle count must be at least 1".into()));
        }
        if !(self.eta >= 1.0) {
            return Err(Error::Config(format!("eta must be at least 1, got {}", self.eta)));
        }
        if self.max_restarts == 0 {
            return Err(Error::Config("max_restarts must be at least 1".into()));
        }
        if let Some(c) = self.c_inf {
            if !(c >= 1.0) || !c.is_finite() {
                return Err(Error::Config(format!("C_inf must be finite and at least 1, got {c}")));
            }
        }
        if let ZTilde::Explicit(z) = self.z_tilde {
            if !(z > 0.0) || !z.is_finite() {
                return Err(Error::Config(format!("Z-tilde must be positive and finite, got {z}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<S> {
    Sample(S),
    /// Every allowed round was rejected.
    Restart,
    /// All weights vanished; no output.
    Dead,
}

impl<S: Copy> Outcome<S> {
    pub fn sample(&self) -> Option<S> {
        match self {
            Outcome::Sample(s) => Some(*s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<S> {
    pub ancestors: Vec<u32>,
    pub particles: Vec<S>,
    pub weights: Vec<f64>,
}

/// Diagnostics of one sampler run (the accepted round for restart samplers).
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleRun<S> {
    /// `ln W_h` per level; index 0 holds `ln N` (unit initial weights).
    pub log_step: Vec<f64>,
    /// `ln Ŵ_h` per level, `ln Ŵ_0 = 0`; `-inf` from the step a run dies.
    pub log_what: Vec<f64>,
    /// Effective sample size `W²/Σw²` per level.
    pub ess: Vec<f64>,
    /// Per-step lists (index `h` for level `h`), only when `record` is set.
    pub steps: Vec<StepRecord<S>>,
    pub output: Outcome<S>,
    pub restarts: usize,
    /// Proposal attempts (rejection samplers) or particles drawn.
    pub attempts: u64,
    pub clamp_warnings: u64,
    /// Final acceptance probability of the returned round, if any.
    pub accept_prob: Option<f64>,
}

impl<S> ParticleRun<S> {
    pub(crate) fn new(horizon: usize, n: usize) -> Self {
        let mut log_step = vec![f64::NEG_INFINITY; horizon + 1];
        log_step[0] = (n as f64).ln();
        let mut log_what = vec![f64::NEG_INFINITY; horizon + 1];
        log_what[0] = 0.0;
        let mut ess = vec![0.0; horizon + 1];
        ess[0] = n as f64;
        ParticleRun {
            log_step,
            log_what,
            ess,
            steps: Vec::new(),
            output: Outcome::Dead,
            restarts: 0,
            attempts: 0,
            clamp_warnings: 0,
            accept_prob: None,
        }
    }

    pub fn is_dead(&self) -> bool {
        matches!(self.output, Outcome::Dead)
    }

    pub fn horizon(&self) -> usize {
        self.log_what.len() - 1
    }

    /// `Ŵ_h` in linear space (0 for dead runs).
    pub fn what(&self, h: usize) -> f64 {
        self.log_what[h].exp()
    }

    pub(crate) fn set_step(&mut self, h: usize, total: f64, sum_sq: f64, n: usize) {
        self.log_step[h] = total.ln();
        self.log_what[h] = self.log_what[h - 1] + total.ln() - (n as f64).ln();
        self.ess[h] = if sum_sq > 0.0 { total * total / sum_sq } else { 0.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        assert!(SamplerConfig::with_particles(0).validate().is_err());
        let bad = SamplerConfig {
            eta: 0.5,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            max_restarts: 0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
