use rand::Rng;

use super::rejection::twisted_child;
use super::{resample, Outcome, ParticleRun, SamplerConfig, StepRecord, Strictness, ZTilde};
use crate::error::{Error, Result};
use crate::model::{GuidedModel, SimRng};

/// One pass without the final acceptance step.
///
/// Ancestors are resampled in proportion to the exact lookahead ratio
/// `Ṽ(x)/V̂(x)` and children are drawn from the locally twisted row.
/// `log_step[h]` holds `ln Σ Ṽ/V̂` over the level `h − 1` set, so `Ŵ_H` is the
/// product of the `H` mean lookahead ratios.
fn dmc_pass<M: GuidedModel>(model: &M, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<ParticleRun<M::State>> {
    let horizon = model.horizon();
    let n = cfg.particles;
    let mut run = ParticleRun::new(horizon, n);
    let mut particles = vec![model.root(); n];
    let mut ratios = vec![0.0; n];
    let mut next = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut row = Vec::new();
    if cfg.record {
        run.steps.push(StepRecord {
            ancestors: Vec::new(),
            particles: particles.clone(),
            weights: vec![1.0; n],
        });
    }
    for h in 1..=horizon {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (k, &x) in particles.iter().enumerate() {
            let r = model.lookahead(h - 1, x) / model.prm(h - 1, x);
            ratios[k] = r;
            sum += r;
            sum_sq += r * r;
        }
        if !(sum > 0.0) {
            run.output = Outcome::Dead;
            return Ok(run);
        }
        run.set_step(h, sum, sum_sq, n);
        resample(cfg.resampling, &ratios, sum, n, rng, &mut cumulative, &mut ancestors);
        next.clear();
        for &a in &ancestors {
            next.push(twisted_child(model, h - 1, particles[a as usize], &mut row, rng)?);
        }
        run.attempts += n as u64;
        std::mem::swap(&mut particles, &mut next);
        if cfg.record {
            run.steps.push(StepRecord {
                ancestors: ancestors.clone(),
                particles: particles.clone(),
                weights: ratios.clone(),
            });
        }
    }
    let k = rng.random_range(0..n);
    run.output = Outcome::Sample(particles[k]);
    Ok(run)
}

/// `ln Z̃` for the configured mode; `None` when a pilot pass died.
fn log_z_tilde<M: GuidedModel>(model: &M, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<Option<f64>> {
    match cfg.z_tilde {
        ZTilde::Explicit(z) => Ok(Some(z.ln())),
        ZTilde::CinfTimesZhat1 => {
            let c = cfg
                .c_inf
                .ok_or_else(|| Error::Config("Z-tilde mode cinf needs a C_inf value".into()))?;
            let root = model.root();
            let zhat1 = model.lookahead(0, root) / model.prm(0, root);
            Ok(Some((c * zhat1).ln()))
        }
        ZTilde::Pilot2WhatH => {
            let pilot = dmc_pass(model, cfg, rng)?;
            if pilot.is_dead() {
                Ok(None)
            } else {
                Ok(Some(2f64.ln() + pilot.log_what[model.horizon()]))
            }
        }
    }
}

/// DMC with restart: repeated passes, each accepted with probability
/// `min{Ŵ_H / Z̃, 1}`. Pilot mode recomputes `Z̃` before every pass.
pub fn dmc_restart_run<M: GuidedModel>(
    model: &M,
    cfg: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<ParticleRun<M::State>> {
    let horizon = model.horizon();
    let mut warnings = 0;
    for round in 0..cfg.max_restarts {
        let Some(log_z) = log_z_tilde(model, cfg, rng)? else {
            continue;
        };
        let mut run = dmc_pass(model, cfg, rng)?;
        if run.is_dead() {
            continue;
        }
        let mut p = (run.log_what[horizon] - log_z).exp();
        if p > 1.0 {
            match cfg.strictness {
                Strictness::Strict => return Err(Error::ZTildeTooSmall { ratio: p }),
                Strictness::Clamp => {
                    warnings += 1;
                    p = 1.0;
                }
            }
        }
        if rng.random::<f64>() < p {
            run.restarts = round;
            run.accept_prob = Some(p);
            run.clamp_warnings = warnings;
            return Ok(run);
        }
    }
    let mut run = ParticleRun::new(horizon, cfg.particles);
    run.output = Outcome::Restart;
    run.restarts = cfg.max_restarts;
    run.clamp_warnings = warnings;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::{random_tree_instance, two_path_exact};
    use crate::model::trial_rng;

    #[test]
    fn exact_prm_gives_deterministic_estimate() {
        let inst = two_path_exact();
        let cfg = SamplerConfig {
            particles: 5,
            ..SamplerConfig::default()
        };
        let run = dmc_pass(&inst, &cfg, &mut trial_rng(0, 0)).unwrap();
        assert!((run.what(2) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn huge_z_tilde_with_one_round_restarts() {
        let inst = two_path_exact();
        let cfg = SamplerConfig {
            particles: 2,
            z_tilde: ZTilde::Explicit(1e300),
            max_restarts: 1,
            ..SamplerConfig::default()
        };
        let run = dmc_restart_run(&inst, &cfg, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(run.output, Outcome::Restart);
    }

    #[test]
    fn cinf_mode_acceptance_rate() {
        let inst = two_path_exact();
        let cfg = SamplerConfig {
            particles: 64,
            c_inf: Some(1.5),
            max_restarts: 1,
            ..SamplerConfig::default()
        };
        let trials = 4000;
        let ok = (0..trials)
            .filter(|&t| dmc_restart_run(&inst, &cfg, &mut trial_rng(1, t)).unwrap().output != Outcome::Restart)
            .count();
        assert!(ok as f64 / trials as f64 >= 1.0 / 3.0 - 0.03);
    }

    #[test]
    fn pass_estimate_is_unbiased() {
        let inst = random_tree_instance(12, 2, 5);
        let o = crate::oracle::Oracle::new(&inst).unwrap();
        let cfg = SamplerConfig::with_particles(4);
        let trials = 40_000;
        let xs: Vec<f64> = (0..trials)
            .map(|t| dmc_pass(&inst, &cfg, &mut trial_rng(2, t)).unwrap().what(5))
            .collect();
        let mean = xs.iter().sum::<f64>() / trials as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
        let se = (var / trials as f64).sqrt();
        assert!((mean - o.z).abs() < 4.0 * se, "{mean} vs {}", o.z);
    }

    #[test]
    fn strict_mode_flags_small_z_tilde() {
        let inst = two_path_exact();
        let cfg = SamplerConfig {
            particles: 2,
            z_tilde: ZTilde::Explicit(1.0),
            ..SamplerConfig::default()
        };
        assert!(matches!(
            dmc_restart_run(&inst, &cfg, &mut trial_rng(0, 0)),
            Err(Error::ZTildeTooSmall { .. })
        ));
    }
}
