use rand::Rng;

use super::{resample, Outcome, ParticleRun, SamplerConfig, StepRecord};
use crate::error::{Error, Result};
use crate::model::{sample_weighted, GuidedModel, SimRng};

/// Sequential Monte Carlo with PRM-ratio weights, output drawn from `ν̂_H`.
///
/// At each level: resample ancestors from the previous weighted particles,
/// propagate each through `π_ref`, weight by `V̂(x_h)/V̂(x̃_{h−1})`.
pub fn smc_run<M: GuidedModel>(model: &M, cfg: &SamplerConfig, rng: &mut SimRng) -> ParticleRun<M::State> {
    let horizon = model.horizon();
    let n = cfg.particles;
    let mut run = ParticleRun::new(horizon, n);
    let mut particles = vec![model.root(); n];
    let mut weights = vec![1.0; n];
    let mut total = n as f64;
    let mut next = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut parent_prm: Vec<f64> = vec![model.prm(0, model.root()); n];
    if cfg.record {
        run.steps.push(StepRecord {
            ancestors: Vec::new(),
            particles: particles.clone(),
            weights: weights.clone(),
        });
    }
    for h in 1..=horizon {
        resample(cfg.resampling, &weights, total, n, rng, &mut cumulative, &mut ancestors);
        next.clear();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (k, &a) in ancestors.iter().enumerate() {
            let parent = particles[a as usize];
            let child = model.sample_child(h - 1, parent, rng);
            let v = model.prm(h, child);
            let w = v / parent_prm[a as usize];
            next.push(child);
            weights[k] = w;
            sum += w;
            sum_sq += w * w;
        }
        std::mem::swap(&mut particles, &mut next);
        for (k, x) in particles.iter().enumerate() {
            parent_prm[k] = model.prm(h, *x);
        }
        run.attempts += n as u64;
        if cfg.record {
            run.steps.push(StepRecord {
                ancestors: ancestors.clone(),
                particles: particles.clone(),
                weights: weights.clone(),
            });
        }
        if !(sum > 0.0) {
            run.log_step[h] = f64::NEG_INFINITY;
            run.ess[h] = 0.0;
            run.output = Outcome::Dead;
            return run;
        }
        run.set_step(h, sum, sum_sq, n);
        total = sum;
    }
    let pairs: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let idx = sample_weighted(&pairs, total, rng);
    run.output = Outcome::Sample(particles[idx]);
    run
}

/// SMC with the restart output: accept the run's `ν̂_H` draw with probability
/// `min{Ŵ_H / (2·C_inf·V̂(⊥)), 1}`, otherwise rerun on the continuing stream.
pub fn smc_option2<M: GuidedModel>(model: &M, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<ParticleRun<M::State>> {
    let c_inf = match cfg.c_inf {
        Some(c) if c.is_finite() && c >= 1.0 => c,
        _ => return Err(Error::Config("the restart output option needs a finite C_inf".into())),
    };
    let log_threshold = (2.0 * c_inf * model.prm(0, model.root())).ln();
    let horizon = model.horizon();
    for round in 0..cfg.max_restarts {
        let mut run = smc_run(model, cfg, rng);
        let p = if run.is_dead() {
            0.0
        } else {
            (run.log_what[horizon] - log_threshold).exp().min(1.0)
        };
        let u: f64 = rng.random();
        if u < p {
            run.restarts = round;
            run.accept_prob = Some(p);
            return Ok(run);
        }
    }
    let mut run = ParticleRun::new(horizon, cfg.particles);
    run.output = Outcome::Restart;
    run.restarts = cfg.max_restarts;
    Ok(run)
}
