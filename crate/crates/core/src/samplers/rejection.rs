use rand::Rng;

use super::{Outcome, ParticleRun, SamplerConfig, StepRecord, Strictness};
use crate::error::{Error, Result};
use crate::model::{sample_weighted, GuidedModel, SimRng};
use crate::numeric::KahanSum;

/// SMC with per-particle rejection sampling.
///
/// Each level is filled with `N` accepted children. An attempt draws an
/// ancestor uniformly from the previous set and a child from `π_ref`, and
/// accepts with probability `V̂(x_h) / (η V̂(x_{h−1}))`. `W_h` is recorded as
/// the exact mean of `Ṽ/V̂` over the previous set.
pub fn smc_rs_run<M: GuidedModel>(model: &M, cfg: &SamplerConfig, rng: &mut SimRng) -> Result<ParticleRun<M::State>> {
    let horizon = model.horizon();
    let n = cfg.particles;
    let eta = cfg.eta;
    let mut run = ParticleRun::new(horizon, n);
    let mut particles = vec![model.root(); n];
    let mut next = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    if cfg.record {
        run.steps.push(StepRecord {
            ancestors: Vec::new(),
            particles: particles.clone(),
            weights: vec![1.0; n],
        });
    }
    for h in 1..=horizon {
        let ratios: KahanSum = particles
            .iter()
            .map(|&x| model.lookahead(h - 1, x) / model.prm(h - 1, x))
            .collect();
        let total = ratios.value();
        if !(total > 0.0) {
            run.output = Outcome::Dead;
            return Ok(run);
        }
        run.log_step[h] = total.ln();
        run.log_what[h] = run.log_what[h - 1] + total.ln() - (n as f64).ln();
        run.ess[h] = n as f64;
        next.clear();
        ancestors.clear();
        while next.len() < n {
            run.attempts += 1;
            let a = rng.random_range(0..n);
            let parent = particles[a];
            let child = model.sample_child(h - 1, parent, rng);
            let mut q = model.prm(h, child) / (eta * model.prm(h - 1, parent));
            if q > 1.0 {
                match cfg.strictness {
                    Strictness::Strict => {
                        return Err(Error::AcceptanceAboveOne {
                            step: h,
                            probability: q,
                        })
                    }
                    Strictness::Clamp => {
                        run.clamp_warnings += 1;
                        q = 1.0;
                    }
                }
            }
            if rng.random::<f64>() < q {
                next.push(child);
                ancestors.push(a as u32);
            }
        }
        std::mem::swap(&mut particles, &mut next);
        if cfg.record {
            run.steps.push(StepRecord {
                ancestors: ancestors.clone(),
                particles: particles.clone(),
                weights: vec![1.0; n],
            });
        }
    }
    let k = rng.random_range(0..n);
    run.output = Outcome::Sample(particles[k]);
    Ok(run)
}

/// One trajectory drawn step by step from the exactly normalized rows
/// `π̂(x'|x) ∝ π_ref(x'|x) V̂(x')`. Returns the states at levels `0..=H`.
pub fn action_level_sampler<M: GuidedModel>(model: &M, rng: &mut SimRng) -> Result<Vec<M::State>> {
    let horizon = model.horizon();
    let mut path = Vec::with_capacity(horizon + 1);
    let mut x = model.root();
    path.push(x);
    let mut row = Vec::new();
    for h in 0..horizon {
        x = twisted_child(model, h, x, &mut row, rng)?;
        path.push(x);
    }
    Ok(path)
}

/// Draw from `π_ref(·|x) V̂(·)` normalized, reusing `row` as scratch.
pub(crate) fn twisted_child<M: GuidedModel>(
    model: &M,
    h: usize,
    x: M::State,
    row: &mut Vec<(M::State, f64)>,
    rng: &mut SimRng,
) -> Result<M::State> {
    row.clear();
    let mut total = KahanSum::new();
    model.for_each_child(h, x, &mut |c, p| {
        let w = p * model.prm(h + 1, c);
        total.add(w);
        row.push((c, w));
    });
    let total = total.value();
    if !(total > 0.0) {
        return Err(Error::DegenerateRow {
            level: h,
            state: model.label(h, x),
        });
    }
    Ok(sample_weighted(row, total, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::{two_path, two_path_exact};
    use crate::model::trial_rng;

    #[test]
    fn strict_mode_rejects_small_eta() {
        let inst = two_path();
        let cfg = SamplerConfig {
            particles: 4,
            eta: 1.0,
            ..SamplerConfig::default()
        };
        let mut saw_error = false;
        for t in 0..50 {
            if let Err(Error::AcceptanceAboveOne { .. }) = smc_rs_run(&inst, &cfg, &mut trial_rng(0, t)) {
                saw_error = true;
                break;
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn clamp_mode_counts_warnings() {
        let inst = two_path();
        let cfg = SamplerConfig {
            particles: 4,
            eta: 1.0,
            strictness: Strictness::Clamp,
            ..SamplerConfig::default()
        };
        let warnings: u64 = (0..50)
            .map(|t| smc_rs_run(&inst, &cfg, &mut trial_rng(0, t)).unwrap().clamp_warnings)
            .sum();
        assert!(warnings > 0);
    }

    #[test]
    fn action_level_matches_optimal_row() {
        let inst = two_path_exact();
        let trials = 30_000;
        let hits = (0..trials)
            .filter(|&t| action_level_sampler(&inst, &mut trial_rng(4, t)).unwrap()[2] == 0)
            .count();
        let p = hits as f64 / trials as f64;
        let se = (2.0 / 9.0 / trials as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 4.0 * se, "{p}");
    }

    #[test]
    fn attempts_scale_with_eta() {
        let inst = two_path_exact();
        let mean_attempts = |eta: f64| {
            let cfg = SamplerConfig {
                particles: 8,
                eta,
                ..SamplerConfig::default()
            };
            (0..2000)
                .map(|t| smc_rs_run(&inst, &cfg, &mut trial_rng(6, t)).unwrap().attempts)
                .sum::<u64>() as f64
                / 2000.0
        };
        let (a, b) = (mean_attempts(2.0), mean_attempts(4.0));
        assert!((b / a - 2.0).abs() < 0.2, "{a} {b}");
    }
}
