use super::{Outcome, ParticleRun};
use crate::error::Result;
use crate::model::{sample_weighted, GuidedModel, SimRng};

/// Sequential importance sampling: `N` independent `π_ref` rollouts, each
/// weighted by `V̂(x_h)/V̂(⊥)`, output drawn in proportion to the final weights.
/// `Ŵ_h` is the mean weight at level `h`.
pub fn sis_run<M: GuidedModel>(model: &M, n: usize, rng: &mut SimRng) -> ParticleRun<M::State> {
    let horizon = model.horizon();
    let mut run = ParticleRun::new(horizon, n);
    let root = model.root();
    let root_prm = model.prm(0, root);
    let mut particles = vec![root; n];
    let mut weights = vec![0.0; n];
    for h in 1..=horizon {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (k, x) in particles.iter_mut().enumerate() {
            *x = model.sample_child(h - 1, *x, rng);
            let w = model.prm(h, *x) / root_prm;
            weights[k] = w;
            sum += w;
            sum_sq += w * w;
        }
        run.attempts += n as u64;
        if sum > 0.0 {
            run.set_step(h, sum, sum_sq, n);
            // Ŵ_h is a mean over rollouts here, not a running product.
            run.log_what[h] = sum.ln() - (n as f64).ln();
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        run.output = Outcome::Dead;
        return run;
    }
    let pairs: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    run.output = Outcome::Sample(particles[sample_weighted(&pairs, total, rng)]);
    run
}

/// Best-of-N: `N` independent `π_ref` rollouts; return the trajectory with the
/// largest terminal reward, ties to the lowest rollout index.
pub fn best_of_n<M: GuidedModel>(model: &M, n: usize, rng: &mut SimRng) -> Result<Vec<M::State>> {
    let horizon = model.horizon();
    let mut best: Option<(f64, Vec<M::State>)> = None;
    let mut path = Vec::with_capacity(horizon + 1);
    for _ in 0..n {
        path.clear();
        let mut x = model.root();
        path.push(x);
        for h in 0..horizon {
            x = model.sample_child(h, x, rng);
            path.push(x);
        }
        let r = model.prm(horizon, x);
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, path.clone()));
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}
