//! The interface samplers consume: a layered chain with a PRM attached.
//!
//! Explicit [`ProblemInstance`](crate::ProblemInstance)s implement it with
//! dense state indices. Hard instances whose trees are too large to
//! materialize (e.g. depth 32 or 64 binary trees) implement it implicitly
//! with bit-packed prefixes.

use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};

/// Random stream used by every sampler. One stream per trial.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Stream for trial `trial` under master seed `seed`. Independent of
/// scheduling, so parallel campaigns reproduce bit-for-bit.
pub fn trial_rng(seed: u64, trial: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub trait GuidedModel: Sync {
    type State: Copy + Eq + Ord + Hash + Debug + Send + Sync;

    fn horizon(&self) -> usize;

    fn root(&self) -> Self::State;

    /// Visit the nonzero entries `(child, π_ref(child | state))` of the
    /// transition row of `state` at `level < H`.
    fn for_each_child(&self, level: usize, state: Self::State, f: &mut dyn FnMut(Self::State, f64));

    /// `V̂` at `state`; at level `H` this is the terminal reward.
    fn prm(&self, level: usize, state: Self::State) -> f64;

    fn log_prm(&self, level: usize, state: Self::State) -> f64 {
        self.prm(level, state).ln()
    }

    /// Draw a child from `π_ref(· | state)`.
    fn sample_child(&self, level: usize, state: Self::State, rng: &mut SimRng) -> Self::State {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut picked = None;
        let mut last = None;
        self.for_each_child(level, state, &mut |c, p| {
            if picked.is_some() {
                return;
            }
            acc += p;
            last = Some(c);
            if u < acc {
                picked = Some(c);
            }
        });
        picked.or(last).expect("transition row is empty")
    }

    fn label(&self, level: usize, state: Self::State) -> String;

    /// `Σ_c π_ref(c | state) V̂(c)`, the one-step lookahead value.
    fn lookahead(&self, level: usize, state: Self::State) -> f64 {
        let mut s = crate::numeric::KahanSum::new();
        self.for_each_child(level, state, &mut |c, p| s.add(p * self.prm(level + 1, c)));
        s.value()
    }

    fn children(&self, level: usize, state: Self::State) -> Vec<(Self::State, f64)> {
        let mut v = Vec::new();
        self.for_each_child(level, state, &mut |c, p| v.push((c, p)));
        v
    }
}

/// Sample an index from a categorical row given as `(item, weight)` pairs with
/// a precomputed positive total.
pub(crate) fn sample_weighted<T: Copy>(row: &[(T, f64)], total: f64, rng: &mut SimRng) -> T {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(item, w) in row {
        acc += w;
        if u < acc {
            return item;
        }
    }
    // Rounding left u at the very top: return the last item with positive weight.
    row.iter()
        .rev()
        .find(|(_, w)| *w > 0.0)
        .map(|(i, _)| *i)
        .expect("sample_weighted on a row with no positive weight")
}

/// Bit-packed prefix over a binary alphabet: coordinate `k` (1-based) lives in bit `k-1`.
pub(crate) fn bits_label(level: usize, bits: u64) -> String {
    if level == 0 {
        return crate::chain::ROOT_LABEL.to_string();
    }
    (0..level).map(|k| if bits >> k & 1 == 1 { '1' } else { '0' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_streams_are_distinct_and_reproducible() {
        let a: u64 = trial_rng(7, 0).random();
        let b: u64 = trial_rng(7, 1).random();
        let a2: u64 = trial_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn bits_label_orders_coordinates_left_to_right() {
        assert_eq!(bits_label(0, 0), "⊥");
        assert_eq!(bits_label(3, 0b001), "100");
        assert_eq!(bits_label(3, 0b110), "011");
    }
}
