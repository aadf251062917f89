//! Exact and empirical statistics: total variation, the SMC lower-bound
//! oracle `p_N`, order-independent final-state accumulators, chi-square
//! goodness-of-fit tests and rank correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::oracle::LevelDistribution;

/// Categories whose expected count falls below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// Minimum total count per table for a chi-square test.
pub const MIN_TOTAL: u64 = 50;

/// `½ Σ |p − q|` between two distributions on the same level.
pub fn exact_tv(p: &LevelDistribution, q: &LevelDistribution) -> Result<f64> {
    if p.level != q.level {
        return Err(Error::DimensionMismatch {
            left: p.level,
            right: q.level,
        });
    }
    tv(&p.probs, &q.probs)
}

/// `½ Σ |p − q|` on raw probability vectors.
pub fn tv(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let d: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    Ok((0.5 * crate::numeric::ksum(&d)).clamp(0.0, 1.0))
}

/// `c_λ = 2λ(1+λ)/(2+λ)³`.
pub fn c_lambda(lambda: f64) -> f64 {
    2.0 * lambda * (1.0 + lambda) / (2.0 + lambda).powi(3)
}

/// `p_N = (1+λ) E_{A∼Bin(N,½)}[A/(N+λA)]`, the per-coordinate probability of
/// a 1 in the output of SMC on the lower-bound tree.
///
/// Panics if the gap `(1+λ)/(2+λ) − p_N ≥ c_λ/N` fails, which would indicate
/// a numerical problem rather than bad input.
pub fn p_n_oracle(n: usize, lambda: f64) -> f64 {
    assert!(n >= 1, "p_N needs at least one particle");
    let nf = n as f64;
    let terms: Vec<f64> = (1..=n)
        .map(|a| {
            let af = a as f64;
            (ln_binomial(n as u64, a as u64) - nf * std::f64::consts::LN_2).exp() * af / (nf + lambda * af)
        })
        .collect();
    let p = (1.0 + lambda) * crate::numeric::ksum(&terms);
    let cap = (1.0 + lambda) / (2.0 + lambda);
    assert!(
        cap - p >= c_lambda(lambda) / nf - 1e-12,
        "p_N gap violated at N={n}, lambda={lambda}"
    );
    p
}

/// Final-state counts of a campaign. Keys are dense state indices (or
/// bit-packed prefixes for implicit models).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalFinal {
    /// Content hash of the instance plus the sampler configuration.
    pub config_key: String,
    pub counts: BTreeMap<u64, u64>,
    /// Runs whose weights all vanished.
    pub dead_runs: u64,
    /// Runs that exhausted their restart budget without a sample.
    pub exhausted_runs: u64,
    pub restarts_total: u64,
    pub trials: u64,
}

impl EmpiricalFinal {
    pub fn new(config_key: impl Into<String>) -> Self {
        EmpiricalFinal {
            config_key: config_key.into(),
            ..Default::default()
        }
    }

    pub fn record_sample(&mut self, state: u64, restarts: u64) {
        *self.counts.entry(state).or_insert(0) += 1;
        self.restarts_total += restarts;
        self.trials += 1;
    }

    pub fn record_dead(&mut self, restarts: u64) {
        self.dead_runs += 1;
        self.restarts_total += restarts;
        self.trials += 1;
    }

    pub fn record_exhausted(&mut self, restarts: u64) {
        self.exhausted_runs += 1;
        self.restarts_total += restarts;
        self.trials += 1;
    }

    pub fn completed(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Add another accumulator's counts. Commutative and associative.
    pub fn merge(&mut self, other: &EmpiricalFinal) -> Result<()> {
        if self.config_key != other.config_key {
            return Err(Error::MixedConfig(format!(
                "{} vs {}",
                self.config_key, other.config_key
            )));
        }
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_insert(0) += v;
        }
        self.dead_runs += other.dead_runs;
        self.exhausted_runs += other.exhausted_runs;
        self.restarts_total += other.restarts_total;
        self.trials += other.trials;
        Ok(())
    }

    /// Empirical distribution over completed runs on a level of `size`
    /// states; `None` when no run completed.
    pub fn distribution(&self, level: usize, size: usize) -> Option<LevelDistribution> {
        let done = self.completed();
        if done == 0 {
            return None;
        }
        let mut probs = vec![0.0; size];
        for (k, v) in &self.counts {
            probs[*k as usize] = *v as f64 / done as f64;
        }
        Some(LevelDistribution { level, probs })
    }

    /// Binomial standard error per state, `√(p(1−p)/n)` over completed runs.
    pub fn std_errors(&self, size: usize) -> Vec<f64> {
        let done = self.completed() as f64;
        let mut se = vec![0.0; size];
        if done == 0.0 {
            return se;
        }
        for (k, v) in &self.counts {
            let p = *v as f64 / done;
            se[*k as usize] = (p * (1.0 - p) / done).sqrt();
        }
        se
    }

    /// Plug-in TV to `target` and the worst-case half-width `Σ SE_x / 2`.
    /// `None` when no run completed.
    pub fn tv_to(&self, target: &LevelDistribution) -> Result<Option<(f64, f64)>> {
        let Some(d) = self.distribution(target.level, target.probs.len()) else {
            return Ok(None);
        };
        let t = exact_tv(&d, target)?;
        let half = 0.5 * crate::numeric::ksum(&self.std_errors(target.probs.len()));
        Ok(Some((t, half)))
    }

    /// TV where dead and exhausted runs form an extra outcome of target mass 0.
    pub fn tv_with_dead(&self, target: &LevelDistribution) -> Result<Option<f64>> {
        if self.trials == 0 {
            return Ok(None);
        }
        let n = self.trials as f64;
        let mut p = vec![0.0; target.probs.len() + 1];
        for (k, v) in &self.counts {
            p[*k as usize] = *v as f64 / n;
        }
        p[target.probs.len()] = (self.dead_runs + self.exhausted_runs) as f64 / n;
        let mut q = target.probs.clone();
        q.push(0.0);
        tv(&p, &q).map(Some)
    }
}

/// Result of a chi-square test after pooling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Categories after pooling.
    pub categories: usize,
}

fn chi2_sf(stat: f64, dof: usize) -> f64 {
    if !stat.is_finite() {
        return 0.0;
    }
    ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

/// Partition category indices into groups: every category whose `size` is at
/// least `MIN_EXPECTED` stays alone; the rest share a tail bucket, and if that
/// bucket is still below `MIN_EXPECTED` it absorbs the smallest kept category.
fn pool(size: &[f64]) -> Vec<Vec<usize>> {
    let mut kept: Vec<usize> = (0..size.len()).filter(|&i| size[i] >= MIN_EXPECTED).collect();
    let mut tail: Vec<usize> = (0..size.len()).filter(|&i| size[i] < MIN_EXPECTED).collect();
    let tail_mass = |t: &[usize]| t.iter().map(|&i| size[i]).sum::<f64>();
    if !tail.is_empty() && tail_mass(&tail) < MIN_EXPECTED && !kept.is_empty() {
        let (pos, _) = kept
            .iter()
            .enumerate()
            .min_by(|a, b| size[*a.1].total_cmp(&size[*b.1]).then(a.0.cmp(&b.0)))
            .expect("kept is non-empty");
        tail.push(kept.remove(pos));
    }
    let mut groups: Vec<Vec<usize>> = kept.into_iter().map(|i| vec![i]).collect();
    if !tail.is_empty() {
        tail.sort_unstable();
        groups.push(tail);
    }
    groups
}

/// One-sample chi-square test of `observed` against `expected` probabilities.
pub fn gof_chi_square_one(observed: &[u64], expected: &[f64]) -> Result<GofResult> {
    if observed.len() != expected.len() {
        return Err(Error::DimensionMismatch {
            left: observed.len(),
            right: expected.len(),
        });
    }
    let n: u64 = observed.iter().sum();
    if n < MIN_TOTAL {
        return Err(Error::InsufficientData(format!("{n} observations, need {MIN_TOTAL}")));
    }
    let e: Vec<f64> = expected.iter().map(|p| p * n as f64).collect();
    let groups = pool(&e);
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two categories after pooling".into(),
        ));
    }
    let mut stat = 0.0;
    for g in &groups {
        let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
        let x: f64 = g.iter().map(|&i| e[i]).sum();
        stat += if x > 0.0 {
            (o - x).powi(2) / x
        } else if o > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    let dof = groups.len() - 1;
    Ok(GofResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
        categories: groups.len(),
    })
}

/// Two-sample chi-square test of homogeneity between count tables `a` and `b`
/// over the same categories.
pub fn gof_chi_square_two(a: &[u64], b: &[u64]) -> Result<GofResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (na, nb) = (a.iter().sum::<u64>(), b.iter().sum::<u64>());
    if na < MIN_TOTAL || nb < MIN_TOTAL {
        return Err(Error::InsufficientData(format!(
            "{na} and {nb} observations, need {MIN_TOTAL} each"
        )));
    }
    let total = (na + nb) as f64;
    let (fa, fb) = (na as f64 / total, nb as f64 / total);
    // Pool on the smaller of the two expected cells per category.
    let smaller: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64 * fa.min(fb)).collect();
    let groups = pool(&smaller);
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two categories after pooling".into(),
        ));
    }
    let mut stat = 0.0;
    for g in &groups {
        let oa: f64 = g.iter().map(|&i| a[i] as f64).sum();
        let ob: f64 = g.iter().map(|&i| b[i] as f64).sum();
        let col = oa + ob;
        for (o, f) in [(oa, fa), (ob, fb)] {
            let e = col * f;
            if e > 0.0 {
                stat += (o - e).powi(2) / e;
            }
        }
    }
    let dof = groups.len() - 1;
    Ok(GofResult {
        statistic: stat,
        dof,
        p_value: chi2_sf(stat, dof),
        categories: groups.len(),
    })
}

/// Two-sample test on arbitrary categorical outcomes given as count maps.
pub fn gof_chi_square_maps<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> Result<GofResult> {
    let keys: Vec<K> = a
        .keys()
        .chain(b.keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let ca: Vec<u64> = keys.iter().map(|k| a.get(k).copied().unwrap_or(0)).collect();
    let cb: Vec<u64> = keys.iter().map(|k| b.get(k).copied().unwrap_or(0)).collect();
    gof_chi_square_two(&ca, &cb)
}

/// Mean and standard error of the mean (sample variance with `n − 1`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = crate::numeric::ksum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (crate::numeric::ksum(&dev) / (n - 1.0) / n).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("need at least two pairs".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("constant ranks".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
