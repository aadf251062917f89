//! Exact enumeration of the analytic quantities: `V*`, the level marginals
//! `π_h`, `π*_h`, `π̂_h`, divergences, coverage constants and the TV bounds.
//!
//! Everything here is deterministic double-precision arithmetic with
//! compensated summation. Infinities are ordinary values.

use serde::Serialize;

use crate::chain::{ProblemInstance, Row, ValueTable, ValueTag};
use crate::error::{Error, Result};
use crate::numeric::{ext_f64, KahanSum};

/// Relative tolerance of the χ² self-check.
pub const CHI2_IDENTITY_TOL: f64 = 1e-9;

/// Relative slack when comparing a density ratio against `M` or `η`, so that
/// ratios equal to the threshold up to rounding count as reaching it.
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelDistribution {
    pub level: usize,
    pub probs: Vec<f64>,
}

impl LevelDistribution {
    /// Normalize nonnegative weights; fails with `DegenerateLevel` on zero mass.
    pub fn from_weights(level: usize, weights: Vec<f64>) -> Result<(Self, f64)> {
        let total = weights.iter().copied().collect::<KahanSum>().value();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateLevel { level });
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok((LevelDistribution { level, probs }, total))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `π_h` for every level, by forward propagation of the root mass.
pub fn forward_marginals(inst: &ProblemInstance) -> Vec<Vec<f64>> {
    let chain = &inst.chain;
    let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
    for h in 0..chain.horizon() {
        let mut next = vec![KahanSum::new(); chain.level_size(h + 1)];
        for (i, row) in chain.kernels[h].iter().enumerate() {
            let m = out[h][i];
            if m == 0.0 {
                continue;
            }
            for &(j, p) in row {
                next[j as usize].add(m * p);
            }
        }
        out.push(next.iter().map(KahanSum::value).collect());
    }
    out
}

/// `g_h(x) = Σ π_ref(x'|x) g_{h+1}(x')` from `g_to` at level `to` down to level `from`.
fn pull_back(inst: &ProblemInstance, from: usize, to: usize, g_to: Vec<f64>) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); to + 1];
    out[to] = g_to;
    for h in (from..to).rev() {
        let row_value = |row: &Row| {
            row.iter()
                .map(|&(j, p)| p * out[h + 1][j as usize])
                .collect::<KahanSum>()
                .value()
        };
        out[h] = inst.chain.kernels[h].iter().map(row_value).collect();
    }
    out
}

/// `V*` by backward induction from the terminal reward.
pub fn backward_induction(inst: &ProblemInstance) -> ValueTable {
    let h = inst.horizon();
    ValueTable::new(
        ValueTag::ExactVstar,
        pull_back(inst, 0, h, inst.terminal_reward.clone()),
    )
}

/// Level marginals tilted by `table` (or untilted when `None`) and their normalizers.
pub fn tilted_marginals(
    inst: &ProblemInstance,
    table: Option<&ValueTable>,
) -> Result<(Vec<LevelDistribution>, Vec<f64>)> {
    let pi = forward_marginals(inst);
    tilt(&pi, table.map(|t| t.values.as_slice()))
}

fn tilt(pi: &[Vec<f64>], values: Option<&[Vec<f64>]>) -> Result<(Vec<LevelDistribution>, Vec<f64>)> {
    let mut dists = Vec::with_capacity(pi.len());
    let mut norms = Vec::with_capacity(pi.len());
    for (h, level) in pi.iter().enumerate() {
        let w = match values {
            Some(v) => level.iter().zip(&v[h]).map(|(p, x)| p * x).collect(),
            None => level.clone(),
        };
        let (d, z) = LevelDistribution::from_weights(h, w)?;
        dists.push(d);
        norms.push(z);
    }
    Ok((dists, norms))
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceReport {
    pub m_list: Vec<f64>,
    /// Direct `Σ π*²/π̂ − 1` per level `0..=H`.
    #[serde(serialize_with = "ext_f64::vec::serialize")]
    pub chi2: Vec<f64>,
    /// `E_{π*}[V̂/V*]·E_{π*}[V*/V̂] − 1` per level.
    #[serde(serialize_with = "ext_f64::vec::serialize")]
    pub chi2_identity: Vec<f64>,
    #[serde(serialize_with = "ext_f64::vec::serialize")]
    pub kl: Vec<f64>,
    /// `dcov[k][h] = D_cov^{m_list[k]}(π*_h ‖ π̂_h)`.
    pub dcov: Vec<Vec<f64>>,
    pub z: f64,
    pub zhat: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageConstants {
    #[serde(serialize_with = "ext_f64::serialize")]
    pub c_act: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub c_act_hat: f64,
    /// Raw `max max(V*/V̂, V̂/V*)` over reachable states.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub c_inf: f64,
    /// Same after rescaling `V̂` by the constant minimizing the maximum.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub c_inf_rescaled: f64,
    pub eta_list: Vec<f64>,
    /// `action_tail[k][h] = Pr_{π*}[V*(x_h)/V*(x_{h−1}) ≥ η_k]`, index 0 unused (0).
    pub action_tail: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryBounds {
    pub n: usize,
    pub m: f64,
    pub eta: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub thm_3_2: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub prop_b1_sharp: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub thm_3_4: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub thm_b4: f64,
    #[serde(serialize_with = "ext_f64::serialize")]
    pub thm_3_6: f64,
    /// SMC-RS heavy-tail analog: `H√(M/N) + Σ_{h=1}^{H} D_cov^M`.
    #[serde(serialize_with = "ext_f64::serialize")]
    pub thm_c1: f64,
}

/// Cached exact quantities for one instance.
pub struct Oracle<'a> {
    pub inst: &'a ProblemInstance,
    pub pi: Vec<Vec<f64>>,
    pub reach: Vec<Vec<bool>>,
    pub vstar: ValueTable,
    pub z: f64,
    pub zhat: Vec<f64>,
    pub pistar: Vec<LevelDistribution>,
    pub pihat: Vec<LevelDistribution>,
}

impl<'a> Oracle<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Result<Self> {
        let pi = forward_marginals(inst);
        let reach = pi.iter().map(|l| l.iter().map(|p| *p > 0.0).collect()).collect();
        let vstar = backward_induction(inst);
        let (pistar, _) = tilt(&pi, Some(&vstar.values))?;
        let (pihat, zhat) = tilt(&pi, Some(&inst.prm.values))?;
        Ok(Oracle {
            inst,
            pi,
            reach,
            z: vstar.values[0][0],
            vstar,
            zhat,
            pistar,
            pihat,
        })
    }

    pub fn horizon(&self) -> usize {
        self.inst.horizon()
    }

    pub fn pi_h(&self, h: usize) -> LevelDistribution {
        LevelDistribution {
            level: h,
            probs: self.pi[h].clone(),
        }
    }

    /// `π*(x_{h+1} | x_h)` for every reachable state; fails on a reachable `V* = 0` state.
    pub fn optimal_kernel(&self) -> Result<Vec<Vec<Row>>> {
        let chain = &self.inst.chain;
        let mut out = Vec::with_capacity(chain.horizon());
        for h in 0..chain.horizon() {
            let mut rows = Vec::with_capacity(chain.level_size(h));
            for (i, row) in chain.kernels[h].iter().enumerate() {
                let v = self.vstar.at(h, i);
                if !self.reach[h][i] {
                    rows.push(Row::new());
                    continue;
                }
                if v <= 0.0 {
                    return Err(Error::ZeroValueState { level: h, state: i });
                }
                rows.push(
                    row.iter()
                        .map(|&(j, p)| (j, p * self.vstar.at(h + 1, j as usize) / v))
                        .collect(),
                );
            }
            out.push(rows);
        }
        Ok(out)
    }

    pub fn divergence_report(&self, m_list: &[f64]) -> Result<DivergenceReport> {
        let levels = self.horizon() + 1;
        let mut chi2 = Vec::with_capacity(levels);
        let mut chi2_identity = Vec::with_capacity(levels);
        let mut kl = Vec::with_capacity(levels);
        let mut dcov = vec![Vec::with_capacity(levels); m_list.len()];
        for h in 0..levels {
            let (ps, ph) = (&self.pistar[h].probs, &self.pihat[h].probs);
            let mut direct = KahanSum::new();
            let mut kl_h = KahanSum::new();
            let mut infinite = false;
            for (&a, &b) in ps.iter().zip(ph) {
                if a <= 0.0 {
                    continue;
                }
                if b <= 0.0 {
                    infinite = true;
                    continue;
                }
                direct.add(a * a / b);
                kl_h.add(a * (a / b).ln());
            }
            let direct = if infinite { f64::INFINITY } else { direct.value() - 1.0 };
            let identity = self.chi2_identity_at(h);
            let supports_match = ps.iter().zip(ph).all(|(a, b)| (*a > 0.0) == (*b > 0.0));
            if supports_match && direct.is_finite() && identity.is_finite() {
                let scale = 1.0 + direct.abs().max(identity.abs());
                if (direct - identity).abs() > CHI2_IDENTITY_TOL * scale {
                    return Err(Error::SelfCheckFailed(format!(
                        "chi-square identity at level {h}: direct {direct}, product form {identity}"
                    )));
                }
            }
            chi2.push(direct.max(0.0));
            chi2_identity.push(identity.max(0.0));
            kl.push(if infinite { f64::INFINITY } else { kl_h.value().max(0.0) });
            for (k, &m) in m_list.iter().enumerate() {
                let tail: KahanSum = ps
                    .iter()
                    .zip(ph)
                    .filter(|(a, b)| **a > 0.0 && (**b <= 0.0 || **a / **b >= m * (1.0 - THRESHOLD_SLACK)))
                    .map(|(a, _)| *a)
                    .collect();
                dcov[k].push(tail.value().clamp(0.0, 1.0));
            }
        }
        Ok(DivergenceReport {
            m_list: m_list.to_vec(),
            chi2,
            chi2_identity,
            kl,
            dcov,
            z: self.z,
            zhat: self.zhat.clone(),
        })
    }

    /// `E_{π*_h}[V̂/V*]·E_{π*_h}[V*/V̂] − 1`, over the support of `π*_h`.
    fn chi2_identity_at(&self, h: usize) -> f64 {
        let mut e1 = KahanSum::new();
        let mut e2 = KahanSum::new();
        for (i, &p) in self.pistar[h].probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let (vs, vh) = (self.vstar.at(h, i), self.inst.prm.at(h, i));
            if vh <= 0.0 {
                return f64::INFINITY;
            }
            e1.add(p * vh / vs);
            e2.add(p * vs / vh);
        }
        e1.value() * e2.value() - 1.0
    }

    pub fn coverage_constants(&self, eta_list: &[f64]) -> CoverageConstants {
        let chain = &self.inst.chain;
        let prm = &self.inst.prm;
        let mut c_act: f64 = 1.0;
        let mut c_act_hat: f64 = 1.0;
        let ratio = |num: f64, den: f64| {
            if den > 0.0 {
                Some(num / den)
            } else if num > 0.0 {
                Some(f64::INFINITY)
            } else {
                None
            }
        };
        for h in 0..chain.horizon() {
            for (i, row) in chain.kernels[h].iter().enumerate() {
                if !self.reach[h][i] {
                    continue;
                }
                for &(j, p) in row {
                    if p <= 0.0 {
                        continue;
                    }
                    let j = j as usize;
                    if let Some(r) = ratio(self.vstar.at(h + 1, j), self.vstar.at(h, i)) {
                        c_act = c_act.max(r);
                    }
                    if let Some(r) = ratio(prm.at(h + 1, j), prm.at(h, i)) {
                        c_act_hat = c_act_hat.max(r);
                    }
                }
            }
        }
        let mut c_inf: f64 = 1.0;
        let (mut rmax, mut rmin) = (0.0_f64, f64::INFINITY);
        for h in 0..=chain.horizon() {
            for i in 0..chain.level_size(h) {
                if !self.reach[h][i] {
                    continue;
                }
                let (vs, vh) = (self.vstar.at(h, i), prm.at(h, i));
                if vs <= 0.0 && vh <= 0.0 {
                    continue;
                }
                let r = if vh > 0.0 { vs / vh } else { f64::INFINITY };
                let worst = if vs > 0.0 { r.max(vh / vs) } else { f64::INFINITY };
                c_inf = c_inf.max(worst);
                rmax = rmax.max(r);
                rmin = rmin.min(r);
            }
        }
        let c_inf_rescaled = if rmin > 0.0 && rmax.is_finite() {
            (rmax / rmin).sqrt().max(1.0)
        } else {
            f64::INFINITY
        };
        let action_tail = eta_list.iter().map(|&eta| self.action_tail(eta)).collect();
        CoverageConstants {
            c_act,
            c_act_hat,
            c_inf,
            c_inf_rescaled,
            eta_list: eta_list.to_vec(),
            action_tail,
        }
    }

    /// Per level `h = 1..=H`: mass of transitions with `V*(x_h)/V*(x_{h−1}) ≥ η`
    /// under `x_{h−1} ~ π*_{h−1}`, `x_h ~ π*(·|x_{h−1})`. Index 0 is 0.
    fn action_tail(&self, eta: f64) -> Vec<f64> {
        let chain = &self.inst.chain;
        let mut out = vec![0.0];
        for h in 1..=chain.horizon() {
            let mut s = KahanSum::new();
            for (i, row) in chain.kernels[h - 1].iter().enumerate() {
                let (m, v) = (self.pi[h - 1][i], self.vstar.at(h - 1, i));
                if m <= 0.0 || v <= 0.0 {
                    continue;
                }
                for &(j, p) in row {
                    let vn = self.vstar.at(h, j as usize);
                    if vn > 0.0 && vn / v >= eta * (1.0 - THRESHOLD_SLACK) {
                        s.add(m * p * vn / self.z);
                    }
                }
            }
            out.push(s.value().clamp(0.0, 1.0));
        }
        out
    }

    /// `E_{x_1 ~ π_1}[Ṽ(x_1)²]` with `Ṽ(x_1) = E[V̂(x_to) | x_1]`.
    pub fn lookahead_second_moment(&self, to: usize) -> f64 {
        let g = pull_back(self.inst, 1, to, self.inst.prm.values[to].clone());
        self.pi[1]
            .iter()
            .zip(&g[1])
            .map(|(p, v)| p * v * v)
            .collect::<KahanSum>()
            .value()
    }

    /// `Σ_{h=1}^{H} √(E_π[V̂(x_{h−1})]·E_π[V*(x_h)²/V̂(x_{h−1})]) / Z`.
    fn prop_b1_sum(&self) -> f64 {
        let chain = &self.inst.chain;
        let mut total = 0.0;
        for h in 1..=chain.horizon() {
            let mut second = KahanSum::new();
            for (i, row) in chain.kernels[h - 1].iter().enumerate() {
                let m = self.pi[h - 1][i];
                if m <= 0.0 {
                    continue;
                }
                let vh = self.inst.prm.at(h - 1, i);
                let s: KahanSum = row
                    .iter()
                    .map(|&(j, p)| p * self.vstar.at(h, j as usize).powi(2))
                    .collect();
                if vh <= 0.0 {
                    if s.value() > 0.0 {
                        return f64::INFINITY;
                    }
                    continue;
                }
                second.add(m * s.value() / vh);
            }
            total += (self.zhat[h - 1] * second.value()).sqrt();
        }
        total / self.z
    }

    pub fn theory_bounds(&self, n: usize, m: f64, eta: f64) -> Result<TheoryBounds> {
        let div = self.divergence_report(&[m])?;
        let cov = self.coverage_constants(&[eta]);
        Ok(self.bounds_from(&div, &cov, n))
    }

    /// Evaluate the bound formulas from precomputed reports (first `M`, first `η`).
    pub fn bounds_from(&self, div: &DivergenceReport, cov: &CoverageConstants, n: usize) -> TheoryBounds {
        let hz = self.horizon();
        let nf = n as f64;
        let hf = hz as f64;
        let inner: f64 = (1..hz).map(|h| div.chi2[h].sqrt()).sum();
        let all: f64 = (1..=hz).map(|h| div.chi2[h].sqrt()).sum();
        let m = div.m_list.first().copied().unwrap_or(1.0);
        let eta = cov.eta_list.first().copied().unwrap_or(1.0);
        let dcov = div.dcov.first().cloned().unwrap_or_else(|| vec![0.0; hz + 1]);
        let tail = cov.action_tail.first().cloned().unwrap_or_else(|| vec![0.0; hz + 1]);
        let dcov_inner: f64 = (1..hz).map(|h| dcov[h]).sum();
        let dcov_all: f64 = (1..=hz).map(|h| dcov[h]).sum();
        let tail_all: f64 = (1..=hz).map(|h| tail[h]).sum();
        TheoryBounds {
            n,
            m,
            eta,
            thm_3_2: (cov.c_act / nf).sqrt() * (hf + inner),
            prop_b1_sharp: self.prop_b1_sum() / nf.sqrt(),
            thm_3_4: hf * (m * cov.c_act / nf).sqrt() + dcov_inner,
            thm_b4: hf * (m * eta / nf).sqrt() + dcov_all + tail_all,
            thm_3_6: all / nf.sqrt(),
            thm_c1: hf * (m / nf).sqrt() + dcov_all,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::{build_smc_lower, build_var_blowup, random_tree_instance, two_path};
    use approx::assert_relative_eq;

    #[test]
    fn two_path_values() {
        let inst = two_path();
        let o = Oracle::new(&inst).unwrap();
        assert_eq!(o.vstar.values[1], vec![2.0, 1.0]);
        assert_eq!(o.vstar.values[0][0], 1.5);
        assert_relative_eq!(o.pistar[1].probs[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(o.pihat[1].probs, vec![0.5, 0.5]);
    }

    #[test]
    fn constant_reward_gives_constant_value() {
        let mut inst = random_tree_instance(3, 2, 5);
        inst.terminal_reward = vec![1.0; inst.terminal_reward.len()];
        let v = backward_induction(&inst);
        for level in &v.values {
            for x in level {
                assert_relative_eq!(*x, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn smc_lower_value_closed_form() {
        for hz in 1..=10 {
            let inst = build_smc_lower(hz, 1.0).unwrap();
            let v = backward_induction(&inst);
            for h in 0..=hz {
                for (i, x) in v.values[h].iter().enumerate() {
                    let ones = (i as u32).count_ones() as i32;
                    let want = 2f64.powi(ones) * 1.5f64.powi((hz - h) as i32);
                    assert_relative_eq!(*x, want, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn smc_lower_target_is_product_bernoulli() {
        let hz = 6;
        let inst = build_smc_lower(hz, 1.0).unwrap();
        let o = Oracle::new(&inst).unwrap();
        for (i, p) in o.pistar[hz].probs.iter().enumerate() {
            let ones = (i as u32).count_ones() as i32;
            let want = (2.0f64 / 3.0).powi(ones) * (1.0f64 / 3.0).powi(hz as i32 - ones);
            assert_relative_eq!(*p, want, max_relative = 1e-12);
        }
        for rows in o.optimal_kernel().unwrap() {
            for r in rows {
                assert_relative_eq!(r[0].1, 1.0 / 3.0, max_relative = 1e-12);
                assert_relative_eq!(r[1].1, 2.0 / 3.0, max_relative = 1e-12);
            }
        }
        let div = o.divergence_report(&[2.0]).unwrap();
        assert!(div.chi2.iter().all(|c| c.abs() < 1e-12));
        let b = o.theory_bounds(16, 2.0, 2.0).unwrap();
        assert!(b.thm_3_6.abs() < 1e-6);
        assert_relative_eq!(o.coverage_constants(&[]).c_act_hat, 2.0);
    }

    #[test]
    fn optimal_kernel_on_two_path_and_pushforward() {
        let inst = two_path();
        let o = Oracle::new(&inst).unwrap();
        let k = o.optimal_kernel().unwrap();
        assert_relative_eq!(k[0][0][0].1, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(k[0][0][1].1, 1.0 / 3.0, epsilon = 1e-15);
        for seed in 0..10 {
            let inst = random_tree_instance(seed, 3, 4);
            let o = Oracle::new(&inst).unwrap();
            let k = o.optimal_kernel().unwrap();
            for (h, rows) in k.iter().enumerate() {
                let mut push = vec![0.0; inst.chain.level_size(h + 1)];
                for (i, row) in rows.iter().enumerate() {
                    let s: f64 = row.iter().map(|x| x.1).sum();
                    assert!((s - 1.0).abs() < 1e-10);
                    for &(j, p) in row {
                        push[j as usize] += o.pistar[h].probs[i] * p;
                    }
                }
                for (a, b) in push.iter().zip(&o.pistar[h + 1].probs) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn two_path_divergences() {
        let inst = two_path();
        let o = Oracle::new(&inst).unwrap();
        let d = o.divergence_report(&[4.0 / 3.0, 2.0]).unwrap();
        assert_relative_eq!(d.chi2[1], 1.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(d.chi2_identity[1], 1.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(d.dcov[0][1], 2.0 / 3.0, max_relative = 1e-12);
        assert_eq!(d.dcov[1][1], 0.0);
        assert_eq!(d.chi2[0], 0.0);
    }

    #[test]
    fn exact_prm_has_zero_divergence() {
        let inst = random_tree_instance(5, 2, 5);
        let v = backward_induction(&inst);
        let exact = inst.with_prm("exact", v.values.clone());
        let o = Oracle::new(&exact).unwrap();
        let d = o.divergence_report(&[1.5, 3.0]).unwrap();
        for h in 0..=exact.horizon() {
            assert!(d.chi2[h] < 1e-12);
            assert!(d.kl[h] < 1e-12);
            assert_eq!(d.dcov[0][h], 0.0);
        }
    }

    #[test]
    fn two_path_coverage() {
        let inst = two_path();
        let c = Oracle::new(&inst).unwrap().coverage_constants(&[1.2]);
        assert_relative_eq!(c.c_act, 4.0 / 3.0, max_relative = 1e-15);
        assert_eq!(c.c_act_hat, 2.0);
        assert_eq!(c.c_inf, 2.0);
        assert_relative_eq!(c.c_inf_rescaled, 2f64.sqrt(), max_relative = 1e-15);
        // Only ⊥→a has ratio 4/3 ≥ 1.2.
        assert_relative_eq!(c.action_tail[0][1], 2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn two_path_bounds() {
        let inst = two_path();
        let o = Oracle::new(&inst).unwrap();
        let b = o.theory_bounds(100, 2.0, 2.0).unwrap();
        assert_relative_eq!(b.thm_3_2, (1.0f64 / 75.0).sqrt() * 7.0 / 3.0, max_relative = 1e-12);
        assert!(b.prop_b1_sharp <= b.thm_3_2);
    }

    #[test]
    fn var_blowup_second_moment() {
        let inst = build_var_blowup(8).unwrap();
        let o = Oracle::new(&inst).unwrap();
        assert!(o.lookahead_second_moment(4) >= 16.0);
        assert_eq!(o.coverage_constants(&[]).c_act_hat, 2.0);
        assert_eq!(o.coverage_constants(&[]).c_act, 1.0);
    }

    #[test]
    fn dcov_is_monotone_in_m() {
        let inst = random_tree_instance(9, 2, 6);
        let o = Oracle::new(&inst).unwrap();
        let ms = [1.0, 1.1, 1.5, 2.0, 4.0, 10.0];
        let d = o.divergence_report(&ms).unwrap();
        for h in 0..=inst.horizon() {
            for k in 1..ms.len() {
                assert!(d.dcov[k][h] <= d.dcov[k - 1][h]);
            }
        }
    }

    #[test]
    fn z_matches_enumeration() {
        let inst = random_tree_instance(2, 3, 5);
        let o = Oracle::new(&inst).unwrap();
        let hz = inst.horizon();
        let e: f64 = o.pi[hz].iter().zip(&inst.terminal_reward).map(|(p, r)| p * r).sum();
        assert!((o.vstar.values[0][0] - e).abs() < 1e-10);
    }
}
