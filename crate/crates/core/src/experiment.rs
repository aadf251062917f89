//! Deterministic parallel trial campaigns and their CSV/JSON reports.
//!
//! Trials are cut into fixed blocks of [`BLOCK_SIZE`]; trial `t` always uses
//! `trial_rng(seed, t)`, each block is folded sequentially and blocks are
//! merged in index order. Outputs therefore do not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{write_atomic, ProblemInstance};
use crate::error::{Error, Result};
use crate::model::{trial_rng, GuidedModel, SimRng};
use crate::numeric::{fmt_f64, KahanSum};
use crate::oracle::{Oracle, TheoryBounds};
use crate::samplers::{
    action_level_sampler, best_of_n, dmc_restart_run, sis_run, smc_ind_run, smc_ind_run_coupled, smc_option2,
    smc_rs_run, smc_run, IndConfig, Outcome, SamplerConfig,
};
use crate::stats::{gof_chi_square_maps, EmpiricalFinal, GofResult};
use crate::vgb::{splitmix64, vgb_walk_coupled, vgb_walk_forest, ParticleForest, TreeView};

/// Trials per deterministic work unit.
pub const BLOCK_SIZE: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "smc")]
    Smc,
    #[serde(rename = "smc-opt2")]
    SmcOpt2,
    #[serde(rename = "smc-rs")]
    SmcRs,
    #[serde(rename = "dmc-restart")]
    DmcRestart,
    #[serde(rename = "sis")]
    Sis,
    #[serde(rename = "bon")]
    Bon,
    #[serde(rename = "action-rs")]
    ActionRs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Smc,
        Algorithm::SmcOpt2,
        Algorithm::SmcRs,
        Algorithm::DmcRestart,
        Algorithm::Sis,
        Algorithm::Bon,
        Algorithm::ActionRs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smc => "smc",
            Algorithm::SmcOpt2 => "smc-opt2",
            Algorithm::SmcRs => "smc-rs",
            Algorithm::DmcRestart => "dmc-restart",
            Algorithm::Sis => "sis",
            Algorithm::Bon => "bon",
            Algorithm::ActionRs => "action-rs",
        }
    }

    /// Whether runs carry a normalizing-constant estimate `Ŵ`.
    pub fn has_estimate(self) -> bool {
        !matches!(self, Algorithm::Bon | Algorithm::ActionRs)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Everything one campaign needs besides the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub algo: Algorithm,
    pub sampler: SamplerConfig,
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.sampler.validate()
    }

    /// Identity of the sampling configuration (excludes trials and workers).
    pub fn key(&self, instance_hash: &str) -> String {
        format!("{instance_hash}|{}|{}|{:?}", self.algo, self.seed, self.sampler)
    }
}

/// Fill unset constants from the oracle: `η = Ĉ_act` when `eta` is `None`
/// and `C_inf` from the exact ratio bound when `c_inf` is `None`.
pub fn resolve_defaults(sampler: &mut SamplerConfig, oracle: &Oracle, eta: Option<f64>) {
    let cov = oracle.coverage_constants(&[]);
    sampler.eta = eta.unwrap_or(cov.c_act_hat);
    if sampler.c_inf.is_none() && cov.c_inf.is_finite() {
        sampler.c_inf = Some(cov.c_inf);
    }
}

/// Result of one trial of any algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult<S> {
    pub output: Outcome<S>,
    /// `ln Ŵ_h` for `h = 0..=H`, for algorithms that estimate it.
    pub log_what: Option<Vec<f64>>,
    pub restarts: usize,
    pub attempts: u64,
    pub clamp_warnings: u64,
}

pub fn run_trial<M: GuidedModel>(
    model: &M,
    algo: Algorithm,
    cfg: &SamplerConfig,
    rng: &mut SimRng,
) -> Result<TrialResult<M::State>> {
    let run = match algo {
        Algorithm::Smc => smc_run(model, cfg, rng),
        Algorithm::SmcOpt2 => smc_option2(model, cfg, rng)?,
        Algorithm::SmcRs => smc_rs_run(model, cfg, rng)?,
        Algorithm::DmcRestart => dmc_restart_run(model, cfg, rng)?,
        Algorithm::Sis => sis_run(model, cfg.particles, rng),
        Algorithm::Bon | Algorithm::ActionRs => {
            let path = if algo == Algorithm::Bon {
                best_of_n(model, cfg.particles, rng)?
            } else {
                action_level_sampler(model, rng)?
            };
            let attempts = if algo == Algorithm::Bon {
                cfg.particles as u64
            } else {
                1
            };
            return Ok(TrialResult {
                output: path.last().map_or(Outcome::Dead, |s| Outcome::Sample(*s)),
                log_what: None,
                restarts: 0,
                attempts,
                clamp_warnings: 0,
            });
        }
    };
    Ok(TrialResult {
        output: run.output,
        log_what: Some(run.log_what),
        restarts: run.restarts,
        attempts: run.attempts,
        clamp_warnings: run.clamp_warnings,
    })
}

/// Fold `trials` trials in fixed blocks on `workers` threads and merge the
/// block accumulators in block order. The first error in block order wins.
pub fn fold_trials<A, I, S, G>(trials: u64, workers: usize, init: I, step: S, merge: G) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) -> Result<()> + Sync,
    G: Fn(&mut A, A) -> Result<()>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let blocks = trials.div_ceil(BLOCK_SIZE);
    let parts: Vec<Result<A>> = pool.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = init();
                for t in b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(trials) {
                    step(&mut acc, t)?;
                }
                Ok(acc)
            })
            .collect()
    });
    let mut out = init();
    for p in parts {
        merge(&mut out, p?)?;
    }
    Ok(out)
}

/// Order-independent campaign accumulator.
#[derive(Clone, Debug)]
pub struct CampaignStats {
    pub finals: EmpiricalFinal,
    /// `Σ Ŵ_h` and `Σ Ŵ_h²` per level over runs with an estimate (dead runs count as 0).
    pub what_sum: Vec<KahanSum>,
    pub what_sq: Vec<KahanSum>,
    pub what_runs: u64,
    /// `Σ ln Ŵ_H` over runs with a finite estimate.
    pub log_what_sum: KahanSum,
    pub log_what_runs: u64,
    pub attempts: u64,
    pub clamp_warnings: u64,
}

impl CampaignStats {
    pub fn new(key: &str, horizon: usize) -> Self {
        CampaignStats {
            finals: EmpiricalFinal::new(key),
            what_sum: vec![KahanSum::new(); horizon + 1],
            what_sq: vec![KahanSum::new(); horizon + 1],
            what_runs: 0,
            log_what_sum: KahanSum::new(),
            log_what_runs: 0,
            attempts: 0,
            clamp_warnings: 0,
        }
    }

    pub fn record<S>(&mut self, r: &TrialResult<S>, key: u64) {
        let restarts = r.restarts as u64;
        match r.output {
            Outcome::Sample(_) => self.finals.record_sample(key, restarts),
            Outcome::Dead => self.finals.record_dead(restarts),
            Outcome::Restart => self.finals.record_exhausted(restarts),
        }
        self.attempts += r.attempts;
        self.clamp_warnings += r.clamp_warnings;
        if let (Some(lw), false) = (&r.log_what, matches!(r.output, Outcome::Restart)) {
            for (h, l) in lw.iter().enumerate() {
                let w = l.exp();
                self.what_sum[h].add(w);
                self.what_sq[h].add(w * w);
            }
            self.what_runs += 1;
            if let Some(last) = lw.last().filter(|x| x.is_finite()) {
                self.log_what_sum.add(*last);
                self.log_what_runs += 1;
            }
        }
    }

    pub fn merge(&mut self, other: CampaignStats) -> Result<()> {
        self.finals.merge(&other.finals)?;
        for (a, b) in self.what_sum.iter_mut().zip(&other.what_sum) {
            a.merge(b);
        }
        for (a, b) in self.what_sq.iter_mut().zip(&other.what_sq) {
            a.merge(b);
        }
        self.what_runs += other.what_runs;
        self.log_what_sum.merge(&other.log_what_sum);
        self.log_what_runs += other.log_what_runs;
        self.attempts += other.attempts;
        self.clamp_warnings += other.clamp_warnings;
        Ok(())
    }

    /// Mean and standard error of `Ŵ_h` per level.
    pub fn what_mean_se(&self) -> Vec<(f64, f64)> {
        let n = self.what_runs as f64;
        self.what_sum
            .iter()
            .zip(&self.what_sq)
            .map(|(s, q)| {
                if self.what_runs < 2 {
                    return (f64::NAN, f64::NAN);
                }
                let mean = s.value() / n;
                let var = ((q.value() - n * mean * mean) / (n - 1.0)).max(0.0);
                (mean, (var / n).sqrt())
            })
            .collect()
    }

    pub fn mean_log_what(&self) -> f64 {
        if self.log_what_runs == 0 {
            f64::NAN
        } else {
            self.log_what_sum.value() / self.log_what_runs as f64
        }
    }
}

/// Run a campaign on any model. `key` maps final states to accumulator keys.
pub fn campaign<M, K>(model: &M, key: K, cfg: &CampaignConfig, config_key: &str) -> Result<CampaignStats>
where
    M: GuidedModel,
    K: Fn(M::State) -> u64 + Sync,
{
    cfg.validate()?;
    let horizon = model.horizon();
    fold_trials(
        cfg.trials,
        cfg.workers,
        || CampaignStats::new(config_key, horizon),
        |acc, t| {
            let r = run_trial(model, cfg.algo, &cfg.sampler, &mut trial_rng(cfg.seed, t))?;
            let k = r.output.sample().map_or(0, &key);
            acc.record(&r, k);
            Ok(())
        },
        |a, b| a.merge(b),
    )
}

/// One-row summary of a campaign on an explicit instance.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub instance_hash: String,
    pub algo: Algorithm,
    pub particles: usize,
    pub trials: u64,
    pub seed: u64,
    pub tv_to_pistar: f64,
    pub tv_halfwidth: f64,
    /// TV with dead and exhausted runs as an extra outcome.
    pub tv_with_dead: f64,
    pub mean_log_what: f64,
    pub dead_rate: f64,
    pub exhausted_rate: f64,
    pub restart_mean: f64,
    pub attempts_mean: f64,
    pub clamp_warnings: u64,
    /// Mean and standard error of `Ŵ_h`, and the exact `Ẑ_h`, per level.
    pub what_mean: Vec<f64>,
    pub what_se: Vec<f64>,
    pub zhat: Vec<f64>,
    /// Final-state counts by label.
    pub counts: BTreeMap<String, u64>,
    /// Informational; never part of the CSV.
    pub wall_ms: u128,
}

pub const RUN_HEADER: [&str; 12] = [
    "instance",
    "instance_hash",
    "algo",
    "N",
    "trials",
    "seed",
    "tv_to_pistar",
    "tv_halfwidth",
    "mean_logWhat",
    "dead_rate",
    "restart_mean",
    "attempts_mean",
];

impl RunReport {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.instance.clone(),
            self.instance_hash.clone(),
            self.algo.to_string(),
            self.particles.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            fmt_f64(self.tv_to_pistar),
            fmt_f64(self.tv_halfwidth),
            fmt_f64(self.mean_log_what),
            fmt_f64(self.dead_rate),
            fmt_f64(self.restart_mean),
            fmt_f64(self.attempts_mean),
        ]
    }
}

/// Run a campaign on an explicit instance and summarize it against the oracle.
pub fn run_report(inst: &ProblemInstance, oracle: &Oracle, cfg: &CampaignConfig) -> Result<RunReport> {
    let start = Instant::now();
    let hash = inst.content_hash();
    let stats = campaign(inst, u64::from, cfg, &cfg.key(&hash))?;
    let horizon = inst.horizon();
    let target = &oracle.pistar[horizon];
    let (tv, half) = stats.finals.tv_to(target)?.unwrap_or((f64::NAN, f64::NAN));
    let tv_dead = stats.finals.tv_with_dead(target)?.unwrap_or(f64::NAN);
    let n = cfg.trials as f64;
    let ms = stats.what_mean_se();
    let counts = stats
        .finals
        .counts
        .iter()
        .map(|(k, v)| (inst.chain.levels[horizon][*k as usize].clone(), *v))
        .collect();
    Ok(RunReport {
        instance: inst.name.clone(),
        instance_hash: hash,
        algo: cfg.algo,
        particles: cfg.sampler.particles,
        trials: cfg.trials,
        seed: cfg.seed,
        tv_to_pistar: tv,
        tv_halfwidth: half,
        tv_with_dead: tv_dead,
        mean_log_what: stats.mean_log_what(),
        dead_rate: stats.finals.dead_runs as f64 / n,
        exhausted_rate: stats.finals.exhausted_runs as f64 / n,
        restart_mean: stats.finals.restarts_total as f64 / n,
        attempts_mean: stats.attempts as f64 / n,
        clamp_warnings: stats.clamp_warnings,
        what_mean: ms.iter().map(|x| x.0).collect(),
        what_se: ms.iter().map(|x| x.1).collect(),
        zhat: oracle.zhat.clone(),
        counts,
        wall_ms: start.elapsed().as_millis(),
    })
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn run_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = reports.iter().map(RunReport::csv_fields).collect();
    csv_bytes(&RUN_HEADER, &rows)
}

/// A sweep row: the run summary plus bound values at its `N`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub run: RunReport,
    pub bounds: TheoryBounds,
}

pub const SWEEP_BOUND_HEADER: [&str; 8] = [
    "M",
    "eta",
    "thm_3_2",
    "prop_B1_sharp",
    "thm_3_4",
    "thm_B4",
    "thm_3_6",
    "thm_C1",
];

/// One campaign per `(algo, N)` pair, with theory bounds at each `N`
/// (tail parameter `m`, action threshold `bound_eta`).
pub fn sweep_report(
    inst: &ProblemInstance,
    oracle: &Oracle,
    base: &CampaignConfig,
    algos: &[Algorithm],
    n_list: &[usize],
    m: f64,
    bound_eta: f64,
) -> Result<Vec<SweepRow>> {
    let div = oracle.divergence_report(&[m])?;
    let cov = oracle.coverage_constants(&[bound_eta]);
    let mut rows = Vec::with_capacity(algos.len() * n_list.len());
    for &algo in algos {
        for &n in n_list {
            let mut cfg = base.clone();
            cfg.algo = algo;
            cfg.sampler.particles = n;
            rows.push(SweepRow {
                run: run_report(inst, oracle, &cfg)?,
                bounds: oracle.bounds_from(&div, &cov, n),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let header: Vec<&str> = RUN_HEADER.iter().chain(SWEEP_BOUND_HEADER.iter()).copied().collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let b = &r.bounds;
            let mut f = r.run.csv_fields();
            f.extend(
                [
                    b.m,
                    b.eta,
                    b.thm_3_2,
                    b.prop_b1_sharp,
                    b.thm_3_4,
                    b.thm_b4,
                    b.thm_3_6,
                    b.thm_c1,
                ]
                .into_iter()
                .map(fmt_f64),
            );
            f
        })
        .collect();
    csv_bytes(&header, &body)
}

/// Per-level outcome of the independent-run comparison.
#[derive(Clone, Debug, Serialize)]
pub struct LevelComparison {
    pub level: usize,
    /// `None` when both sides always produced the same single census.
    pub gof: Option<GofResult>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoupleReport {
    pub instance: String,
    pub instance_hash: String,
    pub particles: usize,
    pub trials: u64,
    pub seed: u64,
    /// Shared-seed pairs whose forests are identical.
    pub coupled_equal: u64,
    pub coupled_pairs: u64,
    /// Pairs or runs dropped because the walk hit its step cap or SMC-IND its node cap.
    pub coupled_excluded: u64,
    pub ind_excluded: u64,
    pub vgb_excluded: u64,
    pub cap_hit_rate: f64,
    pub levels: Vec<LevelComparison>,
    pub pass: bool,
}

pub const COUPLE_HEADER: [&str; 11] = [
    "instance",
    "instance_hash",
    "N",
    "trials",
    "seed",
    "level",
    "categories",
    "statistic",
    "p_value",
    "threshold",
    "pass",
];

type Census = Vec<(u32, u64)>;

#[derive(Default)]
struct CoupleAcc {
    equal: u64,
    pairs: u64,
    coupled_excluded: u64,
    ind_excluded: u64,
    vgb_excluded: u64,
    ind: Vec<BTreeMap<Census, u64>>,
    vgb: Vec<BTreeMap<Census, u64>>,
}

fn add_census(into: &mut [BTreeMap<Census, u64>], forest: &ParticleForest) {
    let counts = forest.state_counts();
    for (h, slot) in into.iter_mut().enumerate() {
        let c: Census = counts
            .get(&h)
            .map(|m| m.iter().map(|(s, n)| (*s, *n)).collect())
            .unwrap_or_default();
        *slot.entry(c).or_insert(0) += 1;
    }
}

fn merge_census(into: &mut [BTreeMap<Census, u64>], from: Vec<BTreeMap<Census, u64>>) {
    for (a, b) in into.iter_mut().zip(from) {
        for (k, v) in b {
            *a.entry(k).or_insert(0) += v;
        }
    }
}

/// Coupling check between SMC-IND and the backtracking walk with `n`
/// particles / aux visits: the constructive shared-seed coupling on every
/// trial, and chi-square comparisons (Bonferroni over levels `1..=H`) of the
/// per-level state census between independent runs.
pub fn couple_report(
    inst: &ProblemInstance,
    n: usize,
    trials: u64,
    seed: u64,
    workers: usize,
    step_cap: usize,
    alpha: f64,
) -> Result<CoupleReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let tree = TreeView::new(inst)?;
    let horizon = inst.horizon();
    let ind_cfg = IndConfig {
        particles: n,
        node_cap: step_cap,
    };
    let vgb_seed = splitmix64(seed ^ 0x7667_625f_7761_6c6b);
    let init = || CoupleAcc {
        ind: vec![BTreeMap::new(); horizon + 1],
        vgb: vec![BTreeMap::new(); horizon + 1],
        ..Default::default()
    };
    let acc = fold_trials(
        trials,
        workers,
        init,
        |acc, t| {
            let pair_seed = splitmix64(seed.wrapping_add(t));
            let walk = vgb_walk_coupled(&tree, n, pair_seed, step_cap);
            match smc_ind_run_coupled(&tree, &ind_cfg, pair_seed) {
                Ok(f) if !walk.capped => {
                    acc.pairs += 1;
                    acc.equal += u64::from(f.canonical() == walk.forest.canonical());
                }
                Ok(_) | Err(Error::BudgetExceeded { .. }) => acc.coupled_excluded += 1,
                Err(e) => return Err(e),
            }
            match smc_ind_run(&tree, &ind_cfg, &mut trial_rng(seed, t)) {
                Ok(f) => add_census(&mut acc.ind, &f),
                Err(Error::BudgetExceeded { .. }) => acc.ind_excluded += 1,
                Err(e) => return Err(e),
            }
            let w = vgb_walk_forest(&tree, n, &mut trial_rng(vgb_seed, t), step_cap);
            if w.capped {
                acc.vgb_excluded += 1;
            } else {
                add_census(&mut acc.vgb, &w.forest);
            }
            Ok(())
        },
        |a, b| {
            a.equal += b.equal;
            a.pairs += b.pairs;
            a.coupled_excluded += b.coupled_excluded;
            a.ind_excluded += b.ind_excluded;
            a.vgb_excluded += b.vgb_excluded;
            merge_census(&mut a.ind, b.ind);
            merge_census(&mut a.vgb, b.vgb);
            Ok(())
        },
    )?;
    let threshold = alpha / horizon.max(1) as f64;
    let mut levels = Vec::with_capacity(horizon);
    for h in 1..=horizon {
        let (a, b) = (&acc.ind[h], &acc.vgb[h]);
        let single = a.len() <= 1 && b.len() <= 1 && a.keys().eq(b.keys());
        let gof = if single { None } else { Some(gof_chi_square_maps(a, b)?) };
        let pass = gof.is_none_or(|g| g.p_value > threshold);
        levels.push(LevelComparison {
            level: h,
            gof,
            threshold,
            pass,
        });
    }
    let caps = acc.coupled_excluded + acc.ind_excluded + acc.vgb_excluded;
    Ok(CoupleReport {
        instance: inst.name.clone(),
        instance_hash: inst.content_hash(),
        particles: n,
        trials,
        seed,
        coupled_equal: acc.equal,
        coupled_pairs: acc.pairs,
        coupled_excluded: acc.coupled_excluded,
        ind_excluded: acc.ind_excluded,
        vgb_excluded: acc.vgb_excluded,
        cap_hit_rate: caps as f64 / (3 * trials) as f64,
        pass: acc.equal == acc.pairs && levels.iter().all(|l| l.pass),
        levels,
    })
}

pub fn couple_csv(r: &CoupleReport) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = r
        .levels
        .iter()
        .map(|l| {
            let (cats, stat, p) = match &l.gof {
                Some(g) => (g.categories.to_string(), fmt_f64(g.statistic), fmt_f64(g.p_value)),
                None => ("1".to_string(), "0".to_string(), "1".to_string()),
            };
            vec![
                r.instance.clone(),
                r.instance_hash.clone(),
                r.particles.to_string(),
                r.trials.to_string(),
                r.seed.to_string(),
                l.level.to_string(),
                cats,
                stat,
                p,
                fmt_f64(l.threshold),
                l.pass.to_string(),
            ]
        })
        .collect();
    csv_bytes(&COUPLE_HEADER, &rows)
}

/// Write the CSV to `out` and the JSON summary next to it (`.json`), each
/// atomically.
pub fn write_outputs<T: Serialize>(out: &Path, csv: &[u8], summary: &T) -> Result<()> {
    let json = serde_json::to_vec_pretty(summary).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    write_atomic(&out.with_extension("json"), &json)?;
    write_atomic(out, csv)
}
