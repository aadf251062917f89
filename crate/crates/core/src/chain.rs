//! Layered Markov chains, value tables and problem instances.
//!
//! States are addressed by `(level, dense index)`; labels are display-only.
//! Kernels are stored as sparse rows of `(target index, probability)` with
//! zero entries omitted.

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{GuidedModel, SimRng};
use crate::numeric::{ksum, KahanSum};

pub const ROOT_LABEL: &str = "⊥";

/// Absolute tolerance on row sums and PRM/reward agreement.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Default cap on the number of states at the final level of a generated tree.
pub const DEFAULT_STATE_BUDGET: u128 = 1 << 20;

pub type Row = Vec<(u32, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredChain {
    /// `levels[h]` holds the labels of `X_h`; `levels[0] == ["⊥"]`.
    pub levels: Vec<Vec<String>>,
    /// `kernels[h][i]` is the row of state `i` at level `h` into level `h + 1`.
    pub kernels: Vec<Vec<Row>>,
}

impl LayeredChain {
    pub fn horizon(&self) -> usize {
        self.kernels.len()
    }

    pub fn level_size(&self, h: usize) -> usize {
        self.levels[h].len()
    }

    pub fn row(&self, h: usize, i: usize) -> &Row {
        &self.kernels[h][i]
    }

    pub fn num_states(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Per-level reachability under `π_ref` from the root.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        let mut out = Vec::with_capacity(self.levels.len());
        let mut cur = vec![false; self.levels.first().map_or(0, Vec::len)];
        if let Some(r) = cur.first_mut() {
            *r = true;
        }
        for h in 0..self.horizon() {
            let mut next = vec![false; self.levels.get(h + 1).map_or(0, Vec::len)];
            for (i, row) in self.kernels[h].iter().enumerate() {
                if !cur.get(i).copied().unwrap_or(false) {
                    continue;
                }
                for &(j, p) in row {
                    if p > 0.0 {
                        if let Some(slot) = next.get_mut(j as usize) {
                            *slot = true;
                        }
                    }
                }
            }
            out.push(cur);
            cur = next;
        }
        out.push(cur);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValueTag {
    ExactVstar,
    Prm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub tag: ValueTag,
    /// `values[h][i]` for every level `0..=H`.
    pub values: Vec<Vec<f64>>,
}

impl ValueTable {
    pub fn new(tag: ValueTag, values: Vec<Vec<f64>>) -> Self {
        Self { tag, values }
    }

    pub fn at(&self, h: usize, i: usize) -> f64 {
        self.values[h][i]
    }

    pub fn level(&self, h: usize) -> &[f64] {
        &self.values[h]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub chain: LayeredChain,
    pub terminal_reward: Vec<f64>,
    pub prm: ValueTable,
}

impl ProblemInstance {
    pub fn horizon(&self) -> usize {
        self.chain.horizon()
    }

    /// Validate and return `self`, or fail with the full violation report.
    pub fn validated(self) -> Result<Self> {
        let report = validate_instance(&self);
        if report.is_empty() {
            Ok(self)
        } else {
            Err(Error::ValidationFailed(report))
        }
    }

    /// Same chain and reward with a different PRM table. The root entry is
    /// rescaled to 1 and the terminal level is forced to `r*`.
    pub fn with_prm(&self, name: impl Into<String>, mut values: Vec<Vec<f64>>) -> Self {
        let root = values[0][0];
        if root > 0.0 && root != 1.0 {
            values[0][0] = 1.0;
        }
        let h = self.horizon();
        values[h] = self.terminal_reward.clone();
        ProblemInstance {
            name: name.into(),
            chain: self.chain.clone(),
            terminal_reward: self.terminal_reward.clone(),
            prm: ValueTable::new(ValueTag::Prm, values),
        }
    }

    /// Short content hash (hex) of the canonical file encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&InstanceFile::from(self)).expect("instance serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Materialize any model as an explicit instance by breadth-first
    /// enumeration. Fails if more than `budget` states would be created.
    pub fn from_model<M: GuidedModel>(model: &M, name: impl Into<String>, budget: u128) -> Result<Self> {
        let horizon = model.horizon();
        let mut level_states = vec![model.root()];
        let mut levels = vec![vec![ROOT_LABEL.to_string()]];
        let mut prm = vec![vec![model.prm(0, model.root())]];
        let mut kernels = Vec::with_capacity(horizon);
        let mut total: u128 = 1;
        for h in 0..horizon {
            let mut index: HashMap<M::State, u32> = HashMap::new();
            let mut next = Vec::new();
            let mut rows = Vec::with_capacity(level_states.len());
            for &s in &level_states {
                let mut row = Row::new();
                let mut overflow = false;
                model.for_each_child(h, s, &mut |c, p| {
                    if p <= 0.0 {
                        return;
                    }
                    let j = *index.entry(c).or_insert_with(|| {
                        next.push(c);
                        (next.len() - 1) as u32
                    });
                    row.push((j, p));
                    if total + next.len() as u128 > budget {
                        overflow = true;
                    }
                });
                if overflow {
                    return Err(Error::BudgetExceeded {
                        what: "materialized states",
                        needed: total + next.len() as u128,
                        budget,
                    });
                }
                rows.push(row);
            }
            total += next.len() as u128;
            kernels.push(rows);
            levels.push(next.iter().map(|&s| model.label(h + 1, s)).collect());
            prm.push(next.iter().map(|&s| model.prm(h + 1, s)).collect());
            level_states = next;
        }
        let terminal_reward = prm[horizon].clone();
        Ok(ProblemInstance {
            name: name.into(),
            chain: LayeredChain { levels, kernels },
            terminal_reward,
            prm: ValueTable::new(ValueTag::Prm, prm),
        })
    }
}

impl GuidedModel for ProblemInstance {
    type State = u32;

    fn horizon(&self) -> usize {
        self.chain.horizon()
    }

    fn root(&self) -> u32 {
        0
    }

    fn for_each_child(&self, level: usize, state: u32, f: &mut dyn FnMut(u32, f64)) {
        for &(j, p) in &self.chain.kernels[level][state as usize] {
            f(j, p);
        }
    }

    fn prm(&self, level: usize, state: u32) -> f64 {
        self.prm.values[level][state as usize]
    }

    fn sample_child(&self, level: usize, state: u32, rng: &mut SimRng) -> u32 {
        let row = &self.chain.kernels[level][state as usize];
        crate::model::sample_weighted(row, 1.0, rng)
    }

    fn label(&self, level: usize, state: u32) -> String {
        self.chain.levels[level][state as usize].clone()
    }
}

// ---------------------------------------------------------------------------
// Tree chains

/// How the conditional rows of an autoregressive tree are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    Uniform,
    /// Softmax of i.i.d. `N(0, scale²)` logits, one independent stream per prefix.
    Random {
        seed: u64,
        scale: f64,
    },
    /// `rows[h][prefix]` is the conditional row (length = alphabet size).
    Rows(Vec<Vec<Vec<f64>>>),
}

/// Number of prefixes strictly above level `h`, i.e. `Σ_{k<h} A^k`.
fn level_offset(alphabet: usize, h: usize) -> u64 {
    (0..h).map(|k| (alphabet as u64).pow(k as u32)).sum()
}

impl KernelSpec {
    /// Conditional row of the prefix with dense index `prefix` at level `h`.
    pub fn row(&self, alphabet: usize, h: usize, prefix: usize) -> Result<Vec<f64>> {
        match self {
            KernelSpec::Uniform => Ok(vec![1.0 / alphabet as f64; alphabet]),
            KernelSpec::Random { seed, scale } => {
                let mut rng = SimRng::seed_from_u64(*seed);
                rng.set_stream(level_offset(alphabet, h) + prefix as u64);
                let logits: Vec<f64> = (0..alphabet)
                    .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                    .collect();
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
                let total = ksum(&w);
                Ok(w.into_iter().map(|x| x / total).collect())
            }
            KernelSpec::Rows(rows) => {
                let row = rows
                    .get(h)
                    .and_then(|l| l.get(prefix))
                    .ok_or_else(|| Error::InvalidSpec(format!("no row for level {h}, prefix {prefix}")))?;
                if row.len() != alphabet {
                    return Err(Error::InvalidSpec(format!(
                        "row at level {h}, prefix {prefix} has {} entries, alphabet is {alphabet}",
                        row.len()
                    )));
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "row at level {h}, prefix {prefix} has a negative or non-finite entry"
                    )));
                }
                let s = ksum(row);
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "row at level {h}, prefix {prefix} sums to {s}"
                    )));
                }
                Ok(row.clone())
            }
        }
    }
}

/// Display label of a tree prefix given its symbols.
pub fn tree_label(alphabet: usize, symbols: &[usize]) -> String {
    if symbols.is_empty() {
        return ROOT_LABEL.to_string();
    }
    if alphabet <= 10 {
        symbols.iter().map(|s| char::from(b'0' + *s as u8)).collect()
    } else {
        symbols.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
    }
}

/// Symbols of the prefix with dense index `index` at level `h` (most significant first).
pub fn tree_symbols(alphabet: usize, h: usize, mut index: usize) -> Vec<usize> {
    let mut out = vec![0; h];
    for k in (0..h).rev() {
        out[k] = index % alphabet;
        index /= alphabet;
    }
    out
}

fn check_tree_budget(alphabet: usize, horizon: usize, budget: u128) -> Result<()> {
    let needed = (alphabet as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "final-level tree states",
            needed,
            budget,
        });
    }
    Ok(())
}

/// The autoregressive tree `X_h = A^h`, with child `i·A + a` of prefix `i`.
pub fn build_tree_chain(alphabet: usize, horizon: usize, spec: &KernelSpec) -> Result<LayeredChain> {
    build_tree_chain_with_budget(alphabet, horizon, spec, DEFAULT_STATE_BUDGET)
}

pub fn build_tree_chain_with_budget(
    alphabet: usize,
    horizon: usize,
    spec: &KernelSpec,
    budget: u128,
) -> Result<LayeredChain> {
    if alphabet == 0 || horizon == 0 {
        return Err(Error::InvalidSpec("alphabet size and horizon must be positive".into()));
    }
    check_tree_budget(alphabet, horizon, budget)?;
    let mut levels = Vec::with_capacity(horizon + 1);
    let mut kernels = Vec::with_capacity(horizon);
    for h in 0..=horizon {
        let n = alphabet.pow(h as u32);
        levels.push(
            (0..n)
                .map(|i| tree_label(alphabet, &tree_symbols(alphabet, h, i)))
                .collect(),
        );
        if h == horizon {
            break;
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let probs = spec.row(alphabet, h, i)?;
            rows.push(
                probs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(a, p)| ((i * alphabet + a) as u32, *p))
                    .collect(),
            );
        }
        kernels.push(rows);
    }
    Ok(LayeredChain { levels, kernels })
}

/// `π_ref(prefix)` for every prefix of a tree chain, level by level.
pub fn tree_prefix_probs(chain: &LayeredChain) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for h in 0..chain.horizon() {
        let mut next = vec![0.0; chain.level_size(h + 1)];
        for (i, row) in chain.kernels[h].iter().enumerate() {
            for &(j, p) in row {
                next[j as usize] += out[h][i] * p;
            }
        }
        out.push(next);
    }
    out
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyHorizon,
    Shape(String),
    RootLevel {
        size: usize,
    },
    TargetOutOfRange {
        level: usize,
        state: usize,
        target: u32,
    },
    NegativeProbability {
        level: usize,
        state: usize,
        target: u32,
        prob: f64,
    },
    NonFinite {
        what: &'static str,
        level: usize,
        state: usize,
    },
    RowNotStochastic {
        level: usize,
        state: usize,
        sum: f64,
    },
    NegativeReward {
        state: usize,
        value: f64,
    },
    RewardZeroOnSupport,
    WrongTag,
    PrmNegative {
        level: usize,
        state: usize,
        value: f64,
    },
    PrmTerminalMismatch {
        state: usize,
        prm: f64,
        reward: f64,
    },
    PrmRootNotOne {
        value: f64,
    },
    PrmNotPositive {
        level: usize,
        state: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyHorizon => write!(f, "horizon must be at least 1"),
            Shape(s) => write!(f, "shape: {s}"),
            RootLevel { size } => write!(f, "level 0 must have exactly one state, has {size}"),
            TargetOutOfRange { level, state, target } => {
                write!(f, "target {target} out of range in row ({level}, {state})")
            }
            NegativeProbability {
                level,
                state,
                target,
                prob,
            } => {
                write!(f, "negative probability {prob} in row ({level}, {state}) to {target}")
            }
            NonFinite { what, level, state } => write!(f, "non-finite {what} at ({level}, {state})"),
            RowNotStochastic { level, state, sum } => {
                write!(f, "row not stochastic at ({level}, {state}): sum {sum}")
            }
            NegativeReward { state, value } => write!(f, "negative terminal reward {value} at state {state}"),
            RewardZeroOnSupport => write!(f, "terminal reward is zero on the whole reachable support"),
            WrongTag => write!(f, "prm table must be tagged PRM"),
            PrmNegative { level, state, value } => write!(f, "negative prm {value} at ({level}, {state})"),
            PrmTerminalMismatch { state, prm, reward } => {
                write!(f, "prm≠r* at level H: state {state} has prm {prm}, reward {reward}")
            }
            PrmRootNotOne { value } => write!(f, "prm at ⊥ must be 1, is {value}"),
            PrmNotPositive { level, state } => {
                write!(f, "prm not positive at reachable state ({level}, {state})")
            }
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= STOCHASTIC_TOL * b.abs().max(1.0)
}

/// Every violated invariant with the offending state; empty means valid.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let chain = &inst.chain;
    let horizon = chain.horizon();
    if horizon == 0 {
        out.push(Violation::EmptyHorizon);
    }
    if chain.levels.len() != horizon + 1 {
        out.push(Violation::Shape(format!(
            "{} label levels for horizon {horizon}",
            chain.levels.len()
        )));
        return out;
    }
    if chain.levels[0].len() != 1 {
        out.push(Violation::RootLevel {
            size: chain.levels[0].len(),
        });
    }
    let mut rows_ok = true;
    for h in 0..horizon {
        let (src, dst) = (chain.level_size(h), chain.level_size(h + 1));
        if chain.kernels[h].len() != src {
            out.push(Violation::Shape(format!(
                "kernel {h} has {} rows, level has {src} states",
                chain.kernels[h].len()
            )));
            rows_ok = false;
            continue;
        }
        for (i, row) in chain.kernels[h].iter().enumerate() {
            let mut sum = KahanSum::new();
            for &(j, p) in row {
                if j as usize >= dst {
                    out.push(Violation::TargetOutOfRange {
                        level: h,
                        state: i,
                        target: j,
                    });
                }
                if !p.is_finite() {
                    out.push(Violation::NonFinite {
                        what: "probability",
                        level: h,
                        state: i,
                    });
                } else if p < 0.0 {
                    out.push(Violation::NegativeProbability {
                        level: h,
                        state: i,
                        target: j,
                        prob: p,
                    });
                }
                sum.add(p);
            }
            let s = sum.value();
            if !(s - 1.0).abs().le(&STOCHASTIC_TOL) {
                out.push(Violation::RowNotStochastic {
                    level: h,
                    state: i,
                    sum: s,
                });
            }
        }
    }
    let n_final = chain.level_size(horizon);
    if inst.terminal_reward.len() != n_final {
        out.push(Violation::Shape(format!(
            "terminal reward has {} entries, level H has {n_final}",
            inst.terminal_reward.len()
        )));
        return out;
    }
    for (i, &r) in inst.terminal_reward.iter().enumerate() {
        if !r.is_finite() {
            out.push(Violation::NonFinite {
                what: "reward",
                level: horizon,
                state: i,
            });
        } else if r < 0.0 {
            out.push(Violation::NegativeReward { state: i, value: r });
        }
    }
    let reach = if rows_ok && !out.iter().any(|v| matches!(v, Violation::TargetOutOfRange { .. })) {
        Some(chain.reachable())
    } else {
        None
    };
    if let Some(reach) = &reach {
        let any_positive = inst
            .terminal_reward
            .iter()
            .zip(&reach[horizon])
            .any(|(r, ok)| *ok && *r > 0.0);
        if !any_positive {
            out.push(Violation::RewardZeroOnSupport);
        }
    }
    let prm = &inst.prm;
    if prm.tag != ValueTag::Prm {
        out.push(Violation::WrongTag);
    }
    if prm.values.len() != horizon + 1 {
        out.push(Violation::Shape(format!(
            "prm has {} levels, expected {}",
            prm.values.len(),
            horizon + 1
        )));
        return out;
    }
    for h in 0..=horizon {
        if prm.values[h].len() != chain.level_size(h) {
            out.push(Violation::Shape(format!(
                "prm level {h} has {} entries, level has {}",
                prm.values[h].len(),
                chain.level_size(h)
            )));
            continue;
        }
        for (i, &v) in prm.values[h].iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    what: "prm",
                    level: h,
                    state: i,
                });
            } else if v < 0.0 {
                out.push(Violation::PrmNegative {
                    level: h,
                    state: i,
                    value: v,
                });
            } else if v == 0.0 && reach.as_ref().is_some_and(|r| r[h][i]) {
                out.push(Violation::PrmNotPositive { level: h, state: i });
            }
        }
    }
    if prm.values[horizon].len() == n_final {
        for (i, (&v, &r)) in prm.values[horizon].iter().zip(&inst.terminal_reward).enumerate() {
            if !close(v, r) {
                out.push(Violation::PrmTerminalMismatch {
                    state: i,
                    prm: v,
                    reward: r,
                });
            }
        }
    }
    if let Some(&root) = prm.values[0].first() {
        if root != 1.0 && !close(root, 1.0) {
            out.push(Violation::PrmRootNotOne { value: root });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    #[serde(rename = "H")]
    horizon: usize,
    levels: Vec<Vec<String>>,
    kernels: Vec<Vec<Vec<(u32, f64)>>>,
    terminal_reward: Vec<f64>,
    prm: Vec<Vec<f64>>,
}

impl From<&ProblemInstance> for InstanceFile {
    fn from(inst: &ProblemInstance) -> Self {
        InstanceFile {
            name: inst.name.clone(),
            horizon: inst.horizon(),
            levels: inst.chain.levels.clone(),
            kernels: inst.chain.kernels.clone(),
            terminal_reward: inst.terminal_reward.clone(),
            prm: inst.prm.values.clone(),
        }
    }
}

/// Parse an instance from JSON text and validate it.
pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.horizon != file.kernels.len() {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: format!(
                "field H = {} disagrees with {} kernel steps",
                file.horizon,
                file.kernels.len()
            ),
        });
    }
    ProblemInstance {
        name: file.name,
        chain: LayeredChain {
            levels: file.levels,
            kernels: file.kernels,
        },
        terminal_reward: file.terminal_reward,
        prm: ValueTable::new(ValueTag::Prm, file.prm),
    }
    .validated()
}

pub fn instance_to_json(inst: &ProblemInstance) -> Result<String> {
    let report = validate_instance(inst);
    if !report.is_empty() {
        return Err(Error::ValidationFailed(report));
    }
    Ok(serde_json::to_string(&InstanceFile::from(inst)).expect("instance serializes"))
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn save_instance(path: impl AsRef<Path>, inst: &ProblemInstance) -> Result<()> {
    let text = instance_to_json(inst)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Write via a temporary file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::two_path;

    #[test]
    fn uniform_binary_one_step() {
        let c = build_tree_chain(2, 1, &KernelSpec::Uniform).unwrap();
        assert_eq!(c.levels, vec![vec!["⊥".to_string()], vec!["0".into(), "1".into()]]);
        assert_eq!(c.kernels[0][0], vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn uniform_binary_depth_four_has_31_states() {
        let c = build_tree_chain(2, 4, &KernelSpec::Uniform).unwrap();
        assert_eq!(c.num_states(), 31);
        for rows in &c.kernels {
            for r in rows {
                assert_eq!(r.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0.5, 0.5]);
            }
        }
    }

    #[test]
    fn random_rows_are_stochastic_and_seeded() {
        let spec = KernelSpec::Random { seed: 7, scale: 1.0 };
        let c = build_tree_chain(2, 12, &spec).unwrap();
        let internal: usize = c.kernels.iter().map(Vec::len).sum();
        assert_eq!(internal, 4095);
        for rows in &c.kernels {
            for r in rows {
                let s: f64 = r.iter().map(|x| x.1).sum();
                assert!((s - 1.0).abs() <= 1e-12, "row sums to {s}");
            }
        }
        assert_eq!(c, build_tree_chain(2, 12, &spec).unwrap());
        assert_ne!(
            c,
            build_tree_chain(2, 12, &KernelSpec::Random { seed: 8, scale: 1.0 }).unwrap()
        );
    }

    #[test]
    fn tree_budget_is_enforced() {
        let err = build_tree_chain(2, 21, &KernelSpec::Uniform).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn explicit_rows_must_normalize() {
        let spec = KernelSpec::Rows(vec![vec![vec![0.5, 0.4]]]);
        assert!(matches!(
            build_tree_chain(2, 1, &spec).unwrap_err(),
            Error::InvalidSpec(_)
        ));
    }

    #[test]
    fn two_path_is_valid() {
        assert!(validate_instance(&two_path()).is_empty());
    }

    #[test]
    fn prm_terminal_mismatch_is_reported() {
        let mut inst = two_path();
        inst.terminal_reward[0] = 2.0;
        inst.prm.values[2][0] = 1.0;
        let report = validate_instance(&inst);
        assert!(report.iter().any(|v| v.to_string().contains("prm≠r* at level H")));
    }

    #[test]
    fn substochastic_row_is_reported() {
        let mut inst = two_path();
        inst.chain.kernels[0][0][0].1 = 0.4;
        let report = validate_instance(&inst);
        assert!(report.iter().any(|v| v.to_string().contains("row not stochastic")));
    }

    #[test]
    fn negative_probability_fails_to_load() {
        let mut inst = two_path();
        inst.chain.kernels[0][0] = vec![(0, 1.5), (1, -0.5)];
        let text = serde_json::to_string(&InstanceFile::from(&inst)).unwrap();
        assert!(matches!(parse_instance(&text), Err(Error::ValidationFailed(_))));
    }

    #[test]
    fn malformed_json_reports_position() {
        match parse_instance("{\n  \"name\": 3\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let inst = crate::hard::random_tree_instance(11, 3, 4);
        let back = parse_instance(&instance_to_json(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);
    }
}
