//! Synthetic instances: the two-path toy, seeded random trees, the SMC
//! lower-bound tree, the variance-blowup chain, the recursive myopic
//! construction and the kernel-switching PRM interpolation.
//!
//! Deep binary trees (`H` up to 64) are exposed as implicit [`GuidedModel`]s
//! over bit-packed prefixes; explicit instances are materialized on request
//! within the usual state budget.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::{
    build_tree_chain, tree_prefix_probs, KernelSpec, LayeredChain, ProblemInstance, ValueTable, ValueTag,
    DEFAULT_STATE_BUDGET,
};
use crate::error::{Error, Result};
use crate::model::{bits_label, GuidedModel, SimRng};
use crate::oracle::backward_induction;

/// Budget on all states of a materialized tree whose last level holds at most
/// `DEFAULT_STATE_BUDGET` states.
const TREE_TOTAL_BUDGET: u128 = 2 * DEFAULT_STATE_BUDGET;

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// `⊥ → {a, b}` uniformly, then `a → a′`, `b → b′`; `r* = (2, 1)`; PRM
/// `V̂(⊥) = V̂(a) = V̂(b) = 1`.
pub fn two_path() -> ProblemInstance {
    ProblemInstance {
        name: "two-path".into(),
        chain: LayeredChain {
            levels: vec![labels(&["⊥"]), labels(&["a", "b"]), labels(&["a′", "b′"])],
            kernels: vec![vec![vec![(0, 0.5), (1, 0.5)]], vec![vec![(0, 1.0)], vec![(1, 1.0)]]],
        },
        terminal_reward: vec![2.0, 1.0],
        prm: ValueTable::new(ValueTag::Prm, vec![vec![1.0], vec![1.0, 1.0], vec![2.0, 1.0]]),
    }
}

/// The two-path instance with `V̂ = V*` below the root (`V̂(⊥) = 1`).
pub fn two_path_exact() -> ProblemInstance {
    let mut inst = two_path();
    inst.name = "two-path-exact".into();
    inst.prm.values[1] = vec![2.0, 1.0];
    inst
}

/// Seeded random tree: softmax rows, log-normal terminal reward, and a PRM
/// equal to `V*` times independent log-normal noise (`σ = 1/2`) strictly
/// between the root and the last level.
pub fn random_tree_instance(seed: u64, alphabet: usize, horizon: usize) -> ProblemInstance {
    let chain = build_tree_chain(alphabet, horizon, &KernelSpec::Random { seed, scale: 1.0 })
        .expect("random tree within budget");
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let terminal_reward: Vec<f64> = (0..chain.level_size(horizon))
        .map(|_| (Distribution::<f64>::sample(&StandardNormal, &mut rng)).exp())
        .collect();
    let mut inst = ProblemInstance {
        name: format!("random-tree-s{seed}-a{alphabet}-h{horizon}"),
        prm: ValueTable::new(ValueTag::Prm, Vec::new()),
        terminal_reward,
        chain,
    };
    let mut values = backward_induction(&inst).values;
    for level in values.iter_mut().take(horizon).skip(1) {
        for v in level.iter_mut() {
            *v *= (0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).exp();
        }
    }
    values[0][0] = 1.0;
    inst.prm = ValueTable::new(ValueTag::Prm, values);
    inst
}

// ---------------------------------------------------------------------------
// SMC lower bound

/// Uniform binary tree with `V̂(x·1) = (1+λ)V̂(x)`, `V̂(x·0) = V̂(x)`, `V̂(⊥) = 1`
/// and `r*(x) = (1+λ)^{#1s(x)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcLowerModel {
    pub horizon: usize,
    pub lambda: f64,
}

impl SmcLowerModel {
    pub fn new(horizon: usize, lambda: f64) -> Result<Self> {
        if horizon == 0 || horizon > 64 {
            return Err(Error::InvalidSpec(format!("horizon must be in 1..=64, got {horizon}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!("lambda must be positive, got {lambda}")));
        }
        Ok(SmcLowerModel { horizon, lambda })
    }

    /// Per-coordinate target bias `(1+λ)/(2+λ)`.
    pub fn target_bias(&self) -> f64 {
        (1.0 + self.lambda) / (2.0 + self.lambda)
    }
}

impl GuidedModel for SmcLowerModel {
    type State = u64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn root(&self) -> u64 {
        0
    }

    fn for_each_child(&self, level: usize, state: u64, f: &mut dyn FnMut(u64, f64)) {
        f(state, 0.5);
        f(state | 1 << level, 0.5);
    }

    fn prm(&self, _level: usize, state: u64) -> f64 {
        (1.0 + self.lambda).powi(state.count_ones() as i32)
    }

    fn sample_child(&self, level: usize, state: u64, rng: &mut SimRng) -> u64 {
        if rng.random::<bool>() {
            state | 1 << level
        } else {
            state
        }
    }

    fn label(&self, level: usize, state: u64) -> String {
        bits_label(level, state)
    }
}

pub fn build_smc_lower(horizon: usize, lambda: f64) -> Result<ProblemInstance> {
    let model = SmcLowerModel::new(horizon, lambda)?;
    check_binary_budget(horizon)?;
    ProblemInstance::from_model(&model, format!("smc-lower-h{horizon}-l{lambda}"), TREE_TOTAL_BUDGET)
}

fn check_binary_budget(horizon: usize) -> Result<()> {
    let needed = 1u128.checked_shl(horizon as u32).unwrap_or(u128::MAX);
    if needed > DEFAULT_STATE_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "final-level tree states",
            needed,
            budget: DEFAULT_STATE_BUDGET,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Variance blowup

/// Two deterministic branches after the first step: branch 0 with mass
/// `2^{−n}`, branch 1 with the rest (`n = ⌊H/2⌋`). `r* ≡ 1`; the PRM is 1 on
/// branch 1 and rises as `2^h` to level `n` on branch 0, then falls back.
pub fn build_var_blowup(horizon: usize) -> Result<ProblemInstance> {
    if horizon < 2 {
        return Err(Error::InvalidSpec(format!("horizon must be at least 2, got {horizon}")));
    }
    let n = horizon / 2;
    let p = 0.5f64.powi(n as i32);
    let mut levels = vec![vec!["⊥".to_string()]];
    let mut kernels = vec![vec![vec![(0u32, p), (1u32, 1.0 - p)]]];
    let mut prm = vec![vec![1.0]];
    for h in 1..=horizon {
        levels.push(vec![format!("({h},0)"), format!("({h},1)")]);
        let peak = if h <= n { h } else { (2 * n).saturating_sub(h) };
        prm.push(vec![2f64.powi(peak as i32), 1.0]);
        if h < horizon {
            kernels.push(vec![vec![(0, 1.0)], vec![(1, 1.0)]]);
        }
    }
    ProblemInstance {
        name: format!("var-blowup-h{horizon}"),
        chain: LayeredChain { levels, kernels },
        terminal_reward: vec![1.0, 1.0],
        prm: ValueTable::new(ValueTag::Prm, prm),
    }
    .validated()
}

// ---------------------------------------------------------------------------
// Myopic lower-bound construction

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MyopicConstruction {
    /// `𝔥(1), …, 𝔥(N)`.
    pub schedule: Vec<usize>,
    /// `γ_1, …, γ_N`.
    pub gammas: Vec<f64>,
    /// `y*` with coordinate `k` (1-based) in bit `k − 1`.
    pub ystar: u64,
    /// Bias `γ` applied at each coordinate of `μ^{(N)}` (0-based positions).
    #[serde(skip)]
    position_gamma: Vec<f64>,
}

impl MyopicConstruction {
    /// Validate the schedule and build. `ystar = None` draws it uniformly from `rng`.
    pub fn new(schedule: Vec<usize>, gammas: Vec<f64>, ystar: Option<u64>, rng: Option<&mut SimRng>) -> Result<Self> {
        let depth = schedule.len();
        if !(1..=2).contains(&depth) {
            return Err(Error::ScheduleInvalid(format!(
                "recursion depth must be 1 or 2, got {depth}"
            )));
        }
        if gammas.len() != depth {
            return Err(Error::ScheduleInvalid(format!(
                "{} gammas for recursion depth {depth}",
                gammas.len()
            )));
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 0.5)) {
            return Err(Error::ScheduleInvalid(format!("gamma {g} outside (0, 1/2)")));
        }
        if schedule[0] < 3 {
            return Err(Error::ScheduleInvalid("the base horizon must be at least 3".into()));
        }
        for n in 1..depth {
            let k = schedule[n - 1] + 2;
            if schedule[n] == 0 || !schedule[n].is_multiple_of(k) {
                return Err(Error::ScheduleInvalid(format!(
                    "horizon {} is not a multiple of {k}",
                    schedule[n]
                )));
            }
        }
        let horizon = schedule[depth - 1];
        if horizon > 64 {
            return Err(Error::BudgetExceeded {
                what: "myopic horizon (bit-packed prefixes)",
                needed: horizon as u128,
                budget: 64,
            });
        }
        let mask = if horizon == 64 { u64::MAX } else { (1u64 << horizon) - 1 };
        let ystar = match (ystar, rng) {
            (Some(y), _) => {
                if y & !mask != 0 {
                    return Err(Error::ScheduleInvalid("y* has bits beyond the horizon".into()));
                }
                y
            }
            (None, Some(r)) => r.random::<u64>() & mask,
            (None, None) => return Err(Error::ScheduleInvalid("y* or a generator is required".into())),
        };
        let mut position_gamma = vec![0.0; horizon];
        fill_gammas(&schedule, &gammas, depth, 0, &mut position_gamma);
        Ok(MyopicConstruction {
            schedule,
            gammas,
            ystar,
            position_gamma,
        })
    }

    pub fn depth(&self) -> usize {
        self.schedule.len()
    }

    pub fn horizon(&self) -> usize {
        self.schedule[self.depth() - 1]
    }

    fn factor(&self, pos: usize, y: u64) -> f64 {
        let g = self.position_gamma[pos];
        if (y >> pos & 1) == (self.ystar >> pos & 1) {
            0.5 + g
        } else {
            0.5 - g
        }
    }

    /// `μ(y_{off+1 : off+len})` relative to the preceding coordinates (a product measure).
    fn mu_range(&self, y: u64, off: usize, len: usize) -> f64 {
        (off..off + len).map(|p| self.factor(p, y)).product()
    }

    /// `μ^{(N)}(y_{1:h})`.
    pub fn mu(&self, y: u64, h: usize) -> f64 {
        self.mu_range(y, 0, h)
    }

    /// `μ̂^{(N)}(y_{1:h})`.
    pub fn mu_hat(&self, y: u64, h: usize) -> f64 {
        self.mu_hat_rel(self.depth(), 0, h, y)
    }

    /// Prefix mass of the level-`n` construction occupying coordinates
    /// `off+1 ..` evaluated on its first `h` coordinates.
    fn mu_hat_rel(&self, n: usize, off: usize, h: usize, y: u64) -> f64 {
        let len = self.schedule[n - 1];
        if h == 0 {
            return 1.0;
        }
        if n == 1 {
            return if h < len {
                0.5 * self.mu_range(y, off, h - 1)
            } else {
                self.mu_range(y, off, len)
            };
        }
        let k = self.schedule[n - 2] + 2;
        let (i, rem) = (h / k, h % k);
        if rem == 0 {
            return self.mu_range(y, off, h);
        }
        self.mu_range(y, off, i * k) * 0.5 * self.mu_hat_rel(n - 1, off + i * k + 1, rem - 1, y)
    }

    /// Membership of a full output in `F_N(y*)`.
    pub fn failure_event(&self, output: u64) -> bool {
        self.in_event(self.depth(), 0, output)
    }

    fn agrees(&self, pos: usize, o: u64) -> bool {
        (o >> pos & 1) == (self.ystar >> pos & 1)
    }

    fn in_event(&self, n: usize, off: usize, o: u64) -> bool {
        let len = self.schedule[n - 1];
        if n == 1 {
            // Coordinates 1 < h < H, i.e. 0-based positions 1..len-1.
            let hits = (1..len - 1).filter(|&p| self.agrees(off + p, o)).count();
            return hits as f64 >= (0.5 + self.gammas[0] / 2.0) * (len - 2) as f64;
        }
        let k = self.schedule[n - 2] + 2;
        let blocks = len / k;
        let inner_ok = (0..blocks).all(|i| self.in_event(n - 1, off + i * k + 1, o));
        let leaders = (0..blocks).filter(|&i| self.agrees(off + i * k, o)).count();
        inner_ok && leaders as f64 / blocks as f64 >= 0.5 + self.gammas[n - 1] / 2.0
    }

    /// Draw an output from `μ^{(N)}` (a product measure).
    pub fn sample_mu(&self, rng: &mut SimRng) -> u64 {
        let mut y = 0u64;
        for p in 0..self.horizon() {
            let agree = rng.random::<f64>() < 0.5 + self.position_gamma[p];
            let bit = if agree {
                self.ystar >> p & 1
            } else {
                1 - (self.ystar >> p & 1)
            };
            y |= bit << p;
        }
        y
    }

    pub fn model(&self) -> MyopicModel<'_> {
        MyopicModel { c: self }
    }

    /// Explicit instance; needs `2^H` within the state budget.
    pub fn instance(&self) -> Result<ProblemInstance> {
        check_binary_budget(self.horizon())?;
        ProblemInstance::from_model(
            &self.model(),
            format!("myopic-n{}-h{}", self.depth(), self.horizon()),
            TREE_TOTAL_BUDGET,
        )
    }
}

fn fill_gammas(schedule: &[usize], gammas: &[f64], n: usize, off: usize, out: &mut [f64]) {
    let len = schedule[n - 1];
    if n == 1 {
        out[off..off + len].fill(gammas[0]);
        return;
    }
    let k = schedule[n - 2] + 2;
    for i in 0..len / k {
        out[off + i * k] = gammas[n - 1];
        out[off + (i + 1) * k - 1] = gammas[n - 1];
        fill_gammas(schedule, gammas, n - 1, off + i * k + 1, out);
    }
}

/// Uniform binary tree with `V̂ = μ̂·2^h` and `r* = μ·2^H`.
pub struct MyopicModel<'a> {
    c: &'a MyopicConstruction,
}

impl GuidedModel for MyopicModel<'_> {
    type State = u64;

    fn horizon(&self) -> usize {
        self.c.horizon()
    }

    fn root(&self) -> u64 {
        0
    }

    fn for_each_child(&self, level: usize, state: u64, f: &mut dyn FnMut(u64, f64)) {
        f(state, 0.5);
        f(state | 1 << level, 0.5);
    }

    fn prm(&self, level: usize, state: u64) -> f64 {
        self.c.mu_hat(state, level) * 2f64.powi(level as i32)
    }

    fn sample_child(&self, level: usize, state: u64, rng: &mut SimRng) -> u64 {
        if rng.random::<bool>() {
            state | 1 << level
        } else {
            state
        }
    }

    fn label(&self, level: usize, state: u64) -> String {
        bits_label(level, state)
    }
}

// ---------------------------------------------------------------------------
// Kernel switching

/// Tree instance with `π_ref` from `base`, target `π*` from `target`, and
/// `V̂(a_{1:h}) = (π*/π_ref)(a_{1:h}) · (π^{(i)}/π*)(a_{1:h})^{(1−h/H)α}` where
/// `π^{(i)}` comes from `perturbation`. `α = 0` gives `V̂ = V*`.
pub fn build_kernel_switch(
    base: &KernelSpec,
    target: &KernelSpec,
    perturbation: &KernelSpec,
    alpha: f64,
    horizon: usize,
    alphabet: usize,
) -> Result<ProblemInstance> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidSpec(format!("alpha must be nonnegative, got {alpha}")));
    }
    let chain = build_tree_chain(alphabet, horizon, base)?;
    let reference = tree_prefix_probs(&chain);
    let star = tree_prefix_probs(&build_tree_chain(alphabet, horizon, target)?);
    let pert = tree_prefix_probs(&build_tree_chain(alphabet, horizon, perturbation)?);
    let mut values = Vec::with_capacity(horizon + 1);
    for h in 0..=horizon {
        let expo = (1.0 - h as f64 / horizon as f64) * alpha;
        let mut level = Vec::with_capacity(reference[h].len());
        for i in 0..reference[h].len() {
            let (r, s, q) = (reference[h][i], star[h][i], pert[h][i]);
            if s > 0.0 && r <= 0.0 {
                return Err(Error::SupportMismatch(format!(
                    "reference has zero mass where the target is positive (level {h}, prefix {i})"
                )));
            }
            if s > 0.0 && q <= 0.0 && expo > 0.0 {
                return Err(Error::SupportMismatch(format!(
                    "perturbation has zero mass where the target is positive (level {h}, prefix {i})"
                )));
            }
            let v = if s > 0.0 {
                s / r * if expo > 0.0 { (q / s).powf(expo) } else { 1.0 }
            } else {
                0.0
            };
            level.push(v);
        }
        values.push(level);
    }
    values[0][0] = 1.0;
    let terminal_reward = values[horizon].clone();
    ProblemInstance {
        name: format!("kernel-switch-h{horizon}-a{alphabet}-alpha{alpha}"),
        chain,
        terminal_reward,
        prm: ValueTable::new(ValueTag::Prm, values),
    }
    .validated()
}

/// Rows of `target` tilted by `exp(scale · z)` with i.i.d. standard normal
/// `z` per prefix and symbol, drawn from streams of `seed`.
pub fn perturbed_rows(
    target: &KernelSpec,
    seed: u64,
    scale: f64,
    alphabet: usize,
    horizon: usize,
) -> Result<KernelSpec> {
    let noise = KernelSpec::Random { seed, scale };
    let mut rows = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let n = alphabet.pow(h as u32);
        let mut level = Vec::with_capacity(n);
        for i in 0..n {
            let p = target.row(alphabet, h, i)?;
            let z = noise.row(alphabet, h, i)?;
            let w: Vec<f64> = p.iter().zip(&z).map(|(a, b)| a * b).collect();
            let s: f64 = crate::numeric::ksum(&w);
            level.push(w.into_iter().map(|x| x / s).collect());
        }
        rows.push(level);
    }
    Ok(KernelSpec::Rows(rows))
}

/// The kernel-switching task used in the demos: independent random base and
/// target rows (softmax scale 1) and a perturbation of the target of size
/// `perturbation_scale`, all derived from `seed`.
pub fn kernel_switch_demo(seed: u64, horizon: usize, alpha: f64, perturbation_scale: f64) -> Result<ProblemInstance> {
    let target = KernelSpec::Random {
        seed: seed.wrapping_mul(3).wrapping_add(1),
        scale: 1.0,
    };
    let mut inst = kernel_switch_with_target(seed, horizon, alpha, perturbation_scale, target)?;
    inst.name = format!("kswitch-s{seed}-h{horizon}-alpha{alpha}-p{perturbation_scale}");
    Ok(inst)
}

/// Like [`kernel_switch_demo`] but with the target equal to the base rows
/// tilted by noise of size `target_shift`, so `π*` stays close to `π_ref`.
pub fn kernel_switch_local(
    seed: u64,
    horizon: usize,
    alpha: f64,
    target_shift: f64,
    perturbation_scale: f64,
) -> Result<ProblemInstance> {
    let base = KernelSpec::Random {
        seed: seed.wrapping_mul(3),
        scale: 1.0,
    };
    let target = perturbed_rows(&base, seed.wrapping_mul(3).wrapping_add(1), target_shift, 2, horizon)?;
    let mut inst = kernel_switch_with_target(seed, horizon, alpha, perturbation_scale, target)?;
    inst.name = format!("kswitch-local-s{seed}-h{horizon}-alpha{alpha}-t{target_shift}-p{perturbation_scale}");
    Ok(inst)
}

fn kernel_switch_with_target(
    seed: u64,
    horizon: usize,
    alpha: f64,
    perturbation_scale: f64,
    target: KernelSpec,
) -> Result<ProblemInstance> {
    let base = KernelSpec::Random {
        seed: seed.wrapping_mul(3),
        scale: 1.0,
    };
    let pert = perturbed_rows(
        &target,
        seed.wrapping_mul(3).wrapping_add(2),
        perturbation_scale,
        2,
        horizon,
    )?;
    build_kernel_switch(&base, &target, &pert, alpha, horizon, 2)
}
