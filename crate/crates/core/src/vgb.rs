//! The value-guided backtracking walk on a tree-structured chain, the
//! trajectory-to-forest parser, and the forest type shared with SMC-IND.
//!
//! The walk lives on the tree plus an auxiliary state `𝔰` whose only
//! neighbour is `⊥`. From an internal node `x` it moves to child `c` with
//! probability `π_ref(c|x)V̂(c) / (V̂(x) + Ṽ(x))` and to its parent with
//! probability `V̂(x) / (V̂(x) + Ṽ(x))`; leaves always move up.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::chain::ProblemInstance;
use crate::error::{Error, Result};
use crate::model::{sample_weighted, SimRng};
use crate::numeric::KahanSum;

/// Default cap on walk length.
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VgbState {
    Aux,
    Node { level: usize, state: u32 },
}

/// A validated tree view of an instance: every non-root state has exactly one parent.
pub struct TreeView<'a> {
    pub inst: &'a ProblemInstance,
    parents: Vec<Vec<u32>>,
}

impl<'a> TreeView<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Result<Self> {
        let chain = &inst.chain;
        let mut parents = vec![Vec::new()];
        for h in 0..chain.horizon() {
            let mut level = vec![u32::MAX; chain.level_size(h + 1)];
            for (i, row) in chain.kernels[h].iter().enumerate() {
                for &(j, p) in row {
                    if p <= 0.0 {
                        continue;
                    }
                    let slot = &mut level[j as usize];
                    if *slot != u32::MAX && *slot != i as u32 {
                        return Err(Error::NotATree {
                            level: h + 1,
                            state: j as usize,
                        });
                    }
                    *slot = i as u32;
                }
            }
            parents.push(level);
        }
        Ok(TreeView { inst, parents })
    }

    pub fn horizon(&self) -> usize {
        self.inst.horizon()
    }

    pub fn parent(&self, s: VgbState) -> Option<VgbState> {
        match s {
            VgbState::Aux => None,
            VgbState::Node { level: 0, .. } => Some(VgbState::Aux),
            VgbState::Node { level, state } => Some(VgbState::Node {
                level: level - 1,
                state: self.parents[level][state as usize],
            }),
        }
    }

    /// Child masses `π_ref(c|x)V̂(c)` into `row`; returns their total `Ṽ(x)`.
    fn child_masses(&self, level: usize, state: u32, row: &mut Vec<(u32, f64)>) -> f64 {
        row.clear();
        let mut total = KahanSum::new();
        for &(j, p) in &self.inst.chain.kernels[level][state as usize] {
            let m = p * self.inst.prm.at(level + 1, j as usize);
            total.add(m);
            row.push((j, m));
        }
        total.value()
    }

    /// One walk decision at a node: `None` moves up, `Some(c)` moves down to `c`.
    /// Leaves move up without consuming randomness.
    pub(crate) fn decide(&self, level: usize, state: u32, row: &mut Vec<(u32, f64)>, rng: &mut SimRng) -> Option<u32> {
        if level == self.horizon() {
            return None;
        }
        let down = self.child_masses(level, state, row);
        let up = self.inst.prm.at(level, state as usize);
        let u: f64 = rng.random();
        if u * (up + down) < up || !(down > 0.0) {
            None
        } else {
            Some(sample_weighted(row, down, rng))
        }
    }
}

/// Transition row of the walk at `state`.
pub fn vgb_step_distribution(tree: &TreeView, state: VgbState) -> Vec<(VgbState, f64)> {
    match state {
        VgbState::Aux => vec![(VgbState::Node { level: 0, state: 0 }, 1.0)],
        VgbState::Node { level, state: x } => {
            let parent = tree.parent(state).expect("nodes have parents");
            if level == tree.horizon() {
                return vec![(parent, 1.0)];
            }
            let mut row = Vec::new();
            let down = tree.child_masses(level, x, &mut row);
            let up = tree.inst.prm.at(level, x as usize);
            let denom = up + down;
            let mut out: Vec<(VgbState, f64)> = row
                .iter()
                .map(|&(c, m)| {
                    (
                        VgbState::Node {
                            level: level + 1,
                            state: c,
                        },
                        m / denom,
                    )
                })
                .collect();
            out.push((parent, up / denom));
            out
        }
    }
}

/// Probability of moving up from `(level, state)`.
pub fn p_up(tree: &TreeView, level: usize, state: u32) -> f64 {
    if level == tree.horizon() {
        return 1.0;
    }
    let mut row = Vec::new();
    let down = tree.child_masses(level, state, &mut row);
    let up = tree.inst.prm.at(level, state as usize);
    up / (up + down)
}

/// The walk's row conditioned on moving down: `∝ π_ref(c|x)V̂(c)`.
pub fn p_down(tree: &TreeView, level: usize, state: u32) -> Vec<(u32, f64)> {
    let mut row = Vec::new();
    let down = tree.child_masses(level, state, &mut row);
    row.into_iter().map(|(c, m)| (c, m / down)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForestNode {
    pub level: usize,
    pub state: u32,
    pub parent: Option<u32>,
    /// Time interval `[t, t′]` for nodes parsed from a walk.
    pub interval: Option<(usize, usize)>,
}

/// Labeled rooted forest. Roots are the level-0 nodes (children of `𝔰`);
/// siblings are ordered by node index (birth order).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ParticleForest {
    pub nodes: Vec<ForestNode>,
    pub roots: Vec<u32>,
}

impl ParticleForest {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, level: usize, state: u32, parent: Option<u32>, start: Option<usize>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(ForestNode {
            level,
            state,
            parent,
            interval: start.map(|t| (t, usize::MAX)),
        });
        if parent.is_none() {
            self.roots.push(id);
        }
        id
    }

    /// Census `level → state → count`.
    pub fn state_counts(&self) -> BTreeMap<usize, BTreeMap<u32, u64>> {
        let mut out: BTreeMap<usize, BTreeMap<u32, u64>> = BTreeMap::new();
        for n in &self.nodes {
            *out.entry(n.level).or_default().entry(n.state).or_default() += 1;
        }
        out
    }

    /// Children of each node in birth order.
    pub fn children(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                out[p as usize].push(i as u32);
            }
        }
        out
    }

    /// Every node as `(address, level, state)` sorted by address, where the
    /// address lists sibling ordinals from the root. Two forests are the same
    /// ordered labeled forest iff their canonical forms are equal.
    pub fn canonical(&self) -> Vec<(Vec<u32>, usize, u32)> {
        let children = self.children();
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<(u32, Vec<u32>)> = self
            .roots
            .iter()
            .enumerate()
            .map(|(k, &r)| (r, vec![k as u32]))
            .collect();
        while let Some((id, addr)) = stack.pop() {
            let n = &self.nodes[id as usize];
            for (k, &c) in children[id as usize].iter().enumerate() {
                let mut a = addr.clone();
                a.push(k as u32);
                stack.push((c, a));
            }
            out.push((addr, n.level, n.state));
        }
        out.sort();
        out
    }
}

/// Census by level with display labels.
pub fn forest_label_counts(forest: &ParticleForest, inst: &ProblemInstance) -> BTreeMap<usize, BTreeMap<String, u64>> {
    forest
        .state_counts()
        .into_iter()
        .map(|(h, m)| {
            let labels = m
                .into_iter()
                .map(|(s, c)| (inst.chain.levels[h][s as usize].clone(), c))
                .collect();
            (h, labels)
        })
        .collect()
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Private random stream of the forest node at `address` (sibling ordinals from the root).
pub fn address_rng(seed: u64, address: &[u32]) -> SimRng {
    let mut h = splitmix64(seed);
    for &c in address {
        h = splitmix64(h ^ splitmix64(u64::from(c) + 1));
    }
    h = splitmix64(h ^ address.len() as u64);
    SimRng::seed_from_u64(h)
}

#[derive(Clone, Debug)]
pub struct VgbWalk {
    pub forest: ParticleForest,
    pub trajectory: Vec<VgbState>,
    pub steps: usize,
    pub capped: bool,
}

struct Frame {
    node: u32,
    level: usize,
    state: u32,
    children: u32,
    rng: Option<(SimRng, Vec<u32>)>,
}

/// Simulate the walk from `𝔰` until its `(K+1)`-th visit to `𝔰` or until
/// `step_cap` moves, building the forest online.
///
/// With `coupled = Some(seed)` every node draws its decisions from
/// [`address_rng`]; otherwise all draws come from `rng`.
fn walk(
    tree: &TreeView,
    k: usize,
    rng: &mut SimRng,
    coupled: Option<u64>,
    step_cap: usize,
    keep_trajectory: bool,
) -> VgbWalk {
    let mut forest = ParticleForest::default();
    let mut trajectory = Vec::new();
    if keep_trajectory {
        trajectory.push(VgbState::Aux);
    }
    let mut stack: Vec<Frame> = Vec::new();
    let mut row = Vec::new();
    let mut visits = 1;
    let mut t = 0;
    let mut capped = false;
    loop {
        if stack.is_empty() && visits == k + 1 {
            break;
        }
        if t >= step_cap {
            capped = true;
            break;
        }
        t += 1;
        let Some(top) = stack.last_mut() else {
            let ordinal = forest.roots.len() as u32;
            let node = forest.push(0, 0, None, Some(t));
            let rng = coupled.map(|s| (address_rng(s, &[ordinal]), vec![ordinal]));
            stack.push(Frame {
                node,
                level: 0,
                state: 0,
                children: 0,
                rng,
            });
            if keep_trajectory {
                trajectory.push(VgbState::Node { level: 0, state: 0 });
            }
            continue;
        };
        let decision = match top.rng.as_mut() {
            Some((r, _)) => tree.decide(top.level, top.state, &mut row, r),
            None => tree.decide(top.level, top.state, &mut row, rng),
        };
        match decision {
            Some(c) => {
                let level = top.level + 1;
                let ordinal = top.children;
                top.children += 1;
                let child_rng = top.rng.as_ref().map(|(_, addr)| {
                    let mut a = addr.clone();
                    a.push(ordinal);
                    (address_rng(coupled.unwrap_or(0), &a), a)
                });
                let node = forest.push(level, c, Some(top.node), Some(t));
                stack.push(Frame {
                    node,
                    level,
                    state: c,
                    children: 0,
                    rng: child_rng,
                });
                if keep_trajectory {
                    trajectory.push(VgbState::Node { level, state: c });
                }
            }
            None => {
                let done = stack.pop().expect("non-empty stack");
                if let Some(iv) = forest.nodes[done.node as usize].interval.as_mut() {
                    iv.1 = t - 1;
                }
                match stack.last() {
                    Some(p) => {
                        if keep_trajectory {
                            trajectory.push(VgbState::Node {
                                level: p.level,
                                state: p.state,
                            });
                        }
                    }
                    None => {
                        visits += 1;
                        if keep_trajectory {
                            trajectory.push(VgbState::Aux);
                        }
                    }
                }
            }
        }
    }
    VgbWalk {
        forest,
        trajectory,
        steps: t,
        capped,
    }
}

/// Run the walk with shared randomness and return its forest.
pub fn vgb_walk_forest(tree: &TreeView, k: usize, rng: &mut SimRng, step_cap: usize) -> VgbWalk {
    walk(tree, k, rng, None, step_cap, false)
}

/// Same walk, also keeping the full trajectory.
pub fn vgb_walk_trajectory(tree: &TreeView, k: usize, rng: &mut SimRng, step_cap: usize) -> VgbWalk {
    walk(tree, k, rng, None, step_cap, true)
}

/// The walk under the address-keyed coupling with SMC-IND.
pub fn vgb_walk_coupled(tree: &TreeView, k: usize, seed: u64, step_cap: usize) -> VgbWalk {
    let mut unused = SimRng::seed_from_u64(0);
    walk(tree, k, &mut unused, Some(seed), step_cap, false)
}

/// Parse a trajectory starting at `𝔰` into its forest, stopping before the
/// `(K+1)`-th visit to `𝔰`. Each node is the maximal interval spent in the
/// subtree below one down-move; its parent is the state on both sides.
pub fn parse_trajectory(tree: &TreeView, trajectory: &[VgbState], k: usize) -> Result<ParticleForest> {
    let bad = |t: usize, why: &str| Error::InvalidSpec(format!("trajectory step {t}: {why}"));
    if trajectory.first() != Some(&VgbState::Aux) {
        return Err(bad(0, "must start at the auxiliary state"));
    }
    let mut forest = ParticleForest::default();
    let mut stack: Vec<(u32, VgbState)> = Vec::new();
    let mut visits = 1;
    for (t, &s) in trajectory.iter().enumerate().skip(1) {
        if stack.is_empty() && visits == k + 1 {
            break;
        }
        let current = stack.last().map_or(VgbState::Aux, |f| f.1);
        let is_child = match (current, s) {
            (VgbState::Aux, VgbState::Node { level: 0, .. }) => true,
            (VgbState::Node { level: a, .. }, VgbState::Node { level: b, .. }) if b == a + 1 => {
                tree.parent(s) == Some(current)
            }
            _ => false,
        };
        if is_child {
            let VgbState::Node { level, state } = s else {
                unreachable!()
            };
            let parent = stack.last().map(|f| f.0);
            let id = forest.push(level, state, parent, Some(t));
            stack.push((id, s));
        } else if tree.parent(current) == Some(s) {
            let (id, _) = stack
                .pop()
                .ok_or_else(|| bad(t, "cannot move up from the auxiliary state"))?;
            if let Some(iv) = forest.nodes[id as usize].interval.as_mut() {
                iv.1 = t - 1;
            }
            if s == VgbState::Aux {
                visits += 1;
            }
        } else {
            return Err(bad(t, "not a neighbour of the previous state"));
        }
    }
    Ok(forest)
}
