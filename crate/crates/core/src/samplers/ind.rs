use crate::error::{Error, Result};
use crate::model::SimRng;
use crate::vgb::{address_rng, ParticleForest, TreeView};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndConfig {
    pub particles: usize,
    /// Maximum number of forest nodes before the run is abandoned.
    pub node_cap: usize,
}

impl IndConfig {
    pub fn new(particles: usize) -> Self {
        IndConfig {
            particles,
            node_cap: 1_000_000,
        }
    }
}

/// SMC with independent offspring, level by level.
///
/// Each particle keeps drawing: up with the walk's up-probability (stop), or
/// else one more child from the down-conditioned row. Its child count is thus
/// geometric on `{0, 1, …}` with success probability `P_up`, and the children
/// are i.i.d. from `P_down`. Leaves have `P_up = 1`.
pub fn smc_ind_run(tree: &TreeView, cfg: &IndConfig, rng: &mut SimRng) -> Result<ParticleForest> {
    grow(tree, cfg, |_| None, rng)
}

/// The same process where node `a` (sibling-ordinal address) uses
/// `address_rng(seed, a)`, so it reproduces the coupled walk's forest exactly.
pub fn smc_ind_run_coupled(tree: &TreeView, cfg: &IndConfig, seed: u64) -> Result<ParticleForest> {
    let mut unused = <SimRng as rand::SeedableRng>::seed_from_u64(0);
    grow(tree, cfg, |addr| Some(address_rng(seed, addr)), &mut unused)
}

fn grow(
    tree: &TreeView,
    cfg: &IndConfig,
    node_rng: impl Fn(&[u32]) -> Option<SimRng>,
    shared: &mut SimRng,
) -> Result<ParticleForest> {
    let mut forest = ParticleForest::default();
    let mut addresses: Vec<Vec<u32>> = Vec::new();
    let mut frontier: Vec<u32> = Vec::with_capacity(cfg.particles);
    for i in 0..cfg.particles {
        frontier.push(forest.push(0, 0, None, None));
        addresses.push(vec![i as u32]);
    }
    let mut row = Vec::new();
    let mut next = Vec::new();
    for _ in 0..tree.horizon() {
        next.clear();
        for &id in &frontier {
            let (level, state) = {
                let n = &forest.nodes[id as usize];
                (n.level, n.state)
            };
            let mut own = node_rng(&addresses[id as usize]);
            let mut ordinal = 0u32;
            loop {
                let decision = match own.as_mut() {
                    Some(r) => tree.decide(level, state, &mut row, r),
                    None => tree.decide(level, state, &mut row, shared),
                };
                let Some(c) = decision else { break };
                if forest.len() >= cfg.node_cap {
                    return Err(Error::BudgetExceeded {
                        what: "independent-offspring particles",
                        needed: forest.len() as u128 + 1,
                        budget: cfg.node_cap as u128,
                    });
                }
                let child = forest.push(level + 1, c, Some(id), None);
                let mut a = addresses[id as usize].clone();
                a.push(ordinal);
                addresses.push(a);
                ordinal += 1;
                next.push(child);
            }
        }
        std::mem::swap(&mut frontier, &mut next);
    }
    Ok(forest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_tree_chain, KernelSpec, ProblemInstance, ValueTable, ValueTag};
    use crate::hard::random_tree_instance;
    use crate::model::trial_rng;
    use crate::vgb::{vgb_walk_coupled, DEFAULT_STEP_CAP};

    fn uniform_flat(h: usize) -> ProblemInstance {
        let chain = build_tree_chain(2, h, &KernelSpec::Uniform).unwrap();
        let values = chain.levels.iter().map(|l| vec![1.0; l.len()]).collect();
        ProblemInstance {
            name: "flat".into(),
            terminal_reward: vec![1.0; chain.level_size(h)],
            chain,
            prm: ValueTable::new(ValueTag::Prm, values),
        }
    }

    #[test]
    fn level_zero_has_n_roots_and_leaves_are_childless() {
        let inst = random_tree_instance(1, 2, 3);
        let tree = TreeView::new(&inst).unwrap();
        let f = smc_ind_run(&tree, &IndConfig::new(3), &mut trial_rng(0, 0)).unwrap();
        assert_eq!(f.state_counts()[&0].values().sum::<u64>(), 3);
        let children = f.children();
        for (i, n) in f.nodes.iter().enumerate() {
            if n.level == 3 {
                assert!(children[i].is_empty());
            }
        }
    }

    #[test]
    fn zero_particles_give_empty_forest() {
        let inst = random_tree_instance(1, 2, 3);
        let tree = TreeView::new(&inst).unwrap();
        assert!(smc_ind_run(&tree, &IndConfig::new(0), &mut trial_rng(0, 0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn flat_tree_mean_offspring_is_one() {
        let inst = uniform_flat(2);
        let tree = TreeView::new(&inst).unwrap();
        let trials = 20_000;
        let mut level1 = Vec::with_capacity(trials);
        for t in 0..trials as u64 {
            let f = smc_ind_run(&tree, &IndConfig::new(1), &mut trial_rng(11, t)).unwrap();
            level1.push(f.nodes.iter().filter(|n| n.level == 1).count() as f64);
        }
        let mean = level1.iter().sum::<f64>() / trials as f64;
        // Up-probability 1/(1+1) = 1/2: geometric mean 1, variance (1-p)/p² = 2.
        let se = (2.0 / trials as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn coupled_forests_are_equal() {
        let inst = random_tree_instance(2, 2, 3);
        let tree = TreeView::new(&inst).unwrap();
        for seed in 0..100 {
            let a = smc_ind_run_coupled(&tree, &IndConfig::new(3), seed).unwrap();
            let b = vgb_walk_coupled(&tree, 3, seed, DEFAULT_STEP_CAP);
            assert!(!b.capped);
            assert_eq!(a.canonical(), b.forest.canonical());
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let inst = uniform_flat(6);
        let tree = TreeView::new(&inst).unwrap();
        let cfg = IndConfig {
            particles: 50,
            node_cap: 60,
        };
        let mut hit = false;
        for t in 0..20 {
            if let Err(Error::BudgetExceeded { .. }) = smc_ind_run(&tree, &cfg, &mut trial_rng(1, t)) {
                hit = true;
            }
        }
        assert!(hit);
    }
}
