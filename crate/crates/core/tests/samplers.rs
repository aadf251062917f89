use guided_pf::experiment::{campaign, couple_report, run_report, sweep_report, Algorithm, CampaignConfig};
use guided_pf::hard::{kernel_switch_demo, random_tree_instance, two_path, two_path_exact, SmcLowerModel};
use guided_pf::stats::{gof_chi_square_maps, p_n_oracle};
use guided_pf::vgb::DEFAULT_STEP_CAP;
use guided_pf::{Oracle, ProblemInstance, SamplerConfig};

fn config(algo: Algorithm, particles: usize, trials: u64, seed: u64) -> CampaignConfig {
    CampaignConfig {
        algo,
        sampler: SamplerConfig::with_particles(particles),
        trials,
        seed,
        workers: 2,
    }
}

fn label_share(report: &guided_pf::experiment::RunReport, label: &str) -> f64 {
    let total: u64 = report.counts.values().sum();
    *report.counts.get(label).unwrap_or(&0) as f64 / total as f64
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Per-coordinate frequency of ones over all outputs of a 32-bit campaign.
fn coordinate_ones(model: &SmcLowerModel, cfg: &CampaignConfig) -> (Vec<f64>, u64) {
    let stats = campaign(model, |s| s, cfg, "lower").unwrap();
    let done = stats.finals.completed();
    let mut ones = vec![0u64; 32];
    for (state, count) in &stats.finals.counts {
        for (bit, slot) in ones.iter_mut().enumerate() {
            if state >> bit & 1 == 1 {
                *slot += count;
            }
        }
    }
    (ones.iter().map(|k| *k as f64 / done as f64).collect(), done)
}

#[test]
fn single_particle_smc_is_one_sixth_from_target() {
    let inst = two_path();
    let oracle = Oracle::new(&inst).unwrap();
    let r = run_report(&inst, &oracle, &config(Algorithm::Smc, 1, 100_000, 11)).unwrap();
    assert!((r.tv_to_pistar - 1.0 / 6.0).abs() <= 3.0 * r.tv_halfwidth, "{r:?}");
}

#[test]
fn best_of_two_picks_the_high_branch_three_quarters_of_the_time() {
    let inst = two_path();
    let oracle = Oracle::new(&inst).unwrap();
    let r = run_report(&inst, &oracle, &config(Algorithm::Bon, 2, 100_000, 12)).unwrap();
    let p = label_share(&r, "a′");
    assert!((p - 0.75).abs() <= 3.0 * binomial_se(0.75, 100_000), "P(a′) = {p}");
}

#[test]
fn many_particles_approach_the_target() {
    let inst = two_path();
    let oracle = Oracle::new(&inst).unwrap();
    let trials = 20_000;
    let r = run_report(&inst, &oracle, &config(Algorithm::Smc, 1000, trials, 13)).unwrap();
    let p = label_share(&r, "a′");
    assert!(
        (p - 2.0 / 3.0).abs() <= 3.0 * binomial_se(2.0 / 3.0, trials),
        "P(a′) = {p}"
    );
    assert!(r.tv_to_pistar <= 0.02);
}

#[test]
fn smc_on_the_lower_bound_tree_matches_p_n() {
    let model = SmcLowerModel::new(32, 1.0).unwrap();
    let (freq, done) = coordinate_ones(&model, &config(Algorithm::Smc, 4, 5_000, 14));
    let p4 = p_n_oracle(4, 1.0);
    let se = binomial_se(p4, done);
    for (k, f) in freq.iter().enumerate() {
        assert!((f - p4).abs() <= 3.0 * se, "coordinate {k}: {f} vs {p4}");
    }
}

#[test]
fn rejection_smc_is_exact_on_the_lower_bound_tree() {
    let model = SmcLowerModel::new(32, 1.0).unwrap();
    let mut cfg = config(Algorithm::SmcRs, 1, 5_000, 15);
    cfg.sampler.eta = 2.0;
    let (freq, done) = coordinate_ones(&model, &cfg);
    let se = binomial_se(2.0 / 3.0, done);
    for (k, f) in freq.iter().enumerate() {
        assert!((f - 2.0 / 3.0).abs() <= 3.0 * se, "coordinate {k}: {f}");
    }
}

fn final_counts(inst: &ProblemInstance, cfg: &CampaignConfig) -> guided_pf::experiment::CampaignStats {
    campaign(inst, u64::from, cfg, "c").unwrap()
}

#[test]
fn doubling_eta_keeps_the_law_and_doubles_attempts() {
    let inst = random_tree_instance(21, 2, 4);
    let oracle = Oracle::new(&inst).unwrap();
    let eta = oracle.coverage_constants(&[]).c_act_hat;
    let mut a = config(Algorithm::SmcRs, 4, 20_000, 16);
    a.sampler.eta = eta;
    let mut b = a.clone();
    b.sampler.eta = 2.0 * eta;
    b.seed = 17;
    let (sa, sb) = (final_counts(&inst, &a), final_counts(&inst, &b));
    let gof = gof_chi_square_maps(&sa.finals.counts, &sb.finals.counts).unwrap();
    assert!(gof.p_value > 0.01, "{gof:?}");
    let ratio = sb.attempts as f64 / sa.attempts as f64;
    assert!((1.8..=2.2).contains(&ratio), "attempt ratio {ratio}");
}

#[test]
fn action_level_and_single_particle_rejection_agree() {
    let inst = random_tree_instance(22, 2, 4);
    let oracle = Oracle::new(&inst).unwrap();
    let eta = oracle.coverage_constants(&[]).c_act_hat;
    for seed in 0..20 {
        let action = config(Algorithm::ActionRs, 1, 4_000, 100 + seed);
        let mut rs = config(Algorithm::SmcRs, 1, 4_000, 200 + seed);
        rs.sampler.eta = eta;
        let gof = gof_chi_square_maps(
            &final_counts(&inst, &action).finals.counts,
            &final_counts(&inst, &rs).finals.counts,
        )
        .unwrap();
        assert!(gof.p_value > 0.01, "seed {seed}: {gof:?}");
    }
}

#[test]
fn rejection_smc_with_exact_values_has_no_detectable_bias() {
    let inst = two_path_exact();
    let oracle = Oracle::new(&inst).unwrap();
    let mut base = config(Algorithm::SmcRs, 1, 20_000, 18);
    base.sampler.eta = oracle.coverage_constants(&[]).c_act_hat;
    let rows = sweep_report(
        &inst,
        &oracle,
        &base,
        &[Algorithm::SmcRs],
        &[1, 4, 16, 64],
        1.0,
        base.sampler.eta,
    )
    .unwrap();
    for row in rows {
        let se = binomial_se(2.0 / 3.0, row.run.trials);
        assert!(
            row.run.tv_to_pistar <= 3.0 * se,
            "N={} tv={}",
            row.run.particles,
            row.run.tv_to_pistar
        );
    }
}

#[test]
fn more_particles_help_on_the_kernel_switch_task() {
    let inst = kernel_switch_demo(23, 8, 1.0, 1.0).unwrap();
    let oracle = Oracle::new(&inst).unwrap();
    let base = config(Algorithm::Smc, 2, 10_000, 19);
    let rows = sweep_report(&inst, &oracle, &base, &[Algorithm::Smc], &[2, 64], 1.0, 1.0).unwrap();
    let (small, large) = (&rows[0].run, &rows[1].run);
    let sep = (small.tv_halfwidth.powi(2) + large.tv_halfwidth.powi(2)).sqrt();
    assert!(
        small.tv_to_pistar - large.tv_to_pistar > 3.0 * sep,
        "{} vs {}",
        small.tv_to_pistar,
        large.tv_to_pistar
    );
}

#[test]
fn shared_seeds_give_identical_forests_on_a_depth_three_tree() {
    let inst = random_tree_instance(24, 2, 3);
    let r = couple_report(&inst, 3, 1_000, 25, 2, DEFAULT_STEP_CAP, 0.01).unwrap();
    assert_eq!(r.coupled_pairs, 1_000);
    assert_eq!(r.coupled_equal, 1_000);
}

#[test]
fn walk_and_independent_offspring_agree_in_law_on_a_depth_four_tree() {
    let inst = random_tree_instance(26, 2, 4);
    let r = couple_report(&inst, 3, 50_000, 27, 2, DEFAULT_STEP_CAP, 0.01).unwrap();
    assert!(r.pass, "{:?}", r.levels);
    assert_eq!(r.levels.len(), 4);
}
