//! `gpf`: validation, oracle reports, trial campaigns, sweeps, coupling checks
//! and instance generators.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use guided_pf::chain::{load_instance, parse_instance, save_instance, write_atomic};
use guided_pf::experiment::{
    couple_csv, couple_report, resolve_defaults, run_csv, run_report, sweep_csv, sweep_report, write_outputs,
    Algorithm, CampaignConfig,
};
use guided_pf::hard::{build_smc_lower, build_var_blowup, kernel_switch_demo, kernel_switch_local, MyopicConstruction};
use guided_pf::oracle::Oracle;
use guided_pf::vgb::DEFAULT_STEP_CAP;
use guided_pf::{Error, ProblemInstance, Resampling, SamplerConfig, SimRng, Strictness, ZTilde};
use rand::SeedableRng;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "gpf",
    version,
    about = "Particle filters and exact oracles for value-guided generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against every invariant.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Exact values, divergences, coverage constants and bounds.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        /// Tail parameters M for D_cov (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        m: Vec<f64>,
        /// Action thresholds eta (comma separated); defaults to C_act.
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        /// Particle count for the bound values.
        #[arg(long, default_value_t = 32)]
        particles: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one sampler for many trials and summarize against the oracle.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "smc")]
        algo: String,
        #[arg(long, default_value_t = 32)]
        particles: usize,
    },
    /// One campaign per (algorithm, N) with bound columns.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "smc")]
        algo: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        particles: Vec<usize>,
        /// Tail parameter M for the heavy-tail bounds.
        #[arg(long, default_value_t = 1.0)]
        m: f64,
    },
    /// Coupling and equality-in-law checks between SMC-IND and the VGB walk.
    Couple {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 3)]
        particles: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
        step_cap: usize,
        /// Family-wise significance level, split over levels.
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
    },
    /// SMC lower-bound tree.
    MakeLower {
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variance-blowup chain.
    MakeVarblow {
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Myopic lower-bound construction (depth 1 or 2).
    MakeMyopic {
        /// Horizon schedule, e.g. `4,12`.
        #[arg(long, value_delimiter = ',')]
        schedule: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// `y*` as a 0/1 string of length H; drawn from `--seed` when absent.
        #[arg(long)]
        ystar: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel-switching task with PRM interpolation.
    MakeKswitch {
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        perturbation_scale: f64,
        /// Keep the target within this tilt of the base rows instead of independent.
        #[arg(long)]
        target_shift: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// CSV destination; the JSON summary goes next to it. Prints CSV when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_resampling, default_value = "multinomial")]
    resampling: Resampling,
    /// Rejection threshold for smc-rs (defaults to the PRM action coverage).
    #[arg(long)]
    eta: Option<f64>,
    /// Ratio bound for smc-opt2 and the cinf Z-tilde mode (defaults to the exact value).
    #[arg(long)]
    cinf: Option<f64>,
    /// `cinf`, `pilot` or a positive number.
    #[arg(long, value_parser = parse_ztilde, default_value = "cinf")]
    ztilde: ZTilde,
    #[arg(long, default_value_t = 1000)]
    max_restarts: usize,
    /// Fail when an acceptance probability exceeds 1 (default).
    #[arg(long, conflicts_with = "clamp")]
    strict: bool,
    /// Clamp acceptance probabilities to 1 and count warnings.
    #[arg(long)]
    clamp: bool,
}

fn parse_resampling(s: &str) -> Result<Resampling, String> {
    match s {
        "multinomial" => Ok(Resampling::Multinomial),
        "systematic" => Ok(Resampling::Systematic),
        _ => Err(format!("expected multinomial or systematic, got '{s}'")),
    }
}

fn parse_ztilde(s: &str) -> Result<ZTilde, String> {
    match s {
        "cinf" => Ok(ZTilde::CinfTimesZhat1),
        "pilot" => Ok(ZTilde::Pilot2WhatH),
        _ => s
            .parse::<f64>()
            .map(ZTilde::Explicit)
            .map_err(|_| format!("expected cinf, pilot or a number, got '{s}'")),
    }
}

impl Common {
    fn campaign(&self, algo: Algorithm, particles: usize, oracle: &Oracle) -> CampaignConfig {
        let mut sampler = SamplerConfig {
            particles,
            resampling: self.resampling,
            c_inf: self.cinf,
            z_tilde: self.ztilde,
            max_restarts: self.max_restarts,
            strictness: if self.clamp {
                Strictness::Clamp
            } else {
                Strictness::Strict
            },
            ..SamplerConfig::default()
        };
        resolve_defaults(&mut sampler, oracle, self.eta);
        CampaignConfig {
            algo,
            sampler,
            trials: self.trials,
            seed: self.seed,
            workers: self.workers,
        }
    }
}

fn emit(out: Option<&Path>, csv: &[u8], summary: &impl serde::Serialize) -> anyhow::Result<()> {
    match out {
        Some(p) => write_outputs(p, csv, summary)?,
        None => stdout(csv)?,
    }
    Ok(())
}

/// Write to stdout, treating a closed pipe as success.
fn stdout(bytes: &[u8]) -> anyhow::Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(bytes) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn save_with_params(out: &Path, inst: &ProblemInstance, params: serde_json::Value) -> anyhow::Result<()> {
    save_instance(out, inst)?;
    let mut params = params;
    params["instance_hash"] = json!(inst.content_hash());
    let bytes = serde_json::to_vec_pretty(&params)?;
    write_atomic(&out.with_extension("params.json"), &bytes)?;
    println!(
        "wrote {} ({} states, hash {})",
        out.display(),
        inst.chain.num_states(),
        inst.content_hash()
    );
    Ok(())
}

fn parse_bits(s: &str) -> anyhow::Result<u64> {
    if s.len() > 64 {
        bail!("y* longer than 64 coordinates");
    }
    s.chars().enumerate().try_fold(0u64, |acc, (k, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << k),
        _ => Err(anyhow!("y* must be a 0/1 string")),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate { instance } => {
            let text = std::fs::read_to_string(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let inst = parse_instance(&text)?;
            println!(
                "valid: {} (H = {}, {} states, hash {})",
                inst.name,
                inst.horizon(),
                inst.chain.num_states(),
                inst.content_hash()
            );
        }
        Command::Oracle {
            instance,
            m,
            eta,
            particles,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let o = Oracle::new(&inst)?;
            let div = o.divergence_report(&m)?;
            let base = o.coverage_constants(&[]);
            let eta = if eta.is_empty() { vec![base.c_act] } else { eta };
            let cov = o.coverage_constants(&eta);
            let bounds = o.bounds_from(&div, &cov, particles);
            let report = json!({
                "instance": inst.name,
                "instance_hash": inst.content_hash(),
                "Z": o.z,
                "divergences": div,
                "coverage": cov,
                "bounds": bounds,
            });
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => write_atomic(&p, text.as_bytes())?,
                None => stdout(format!("{text}\n").as_bytes())?,
            }
        }
        Command::Run {
            common,
            algo,
            particles,
        } => {
            let inst = load_instance(&common.instance)?;
            let o = Oracle::new(&inst)?;
            let cfg = common.campaign(algo.parse()?, particles, &o);
            let report = run_report(&inst, &o, &cfg)?;
            let csv = run_csv(std::slice::from_ref(&report))?;
            emit(common.out.as_deref(), &csv, &report)?;
        }
        Command::Sweep {
            common,
            algo,
            particles,
            m,
        } => {
            let inst = load_instance(&common.instance)?;
            let o = Oracle::new(&inst)?;
            let algos = algo.iter().map(|a| a.parse()).collect::<Result<Vec<Algorithm>, _>>()?;
            let first = *particles.first().ok_or_else(|| anyhow!("empty particle list"))?;
            let base = common.campaign(algos.first().copied().unwrap_or(Algorithm::Smc), first, &o);
            let bound_eta = o.coverage_constants(&[]).c_act;
            let rows = sweep_report(&inst, &o, &base, &algos, &particles, m, bound_eta)?;
            let csv = sweep_csv(&rows)?;
            emit(common.out.as_deref(), &csv, &rows)?;
        }
        Command::Couple {
            instance,
            particles,
            trials,
            seed,
            workers,
            out,
            step_cap,
            alpha,
        } => {
            let inst = load_instance(&instance)?;
            let r = couple_report(&inst, particles, trials, seed, workers, step_cap, alpha)?;
            let excluded = r.coupled_excluded + r.ind_excluded + r.vgb_excluded;
            if excluded > 0 {
                eprintln!("warning: {excluded} runs hit the step or node cap and were excluded");
            }
            eprintln!(
                "coupled forests equal in {}/{} pairs; overall {}",
                r.coupled_equal,
                r.coupled_pairs,
                if r.pass { "pass" } else { "fail" }
            );
            let csv = couple_csv(&r)?;
            emit(out.as_deref(), &csv, &r)?;
        }
        Command::MakeLower { horizon, lambda, out } => {
            let inst = build_smc_lower(horizon, lambda)?;
            save_with_params(
                &out,
                &inst,
                json!({"kind": "smc-lower", "H": horizon, "lambda": lambda}),
            )?;
        }
        Command::MakeVarblow { horizon, out } => {
            let inst = build_var_blowup(horizon)?;
            save_with_params(&out, &inst, json!({"kind": "var-blowup", "H": horizon}))?;
        }
        Command::MakeMyopic {
            schedule,
            gammas,
            ystar,
            seed,
            out,
        } => {
            let ystar = ystar.as_deref().map(parse_bits).transpose()?;
            let mut rng = SimRng::seed_from_u64(seed);
            let c = MyopicConstruction::new(schedule.clone(), gammas.clone(), ystar, Some(&mut rng))?;
            let inst = c.instance()?;
            let bits: String = (0..c.horizon())
                .map(|k| if c.ystar >> k & 1 == 1 { '1' } else { '0' })
                .collect();
            save_with_params(
                &out,
                &inst,
                json!({"kind": "myopic", "schedule": schedule, "gammas": gammas, "ystar": bits, "seed": seed}),
            )?;
        }
        Command::MakeKswitch {
            horizon,
            alpha,
            seed,
            perturbation_scale,
            target_shift,
            out,
        } => {
            let build = |a: f64| match target_shift {
                Some(t) => kernel_switch_local(seed, horizon, a, t, perturbation_scale),
                None => kernel_switch_demo(seed, horizon, a, perturbation_scale),
            };
            let inst = build(alpha)?;
            // Diagnostic only: KL(π*_h ‖ π̂_h) along an α grid.
            let grid = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
            let mut kl = Vec::new();
            for a in grid {
                let i = build(a)?;
                kl.push(Oracle::new(&i)?.divergence_report(&[])?.kl);
            }
            let monotone = (0..=horizon).all(|h| kl.windows(2).all(|w| w[1][h] >= w[0][h] - 1e-12));
            if !monotone {
                eprintln!("note: KL is not nondecreasing in alpha at every level on this instance");
            }
            save_with_params(
                &out,
                &inst,
                json!({
                    "kind": "kernel-switch", "H": horizon, "alpha": alpha, "seed": seed,
                    "perturbation_scale": perturbation_scale, "target_shift": target_shift,
                    "alpha_grid": grid, "kl_by_alpha": kl, "kl_monotone_in_alpha": monotone,
                }),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(3, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_are_read_left_to_right() {
        assert_eq!(parse_bits("1000").unwrap(), 1);
        assert_eq!(parse_bits("0011").unwrap(), 0b1100);
        assert!(parse_bits("012").is_err());
        assert!(parse_bits(&"1".repeat(65)).is_err());
    }

    #[test]
    fn option_parsers() {
        assert_eq!(parse_resampling("systematic").unwrap(), Resampling::Systematic);
        assert!(parse_resampling("stratified").is_err());
        assert_eq!(parse_ztilde("pilot").unwrap(), ZTilde::Pilot2WhatH);
        assert_eq!(parse_ztilde("2.5").unwrap(), ZTilde::Explicit(2.5));
        assert!(parse_ztilde("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
