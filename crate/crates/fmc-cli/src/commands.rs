//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::Args;

use fmc_core::config::ModelParams;
use fmc_core::mobility::{build_distance_chain, distance_statistics, DistanceStats};
use fmc_core::policies::{materialize, AdmissionRule, BaselineSpec, ClosedFormRule, TableRule};
use fmc_core::sim::{
    run_simulation, CostModel, PolicyKind, SimConfig, SimReport, SweepTable,
};
use fmc_core::smdp::DiscreteModel;
use fmc_core::solver::{
    brute_force_optimal, evaluate_rule_fixed_point, fixed_point_solve, model_for, policy_gain,
    rejection_probabilities, relative_value_iteration, steady_state, uniformized_policy_gain,
    Policy, SolveDocument, SolverOptions,
};
use fmc_core::SolveError;

use crate::manifest::RunManifest;
use crate::{Cli, CliError};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Rejection-probability threshold; defaults to the config's
    /// `w_n * max_reject_nr + w_m * max_reject_mr`.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Policy: smdp | greedy | au | fixed[:<c>] | rrsv[:<R>,<c>].
    #[arg(long, default_value = "smdp")]
    pub policy: String,
    /// Decision-epoch horizon, including warmup.
    #[arg(long, default_value_t = 1_100_000)]
    pub events: u64,
    #[arg(long, default_value_t = 100_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: u32,
    /// Cost model: per-service distances, or the analytic mean-field form.
    #[arg(long, default_value = "full", value_parser = ["full", "meanfield"])]
    pub mode: String,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fix the environment MR rejection probability instead of computing the
    /// policy's own fixed point.
    #[arg(long)]
    pub p_rm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated NR arrival rates.
    #[arg(long, default_value = "1.0,1.5,2.0,2.5,3.0,4.0")]
    pub lambdas: String,
    /// Comma-separated policy selectors.
    #[arg(long, default_value = "smdp,greedy,au,fixed,rrsv")]
    pub policies: String,
    #[arg(long, default_value_t = 1_100_000)]
    pub events: u64,
    #[arg(long, default_value_t = 100_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: u32,
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = "smdp")]
    pub policy: String,
    #[arg(long, default_value_t = 1_100_000)]
    pub events: u64,
    #[arg(long, default_value_t = 100_000)]
    pub warmup: u64,
    #[arg(long, default_value_t = 4)]
    pub reps: u32,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Test hook: perturb one kernel row to demonstrate failure reporting.
    #[arg(long, hide = true)]
    pub corrupt_kernel: bool,
}

#[derive(Debug, Args)]
pub struct DumpModelArgs {
    /// Environment MR rejection probability to build the model at.
    #[arg(long, default_value_t = 0.0)]
    pub p_rm: f64,
}

#[derive(Debug, Args)]
pub struct DumpMobilityArgs {
    #[arg(long, default_value_t = 0.0)]
    pub p_rm: f64,
}

/// A policy resolved into everything both evaluation paths need.
struct ResolvedPolicy {
    label: String,
    stats: DistanceStats,
    model: DiscreteModel,
    policy: Policy,
}

fn resolve_policy(
    params: &ModelParams,
    selector: &str,
    rho: f64,
    p_rm_override: Option<f64>,
    opts: &SolverOptions,
) -> Result<ResolvedPolicy, CliError> {
    let kind = PolicyKind::parse(selector, params)?;
    let label = kind.label();
    match (kind, p_rm_override) {
        (PolicyKind::Smdp, None) => {
            let outcome = fixed_point_solve(params, rho, opts)?;
            let (stats, model) = model_for(params, outcome.model_p_rm)?;
            Ok(ResolvedPolicy {
                label,
                stats,
                model,
                policy: outcome.policy,
            })
        }
        (PolicyKind::Smdp, Some(p_rm)) => {
            let (stats, model) = model_for(params, p_rm)?;
            let outcome = fmc_core::solver::lagrangian_solve(&model, rho, opts)?;
            Ok(ResolvedPolicy {
                label,
                stats,
                model,
                policy: outcome.policy,
            })
        }
        (PolicyKind::Baseline(spec), None) => {
            let (eval, model) =
                evaluate_rule_fixed_point(params, |m| materialize(&spec, m), opts)?;
            Ok(ResolvedPolicy {
                label,
                stats: eval.stats,
                model,
                policy: eval.policy,
            })
        }
        (PolicyKind::Baseline(spec), Some(p_rm)) => {
            let (stats, model) = model_for(params, p_rm)?;
            let policy = materialize(&spec, &model);
            Ok(ResolvedPolicy {
                label,
                stats,
                model,
                policy,
            })
        }
    }
}

fn make_rule(resolved: &ResolvedPolicy, model: Arc<DiscreteModel>) -> Box<dyn AdmissionRule> {
    // Closed-form rules simulate without table lookups where one exists.
    match resolved.label.as_str() {
        label if label == "smdp" || label == "greedy" => Box::new(TableRule::new(
            model,
            resolved.policy.clone(),
            resolved.label.clone(),
        )),
        label => {
            let params = model.params();
            match PolicyKind::parse(label, params) {
                Ok(PolicyKind::Baseline(spec)) if !matches!(spec, BaselineSpec::Greedy) => {
                    Box::new(ClosedFormRule::new(spec))
                }
                _ => Box::new(TableRule::new(
                    model,
                    resolved.policy.clone(),
                    resolved.label.clone(),
                )),
            }
        }
    }
}

fn out_path(cli: &Cli, default_name: &str) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn sim_config(seed: Option<u64>, events: u64, warmup: u64, reps: u32, mode: &str) -> SimConfig {
    SimConfig {
        seed: seed.unwrap_or(12345),
        n_events: events,
        warmup_events: warmup,
        n_replications: reps,
        cost_model: if mode == "meanfield" {
            CostModel::MeanField
        } else {
            CostModel::PerService
        },
        trace_nr_arrivals: false,
    }
}

pub fn solve(cli: &Cli, args: &SolveArgs, params: &ModelParams) -> Result<(), CliError> {
    let started = Instant::now();
    let rho = args.rho.unwrap_or_else(|| params.rejection_threshold());
    let opts = SolverOptions::default();
    let outcome = fixed_point_solve(params, rho, &opts)?;
    let (_, model) = model_for(params, outcome.model_p_rm)?;
    let doc = SolveDocument::new(params, rho, &model, &outcome);

    let path = out_path(cli, "solve_result.json");
    write_output(&path, &serde_json::to_string_pretty(&doc).expect("document serializes"))?;

    println!("solved: theta = {:.6}, avg reward = {:.6}", doc.theta, doc.avg_reward);
    println!(
        "beta = {:.6}; p_reject nr/mr/weighted = {:.6}/{:.6}/{:.6} (rho {})",
        doc.beta, doc.p_reject.nr, doc.p_reject.mr, doc.p_reject.weighted, rho
    );
    println!(
        "mobility fixed point p_rm = {:.6} ({} outer iterations, converged: {})",
        doc.p_rm_fixed_point,
        doc.fixed_point_trace.len(),
        doc.converged.fixed_point
    );
    let mut reject = 0usize;
    let mut accept = 0usize;
    for entry in &doc.policy {
        if entry.action == "reject" {
            reject += 1;
        } else if entry.action.starts_with("accept") {
            accept += 1;
        }
    }
    println!("policy: {accept} accepting / {reject} rejecting arrival states");
    println!("result document: {}", path.display());

    let manifest = RunManifest::new(
        "solve",
        params,
        cli.seed,
        vec![path.display().to_string()],
        started.elapsed().as_secs_f64(),
    );
    manifest.write_alongside(&path, false)?;
    Ok(())
}

pub fn simulate(cli: &Cli, args: &SimulateArgs, params: &ModelParams) -> Result<(), CliError> {
    let started = Instant::now();
    let rho = args.rho.unwrap_or_else(|| params.rejection_threshold());
    let opts = SolverOptions::default();
    let resolved = resolve_policy(params, &args.policy, rho, args.p_rm, &opts)?;
    let cfg = sim_config(cli.seed, args.events, args.warmup, args.reps, &args.mode);

    let model = Arc::new(resolved.model.clone());
    let rule = make_rule(&resolved, model);
    let report = run_simulation(params, rule.as_ref(), &cfg, &resolved.stats)?;

    let table = SweepTable::from_report(params.lambda_n, &resolved.label, &report);
    let format = cli.format.as_deref().unwrap_or("csv");
    let (default_name, contents) = match format {
        "json" => ("simulate_results.json", table.to_json_string()),
        _ => ("simulate_results.csv", table.to_csv_string()),
    };
    let path = out_path(cli, default_name);
    write_output(&path, &contents)?;

    let m = &report.mean;
    println!(
        "policy {}: reward/time {:.4} (+/- {:.4}), p_reject nr {:.4} mr {:.4}, \
         alloc nr {:.3} mr {:.3}, distance {:.3}, interruptions/time {:.5}",
        resolved.label,
        m.avg_reward_per_time,
        report.half_width.avg_reward_per_time,
        m.p_reject_nr,
        m.p_reject_mr,
        m.avg_alloc_nr,
        m.avg_alloc_mr,
        m.avg_distance,
        m.interruption_rate
    );
    println!("results: {}", path.display());

    let manifest = RunManifest::new(
        "simulate",
        params,
        cli.seed,
        vec![path.display().to_string()],
        started.elapsed().as_secs_f64(),
    );
    manifest.write_alongside(&path, false)?;
    Ok(())
}

pub fn sweep(cli: &Cli, args: &SweepArgs, params: &ModelParams) -> Result<(), CliError> {
    let started = Instant::now();
    let lambdas: Vec<f64> = args
        .lambdas
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("bad lambda value `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if lambdas.is_empty() || lambdas.iter().any(|l| *l <= 0.0) {
        return Err(CliError::Validation("lambdas must be positive".into()));
    }
    let kinds: Vec<PolicyKind> = args
        .policies
        .split(',')
        .map(|s| PolicyKind::parse(s.trim(), params).map_err(CliError::from))
        .collect::<Result<_, _>>()?;

    let cfg = sim_config(cli.seed, args.events, args.warmup, args.reps, "full");
    let opts = SolverOptions::default();
    let table = fmc_core::sim::sweep(params, &kinds, &lambdas, &cfg, &opts, args.rho);

    let format = cli.format.as_deref().unwrap_or("csv");
    let (default_name, contents) = match format {
        "json" => ("sweep_results.json", table.to_json_string()),
        _ => ("sweep_results.csv", table.to_csv_string()),
    };
    let path = out_path(cli, default_name);
    write_output(&path, &contents)?;

    for &lambda in &lambdas {
        let mut line = format!("lambda {lambda}:");
        for kind in &kinds {
            match table.mean_of(lambda, &kind.label()) {
                Some(m) => {
                    line.push_str(&format!(" {}={:.3}", kind.label(), m.avg_reward_per_time))
                }
                None => line.push_str(&format!(" {}=failed", kind.label())),
            }
        }
        println!("{line}");
    }
    println!("results: {}", path.display());

    let manifest = RunManifest::new(
        "sweep",
        params,
        cli.seed,
        vec![path.display().to_string()],
        started.elapsed().as_secs_f64(),
    );
    manifest.write_alongside(&path, false)?;

    if table.all_failed() {
        return Err(CliError::Solver(SolveError::MultiplierNotConverged {
            iters: 0,
            trace: vec![],
        }));
    }
    Ok(())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

pub fn compare(cli: &Cli, args: &CompareArgs, params: &ModelParams) -> Result<(), CliError> {
    let started = Instant::now();
    let rho = args.rho.unwrap_or_else(|| params.rejection_threshold());
    let opts = SolverOptions::default();
    let mut resolved = resolve_policy(params, &args.policy, rho, None, &opts)?;
    if args.corrupt_kernel {
        resolved.model.corrupt_kernel_for_tests();
    }
    let checks = consistency_checks(params, &resolved, cli.seed, args.events, args.warmup, args.reps)?;

    let mut failed = Vec::new();
    for c in &checks {
        println!("{}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.pass {
            failed.push(c.name);
        }
    }

    let manifest = RunManifest::new(
        "compare",
        params,
        cli.seed,
        vec![],
        started.elapsed().as_secs_f64(),
    );
    let path = out_path(cli, "compare.manifest.json");
    write_output(&path, &manifest.to_json())?;

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ConsistencyFailed(failed.join(", ")))
    }
}

fn consistency_checks(
    params: &ModelParams,
    resolved: &ResolvedPolicy,
    seed: Option<u64>,
    events: u64,
    warmup: u64,
    reps: u32,
) -> Result<Vec<Check>, CliError> {
    let m = &resolved.model;
    let mut checks = Vec::new();

    // Kernel normalization, embedded and uniformized.
    let mut worst_embedded = 0.0f64;
    let mut worst_tilde = 0.0f64;
    let mut negative = false;
    for si in 0..m.n_states() {
        for (ai, data) in m.actions(si).iter().enumerate() {
            let sum: f64 = data.kernel.iter().map(|(_, p)| p).sum();
            worst_embedded = worst_embedded.max((sum - 1.0).abs());
            let tsum: f64 = m.tilde_row(si, ai).iter().map(|(_, p)| p).sum();
            worst_tilde = worst_tilde.max((tsum - 1.0).abs());
            negative |= m.tilde_row(si, ai).iter().any(|(_, p)| *p < 0.0);
        }
    }
    checks.push(Check {
        name: "embedded-kernel-row-sums",
        pass: worst_embedded < 1e-10,
        detail: format!("max |row sum - 1| = {worst_embedded:.3e}"),
    });
    checks.push(Check {
        name: "uniformized-kernel-row-sums",
        pass: worst_tilde < 1e-10 && !negative,
        detail: format!("max |row sum - 1| = {worst_tilde:.3e}, negative entries: {negative}"),
    });

    // Average gain via the semi-Markov ratio and via the uniformized chain.
    let gain_ratio = policy_gain(m, &resolved.policy, 0.0)?;
    let gain_unif = uniformized_policy_gain(m, &resolved.policy, 0.0)?;
    checks.push(Check {
        name: "gain-ratio-vs-uniformized",
        pass: (gain_ratio - gain_unif).abs() < 1e-8,
        detail: format!("ratio {gain_ratio:.10} vs uniformized {gain_unif:.10}"),
    });

    // Mean-field simulation against the analytic gain and rejections.
    let cfg = SimConfig {
        seed: seed.unwrap_or(12345),
        n_events: events,
        warmup_events: warmup,
        n_replications: reps,
        cost_model: CostModel::MeanField,
        trace_nr_arrivals: false,
    };
    let model = Arc::new(resolved.model.clone());
    let rule = make_rule(resolved, model);
    let report = run_simulation(params, rule.as_ref(), &cfg, &resolved.stats)?;
    let sim_reward = report.mean.avg_reward_per_time;
    let rel = (sim_reward - gain_ratio).abs() / gain_ratio.abs().max(1e-9);
    checks.push(Check {
        name: "reward-analytic-vs-simulated",
        pass: rel <= 0.02,
        detail: format!("analytic {gain_ratio:.4}, simulated {sim_reward:.4}, rel err {rel:.4}"),
    });

    let pi = steady_state(m, &resolved.policy)?;
    let analytic = rejection_probabilities(&pi, &resolved.policy, m)?;
    let (nr_obs, nr_sigma) = pooled_rejection(&report, true, analytic.p_reject_nr);
    let (mr_obs, mr_sigma) = pooled_rejection(&report, false, analytic.p_reject_mr);
    let nr_ok = (nr_obs - analytic.p_reject_nr).abs() <= 3.0 * nr_sigma + 1e-9;
    let mr_ok = (mr_obs - analytic.p_reject_mr).abs() <= 3.0 * mr_sigma + 1e-9;
    checks.push(Check {
        name: "rejections-analytic-vs-simulated",
        pass: nr_ok && mr_ok,
        detail: format!(
            "nr {:.5} vs {:.5} (sigma {:.2e}), mr {:.5} vs {:.5} (sigma {:.2e})",
            nr_obs, analytic.p_reject_nr, nr_sigma, mr_obs, analytic.p_reject_mr, mr_sigma
        ),
    });

    // Cross-check against exhaustive enumeration when the instance is small.
    match brute_force_optimal(m, 0.0) {
        Ok((_, brute_gain)) => {
            let rvi = relative_value_iteration(
                m,
                0.0,
                &SolverOptions {
                    rvi_tol: 1e-10,
                    ..SolverOptions::default()
                },
                None,
            )?;
            checks.push(Check {
                name: "brute-force-vs-value-iteration",
                pass: (brute_gain - rvi.gain).abs() < 1e-8,
                detail: format!("brute {brute_gain:.10} vs rvi {:.10}", rvi.gain),
            });
        }
        Err(SolveError::TooLargeForBruteForce { policies }) => {
            checks.push(Check {
                name: "brute-force-vs-value-iteration",
                pass: true,
                detail: format!("skipped: {policies:.1e} policies exceed the enumeration cap"),
            });
        }
        Err(e) => return Err(e.into()),
    }

    Ok(checks)
}

/// Pooled empirical rejection probability across replications with the
/// binomial standard error at the analytic probability.
fn pooled_rejection(report: &SimReport, nr: bool, p_analytic: f64) -> (f64, f64) {
    let mut rejected = 0.0f64;
    let mut total = 0.0f64;
    for (m, a) in report.replications.iter().zip(&report.arrivals) {
        let (p, n) = if nr {
            (m.p_reject_nr, a.nr)
        } else {
            (m.p_reject_mr, a.mr)
        };
        rejected += p * n as f64;
        total += n as f64;
    }
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let sigma = (p_analytic * (1.0 - p_analytic) / total).sqrt();
    (rejected / total, sigma)
}

pub fn dump_model(cli: &Cli, args: &DumpModelArgs, params: &ModelParams) -> Result<(), CliError> {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&args.p_rm) {
        return Err(CliError::Validation("p_rm outside [0, 1]".into()));
    }
    let (_, model) = model_for(params, args.p_rm)?;
    let dir = out_path(cli, "model_dump");
    std::fs::create_dir_all(&dir)?;

    let join = |v: &[u32]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join("|")
    };
    let mut states = String::from("index,local,remote,event\n");
    for (i, s) in model.space().states.iter().enumerate() {
        states.push_str(&format!(
            "{i},{},{},{}\n",
            join(&s.local),
            join(&s.remote),
            s.event
        ));
    }
    write_output(&dir.join("states.csv"), &states)?;

    let mut kernel = String::from("state,action,next_state,prob\n");
    let mut rewards = String::from("state,action,income_g,cost_rate_d,sojourn_y,constraint_f\n");
    for si in 0..model.n_states() {
        for data in model.actions(si) {
            for (t, prob) in &data.kernel {
                kernel.push_str(&format!("{si},{},{t},{prob}\n", data.action));
            }
            rewards.push_str(&format!(
                "{si},{},{},{},{},{}\n",
                data.action,
                data.income,
                data.epoch_cost / data.sojourn,
                data.sojourn,
                data.constraint
            ));
        }
    }
    write_output(&dir.join("kernel.csv"), &kernel)?;
    write_output(&dir.join("rewards.csv"), &rewards)?;

    println!(
        "wrote {} states to {}",
        model.n_states(),
        dir.display()
    );
    let manifest = RunManifest::new(
        "dump-model",
        params,
        cli.seed,
        vec![
            dir.join("states.csv").display().to_string(),
            dir.join("kernel.csv").display().to_string(),
            dir.join("rewards.csv").display().to_string(),
        ],
        started.elapsed().as_secs_f64(),
    );
    manifest.write_alongside(&dir, true)?;
    Ok(())
}

pub fn dump_mobility(
    cli: &Cli,
    args: &DumpMobilityArgs,
    params: &ModelParams,
) -> Result<(), CliError> {
    let started = Instant::now();
    if !(0.0..=1.0).contains(&args.p_rm) {
        return Err(CliError::Validation("p_rm outside [0, 1]".into()));
    }
    let chain = build_distance_chain(params, args.p_rm);
    let stats = distance_statistics(&chain).map_err(SolveError::from)?;

    let n = chain.n_states();
    let labels: Vec<String> = (0..n).map(|i| chain.state_label(i)).collect();
    let mut out = format!("row,{}\n", labels.join(","));
    for (i, label) in labels.iter().enumerate() {
        let row: Vec<String> = chain.row(i).iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("{label},{}\n", row.join(",")));
    }
    let mut occ: Vec<String> = stats.occupancy.iter().map(|p| p.to_string()).collect();
    occ.extend(["".to_string(), "".to_string()]);
    out.push_str(&format!("occupancy,{}\n", occ.join(",")));
    let pad = |v: f64| {
        let mut cells = vec![v.to_string()];
        cells.extend(std::iter::repeat_n(String::new(), n - 1));
        cells.join(",")
    };
    out.push_str(&format!("mean_distance,{}\n", pad(stats.mean_distance)));
    out.push_str(&format!("p_interrupt,{}\n", pad(stats.p_interrupt)));

    let path = out_path(cli, "mobility.csv");
    write_output(&path, &out)?;
    println!("wrote distance chain to {}", path.display());

    let manifest = RunManifest::new(
        "dump-mobility",
        params,
        cli.seed,
        vec![path.display().to_string()],
        started.elapsed().as_secs_f64(),
    );
    manifest.write_alongside(&path, false)?;
    Ok(())
}
