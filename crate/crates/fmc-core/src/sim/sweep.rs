//! Sweeps over NR arrival intensities for the five policies.
//!
//! Per sweep point the solved policy comes from the full constrained fixed
//! point, while each baseline is simulated directly in its own
//! self-consistent mobility environment (its analytic MR rejection
//! probability feeds the environment's migration coins). All cells at one
//! arrival intensity share the master seed, so policies face common random
//! numbers.

use std::sync::Arc;

use serde::Serialize;

use crate::config::ModelParams;
use crate::error::{ConfigError, SolveError};
use crate::policies::{materialize, BaselineSpec, ClosedFormRule, TableRule};
use crate::solver::{evaluate_rule_fixed_point, fixed_point_solve, SolverOptions};

use super::{run_simulation, SimConfig, SimMetrics, SimReport};

/// Policy selector: the solved SMDP policy or a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Smdp,
    Baseline(BaselineSpec),
}

impl PolicyKind {
    /// Parses `smdp | greedy | au | fixed[:<c>] | rrsv[:<R>,<c>]`.
    pub fn parse(text: &str, p: &ModelParams) -> Result<Self, ConfigError> {
        let bad = |msg: &str| {
            Err(ConfigError::Invariant(format!(
                "cannot parse policy `{text}`: {msg}"
            )))
        };
        let (name, args) = match text.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (text, None),
        };
        let kind = match (name, args) {
            ("smdp", None) => PolicyKind::Smdp,
            ("greedy", None) => PolicyKind::Baseline(BaselineSpec::Greedy),
            ("au", None) => PolicyKind::Baseline(BaselineSpec::AllUnits),
            ("fixed", None) => PolicyKind::Baseline(BaselineSpec::Fixed {
                alloc: BaselineSpec::default_fixed_alloc(p),
            }),
            ("fixed", Some(a)) => {
                let alloc = match a.parse() {
                    Ok(v) => v,
                    Err(_) => return bad("allocation must be an integer"),
                };
                PolicyKind::Baseline(BaselineSpec::Fixed { alloc })
            }
            ("rrsv", None) => PolicyKind::Baseline(BaselineSpec::ReserveRsv {
                reserve: BaselineSpec::default_reserve(p),
                alloc: BaselineSpec::default_fixed_alloc(p),
            }),
            ("rrsv", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                if parts.len() != 2 {
                    return bad("expected rrsv:<reserve>,<alloc>");
                }
                match (parts[0].parse(), parts[1].parse()) {
                    (Ok(reserve), Ok(alloc)) => {
                        PolicyKind::Baseline(BaselineSpec::ReserveRsv { reserve, alloc })
                    }
                    _ => return bad("reserve and alloc must be integers"),
                }
            }
            _ => return bad("unknown policy"),
        };
        if let PolicyKind::Baseline(spec) = kind {
            spec.validate(p)?;
        }
        Ok(kind)
    }

    pub fn label(&self) -> String {
        match self {
            PolicyKind::Smdp => "smdp".to_string(),
            PolicyKind::Baseline(spec) => spec.label(),
        }
    }

    /// The default comparison set: the solved policy plus all four baselines.
    pub fn default_set(p: &ModelParams) -> Vec<PolicyKind> {
        vec![
            PolicyKind::Smdp,
            PolicyKind::Baseline(BaselineSpec::Greedy),
            PolicyKind::Baseline(BaselineSpec::AllUnits),
            PolicyKind::Baseline(BaselineSpec::Fixed {
                alloc: BaselineSpec::default_fixed_alloc(p),
            }),
            PolicyKind::Baseline(BaselineSpec::ReserveRsv {
                reserve: BaselineSpec::default_reserve(p),
                alloc: BaselineSpec::default_fixed_alloc(p),
            }),
        ]
    }
}

/// One output row: a replication, an aggregate, or a failed cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub lambda_n: f64,
    pub policy: String,
    /// Replication index, `mean`, or `hw95`.
    pub replication: String,
    pub metrics: Option<SimMetrics>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRecord>,
}

pub(crate) const CSV_HEADER: &str = "lambda_n,policy,replication,avg_reward_per_time,\
p_reject_nr,p_reject_mr,avg_alloc_nr,avg_alloc_mr,avg_distance,interruption_rate,status";

/// Quotes a CSV field when it contains separators or quotes (policy labels
/// like `rrsv:1,2` and error statuses need this).
fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

impl SweepTable {
    /// Canonical CSV rendering (comma separator, `.` decimal point, header
    /// row, one line per record, RFC-4180 quoting).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 96 + 128);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.lambda_n.to_string());
            out.push(',');
            out.push_str(&csv_field(&r.policy));
            out.push(',');
            out.push_str(&r.replication);
            match &r.metrics {
                Some(m) => {
                    for v in m.fields() {
                        out.push(',');
                        out.push_str(&v.to_string());
                    }
                }
                None => out.push_str(",,,,,,,"),
            }
            out.push(',');
            out.push_str(&csv_field(&r.status));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep table serializes")
    }

    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.status != "ok")
    }

    /// Aggregate metrics of one `(lambda, policy)` cell, if it succeeded.
    pub fn mean_of(&self, lambda_n: f64, policy: &str) -> Option<&SimMetrics> {
        self.rows
            .iter()
            .find(|r| {
                r.lambda_n == lambda_n && r.policy == policy && r.replication == "mean"
            })
            .and_then(|r| r.metrics.as_ref())
    }
}

impl SweepTable {
    /// Rows of a single simulated cell, in the sweep's row layout.
    pub fn from_report(lambda_n: f64, policy: &str, report: &SimReport) -> SweepTable {
        let mut rows = Vec::new();
        push_report(&mut rows, lambda_n, policy, report);
        SweepTable { rows }
    }
}

fn push_report(rows: &mut Vec<SweepRecord>, lambda_n: f64, policy: &str, report: &SimReport) {
    for (i, m) in report.replications.iter().enumerate() {
        rows.push(SweepRecord {
            lambda_n,
            policy: policy.to_string(),
            replication: i.to_string(),
            metrics: Some(m.clone()),
            status: "ok".to_string(),
        });
    }
    rows.push(SweepRecord {
        lambda_n,
        policy: policy.to_string(),
        replication: "mean".to_string(),
        metrics: Some(report.mean.clone()),
        status: "ok".to_string(),
    });
    rows.push(SweepRecord {
        lambda_n,
        policy: policy.to_string(),
        replication: "hw95".to_string(),
        metrics: Some(report.half_width.clone()),
        status: "ok".to_string(),
    });
}

/// Runs every `(lambda_n, policy)` cell, continuing past per-cell failures.
pub fn sweep(
    p: &ModelParams,
    kinds: &[PolicyKind],
    lambda_values: &[f64],
    cfg: &SimConfig,
    opts: &SolverOptions,
    rho: Option<f64>,
) -> SweepTable {
    assert!(!lambda_values.is_empty());
    assert!(lambda_values.iter().all(|l| *l > 0.0));

    let mut rows = Vec::new();
    for &lambda in lambda_values {
        let params = ModelParams {
            lambda_n: lambda,
            ..p.clone()
        };
        let rho = rho.unwrap_or_else(|| params.rejection_threshold());
        for kind in kinds {
            let label = kind.label();
            match run_cell(&params, kind, cfg, opts, rho) {
                Ok(report) => push_report(&mut rows, lambda, &label, &report),
                Err(e) => rows.push(SweepRecord {
                    lambda_n: lambda,
                    policy: label,
                    replication: "-".to_string(),
                    metrics: None,
                    status: format!("error: {e}"),
                }),
            }
        }
    }
    SweepTable { rows }
}

fn run_cell(
    params: &ModelParams,
    kind: &PolicyKind,
    cfg: &SimConfig,
    opts: &SolverOptions,
    rho: f64,
) -> Result<SimReport, SweepCellError> {
    match kind {
        PolicyKind::Smdp => {
            let outcome = fixed_point_solve(params, rho, opts)?;
            let (stats, model) = crate::solver::model_for(params, outcome.model_p_rm)?;
            let rule = TableRule::new(Arc::new(model), outcome.policy.clone(), "smdp");
            Ok(run_simulation(params, &rule, cfg, &stats)?)
        }
        PolicyKind::Baseline(spec) => {
            let (eval, model) =
                evaluate_rule_fixed_point(params, |m| materialize(spec, m), opts)?;
            match spec {
                BaselineSpec::Greedy => {
                    let rule = TableRule::new(Arc::new(model), eval.policy.clone(), "greedy");
                    Ok(run_simulation(params, &rule, cfg, &eval.stats)?)
                }
                _ => {
                    let rule = ClosedFormRule::new(*spec);
                    Ok(run_simulation(params, &rule, cfg, &eval.stats)?)
                }
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum SweepCellError {
    #[error("{0}")]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Sim(#[from] crate::error::SimError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> SimConfig {
        SimConfig {
            seed: 21,
            n_events: 40_000,
            warmup_events: 4_000,
            n_replications: 2,
            cost_model: super::super::CostModel::PerService,
            trace_nr_arrivals: false,
        }
    }

    #[test]
    fn parses_policy_selectors() {
        let p = ModelParams::default();
        assert_eq!(PolicyKind::parse("smdp", &p).unwrap(), PolicyKind::Smdp);
        assert_eq!(
            PolicyKind::parse("fixed:2", &p).unwrap(),
            PolicyKind::Baseline(BaselineSpec::Fixed { alloc: 2 })
        );
        assert_eq!(
            PolicyKind::parse("rrsv:1,2", &p).unwrap(),
            PolicyKind::Baseline(BaselineSpec::ReserveRsv {
                reserve: 1,
                alloc: 2
            })
        );
        assert_eq!(
            PolicyKind::parse("fixed", &p).unwrap(),
            PolicyKind::Baseline(BaselineSpec::Fixed { alloc: 2 })
        );
        assert!(PolicyKind::parse("nope", &p).is_err());
        assert!(PolicyKind::parse("fixed:9", &p).is_err());
    }

    #[test]
    fn single_cell_produces_rows() {
        let p = ModelParams {
            capacity_b: 4,
            max_alloc_c: 2,
            ..ModelParams::default()
        };
        let cfg = quick_cfg();
        let kinds = vec![PolicyKind::Baseline(BaselineSpec::AllUnits)];
        let table = sweep(&p, &kinds, &[2.0], &cfg, &SolverOptions::default(), None);
        // 2 replications + mean + hw95.
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows.iter().all(|r| r.status == "ok"));
        assert!(table.mean_of(2.0, "au").is_some());
        assert!(!table.all_failed());
    }

    #[test]
    fn failed_cells_are_recorded_and_others_continue() {
        // rho = 0 is infeasible for the solved policy under load, while the
        // baseline cell still succeeds.
        let p = ModelParams {
            capacity_b: 2,
            max_alloc_c: 1,
            lambda_n: 6.0,
            ..ModelParams::default()
        };
        let cfg = quick_cfg();
        let kinds = vec![
            PolicyKind::Smdp,
            PolicyKind::Baseline(BaselineSpec::AllUnits),
        ];
        let table = sweep(
            &p,
            &kinds,
            &[6.0],
            &cfg,
            &SolverOptions::default(),
            Some(0.0),
        );
        let failed: Vec<_> = table.rows.iter().filter(|r| r.status != "ok").collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].policy, "smdp");
        assert!(failed[0].status.contains("infeasible"));
        assert!(failed[0].metrics.is_none());
        assert!(table.mean_of(6.0, "au").is_some());
        assert!(!table.all_failed());
    }

    #[test]
    fn csv_quotes_fields_with_separators() {
        let table = SweepTable {
            rows: vec![SweepRecord {
                lambda_n: 1.0,
                policy: "rrsv:1,2".to_string(),
                replication: "mean".to_string(),
                metrics: None,
                status: "error: a, b".to_string(),
            }],
        };
        let csv = table.to_csv_string();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "1,\"rrsv:1,2\",mean,,,,,,,,\"error: a, b\"");
    }

    #[test]
    fn csv_header_is_stable() {
        let table = SweepTable { rows: vec![] };
        let csv = table.to_csv_string();
        assert_eq!(
            csv.lines().next().unwrap(),
            "lambda_n,policy,replication,avg_reward_per_time,p_reject_nr,p_reject_mr,\
avg_alloc_nr,avg_alloc_mr,avg_distance,interruption_rate,status"
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = ModelParams {
            capacity_b: 4,
            max_alloc_c: 2,
            ..ModelParams::default()
        };
        let cfg = quick_cfg();
        let kinds = vec![
            PolicyKind::Baseline(BaselineSpec::AllUnits),
            PolicyKind::Baseline(BaselineSpec::Fixed { alloc: 1 }),
        ];
        let opts = SolverOptions::default();
        let a = sweep(&p, &kinds, &[1.0, 2.0], &cfg, &opts, None).to_csv_string();
        let b = sweep(&p, &kinds, &[1.0, 2.0], &cfg, &opts, None).to_csv_string();
        assert_eq!(a, b);
    }
}
