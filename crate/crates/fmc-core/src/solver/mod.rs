//! Constrained average-reward solver: relative value iteration, steady-state
//! evaluation, the Lagrange-multiplier search on the rejection constraint,
//! and the outer fixed point coupling the MR rejection probability back into
//! the mobility model.

mod brute;
mod fixed_point;
mod lagrangian;
mod rvi;
mod stationary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ModelParams;
use crate::error::SolveError;
use crate::smdp::{Action, DiscreteModel};

pub use brute::brute_force_optimal;
pub use fixed_point::{evaluate_rule_fixed_point, fixed_point_solve, model_for, EvaluatedPolicy};
pub use lagrangian::{lagrangian_solve, rejection_probabilities, BetaStep, RejectionStats};
pub use rvi::relative_value_iteration;

/// A stationary decision rule: one action per state index.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actions: Vec<Action>,
}

impl Policy {
    pub fn action(&self, si: usize) -> Action {
        self.actions[si]
    }

    /// Checks that every assigned action is feasible in its state.
    pub fn validate(&self, m: &DiscreteModel) -> bool {
        self.actions.len() == m.n_states()
            && self
                .actions
                .iter()
                .enumerate()
                .all(|(si, a)| m.actions(si).iter().any(|d| d.action == *a))
    }
}

/// Solver tunables. Defaults follow the documented algorithm parameters:
/// span tolerance 1e-8, multiplier tolerance 0.01, initial step size 10
/// halved on sign flips, fixed-point damping 0.5 with tolerance 1e-4.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Span-seminorm stopping tolerance for value iteration.
    pub rvi_tol: f64,
    /// Sweep cap before value iteration reports non-convergence.
    pub rvi_max_sweeps: usize,
    /// Multiplier-search tolerance on `|weighted rejection - rho|`.
    pub eps: f64,
    /// Initial multiplier step size.
    pub alpha: f64,
    /// Initial multiplier value.
    pub beta_init: f64,
    /// Iteration cap for the multiplier search.
    pub max_multiplier_iters: usize,
    /// Consecutive violating iterations with an unchanged policy before an
    /// infeasibility probe fires.
    pub stall_limit: usize,
    /// Multiplier movement below which the search is considered settled.
    pub beta_step_tol: f64,
    /// Damping factor of the outer fixed point on the MR rejection probability.
    pub fp_damping: f64,
    /// Convergence tolerance of the outer fixed point.
    pub fp_tol: f64,
    /// Iteration cap of the outer fixed point.
    pub fp_max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rvi_tol: 1e-8,
            rvi_max_sweeps: 500_000,
            eps: 0.01,
            alpha: 10.0,
            beta_init: 0.0,
            max_multiplier_iters: 60,
            stall_limit: 8,
            beta_step_tol: 1e-6,
            fp_damping: 0.5,
            fp_tol: 1e-4,
            fp_max_iters: 50,
        }
    }
}

/// Result of one relative-value-iteration run.
#[derive(Debug, Clone)]
pub struct RviOutcome {
    pub policy: Policy,
    /// Average gain per unit time of the transformed model.
    pub gain: f64,
    /// Relative values normalized to `values[0] = 0`.
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub span: f64,
    pub residual: f64,
}

/// Full solver output: the policy with its gain, multiplier, rejection
/// probabilities, traces, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub policy: Policy,
    /// Average Lagrangian gain per unit time at the returned multiplier.
    pub theta: f64,
    /// Unpenalized average reward per unit time of the returned policy.
    pub avg_reward: f64,
    pub values: Vec<f64>,
    pub beta: f64,
    pub rejection: RejectionStats,
    /// MR rejection probability the mobility model was built with.
    pub model_p_rm: f64,
    pub beta_trace: Vec<BetaStep>,
    pub multiplier_iterations: usize,
    pub multiplier_converged: bool,
    pub fixed_point_trace: Vec<f64>,
    pub fixed_point_converged: bool,
    pub rvi_sweeps_total: usize,
}

fn chosen_rows<'a>(
    m: &'a DiscreteModel,
    pol: &Policy,
) -> Result<Vec<&'a [(usize, f64)]>, SolveError> {
    (0..m.n_states())
        .map(|si| {
            let a = pol.action(si);
            m.actions(si)
                .iter()
                .position(|d| d.action == a)
                .map(|ai| m.actions(si)[ai].kernel.as_slice())
                .ok_or_else(|| {
                    SolveError::Model(crate::error::ModelError::InfeasibleAction {
                        state: m.space().state(si).descriptor(),
                        action: a.to_string(),
                    })
                })
        })
        .collect()
}

fn chosen_tilde_rows<'a>(
    m: &'a DiscreteModel,
    pol: &Policy,
) -> Result<Vec<&'a [(usize, f64)]>, SolveError> {
    (0..m.n_states())
        .map(|si| {
            let a = pol.action(si);
            m.actions(si)
                .iter()
                .position(|d| d.action == a)
                .map(|ai| m.tilde_row(si, ai))
                .ok_or_else(|| {
                    SolveError::Model(crate::error::ModelError::InfeasibleAction {
                        state: m.space().state(si).descriptor(),
                        action: a.to_string(),
                    })
                })
        })
        .collect()
}

/// Stationary distribution of the embedded chain induced by `pol`.
pub fn steady_state(m: &DiscreteModel, pol: &Policy) -> Result<Vec<f64>, SolveError> {
    steady_state_warm(m, pol, None)
}

pub(crate) fn steady_state_warm(
    m: &DiscreteModel,
    pol: &Policy,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>, SolveError> {
    let rows = chosen_rows(m, pol)?;
    stationary::stationary(&rows, warm, &stationary::StationaryOptions::default())
}

/// Stationary distribution of the uniformized chain induced by `pol`.
pub fn steady_state_uniformized(m: &DiscreteModel, pol: &Policy) -> Result<Vec<f64>, SolveError> {
    let rows = chosen_tilde_rows(m, pol)?;
    stationary::stationary(&rows, None, &stationary::StationaryOptions::default())
}

/// Average gain of a fixed policy via the semi-Markov ratio
/// `sum_s pi(s) r_beta(s, d(s)) / sum_s pi(s) y(s, d(s))`.
pub fn policy_gain(m: &DiscreteModel, pol: &Policy, beta: f64) -> Result<f64, SolveError> {
    let pi = steady_state(m, pol)?;
    Ok(gain_from_pi(m, pol, beta, &pi))
}

pub(crate) fn gain_from_pi(m: &DiscreteModel, pol: &Policy, beta: f64, pi: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (si, mass) in pi.iter().enumerate() {
        let a = pol.action(si);
        let data = m
            .actions(si)
            .iter()
            .find(|d| d.action == a)
            .expect("policy action must be feasible");
        num += mass * data.lagrange_reward(beta);
        den += mass * data.sojourn;
    }
    num / den
}

/// Average gain of a fixed policy via the uniformized chain: the stationary
/// average of the transformed reward.
pub fn uniformized_policy_gain(
    m: &DiscreteModel,
    pol: &Policy,
    beta: f64,
) -> Result<f64, SolveError> {
    let pi = steady_state_uniformized(m, pol)?;
    let mut gain = 0.0;
    for (si, mass) in pi.iter().enumerate() {
        let a = pol.action(si);
        let ai = m
            .actions(si)
            .iter()
            .position(|d| d.action == a)
            .expect("policy action must be feasible");
        gain += mass * m.transformed_reward(si, ai, beta);
    }
    Ok(gain)
}

/// JSON result document emitted by the `solve` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDocument {
    pub parameters: BTreeMap<String, String>,
    pub rho: f64,
    pub theta: f64,
    pub avg_reward: f64,
    pub beta: f64,
    pub p_reject: RejectionSummary,
    pub p_rm_fixed_point: f64,
    pub beta_trace: Vec<BetaStep>,
    pub pr_trace: Vec<f64>,
    pub fixed_point_trace: Vec<f64>,
    pub converged: ConvergenceSummary,
    pub iterations: IterationSummary,
    pub value_stats: ValueSummary,
    pub policy: Vec<PolicyEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub nr: f64,
    pub mr: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub multiplier: bool,
    pub fixed_point: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationSummary {
    pub multiplier: usize,
    pub rvi_sweeps_total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub state: String,
    pub action: String,
}

impl SolveDocument {
    pub fn new(p: &ModelParams, rho: f64, m: &DiscreteModel, out: &SolveOutcome) -> Self {
        let n = out.values.len().max(1) as f64;
        let value_stats = ValueSummary {
            min: out.values.iter().copied().fold(f64::INFINITY, f64::min),
            max: out.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: out.values.iter().sum::<f64>() / n,
        };
        let policy = (0..m.n_states())
            .map(|si| PolicyEntry {
                state: m.space().state(si).descriptor(),
                action: out.policy.action(si).to_string(),
            })
            .collect();
        SolveDocument {
            parameters: p.to_key_values(),
            rho,
            theta: out.theta,
            avg_reward: out.avg_reward,
            beta: out.beta,
            p_reject: RejectionSummary {
                nr: out.rejection.p_reject_nr,
                mr: out.rejection.p_reject_mr,
                weighted: out.rejection.weighted,
            },
            p_rm_fixed_point: out.model_p_rm,
            beta_trace: out.beta_trace.clone(),
            pr_trace: out.beta_trace.iter().map(|b| b.weighted).collect(),
            fixed_point_trace: out.fixed_point_trace.clone(),
            converged: ConvergenceSummary {
                multiplier: out.multiplier_converged,
                fixed_point: out.fixed_point_converged,
            },
            iterations: IterationSummary {
                multiplier: out.multiplier_iterations,
                rvi_sweeps_total: out.rvi_sweeps_total,
            },
            value_stats,
            policy,
        }
    }
}
