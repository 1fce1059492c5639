//! Outer fixed point on the MR rejection probability.
//!
//! The mobility chain and the lump-income function take the average MR
//! rejection probability as an input, yet that probability is produced by the
//! solved policy. The loop starts at 0, rebuilds the model at the current
//! value, solves, reads the conditional MR rejection probability of the
//! result, and moves halfway toward it until the change drops below the
//! tolerance.

use crate::config::ModelParams;
use crate::error::SolveError;
use crate::mobility::{build_distance_chain, distance_statistics, DistanceStats};
use crate::smdp::DiscreteModel;

use super::lagrangian::{lagrangian_solve_warm, rejection_probabilities, RejectionStats};
use super::{gain_from_pi, steady_state_warm, Policy, SolveOutcome, SolverOptions};

/// Rebuilds mobility statistics and the discrete model at a given `p_rm`.
pub fn model_for(
    p: &ModelParams,
    p_rm: f64,
) -> Result<(DistanceStats, DiscreteModel), SolveError> {
    let stats = distance_statistics(&build_distance_chain(p, p_rm))?;
    let model = DiscreteModel::build(p, &stats)?;
    Ok((stats, model))
}

/// Solves the constrained SMDP with the MR rejection probability determined
/// self-consistently.
pub fn fixed_point_solve(
    p: &ModelParams,
    rho: f64,
    opts: &SolverOptions,
) -> Result<SolveOutcome, SolveError> {
    let mut p_rm = 0.0f64;
    let mut beta = opts.beta_init;
    let mut values: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut kappa = opts.fp_damping;
    let mut prev_move: Option<f64> = None;

    let mut last: Option<SolveOutcome> = None;
    for _ in 0..opts.fp_max_iters {
        trace.push(p_rm);
        let (_, model) = model_for(p, p_rm)?;
        let mut out = lagrangian_solve_warm(&model, rho, opts, beta, values.as_deref())?;
        beta = out.beta;
        values = Some(out.values.clone());

        let observed = out.rejection.p_reject_mr;
        // Oscillation between two envs halves the damping until it settles.
        let raw_move = observed - p_rm;
        if let Some(prev) = prev_move {
            if prev * raw_move < 0.0 {
                kappa = (kappa * 0.5).max(0.02);
            }
        }
        prev_move = Some(raw_move);
        let next = p_rm + kappa * raw_move;
        let delta = (next - p_rm).abs();
        out.model_p_rm = p_rm;
        out.fixed_point_trace = trace.clone();
        if delta < opts.fp_tol {
            out.fixed_point_converged = true;
            return Ok(out);
        }
        out.fixed_point_converged = false;
        last = Some(out);
        p_rm = next;
    }
    // Cap reached: report the best (latest) iterate with the flag down.
    last.ok_or(SolveError::MultiplierNotConverged {
        iters: 0,
        trace: vec![],
    })
}

/// A fixed decision rule evaluated in its self-consistent mobility
/// environment: the same fixed-point loop, but with the policy supplied by a
/// materializer instead of re-optimized.
#[derive(Debug, Clone)]
pub struct EvaluatedPolicy {
    pub p_rm: f64,
    pub stats: DistanceStats,
    pub policy: Policy,
    pub pi: Vec<f64>,
    pub rejection: RejectionStats,
    /// Unpenalized average reward per unit time.
    pub avg_reward: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub fn evaluate_rule_fixed_point<F>(
    p: &ModelParams,
    make_policy: F,
    opts: &SolverOptions,
) -> Result<(EvaluatedPolicy, DiscreteModel), SolveError>
where
    F: Fn(&DiscreteModel) -> Policy,
{
    let mut p_rm = 0.0f64;
    let mut pi_warm: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut kappa = opts.fp_damping;
    let mut prev_move: Option<f64> = None;

    for _ in 0..opts.fp_max_iters {
        trace.push(p_rm);
        let (stats, model) = model_for(p, p_rm)?;
        let policy = make_policy(&model);
        let pi = steady_state_warm(&model, &policy, pi_warm.as_deref())?;
        let rejection = rejection_probabilities(&pi, &policy, &model)?;
        let observed = rejection.p_reject_mr;
        let raw_move = observed - p_rm;
        if let Some(prev) = prev_move {
            if prev * raw_move < 0.0 {
                kappa = (kappa * 0.5).max(0.02);
            }
        }
        prev_move = Some(raw_move);
        let next = p_rm + kappa * raw_move;
        let delta = (next - p_rm).abs();
        if delta < opts.fp_tol {
            let avg_reward = gain_from_pi(&model, &policy, 0.0, &pi);
            return Ok((
                EvaluatedPolicy {
                    p_rm,
                    stats,
                    policy,
                    pi,
                    rejection,
                    avg_reward,
                    converged: true,
                    trace,
                },
                model,
            ));
        }
        pi_warm = Some(pi);
        p_rm = next;
    }

    // Cap reached: evaluate once more at the final iterate and flag it.
    let (stats, model) = model_for(p, p_rm)?;
    let policy = make_policy(&model);
    let pi = steady_state_warm(&model, &policy, pi_warm.as_deref())?;
    let rejection = rejection_probabilities(&pi, &policy, &model)?;
    let avg_reward = gain_from_pi(&model, &policy, 0.0, &pi);
    Ok((
        EvaluatedPolicy {
            p_rm,
            stats,
            policy,
            pi,
            rejection,
            avg_reward,
            converged: false,
            trace,
        },
        model,
    ))
}
