//! Multiplier search for the rejection-probability constraint.
//!
//! For a fixed multiplier `beta`, value iteration yields the policy
//! maximizing the Lagrangian gain; its stationary distribution gives the
//! weighted per-epoch rejection probability. Larger multipliers penalize
//! rejections harder and weakly decrease that probability, so the search
//! moves `beta` up while the constraint is violated and down while it is
//! slack (`beta^{n+1} = max(0, beta^n + (alpha/n)(pr - rho))`), halving the
//! step scale whenever the violation changes sign. With deterministic
//! policies the achievable rejection levels form a step function of `beta`;
//! when `rho` falls inside a jump the search settles on the multiplier at the
//! jump and returns the best feasible policy seen.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::smdp::{Action, DiscreteModel, Event};

use super::rvi::relative_value_iteration;
use super::{gain_from_pi, steady_state_warm, Policy, SolveOutcome, SolverOptions};

/// Rejection probabilities of a policy under its stationary distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectionStats {
    /// Per-epoch weighted rejection probability `sum_s pi(s) f(s, d(s))`.
    pub weighted: f64,
    /// `Pr[reject | NR arrival]`.
    pub p_reject_nr: f64,
    /// `Pr[reject | MR arrival]`.
    pub p_reject_mr: f64,
    /// Stationary share of NR-arrival epochs.
    pub epoch_share_nr: f64,
    /// Stationary share of MR-arrival epochs.
    pub epoch_share_mr: f64,
}

/// One multiplier-search iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaStep {
    pub beta: f64,
    pub weighted: f64,
    pub p_reject_nr: f64,
    pub p_reject_mr: f64,
    pub gain: f64,
}

/// Computes weighted and conditional rejection probabilities from a
/// stationary distribution.
pub fn rejection_probabilities(
    pi: &[f64],
    pol: &Policy,
    m: &DiscreteModel,
) -> Result<RejectionStats, SolveError> {
    let p = m.params();
    let mut weighted = 0.0;
    let (mut mass_nr, mut rej_nr) = (0.0, 0.0);
    let (mut mass_mr, mut rej_mr) = (0.0, 0.0);
    for (si, mass) in pi.iter().enumerate() {
        let s = m.space().state(si);
        let rejected = pol.action(si) == Action::Reject;
        match s.event {
            Event::ArrivalNr => {
                mass_nr += mass;
                if rejected {
                    rej_nr += mass;
                    weighted += mass * p.weight_nr;
                }
            }
            Event::ArrivalMr => {
                mass_mr += mass;
                if rejected {
                    rej_mr += mass;
                    weighted += mass * p.weight_mr;
                }
            }
            _ => {}
        }
    }
    // Mass below this is numerical residue of unreachable states, not
    // genuine arrival traffic.
    const MASS_FLOOR: f64 = 1e-13;
    if mass_nr <= MASS_FLOOR {
        return Err(SolveError::ZeroArrivalMass("NR"));
    }
    let p_reject_mr = if mass_mr > MASS_FLOOR {
        rej_mr / mass_mr
    } else {
        // No observable MR traffic: the conditional probability is vacuous
        // and the mobility fixed point wants 0 here.
        0.0
    };
    Ok(RejectionStats {
        weighted,
        p_reject_nr: rej_nr / mass_nr,
        p_reject_mr,
        epoch_share_nr: mass_nr,
        epoch_share_mr: mass_mr,
    })
}

/// Everything evaluated at one multiplier value.
#[derive(Clone)]
struct BetaStepInternal {
    beta: f64,
    gain: f64,
    gain_beta0: f64,
    policy: Policy,
    values: Vec<f64>,
    pi: Vec<f64>,
    rejection: RejectionStats,
    sweeps: usize,
}

impl BetaStepInternal {
    fn public_entry(&self) -> BetaStep {
        BetaStep {
            beta: self.beta,
            weighted: self.rejection.weighted,
            p_reject_nr: self.rejection.p_reject_nr,
            p_reject_mr: self.rejection.p_reject_mr,
            gain: self.gain,
        }
    }
}

/// Solves the constrained problem on a fixed model.
pub fn lagrangian_solve(
    m: &DiscreteModel,
    rho: f64,
    opts: &SolverOptions,
) -> Result<SolveOutcome, SolveError> {
    lagrangian_solve_warm(m, rho, opts, opts.beta_init, None)
}

pub(crate) fn lagrangian_solve_warm(
    m: &DiscreteModel,
    rho: f64,
    opts: &SolverOptions,
    beta_init: f64,
    warm_values: Option<&[f64]>,
) -> Result<SolveOutcome, SolveError> {
    assert!((0.0..=1.0).contains(&rho), "rho outside [0, 1]");
    assert!(opts.eps > 0.0 && opts.alpha > 0.0);

    let mut beta = beta_init.max(0.0);
    let mut alpha = opts.alpha;
    let mut values: Option<Vec<f64>> = warm_values.map(|v| v.to_vec());
    let mut pi_warm: Option<Vec<f64>> = None;
    let mut trace: Vec<BetaStep> = Vec::new();
    let mut best: Option<BetaStepInternal> = None;
    let mut prev_sign: Option<bool> = None;
    let mut prev_policy: Option<Vec<Action>> = None;
    let mut stall = 0usize;
    let mut sweeps_total = 0usize;
    // Bracket around beta*: largest violating and smallest feasible
    // multiplier seen so far.
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;

    let mut n = 0usize;
    while n < opts.max_multiplier_iters {
        n += 1;
        let step = evaluate_beta(m, beta, opts, values.as_deref(), pi_warm.as_deref())?;
        sweeps_total += step.sweeps;
        values = Some(step.values.clone());
        pi_warm = Some(step.pi.clone());
        trace.push(step.public_entry());

        let delta = step.rejection.weighted - rho;
        let feasible = delta <= opts.eps;
        if feasible {
            hi = Some(hi.map_or(beta, |h: f64| h.min(beta)));
            if best
                .as_ref()
                .map(|b| step.gain_beta0 > b.gain_beta0)
                .unwrap_or(true)
            {
                best = Some(step.clone());
            }
        } else {
            lo = Some(lo.map_or(beta, |l: f64| l.max(beta)));
        }

        // Constraint met within tolerance, or slack at beta = 0.
        if delta.abs() < opts.eps || (beta == 0.0 && delta <= 0.0) {
            return Ok(finish(m, step, trace, n, sweeps_total, true));
        }

        // Violating with a frozen policy and no feasible point in sight:
        // probe a large multiplier to distinguish "slow" from "infeasible".
        if !feasible && hi.is_none() {
            let same = prev_policy
                .as_ref()
                .map(|p| *p == step.policy.actions)
                .unwrap_or(false);
            stall = if same { stall + 1 } else { 0 };
            if stall >= opts.stall_limit {
                let probe_beta = (beta.max(1.0)) * 1000.0;
                let probe =
                    evaluate_beta(m, probe_beta, opts, values.as_deref(), pi_warm.as_deref())?;
                sweeps_total += probe.sweeps;
                trace.push(probe.public_entry());
                if probe.rejection.weighted > rho + opts.eps {
                    return Err(SolveError::InfeasibleConstraint {
                        rho,
                        achieved: probe.rejection.weighted,
                    });
                }
                hi = Some(probe_beta);
                best = Some(probe.clone());
                stall = 0;
            }
        } else {
            stall = 0;
        }
        prev_policy = Some(step.policy.actions.clone());

        beta = match (lo, hi) {
            // Bracket established: bisect toward the jump multiplier.
            (Some(l), Some(h)) if l < h => {
                if h - l < opts.beta_step_tol.max(1e-9 * h) {
                    // The multiplier settled; rho sits inside a jump of the
                    // achievable rejection levels. Best feasible policy wins.
                    let best_step = best.expect("bracket implies a feasible iterate");
                    return Ok(finish(m, best_step, trace, n, sweeps_total, true));
                }
                0.5 * (l + h)
            }
            // No bracket yet: follow the sign-corrected update
            // beta <- max(0, beta + (alpha/n) (pr - rho)).
            _ => {
                let sign = delta > 0.0;
                if let Some(prev) = prev_sign {
                    if prev != sign {
                        alpha *= 0.5;
                    }
                }
                prev_sign = Some(sign);
                let next_beta = (beta + (alpha / n as f64) * delta).max(0.0);
                if (next_beta - beta).abs() < opts.beta_step_tol {
                    if let Some(best_step) = best {
                        return Ok(finish(m, best_step, trace, n, sweeps_total, true));
                    }
                    return Err(SolveError::InfeasibleConstraint {
                        rho,
                        achieved: step.rejection.weighted,
                    });
                }
                next_beta
            }
        };
    }

    match best {
        Some(best_step) => Ok(finish(m, best_step, trace, n, sweeps_total, false)),
        None => Err(SolveError::MultiplierNotConverged {
            iters: n,
            trace: trace.iter().map(|t| t.beta).collect(),
        }),
    }
}

fn evaluate_beta(
    m: &DiscreteModel,
    beta: f64,
    opts: &SolverOptions,
    warm_values: Option<&[f64]>,
    warm_pi: Option<&[f64]>,
) -> Result<BetaStepInternal, SolveError> {
    let rvi = relative_value_iteration(m, beta, opts, warm_values)?;
    let pi = steady_state_warm(m, &rvi.policy, warm_pi)?;
    let rejection = rejection_probabilities(&pi, &rvi.policy, m)?;
    let gain_beta0 = gain_from_pi(m, &rvi.policy, 0.0, &pi);
    Ok(BetaStepInternal {
        beta,
        gain: rvi.gain,
        gain_beta0,
        policy: rvi.policy,
        values: rvi.values,
        pi,
        rejection,
        sweeps: rvi.sweeps,
    })
}

fn finish(
    m: &DiscreteModel,
    step: BetaStepInternal,
    trace: Vec<BetaStep>,
    iterations: usize,
    sweeps_total: usize,
    converged: bool,
) -> SolveOutcome {
    SolveOutcome {
        policy: step.policy,
        theta: step.gain,
        avg_reward: step.gain_beta0,
        values: step.values,
        beta: step.beta,
        rejection: step.rejection,
        model_p_rm: m.stats().p_rm,
        beta_trace: trace,
        multiplier_iterations: iterations,
        multiplier_converged: converged,
        fixed_point_trace: Vec::new(),
        fixed_point_converged: true,
        rvi_sweeps_total: sweeps_total,
    }
}
