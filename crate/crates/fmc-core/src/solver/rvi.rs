//! Relative value iteration on the uniformized model.

use crate::error::SolveError;
use crate::smdp::DiscreteModel;

use super::{Policy, RviOutcome, SolverOptions};

/// Solves the average-reward Bellman equations for the Lagrange reward at
/// multiplier `beta`. Stops when the span seminorm of successive value
/// differences drops below `opts.rvi_tol`; values are normalized so state 0
/// has value 0 after every sweep. Ties in the argmax break toward the lowest
/// action index (`Reject` before `Accept(1)` before `Accept(2)` ..).
pub fn relative_value_iteration(
    m: &DiscreteModel,
    beta: f64,
    opts: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<RviOutcome, SolveError> {
    let n = m.n_states();
    assert!(n > 0);

    let mut v = match warm_start {
        Some(w) if w.len() == n => w.to_vec(),
        _ => vec![0.0; n],
    };
    let v0 = v[0];
    for x in v.iter_mut() {
        *x -= v0;
    }

    let rtil: Vec<Vec<f64>> = (0..n)
        .map(|si| {
            (0..m.actions(si).len())
                .map(|ai| m.transformed_reward(si, ai, beta))
                .collect()
        })
        .collect();

    let mut w = vec![0.0; n];
    let mut gain = 0.0;
    let mut converged = false;
    let mut sweeps = 0;
    let mut span = f64::INFINITY;

    while sweeps < opts.rvi_max_sweeps {
        sweeps += 1;
        let mut d_min = f64::INFINITY;
        let mut d_max = f64::NEG_INFINITY;
        for si in 0..n {
            let mut best = f64::NEG_INFINITY;
            for (ai, r) in rtil[si].iter().enumerate() {
                let mut acc = *r;
                for &(t, p) in m.tilde_row(si, ai) {
                    acc += p * v[t];
                }
                if acc > best {
                    best = acc;
                }
            }
            w[si] = best;
            let d = best - v[si];
            if d < d_min {
                d_min = d;
            }
            if d > d_max {
                d_max = d;
            }
        }
        span = d_max - d_min;
        let w_ref = w[0];
        for si in 0..n {
            v[si] = w[si] - w_ref;
        }
        if span < opts.rvi_tol {
            gain = 0.5 * (d_min + d_max);
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(SolveError::RviNotConverged { sweeps, span });
    }

    // Extract the greedy policy of the converged values and measure the
    // Bellman residual of the returned (policy, values, gain) triple.
    let mut actions = Vec::with_capacity(n);
    let mut residual = 0.0f64;
    for si in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut best_ai = 0;
        for (ai, r) in rtil[si].iter().enumerate() {
            let mut acc = *r;
            for &(t, p) in m.tilde_row(si, ai) {
                acc += p * v[t];
            }
            if acc > best {
                best = acc;
                best_ai = ai;
            }
        }
        actions.push(m.actions(si)[best_ai].action);
        residual = residual.max((best - v[si] - gain).abs());
    }

    Ok(RviOutcome {
        policy: Policy { actions },
        gain,
        values: v,
        sweeps,
        span,
        residual,
    })
}
