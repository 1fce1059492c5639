//! Action resolution and the embedded transition kernel.
//!
//! An action resolves the epoch's event into post-action counts; the next
//! event is then drawn with probabilities proportional to the competing
//! event rates evaluated on those counts. Move events resolve
//! probabilistically on the migration outcome: the destination rejects with
//! probability `p_rm`, in which case a departing local service stays in the
//! DC as a remote one, and a moving remote service stays as it is. Distance-
//! driven interruptions are charged in the income function only and do not
//! alter count dynamics.

use crate::config::ModelParams;
use crate::error::ModelError;

use super::state::{occupied, Action, Event, SystemState};

/// One post-action count outcome with its resolution probability.
#[derive(Debug, Clone)]
pub(crate) struct Branch {
    pub local: Vec<u32>,
    pub remote: Vec<u32>,
    pub prob: f64,
}

fn infeasible(s: &SystemState, a: Action) -> ModelError {
    ModelError::InfeasibleAction {
        state: s.descriptor(),
        action: a.to_string(),
    }
}

/// Resolves `(state, action)` into post-action count branches. Zero-probability
/// branches are dropped.
pub(crate) fn resolve_action(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    p_rm: f64,
) -> Result<Vec<Branch>, ModelError> {
    let c_idx = |c: u32| c as usize - 1;
    let branch = |local: Vec<u32>, remote: Vec<u32>, prob: f64| Branch {
        local,
        remote,
        prob,
    };

    let branches = match (s.event, a) {
        (Event::ArrivalNr | Event::ArrivalMr, Action::Reject) => {
            vec![branch(s.local.clone(), s.remote.clone(), 1.0)]
        }
        (Event::ArrivalNr | Event::ArrivalMr, Action::Accept(c)) => {
            if c < 1 || c > p.max_alloc_c || s.occupied() + c > p.capacity_b {
                return Err(infeasible(s, a));
            }
            let mut local = s.local.clone();
            local[c_idx(c)] += 1;
            vec![branch(local, s.remote.clone(), 1.0)]
        }
        (Event::FinishLocal(c), Action::Observe) => {
            if s.local[c_idx(c)] == 0 {
                return Err(infeasible(s, a));
            }
            let mut local = s.local.clone();
            local[c_idx(c)] -= 1;
            vec![branch(local, s.remote.clone(), 1.0)]
        }
        (Event::FinishRemote(c), Action::Observe) => {
            if s.remote[c_idx(c)] == 0 {
                return Err(infeasible(s, a));
            }
            let mut remote = s.remote.clone();
            remote[c_idx(c)] -= 1;
            vec![branch(s.local.clone(), remote, 1.0)]
        }
        (Event::MoveLocal(c), Action::Observe) => {
            if s.local[c_idx(c)] == 0 {
                return Err(infeasible(s, a));
            }
            // Accepted elsewhere: the VM follows the terminal and leaves this
            // DC. Rejected: the VM stays here and the service becomes remote.
            let mut out = Vec::new();
            if p_rm < 1.0 {
                let mut local = s.local.clone();
                local[c_idx(c)] -= 1;
                out.push(branch(local, s.remote.clone(), 1.0 - p_rm));
            }
            if p_rm > 0.0 {
                let mut local = s.local.clone();
                let mut remote = s.remote.clone();
                local[c_idx(c)] -= 1;
                remote[c_idx(c)] += 1;
                out.push(branch(local, remote, p_rm));
            }
            out
        }
        (Event::MoveRemote(c), Action::Observe) => {
            if s.remote[c_idx(c)] == 0 {
                return Err(infeasible(s, a));
            }
            // Accepted by the terminal's new local DC: the remote VM is
            // released here. Rejected: counts unchanged.
            let mut out = Vec::new();
            if p_rm < 1.0 {
                let mut remote = s.remote.clone();
                remote[c_idx(c)] -= 1;
                out.push(branch(s.local.clone(), remote, 1.0 - p_rm));
            }
            if p_rm > 0.0 {
                out.push(branch(s.local.clone(), s.remote.clone(), p_rm));
            }
            out
        }
        _ => return Err(infeasible(s, a)),
    };
    Ok(branches)
}

/// Next-event rates on given counts, in enumeration order.
fn event_rates(local: &[u32], remote: &[u32], p: &ModelParams) -> Vec<(Event, f64)> {
    let mut rates = vec![
        (Event::ArrivalNr, p.lambda_n),
        (Event::ArrivalMr, p.mr_arrival_rate()),
    ];
    for (i, (&l, &r)) in local.iter().zip(remote).enumerate() {
        let c = i as u32 + 1;
        if l >= 1 {
            rates.push((Event::FinishLocal(c), l as f64 * p.mu));
            rates.push((Event::MoveLocal(c), l as f64 * p.p_m));
        }
        if r >= 1 {
            rates.push((Event::FinishRemote(c), r as f64 * p.mu));
            rates.push((Event::MoveRemote(c), r as f64 * p.p_m));
        }
    }
    rates
}

/// Successor states of one resolved branch with their next-event
/// probabilities (not yet weighted by the branch probability).
pub(crate) fn branch_successors(b: &Branch, p: &ModelParams) -> Vec<(SystemState, f64)> {
    debug_assert!(occupied(&b.local, &b.remote) <= p.capacity_b);
    let rates = event_rates(&b.local, &b.remote, p);
    let gamma: f64 = rates.iter().map(|(_, r)| r).sum();
    rates
        .into_iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(event, rate)| {
            (
                SystemState {
                    local: b.local.clone(),
                    remote: b.remote.clone(),
                    event,
                },
                rate / gamma,
            )
        })
        .collect()
}

/// Embedded one-step transition distribution for `(s, a)`: every successor
/// state with its probability. Probabilities sum to 1.
pub fn transitions(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    p_rm: f64,
) -> Result<Vec<(SystemState, f64)>, ModelError> {
    let mut out = Vec::new();
    for b in resolve_action(s, a, p, p_rm)? {
        for (next, prob) in branch_successors(&b, p) {
            out.push((next, b.prob * prob));
        }
    }
    Ok(out)
}
