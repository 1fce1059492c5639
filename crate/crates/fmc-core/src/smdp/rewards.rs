//! Reward, cost, sojourn, and constraint functions.
//!
//! All quantities are evaluated on post-action counts. For move events the
//! post-action counts depend on the migration outcome, so sojourn and epoch
//! cost are expectations over the resolution branches; this keeps them
//! consistent with the kernel, which normalizes next-event probabilities by
//! the event rate of the resolved counts.

use crate::config::ModelParams;
use crate::error::ModelError;
use crate::mobility::DistanceStats;

use super::kernel::resolve_action;
use super::state::{occupied, Action, Event, SystemState};

/// Total event rate `lambda_n + lambda_m + (mu + p_m) * #services` on given
/// counts.
pub fn event_rate_of_counts(local: &[u32], remote: &[u32], p: &ModelParams) -> f64 {
    let services: u32 = local.iter().sum::<u32>() + remote.iter().sum::<u32>();
    p.lambda_n + p.mr_arrival_rate() + (p.mu + p.p_m) * services as f64
}

/// Cost rate `sum_c (w_d * s^R_c * d_bar + w_o * C_r * c * (s^L_c + s^R_c))`
/// on given counts.
pub fn cost_rate_of_counts(local: &[u32], remote: &[u32], p: &ModelParams, d_bar: f64) -> f64 {
    let remote_services: u32 = remote.iter().sum();
    p.weight_delay * d_bar * remote_services as f64
        + p.weight_occupancy * p.price_resource * occupied(local, remote) as f64
}

/// Expected sojourn time until the next decision epoch.
pub fn sojourn(s: &SystemState, a: Action, p: &ModelParams, p_rm: f64) -> Result<f64, ModelError> {
    Ok(resolve_action(s, a, p, p_rm)?
        .iter()
        .map(|b| b.prob / event_rate_of_counts(&b.local, &b.remote, p))
        .sum())
}

/// Expected event rate, the reciprocal of the expected sojourn.
pub fn event_rate(s: &SystemState, a: Action, p: &ModelParams, p_rm: f64) -> Result<f64, ModelError> {
    Ok(1.0 / sojourn(s, a, p, p_rm)?)
}

/// Expected cost accrued over the epoch, `E[d * tau]`.
pub(crate) fn expected_epoch_cost(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    d_bar: f64,
    p_rm: f64,
) -> Result<f64, ModelError> {
    Ok(resolve_action(s, a, p, p_rm)?
        .iter()
        .map(|b| {
            b.prob * cost_rate_of_counts(&b.local, &b.remote, p, d_bar)
                / event_rate_of_counts(&b.local, &b.remote, p)
        })
        .sum())
}

/// Sojourn-weighted cost rate; on deterministic resolutions this is exactly
/// the cost rate of the post-action counts.
pub fn cost_rate(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    d_bar: f64,
    p_rm: f64,
) -> Result<f64, ModelError> {
    Ok(expected_epoch_cost(s, a, p, d_bar, p_rm)? / sojourn(s, a, p, p_rm)?)
}

/// Lump income `g(s, a)`: income for finishes and (expected) completed
/// migrations; losses for NR rejections, migration overhead, and the
/// interruption risk charged when an MR is rejected.
pub fn lump_income(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    stats: &DistanceStats,
    p_rm: f64,
) -> f64 {
    match (s.event, a) {
        (Event::FinishLocal(_) | Event::FinishRemote(_), _) => p.income_finish,
        (Event::MoveLocal(_) | Event::MoveRemote(_), _) => p.income_migrate * (1.0 - p_rm),
        (Event::ArrivalNr, Action::Reject) => -p.loss_reject_nr,
        (Event::ArrivalMr, Action::Accept(_)) => -p.cost_migrate,
        (Event::ArrivalMr, Action::Reject) => {
            -0.5 * p.loss_interrupt * stats.boundary_mass()
        }
        _ => 0.0,
    }
}

/// Epoch reward `r(s, a) = g(s, a) - E[d(s, a) * tau]`.
pub fn reward(
    s: &SystemState,
    a: Action,
    p: &ModelParams,
    stats: &DistanceStats,
    p_rm: f64,
) -> Result<f64, ModelError> {
    Ok(lump_income(s, a, p, stats, p_rm)
        - expected_epoch_cost(s, a, p, stats.mean_distance, p_rm)?)
}

/// Constraint weight `f(s, a)`: the rejection of an NR (MR) counts with
/// weight `w_n` (`w_m`).
pub fn constraint_value(s: &SystemState, a: Action, p: &ModelParams) -> f64 {
    match (s.event, a) {
        (Event::ArrivalNr, Action::Reject) => p.weight_nr,
        (Event::ArrivalMr, Action::Reject) => p.weight_mr,
        _ => 0.0,
    }
}

/// Lagrange reward `r_beta(s, a) = r(s, a) - beta * f(s, a)`.
pub fn lagrange_reward(
    s: &SystemState,
    a: Action,
    beta: f64,
    p: &ModelParams,
    stats: &DistanceStats,
    p_rm: f64,
) -> Result<f64, ModelError> {
    Ok(reward(s, a, p, stats, p_rm)? - beta * constraint_value(s, a, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(boundary: f64, mean: f64, p_rm: f64) -> DistanceStats {
        DistanceStats {
            p_rm,
            occupancy: vec![1.0 - boundary, 0.0, 0.0, boundary],
            mean_distance: mean,
            p_interrupt: 0.0,
        }
    }

    fn base_params() -> ModelParams {
        ModelParams {
            lambda_n: 2.0,
            mu: 0.5,
            p_m: 0.4,
            capacity_b: 4,
            max_alloc_c: 2,
            ..ModelParams::default()
        }
    }

    fn state(local: Vec<u32>, remote: Vec<u32>, event: Event) -> SystemState {
        SystemState {
            local,
            remote,
            event,
        }
    }

    #[test]
    fn sojourn_on_empty_dc() {
        let p = base_params();
        let s = state(vec![0, 0], vec![0, 0], Event::ArrivalNr);
        let y = sojourn(&s, Action::Reject, &p, 0.0).unwrap();
        assert!((1.0 / y - 2.4).abs() < 1e-12);
        assert!((y - 1.0 / 2.4).abs() < 1e-12);
        let rate = event_rate(&s, Action::Accept(1), &p, 0.0).unwrap();
        assert!((rate - 3.3).abs() < 1e-12);
    }

    #[test]
    fn event_rate_is_positive_everywhere() {
        let p = base_params();
        let space = crate::smdp::state::enumerate_states(&p).unwrap();
        for s in &space.states {
            for a in crate::smdp::state::feasible_actions(s, &p) {
                assert!(event_rate(s, a, &p, 0.3).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn lump_income_branches() {
        let p = ModelParams {
            income_finish: 10.0,
            income_migrate: 5.0,
            loss_reject_nr: 4.0,
            cost_migrate: 2.0,
            loss_interrupt: 10.0,
            ..base_params()
        };
        let st = stats(0.03, 0.5, 0.2);

        let finish = state(vec![1, 0], vec![0, 0], Event::FinishLocal(1));
        assert_eq!(lump_income(&finish, Action::Observe, &p, &st, 0.2), 10.0);

        let mv = state(vec![0, 0], vec![0, 1], Event::MoveRemote(2));
        assert!((lump_income(&mv, Action::Observe, &p, &st, 0.2) - 4.0).abs() < 1e-12);

        let rej_mr = state(vec![0, 0], vec![0, 0], Event::ArrivalMr);
        assert!(
            (lump_income(&rej_mr, Action::Reject, &p, &st, 0.2) + 0.15).abs() < 1e-12
        );

        let rej_nr = state(vec![0, 0], vec![0, 0], Event::ArrivalNr);
        assert_eq!(lump_income(&rej_nr, Action::Reject, &p, &st, 0.2), -4.0);
        assert_eq!(lump_income(&rej_nr, Action::Accept(1), &p, &st, 0.2), 0.0);
    }

    #[test]
    fn cost_rate_example() {
        let p = ModelParams {
            weight_delay: 0.5,
            weight_occupancy: 0.5,
            price_resource: 1.0,
            ..base_params()
        };
        // s1_L = 2, s2_R = 1: delay term 0.5*1*1.5, occupancy term 0.5*1*(2+2).
        let v = cost_rate_of_counts(&[2, 0], &[0, 1], &p, 1.5);
        assert!((v - 2.75).abs() < 1e-12);

        // Same counts reached as post-action counts of a Reject.
        let s = state(vec![2, 0], vec![0, 1], Event::ArrivalNr);
        let via_op = cost_rate(&s, Action::Reject, &p, 1.5, 0.2).unwrap();
        assert!((via_op - 2.75).abs() < 1e-12);
    }

    #[test]
    fn zero_delay_weight_reduces_to_occupancy_pricing() {
        let p = ModelParams {
            weight_delay: 0.0,
            weight_occupancy: 1.0,
            price_resource: 2.0,
            ..base_params()
        };
        let v = cost_rate_of_counts(&[1, 1], &[1, 0], &p, 3.0);
        assert!((v - 2.0 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_price_doubles_cost_term() {
        let p1 = ModelParams {
            weight_delay: 0.0,
            weight_occupancy: 1.0,
            price_resource: 1.0,
            ..base_params()
        };
        let p2 = ModelParams {
            price_resource: 2.0,
            ..p1.clone()
        };
        let s = state(vec![1, 0], vec![0, 1], Event::ArrivalNr);
        let st = stats(0.0, 0.0, 0.2);
        let g = lump_income(&s, Action::Reject, &p1, &st, 0.2);
        let r1 = reward(&s, Action::Reject, &p1, &st, 0.2).unwrap();
        let r2 = reward(&s, Action::Reject, &p2, &st, 0.2).unwrap();
        assert!(((g - r2) - 2.0 * (g - r1)).abs() < 1e-12);
    }

    #[test]
    fn reward_composes_income_and_cost() {
        let p = base_params();
        let st = stats(0.05, 1.2, 0.3);
        let s = state(vec![0, 1], vec![1, 0], Event::ArrivalNr);
        for a in crate::smdp::state::feasible_actions(&s, &p) {
            let direct = reward(&s, a, &p, &st, 0.3).unwrap();
            let composed = lump_income(&s, a, &p, &st, 0.3)
                - cost_rate(&s, a, &p, st.mean_distance, 0.3).unwrap()
                    * sojourn(&s, a, &p, 0.3).unwrap();
            assert!((direct - composed).abs() < 1e-12);
        }
        // Empty DC, reject an NR: no running cost, pure lump loss.
        let empty = state(vec![0, 0], vec![0, 0], Event::ArrivalNr);
        let r = reward(&empty, Action::Reject, &p, &st, 0.3).unwrap();
        assert!((r + p.loss_reject_nr).abs() < 1e-12);
    }

    #[test]
    fn constraint_branches() {
        let p = ModelParams {
            weight_nr: 0.6,
            weight_mr: 0.4,
            ..base_params()
        };
        let nr = state(vec![0, 0], vec![0, 0], Event::ArrivalNr);
        let mr = state(vec![0, 0], vec![0, 0], Event::ArrivalMr);
        let fin = state(vec![0, 0], vec![0, 1], Event::FinishRemote(2));
        assert_eq!(constraint_value(&nr, Action::Reject, &p), 0.6);
        assert_eq!(constraint_value(&mr, Action::Reject, &p), 0.4);
        assert_eq!(constraint_value(&mr, Action::Accept(2), &p), 0.0);
        assert_eq!(constraint_value(&fin, Action::Observe, &p), 0.0);
    }

    #[test]
    fn lagrange_reward_penalizes_rejections() {
        let p = base_params();
        let st = stats(0.0, 0.0, 0.0);
        let nr = state(vec![0, 0], vec![0, 0], Event::ArrivalNr);
        let plain = reward(&nr, Action::Reject, &p, &st, 0.0).unwrap();
        let at0 = lagrange_reward(&nr, Action::Reject, 0.0, &p, &st, 0.0).unwrap();
        let at2 = lagrange_reward(&nr, Action::Reject, 2.0, &p, &st, 0.0).unwrap();
        assert_eq!(plain, at0);
        assert!((at2 - (plain - 2.0 * p.weight_nr)).abs() < 1e-12);
        // Accepting carries no constraint weight for any beta.
        let acc0 = lagrange_reward(&nr, Action::Accept(1), 0.0, &p, &st, 0.0).unwrap();
        let acc9 = lagrange_reward(&nr, Action::Accept(1), 9.0, &p, &st, 0.0).unwrap();
        assert_eq!(acc0, acc9);
    }
}
