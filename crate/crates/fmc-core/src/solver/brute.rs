//! Exhaustive policy enumeration, the optimality oracle for small instances.

use crate::error::SolveError;
use crate::smdp::DiscreteModel;

use super::{policy_gain, Policy};

const MAX_DECISION_STATES: usize = 12;
const MAX_POLICIES: f64 = 1_000_000.0;

/// Enumerates every stationary feasible policy and returns the one with the
/// best semi-Markov gain at multiplier `beta`. Only decision states (states
/// with more than one feasible action) carry choices; all others take their
/// single action. Refuses instances with more than 12 decision states.
pub fn brute_force_optimal(
    m: &DiscreteModel,
    beta: f64,
) -> Result<(Policy, f64), SolveError> {
    let n = m.n_states();
    let decision_states: Vec<usize> = (0..n).filter(|&si| m.actions(si).len() > 1).collect();

    let mut combos = 1.0f64;
    for &si in &decision_states {
        combos *= m.actions(si).len() as f64;
    }
    if decision_states.len() > MAX_DECISION_STATES || combos > MAX_POLICIES {
        return Err(SolveError::TooLargeForBruteForce { policies: combos });
    }

    // Base policy: the first feasible action everywhere.
    let mut actions: Vec<_> = (0..n).map(|si| m.actions(si)[0].action).collect();
    let mut odometer = vec![0usize; decision_states.len()];
    let mut best: Option<(Policy, f64)> = None;

    loop {
        for (k, &si) in decision_states.iter().enumerate() {
            actions[si] = m.actions(si)[odometer[k]].action;
        }
        let policy = Policy {
            actions: actions.clone(),
        };
        let gain = policy_gain(m, &policy, beta)?;
        let better = match &best {
            Some((_, g)) => gain > *g,
            None => true,
        };
        if better {
            best = Some((policy, gain));
        }

        // Advance the odometer.
        let mut k = 0;
        loop {
            if k == decision_states.len() {
                return Ok(best.expect("at least one policy enumerated"));
            }
            odometer[k] += 1;
            if odometer[k] < m.actions(decision_states[k]).len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelParams;
    use crate::mobility::{build_distance_chain, distance_statistics};
    use crate::solver::{relative_value_iteration, SolverOptions};

    fn model(p: &ModelParams, p_rm: f64) -> DiscreteModel {
        let stats = distance_statistics(&build_distance_chain(p, p_rm)).unwrap();
        DiscreteModel::build(p, &stats).unwrap()
    }

    #[test]
    fn matches_value_iteration_on_tiny_instances() {
        let opts = SolverOptions {
            rvi_tol: 1e-11,
            ..SolverOptions::default()
        };
        for (b, c) in [(1u32, 1u32), (2, 1)] {
            let p = ModelParams {
                capacity_b: b,
                max_alloc_c: c,
                ..ModelParams::default()
            };
            let m = model(&p, 0.2);
            for beta in [0.0, 1.0, 5.0] {
                let (_, brute_gain) = brute_force_optimal(&m, beta).unwrap();
                let rvi = relative_value_iteration(&m, beta, &opts, None).unwrap();
                assert!(
                    (brute_gain - rvi.gain).abs() < 1e-8,
                    "B={b} C={c} beta={beta}: brute {brute_gain} vs rvi {}",
                    rvi.gain
                );
            }
        }
    }

    #[test]
    fn prefers_higher_reward_action() {
        // With a punishing NR rejection loss and free capacity, the optimal
        // policy must accept NRs at the empty state.
        let p = ModelParams {
            capacity_b: 1,
            max_alloc_c: 1,
            loss_reject_nr: 50.0,
            ..ModelParams::default()
        };
        let m = model(&p, 0.0);
        let (pol, _) = brute_force_optimal(&m, 0.0).unwrap();
        let empty_nr = m
            .space()
            .states
            .iter()
            .position(|s| {
                s.occupied() == 0 && s.event == crate::smdp::Event::ArrivalNr
            })
            .unwrap();
        assert_eq!(pol.action(empty_nr), crate::smdp::Action::Accept(1));
    }

    #[test]
    fn refuses_oversized_instances() {
        let p = ModelParams::default(); // B = 8, C = 3
        let m = model(&p, 0.1);
        assert!(matches!(
            brute_force_optimal(&m, 0.0),
            Err(SolveError::TooLargeForBruteForce { .. })
        ));
    }
}
