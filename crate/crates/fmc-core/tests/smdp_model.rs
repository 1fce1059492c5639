//! Model-construction oracles: independent state enumeration, kernel
//! partition properties, and the uniformization equivalence.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use fmc_core::config::ModelParams;
use fmc_core::mobility::{build_distance_chain, distance_statistics};
use fmc_core::smdp::{
    enumerate_states, feasible_actions, transitions, Action, DiscreteModel, Event, SystemState,
};
use fmc_core::solver::{policy_gain, steady_state, uniformized_policy_gain, Policy};

fn params(b: u32, c: u32) -> ModelParams {
    ModelParams {
        capacity_b: b,
        max_alloc_c: c,
        ..ModelParams::default()
    }
}

fn model(p: &ModelParams, p_rm: f64) -> DiscreteModel {
    let stats = distance_statistics(&build_distance_chain(p, p_rm)).unwrap();
    DiscreteModel::build(p, &stats).unwrap()
}

/// Independent generate-and-filter enumeration for C = 3: six nested count
/// loops with rejection, then the event-consistency filter.
fn naive_space_c3(b: u32) -> HashSet<SystemState> {
    let mut out = HashSet::new();
    for l1 in 0..=b {
        for l2 in 0..=b {
            for l3 in 0..=b {
                for r1 in 0..=b {
                    for r2 in 0..=b {
                        for r3 in 0..=b {
                            let occ = l1 + 2 * l2 + 3 * l3 + r1 + 2 * r2 + 3 * r3;
                            if occ > b {
                                continue;
                            }
                            let local = vec![l1, l2, l3];
                            let remote = vec![r1, r2, r3];
                            let mut events = vec![Event::ArrivalNr, Event::ArrivalMr];
                            for (c, (l, r)) in
                                local.iter().zip(&remote).enumerate().map(|(i, lr)| (i as u32 + 1, lr))
                            {
                                if *l >= 1 {
                                    events.push(Event::FinishLocal(c));
                                    events.push(Event::MoveLocal(c));
                                }
                                if *r >= 1 {
                                    events.push(Event::FinishRemote(c));
                                    events.push(Event::MoveRemote(c));
                                }
                            }
                            for event in events {
                                out.insert(SystemState {
                                    local: local.clone(),
                                    remote: remote.clone(),
                                    event,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn default_instance_size_matches_naive_enumeration() {
    let p = params(8, 3);
    let space = enumerate_states(&p).unwrap();
    let naive = naive_space_c3(8);
    assert_eq!(space.len(), naive.len());
    for s in &space.states {
        assert!(naive.contains(s));
    }
}

#[test]
fn kernel_rows_partition_unity_across_full_space() {
    let p = params(8, 3);
    for p_rm in [0.0, 0.33, 1.0] {
        let space = enumerate_states(&p).unwrap();
        for s in &space.states {
            for a in feasible_actions(s, &p) {
                let row = transitions(s, a, &p, p_rm).unwrap();
                let total: f64 = row.iter().map(|(_, pr)| pr).sum();
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "row sum {total} at {s:?} {a:?} p_rm {p_rm}"
                );
                for (next, pr) in &row {
                    assert!(*pr > 0.0);
                    assert!(next.occupied() <= p.capacity_b, "capacity violated");
                    assert!(space.index_of(next).is_some());
                }
            }
        }
    }
}

fn random_feasible_policy(m: &DiscreteModel, rng: &mut impl Rng) -> Policy {
    let actions = (0..m.n_states())
        .map(|si| {
            let feasible = m.actions(si);
            feasible[rng.random_range(0..feasible.len())].action
        })
        .collect();
    Policy { actions }
}

#[test]
fn uniformization_preserves_stationary_gain_on_tiny_instance() {
    let p = params(1, 1);
    let m = model(&p, 0.2);
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for _ in 0..4 {
        let pol = random_feasible_policy(&m, &mut rng);
        let ratio = policy_gain(&m, &pol, 0.0).unwrap();
        let unif = uniformized_policy_gain(&m, &pol, 0.0).unwrap();
        assert!(
            (ratio - unif).abs() < 1e-8,
            "ratio {ratio} vs uniformized {unif}"
        );
    }
}

#[test]
fn steady_state_matches_chain_simulation() {
    // Long-run occupancy frequencies of the embedded chain, batched for a
    // Monte-Carlo error estimate.
    let p = params(1, 1);
    let m = model(&p, 0.25);
    let pol = Policy {
        actions: (0..m.n_states())
            .map(|si| {
                let s = m.space().state(si);
                if !s.event.is_arrival() {
                    Action::Observe
                } else if s.occupied() == 0 {
                    Action::Accept(1)
                } else {
                    Action::Reject
                }
            })
            .collect(),
    };
    let pi = steady_state(&m, &pol).unwrap();

    let rows: Vec<&[(usize, f64)]> = (0..m.n_states())
        .map(|si| {
            let a = pol.action(si);
            m.actions(si)
                .iter()
                .find(|d| d.action == a)
                .unwrap()
                .kernel
                .as_slice()
        })
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let n_batches = 10usize;
    let batch_len = 1_000_000u64;
    let mut state = 0usize;
    let mut batch_freq = vec![vec![0.0f64; m.n_states()]; n_batches];
    for freq in batch_freq.iter_mut() {
        let mut counts = vec![0u64; m.n_states()];
        for _ in 0..batch_len {
            counts[state] += 1;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = state;
            for &(t, pr) in rows[state] {
                acc += pr;
                if u < acc {
                    next = t;
                    break;
                }
            }
            state = next;
        }
        for (f, c) in freq.iter_mut().zip(&counts) {
            *f = *c as f64 / batch_len as f64;
        }
    }

    for si in 0..m.n_states() {
        let mean: f64 = batch_freq.iter().map(|b| b[si]).sum::<f64>() / n_batches as f64;
        let var: f64 = batch_freq
            .iter()
            .map(|b| (b[si] - mean) * (b[si] - mean))
            .sum::<f64>()
            / (n_batches as f64 - 1.0);
        let se = (var / n_batches as f64).sqrt();
        assert!(
            (pi[si] - mean).abs() <= 3.0 * se + 1e-6,
            "state {si}: analytic {} vs simulated {mean} (se {se})",
            pi[si]
        );
    }
}

#[test]
fn accepted_arrival_increments_local_counts() {
    let p = params(8, 3);
    let space = enumerate_states(&p).unwrap();
    for s in &space.states {
        if !s.event.is_arrival() {
            continue;
        }
        for a in feasible_actions(s, &p) {
            if let Action::Accept(c) = a {
                for (next, _) in transitions(s, a, &p, 0.2).unwrap() {
                    assert_eq!(next.local[c as usize - 1], s.local[c as usize - 1] + 1);
                    assert_eq!(next.occupied(), s.occupied() + c);
                }
            }
        }
    }
}
