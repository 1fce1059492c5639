//! System states, events, actions, and state-space enumeration.

use std::collections::HashMap;
use std::fmt;

use crate::config::ModelParams;
use crate::error::ModelError;

/// The event component of a system state. Allocation parameters `c` are
/// 1-based (`1 ..= C`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Arrival of a new request.
    ArrivalNr,
    /// Arrival of a migration request.
    ArrivalMr,
    /// A local service holding `c` units finishes.
    FinishLocal(u32),
    /// A remote service holding `c` units finishes.
    FinishRemote(u32),
    /// The terminal of a local service holding `c` units moves out of the area.
    MoveLocal(u32),
    /// The terminal of a remote service holding `c` units moves again.
    MoveRemote(u32),
}

impl Event {
    pub fn is_arrival(self) -> bool {
        matches!(self, Event::ArrivalNr | Event::ArrivalMr)
    }

    /// (kind rank, allocation) key giving the enumeration order
    /// `An, Am, T^L_c, T^R_c, M^L_c, M^R_c`.
    fn sort_key(self) -> (u8, u32) {
        match self {
            Event::ArrivalNr => (0, 0),
            Event::ArrivalMr => (1, 0),
            Event::FinishLocal(c) => (2, c),
            Event::FinishRemote(c) => (3, c),
            Event::MoveLocal(c) => (4, c),
            Event::MoveRemote(c) => (5, c),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::ArrivalNr => write!(f, "An"),
            Event::ArrivalMr => write!(f, "Am"),
            Event::FinishLocal(c) => write!(f, "TL{c}"),
            Event::FinishRemote(c) => write!(f, "TR{c}"),
            Event::MoveLocal(c) => write!(f, "ML{c}"),
            Event::MoveRemote(c) => write!(f, "MR{c}"),
        }
    }
}

/// Resource-manager decision at an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Reject the request (`a = 0`).
    Reject,
    /// Accept the request and allocate `c` units (`a = c`).
    Accept(u32),
    /// Bookkeeping action at non-arrival events (`a = -1`).
    Observe,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Reject => write!(f, "reject"),
            Action::Accept(c) => write!(f, "accept:{c}"),
            Action::Observe => write!(f, "observe"),
        }
    }
}

/// Occupied resource units `sum_c c * (s^L_c + s^R_c)`.
pub fn occupied(local: &[u32], remote: &[u32]) -> u32 {
    local
        .iter()
        .zip(remote)
        .enumerate()
        .map(|(i, (l, r))| (i as u32 + 1) * (l + r))
        .sum()
}

/// A system state: per-allocation counts of local and remote services plus
/// the event that just occurred. Counts are taken at the decision epoch,
/// before the action resolves the event (so a `FinishLocal(c)` state still
/// includes the finishing service in `local[c-1]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub local: Vec<u32>,
    pub remote: Vec<u32>,
    pub event: Event,
}

impl SystemState {
    pub fn occupied(&self) -> u32 {
        occupied(&self.local, &self.remote)
    }

    /// Whether the event is consistent with the counts (finish/move events
    /// need a matching service) and capacity is respected.
    pub fn is_valid(&self, capacity_b: u32) -> bool {
        if self.occupied() > capacity_b {
            return false;
        }
        let c_max = self.local.len() as u32;
        let has = |counts: &[u32], c: u32| c >= 1 && c <= c_max && counts[c as usize - 1] >= 1;
        match self.event {
            Event::ArrivalNr | Event::ArrivalMr => true,
            Event::FinishLocal(c) | Event::MoveLocal(c) => has(&self.local, c),
            Event::FinishRemote(c) | Event::MoveRemote(c) => has(&self.remote, c),
        }
    }

    /// Compact descriptor used in dumps and the solver's policy table,
    /// e.g. `L[1,0,0] R[0,1,0] Am`.
    pub fn descriptor(&self) -> String {
        let join = |v: &[u32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "L[{}] R[{}] {}",
            join(&self.local),
            join(&self.remote),
            self.event
        )
    }
}

/// Dense, ordered enumeration of every feasible state with an index map.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub states: Vec<SystemState>,
    index: HashMap<SystemState, usize>,
    pub capacity_b: u32,
    pub max_alloc_c: u32,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &SystemState {
        &self.states[i]
    }

    pub fn index_of(&self, s: &SystemState) -> Option<usize> {
        self.index.get(s).copied()
    }
}

/// Default hard cap on the state-space size.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Enumerates every feasible `(local, remote, event)` state in lexicographic
/// order on `(local, remote, event kind, c)`.
pub fn enumerate_states(p: &ModelParams) -> Result<StateSpace, ModelError> {
    enumerate_states_capped(p, DEFAULT_STATE_CAP)
}

pub fn enumerate_states_capped(p: &ModelParams, cap: usize) -> Result<StateSpace, ModelError> {
    let b = p.capacity_b;
    let c_max = p.max_alloc_c as usize;

    let mut vectors: Vec<(Vec<u32>, u32)> = Vec::new();
    let mut current = vec![0u32; c_max];
    collect_vectors(&mut vectors, &mut current, 0, 0, b);

    let mut states = Vec::new();
    for (local, local_occ) in &vectors {
        for (remote, remote_occ) in &vectors {
            if local_occ + remote_occ > b {
                continue;
            }
            let mut events = vec![Event::ArrivalNr, Event::ArrivalMr];
            for c in 1..=c_max as u32 {
                if local[c as usize - 1] >= 1 {
                    events.push(Event::FinishLocal(c));
                    events.push(Event::MoveLocal(c));
                }
                if remote[c as usize - 1] >= 1 {
                    events.push(Event::FinishRemote(c));
                    events.push(Event::MoveRemote(c));
                }
            }
            events.sort_by_key(|e| e.sort_key());
            for event in events {
                states.push(SystemState {
                    local: local.clone(),
                    remote: remote.clone(),
                    event,
                });
                if states.len() > cap {
                    return Err(ModelError::StateSpaceTooLarge {
                        size: states.len(),
                        cap,
                    });
                }
            }
        }
    }

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(StateSpace {
        states,
        index,
        capacity_b: b,
        max_alloc_c: p.max_alloc_c,
    })
}

/// Recursively emits count vectors in ascending lexicographic order, keeping
/// the running occupancy within capacity.
fn collect_vectors(
    out: &mut Vec<(Vec<u32>, u32)>,
    current: &mut Vec<u32>,
    pos: usize,
    occ: u32,
    b: u32,
) {
    if pos == current.len() {
        out.push((current.clone(), occ));
        return;
    }
    let unit = pos as u32 + 1;
    let mut count = 0u32;
    loop {
        let added = occ + count * unit;
        if added > b {
            break;
        }
        current[pos] = count;
        collect_vectors(out, current, pos + 1, added, b);
        count += 1;
    }
    current[pos] = 0;
}

/// Feasible actions: arrivals admit `Reject` plus every `Accept(c)` that fits
/// in the remaining capacity; every other event admits only `Observe`.
pub fn feasible_actions(s: &SystemState, p: &ModelParams) -> Vec<Action> {
    if s.event.is_arrival() {
        let free = p.capacity_b - s.occupied();
        let mut actions = vec![Action::Reject];
        for c in 1..=p.max_alloc_c {
            if c <= free {
                actions.push(Action::Accept(c));
            }
        }
        actions
    } else {
        vec![Action::Observe]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(b: u32, c: u32) -> ModelParams {
        ModelParams {
            capacity_b: b,
            max_alloc_c: c,
            ..ModelParams::default()
        }
    }

    #[test]
    fn occupied_examples() {
        assert_eq!(occupied(&[0, 0, 0], &[0, 0, 0]), 0);
        assert_eq!(occupied(&[2, 0, 0], &[0, 1, 0]), 4);
        assert_eq!(occupied(&[0, 0, 1], &[0, 0, 0]), 3);
    }

    #[test]
    fn tiny_space_hand_enumeration() {
        // B = 1, C = 1: vectors {(0,0), (0,1), (1,0)}; arrivals everywhere,
        // finish/move only where the matching count is positive.
        let space = enumerate_states(&params(1, 1)).unwrap();
        assert_eq!(space.len(), 10);
        let expect = |l: u32, r: u32, e: Event| SystemState {
            local: vec![l],
            remote: vec![r],
            event: e,
        };
        let expected = vec![
            expect(0, 0, Event::ArrivalNr),
            expect(0, 0, Event::ArrivalMr),
            expect(0, 1, Event::ArrivalNr),
            expect(0, 1, Event::ArrivalMr),
            expect(0, 1, Event::FinishRemote(1)),
            expect(0, 1, Event::MoveRemote(1)),
            expect(1, 0, Event::ArrivalNr),
            expect(1, 0, Event::ArrivalMr),
            expect(1, 0, Event::FinishLocal(1)),
            expect(1, 0, Event::MoveLocal(1)),
        ];
        assert_eq!(space.states, expected);
        for (i, s) in expected.iter().enumerate() {
            assert_eq!(space.index_of(s), Some(i));
        }
    }

    #[test]
    fn zero_capacity_space() {
        let space = enumerate_states(&params(0, 1)).unwrap();
        assert_eq!(space.len(), 2);
        assert!(space.states.iter().all(|s| s.event.is_arrival()));
    }

    #[test]
    fn space_respects_cap() {
        let err = enumerate_states_capped(&params(8, 3), 10).unwrap_err();
        assert!(matches!(err, ModelError::StateSpaceTooLarge { .. }));
    }

    #[test]
    fn all_states_valid_and_distinct() {
        let p = params(5, 2);
        let space = enumerate_states(&p).unwrap();
        for s in &space.states {
            assert!(s.is_valid(p.capacity_b));
        }
        let mut set = std::collections::HashSet::new();
        for s in &space.states {
            assert!(set.insert(s.clone()), "duplicate state {s:?}");
        }
    }

    #[test]
    fn feasible_actions_on_arrivals() {
        let p = params(4, 3);
        let empty = SystemState {
            local: vec![0, 0, 0],
            remote: vec![0, 0, 0],
            event: Event::ArrivalNr,
        };
        assert_eq!(
            feasible_actions(&empty, &p),
            vec![
                Action::Reject,
                Action::Accept(1),
                Action::Accept(2),
                Action::Accept(3)
            ]
        );

        let full = SystemState {
            local: vec![4, 0, 0],
            remote: vec![0, 0, 0],
            event: Event::ArrivalMr,
        };
        assert_eq!(feasible_actions(&full, &p), vec![Action::Reject]);
    }

    #[test]
    fn non_arrival_states_observe() {
        let p = params(4, 3);
        let s = SystemState {
            local: vec![0, 1, 0],
            remote: vec![0, 0, 0],
            event: Event::FinishLocal(2),
        };
        assert_eq!(feasible_actions(&s, &p), vec![Action::Observe]);
    }
}
