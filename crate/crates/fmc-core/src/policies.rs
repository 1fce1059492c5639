//! Baseline decision rules and their materialization as policy tables.
//!
//! Four baselines accompany the solved policy:
//!
//! * greedy : per arrival, the action with the best one-step transformed
//!   reward `r(s,a)/y(s,a)`, no continuation value;
//! * all-units (AU) : allocate `min(C, free)` whenever anything is free;
//! * fixed : allocate a fixed amount or reject;
//! * R-RSV : like fixed, but a reserve is off limits to NRs so migrating
//!   services keep headroom.
//!
//! Every baseline exists in two interchangeable forms: a closed-form
//! decision rule for the simulator and a materialized [`Policy`] table over
//! the enumerated state space for analytic steady-state evaluation.

use std::sync::Arc;

use crate::config::ModelParams;
use crate::error::ConfigError;
use crate::smdp::{occupied, Action, DiscreteModel, Event, SystemState};
use crate::solver::Policy;

/// Baseline selector with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineSpec {
    Greedy,
    AllUnits,
    Fixed { alloc: u32 },
    ReserveRsv { reserve: u32, alloc: u32 },
}

impl BaselineSpec {
    /// Default fixed allocation: the midpoint of `1..=C`.
    pub fn default_fixed_alloc(p: &ModelParams) -> u32 {
        p.max_alloc_c.div_ceil(2).max(1)
    }

    /// Default reservation: a small portion of the pool, `ceil(0.1 B)`.
    pub fn default_reserve(p: &ModelParams) -> u32 {
        ((0.1 * p.capacity_b as f64).ceil() as u32).min(p.capacity_b.saturating_sub(1))
    }

    pub fn validate(&self, p: &ModelParams) -> Result<(), ConfigError> {
        match *self {
            BaselineSpec::Greedy | BaselineSpec::AllUnits => Ok(()),
            BaselineSpec::Fixed { alloc } => {
                if alloc >= 1 && alloc <= p.max_alloc_c {
                    Ok(())
                } else {
                    Err(ConfigError::Invariant(format!(
                        "fixed allocation {alloc} outside 1..={}",
                        p.max_alloc_c
                    )))
                }
            }
            BaselineSpec::ReserveRsv { reserve, alloc } => {
                if alloc < 1 || alloc > p.max_alloc_c {
                    return Err(ConfigError::Invariant(format!(
                        "rrsv allocation {alloc} outside 1..={}",
                        p.max_alloc_c
                    )));
                }
                if p.capacity_b >= 1 && reserve > p.capacity_b - 1 {
                    return Err(ConfigError::Invariant(format!(
                        "rrsv reserve {reserve} outside 0..={}",
                        p.capacity_b - 1
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            BaselineSpec::Greedy => "greedy".to_string(),
            BaselineSpec::AllUnits => "au".to_string(),
            BaselineSpec::Fixed { alloc } => format!("fixed:{alloc}"),
            BaselineSpec::ReserveRsv { reserve, alloc } => format!("rrsv:{reserve},{alloc}"),
        }
    }

    /// Closed-form decision on an arrival with `free` unoccupied units.
    /// Not defined for `Greedy`, which needs the model.
    pub fn decide(&self, is_nr: bool, free: u32, p: &ModelParams) -> Action {
        match *self {
            BaselineSpec::Greedy => unreachable!("greedy has no closed form"),
            BaselineSpec::AllUnits => {
                if free >= 1 {
                    Action::Accept(free.min(p.max_alloc_c))
                } else {
                    Action::Reject
                }
            }
            BaselineSpec::Fixed { alloc } => {
                if free >= alloc {
                    Action::Accept(alloc)
                } else {
                    Action::Reject
                }
            }
            BaselineSpec::ReserveRsv { reserve, alloc } => {
                let admit = if is_nr {
                    free >= alloc && free - alloc >= reserve
                } else {
                    free >= alloc
                };
                if admit {
                    Action::Accept(alloc)
                } else {
                    Action::Reject
                }
            }
        }
    }
}

/// Greedy policy: per arrival state, the feasible action maximizing the
/// one-step transformed reward at multiplier 0; observe elsewhere. Ties go to
/// the lowest action index.
pub fn greedy_rule(m: &DiscreteModel) -> Policy {
    let actions = (0..m.n_states())
        .map(|si| {
            if !m.space().state(si).event.is_arrival() {
                return Action::Observe;
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_action = Action::Reject;
            for (ai, data) in m.actions(si).iter().enumerate() {
                let v = m.transformed_reward(si, ai, 0.0);
                if v > best {
                    best = v;
                    best_action = data.action;
                }
            }
            best_action
        })
        .collect();
    Policy { actions }
}

/// Materializes a baseline as a policy table over the model's state space.
pub fn materialize(spec: &BaselineSpec, m: &DiscreteModel) -> Policy {
    match spec {
        BaselineSpec::Greedy => greedy_rule(m),
        _ => {
            let p = m.params();
            let actions = (0..m.n_states())
                .map(|si| {
                    let s = m.space().state(si);
                    match s.event {
                        Event::ArrivalNr => spec.decide(true, p.capacity_b - s.occupied(), p),
                        Event::ArrivalMr => spec.decide(false, p.capacity_b - s.occupied(), p),
                        _ => Action::Observe,
                    }
                })
                .collect();
            Policy { actions }
        }
    }
}

/// Admission decisions as the simulator sees them: given the arrival kind and
/// the current per-allocation counts, produce an action.
pub trait AdmissionRule: Sync {
    fn decide(&self, is_nr: bool, local: &[u32], remote: &[u32], p: &ModelParams) -> Action;
    fn label(&self) -> String;
}

/// Closed-form baseline rule (AU, fixed, R-RSV).
#[derive(Debug, Clone)]
pub struct ClosedFormRule {
    spec: BaselineSpec,
}

impl ClosedFormRule {
    pub fn new(spec: BaselineSpec) -> Self {
        assert!(
            !matches!(spec, BaselineSpec::Greedy),
            "greedy needs a model; use TableRule"
        );
        ClosedFormRule { spec }
    }
}

impl AdmissionRule for ClosedFormRule {
    fn decide(&self, is_nr: bool, local: &[u32], remote: &[u32], p: &ModelParams) -> Action {
        let free = p.capacity_b - occupied(local, remote);
        self.spec.decide(is_nr, free, p)
    }

    fn label(&self) -> String {
        self.spec.label()
    }
}

/// A materialized policy table applied by state lookup; used for the solved
/// policy and for greedy.
#[derive(Clone)]
pub struct TableRule {
    model: Arc<DiscreteModel>,
    policy: Policy,
    label: String,
}

impl TableRule {
    pub fn new(model: Arc<DiscreteModel>, policy: Policy, label: impl Into<String>) -> Self {
        TableRule {
            model,
            policy,
            label: label.into(),
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl AdmissionRule for TableRule {
    fn decide(&self, is_nr: bool, local: &[u32], remote: &[u32], _p: &ModelParams) -> Action {
        let state = SystemState {
            local: local.to_vec(),
            remote: remote.to_vec(),
            event: if is_nr {
                Event::ArrivalNr
            } else {
                Event::ArrivalMr
            },
        };
        let si = self
            .model
            .space()
            .index_of(&state)
            .unwrap_or_else(|| panic!("state outside enumeration: {}", state.descriptor()));
        self.policy.action(si)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
