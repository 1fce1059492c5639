//! SMDP formulation: state/event/action spaces, reward and sojourn
//! functions, the embedded transition kernel, and the uniformized
//! discrete-time model the solver operates on.

mod discrete;
mod kernel;
mod rewards;
mod state;

pub use discrete::{
    build_smdp, choose_eta, uniformize, ActionData, DiscreteModel, SmdpModel, DEFAULT_STATE_CAP,
};
pub use kernel::transitions;
pub use rewards::{
    constraint_value, cost_rate, cost_rate_of_counts, event_rate, event_rate_of_counts,
    lagrange_reward, lump_income, reward, sojourn,
};
pub use state::{
    enumerate_states, enumerate_states_capped, feasible_actions, occupied, Action, Event,
    StateSpace, SystemState,
};
