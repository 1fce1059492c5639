//! Model assembly and uniformization into an equivalent discrete-time MDP.

use std::collections::BTreeMap;

use crate::config::ModelParams;
use crate::error::ModelError;
use crate::mobility::DistanceStats;

use super::kernel::{branch_successors, resolve_action};
use super::rewards::{
    constraint_value, cost_rate_of_counts, event_rate_of_counts, lump_income,
};
use super::state::{enumerate_states_capped, feasible_actions, Action, StateSpace};

pub use super::state::DEFAULT_STATE_CAP;

/// Per-(state, action) data of the semi-Markov model.
#[derive(Debug, Clone)]
pub struct ActionData {
    pub action: Action,
    /// Lump income `g(s, a)`.
    pub income: f64,
    /// Expected cost accrued over the epoch, `E[d * tau]`.
    pub epoch_cost: f64,
    /// Expected sojourn `y(s, a)`.
    pub sojourn: f64,
    /// Constraint weight `f(s, a)`.
    pub constraint: f64,
    /// Embedded next-state distribution, sparse and index-sorted.
    pub kernel: Vec<(usize, f64)>,
}

impl ActionData {
    /// Epoch reward `r(s, a) = g - E[d * tau]`.
    pub fn reward(&self) -> f64 {
        self.income - self.epoch_cost
    }

    /// Lagrange reward `r_beta(s, a)`.
    pub fn lagrange_reward(&self, beta: f64) -> f64 {
        self.reward() - beta * self.constraint
    }
}

/// The assembled semi-Markov decision model.
#[derive(Debug, Clone)]
pub struct SmdpModel {
    pub space: StateSpace,
    /// `actions[s]` lists the feasible actions of state `s` in tie-break
    /// order (`Reject`, `Accept(1)`, .., `Accept(C)`; `Observe`).
    pub actions: Vec<Vec<ActionData>>,
    pub params: ModelParams,
    pub stats: DistanceStats,
}

impl SmdpModel {
    pub fn n_states(&self) -> usize {
        self.space.len()
    }

    pub fn min_sojourn(&self) -> f64 {
        self.actions
            .iter()
            .flatten()
            .map(|a| a.sojourn)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds the semi-Markov model for validated parameters and mobility
/// statistics (whose `p_rm` parameterizes migration outcomes).
pub fn build_smdp(p: &ModelParams, stats: &DistanceStats) -> Result<SmdpModel, ModelError> {
    build_smdp_capped(p, stats, DEFAULT_STATE_CAP)
}

pub fn build_smdp_capped(
    p: &ModelParams,
    stats: &DistanceStats,
    cap: usize,
) -> Result<SmdpModel, ModelError> {
    let space = enumerate_states_capped(p, cap)?;
    let p_rm = stats.p_rm;
    let d_bar = stats.mean_distance;

    let mut actions = Vec::with_capacity(space.len());
    for s in &space.states {
        let mut per_state = Vec::new();
        for action in feasible_actions(s, p) {
            let branches = resolve_action(s, action, p, p_rm)?;
            let mut sojourn = 0.0;
            let mut epoch_cost = 0.0;
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for b in &branches {
                let gamma = event_rate_of_counts(&b.local, &b.remote, p);
                sojourn += b.prob / gamma;
                epoch_cost += b.prob * cost_rate_of_counts(&b.local, &b.remote, p, d_bar) / gamma;
                for (next, prob) in branch_successors(b, p) {
                    let idx = space
                        .index_of(&next)
                        .expect("successor state missing from enumeration");
                    *row.entry(idx).or_insert(0.0) += b.prob * prob;
                }
            }
            per_state.push(ActionData {
                action,
                income: lump_income(s, action, p, stats, p_rm),
                epoch_cost,
                sojourn,
                constraint: constraint_value(s, action, p),
                kernel: row.into_iter().collect(),
            });
        }
        actions.push(per_state);
    }

    Ok(SmdpModel {
        space,
        actions,
        params: p.clone(),
        stats: stats.clone(),
    })
}

/// Default uniformization constant: just inside the admissible interval.
pub fn choose_eta(m: &SmdpModel) -> f64 {
    0.999 * m.min_sojourn()
}

/// The uniformized discrete-time model: transformed rewards
/// `r~_beta = r_beta / y` and transformed kernel rows that mix the embedded
/// kernel with a self-loop, `p~(s'|s,a) = eta p(s'|s,a)/y` off the diagonal
/// and `1 + eta [p(s|s,a) - 1]/y` on it.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub smdp: SmdpModel,
    pub eta: f64,
    tilde: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Transforms the semi-Markov model with uniformization constant `eta`,
/// which must lie in `(0, min_{s,a} y(s,a)]`.
pub fn uniformize(smdp: SmdpModel, eta: f64) -> Result<DiscreteModel, ModelError> {
    let min_sojourn = smdp.min_sojourn();
    if !(eta > 0.0 && eta <= min_sojourn * (1.0 + 1e-12)) {
        return Err(ModelError::BadEta { eta, min_sojourn });
    }

    let mut tilde = Vec::with_capacity(smdp.n_states());
    for (si, per_state) in smdp.actions.iter().enumerate() {
        let mut rows = Vec::with_capacity(per_state.len());
        for data in per_state {
            let y = data.sojourn;
            let mut self_prob = 0.0;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(data.kernel.len() + 1);
            for &(t, prob) in &data.kernel {
                if t == si {
                    self_prob = prob;
                } else {
                    row.push((t, eta * prob / y));
                }
            }
            let diag = 1.0 + eta * (self_prob - 1.0) / y;
            if diag < -1e-12 {
                return Err(ModelError::BadEta { eta, min_sojourn });
            }
            let pos = row.partition_point(|(t, _)| *t < si);
            row.insert(pos, (si, diag.max(0.0)));
            rows.push(row);
        }
        tilde.push(rows);
    }

    Ok(DiscreteModel { smdp, eta, tilde })
}

impl DiscreteModel {
    /// Builds the model end to end with the default `eta`.
    pub fn build(p: &ModelParams, stats: &DistanceStats) -> Result<Self, ModelError> {
        let smdp = build_smdp(p, stats)?;
        let eta = choose_eta(&smdp);
        uniformize(smdp, eta)
    }

    pub fn n_states(&self) -> usize {
        self.smdp.n_states()
    }

    pub fn actions(&self, si: usize) -> &[ActionData] {
        &self.smdp.actions[si]
    }

    pub fn tilde_row(&self, si: usize, ai: usize) -> &[(usize, f64)] {
        &self.tilde[si][ai]
    }

    /// Transformed reward `r~_beta(s, a) = r_beta(s, a) / y(s, a)`.
    pub fn transformed_reward(&self, si: usize, ai: usize, beta: f64) -> f64 {
        let data = &self.smdp.actions[si][ai];
        data.lagrange_reward(beta) / data.sojourn
    }

    pub fn space(&self) -> &StateSpace {
        &self.smdp.space
    }

    pub fn params(&self) -> &ModelParams {
        &self.smdp.params
    }

    pub fn stats(&self) -> &DistanceStats {
        &self.smdp.stats
    }

    /// Test hook: perturbs one transformed kernel row so consistency checks
    /// can demonstrate failure reporting.
    #[doc(hidden)]
    pub fn corrupt_kernel_for_tests(&mut self) {
        if let Some(entry) = self
            .tilde
            .iter_mut()
            .flatten()
            .flatten()
            .next()
        {
            entry.1 += 1e-3;
        }
    }
}
