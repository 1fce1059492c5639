//! Service-distance Markov chain and derived distance statistics.
//!
//! A service's distance is the hop count between the terminal's current cell
//! and the data center hosting its VM; `0` means locally served. Each epoch
//! the service finishes with probability `mu`; otherwise the terminal may move
//! (probability `p_m`). An accepted migration request resets the distance to 0
//! (the service follows the terminal); a rejected one (probability `p_rm`)
//! leaves the VM in place and the six-directional cell geometry splits the
//! move into farther (3/6), lateral (2/6), and closer (1/6) steps. Distances
//! beyond `D` interrupt the service (absorbing state `Dr`); completion is the
//! absorbing state `T`.
//!
//! The distance distribution is the expected-occupancy distribution of the
//! absorbing chain started at distance 0 (fundamental-matrix visit counts,
//! normalized by the expected lifetime length). `simulate_walk` estimates the
//! same quantities from sampled lifetimes and serves as the independent check
//! of the analytic path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelParams;
use crate::error::ModelError;
use crate::linalg;

/// Row-stochastic transition matrix over `{0, 1, .., D, T, Dr}`.
#[derive(Debug, Clone)]
pub struct DistanceChain {
    pub mu: f64,
    pub p_m: f64,
    pub p_rm: f64,
    pub max_distance: u32,
    matrix: Vec<Vec<f64>>,
}

impl DistanceChain {
    /// Builds the chain from raw parameters. `mu` in (0, 1], `p_m` and `p_rm`
    /// in [0, 1], `max_distance >= 1`.
    pub fn new(mu: f64, p_m: f64, p_rm: f64, max_distance: u32) -> Self {
        assert!(mu > 0.0 && mu <= 1.0, "mu outside (0, 1]");
        assert!((0.0..=1.0).contains(&p_m), "p_m outside [0, 1]");
        assert!((0.0..=1.0).contains(&p_rm), "p_rm outside [0, 1]");
        assert!(max_distance >= 1);

        let d_max = max_distance as usize;
        let n = d_max + 3;
        let t = d_max + 1;
        let dr = d_max + 2;
        let keep = 1.0 - mu;
        let mut m = vec![vec![0.0; n]; n];

        // Distance 0: finish, stay local, or become remote at distance 1 when
        // the movement's migration request is rejected.
        m[0][t] = mu;
        m[0][0] = keep * (1.0 - p_m * p_rm);
        m[0][1] = keep * p_m * p_rm;

        // Distances 1..=D. The closer-step and the accepted-migration reset
        // both land on column 0 when d = 1, merging into a single arc.
        for d in 1..=d_max {
            m[d][t] = mu;
            m[d][d] += keep * (1.0 - p_m + 2.0 * p_m * p_rm / 6.0);
            let away = keep * 3.0 * p_m * p_rm / 6.0;
            if d == d_max {
                m[d][dr] += away;
            } else {
                m[d][d + 1] += away;
            }
            m[d][d - 1] += keep * p_m * p_rm / 6.0;
            m[d][0] += keep * p_m * (1.0 - p_rm);
        }

        m[t][t] = 1.0;
        m[dr][dr] = 1.0;

        DistanceChain {
            mu,
            p_m,
            p_rm,
            max_distance,
            matrix: m,
        }
    }

    pub fn n_states(&self) -> usize {
        self.max_distance as usize + 3
    }

    pub fn idx_finished(&self) -> usize {
        self.max_distance as usize + 1
    }

    pub fn idx_interrupted(&self) -> usize {
        self.max_distance as usize + 2
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i]
    }

    pub fn state_label(&self, i: usize) -> String {
        if i == self.idx_finished() {
            "T".to_string()
        } else if i == self.idx_interrupted() {
            "Dr".to_string()
        } else {
            i.to_string()
        }
    }
}

/// Builds the distance chain for validated parameters and a given average MR
/// rejection probability.
pub fn build_distance_chain(p: &ModelParams, p_rm: f64) -> DistanceChain {
    DistanceChain::new(p.mu, p.p_m, p_rm, p.max_distance_d)
}

/// Distance distribution, average distance, and interruption probability.
///
/// `occupancy[d]` is the probability a service epoch finds the service at
/// distance `d` (indices `0..=D`; they sum to 1). `mean_distance` is
/// `sum_d d * occupancy[d]`. `p_interrupt` is the probability a lifetime ends
/// in `Dr` rather than `T`. `p_rm` records the rejection probability the
/// chain was built with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceStats {
    pub p_rm: f64,
    pub occupancy: Vec<f64>,
    pub mean_distance: f64,
    pub p_interrupt: f64,
}

impl DistanceStats {
    /// Probability of being locally served, `Pr[d_c = 0]`.
    pub fn p_local(&self) -> f64 {
        self.occupancy[0]
    }

    /// Occupancy of the boundary distance, `Pr[d_c = D]`.
    pub fn boundary_mass(&self) -> f64 {
        *self.occupancy.last().unwrap()
    }
}

/// Computes occupancy statistics from the fundamental matrix of the absorbing
/// chain: expected visit counts from distance 0, normalized by the expected
/// number of epochs before absorption.
pub fn distance_statistics(chain: &DistanceChain) -> Result<DistanceStats, ModelError> {
    let n_tr = chain.max_distance as usize + 1;
    // Solve (I - Q)^T v = e_0 for the visit counts v_j = N[0, j].
    let mut a = vec![vec![0.0; n_tr]; n_tr];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let q = chain.matrix[j][i];
            *v = if i == j { 1.0 - q } else { -q };
        }
    }
    let mut b = vec![0.0; n_tr];
    b[0] = 1.0;
    let visits = linalg::solve(a, b).ok_or(ModelError::SingularChain)?;
    if visits.iter().any(|v| !v.is_finite() || *v < -1e-9) {
        return Err(ModelError::SingularChain);
    }

    let total: f64 = visits.iter().sum();
    let occupancy: Vec<f64> = visits.iter().map(|v| (v / total).max(0.0)).collect();
    let mean_distance = occupancy
        .iter()
        .enumerate()
        .map(|(d, p)| d as f64 * p)
        .sum();
    let dr = chain.idx_interrupted();
    let p_interrupt: f64 = visits
        .iter()
        .enumerate()
        .map(|(j, v)| v * chain.matrix[j][dr])
        .sum();

    Ok(DistanceStats {
        p_rm: chain.p_rm,
        occupancy,
        mean_distance,
        p_interrupt: p_interrupt.clamp(0.0, 1.0),
    })
}

/// Monte-Carlo estimate of [`DistanceStats`] with standard errors, from
/// `n_services` sampled lifetimes. Deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct WalkEstimate {
    pub stats: DistanceStats,
    pub se_occupancy: Vec<f64>,
    pub se_mean_distance: f64,
    pub se_p_interrupt: f64,
    pub n_services: u64,
    /// Total epochs observed across all lifetimes.
    pub total_epochs: f64,
}

pub fn simulate_walk(chain: &DistanceChain, seed: u64, n_services: u64) -> WalkEstimate {
    assert!(n_services >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_tr = chain.max_distance as usize + 1;
    let t_idx = chain.idx_finished();
    let dr_idx = chain.idx_interrupted();

    // Per-distance sufficient statistics for the ratio estimators:
    // sums of per-lifetime visits v, squares v^2, and cross terms v*t.
    let mut sum_v = vec![0.0; n_tr];
    let mut sum_v2 = vec![0.0; n_tr];
    let mut sum_vt = vec![0.0; n_tr];
    let (mut sum_t, mut sum_t2) = (0.0_f64, 0.0_f64);
    let (mut sum_w, mut sum_w2, mut sum_wt) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut interrupted = 0u64;

    let mut visits = vec![0u64; n_tr];
    for _ in 0..n_services {
        visits.iter_mut().for_each(|v| *v = 0);
        let mut state = 0usize;
        loop {
            visits[state] += 1;
            let row = chain.row(state);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut next = t_idx;
            for (j, p) in row.iter().enumerate() {
                if *p <= 0.0 {
                    continue;
                }
                acc += p;
                if u < acc {
                    next = j;
                    break;
                }
            }
            if next == t_idx {
                break;
            }
            if next == dr_idx {
                interrupted += 1;
                break;
            }
            state = next;
        }

        let t: f64 = visits.iter().map(|v| *v as f64).sum();
        let w: f64 = visits
            .iter()
            .enumerate()
            .map(|(d, v)| d as f64 * *v as f64)
            .sum();
        for d in 0..n_tr {
            let v = visits[d] as f64;
            sum_v[d] += v;
            sum_v2[d] += v * v;
            sum_vt[d] += v * t;
        }
        sum_t += t;
        sum_t2 += t * t;
        sum_w += w;
        sum_w2 += w * w;
        sum_wt += w * t;
    }

    let ratio_se = |sum_x: f64, sum_x2: f64, sum_xt: f64| {
        let r = sum_x / sum_t;
        let ss = (sum_x2 - 2.0 * r * sum_xt + r * r * sum_t2).max(0.0);
        (r, ss.sqrt() / sum_t)
    };

    let mut occupancy = Vec::with_capacity(n_tr);
    let mut se_occupancy = Vec::with_capacity(n_tr);
    for d in 0..n_tr {
        let (r, se) = ratio_se(sum_v[d], sum_v2[d], sum_vt[d]);
        occupancy.push(r);
        se_occupancy.push(se);
    }
    let (mean_distance, se_mean_distance) = ratio_se(sum_w, sum_w2, sum_wt);
    let p_int = interrupted as f64 / n_services as f64;
    let se_p_interrupt = (p_int * (1.0 - p_int) / n_services as f64).sqrt();

    WalkEstimate {
        stats: DistanceStats {
            p_rm: chain.p_rm,
            occupancy,
            mean_distance,
            p_interrupt: p_int,
        },
        se_occupancy,
        se_mean_distance,
        se_p_interrupt,
        n_services,
        total_epochs: sum_t,
    }
}
