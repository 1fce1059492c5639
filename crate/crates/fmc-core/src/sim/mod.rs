//! Continuous-time discrete-event simulator of one data center.
//!
//! Exponential clocks drive the dynamics: NR arrivals at `lambda_n`, MR
//! arrivals at `lambda_m`, and per active service independent completion
//! (`mu`) and movement (`p_m`) clocks. Every event is a decision epoch; the
//! admission rule is consulted on arrivals. Migration outcomes at move
//! events are exogenous coin flips with the environment's MR rejection
//! probability: a departing local service whose request is rejected
//! elsewhere stays in the pool as a remote service at distance 1.
//!
//! Two cost models:
//!
//! * [`CostModel::PerService`] (default) tracks the actual distance of every
//!   remote service with the six-directional walk (farther 3/6, lateral 2/6,
//!   closer 1/6 on rejected moves), interrupts services pushed beyond `D`
//!   (releasing resources and charging the interruption loss), and prices
//!   delay by actual distances.
//! * [`CostModel::MeanField`] reproduces the analytic model exactly: delay
//!   is priced with the average distance, remote services never walk or
//!   interrupt, and rewards accrue precisely the analytic lump and cost-rate
//!   forms. Long-run reward per unit time then estimates the semi-Markov
//!   gain of the same policy, which is what the model/simulator consistency
//!   check compares.
//!
//! Randomness comes from one master seed; replication `i` uses ChaCha12
//! stream `i` of that seed, runs independently, and aggregation is a
//! deterministic fold over replication index.

mod sweep;

pub use sweep::{sweep, PolicyKind, SweepRecord, SweepTable};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelParams;
use crate::error::SimError;
use crate::mobility::DistanceStats;
use crate::policies::AdmissionRule;
use crate::smdp::{occupied, Action};

/// How the simulator prices delay and treats remote-service distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostModel {
    PerService,
    MeanField,
}

/// Simulation horizon and reproducibility knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Horizon in decision epochs (events), including warmup.
    pub n_events: u64,
    /// Leading epochs excluded from every metric.
    pub warmup_events: u64,
    pub n_replications: u32,
    pub cost_model: CostModel,
    /// Record NR arrival times of replication 0 (for distribution tests).
    pub trace_nr_arrivals: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 12345,
            n_events: 1_100_000,
            warmup_events: 100_000,
            n_replications: 10,
            cost_model: CostModel::PerService,
            trace_nr_arrivals: false,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.warmup_events >= self.n_events {
            return Err(SimError::BadConfig(format!(
                "warmup_events {} must be below n_events {}",
                self.warmup_events, self.n_events
            )));
        }
        if self.n_replications < 1 {
            return Err(SimError::BadConfig("n_replications must be >= 1".into()));
        }
        Ok(())
    }
}

/// Post-warmup measurements of one replication (or the aggregate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub avg_reward_per_time: f64,
    pub p_reject_nr: f64,
    pub p_reject_mr: f64,
    pub avg_alloc_nr: f64,
    pub avg_alloc_mr: f64,
    pub avg_distance: f64,
    pub interruption_rate: f64,
}

impl SimMetrics {
    fn fields(&self) -> [f64; 7] {
        [
            self.avg_reward_per_time,
            self.p_reject_nr,
            self.p_reject_mr,
            self.avg_alloc_nr,
            self.avg_alloc_mr,
            self.avg_distance,
            self.interruption_rate,
        ]
    }

    fn from_fields(v: [f64; 7]) -> Self {
        SimMetrics {
            avg_reward_per_time: v[0],
            p_reject_nr: v[1],
            p_reject_mr: v[2],
            avg_alloc_nr: v[3],
            avg_alloc_mr: v[4],
            avg_distance: v[5],
            interruption_rate: v[6],
        }
    }
}

/// Post-warmup arrival counts of one replication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrivalCounts {
    pub nr: u64,
    pub mr: u64,
}

/// All replications plus their mean and 95% normal-approximation
/// confidence half-widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub replications: Vec<SimMetrics>,
    pub mean: SimMetrics,
    pub half_width: SimMetrics,
    /// Post-warmup arrival counts per replication.
    pub arrivals: Vec<ArrivalCounts>,
    /// NR arrival times of replication 0, when tracing was requested.
    pub nr_arrival_times: Vec<f64>,
}

impl SimReport {
    pub fn nr_interarrival_times(&self) -> Vec<f64> {
        self.nr_arrival_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }

    pub fn total_arrivals(&self) -> ArrivalCounts {
        let mut total = ArrivalCounts { nr: 0, mr: 0 };
        for a in &self.arrivals {
            total.nr += a.nr;
            total.mr += a.mr;
        }
        total
    }
}

/// One tracked service. `distance == 0` means locally served.
#[derive(Debug, Clone, Copy)]
struct Service {
    alloc: u32,
    distance: u32,
}

/// Runs `cfg.n_replications` independent replications under `rule` and the
/// mobility environment described by `stats` (whose `p_rm` drives migration
/// outcomes). Deterministic for a fixed config.
pub fn run_simulation(
    p: &ModelParams,
    rule: &dyn AdmissionRule,
    cfg: &SimConfig,
    stats: &DistanceStats,
) -> Result<SimReport, SimError> {
    cfg.validate()?;
    let results: Result<Vec<(SimMetrics, ArrivalCounts, Vec<f64>)>, SimError> =
        (0..cfg.n_replications)
            .into_par_iter()
            .map(|rep| simulate_one(p, rule, cfg, stats, rep))
            .collect();
    let results = results?;

    let metrics: Vec<SimMetrics> = results.iter().map(|(m, _, _)| m.clone()).collect();
    let arrivals: Vec<ArrivalCounts> = results.iter().map(|(_, a, _)| *a).collect();
    let nr_arrival_times = results
        .into_iter()
        .next()
        .map(|(_, _, t)| t)
        .unwrap_or_default();

    let n = metrics.len() as f64;
    let mut mean = [0.0f64; 7];
    for m in &metrics {
        for (acc, v) in mean.iter_mut().zip(m.fields()) {
            *acc += v;
        }
    }
    for acc in mean.iter_mut() {
        *acc /= n;
    }
    let mut hw = [0.0f64; 7];
    if metrics.len() > 1 {
        for m in &metrics {
            for ((acc, v), mu) in hw.iter_mut().zip(m.fields()).zip(mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        for acc in hw.iter_mut() {
            let sd = (*acc / (n - 1.0)).sqrt();
            *acc = 1.96 * sd / n.sqrt();
        }
    }

    Ok(SimReport {
        replications: metrics,
        mean: SimMetrics::from_fields(mean),
        half_width: SimMetrics::from_fields(hw),
        arrivals,
        nr_arrival_times,
    })
}

fn simulate_one(
    p: &ModelParams,
    rule: &dyn AdmissionRule,
    cfg: &SimConfig,
    stats: &DistanceStats,
    rep: u32,
) -> Result<(SimMetrics, ArrivalCounts, Vec<f64>), SimError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);

    let lambda_n = p.lambda_n;
    let lambda_m = p.mr_arrival_rate();
    let svc_rate = p.mu + p.p_m;
    let c_max = p.max_alloc_c as usize;
    let p_rm = stats.p_rm;
    let d_bar = stats.mean_distance;
    let boundary = stats.boundary_mass();
    let mean_field = cfg.cost_model == CostModel::MeanField;
    let trace = cfg.trace_nr_arrivals && rep == 0;

    let mut services: Vec<Service> = Vec::new();
    let mut local_counts = vec![0u32; c_max];
    let mut remote_counts = vec![0u32; c_max];
    let mut occ = 0u32;
    let mut remote_distance_sum = 0u64;
    let mut time = 0.0f64;

    // Post-warmup accumulators.
    let mut reward = 0.0f64;
    let mut elapsed = 0.0f64;
    let mut dist_time = 0.0f64;
    let mut remote_time = 0.0f64;
    let (mut arrivals_nr, mut rejected_nr, mut accepted_nr) = (0u64, 0u64, 0u64);
    let (mut arrivals_mr, mut rejected_mr, mut accepted_mr) = (0u64, 0u64, 0u64);
    let (mut alloc_nr_sum, mut alloc_mr_sum) = (0u64, 0u64);
    let mut interruptions = 0u64;
    let mut nr_times = Vec::new();

    let infeasible = |is_nr: bool, local: &[u32], remote: &[u32], a: Action| {
        SimError::InfeasibleAction {
            state: format!(
                "L{local:?} R{remote:?} {}",
                if is_nr { "An" } else { "Am" }
            ),
            action: a.to_string(),
        }
    };

    for k in 0..cfg.n_events {
        if k == cfg.warmup_events {
            reward = 0.0;
            elapsed = 0.0;
            dist_time = 0.0;
            remote_time = 0.0;
            arrivals_nr = 0;
            rejected_nr = 0;
            accepted_nr = 0;
            arrivals_mr = 0;
            rejected_mr = 0;
            accepted_mr = 0;
            alloc_nr_sum = 0;
            alloc_mr_sum = 0;
            interruptions = 0;
        }
        let measuring = k >= cfg.warmup_events;

        let n_services = services.len() as f64;
        let gamma = lambda_n + lambda_m + svc_rate * n_services;
        let dt = Exp::new(gamma).unwrap().sample(&mut rng);
        time += dt;

        if measuring {
            let n_remote: u32 = remote_counts.iter().sum();
            let delay_sum = if mean_field {
                n_remote as f64 * d_bar
            } else {
                remote_distance_sum as f64
            };
            let cost_rate = p.weight_delay * delay_sum
                + p.weight_occupancy * p.price_resource * occ as f64;
            reward -= cost_rate * dt;
            elapsed += dt;
            dist_time += delay_sum * dt;
            remote_time += n_remote as f64 * dt;
        }

        let u: f64 = rng.random::<f64>() * gamma;
        if u < lambda_n + lambda_m {
            // Arrival.
            let is_nr = u < lambda_n;
            if trace && is_nr && measuring {
                nr_times.push(time);
            }
            let action = rule.decide(is_nr, &local_counts, &remote_counts, p);
            match action {
                Action::Reject => {
                    if measuring {
                        if is_nr {
                            arrivals_nr += 1;
                            rejected_nr += 1;
                            reward -= p.loss_reject_nr;
                        } else {
                            arrivals_mr += 1;
                            rejected_mr += 1;
                            reward -= 0.5 * p.loss_interrupt * boundary;
                        }
                    }
                }
                Action::Accept(c) => {
                    if c < 1 || c > p.max_alloc_c || occ + c > p.capacity_b {
                        return Err(infeasible(is_nr, &local_counts, &remote_counts, action));
                    }
                    services.push(Service {
                        alloc: c,
                        distance: 0,
                    });
                    local_counts[c as usize - 1] += 1;
                    occ += c;
                    if measuring {
                        if is_nr {
                            arrivals_nr += 1;
                            accepted_nr += 1;
                            alloc_nr_sum += c as u64;
                        } else {
                            arrivals_mr += 1;
                            accepted_mr += 1;
                            alloc_mr_sum += c as u64;
                            reward -= p.cost_migrate;
                        }
                    }
                }
                Action::Observe => {
                    return Err(infeasible(is_nr, &local_counts, &remote_counts, action));
                }
            }
        } else {
            // Completion or movement of a uniformly chosen service.
            let idx = (((u - lambda_n - lambda_m) / svc_rate) as usize)
                .min(services.len().saturating_sub(1));
            let svc = services[idx];
            let ci = svc.alloc as usize - 1;
            let finish = rng.random::<f64>() * svc_rate < p.mu;
            if finish {
                if measuring {
                    reward += p.income_finish;
                }
                remove_service(
                    &mut services,
                    idx,
                    &mut local_counts,
                    &mut remote_counts,
                    &mut occ,
                    &mut remote_distance_sum,
                );
            } else {
                // Move: income accrues in the analytic expected form.
                if measuring {
                    reward += p.income_migrate * (1.0 - p_rm);
                }
                let rejected_elsewhere = rng.random::<f64>() < p_rm;
                if svc.distance == 0 {
                    if rejected_elsewhere {
                        local_counts[ci] -= 1;
                        remote_counts[ci] += 1;
                        services[idx].distance = 1;
                        remote_distance_sum += 1;
                    } else {
                        remove_service(
                            &mut services,
                            idx,
                            &mut local_counts,
                            &mut remote_counts,
                            &mut occ,
                            &mut remote_distance_sum,
                        );
                    }
                } else if !rejected_elsewhere {
                    remove_service(
                        &mut services,
                        idx,
                        &mut local_counts,
                        &mut remote_counts,
                        &mut occ,
                        &mut remote_distance_sum,
                    );
                } else if !mean_field {
                    // Six-directional step: farther 3/6, lateral 2/6, closer 1/6.
                    let w: f64 = rng.random();
                    let d = svc.distance;
                    if w < 0.5 {
                        if d + 1 > p.max_distance_d {
                            if measuring {
                                reward -= p.loss_interrupt;
                                interruptions += 1;
                            }
                            remove_service(
                                &mut services,
                                idx,
                                &mut local_counts,
                                &mut remote_counts,
                                &mut occ,
                                &mut remote_distance_sum,
                            );
                        } else {
                            services[idx].distance = d + 1;
                            remote_distance_sum += 1;
                        }
                    } else if w >= 5.0 / 6.0 {
                        services[idx].distance = d - 1;
                        remote_distance_sum -= 1;
                        if d - 1 == 0 {
                            remote_counts[ci] -= 1;
                            local_counts[ci] += 1;
                        }
                    }
                }
            }
        }

        assert!(occ <= p.capacity_b, "capacity exceeded at epoch {k}");
        debug_assert_eq!(occ, occupied(&local_counts, &remote_counts));
    }

    let frac = |num: u64, den: u64| if den > 0 { num as f64 / den as f64 } else { 0.0 };
    let metrics = SimMetrics {
        avg_reward_per_time: if elapsed > 0.0 { reward / elapsed } else { 0.0 },
        p_reject_nr: frac(rejected_nr, arrivals_nr),
        p_reject_mr: frac(rejected_mr, arrivals_mr),
        avg_alloc_nr: frac(alloc_nr_sum, accepted_nr),
        avg_alloc_mr: frac(alloc_mr_sum, accepted_mr),
        avg_distance: if remote_time > 0.0 {
            dist_time / remote_time
        } else {
            0.0
        },
        interruption_rate: if elapsed > 0.0 {
            interruptions as f64 / elapsed
        } else {
            0.0
        },
    };
    let counts = ArrivalCounts {
        nr: arrivals_nr,
        mr: arrivals_mr,
    };
    Ok((metrics, counts, nr_times))
}

fn remove_service(
    services: &mut Vec<Service>,
    idx: usize,
    local_counts: &mut [u32],
    remote_counts: &mut [u32],
    occ: &mut u32,
    remote_distance_sum: &mut u64,
) {
    let svc = services.swap_remove(idx);
    let ci = svc.alloc as usize - 1;
    if svc.distance == 0 {
        local_counts[ci] -= 1;
    } else {
        remote_counts[ci] -= 1;
        *remote_distance_sum -= svc.distance as u64;
    }
    *occ -= svc.alloc;
}

/// Kolmogorov–Smirnov statistic of `samples` against Exponential(`rate`),
/// with the asymptotic 1% critical value.
pub fn ks_exponential(samples: &[f64], rate: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = 1.0 - (-rate * x).exp();
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    (d, 1.62762 / n.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{build_distance_chain, distance_statistics};
    use crate::policies::{AdmissionRule, BaselineSpec, ClosedFormRule};

    struct AlwaysReject;
    impl AdmissionRule for AlwaysReject {
        fn decide(&self, _: bool, _: &[u32], _: &[u32], _: &ModelParams) -> Action {
            Action::Reject
        }
        fn label(&self) -> String {
            "always-reject".into()
        }
    }

    fn stats_at(p: &ModelParams, p_rm: f64) -> DistanceStats {
        distance_statistics(&build_distance_chain(p, p_rm)).unwrap()
    }

    fn quick_cfg(seed: u64, events: u64) -> SimConfig {
        SimConfig {
            seed,
            n_events: events,
            warmup_events: events / 10,
            n_replications: 2,
            cost_model: CostModel::PerService,
            trace_nr_arrivals: false,
        }
    }

    #[test]
    fn always_reject_matches_closed_form() {
        let p = ModelParams::default();
        let stats = stats_at(&p, 0.2);
        let cfg = quick_cfg(7, 400_000);
        let report = run_simulation(&p, &AlwaysReject, &cfg, &stats).unwrap();
        let lm = p.mr_arrival_rate();
        let expected =
            -(p.loss_reject_nr * p.lambda_n + 0.5 * p.loss_interrupt * stats.boundary_mass() * lm);
        // Compound-Poisson standard error of the per-time lump average.
        let t = 0.9 * cfg.n_events as f64 / (p.lambda_n + lm);
        let var = (p.loss_reject_nr.powi(2) * p.lambda_n
            + (0.5 * p.loss_interrupt * stats.boundary_mass()).powi(2) * lm)
            / t;
        let sigma = var.sqrt();
        assert!(
            (report.mean.avg_reward_per_time - expected).abs() < 4.0 * sigma + 1e-9,
            "sim {} vs closed form {expected}",
            report.mean.avg_reward_per_time
        );
        assert_eq!(report.mean.p_reject_nr, 1.0);
        assert_eq!(report.mean.p_reject_mr, 1.0);
        assert_eq!(report.mean.avg_alloc_nr, 0.0);
    }

    #[test]
    fn no_movement_means_no_remote_services() {
        let p = ModelParams {
            p_m: 0.0,
            ..ModelParams::default()
        };
        let stats = stats_at(&p, 0.0);
        let rule = ClosedFormRule::new(BaselineSpec::Fixed { alloc: 1 });
        let report = run_simulation(&p, &rule, &quick_cfg(3, 100_000), &stats).unwrap();
        assert_eq!(report.mean.avg_distance, 0.0);
        assert_eq!(report.mean.interruption_rate, 0.0);
        assert_eq!(report.mean.p_reject_mr, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = ModelParams::default();
        let stats = stats_at(&p, 0.15);
        let rule = ClosedFormRule::new(BaselineSpec::AllUnits);
        let cfg = quick_cfg(99, 60_000);
        let a = run_simulation(&p, &rule, &cfg, &stats).unwrap();
        let b = run_simulation(&p, &rule, &cfg, &stats).unwrap();
        assert_eq!(a.replications, b.replications);
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn different_seeds_differ() {
        let p = ModelParams::default();
        let stats = stats_at(&p, 0.15);
        let rule = ClosedFormRule::new(BaselineSpec::AllUnits);
        let a = run_simulation(&p, &rule, &quick_cfg(1, 60_000), &stats).unwrap();
        let b = run_simulation(&p, &rule, &quick_cfg(2, 60_000), &stats).unwrap();
        assert_ne!(
            a.mean.avg_reward_per_time,
            b.mean.avg_reward_per_time
        );
    }

    #[test]
    fn nr_interarrivals_pass_ks_against_exponential() {
        let p = ModelParams::default();
        let stats = stats_at(&p, 0.1);
        let rule = ClosedFormRule::new(BaselineSpec::Fixed { alloc: 2 });
        let cfg = SimConfig {
            seed: 20_240_810,
            n_events: 120_000,
            warmup_events: 2_000,
            n_replications: 1,
            cost_model: CostModel::PerService,
            trace_nr_arrivals: true,
        };
        let report = run_simulation(&p, &rule, &cfg, &stats).unwrap();
        let gaps = report.nr_interarrival_times();
        assert!(gaps.len() > 10_000);
        let (d, crit) = ks_exponential(&gaps, p.lambda_n);
        assert!(d < crit, "KS statistic {d} above 1% critical value {crit}");
    }

    #[test]
    fn rrsv_protects_migrations_relative_to_fixed() {
        let p = ModelParams {
            lambda_n: 6.0,
            ..ModelParams::default()
        };
        let stats = stats_at(&p, 0.3);
        let alloc = BaselineSpec::default_fixed_alloc(&p);
        let reserve = BaselineSpec::default_reserve(&p);
        let cfg = quick_cfg(11, 300_000);
        let fixed = run_simulation(
            &p,
            &ClosedFormRule::new(BaselineSpec::Fixed { alloc }),
            &cfg,
            &stats,
        )
        .unwrap();
        let rrsv = run_simulation(
            &p,
            &ClosedFormRule::new(BaselineSpec::ReserveRsv { reserve, alloc }),
            &cfg,
            &stats,
        )
        .unwrap();
        assert!(
            rrsv.mean.p_reject_mr <= fixed.mean.p_reject_mr,
            "rrsv {} vs fixed {}",
            rrsv.mean.p_reject_mr,
            fixed.mean.p_reject_mr
        );
    }

    #[test]
    fn infeasible_rule_aborts() {
        struct Oversubscribe;
        impl AdmissionRule for Oversubscribe {
            fn decide(&self, _: bool, _: &[u32], _: &[u32], p: &ModelParams) -> Action {
                Action::Accept(p.max_alloc_c)
            }
            fn label(&self) -> String {
                "oversubscribe".into()
            }
        }
        let p = ModelParams {
            capacity_b: 3,
            max_alloc_c: 2,
            ..ModelParams::default()
        };
        let stats = stats_at(&p, 0.0);
        let err = run_simulation(&p, &Oversubscribe, &quick_cfg(5, 10_000), &stats).unwrap_err();
        assert!(matches!(err, SimError::InfeasibleAction { .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let p = ModelParams::default();
        let stats = stats_at(&p, 0.0);
        let cfg = SimConfig {
            n_events: 10,
            warmup_events: 10,
            ..SimConfig::default()
        };
        assert!(matches!(
            run_simulation(&p, &AlwaysReject, &cfg, &stats),
            Err(SimError::BadConfig(_))
        ));
    }
}
