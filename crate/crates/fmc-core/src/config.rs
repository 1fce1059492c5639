//! Model parameters, validation, and the flat `key = value` config format.
//!
//! All quantities are dimensionless scalars; the semantic units are noted per
//! field. Rates are continuous-time rates per unit time: `mu` and `p_m` are
//! read as exponential completion/movement rates even where the original
//! service-time description is geometric, so that the event-rate function
//! `lambda_n + lambda_m + sum_c (mu + p_m)(s_c^L + s_c^R)` is well defined.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Every scalar parameter of the model.
///
/// The shipped defaults are repo-chosen (the source material reports no
/// experimental parameter values); they describe a desk-scale data center
/// with `B = 8` resource units where capacity starts to bind around
/// `lambda_n ≈ 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// NR arrival rate, events per unit time (> 0).
    pub lambda_n: f64,
    /// Per-service completion rate, per unit time, in (0, 1].
    pub mu: f64,
    /// Per-service cross-area movement rate, per unit time, in [0, 1].
    pub p_m: f64,
    /// Total resource units in the DC (>= 1).
    pub capacity_b: u32,
    /// Maximum units allocatable to one service (1 ..= capacity_b).
    pub max_alloc_c: u32,
    /// Maximum allowable service distance in hops (>= 1).
    pub max_distance_d: u32,
    /// Lump income per finished service.
    pub income_finish: f64,
    /// Lump income per completed migration.
    pub income_migrate: f64,
    /// Lump loss for rejecting an NR (>= 0).
    pub loss_reject_nr: f64,
    /// Lump overhead for migrating service data (>= 0).
    pub cost_migrate: f64,
    /// Lump loss for a service interruption (>= 0).
    pub loss_interrupt: f64,
    /// Price of one resource unit per unit time (>= 0).
    pub price_resource: f64,
    /// Delay weight in the cost rate; pairs with `weight_occupancy`.
    pub weight_delay: f64,
    /// Occupancy weight in the cost rate; `weight_delay + weight_occupancy = 1`.
    pub weight_occupancy: f64,
    /// NR weight in the rejection constraint; pairs with `weight_mr`.
    pub weight_nr: f64,
    /// MR weight in the rejection constraint; `weight_nr + weight_mr = 1`.
    pub weight_mr: f64,
    /// Maximum allowable NR rejection probability, in [0, 1].
    pub max_reject_nr: f64,
    /// Maximum allowable MR rejection probability, in [0, 1].
    pub max_reject_mr: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda_n: 2.0,
            mu: 0.25,
            p_m: 0.95,
            capacity_b: 8,
            max_alloc_c: 3,
            max_distance_d: 3,
            income_finish: 10.0,
            income_migrate: 10.0,
            loss_reject_nr: 4.0,
            cost_migrate: 4.0,
            loss_interrupt: 40.0,
            price_resource: 1.0,
            weight_delay: 0.7,
            weight_occupancy: 0.3,
            weight_nr: 0.6,
            weight_mr: 0.4,
            max_reject_nr: 0.05,
            max_reject_mr: 0.05,
        }
    }
}

const SUM_TOL: f64 = 1e-9;

impl ModelParams {
    /// Checks every invariant and returns the parameters unchanged when all
    /// hold. The first violated invariant is reported by name.
    pub fn validate(self) -> Result<Self, ConfigError> {
        let fail = |msg: &str| Err(ConfigError::Invariant(msg.to_string()));
        if !(self.lambda_n.is_finite() && self.lambda_n > 0.0) {
            return fail("lambda_n must be positive");
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return fail("mu outside (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.p_m) {
            return fail("p_m outside [0, 1]");
        }
        if self.capacity_b < 1 {
            return fail("capacity_B must be positive");
        }
        if self.max_alloc_c < 1 {
            return fail("max_alloc_C must be at least 1");
        }
        if self.max_alloc_c > self.capacity_b {
            return fail("max_alloc exceeds capacity");
        }
        if self.max_distance_d < 1 {
            return fail("max_distance_D must be at least 1");
        }
        for (name, v) in [
            ("loss_reject_nr", self.loss_reject_nr),
            ("cost_migrate", self.cost_migrate),
            ("loss_interrupt", self.loss_interrupt),
            ("price_resource", self.price_resource),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invariant(format!("{name} must be nonnegative")));
            }
        }
        for (name, v) in [("income_finish", self.income_finish), ("income_migrate", self.income_migrate)] {
            if !v.is_finite() {
                return Err(ConfigError::Invariant(format!("{name} must be finite")));
            }
        }
        for (name, v) in [
            ("weight_delay", self.weight_delay),
            ("weight_occupancy", self.weight_occupancy),
            ("weight_nr", self.weight_nr),
            ("weight_mr", self.weight_mr),
            ("max_reject_nr", self.max_reject_nr),
            ("max_reject_mr", self.max_reject_mr),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invariant(format!("{name} outside [0, 1]")));
            }
        }
        if (self.weight_delay + self.weight_occupancy - 1.0).abs() > SUM_TOL {
            return fail("weight_delay + weight_occupancy must sum to 1");
        }
        if (self.weight_nr + self.weight_mr - 1.0).abs() > SUM_TOL {
            return fail("weight_nr + weight_mr must sum to 1");
        }
        Ok(self)
    }

    /// MR arrival rate `lambda_m = lambda_n * (1 - mu) * p_m`.
    pub fn mr_arrival_rate(&self) -> f64 {
        self.lambda_n * (1.0 - self.mu) * self.p_m
    }

    /// Rejection-probability threshold `rho = w_n * max_reject_nr + w_m * max_reject_mr`.
    pub fn rejection_threshold(&self) -> f64 {
        self.weight_nr * self.max_reject_nr + self.weight_mr * self.max_reject_mr
    }

    /// Parses a flat `key = value` config file (`#` starts a comment).
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text)
    }

    /// Parses config text; unspecified keys keep their default values.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut params = ModelParams::default();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            params.set(key.trim(), value.trim())?;
        }
        Ok(params)
    }

    /// Applies a single `key=value` override (the `--set` mechanism).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        macro_rules! num {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|_| bad())?
            };
        }
        match key {
            "lambda_n" => self.lambda_n = num!(f64),
            "mu" => self.mu = num!(f64),
            "p_m" => self.p_m = num!(f64),
            "capacity_B" => self.capacity_b = num!(u32),
            "max_alloc_C" => self.max_alloc_c = num!(u32),
            "max_distance_D" => self.max_distance_d = num!(u32),
            "income_finish" => self.income_finish = num!(f64),
            "income_migrate" => self.income_migrate = num!(f64),
            "loss_reject_nr" => self.loss_reject_nr = num!(f64),
            "cost_migrate" => self.cost_migrate = num!(f64),
            "loss_interrupt" => self.loss_interrupt = num!(f64),
            "price_resource" => self.price_resource = num!(f64),
            "weight_delay" => self.weight_delay = num!(f64),
            "weight_occupancy" => self.weight_occupancy = num!(f64),
            "weight_nr" => self.weight_nr = num!(f64),
            "weight_mr" => self.weight_mr = num!(f64),
            "max_reject_nr" => self.max_reject_nr = num!(f64),
            "max_reject_mr" => self.max_reject_mr = num!(f64),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Key/value snapshot in config-file key order, for manifests and echoes.
    pub fn to_key_values(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("lambda_n", self.lambda_n.to_string());
        put("mu", self.mu.to_string());
        put("p_m", self.p_m.to_string());
        put("capacity_B", self.capacity_b.to_string());
        put("max_alloc_C", self.max_alloc_c.to_string());
        put("max_distance_D", self.max_distance_d.to_string());
        put("income_finish", self.income_finish.to_string());
        put("income_migrate", self.income_migrate.to_string());
        put("loss_reject_nr", self.loss_reject_nr.to_string());
        put("cost_migrate", self.cost_migrate.to_string());
        put("loss_interrupt", self.loss_interrupt.to_string());
        put("price_resource", self.price_resource.to_string());
        put("weight_delay", self.weight_delay.to_string());
        put("weight_occupancy", self.weight_occupancy.to_string());
        put("weight_nr", self.weight_nr.to_string());
        put("weight_mr", self.weight_mr.to_string());
        put("max_reject_nr", self.max_reject_nr.to_string());
        put("max_reject_mr", self.max_reject_mr.to_string());
        map
    }

    /// Renders the parameters back in the config-file format.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_key_values() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
