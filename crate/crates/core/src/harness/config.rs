//! Experiment configuration file.
//!
//! A TOML file with four sections; every key is optional and defaults to the
//! reference setup (see `configs/reference.toml`).
//!
//! ```toml
//! [system]
//! num_users = 4
//! n_channels_b1 = 1
//! weight_drop = 0.01
//!
//! [control]
//! eps_h1 = 0.04
//! v = 1e-4              # or "capacity" to derive V from capacity_b1/capacity_b2
//!
//! [scenario]
//! seed = 1
//! eh_power_b1 = 0.03    # average harvesting power in W; E_max = 2 P tau
//!
//! [run]
//! policy = "lbapc"
//! slots = 100000
//! ```

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ControlParams, ModelError, SystemParams, EH_BS, HES_BS};
use crate::stochastic::{eh_power_to_max, ScenarioConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub num_users: usize,
    pub slot_len: f64,
    pub packet_bits: f64,
    pub bandwidth: f64,
    pub noise_power: f64,
    pub p_max_b1: f64,
    pub p_max_b2: f64,
    pub n_channels_b1: usize,
    pub n_channels_b2: usize,
    pub grid_cost_per_joule: f64,
    pub drop_cost_per_packet: f64,
    pub weight_grid: f64,
    pub weight_drop: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            num_users: p.num_users,
            slot_len: p.slot_len,
            packet_bits: p.packet_bits,
            bandwidth: p.bandwidth,
            noise_power: p.noise_power,
            p_max_b1: p.p_max[EH_BS],
            p_max_b2: p.p_max[HES_BS],
            n_channels_b1: p.n_channels[EH_BS],
            n_channels_b2: p.n_channels[HES_BS],
            grid_cost_per_joule: p.grid_cost_per_joule,
            drop_cost_per_packet: p.drop_cost_per_packet,
            weight_grid: p.weight_grid,
            weight_drop: p.weight_drop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub eps_h1: f64,
    pub eps_h2: f64,
    /// Explicit V, or `"capacity"` for the largest V the capacities allow.
    #[serde(with = "v_setting")]
    pub v: Option<f64>,
    /// Battery capacities in J. Also clip the greedy policy's batteries.
    pub capacity_b1: Option<f64>,
    pub capacity_b2: Option<f64>,
    /// Override of the perturbation levels; must not be below the minimum.
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            eps_h1: 0.04,
            eps_h2: 0.04,
            v: Some(1e-4),
            capacity_b1: Some(0.1),
            capacity_b2: Some(0.1),
            theta1: None,
            theta2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub seed: u64,
    pub channel_mean_b1: f64,
    pub channel_mean_b2: f64,
    /// Average harvesting power in W.
    pub eh_power_b1: f64,
    pub eh_power_b2: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            seed: 1,
            channel_mean_b1: p.mean_gain[EH_BS],
            channel_mean_b2: p.mean_gain[HES_BS],
            eh_power_b1: 0.03,
            eh_power_b2: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Lbapc,
    Greedy,
    /// The online controller with the exhaustive per-slot solver.
    Oracle,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Lbapc => "lbapc",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Oracle => "oracle",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lbapc" => Ok(PolicyKind::Lbapc),
            "greedy" => Ok(PolicyKind::Greedy),
            "oracle" => Ok(PolicyKind::Oracle),
            other => Err(invalid("policy", format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
    pub slots: u64,
    /// Fraction of initial slots left out of the summary averages.
    pub burn_in: f64,
    /// Keep the per-slot trace.
    pub trace: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Lbapc,
            slots: 100_000,
            burn_in: 0.0,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    pub control: ControlSection,
    pub scenario: ScenarioSection,
    pub run: RunSection,
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system_params()?;
        if self.run.slots == 0 {
            return Err(invalid("run.slots", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.run.burn_in) {
            return Err(invalid("run.burn_in", "must lie in [0, 1)"));
        }
        let k = self.system.num_users;
        if self.run.policy == PolicyKind::Oracle && k > crate::oracle::MAX_USERS {
            return Err(invalid(
                "run.policy",
                format!(
                    "oracle supports at most {} users, got {k}",
                    crate::oracle::MAX_USERS
                ),
            ));
        }
        for (field, cap) in [
            ("control.capacity_b1", self.control.capacity_b1),
            ("control.capacity_b2", self.control.capacity_b2),
        ] {
            if let Some(c) = cap {
                if !(c.is_finite() && c > 0.0) {
                    return Err(invalid(field, format!("must be positive, got {c}")));
                }
            }
        }
        if self.run.policy != PolicyKind::Greedy {
            self.control_params()?;
        }
        Ok(())
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let s = &self.system;
        let sc = &self.scenario;
        for (field, p) in [
            ("scenario.eh_power_b1", sc.eh_power_b1),
            ("scenario.eh_power_b2", sc.eh_power_b2),
        ] {
            if !(p.is_finite() && p >= 0.0) {
                return Err(invalid(field, format!("must be non-negative, got {p}")));
            }
        }
        let params = SystemParams {
            num_users: s.num_users,
            slot_len: s.slot_len,
            packet_bits: s.packet_bits,
            bandwidth: s.bandwidth,
            noise_power: s.noise_power,
            p_max: [s.p_max_b1, s.p_max_b2],
            n_channels: [s.n_channels_b1, s.n_channels_b2],
            grid_cost_per_joule: s.grid_cost_per_joule,
            drop_cost_per_packet: s.drop_cost_per_packet,
            weight_grid: s.weight_grid,
            weight_drop: s.weight_drop,
            eh_max: [
                eh_power_to_max(sc.eh_power_b1, s.slot_len),
                eh_power_to_max(sc.eh_power_b2, s.slot_len),
            ],
            mean_gain: [sc.channel_mean_b1, sc.channel_mean_b2],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn capacity(&self) -> Option<[f64; 2]> {
        Some([self.control.capacity_b1?, self.control.capacity_b2?])
    }

    /// Resolves V (explicit, else from capacity) and theta (override, else minimum).
    pub fn control_params(&self) -> Result<ControlParams, ConfigError> {
        let params = self.system_params()?;
        let c = &self.control;
        let eps = [c.eps_h1, c.eps_h2];
        let v = match (c.v, self.capacity()) {
            (Some(v), _) => v,
            (None, Some(cap)) => crate::controller::v_from_capacity(&params, eps, cap)
                .map_err(|e| invalid("control.capacity", e.to_string()))?,
            (None, None) => {
                return Err(invalid(
                    "control.v",
                    "v = \"capacity\" needs both capacity_b1 and capacity_b2",
                ))
            }
        };
        let mut ctrl = ControlParams::new(&params, eps, v)?;
        if c.theta1.is_some() || c.theta2.is_some() {
            let theta = [
                c.theta1.unwrap_or(ctrl.theta[EH_BS]),
                c.theta2.unwrap_or(ctrl.theta[HES_BS]),
            ];
            ctrl = ControlParams::with_theta(&params, eps, v, theta)?;
        }
        Ok(ctrl)
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig, ConfigError> {
        let params = self.system_params()?;
        Ok(ScenarioConfig::from_params(
            &params,
            self.scenario.seed,
            self.run.slots,
        ))
    }
}

mod v_setting {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Value(f64),
        Keyword(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Raw::Value(*x),
            None => Raw::Keyword("capacity".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Value(x) => Ok(Some(x)),
            Raw::Keyword(k) if k == "capacity" => Ok(None),
            Raw::Keyword(k) => Err(serde::de::Error::custom(format!(
                "expected a number or \"capacity\", got \"{k}\""
            ))),
        }
    }
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    V,
    EpsH,
    PH1,
    PH2,
    WD,
    NB1,
    /// Number of users; the hybrid station gets one channel per user.
    K,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::V => "V",
            SweepAxis::EpsH => "eps_h",
            SweepAxis::PH1 => "P_H1",
            SweepAxis::PH2 => "P_H2",
            SweepAxis::WD => "w_D",
            SweepAxis::NB1 => "N_B1",
            SweepAxis::K => "K",
        }
    }

    /// Copy of `cfg` with this axis set to `value`.
    pub fn apply(self, cfg: &Config, value: f64) -> Result<Config, ConfigError> {
        let mut out = cfg.clone();
        let count = |v: f64| -> Result<usize, ConfigError> {
            if v >= 1.0 && v.fract() == 0.0 && v < 1e6 {
                Ok(v as usize)
            } else {
                Err(invalid(
                    self.as_str(),
                    format!("expected a positive integer, got {v}"),
                ))
            }
        };
        match self {
            SweepAxis::V => out.control.v = Some(value),
            SweepAxis::EpsH => {
                out.control.eps_h1 = value;
                out.control.eps_h2 = value;
            }
            SweepAxis::PH1 => out.scenario.eh_power_b1 = value,
            SweepAxis::PH2 => out.scenario.eh_power_b2 = value,
            SweepAxis::WD => out.system.weight_drop = value,
            SweepAxis::NB1 => out.system.n_channels_b1 = count(value)?,
            SweepAxis::K => {
                let k = count(value)?;
                out.system.num_users = k;
                out.system.n_channels_b2 = k;
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(
            match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                "v" => SweepAxis::V,
                "eps_h" | "eps" => SweepAxis::EpsH,
                "p_h1" => SweepAxis::PH1,
                "p_h2" => SweepAxis::PH2,
                "w_d" => SweepAxis::WD,
                "n_b1" => SweepAxis::NB1,
                "k" => SweepAxis::K,
                other => return Err(invalid("sweep", format!("unknown axis `{other}`"))),
            },
        )
    }
}
