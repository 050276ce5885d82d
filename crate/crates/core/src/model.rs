//! Domain types shared by the solver, the controllers and the harness.
//!
//! Units are SI throughout (W, J, s, Hz, bits). Costs are abstract scalars.
//! Per-base-station quantities are stored as `[f64; 2]` indexed by [`EH_BS`]
//! (powered only by harvested energy) and [`HES_BS`] (harvested energy plus
//! the grid).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of the base station powered purely by harvested energy.
pub const EH_BS: usize = 0;
/// Index of the base station with a hybrid (harvest + grid) supply.
pub const HES_BS: usize = 1;

/// Relative tolerance for floating-point feasibility checks.
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor for feasibility checks; quantities span roughly 1e-13..1.
pub const ABS_TOL: f64 = 1e-15;

fn tol(a: f64, b: f64) -> f64 {
    ABS_TOL.max(REL_TOL * a.abs().max(b.abs()))
}

/// `a <= b` up to the crate-wide feasibility tolerance.
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + tol(a, b)
}

/// `a == b` up to the crate-wide feasibility tolerance.
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= tol(a, b)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}

fn positive(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam {
            field,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Static description of the two-cell network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub num_users: usize,
    /// Slot length in seconds.
    pub slot_len: f64,
    /// Bits per packet; one packet arrives per user per slot.
    pub packet_bits: f64,
    /// Bandwidth of one orthogonal channel in Hz.
    pub bandwidth: f64,
    /// Receiver noise power in W.
    pub noise_power: f64,
    /// Peak transmit power per base station in W.
    pub p_max: [f64; 2],
    /// Orthogonal channels per base station.
    pub n_channels: [usize; 2],
    pub grid_cost_per_joule: f64,
    pub drop_cost_per_packet: f64,
    pub weight_grid: f64,
    pub weight_drop: f64,
    /// Largest energy packet that can arrive in one slot, in J.
    pub eh_max: [f64; 2],
    /// Mean channel power gain from each base station.
    pub mean_gain: [f64; 2],
}

impl Default for SystemParams {
    /// Four users, 1 ms slots, 2 kbit packets over 1 MHz channels, 1 W peak
    /// power, 30 mW average harvesting at each station, -40 dB path loss at
    /// 50 m, grid weight 5 and drop weight 0.01.
    fn default() -> Self {
        let slot_len = 1e-3;
        let eh = 2.0 * 0.03 * slot_len;
        let gain = 1e-4 * 50f64.powi(-4);
        Self {
            num_users: 4,
            slot_len,
            packet_bits: 2000.0,
            bandwidth: 1e6,
            noise_power: 1e-13,
            p_max: [1.0, 1.0],
            n_channels: [1, 4],
            grid_cost_per_joule: 1.0,
            drop_cost_per_packet: 1.0,
            weight_grid: 5.0,
            weight_drop: 0.01,
            eh_max: [eh, eh],
            mean_gain: [gain, gain],
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_users == 0 {
            return Err(ModelError::InvalidParam {
                field: "num_users",
                reason: "must be at least 1".into(),
            });
        }
        for (j, &n) in self.n_channels.iter().enumerate() {
            if n == 0 {
                return Err(ModelError::InvalidParam {
                    field: if j == EH_BS {
                        "n_channels_b1"
                    } else {
                        "n_channels_b2"
                    },
                    reason: "must be at least 1".into(),
                });
            }
        }
        positive("slot_len", self.slot_len)?;
        positive("packet_bits", self.packet_bits)?;
        positive("bandwidth", self.bandwidth)?;
        positive("noise_power", self.noise_power)?;
        positive("p_max_b1", self.p_max[EH_BS])?;
        positive("p_max_b2", self.p_max[HES_BS])?;
        positive("grid_cost_per_joule", self.grid_cost_per_joule)?;
        positive("drop_cost_per_packet", self.drop_cost_per_packet)?;
        positive("weight_grid", self.weight_grid)?;
        positive("weight_drop", self.weight_drop)?;
        positive("mean_gain_b1", self.mean_gain[EH_BS])?;
        positive("mean_gain_b2", self.mean_gain[HES_BS])?;
        for (j, &e) in self.eh_max.iter().enumerate() {
            if !(e.is_finite() && e >= 0.0) {
                return Err(ModelError::InvalidParam {
                    field: if j == EH_BS { "eh_max_b1" } else { "eh_max_b2" },
                    reason: format!("must be non-negative and finite, got {e}"),
                });
            }
        }
        Ok(())
    }

    /// Weighted grid cost per Joule.
    pub fn phi_grid(&self) -> f64 {
        self.weight_grid * self.grid_cost_per_joule
    }

    /// Weighted cost per dropped packet.
    pub fn phi_drop(&self) -> f64 {
        self.weight_drop * self.drop_cost_per_packet
    }

    /// Required SNR `2^{R/(w tau)} - 1` for delivering one packet in a slot.
    pub fn snr_threshold(&self) -> f64 {
        (self.packet_bits / (self.bandwidth * self.slot_len)).exp2() - 1.0
    }

    /// Shannon rate over one slot, in bits.
    pub fn throughput(&self, gain: f64, power: f64) -> f64 {
        self.bandwidth * self.slot_len * (gain * power / self.noise_power).ln_1p()
            / std::f64::consts::LN_2
    }

    /// Minimum power delivering exactly one packet over a channel with `gain`.
    /// Returns `f64::INFINITY` for a zero gain.
    pub fn channel_inversion_power(&self, gain: f64) -> f64 {
        if gain <= 0.0 {
            f64::INFINITY
        } else {
            self.snr_threshold() * self.noise_power / gain
        }
    }
}

/// Tuning of the online controller: battery output floors `eps_h`, the
/// cost/drift trade-off `v`, and the battery perturbation levels `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// Smallest non-zero battery output power per station, in W.
    pub eps_h: [f64; 2],
    /// Penalty weight, in J^2/cost.
    pub v: f64,
    /// Target battery levels, in J.
    pub theta: [f64; 2],
}

impl ControlParams {
    /// Control parameters with `theta` set to its smallest admissible value.
    pub fn new(params: &SystemParams, eps_h: [f64; 2], v: f64) -> Result<Self, ModelError> {
        Self::check_eps_v(params, eps_h, v)?;
        let theta = crate::controller::compute_theta(params, eps_h, v);
        Ok(Self { eps_h, v, theta })
    }

    /// Control parameters with explicit `theta`, which must not be below the
    /// smallest admissible value.
    pub fn with_theta(
        params: &SystemParams,
        eps_h: [f64; 2],
        v: f64,
        theta: [f64; 2],
    ) -> Result<Self, ModelError> {
        let ctrl = Self { eps_h, v, theta };
        ctrl.validate(params)?;
        Ok(ctrl)
    }

    fn check_eps_v(params: &SystemParams, eps_h: [f64; 2], v: f64) -> Result<(), ModelError> {
        for j in [EH_BS, HES_BS] {
            let field = if j == EH_BS { "eps_h1" } else { "eps_h2" };
            positive(field, eps_h[j])?;
            if eps_h[j] > params.p_max[j] {
                return Err(ModelError::InvalidParam {
                    field,
                    reason: format!("must not exceed p_max ({} > {})", eps_h[j], params.p_max[j]),
                });
            }
        }
        positive("v", v)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), ModelError> {
        Self::check_eps_v(params, self.eps_h, self.v)?;
        let bound = crate::controller::compute_theta(params, self.eps_h, self.v);
        for j in [EH_BS, HES_BS] {
            if !(self.theta[j].is_finite() && self.theta[j] >= bound[j]) {
                return Err(ModelError::InvalidParam {
                    field: if j == EH_BS { "theta1" } else { "theta2" },
                    reason: format!("{} is below the lower bound {}", self.theta[j], bound[j]),
                });
            }
        }
        Ok(())
    }

    /// Battery capacity the controller needs: `theta_j + E_Hj^max`.
    pub fn required_capacity(&self, params: &SystemParams) -> [f64; 2] {
        [
            self.theta[EH_BS] + params.eh_max[EH_BS],
            self.theta[HES_BS] + params.eh_max[HES_BS],
        ]
    }
}

/// Random inputs revealed at the start of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotObservation {
    /// `gains[j][k]`: channel power gain from station `j` to user `k`.
    pub gains: [Vec<f64>; 2],
    /// Energy arriving at each station this slot, in J.
    pub harvestable: [f64; 2],
}

impl SlotObservation {
    pub fn num_users(&self) -> usize {
        self.gains[EH_BS].len()
    }

    pub fn validate(&self, params: &SystemParams) -> Result<(), ModelError> {
        for j in [EH_BS, HES_BS] {
            if self.gains[j].len() != params.num_users {
                return Err(ModelError::InvalidObservation(format!(
                    "expected {} gains for station {}, got {}",
                    params.num_users,
                    j + 1,
                    self.gains[j].len()
                )));
            }
            if let Some(g) = self.gains[j]
                .iter()
                .find(|g| !(g.is_finite() && **g >= 0.0))
            {
                return Err(ModelError::InvalidObservation(format!("bad gain {g}")));
            }
            let e = self.harvestable[j];
            if !(e >= 0.0 && e <= params.eh_max[j]) {
                return Err(ModelError::InvalidObservation(format!(
                    "harvestable energy {e} outside [0, {}]",
                    params.eh_max[j]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Assignment {
    ServedByEhBs,
    ServedByHesBs,
    Dropped,
}

/// Everything decided in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub assign: Vec<Assignment>,
    /// Harvested power drawn at the EH station per user, in W.
    pub p_h1: Vec<f64>,
    /// Harvested power drawn at the hybrid station per user, in W.
    pub p_h2: Vec<f64>,
    /// Grid power drawn at the hybrid station per user, in W.
    pub p_g: Vec<f64>,
    /// Energy stored into each battery this slot, in J.
    pub harvested: [f64; 2],
}

impl Decision {
    /// Drop every packet, draw nothing, store nothing.
    pub fn idle(num_users: usize) -> Self {
        Self {
            assign: vec![Assignment::Dropped; num_users],
            p_h1: vec![0.0; num_users],
            p_h2: vec![0.0; num_users],
            p_g: vec![0.0; num_users],
            harvested: [0.0, 0.0],
        }
    }

    pub fn num_users(&self) -> usize {
        self.assign.len()
    }

    /// Total harvested power drawn from station `j`'s battery, in W.
    pub fn battery_output(&self, j: usize) -> f64 {
        if j == EH_BS {
            self.p_h1.iter().sum()
        } else {
            self.p_h2.iter().sum()
        }
    }

    pub fn grid_power(&self) -> f64 {
        self.p_g.iter().sum()
    }

    pub fn count(&self, which: Assignment) -> usize {
        self.assign.iter().filter(|&&a| a == which).count()
    }

    /// Checks every per-slot constraint. When `ctrl` is given the battery
    /// outputs must also lie in `{0} U [eps_hj, p_max_j]`.
    pub fn validate(
        &self,
        params: &SystemParams,
        obs: &SlotObservation,
        ctrl: Option<&ControlParams>,
    ) -> Result<(), ModelError> {
        let k_total = params.num_users;
        let bad = |msg: String| Err(ModelError::InvalidDecision(msg));
        if self.assign.len() != k_total
            || self.p_h1.len() != k_total
            || self.p_h2.len() != k_total
            || self.p_g.len() != k_total
        {
            return bad("vector lengths do not match the number of users".into());
        }
        for k in 0..k_total {
            let (p1, p2, pg) = (self.p_h1[k], self.p_h2[k], self.p_g[k]);
            if [p1, p2, pg].iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("user {k}: negative or non-finite power"));
            }
            match self.assign[k] {
                Assignment::ServedByEhBs => {
                    if p2 + pg > 0.0 {
                        return bad(format!("user {k}: served by EH-BS but draws hybrid power"));
                    }
                    if params.throughput(obs.gains[EH_BS][k], p1)
                        < params.packet_bits * (1.0 - REL_TOL)
                    {
                        return bad(format!("user {k}: EH-BS throughput below packet size"));
                    }
                }
                Assignment::ServedByHesBs => {
                    if p1 > 0.0 {
                        return bad(format!("user {k}: served by HES-BS but draws EH power"));
                    }
                    if params.throughput(obs.gains[HES_BS][k], p2 + pg)
                        < params.packet_bits * (1.0 - REL_TOL)
                    {
                        return bad(format!("user {k}: HES-BS throughput below packet size"));
                    }
                }
                Assignment::Dropped => {
                    if p1 + p2 + pg > 0.0 {
                        return bad(format!("user {k}: dropped but draws power"));
                    }
                }
            }
        }
        let served = [
            self.count(Assignment::ServedByEhBs),
            self.count(Assignment::ServedByHesBs),
        ];
        for j in [EH_BS, HES_BS] {
            if served[j] > params.n_channels[j] {
                return bad(format!(
                    "station {} serves {} > {} users",
                    j + 1,
                    served[j],
                    params.n_channels[j]
                ));
            }
        }
        let total = [
            self.battery_output(EH_BS),
            self.battery_output(HES_BS) + self.grid_power(),
        ];
        for j in [EH_BS, HES_BS] {
            if !approx_le(total[j], params.p_max[j]) {
                return bad(format!(
                    "station {} transmits {} W > p_max",
                    j + 1,
                    total[j]
                ));
            }
        }
        for j in [EH_BS, HES_BS] {
            let e = self.harvested[j];
            if !(e >= 0.0 && e <= obs.harvestable[j]) {
                return bad(format!("station {} harvests {e} J outside [0, E]", j + 1));
            }
        }
        if let Some(ctrl) = ctrl {
            for j in [EH_BS, HES_BS] {
                let out = self.battery_output(j);
                if out > 0.0 && !approx_le(ctrl.eps_h[j], out) {
                    return bad(format!(
                        "station {} battery output {out} W inside (0, eps_h)",
                        j + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Battery levels at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkState {
    pub battery: [f64; 2],
    pub slot: u64,
}

/// Service cost accrued in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotCost {
    /// Grid energy in J.
    pub grid_energy: f64,
    pub drops: usize,
    /// Weighted grid cost plus weighted drop cost.
    pub nsc: f64,
}

pub fn slot_cost(decision: &Decision, params: &SystemParams) -> SlotCost {
    let grid_energy = decision.grid_power() * params.slot_len;
    let drops = decision.count(Assignment::Dropped);
    SlotCost {
        grid_energy,
        drops,
        nsc: params.phi_grid() * grid_energy + params.phi_drop() * drops as f64,
    }
}
