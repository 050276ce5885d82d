//! Online drift-plus-penalty controller and its parameter calculators.
//!
//! Each slot the controller reads the virtual queues `vq_j = B_j - theta_j`,
//! solves the per-slot problem, checks the battery draw against what is
//! stored, and advances `B_j <- B_j - tau sum_k p_Hj,k + e_j`.
//!
//! With `theta` at or above [`compute_theta`], battery levels stay inside
//! `[0, theta_j + E_Hj^max]` and a station whose battery holds less than
//! `p_max_j tau` never draws from it. Both are checked every slot and a
//! violation aborts the run.

use thiserror::Error;

use crate::model::{
    approx_le, slot_cost, ControlParams, Decision, ModelError, NetworkState, SlotCost,
    SlotObservation, SystemParams, EH_BS, HES_BS,
};
use crate::oracle::{self, OracleError};
use crate::solver::{solve_outer, SlotProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("station {station}: drawing {drawn} J from a battery holding {stored} J")]
    CausalityViolation {
        station: usize,
        drawn: f64,
        stored: f64,
    },
    #[error("station {station}: battery {battery} J is below p_max*tau but {output} W was drawn")]
    ThresholdViolation {
        station: usize,
        battery: f64,
        output: f64,
    },
    #[error("capacity too small: V_{station} = {value} is not positive")]
    NonPositiveV { station: usize, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn cross_term(params: &SystemParams, j: usize) -> f64 {
    if params.num_users == 1 {
        0.0
    } else {
        let o = 1 - j;
        params.eh_max[o] * params.p_max[o] * params.slot_len
    }
}

/// Smallest admissible perturbation levels:
/// `theta_j = p_max_j tau + (V K phi_D + 1{K != 1} E_max_o p_max_o tau) / (eps_j tau)`
/// where `o` is the other station.
pub fn compute_theta(params: &SystemParams, eps_h: [f64; 2], v: f64) -> [f64; 2] {
    let tau = params.slot_len;
    let vk = v * params.num_users as f64 * params.phi_drop();
    [EH_BS, HES_BS].map(|j| params.p_max[j] * tau + (vk + cross_term(params, j)) / (eps_h[j] * tau))
}

/// Largest `V` whose required capacity `theta_j + E_Hj^max` fits in
/// `capacity[j]` for both stations.
pub fn v_from_capacity(
    params: &SystemParams,
    eps_h: [f64; 2],
    capacity: [f64; 2],
) -> Result<f64, ControlError> {
    let tau = params.slot_len;
    let kd = params.num_users as f64 * params.phi_drop();
    let mut v = f64::INFINITY;
    for j in [EH_BS, HES_BS] {
        let headroom = capacity[j] - params.eh_max[j] - params.p_max[j] * tau;
        let vj = (headroom * eps_h[j] * tau - cross_term(params, j)) / kd;
        if vj.is_nan() || vj <= 0.0 {
            return Err(ControlError::NonPositiveV {
                station: j + 1,
                value: vj,
            });
        }
        v = v.min(vj);
    }
    Ok(v)
}

/// Drift bound constant `C = (sum_j E_max_j^2 + sum_j (p_max_j tau)^2) / 2`.
pub fn drift_constant(params: &SystemParams) -> f64 {
    let tau = params.slot_len;
    0.5 * params.eh_max.iter().map(|e| e * e).sum::<f64>()
        + 0.5 * params.p_max.iter().map(|p| (p * tau).powi(2)).sum::<f64>()
}

/// Gap between the tightened and the original problem's optimal costs:
/// `(1 - F(eta)^K) K phi_D + eps_2 tau phi_G` with `eta` the EH-station gain
/// at which `eps_1` is exactly the inversion power.
pub fn nu_bound(params: &SystemParams, eps_h: [f64; 2], channel_cdf: impl Fn(f64) -> f64) -> f64 {
    let eta = params.snr_threshold() * params.noise_power / eps_h[EH_BS];
    let k = params.num_users as i32;
    let all_unservable = channel_cdf(eta).powi(k);
    (1.0 - all_unservable) * k as f64 * params.phi_drop()
        + eps_h[HES_BS] * params.slot_len * params.phi_grid()
}

/// One slot of a simulated policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    /// Battery levels at the start of the slot, in J.
    pub battery: [f64; 2],
    pub decision: Decision,
    pub cost: SlotCost,
}

/// A per-slot control policy driven by observations.
pub trait Policy {
    fn name(&self) -> &'static str;
    fn state(&self) -> NetworkState;
    fn step(&mut self, obs: &SlotObservation) -> Result<SlotRecord, ControlError>;
}

/// How the controller solves each slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlotSolver {
    #[default]
    InnerOuter,
    /// Exhaustive enumeration; small instances only.
    BruteForce,
}

/// The online controller.
#[derive(Debug, Clone)]
pub struct LbapcController {
    params: SystemParams,
    ctrl: ControlParams,
    state: NetworkState,
    solver: SlotSolver,
}

impl LbapcController {
    /// Starts with empty batteries.
    pub fn new(params: SystemParams, ctrl: ControlParams) -> Result<Self, ControlError> {
        params.validate()?;
        ctrl.validate(&params)?;
        Ok(Self {
            params,
            ctrl,
            state: NetworkState::default(),
            solver: SlotSolver::InnerOuter,
        })
    }

    pub fn with_solver(mut self, solver: SlotSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn control(&self) -> &ControlParams {
        &self.ctrl
    }

    pub fn virtual_queues(&self) -> [f64; 2] {
        [EH_BS, HES_BS].map(|j| self.state.battery[j] - self.ctrl.theta[j])
    }

    fn decide(&self, obs: &SlotObservation) -> Result<Decision, ControlError> {
        let vq = self.virtual_queues();
        Ok(match self.solver {
            SlotSolver::InnerOuter => {
                solve_outer(&SlotProblem::new(&self.params, &self.ctrl, obs, vq)).decision
            }
            SlotSolver::BruteForce => {
                oracle::brute_force_slot(&self.params, &self.ctrl, obs, vq)?.decision
            }
        })
    }
}

impl Policy for LbapcController {
    fn name(&self) -> &'static str {
        match self.solver {
            SlotSolver::InnerOuter => "lbapc",
            SlotSolver::BruteForce => "oracle",
        }
    }

    fn state(&self) -> NetworkState {
        self.state
    }

    fn step(&mut self, obs: &SlotObservation) -> Result<SlotRecord, ControlError> {
        obs.validate(&self.params)?;
        let decision = self.decide(obs)?;
        decision.validate(&self.params, obs, Some(&self.ctrl))?;

        let tau = self.params.slot_len;
        let start = self.state.battery;
        let mut next = start;
        for j in [EH_BS, HES_BS] {
            let output = decision.battery_output(j);
            if output > 0.0 && start[j] < self.params.p_max[j] * tau {
                return Err(ControlError::ThresholdViolation {
                    station: j + 1,
                    battery: start[j],
                    output,
                });
            }
            let drawn = output * tau;
            if !approx_le(drawn, start[j]) {
                return Err(ControlError::CausalityViolation {
                    station: j + 1,
                    drawn,
                    stored: start[j],
                });
            }
            // the clamp only absorbs rounding in the per-user power sum
            next[j] = (start[j] - drawn).max(0.0) + decision.harvested[j];
        }

        let cost = slot_cost(&decision, &self.params);
        let record = SlotRecord {
            slot: self.state.slot,
            battery: start,
            decision,
            cost,
        };
        self.state = NetworkState {
            battery: next,
            slot: self.state.slot + 1,
        };
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::exponential_cdf;

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn theta_reference_value() {
        let p = params();
        let theta = compute_theta(&p, [0.04, 0.04], 1e-4);
        // 1e-3 + (1e-4 * 4 * 0.01 + 6e-5 * 1 * 1e-3) / (0.04 * 1e-3)
        let expected = 1e-3 + (4e-6 + 6e-8) / 4e-5;
        assert!((theta[0] - expected).abs() < 1e-12);
        assert!((theta[0] - 0.1025).abs() < 1e-4);
        assert!((theta[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn theta_single_user_has_no_cross_term() {
        let p = SystemParams {
            num_users: 1,
            ..params()
        };
        let theta = compute_theta(&p, [0.04, 0.04], 1e-4);
        let expected = 1e-3 + 1e-4 * 0.01 / (0.04 * 1e-3);
        assert!((theta[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn theta_monotonicity() {
        let p = params();
        let a = compute_theta(&p, [0.04, 0.04], 1e-4);
        let b = compute_theta(&p, [0.04, 0.04], 2e-4);
        let c = compute_theta(&p, [0.08, 0.08], 1e-4);
        assert!(b[0] > a[0] && b[1] > a[1]);
        assert!(c[0] < a[0] && c[1] < a[1]);
    }

    #[test]
    fn v_from_capacity_values() {
        let p = params();
        let v = v_from_capacity(&p, [0.04, 0.04], [0.1, 0.1]).unwrap();
        assert!((v - 1e-4).abs() < 0.05e-4, "v = {v}");
        let err = v_from_capacity(&p, [0.04, 0.04], [5e-4, 0.1]);
        assert!(matches!(
            err,
            Err(ControlError::NonPositiveV { station: 1, .. })
        ));
    }

    #[test]
    fn v_from_capacity_round_trip() {
        let p = params();
        let cap = [0.15, 0.12];
        let v = v_from_capacity(&p, [0.04, 0.05], cap).unwrap();
        let theta = compute_theta(&p, [0.04, 0.05], v);
        for j in 0..2 {
            assert!(theta[j] + p.eh_max[j] <= cap[j] * (1.0 + 1e-12));
        }
        // the binding station is filled exactly
        let fill = (0..2)
            .map(|j| theta[j] + p.eh_max[j] - cap[j])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(fill.abs() < 1e-12);
    }

    #[test]
    fn drift_constant_values() {
        let p = params();
        let expected = 0.5 * 2.0 * 6e-5f64.powi(2) + 0.5 * 2.0 * 1e-3f64.powi(2);
        assert!((drift_constant(&p) - expected).abs() < 1e-20);
        assert!((drift_constant(&p) - 1.0036e-6).abs() < 1e-10);
        let zero = SystemParams {
            eh_max: [0.0, 0.0],
            ..params()
        };
        let doubled = SystemParams {
            eh_max: [0.0, 0.0],
            p_max: [2.0, 2.0],
            ..params()
        };
        assert!((drift_constant(&doubled) / drift_constant(&zero) - 4.0).abs() < 1e-12);
        let none = SystemParams {
            eh_max: [0.0, 0.0],
            p_max: [0.0, 0.0],
            ..params()
        };
        assert_eq!(drift_constant(&none), 0.0);
    }

    #[test]
    fn nu_bound_values() {
        let p = params();
        let cdf = exponential_cdf(1.6e-11);
        let eta: f64 = 3e-13 / 0.04;
        assert!((eta - 7.5e-12).abs() < 1e-24);
        let first = (1.0 - (1.0 - (-eta / 1.6e-11).exp()).powi(4)) * 4.0 * 0.01;
        let second: f64 = 0.04 * 1e-3 * 5.0;
        assert!((second - 2e-4).abs() < 1e-18);
        assert!((nu_bound(&p, [0.04, 0.04], &cdf) - (first + second)).abs() < 1e-15);
        // as eps_1 -> 0 the first term vanishes
        let tiny = nu_bound(&p, [1e-9, 0.04], &cdf);
        assert!((tiny - second).abs() < 1e-12);
    }

    #[test]
    fn empty_batteries_draw_nothing_first_slot() {
        let p = params();
        let ctrl = ControlParams::new(&p, [0.04, 0.04], 1e-4).unwrap();
        let mut c = LbapcController::new(p, ctrl).unwrap();
        let obs = SlotObservation {
            gains: [vec![3e-11; 4], vec![2e-11; 4]],
            harvestable: [5e-5, 4e-5],
        };
        let rec = c.step(&obs).unwrap();
        assert_eq!(rec.battery, [0.0, 0.0]);
        assert_eq!(rec.decision.battery_output(EH_BS), 0.0);
        assert_eq!(rec.decision.battery_output(HES_BS), 0.0);
        assert_eq!(c.state().battery, [5e-5, 4e-5]);
        assert_eq!(c.state().slot, 1);
    }

    #[test]
    fn no_arrivals_keep_batteries_empty() {
        let p = params();
        let ctrl = ControlParams::new(&p, [0.04, 0.04], 1e-4).unwrap();
        let mut c = LbapcController::new(p.clone(), ctrl).unwrap();
        let gains = [[1e-11, 3e-11, 5e-12, 2e-11], [4e-11, 1e-12, 2e-11, 9e-12]];
        for t in 0..200 {
            let obs = SlotObservation {
                gains: [0, 1].map(|j| {
                    gains[j]
                        .iter()
                        .map(|g| g * (1.0 + 0.01 * t as f64))
                        .collect()
                }),
                harvestable: [0.0, 0.0],
            };
            let rec = c.step(&obs).unwrap();
            assert_eq!(rec.decision.battery_output(EH_BS), 0.0);
            assert_eq!(rec.decision.battery_output(HES_BS), 0.0);
        }
        assert_eq!(c.state().battery, [0.0, 0.0]);
    }

    #[test]
    fn brute_force_solver_runs_in_the_loop() {
        let p = params();
        let ctrl = ControlParams::new(&p, [0.04, 0.04], 1e-4).unwrap();
        let mut c = LbapcController::new(p, ctrl)
            .unwrap()
            .with_solver(SlotSolver::BruteForce);
        assert_eq!(c.name(), "oracle");
        let obs = SlotObservation {
            gains: [vec![3e-11; 4], vec![2e-11; 4]],
            harvestable: [5e-5, 4e-5],
        };
        c.step(&obs).unwrap();
    }
}
