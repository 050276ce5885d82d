//! Cost-aware greedy benchmark.
//!
//! Each slot, in order:
//! 1. users by descending EH-station gain are served from the EH battery at
//!    inversion power while the battery, the peak power and the channels last;
//! 2. the rest, by descending hybrid-station gain, are served from the hybrid
//!    station's battery the same way;
//! 3. the rest, by descending hybrid-station gain, are served from the grid
//!    when `phi_G rho tau < phi_D` and power and channels remain.
//!
//! A user that does not fit is skipped and the scan continues. A user's power
//! never mixes battery and grid. Every arrival is stored, up to the optional
//! battery capacity.

use crate::controller::{ControlError, Policy, SlotRecord};
use crate::model::{
    slot_cost, Assignment, Decision, NetworkState, SlotObservation, SystemParams, EH_BS, HES_BS,
};

#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    params: SystemParams,
    state: NetworkState,
    capacity: Option<[f64; 2]>,
}

fn by_descending_gain(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    order
}

impl GreedyPolicy {
    pub fn new(params: SystemParams, capacity: Option<[f64; 2]>) -> Result<Self, ControlError> {
        params.validate()?;
        Ok(Self {
            params,
            state: NetworkState::default(),
            capacity,
        })
    }

    /// Decision for `obs` given the current battery levels.
    pub fn decide(&self, obs: &SlotObservation) -> Decision {
        let p = &self.params;
        let k = p.num_users;
        let tau = p.slot_len;
        let mut d = Decision::idle(k);
        let rho = [EH_BS, HES_BS].map(|j| {
            obs.gains[j]
                .iter()
                .map(|&h| p.channel_inversion_power(h))
                .collect::<Vec<_>>()
        });

        // EH station from its battery.
        let mut budget = self.state.battery[EH_BS];
        let mut power = 0.0;
        let mut channels = 0;
        for u in by_descending_gain(&obs.gains[EH_BS]) {
            if channels == p.n_channels[EH_BS] {
                break;
            }
            let r = rho[EH_BS][u];
            if r.is_finite() && r * tau <= budget && power + r <= p.p_max[EH_BS] {
                d.assign[u] = Assignment::ServedByEhBs;
                d.p_h1[u] = r;
                budget -= r * tau;
                power += r;
                channels += 1;
            }
        }

        // Hybrid station from its battery, then from the grid.
        let order = by_descending_gain(&obs.gains[HES_BS]);
        let mut budget = self.state.battery[HES_BS];
        let mut power = 0.0;
        let mut channels = 0;
        for &u in &order {
            if channels == p.n_channels[HES_BS] {
                break;
            }
            let r = rho[HES_BS][u];
            if d.assign[u] == Assignment::Dropped
                && r.is_finite()
                && r * tau <= budget
                && power + r <= p.p_max[HES_BS]
            {
                d.assign[u] = Assignment::ServedByHesBs;
                d.p_h2[u] = r;
                budget -= r * tau;
                power += r;
                channels += 1;
            }
        }
        for &u in &order {
            if channels == p.n_channels[HES_BS] {
                break;
            }
            let r = rho[HES_BS][u];
            if d.assign[u] == Assignment::Dropped
                && p.phi_grid() * r * tau < p.phi_drop()
                && power + r <= p.p_max[HES_BS]
            {
                d.assign[u] = Assignment::ServedByHesBs;
                d.p_g[u] = r;
                power += r;
                channels += 1;
            }
        }
        d.harvested = obs.harvestable;
        d
    }
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn state(&self) -> NetworkState {
        self.state
    }

    fn step(&mut self, obs: &SlotObservation) -> Result<SlotRecord, ControlError> {
        obs.validate(&self.params)?;
        let decision = self.decide(obs);
        decision.validate(&self.params, obs, None)?;
        let tau = self.params.slot_len;
        let start = self.state.battery;
        let mut next = start;
        for j in [EH_BS, HES_BS] {
            let drawn = decision.battery_output(j) * tau;
            if !crate::model::approx_le(drawn, start[j]) {
                return Err(ControlError::CausalityViolation {
                    station: j + 1,
                    drawn,
                    stored: start[j],
                });
            }
            next[j] = (start[j] - drawn).max(0.0) + decision.harvested[j];
            if let Some(cap) = self.capacity {
                next[j] = next[j].min(cap[j]);
            }
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

    fn params(k: usize) -> SystemParams {
        SystemParams {
            num_users: k,
            ..SystemParams::default()
        }
    }

    fn gain_for(p: &SystemParams, rho: f64) -> f64 {
        p.snr_threshold() * p.noise_power / rho
    }

    #[test]
    fn drops_everyone_without_energy_when_grid_is_dear() {
        let mut p = params(3);
        p.weight_drop = 1e-7;
        let g = GreedyPolicy::new(p.clone(), None).unwrap();
        let obs = SlotObservation {
            gains: [vec![gain_for(&p, 0.01); 3], vec![gain_for(&p, 0.01); 3]],
            harvestable: [0.0, 0.0],
        };
        let d = g.decide(&obs);
        assert_eq!(d.assign, vec![Assignment::Dropped; 3]);
    }

    #[test]
    fn single_user_prefers_stored_eh_energy() {
        let p = params(1);
        let mut g = GreedyPolicy::new(p.clone(), None).unwrap();
        g.state.battery = [0.021 * p.slot_len, 0.0];
        let obs = SlotObservation {
            gains: [vec![gain_for(&p, 0.02)], vec![gain_for(&p, 0.001)]],
            harvestable: [1e-5, 2e-5],
        };
        let rec = g.step(&obs).unwrap();
        assert_eq!(rec.decision.assign[0], Assignment::ServedByEhBs);
        assert!((rec.decision.p_h1[0] - 0.02).abs() < 1e-15);
        assert!((g.state().battery[EH_BS] - 0.001 * p.slot_len - 1e-5).abs() < 1e-15);
        assert_eq!(g.state().battery[HES_BS], 2e-5);
    }

    #[test]
    fn order_and_skipping() {
        let mut p = params(4);
        p.n_channels = [2, 4];
        let mut g = GreedyPolicy::new(p.clone(), None).unwrap();
        // EH battery fits 0.03 W for one slot.
        g.state.battery = [0.03 * p.slot_len, 0.0];
        let rho1 = [0.02, 0.01, 0.5, 0.015];
        let rho2 = [0.02, 0.04, 0.03, 0.01];
        let obs = SlotObservation {
            gains: [
                rho1.iter().map(|&r| gain_for(&p, r)).collect(),
                rho2.iter().map(|&r| gain_for(&p, r)).collect(),
            ],
            harvestable: [0.0, 0.0],
        };
        let d = g.decide(&obs);
        // best EH channels: user 1 (0.01), then user 3 (0.015) fits (0.025 total)
        assert_eq!(d.assign[1], Assignment::ServedByEhBs);
        assert_eq!(d.assign[3], Assignment::ServedByEhBs);
        // users 0 and 2 go to the grid
        assert_eq!(d.assign[0], Assignment::ServedByHesBs);
        assert_eq!(d.assign[2], Assignment::ServedByHesBs);
        assert!((d.p_g[0] - 0.02).abs() < 1e-15);
        assert!((d.p_g[2] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn capacity_clips_storage() {
        let p = params(2);
        let mut g = GreedyPolicy::new(p.clone(), Some([1e-4, 1e-4])).unwrap();
        let obs = SlotObservation {
            gains: [vec![0.0; 2], vec![0.0; 2]],
            harvestable: [6e-5, 6e-5],
        };
        for _ in 0..10 {
            g.step(&obs).unwrap();
        }
        assert_eq!(g.state().battery, [1e-4, 1e-4]);
    }
}
