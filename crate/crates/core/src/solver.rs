//! Exact per-slot solver for the online controller.
//!
//! The slot objective is
//!
//! ```text
//!   sum_j vq_j (e_j - tau sum_k p_Hj,k) + V sum_k (phi_G p_G,k tau + phi_D 1{k dropped})
//! ```
//!
//! The harvesting term separates ([`optimal_harvest`]). The rest is solved by
//! the inner-outer search: the outer loop ([`solve_outer`]) enumerates every
//! admissible set of users served by the EH station, with its power in closed
//! form ([`eh_bs_power`]); for each set the inner problem ([`solve_inner`])
//! serves a prefix of the remaining users, sorted by inversion power, from the
//! hybrid station.
//!
//! Objective bookkeeping charges `+V phi_D` per dropped packet, so the
//! reported value equals `Phi(H) + J_in(H) + V K phi_D`.

use crate::model::{
    Assignment, ControlParams, Decision, SlotObservation, SystemParams, EH_BS, HES_BS,
};

/// Inputs of one per-slot problem with the inversion powers precomputed.
#[derive(Debug, Clone)]
pub struct SlotProblem<'a> {
    pub params: &'a SystemParams,
    pub ctrl: &'a ControlParams,
    pub obs: &'a SlotObservation,
    /// Virtual queues `B_j - theta_j`, in J.
    pub vq: [f64; 2],
    /// `rho[j][k]`: inversion power from station `j` to user `k`; infinite
    /// for a zero gain.
    pub rho: [Vec<f64>; 2],
}

impl<'a> SlotProblem<'a> {
    pub fn new(
        params: &'a SystemParams,
        ctrl: &'a ControlParams,
        obs: &'a SlotObservation,
        vq: [f64; 2],
    ) -> Self {
        let rho = [EH_BS, HES_BS].map(|j| {
            obs.gains[j]
                .iter()
                .map(|&h| params.channel_inversion_power(h))
                .collect()
        });
        Self {
            params,
            ctrl,
            obs,
            vq,
            rho,
        }
    }

    pub fn num_users(&self) -> usize {
        self.params.num_users
    }
}

/// Optimal hybrid-station side for a fixed EH-served set.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    /// Served users in ascending inversion power (ties by index).
    pub served: Vec<usize>,
    pub p_h2: Vec<f64>,
    pub p_g: Vec<f64>,
    /// Inner objective: `tau sum_k (-vq_2 p_H2,k + V phi_G p_G,k) - V phi_D |served|`.
    pub objective: f64,
}

impl InnerSolution {
    fn empty(k: usize) -> Self {
        Self {
            served: Vec::new(),
            p_h2: vec![0.0; k],
            p_g: vec![0.0; k],
            objective: 0.0,
        }
    }
}

/// Full per-slot solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSolution {
    pub decision: Decision,
    /// Assignment/power part of the slot objective (drops charged).
    pub objective: f64,
    /// Bitmask of the EH-served set.
    pub eh_set: u64,
}

/// Which closed form the inner problem uses for a given `vq_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerCase {
    /// `-vq_2 > V phi_G`: grid only.
    GridOnly,
    /// `vq_2 >= 0`: all harvested, at full peak power.
    FullHarvest,
    /// `0 < -vq_2 <= V phi_G`: harvested or grid, never mixed.
    Mixed,
}

pub fn inner_case(vq2: f64, ctrl: &ControlParams, params: &SystemParams) -> InnerCase {
    if vq2 >= 0.0 {
        InnerCase::FullHarvest
    } else if -vq2 > ctrl.v * params.phi_grid() {
        InnerCase::GridOnly
    } else {
        InnerCase::Mixed
    }
}

/// Store the whole arrival iff the virtual queue is non-positive.
pub fn optimal_harvest(vq: [f64; 2], obs: &SlotObservation) -> [f64; 2] {
    [EH_BS, HES_BS].map(|j| {
        if vq[j] <= 0.0 {
            obs.harvestable[j]
        } else {
            0.0
        }
    })
}

/// Harvested and grid power for a fixed served set at the hybrid station
/// when `0 < -vq_2 <= V phi_G`. Returns `(p_h2, p_g)` over all users.
///
/// With `rho_sum` the served users' total inversion power and
/// `t = -vq_2 eps_2 / (V phi_G)`:
/// `[0, t]` all grid at inversion power; `(t, eps_2]` all harvested, scaled up
/// to total `eps_2`; `(eps_2, p_max]` all harvested at inversion power.
pub fn hes_power_split(
    rho_sum: f64,
    vq2: f64,
    rho: &[f64],
    served: &[usize],
    ctrl: &ControlParams,
    params: &SystemParams,
) -> (Vec<f64>, Vec<f64>) {
    let vphi = ctrl.v * params.phi_grid();
    assert!(
        -vq2 > 0.0 && -vq2 <= vphi,
        "hes_power_split requires 0 < -vq2 <= V phi_G"
    );
    assert!(!served.is_empty(), "hes_power_split requires a served user");
    let eps = ctrl.eps_h[HES_BS];
    let threshold = -vq2 * eps / vphi;
    let k = rho.len();
    let mut p_h2 = vec![0.0; k];
    let mut p_g = vec![0.0; k];
    for &u in served {
        if rho_sum <= threshold {
            p_g[u] = rho[u];
        } else if rho_sum <= eps {
            p_h2[u] = rho[u] / rho_sum * eps;
        } else {
            p_h2[u] = rho[u];
        }
    }
    (p_h2, p_g)
}

/// Battery power of the EH station for the served set `members`.
///
/// Empty set: nothing. `vq_1 >= 0`: full peak power split in proportion to
/// inversion power. `vq_1 < 0`: inversion power, scaled up so the total is
/// at least `eps_1`.
pub fn eh_bs_power(
    members: &[usize],
    vq1: f64,
    rho: &[f64],
    ctrl: &ControlParams,
    params: &SystemParams,
) -> Vec<f64> {
    let mut p = vec![0.0; rho.len()];
    if members.is_empty() {
        return p;
    }
    let rho_sum: f64 = members.iter().map(|&u| rho[u]).sum();
    assert!(
        members.len() <= params.n_channels[EH_BS] && rho_sum <= params.p_max[EH_BS],
        "EH-served set is not admissible"
    );
    let eps = ctrl.eps_h[EH_BS];
    for &u in members {
        p[u] = if vq1 >= 0.0 {
            rho[u] / rho_sum * params.p_max[EH_BS]
        } else {
            rho[u] / rho_sum.min(eps) * eps
        };
    }
    p
}

/// Outer cost of serving `members` from the EH station.
fn eh_cost(prob: &SlotProblem, members: &[usize], rho_sum: f64) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let p = prob.params;
    let vq1 = prob.vq[EH_BS];
    let power = if vq1 >= 0.0 {
        p.p_max[EH_BS]
    } else {
        rho_sum.max(prob.ctrl.eps_h[EH_BS])
    };
    -vq1 * power * p.slot_len - prob.ctrl.v * p.phi_drop() * members.len() as f64
}

/// Optimal hybrid-station service of the users not in `excluded`.
pub fn solve_inner(prob: &SlotProblem, excluded: &[bool]) -> InnerSolution {
    let params = prob.params;
    let ctrl = prob.ctrl;
    let k = prob.num_users();
    let rho = &prob.rho[HES_BS];
    let mut cands: Vec<usize> = (0..k)
        .filter(|&u| !excluded[u] && rho[u].is_finite())
        .collect();
    if cands.is_empty() {
        return InnerSolution::empty(k);
    }
    cands.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));

    let p_max = params.p_max[HES_BS];
    let cap = params.n_channels[HES_BS].min(cands.len());
    // prefix[i] = sum of the i smallest inversion powers
    let mut prefix = vec![0.0];
    for &u in &cands[..cap] {
        let next = prefix.last().unwrap() + rho[u];
        if next > p_max {
            break;
        }
        prefix.push(next);
    }
    let longest = prefix.len() - 1;

    let tau = params.slot_len;
    let vq2 = prob.vq[HES_BS];
    let v_drop = ctrl.v * params.phi_drop();
    let mut sol = InnerSolution::empty(k);
    match inner_case(vq2, ctrl, params) {
        InnerCase::FullHarvest => {
            let m = longest;
            if m > 0 {
                for &u in &cands[..m] {
                    sol.p_h2[u] = rho[u] / prefix[m] * p_max;
                }
                sol.objective = -vq2 * p_max * tau - v_drop * m as f64;
            }
            sol.served = cands[..m].to_vec();
        }
        InnerCase::GridOnly => {
            let phi_g = params.phi_grid();
            let phi_d = params.phi_drop();
            let m = (1..=longest)
                .rev()
                .find(|&i| phi_g * rho[cands[i - 1]] * tau <= phi_d)
                .unwrap_or(0);
            for &u in &cands[..m] {
                sol.p_g[u] = rho[u];
            }
            sol.objective = ctrl.v * phi_g * prefix[m] * tau - v_drop * m as f64;
            sol.served = cands[..m].to_vec();
        }
        InnerCase::Mixed => {
            let vphi = ctrl.v * params.phi_grid();
            let mut best_obj = 0.0;
            let mut best_m = 0;
            for (i, &rho_sum) in prefix.iter().enumerate().skip(1) {
                let obj = mixed_objective(rho_sum, vq2, ctrl.eps_h[HES_BS], vphi, tau)
                    - v_drop * i as f64;
                if obj < best_obj {
                    best_obj = obj;
                    best_m = i;
                }
            }
            if best_m > 0 {
                let served = &cands[..best_m];
                let (p_h2, p_g) = hes_power_split(prefix[best_m], vq2, rho, served, ctrl, params);
                sol.p_h2 = p_h2;
                sol.p_g = p_g;
                sol.served = served.to_vec();
                sol.objective = best_obj;
            }
        }
    }
    sol
}

/// Power part of the inner objective under [`hes_power_split`].
fn mixed_objective(rho_sum: f64, vq2: f64, eps: f64, vphi: f64, tau: f64) -> f64 {
    let threshold = -vq2 * eps / vphi;
    if rho_sum <= threshold {
        vphi * rho_sum * tau
    } else if rho_sum <= eps {
        -vq2 * eps * tau
    } else {
        -vq2 * rho_sum * tau
    }
}

/// Exact minimiser of the per-slot problem.
///
/// EH-served sets are visited in ascending bitmask order and only a strictly
/// smaller objective replaces the incumbent, so ties go to the lowest mask.
pub fn solve_outer(prob: &SlotProblem) -> SlotSolution {
    let params = prob.params;
    let k = prob.num_users();
    assert!(k < 64, "bitmask enumeration supports at most 63 users");
    let rho1 = &prob.rho[EH_BS];
    let eligible: u64 = (0..k)
        .filter(|&u| rho1[u] <= params.p_max[EH_BS])
        .fold(0, |m, u| m | (1 << u));
    let drop_all = prob.ctrl.v * params.phi_drop() * k as f64;

    let mut best: Option<(f64, u64, InnerSolution)> = None;
    let mut excluded = vec![false; k];
    let mut members = Vec::with_capacity(k);
    for mask in 0..(1u64 << k) {
        if mask & !eligible != 0 || mask.count_ones() as usize > params.n_channels[EH_BS] {
            continue;
        }
        members.clear();
        members.extend((0..k).filter(|&u| mask >> u & 1 == 1));
        let rho_sum: f64 = members.iter().map(|&u| rho1[u]).sum();
        if rho_sum > params.p_max[EH_BS] {
            continue;
        }
        for (u, ex) in excluded.iter_mut().enumerate() {
            *ex = mask >> u & 1 == 1;
        }
        let inner = solve_inner(prob, &excluded);
        let total = eh_cost(prob, &members, rho_sum) + inner.objective;
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, mask, inner));
        }
    }
    // The empty set is always admissible.
    let (total, mask, inner) = best.expect("empty EH set is admissible");

    members.clear();
    members.extend((0..k).filter(|&u| mask >> u & 1 == 1));
    let mut decision = Decision::idle(k);
    decision.p_h1 = eh_bs_power(&members, prob.vq[EH_BS], rho1, prob.ctrl, params);
    for &u in &members {
        decision.assign[u] = Assignment::ServedByEhBs;
    }
    for &u in &inner.served {
        decision.assign[u] = Assignment::ServedByHesBs;
    }
    decision.p_h2 = inner.p_h2;
    decision.p_g = inner.p_g;
    decision.harvested = optimal_harvest(prob.vq, prob.obs);
    SlotSolution {
        decision,
        objective: total + drop_all,
        eh_set: mask,
    }
}
