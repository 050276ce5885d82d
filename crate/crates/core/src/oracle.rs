//! Exhaustive per-slot solver used to certify [`crate::solver`] on small
//! instances.
//!
//! Every one of the `3^K` assignments is tried. For a fixed assignment the
//! objective is linear in the battery/grid power totals, so the optimum sits
//! at a vertex of the feasible region; the vertices are found by intersecting
//! every pair of constraint lines and keeping the feasible points. A second,
//! cruder layer ([`grid_scan_objective`]) scans the harvested share of the
//! hybrid station's power on a uniform grid instead.
//!
//! Nothing here calls into the solver module.

use thiserror::Error;

use crate::model::{
    Assignment, ControlParams, Decision, SlotObservation, SystemParams, EH_BS, HES_BS,
};

/// Largest instance the enumeration accepts.
pub const MAX_USERS: usize = 6;
/// Default resolution of the grid layer.
pub const GRID_POINTS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("brute force is limited to {MAX_USERS} users, got {0}")]
    TooManyUsers(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub decision: Decision,
    /// Drift-plus-penalty value of the assignment/power part, with
    /// `V * phi_D` charged per dropped packet.
    pub objective: f64,
}

struct Inputs<'a> {
    params: &'a SystemParams,
    ctrl: &'a ControlParams,
    vq: [f64; 2],
    rho: [Vec<f64>; 2],
}

impl<'a> Inputs<'a> {
    fn new(
        params: &'a SystemParams,
        ctrl: &'a ControlParams,
        obs: &'a SlotObservation,
        vq: [f64; 2],
    ) -> Result<Self, OracleError> {
        let k = params.num_users;
        if k > MAX_USERS {
            return Err(OracleError::TooManyUsers(k));
        }
        let rho = [EH_BS, HES_BS].map(|j| {
            obs.gains[j]
                .iter()
                .map(|&h| params.channel_inversion_power(h))
                .collect::<Vec<_>>()
        });
        Ok(Self {
            params,
            ctrl,
            vq,
            rho,
        })
    }
}

/// One station's share of an assignment: members and their inversion-power sum.
struct Group {
    members: Vec<usize>,
    rho_sum: f64,
}

fn group(inp: &Inputs, assign: &[Assignment], which: Assignment, j: usize) -> Option<Group> {
    let members: Vec<usize> = (0..assign.len()).filter(|&k| assign[k] == which).collect();
    if members.len() > inp.params.n_channels[j] {
        return None;
    }
    let rho_sum: f64 = members.iter().map(|&k| inp.rho[j][k]).sum();
    if rho_sum.is_nan() || rho_sum > inp.params.p_max[j] {
        return None;
    }
    Some(Group { members, rho_sum })
}

fn assignments(k: usize) -> impl Iterator<Item = Vec<Assignment>> {
    const CHOICES: [Assignment; 3] = [
        Assignment::Dropped,
        Assignment::ServedByEhBs,
        Assignment::ServedByHesBs,
    ];
    (0..3usize.pow(k as u32)).map(move |mut code| {
        (0..k)
            .map(|_| {
                let a = CHOICES[code % 3];
                code /= 3;
                a
            })
            .collect()
    })
}

/// Best total battery output of the EH station: endpoints of
/// `[max(rho_sum, eps), p_max]`. Returns `(power, cost)`.
fn eh_side(inp: &Inputs, g: &Group) -> (f64, f64) {
    if g.members.is_empty() {
        return (0.0, 0.0);
    }
    let p = inp.params;
    let lo = g.rho_sum.max(inp.ctrl.eps_h[EH_BS]);
    let coef = -inp.vq[EH_BS] * p.slot_len;
    [lo, p.p_max[EH_BS]]
        .into_iter()
        .map(|x| (x, coef * x))
        .fold((f64::NAN, f64::INFINITY), |best, c| {
            if c.1 < best.1 {
                c
            } else {
                best
            }
        })
}

fn hes_cost(inp: &Inputs, h: f64, g: f64) -> f64 {
    let p = inp.params;
    (-inp.vq[HES_BS] * h + inp.ctrl.v * p.phi_grid() * g) * p.slot_len
}

/// Best `(harvested total H, grid total G)` at the hybrid station by vertex
/// enumeration. Returns `(H, G, cost)`.
fn hes_side_vertices(inp: &Inputs, g: &Group) -> (f64, f64, f64) {
    if g.members.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let p_max = inp.params.p_max[HES_BS];
    let eps = inp.ctrl.eps_h[HES_BS];
    let rs = g.rho_sum;
    let mut cands: Vec<(f64, f64)> = vec![(0.0, rs), (0.0, p_max)];
    // Lines a.(H, G) = c bounding {H in [eps, p_max], G >= 0, rs <= H + G <= p_max}.
    let lines = [
        ((1.0, 0.0), eps),
        ((1.0, 0.0), p_max),
        ((0.0, 1.0), 0.0),
        ((1.0, 1.0), rs),
        ((1.0, 1.0), p_max),
    ];
    for (i, &((a1, b1), c1)) in lines.iter().enumerate() {
        for &((a2, b2), c2) in &lines[i + 1..] {
            let det: f64 = a1 * b2 - a2 * b1;
            if det == 0.0 {
                continue;
            }
            let h = (c1 * b2 - c2 * b1) / det;
            let gg = (a1 * c2 - a2 * c1) / det;
            let slack = 1e-12 * p_max;
            let feasible = h >= eps - slack
                && h <= p_max + slack
                && gg >= -slack
                && h + gg >= rs - slack
                && h + gg <= p_max + slack;
            if feasible {
                cands.push((h.clamp(eps, p_max), gg.max(0.0)));
            }
        }
    }
    cands
        .into_iter()
        .filter(|&(h, gg)| h + gg >= rs)
        .map(|(h, gg)| (h, gg, hes_cost(inp, h, gg)))
        .fold((f64::NAN, f64::NAN, f64::INFINITY), |best, c| {
            if c.2 < best.2 {
                c
            } else {
                best
            }
        })
}

/// Minimum hybrid-station cost with the harvested total restricted to
/// `{0} U {eps + (p_max - eps) i / (n - 1)}` and the grid covering the rest.
fn hes_side_grid(inp: &Inputs, g: &Group, points: usize) -> f64 {
    if g.members.is_empty() {
        return 0.0;
    }
    let p_max = inp.params.p_max[HES_BS];
    let eps = inp.ctrl.eps_h[HES_BS];
    let rs = g.rho_sum;
    let mut best = hes_cost(inp, 0.0, rs);
    let n = points.max(2);
    for i in 0..n {
        let h = eps + (p_max - eps) * i as f64 / (n - 1) as f64;
        let gg = (rs - h).max(0.0);
        if h + gg <= p_max {
            best = best.min(hes_cost(inp, h, gg));
        }
    }
    best
}

fn drop_cost(inp: &Inputs, assign: &[Assignment]) -> f64 {
    let drops = assign.iter().filter(|&&a| a == Assignment::Dropped).count();
    inp.ctrl.v * inp.params.phi_drop() * drops as f64
}

// objective, assignment, EH-station power, hybrid (harvested, grid) power
type Candidate = (f64, Vec<Assignment>, f64, (f64, f64));

/// Exact minimiser of the per-slot assignment and power-control problem.
///
/// Harvesting is decided by comparing the two endpoints `e = 0` and
/// `e = E` of `vq_j * e`; a tie stores the arrival.
pub fn brute_force_slot(
    params: &SystemParams,
    ctrl: &ControlParams,
    obs: &SlotObservation,
    vq: [f64; 2],
) -> Result<OracleSolution, OracleError> {
    let inp = Inputs::new(params, ctrl, obs, vq)?;
    let k = params.num_users;

    let mut best: Option<Candidate> = None;
    for assign in assignments(k) {
        let Some(g1) = group(&inp, &assign, Assignment::ServedByEhBs, EH_BS) else {
            continue;
        };
        let Some(g2) = group(&inp, &assign, Assignment::ServedByHesBs, HES_BS) else {
            continue;
        };
        let (p1, c1) = eh_side(&inp, &g1);
        let (h, gg, c2) = hes_side_vertices(&inp, &g2);
        let total = c1 + c2 + drop_cost(&inp, &assign);
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, assign, p1, (h, gg)));
        }
    }
    // The all-dropped assignment is always feasible.
    let (objective, assign, p1, (h, gg)) = best.expect("all-dropped assignment is feasible");

    let mut decision = Decision::idle(k);
    decision.assign = assign.clone();
    let g1 = group(&inp, &assign, Assignment::ServedByEhBs, EH_BS).unwrap();
    let g2 = group(&inp, &assign, Assignment::ServedByHesBs, HES_BS).unwrap();
    for &u in &g1.members {
        decision.p_h1[u] = inp.rho[EH_BS][u] * p1 / g1.rho_sum;
    }
    for &u in &g2.members {
        let pu = inp.rho[HES_BS][u] * (h + gg) / g2.rho_sum;
        decision.p_h2[u] = pu * h / (h + gg);
        decision.p_g[u] = pu * gg / (h + gg);
    }
    for j in [EH_BS, HES_BS] {
        let e = obs.harvestable[j];
        decision.harvested[j] = if vq[j] * e <= 0.0 { e } else { 0.0 };
    }
    Ok(OracleSolution {
        decision,
        objective,
    })
}

/// Global minimum of the same objective with the hybrid station's harvested
/// power restricted to a grid of `points` values. Always `>=` the exact
/// optimum and within `(|vq_2| + V phi_G) tau (p_max - eps) / (points - 1)` of it.
pub fn grid_scan_objective(
    params: &SystemParams,
    ctrl: &ControlParams,
    obs: &SlotObservation,
    vq: [f64; 2],
    points: usize,
) -> Result<f64, OracleError> {
    let inp = Inputs::new(params, ctrl, obs, vq)?;
    let mut best = f64::INFINITY;
    for assign in assignments(params.num_users) {
        let Some(g1) = group(&inp, &assign, Assignment::ServedByEhBs, EH_BS) else {
            continue;
        };
        let Some(g2) = group(&inp, &assign, Assignment::ServedByHesBs, HES_BS) else {
            continue;
        };
        let total =
            eh_side(&inp, &g1).1 + hes_side_grid(&inp, &g2, points) + drop_cost(&inp, &assign);
        best = best.min(total);
    }
    Ok(best)
}

/// Lipschitz gap between [`grid_scan_objective`] and the exact optimum.
pub fn grid_resolution_bound(
    params: &SystemParams,
    ctrl: &ControlParams,
    vq: [f64; 2],
    points: usize,
) -> f64 {
    let span = params.p_max[HES_BS] - ctrl.eps_h[HES_BS];
    (vq[HES_BS].abs() + ctrl.v * params.phi_grid()) * params.slot_len * span
        / (points.max(2) - 1) as f64
}
