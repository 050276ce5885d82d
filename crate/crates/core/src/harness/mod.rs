//! Simulation runs, sweeps and CSV output.

mod config;
mod output;

pub use config::{
    Config, ConfigError, ControlSection, PolicyKind, RunSection, ScenarioSection, SweepAxis,
    SystemSection,
};
pub use output::{summary_row, write_summary_csv, write_trace_csv, SummaryRow};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baselines::GreedyPolicy;
use crate::controller::{
    drift_constant, nu_bound, ControlError, LbapcController, Policy, SlotSolver,
};
use crate::model::{ModelError, EH_BS, HES_BS};
use crate::stochastic::{derive_seed, exponential_cdf, Scenario};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("slot {slot}: {source}")]
    Control { slot: u64, source: ControlError },
    #[error(transparent)]
    Setup(#[from] ControlError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One row of the per-slot trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    /// Battery levels at the start of the slot.
    pub battery_b1: f64,
    pub battery_b2: f64,
    pub nsc: f64,
    pub grid_j: f64,
    pub drops: usize,
    /// Average NSC over slots `0..=t`.
    pub running_avg_nsc: f64,
}

/// Summary of one run.
///
/// Averages skip the burn-in slots. Battery extremes cover every state of the
/// run, including the one after the last slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub policy: PolicyKind,
    pub seed: u64,
    pub slots: u64,
    pub averaged_slots: u64,
    pub time_avg_nsc: f64,
    /// Average grid power in W.
    pub grid_power_avg: f64,
    /// Dropped users over all user-slots.
    pub drop_ratio: f64,
    pub battery_mean: [f64; 2],
    pub battery_min: [f64; 2],
    pub battery_max: [f64; 2],
    pub final_battery: [f64; 2],
    /// V and the capacity the controller needs; `None` for the greedy policy.
    pub v: Option<f64>,
    pub theta: Option<[f64; 2]>,
    pub required_capacity: Option<[f64; 2]>,
    /// Terms of the cost bound: the relaxation gap and the drift constant over V.
    pub nu: Option<f64>,
    pub c_over_v: Option<f64>,
    pub trace: Option<Vec<TraceRow>>,
}

fn build_policy(cfg: &Config) -> Result<Box<dyn Policy + Send>, HarnessError> {
    let params = cfg.system_params()?;
    Ok(match cfg.run.policy {
        PolicyKind::Greedy => Box::new(GreedyPolicy::new(params, cfg.capacity())?),
        kind => {
            let solver = if kind == PolicyKind::Oracle {
                SlotSolver::BruteForce
            } else {
                SlotSolver::InnerOuter
            };
            let ctrl = cfg.control_params()?;
            Box::new(LbapcController::new(params, ctrl)?.with_solver(solver))
        }
    })
}

/// Runs the configured policy for `cfg.run.slots` slots. Deterministic in `cfg`.
pub fn run(cfg: &Config) -> Result<RunMetrics, HarnessError> {
    cfg.validate()?;
    let params = cfg.system_params()?;
    let mut policy = build_policy(cfg)?;
    let mut scenario = Scenario::new(cfg.scenario_config()?, params.num_users)?;

    let slots = cfg.run.slots;
    let burn = (cfg.run.burn_in * slots as f64).floor() as u64;
    let mut trace = cfg.run.trace.then(|| Vec::with_capacity(slots as usize));

    let mut nsc_sum = 0.0;
    let mut grid_sum = 0.0;
    let mut drop_sum = 0u64;
    let mut battery_sum = [0.0; 2];
    let mut battery_min = [f64::INFINITY; 2];
    let mut battery_max = [f64::NEG_INFINITY; 2];
    let mut running = 0.0;

    for t in 0..slots {
        let obs = scenario.next_observation();
        let rec = policy
            .step(&obs)
            .map_err(|source| HarnessError::Control { slot: t, source })?;
        for j in [EH_BS, HES_BS] {
            battery_min[j] = battery_min[j].min(rec.battery[j]);
            battery_max[j] = battery_max[j].max(rec.battery[j]);
        }
        running += rec.cost.nsc;
        if t >= burn {
            nsc_sum += rec.cost.nsc;
            grid_sum += rec.cost.grid_energy;
            drop_sum += rec.cost.drops as u64;
            for j in [EH_BS, HES_BS] {
                battery_sum[j] += rec.battery[j];
            }
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceRow {
                t,
                battery_b1: rec.battery[EH_BS],
                battery_b2: rec.battery[HES_BS],
                nsc: rec.cost.nsc,
                grid_j: rec.cost.grid_energy,
                drops: rec.cost.drops,
                running_avg_nsc: running / (t + 1) as f64,
            });
        }
    }
    let final_battery = policy.state().battery;
    for j in [EH_BS, HES_BS] {
        battery_min[j] = battery_min[j].min(final_battery[j]);
        battery_max[j] = battery_max[j].max(final_battery[j]);
    }

    let n = (slots - burn) as f64;
    let ctrl = match cfg.run.policy {
        PolicyKind::Greedy => None,
        _ => Some(cfg.control_params()?),
    };
    let channel_cdf = exponential_cdf(params.mean_gain[EH_BS]);
    Ok(RunMetrics {
        policy: cfg.run.policy,
        seed: cfg.scenario.seed,
        slots,
        averaged_slots: slots - burn,
        time_avg_nsc: nsc_sum / n,
        grid_power_avg: grid_sum / (n * params.slot_len),
        drop_ratio: drop_sum as f64 / (n * params.num_users as f64),
        battery_mean: battery_sum.map(|s| s / n),
        battery_min,
        battery_max,
        final_battery,
        v: ctrl.as_ref().map(|c| c.v),
        theta: ctrl.as_ref().map(|c| c.theta),
        required_capacity: ctrl.as_ref().map(|c| c.required_capacity(&params)),
        nu: ctrl
            .as_ref()
            .map(|c| nu_bound(&params, c.eps_h, &channel_cdf)),
        c_over_v: ctrl.as_ref().map(|c| drift_constant(&params) / c.v),
        trace,
    })
}

/// Runs `n` replicates with seeds derived from the configured seed.
pub fn run_replicates(cfg: &Config, n: u64) -> Result<Vec<RunMetrics>, HarnessError> {
    replicate_configs(cfg, n).par_iter().map(run).collect()
}

/// The configs `run_replicates` uses; replicate 0 keeps the base seed.
pub fn replicate_configs(cfg: &Config, n: u64) -> Vec<Config> {
    (0..n)
        .map(|i| {
            let mut c = cfg.clone();
            if i > 0 {
                c.scenario.seed = derive_seed(cfg.scenario.seed, i);
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    pub metrics: RunMetrics,
}

/// Runs one simulation per value, in parallel. Results are sorted by value.
pub fn sweep(
    cfg: &Config,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<SweepPoint>, HarnessError> {
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = configs
        .par_iter()
        .map(|(value, c)| {
            run(c).map(|metrics| SweepPoint {
                axis,
                value: *value,
                metrics,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(points)
}
