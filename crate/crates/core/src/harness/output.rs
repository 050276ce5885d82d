//! CSV writers. Column meanings are listed in `docs/csv_schema.md`.

use std::path::Path;

use serde::Serialize;

use super::{HarnessError, RunMetrics, SweepAxis, TraceRow};

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: Option<f64>,
    pub policy: String,
    pub seed: u64,
    pub slots: u64,
    pub averaged_slots: u64,
    pub time_avg_nsc: f64,
    pub grid_power_avg: f64,
    pub drop_ratio: f64,
    pub battery_mean_b1: f64,
    pub battery_mean_b2: f64,
    pub battery_max_b1: f64,
    pub battery_max_b2: f64,
    pub v: Option<f64>,
    pub required_capacity_b1: Option<f64>,
    pub required_capacity_b2: Option<f64>,
    pub nu: Option<f64>,
    pub c_over_v: Option<f64>,
}

pub fn summary_row(axis: Option<(SweepAxis, f64)>, m: &RunMetrics) -> SummaryRow {
    SummaryRow {
        axis: axis.map_or_else(|| "none".to_string(), |(a, _)| a.as_str().to_string()),
        value: axis.map(|(_, v)| v),
        policy: m.policy.as_str().to_string(),
        seed: m.seed,
        slots: m.slots,
        averaged_slots: m.averaged_slots,
        time_avg_nsc: m.time_avg_nsc,
        grid_power_avg: m.grid_power_avg,
        drop_ratio: m.drop_ratio,
        battery_mean_b1: m.battery_mean[0],
        battery_mean_b2: m.battery_mean[1],
        battery_max_b1: m.battery_max[0],
        battery_max_b2: m.battery_max[1],
        v: m.v,
        required_capacity_b1: m.required_capacity.map(|c| c[0]),
        required_capacity_b2: m.required_capacity.map(|c| c[1]),
        nu: m.nu,
        c_over_v: m.c_over_v,
    }
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
