use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;

use hes_lyapunov::harness::{
    self, summary_row, write_summary_csv, write_trace_csv, Config, PolicyKind, SweepAxis,
};

/// Simulate the online controller or the greedy benchmark.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// lbapc, greedy or oracle; a comma list runs each on the same seeds.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    slots: Option<u64>,
    /// Replicates per point with derived seeds.
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    /// One of V, eps_h, P_H1, P_H2, w_D, N_B1, K.
    #[arg(long, requires = "values")]
    sweep: Option<SweepAxis>,
    #[arg(long, value_delimiter = ',', requires = "sweep")]
    values: Vec<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-slot traces.
    #[arg(long)]
    trace: bool,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg =
        Config::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(slots) = cli.slots {
        cfg.run.slots = slots;
    }
    cfg.run.trace |= cli.trace;
    if cli.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let policies = if cli.policy.is_empty() {
        vec![cfg.run.policy]
    } else {
        cli.policy.clone()
    };

    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    let mut rows = Vec::new();
    for policy in policies {
        let mut base = cfg.clone();
        base.run.policy = policy;
        base.validate()?;
        for rep in harness::replicate_configs(&base, cli.replicates) {
            let seed = rep.scenario.seed;
            let points: Vec<(Option<(SweepAxis, f64)>, harness::RunMetrics)> = match cli.sweep {
                Some(axis) => harness::sweep(&rep, axis, &cli.values)?
                    .into_iter()
                    .map(|p| (Some((axis, p.value)), p.metrics))
                    .collect(),
                None => vec![(None, harness::run(&rep)?)],
            };
            for (point, m) in points {
                if let Some(trace) = &m.trace {
                    let suffix =
                        point.map_or(String::new(), |(a, v)| format!("_{}={v}", a.as_str()));
                    let path = cli
                        .out
                        .join(format!("trace_{}_seed{seed}{suffix}.csv", policy.as_str()));
                    write_trace_csv(&path, trace)?;
                }
                println!(
                    "{:<7} seed={seed:<20} {}nsc={:.6e} grid_W={:.6e} drop_ratio={:.4}",
                    policy.as_str(),
                    point.map_or(String::new(), |(a, v)| format!("{}={v} ", a.as_str())),
                    m.time_avg_nsc,
                    m.grid_power_avg,
                    m.drop_ratio,
                );
                rows.push(summary_row(point, &m));
            }
        }
    }
    let summary = cli.out.join("summary.csv");
    write_summary_csv(&summary, &rows)?;
    eprintln!("wrote {}", summary.display());
    Ok(())
}
