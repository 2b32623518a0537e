//! Command-line experiments for Hawkes branching-ratio estimation.
//!
//! Every output table is a CSV with a `<name>.meta.json` sidecar holding
//! the resolved configuration, which is enough to re-run it exactly.

pub mod config;
pub mod experiments;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use config::{Cli, Command};
use experiments::Check;

/// Result of a subcommand: written files and self-test outcomes.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn meta<A: Serialize, R: Serialize>(command: &str, args: &A, resolved: &R, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "reflex",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "resolved": resolved,
        "output": extra,
    })
}

fn table<A: Serialize, R: Serialize, T: Serialize>(
    report: &mut Report,
    dir: &Path,
    name: &str,
    rows: &[T],
    command: &str,
    args: &A,
    resolved: &R,
) -> Result<()> {
    let path = dir.join(name);
    output::write_table(&path, rows)?;
    output::write_meta(&path, &meta(command, args, resolved, json!({ "rows": rows.len() })))?;
    report.files.push(path);
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Report> {
    let command = cli.command.name();
    let common = cli.command.common();
    let dir = &common.out;
    output::ensure_dir(dir)?;
    let mut report = Report::default();
    match &cli.command {
        Command::Simulate(args) => {
            let config = experiments::simulate_config(args)?;
            let runs = experiments::simulate(args)?;
            let single = runs.len() == 1;
            for (i, series) in runs.iter().enumerate() {
                let path = if single {
                    dir.join("events.csv")
                } else {
                    dir.join(format!("events_{i:04}.csv"))
                };
                let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                reflex_core::pipeline::write_events(&mut w, series)?;
                w.flush()?;
                let seed = reflex_core::ensemble::member_seed(common.seed, i as u64);
                let extra = json!({ "member": i, "seed": seed, "events": series.len() });
                output::write_meta(&path, &meta(command, args, &config, extra))?;
                report.files.push(path);
            }
        }
        Command::SweepN(args) => {
            let rows = experiments::sweep_n(args)?;
            let resolved = json!({ "ensemble": common.ensemble_or(100) });
            table(&mut report, dir, "sweep_n.csv", &rows, command, args, &resolved)?;
            report.checks = experiments::check_sweep_n(&rows);
        }
        Command::SweepW(args) => {
            let rows = experiments::sweep_w(args)?;
            let resolved = json!({ "params": args.process.params()?, "ensemble": common.ensemble_or(100) });
            table(&mut report, dir, "sweep_w.csv", &rows, command, args, &resolved)?;
        }
        Command::Powerlaw(args) => {
            let out = experiments::powerlaw(args)?;
            table(&mut report, dir, "powerlaw.csv", &out.rows, command, args, &out.resolved)?;
            table(&mut report, dir, "powerlaw_fit.csv", &[out.fit], command, args, &out.resolved)?;
            report.checks = experiments::check_powerlaw(&out);
        }
        Command::Reflexivity(args) => {
            let out = experiments::reflexivity(args)?;
            table(&mut report, dir, "reflexivity_periods.csv", &out.periods, command, args, &json!({}))?;
            table(&mut report, dir, "reflexivity_buckets.csv", &out.buckets, command, args, &json!({}))?;
        }
        Command::FitMle(args) => {
            let rows = experiments::fit_mle(args)?;
            let resolved = json!({ "options": reflex_core::mle::MleOptions::default() });
            table(&mut report, dir, "fit_mle.csv", &rows, command, args, &resolved)?;
        }
        Command::Estimate(args) => {
            let rows = experiments::estimate(args)?;
            table(&mut report, dir, "estimate.csv", &rows, command, args, &json!({}))?;
        }
    }
    if common.check && report.checks.is_empty() {
        log::warn!("{command} has no built-in self-tests");
    }
    Ok(report)
}
