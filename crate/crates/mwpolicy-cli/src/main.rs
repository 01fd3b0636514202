mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mwpolicy::calibration::{self, CalibrationSpec, MomentSet, MOMENT_KEYS};
use mwpolicy::config::{Config, ParamsConfig};
use mwpolicy::econpanel::{self, panel::read_csv, MwPanel, OutcomeRow};
use mwpolicy::equilibrium::close_budget;
use mwpolicy::policy::{self, PolicyGrid};
use mwpolicy::suffstats;
use mwpolicy::Error;

use output::{key_value_csv, rows_csv, Metadata, Sink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "mwpolicy",
    version,
    about = "Minimum wage and tax policy engines"
)]
struct Cli {
    /// TOML run configuration; defaults to the bundled calibration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Seed for multi-start draws and synthetic panels.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override a config value, e.g. `--set policy.mw_hourly=12`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the equilibrium at the configured policy.
    Solve,
    /// Estimate the fourteen calibrated parameters.
    Calibrate,
    /// Sweep the tax and minimum wage grid.
    Grid,
    /// Critical welfare weights from sufficient statistics.
    Suffstats,
    /// Event detection, stacking and event-study estimation.
    Events,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Calibrate => "calibrate",
            Command::Grid => "grid",
            Command::Suffstats => "suffstats",
            Command::Events => "events",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(4, format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidParam(_) => 2,
            Error::Domain(_) | Error::Solver { .. } | Error::Singular(_) => 3,
            Error::Data(_) => 4,
            Error::Infeasible(_) => 5,
        };
        Failure::new(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let text = match &cli.config {
        Some(p) => {
            fs::read_to_string(p).map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))?
        }
        None => String::new(),
    };
    Ok(Config::from_toml_with_overrides(&text, &cli.overrides)?)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::new(2, e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Solve => cmd_solve(cli, &cfg),
        Command::Calibrate => cmd_calibrate(cli, &cfg),
        Command::Grid => cmd_grid(cli, &cfg),
        Command::Suffstats => cmd_suffstats(cli, &cfg),
        Command::Events => cmd_events(cli, &cfg),
    })
}

fn sink(cli: &Cli, cfg: &Config, seed: u64) -> Result<Sink, Failure> {
    Sink::new(&cli.out, Metadata::new(cli.command.name(), cfg, seed))
}

/// Writes `rows` as `<stem>.csv` or `<stem>.json` depending on `--format`.
fn table<T: Serialize>(cli: &Cli, sink: &mut Sink, stem: &str, rows: &[T]) -> Result<(), Failure> {
    match cli.format {
        Format::Csv => sink.csv(&format!("{stem}.csv"), |b| rows_csv(b, rows)),
        Format::Json => sink.json(&format!("{stem}.json"), &rows),
    }
}

fn record<T: Serialize>(cli: &Cli, sink: &mut Sink, stem: &str, data: &T) -> Result<(), Failure> {
    match cli.format {
        Format::Csv => sink.csv(&format!("{stem}.csv"), |b| key_value_csv(b, data)),
        Format::Json => sink.json(&format!("{stem}.json"), data),
    }
}

fn finish(sink: &Sink, summary: serde_json::Value) -> Result<(), Failure> {
    let files: Vec<String> = sink
        .written
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let doc = json!({ "summary": summary, "files": files });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::new(4, e.to_string()))?;
    // A closed pipe (`| head`) is not an error; the files are already written.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn cmd_solve(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let params = cfg.model_params()?;
    let policy = cfg.policy.to_policy()?;
    let solver = cfg.solver.to_options()?;
    let eq = close_budget(&params, &policy, &solver, &cfg.welfare.to_options()?)?;
    let moments = calibration::compute_moments(&params, &policy, &solver)?;
    let mut sink = sink(cli, cfg, cli.seed.unwrap_or(0))?;
    record(cli, &mut sink, "equilibrium", &eq)?;
    let rows = moment_rows(&moments, &MomentSet::table_model());
    table(cli, &mut sink, "moments", &rows)?;
    let summary = json!({
        "y0": eq.y0_solved,
        "social_welfare": eq.social_welfare,
        "budget_residual": eq.budget_residual,
        "wage_S": eq.services.wage,
        "wage_M": eq.manufacturing.wage,
        "wage_S_hourly": params.annual_to_hourly(eq.services.wage),
        "mw_binding_S": eq.services.mw_binding,
        "mw_binding_M": eq.manufacturing.mw_binding,
    });
    finish(&sink, summary)
}

#[derive(Debug, Serialize)]
struct MomentRow {
    moment: &'static str,
    model: f64,
    target: f64,
    rel_dev: f64,
}

fn moment_rows(model: &MomentSet, target: &MomentSet) -> Vec<MomentRow> {
    MOMENT_KEYS
        .iter()
        .zip(model.to_array())
        .zip(target.to_array())
        .map(|((k, m), t)| MomentRow {
            moment: k,
            model: m,
            target: t,
            rel_dev: (m - t) / t,
        })
        .collect()
}

fn cmd_calibrate(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(0);
    let spec = CalibrationSpec::from_config(cfg, seed)?;
    let res = calibration::estimate(&spec)?;
    let mut sink = sink(cli, cfg, seed)?;
    sink.csv("calibration_trace.csv", |b| {
        calibration::write_trace_csv(b, &res.trace)
    })?;
    let rows = moment_rows(&res.moments, &spec.targets);
    table(cli, &mut sink, "calibration_moments", &rows)?;
    let params = ParamsConfig::from_model(&res.params);
    record(cli, &mut sink, "calibrated_params", &params)?;
    finish(
        &sink,
        json!({
            "loss": res.loss,
            "converged": res.converged,
            "evaluations": res.evaluations,
            "params": params,
        }),
    )
}

fn cmd_grid(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let params = cfg.model_params()?;
    let solver = cfg.solver.to_options()?;
    let welfare = cfg.welfare.to_options()?;
    let grid = PolicyGrid::from_config(&cfg.grid)?;
    let surface = policy::sweep(&params, &grid, &solver, &welfare)?;
    let env = policy::envelope(&surface);
    let optima = policy::optimal_mw_per_tax(&surface);
    let joint = policy::joint_optimum(&surface)?;

    // Market wage of the low-skill sector at the optimal taxes, no minimum wage.
    let k = (0..grid.n_tax())
        .find(|&k| grid.tax_pair(k) == (joint.tau_l, joint.t))
        .expect("optimum lies on the grid");
    let free = close_budget(&params, &grid.policy(k, None), &solver, &welfare)?;
    let market_wage_hourly = params.annual_to_hourly(free.services.wage);

    let path: Vec<f64> = env.points.iter().flatten().map(|p| p.sw).collect();
    let mono = policy::optimal_mw_monotonicity(&grid, &optima);

    let mut sink = sink(cli, cfg, cli.seed.unwrap_or(0))?;
    match cli.format {
        Format::Csv => {
            sink.csv("surface.csv", |b| policy::write_surface_csv(b, &surface))?;
            sink.csv("envelope.csv", |b| policy::write_envelope_csv(b, &env))?;
            sink.csv("optimal_mw.csv", |b| policy::write_optima_csv(b, &optima))?;
        }
        Format::Json => {
            sink.json("surface.json", &surface.cells)?;
            sink.json("envelope.json", &env)?;
            sink.json("optimal_mw.json", &optima)?;
        }
    }
    let summary = json!({
        "joint_optimum": joint,
        "market_wage_low_hourly": market_wage_hourly,
        "cells": surface.cells.len(),
        "infeasible_cells": surface.cells.iter().filter(|c| !c.feasible).count(),
        "envelope_unimodal": policy::is_unimodal(&path),
        "envelope_diagnostics": env.diagnostics,
        "non_binding_spread": policy::non_binding_spread(&surface),
        "optimal_mw_monotone_in_t": mono.along_t.is_empty(),
        "optimal_mw_monotone_in_tau_l": mono.along_tau_l.is_empty(),
        "monotonicity_violations": mono,
    });
    sink.json("summary.json", &summary)?;
    finish(&sink, summary)
}

fn cmd_suffstats(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let t5 = cfg
        .suffstats
        .clone()
        .unwrap_or_else(suffstats::bundled_table5);
    let cells = suffstats::table5_report(&t5)?;
    let mut sink = sink(cli, cfg, cli.seed.unwrap_or(0))?;
    table(cli, &mut sink, "table5", &cells)?;
    finish(
        &sink,
        json!({ "cells": cells.len(), "provenance": t5.provenance }),
    )
}

fn read_file<T: for<'de> serde::Deserialize<'de>>(path: &str) -> Result<Vec<T>, Failure> {
    let f = fs::File::open(path).map_err(|e| Failure::io(Path::new(path), e))?;
    Ok(read_csv(f)?)
}

fn cmd_events(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let ev = cfg.events.clone().unwrap_or_default();
    let (panel, outcomes, seed): (MwPanel, Vec<OutcomeRow>, u64) =
        match (&ev.mw_panel, &ev.deflator, &ev.outcomes) {
            (Some(p), Some(d), Some(o)) => {
                let rows = read_file(p)?;
                let defl: Vec<econpanel::panel::DeflatorRow> = read_file(d)?;
                let panel =
                    MwPanel::new(rows, defl.into_iter().map(|r| (r.year, r.index)).collect())?;
                (panel, read_file(o)?, cli.seed.unwrap_or(0))
            }
            (None, None, None) => {
                let mut sc = ev.synth.clone().unwrap_or_default();
                if let Some(s) = cli.seed {
                    sc.seed = s;
                }
                let s = econpanel::synth_panel(&sc)?;
                (s.panel, s.outcomes, sc.seed)
            }
            _ => {
                return Err(Failure::new(
                    2,
                    "events needs all of mw_panel, deflator and outcomes, or none of them",
                ))
            }
        };
    let run = econpanel::run_events(&panel, &outcomes, &ev)?;
    let mut sink = sink(cli, cfg, seed)?;
    table(cli, &mut sink, "events", &run.detection.events)?;
    table(cli, &mut sink, "increases", &run.detection.increases)?;
    table(cli, &mut sink, "coefficients", &run.report.coefficients)?;
    let summary = json!({
        "events_detected": run.detection.events.len(),
        "events_used": run.report.n_events,
        "stack_rows": run.stack_rows,
        "clusters": run.report.n_clusters,
        "dlog_mw": run.report.dlog_mw,
        "elasticity": run.report.elasticity,
        "dropped_regressors": run.report.dropped,
        "diagnostics": run.diagnostics,
    });
    sink.json("events_summary.json", &summary)?;
    finish(&sink, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str], out: &Path) -> Result<(), Failure> {
        let mut argv = vec!["mwpolicy", "--out", out.to_str().unwrap()];
        argv.extend_from_slice(args);
        run(&Cli::try_parse_from(argv).unwrap())
    }

    fn code(args: &[&str]) -> u8 {
        let dir = tempfile::tempdir().unwrap();
        match exec(args, dir.path()) {
            Ok(()) => 0,
            Err(f) => f.code,
        }
    }

    fn configs() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
    }

    #[test]
    fn exit_codes() {
        assert_eq!(code(&["solve", "--set", "nope.key=1"]), 2);
        assert_eq!(code(&["solve", "--config", "/no/such/file.toml"]), 2);
        assert_eq!(code(&["solve", "--set", "solver.foc_max_iter=1"]), 3);
        assert_eq!(code(&["solve", "--set", "params.delta0_l=5"]), 3);
        assert_eq!(
            code(&["solve", "--set", "policy.tau_l=-1", "--set", "policy.t=0"]),
            5
        );
        assert_eq!(code(&["suffstats"]), 0);
    }

    #[test]
    fn unreadable_or_partial_data_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "state,year\nA,notayear\n").unwrap();
        let b = bad.to_str().unwrap();
        let set = |k: &str| format!("events.{k}=\"{b}\"");
        let (p, d, o) = (set("mw_panel"), set("deflator"), set("outcomes"));
        assert_eq!(code(&["events", "--set", &p, "--set", &d, "--set", &o]), 4);
        assert_eq!(
            code(&[
                "events",
                "--set",
                "events.mw_panel=\"/no/such.csv\"",
                "--set",
                &d,
                "--set",
                &o
            ]),
            4
        );
        assert_eq!(code(&["events", "--set", &p]), 2);
    }

    #[test]
    fn bundled_baseline_config_equals_the_defaults() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let cfg = configs().join("baseline.toml");
        exec(&["solve", "--config", cfg.to_str().unwrap()], a.path()).unwrap();
        exec(&["solve"], b.path()).unwrap();
        for name in ["equilibrium.csv", "moments.csv"] {
            let x = fs::read_to_string(a.path().join(name)).unwrap();
            assert_eq!(x, fs::read_to_string(b.path().join(name)).unwrap());
            assert!(x.starts_with("# tool: mwpolicy"));
            assert!(x.contains("# hours_annualization: 1811.16"));
        }
    }

    #[test]
    fn bundled_configs_run() {
        for (cmd, file) in [
            ("suffstats", "table5.toml"),
            ("events", "events_synth.toml"),
        ] {
            let dir = tempfile::tempdir().unwrap();
            let cfg = configs().join(file);
            exec(
                &[cmd, "--config", cfg.to_str().unwrap(), "--format", "json"],
                dir.path(),
            )
            .unwrap();
            let stem = if cmd == "events" {
                "events_summary.json"
            } else {
                "table5.json"
            };
            let v: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(dir.path().join(stem)).unwrap()).unwrap();
            assert_eq!(v["metadata"]["command"], cmd);
            assert_eq!(v["metadata"]["config_sha256"].as_str().unwrap().len(), 64);
        }
    }

    #[test]
    fn overrides_change_the_config_hash() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        exec(&["suffstats"], a.path()).unwrap();
        exec(&["suffstats", "--set", "welfare.zeta=2"], b.path()).unwrap();
        let hash = |d: &Path| {
            let text = fs::read_to_string(d.join("table5.csv")).unwrap();
            text.lines()
                .find(|l| l.starts_with("# config_sha256"))
                .unwrap()
                .to_string()
        };
        assert_ne!(hash(a.path()), hash(b.path()));
    }
}
