//! Batch front-end: `run`, `check`, `bound` and `sweep`.
//!
//! Exit codes: 0 success or safe, 1 domain failure (violation, uncertified
//! platoon), 2 usage or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::capacity::{capacity_bound, crossing_gap, sweep, SweepGrid, SweepRow};
use crate::dynamics::Route;
use crate::safety::{audit_trace, certify_initial, ViolationKind};
use crate::sim::{initial_observations, run, throughput, ConfigError, Scenario};
use crate::trace::{SimEvent, SimTrace};

#[derive(Debug, Parser)]
#[command(
    name = "sigfree",
    version,
    about = "Signal-free intersection coordination under latency"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Throughput window `t0,t1` in seconds; defaults to the whole run.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Evaluate the initial-state certificates of each platoon.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the crossing gap and worst-case capacity bound.
    Bound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the capacity bound over the config's `[sweep]` grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t0,t1")?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("t0: {e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("t1: {e}"))?;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err("window needs finite t0 < t1".into());
    }
    Ok((t0, t1))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

/// Outcome of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    DomainFailure,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::DomainFailure => 1,
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    Scenario::from_toml_str(&text).map_err(|source| CliError::Config {
        path: path.to_owned(),
        source,
    })
}

/// Fixed-point with trailing zeros trimmed.
fn trimmed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn flag(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

pub const TRACE_HEADER: [&str; 16] = [
    "tick",
    "time_s",
    "route",
    "vehicle_id",
    "x_true_m",
    "v_true_mps",
    "x_obs_m",
    "v_obs_mps",
    "u_cmd_mps",
    "decision",
    "lambda_m",
    "cond1",
    "cond2",
    "cond3",
    "cond4",
    "violation",
];

pub fn write_trace_csv<W: Write>(trace: &SimTrace, w: W) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        out.write_record([
            r.tick.to_string(),
            r.time_s.to_string(),
            r.route.to_string(),
            r.vehicle_id.to_string(),
            r.x_true.to_string(),
            r.v_true.to_string(),
            r.x_obs.to_string(),
            r.v_obs.to_string(),
            r.u_cmd.to_string(),
            r.decision.as_str().to_string(),
            r.lambda.map(|l| l.to_string()).unwrap_or_default(),
            flag(r.cond1).to_string(),
            flag(r.cond2).to_string(),
            flag(r.cond3).to_string(),
            flag(r.cond4).to_string(),
            flag(Some(r.violation)).to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 8] = [
    "theta",
    "delta",
    "epsilon",
    "h",
    "v_max",
    "crossing_gap_D",
    "bound_F",
    "status",
];

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for row in rows {
        let rec = match row {
            SweepRow::Valid(c) => [
                c.theta.to_string(),
                c.delta.to_string(),
                c.epsilon.to_string(),
                c.h.to_string(),
                c.v_max.to_string(),
                c.crossing_gap_d.to_string(),
                c.bound_f.to_string(),
                "worst_case".to_string(),
            ],
            SweepRow::Invalid {
                theta,
                delta,
                epsilon,
                h,
                v_max,
                reason,
            } => [
                theta.to_string(),
                delta.to_string(),
                epsilon.to_string(),
                h.to_string(),
                v_max.to_string(),
                String::new(),
                String::new(),
                format!("invalid: {reason}"),
            ],
        };
        out.write_record(rec)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn cmd_run(
    config: &Path,
    trace_out: &Path,
    seed: Option<u64>,
    window: Option<(f64, f64)>,
    out: &mut dyn Write,
) -> Result<Outcome, CliError> {
    let mut sc = parse_scenario(config)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    let trace = run(&sc);
    let violations = audit_trace(&trace.rows, &sc.params);
    write_trace_csv(&trace, io::BufWriter::new(create(trace_out)?))?;

    let (t0, t1) = window.unwrap_or((0.0, sc.horizon as f64 * sc.params.delta()));
    let same = violations
        .iter()
        .filter(|v| v.kind == ViolationKind::SameRoute)
        .count();
    let retired = trace
        .events
        .iter()
        .filter(|e| matches!(e, SimEvent::Retired { .. }))
        .count();
    let mut report = || -> io::Result<()> {
        writeln!(out, "ticks: {}", sc.horizon)?;
        writeln!(out, "seed: {}", sc.seed)?;
        writeln!(out, "retired: {retired}")?;
        writeln!(
            out,
            "throughput: {} veh/s over [{t0}, {t1}) s",
            trimmed(throughput(&trace, t0, t1), 6)
        )?;
        writeln!(
            out,
            "violations: {} (same_route {}, cross_route {})",
            violations.len(),
            same,
            violations.len() - same
        )?;
        writeln!(out, "infeasible: {}", trace.infeasible_count())
    };
    report().map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })?;
    Ok(if violations.is_empty() {
        Outcome::Success
    } else {
        Outcome::DomainFailure
    })
}

pub fn cmd_check(config: &Path, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let sc = parse_scenario(config)?;
    let mut existence = true;
    let mut tightness = true;
    let mut any_pairs = false;
    let mut text = String::new();
    for route in Route::ALL {
        let rep = certify_initial(&initial_observations(&sc, route), &sc.params);
        if rep.pairs.is_empty() {
            text.push_str(&format!("route {route}: no pairs\n"));
            continue;
        }
        any_pairs = true;
        existence &= rep.existence();
        tightness &= rep.tightness();
        text.push_str(&format!("route {route}:\n"));
        for c in &rep.pairs {
            let verdict = |b: bool| if b { "pass" } else { "fail" };
            text.push_str(&format!(
                "  pair {}<-{}: part1a={} {}, part2a={} {}\n",
                c.follower + 1,
                c.follower,
                trimmed(c.part1a.value, 6),
                verdict(c.part1a.holds),
                trimmed(c.part2a.value, 6),
                verdict(c.part2a.holds),
            ));
        }
    }
    if any_pairs {
        text.push_str(&format!(
            "existence: {}\ntightness: {}\n",
            if existence { "pass" } else { "fail" },
            if tightness { "pass" } else { "fail" }
        ));
    } else {
        text.push_str("no pairs\n");
    }
    out.write_all(text.as_bytes())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?;
    Ok(if existence {
        Outcome::Success
    } else {
        Outcome::DomainFailure
    })
}

pub fn bound_line(sc: &Scenario) -> String {
    format!(
        "D={} s, F≥{:.5} veh/s",
        trimmed(crossing_gap(&sc.params), 6),
        capacity_bound(&sc.params)
    )
}

pub fn cmd_bound(config: &Path, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let sc = parse_scenario(config)?;
    writeln!(out, "{}", bound_line(&sc)).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })?;
    Ok(Outcome::Success)
}

pub fn cmd_sweep(config: &Path, out_path: &Path, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let sc = parse_scenario(config)?;
    let grid = sc.sweep.clone().unwrap_or_else(SweepGrid::default);
    let rows = sweep(&grid, &sc.params);
    write_sweep_csv(&rows, io::BufWriter::new(create(out_path)?))?;
    let invalid = rows
        .iter()
        .filter(|r| matches!(r, SweepRow::Invalid { .. }))
        .count();
    writeln!(
        out,
        "wrote {} rows ({} invalid) to {}",
        rows.len(),
        invalid,
        out_path.display()
    )
    .map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })?;
    Ok(Outcome::Success)
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Run {
            config,
            trace,
            seed,
            window,
        } => cmd_run(config, trace, *seed, *window, out),
        Command::Check { config } => cmd_check(config, out),
        Command::Bound { config } => cmd_bound(config, out),
        Command::Sweep { config, out: path } => cmd_sweep(config, path, out),
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match dispatch(&cli, &mut lock) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimming() {
        assert_eq!(trimmed(0.0008, 6), "0.0008");
        assert_eq!(trimmed(-10.2555, 6), "-10.2555");
        assert_eq!(trimmed(1.0, 6), "1");
        assert_eq!(trimmed(0.0, 6), "0");
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("1.5, 7"), Ok((1.5, 7.0)));
        assert!(parse_window("7,1").is_err());
        assert!(parse_window("3").is_err());
    }

    #[test]
    fn bound_line_on_reference() {
        let sc = Scenario::from_toml_str(
            "[params]\ndelta = 0.1\ntheta = 0.02\nepsilon = 0.05\na_max = 3.0\nv_max = 15.0\n\
             h = 1.0\nh_bar = 2.0\nbig_l = 300.0\nbig_r = 30.0\n",
        )
        .unwrap();
        assert_eq!(bound_line(&sc), "D=0.0008 s, F≥0.99920 veh/s");
    }
}
