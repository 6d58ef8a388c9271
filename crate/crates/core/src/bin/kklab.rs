//! `kklab` command-line runner.
//!
//! Exit codes: 0 when every verdict holds, 1 on a check failure, 2 on usage,
//! parse or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kklab::deficiency::{deficiency_indices, ContinuumOp, DeficiencyOptions};
use kklab::expr::parse_operator;
use kklab::scenario::report::{to_csv, write_atomic};
use kklab::scenario::run::compute_spectra;
use kklab::scenario::{apply_overrides, load_scenario, run_scenario, write_outputs, OutputPaths, Overrides};
use kklab::Error;

#[derive(Parser, Debug)]
#[command(name = "kklab", version, about = "Certify unbounded operators on desk-scale discretizations")]
struct Cli {
    /// Number of grid points (odd, at least 3).
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Half-width L of the grid [-L, L].
    #[arg(long, global = true)]
    half_width: Option<f64>,
    /// Number of grid refinements.
    #[arg(long, global = true)]
    refine: Option<u32>,
    /// Path of the JSON report.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
    /// Path of the SVG plot.
    #[arg(long, global = true)]
    svg_out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every check of a scenario file and write report.json, spectra.csv and plots.svg.
    Run {
        config: PathBuf,
        /// Path of the spectra CSV.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Deficiency indices of an operator such as "i_d_dx + x".
    Deficiency {
        #[arg(allow_hyphen_values = true)]
        op_expr: String,
        /// Interval endpoints "a,b"; "inf" and "-inf" are allowed.
        #[arg(long, default_value = "-inf,inf", allow_hyphen_values = true)]
        interval: String,
    },
    /// Eigenvalues of the discretized scenario operator as CSV.
    Spectrum {
        config: PathBuf,
        /// Path of the spectra CSV (standard output when omitted).
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

enum Failure {
    Checks,
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn parse_interval(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bound = |t: &str| -> Result<f64, Failure> {
        match t {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => t.parse().map_err(|_| Failure::Usage(format!("invalid interval endpoint '{t}'"))),
        }
    };
    match parts.as_slice() {
        [a, b] => Ok((bound(a)?, bound(b)?)),
        _ => Err(Failure::Usage(format!("interval must be 'a,b', got '{s}'"))),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        grid_n: cli.grid_n,
        half_width: cli.half_width,
        refine: cli.refine,
        seed: cli.seed,
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { config, csv_out } => {
            let mut s = load_scenario(config)?;
            apply_overrides(&mut s, &overrides(cli))?;
            let out = run_scenario(&s)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let mut paths = OutputPaths::in_dir(&s.output_dir);
            if let Some(p) = &cli.json_out {
                paths.json = p.clone();
            }
            if let Some(p) = csv_out {
                paths.csv = p.clone();
            }
            if let Some(p) = &cli.svg_out {
                paths.svg = p.clone();
            }
            write_outputs(&out, &paths)?;
            for c in &out.report.checks {
                let status = if c.verdict { "PASS" } else { "FAIL" };
                match &c.error {
                    Some(e) => println!("{status} {}: {e}", c.check),
                    None => println!("{status} {}", c.check),
                }
            }
            println!("report: {}", paths.json.display());
            if out.report.verdict {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Deficiency { op_expr, interval } => {
            let (a, b) = parse_interval(interval)?;
            let e = parse_operator(op_expr)?;
            let op = ContinuumOp::from_expr(&e, a, b)?;
            let r = match deficiency_indices(&op, &DeficiencyOptions::default()) {
                Ok(r) => r,
                Err(e @ Error::Inconclusive(_)) => {
                    eprintln!("inconclusive: {e}");
                    return Err(Failure::Checks);
                }
                Err(e) => return Err(e.into()),
            };
            let json = serde_json::to_string_pretty(&r).map_err(Error::from)? + "\n";
            match &cli.json_out {
                Some(p) => write_atomic(p, json.as_bytes())?,
                None => print!("{json}"),
            }
            println!("indices ({}, {}), esa = {}", r.n_plus, r.n_minus, r.esa);
            if r.esa {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        Command::Spectrum { config, csv_out } => {
            let mut s = load_scenario(config)?;
            apply_overrides(&mut s, &overrides(cli))?;
            let (op, grid) = match (&s.operator, &s.grid) {
                (Some(op), Some(g)) => (op, g),
                _ => return Err(Failure::Usage("spectrum needs [operator] and [grid] sections".into())),
            };
            let (_, rows) = compute_spectra(op, grid)?;
            let csv = to_csv(&rows);
            match csv_out {
                Some(p) => write_atomic(p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
