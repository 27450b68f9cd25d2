use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use andreev_ring::config;
use andreev_ring::output::format_f64;
use andreev_ring::report::{run, write_outputs, RunResult};
use andreev_ring::sweeps::Experiment;
use andreev_ring::verify::selftest;
use andreev_ring::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_POINT_ERRORS: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "andreev-ring", version, about = "Transport through an Aharonov-Bohm ring with an Andreev-reflecting contact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Energy sweep of transmission, contrast and LDOS with and without the superconductor
    Triptych,
    /// Contrast at fixed energy as a function of the Andreev coupling
    ContrastSweep,
    /// Dephasing rate against spacer length, averaged over spacer widths
    DephasingSweep,
    /// All observables at a single energy
    Point,
    /// Run the analytic and property checks
    Selftest,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (key = value with [sections])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Also render SVG plots
    #[arg(long, global = true)]
    plot: bool,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override one key, e.g. --set t_ar=0.2 (repeatable, applied last)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Exit with status 1 if any grid point failed
    #[arg(long, global = true)]
    strict: bool,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        match self {
            Command::Triptych => Some(Experiment::EnergyTriptych),
            Command::ContrastSweep => Some(Experiment::ContrastVsTar),
            Command::DephasingSweep => Some(Experiment::DephasingVsMx),
            Command::Point => Some(Experiment::SinglePoint),
            Command::Selftest => None,
        }
    }
}

/// Command-line flags become overrides so they share the config path and
/// its validation.
fn flag_overrides(c: &Common) -> Vec<String> {
    let mut v = Vec::new();
    if let Some(o) = &c.out {
        v.push(format!("out_dir={}", o.display()));
    }
    if let Some(f) = &c.format {
        v.push(format!("format={f}"));
    }
    if c.plot {
        v.push("plot=true".into());
    }
    if let Some(w) = c.workers {
        v.push(format!("workers={w}"));
    }
    if c.strict {
        v.push("strict=true".into());
    }
    v.extend(c.set.iter().cloned());
    v
}

fn run_selftest() -> ExitCode {
    let start = Instant::now();
    let reports = selftest();
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    eprintln!(
        "{} checks, {failed} failed, {:.1} s",
        reports.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_point(result: &RunResult) {
    for r in result.records() {
        println!(
            "E = {}  t_ar = {}  T_bare = ({}, {})  T_full = ({}, {})  C_bare = {}  C_full = {}  rate = {}",
            r.energy,
            r.t_ar,
            format_f64(r.t_bare_a),
            format_f64(r.t_bare_b),
            format_f64(r.t_full_a),
            format_f64(r.t_full_b),
            format_f64(r.c_bare),
            format_f64(r.c_full),
            format_f64(r.rate)
        );
        if let Some(e) = &r.error {
            println!("  error: {e}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let Some(experiment) = cli.command.experiment() else {
        return run_selftest();
    };

    let text = match &cli.common.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", p.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => String::new(),
    };
    let config = match config::resolve(Some(experiment), &text, &flag_overrides(&cli.common)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let start = Instant::now();
    let result = match run(&config) {
        Ok(r) => r,
        Err(e @ (Error::Config(_) | Error::Lattice(_) | Error::Sweep(_))) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = match write_outputs(&config, &result, &config.output.out_dir) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    if experiment == Experiment::SinglePoint {
        print_point(&result);
    }
    if let RunResult::Dephasing(d) = &result {
        match &d.fit {
            Some(f) => eprintln!(
                "log-log slope over mx in [{}, {}]: {:.4} ({} points, {} excluded)",
                f.mx_min, f.mx_max, f.slope, f.n_used, f.n_excluded
            ),
            None => eprintln!("too few points for a slope fit"),
        }
    }
    eprintln!(
        "{}: {} records ({} with errors) in {elapsed:.2} s",
        experiment,
        manifest.grid.n_records,
        manifest.error_count
    );
    for f in &manifest.outputs {
        eprintln!("  wrote {f}");
    }
    if config.output.strict && manifest.error_count > 0 {
        return ExitCode::from(EXIT_POINT_ERRORS);
    }
    ExitCode::SUCCESS
}
