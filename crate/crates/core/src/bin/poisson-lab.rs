use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use poisson_lab::scenario::{self, Format, RunOptions};
use poisson_lab::Error;

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

/// Runs a scenario of checks on Poisson suspensions and writes a report.
///
/// Exit codes: 0 every check passed, 1 some check failed, 2 configuration or
/// I/O error.
///
/// CSV report columns: check, label, estimate, target, gate
/// (z | upper | residual | flag), se_or_tol (standard error, or tolerance for
/// residual gates), z_or_residual (z-score, or residual; for flags 0 means the
/// property holds), pass.
#[derive(Parser)]
#[command(name = "poisson-lab", version)]
struct Cli {
    /// Scenario TOML file.
    #[arg(long, required_unless_present = "validate")]
    config: Option<PathBuf>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every Monte Carlo trial count.
    #[arg(long, default_value_t = 1.0)]
    trials_scale: f64,
    /// Directory for the report and auxiliary CSV tables.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// Checks a JSON report for internal consistency instead of running.
    #[arg(long, value_name = "REPORT")]
    validate: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    if let Some(path) = &cli.validate {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let r = scenario::validate_report(&text)?;
        println!(
            "{}: {} passed, {} failed",
            path.display(),
            r.passed,
            r.failed
        );
        return Ok(if r.all_pass() { 0 } else { 1 });
    }
    let path = cli.config.as_ref().expect("clap enforces --config");
    let s = scenario::load(path)?;
    let start = Instant::now();
    let outcome = scenario::run(
        &s,
        RunOptions {
            seed: cli.seed,
            trials_scale: cli.trials_scale,
        },
    )?;
    let format = match cli.format {
        OutFormat::Json => Format::Json,
        OutFormat::Csv => Format::Csv,
    };
    let written = scenario::write_outcome(&outcome, &cli.out_dir, format)?;
    let r = &outcome.report;
    for rec in r.records.iter().filter(|x| !x.pass) {
        eprintln!(
            "FAIL {} {}: estimate {} target {}",
            rec.check, rec.label, rec.estimate, rec.target
        );
    }
    eprintln!(
        "{}: {} passed, {} failed in {:.1}s; wrote {}",
        r.provenance.scenario,
        r.passed,
        r.failed,
        start.elapsed().as_secs_f64(),
        written[0].display()
    );
    Ok(r.exit_code() as u8)
}
