use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tanno_core::extended_operator::{
    assemble_l, projector_from_solution, spectrum_relative, DEFAULT_CLUSTER_TOL,
};
use tanno_core::suite::{
    build_inputs, emit_report, find_check, registry, run_suite, ConfigError, ReportFormat,
    SuiteConfig, SuiteInputs, VerificationReport,
};
use tanno_core::tanno_system::TannoProblem;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "tanno-lab", version)]
#[command(about = "Numerical verification suite for the Tanno equation on Kähler charts")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
struct Cli {
    /// List registered checks and exit
    #[arg(long)]
    list_checks: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite and emit a report
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Record wall time per check (reports are then no longer reproducible)
        #[arg(long)]
        timing: bool,
    },
    /// Print the clustered spectrum of L(f) at every sample point
    Spectrum {
        #[command(flatten)]
        config: ConfigArgs,
        /// Relative clustering tolerance
        #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
        cluster_tol: f64,
    },
    /// Build the projector polynomial and print it with its residuals
    Projector {
        #[command(flatten)]
        config: ConfigArgs,
        /// Bound on |L² − L| at every sample
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Re-emit a stored JSON report
    Report {
        /// Report produced by `verify --format json`
        path: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Suite configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration field, e.g. `--set chart_spec.n=2`
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
}

#[derive(Args)]
struct OutputArgs {
    /// Report format: json or csv
    #[arg(long, default_value = "json")]
    format: ReportFormat,
    /// Write the report here instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_override(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {raw:?}"))
}

/// Failures that map to exit code 2.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error at {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

fn io_error(path: Option<&Path>) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.map_or_else(|| "<stdout>".to_string(), |p| p.display().to_string()),
        source,
    }
}

fn load(args: &ConfigArgs) -> Result<SuiteConfig, CliError> {
    Ok(SuiteConfig::load(&args.config, &args.overrides)?)
}

fn list_checks() -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "{:<28} {:<20} {:>9}  claim",
        "check", "alias", "tolerance"
    )?;
    for spec in registry() {
        writeln!(
            out,
            "{:<28} {:<20} {:>9.0e}  {}",
            spec.name, spec.alias, spec.default_tolerance, spec.claim
        )?;
    }
    Ok(())
}

fn verify(config: &ConfigArgs, output: &OutputArgs, timing: bool) -> Result<bool, CliError> {
    let mut cfg = load(config)?;
    cfg.record_timing |= timing;
    let report = run_suite(&cfg)?;
    emit_report(&report, output.format, output.output.as_deref())
        .map_err(io_error(output.output.as_deref()))?;
    for record in report.checks.iter().filter(|r| !r.pass) {
        eprintln!(
            "FAIL {}: residual {} (tolerance {:e}){}",
            record.check,
            record
                .max_residual
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:e}")),
            record.tolerance,
            record
                .detail
                .as_deref()
                .map_or_else(String::new, |d| format!(" ({d})"))
        );
    }
    Ok(report.passed())
}

fn unit_problem(inputs: &SuiteInputs) -> Result<&TannoProblem, CliError> {
    inputs.unit.as_ref().ok_or_else(|| {
        CliError::Other("c = 0: L(f) is only defined after absorbing a nonzero c".into())
    })
}

fn spectrum(config: &ConfigArgs, cluster_tol: f64) -> Result<bool, CliError> {
    let inputs = build_inputs(&load(config)?)?;
    let unit = unit_problem(&inputs)?;
    let mut first = None;
    let mut constant = true;
    for (i, p) in inputs.samples.iter().enumerate() {
        let l = assemble_l(unit, p).map_err(|e| CliError::Other(e.to_string()))?;
        let spec = spectrum_relative(&l.entries, cluster_tol)
            .map_err(|e| CliError::Other(e.to_string()))?;
        println!("{i:>4}  {spec}");
        match &first {
            None => first = Some(spec),
            Some(base) => {
                constant &= spec.distance(base) <= cluster_tol * spec.spectral_radius().max(1.0)
            }
        }
    }
    println!("spectrum constant across samples: {constant}");
    Ok(constant)
}

fn projector(config: &ConfigArgs, tol: Option<f64>) -> Result<bool, CliError> {
    let cfg = load(config)?;
    let tol = tol
        .or_else(|| cfg.tolerances.get("lemma5.projector").copied())
        .or_else(|| cfg.tolerances.get("projector").copied())
        .unwrap_or_else(|| {
            find_check("projector")
                .expect("registered")
                .default_tolerance
        });
    let inputs = build_inputs(&cfg)?;
    let unit = unit_problem(&inputs)?;
    match projector_from_solution(unit, &inputs.samples, tol) {
        Ok(sol) => {
            println!("spectrum of L(f): {}", sol.base_spectrum);
            println!("P(t) = {}", sol.polynomial);
            println!("trace L(P*(f)) = {:.12}", sol.trace);
            println!("max |L² − L| = {:e}", sol.max_idempotency());
            for (i, r) in sol.idempotency.iter().enumerate() {
                println!("{i:>4}  {r:e}");
            }
            Ok(true)
        }
        Err(e) => {
            println!("no projector: {e}");
            Ok(false)
        }
    }
}

fn reemit(path: &Path, output: &OutputArgs) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_error(Some(path)))?;
    let report = VerificationReport::from_json(&text)
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    emit_report(&report, output.format, output.output.as_deref())
        .map_err(io_error(output.output.as_deref()))?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        // A closed pipe (e.g. `| head`) is not an error worth reporting.
        _ if cli.list_checks => {
            let _ = list_checks();
            Ok(true)
        }
        None => Ok(true),
        Some(Command::Verify {
            config,
            output,
            timing,
        }) => verify(config, output, *timing),
        Some(Command::Spectrum {
            config,
            cluster_tol,
        }) => spectrum(config, *cluster_tol),
        Some(Command::Projector { config, tol }) => projector(config, *tol),
        Some(Command::Report { path, output }) => reemit(path, output),
    };
    match outcome {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("tanno-lab: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
