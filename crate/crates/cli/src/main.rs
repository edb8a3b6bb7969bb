mod commands;
mod config;
mod validate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Failure, Report};
use config::{Axis, ExperimentConfig, Switch};
use polariton::single_qubit::Frame;

#[derive(Parser, Debug)]
#[command(name = "polariton", version, about = "Holonomic gates on Jaynes-Cummings polariton qubits")]
struct Cli {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV destination (stdout when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    frame: Option<FrameArg>,

    #[arg(long, global = true, value_enum)]
    dct: Option<Switch>,

    /// Print the defaults-filled configuration as JSON and exit.
    #[arg(long, global = true)]
    print_effective_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dressed energies, transition frequencies and the noise-shift table.
    Spectrum,
    /// Single-qubit gate trace.
    Gate,
    /// Two-qubit gate trace and fidelities.
    TwoQubit,
    /// Fidelity against a static σ_z error ΔΩ₀σ_z/2.
    SweepZ,
    /// Fidelity against a drive amplitude error (1+ε).
    SweepX,
    /// Two-qubit fidelity against Γ₁ = Γ₂.
    SweepDecoherence,
    /// Invariant checks on the configured device.
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrameArg {
    Lab,
    Rotating,
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(frame) = cli.frame {
        config.integrator.frame = match frame {
            FrameArg::Lab => Frame::Lab,
            FrameArg::Rotating => Frame::Rotating,
        };
    }
    if let Some(dct) = cli.dct {
        config.drive.dct = dct;
    }
    match cli.command {
        Some(Command::SweepZ) => config.sweep.axis = Axis::Z,
        Some(Command::SweepX) => config.sweep.axis = Axis::X,
        _ => {}
    }
    config.validate().map_err(Failure::Config)?;
    Ok(config)
}

/// Writes to stdout; a reader that hangs up early is not an error.
fn print_stdout(text: &str) -> Result<(), Failure> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Config(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => std::fs::write(path, &report.csv).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
        None => print_stdout(&report.csv)?,
    }
    for line in &report.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = effective_config(cli)?;
    if cli.print_effective_config {
        return print_stdout(&format!("{}\n", serde_json::to_string_pretty(&config).expect("config serializes")));
    }
    let Some(command) = cli.command else {
        return Err(Failure::Config("no subcommand given (see --help)".into()));
    };
    let report = match command {
        Command::Spectrum => commands::spectrum(&config)?,
        Command::Gate => commands::gate(&config)?,
        Command::TwoQubit => commands::two_qubit(&config)?,
        Command::SweepZ | Command::SweepX => commands::sweep(&config)?,
        Command::SweepDecoherence => commands::sweep_decoherence_cmd(&config)?,
        Command::Validate => {
            let checks = validate::run(&config)?;
            let lines: String =
                checks.iter().map(|c| format!("{} {}: {}\n", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)).collect();
            print_stdout(&lines)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                return Err(Failure::Numerical(format!("{failed} of {} checks failed", checks.len())));
            }
            return Ok(());
        }
    };
    emit(cli, &report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
