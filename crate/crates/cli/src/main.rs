use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use outwave_cli::config::{ExperimentConfig, Overrides};
use outwave_cli::{
    convergence, experiment, CliError, EXIT_CONFIG_ERROR, EXIT_GATES_FAILED, EXIT_NUMERICAL_ABORT,
    EXIT_OK,
};

/// Simulate the radial semilinear wave equation with the nonlinearity
/// projected on outgoing states, and verify its conservation identities.
#[derive(Parser)]
#[command(name = "outwave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; writes records.csv and summary.json.
    Run(RunArgs),
    /// Repeat an experiment with h halved per level and fit convergence
    /// orders; writes convergence.json.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Nonlinearity power N.
    #[arg(long)]
    exponent: Option<f64>,
    /// Number of grid nodes.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Outer radius of the grid.
    #[arg(long)]
    r_max: Option<f64>,
    /// Final time of the run.
    #[arg(long)]
    t_final: Option<f64>,
    /// Time step as a fraction of h (system solver).
    #[arg(long)]
    cfl: Option<f64>,
    /// Initial-data shape: poly-bump or truncated-gaussian.
    #[arg(long)]
    preset: Option<String>,
    /// Peak amplitude of the initial data.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Support interval as "R,R2".
    #[arg(long)]
    support: Option<String>,
    /// Solver formulation: characteristics or system.
    #[arg(long)]
    formulation: Option<String>,
    /// Steps between diagnostics checkpoints.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Seed recorded in the outputs (reserved for randomized presets).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of refinement levels (h halves per level).
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            exponent: self.exponent,
            grid_points: self.grid_points,
            r_max: self.r_max,
            t_final: self.t_final,
            cfl: self.cfl,
            preset: self.preset.clone(),
            amplitude: self.amplitude,
            support: self.support.clone(),
            formulation: self.formulation.clone(),
            checkpoint_every: self.checkpoint_every,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
        }
    }

    fn config(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig::load(
            self.config.as_deref(),
            &self.overrides(),
        )?)
    }
}

fn error_exit_code(err: &CliError) -> i32 {
    use outwave_core::evolve::EvolveError;
    match err {
        CliError::Config(_) => EXIT_CONFIG_ERROR,
        CliError::Solver(EvolveError::BlowUp { .. }) => EXIT_NUMERICAL_ABORT,
        // solver rejections happen before any stepping
        CliError::Solver(_) => EXIT_CONFIG_ERROR,
        CliError::Diagnostics(_) => EXIT_NUMERICAL_ABORT,
        CliError::Io { .. } => EXIT_NUMERICAL_ABORT,
    }
}

fn cmd_run(args: &RunArgs) -> i32 {
    let cfg = match args.common.config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("outwave: {e}");
            return error_exit_code(&e);
        }
    };
    let started = Instant::now();
    match experiment::run_experiment(&cfg) {
        Ok(report) => {
            let verdict = report.verdict();
            eprintln!(
                "outwave: {} in {:.3}s, outcome {}, gates {}",
                cfg.out_dir.display(),
                started.elapsed().as_secs_f64(),
                report.summary.outcome,
                if report.summary.gates_passed {
                    "passed"
                } else {
                    "FAILED"
                }
            );
            verdict.exit_code()
        }
        Err(e) => {
            eprintln!("outwave: {e}");
            error_exit_code(&e)
        }
    }
}

fn cmd_convergence(args: &ConvergenceArgs) -> i32 {
    let cfg = match args.common.config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("outwave: {e}");
            return error_exit_code(&e);
        }
    };
    let started = Instant::now();
    match convergence::run_convergence(&cfg, args.levels) {
        Ok(report) => {
            if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
                eprintln!("outwave: cannot create {}: {e}", cfg.out_dir.display());
                return EXIT_NUMERICAL_ABORT;
            }
            let path = cfg.out_dir.join("convergence.json");
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            if let Err(e) = std::fs::write(&path, json) {
                eprintln!("outwave: cannot write {}: {e}", path.display());
                return EXIT_NUMERICAL_ABORT;
            }

            println!(
                "level  n_points        h    res_conserv    res_energy     cross_gap   idempotence"
            );
            for l in &report.levels {
                println!(
                    "{:>5}  {:>8}  {:>7.5}  {:>12.4e}  {:>12.4e}  {:>12.4e}  {:>12.4e}",
                    l.level,
                    l.n_points,
                    l.h,
                    l.res_conserv_rel,
                    l.res_energy_rel,
                    l.cross_gap,
                    l.idempotence
                );
            }
            let show = |name: &str, fit: &convergence::OrderFit| match fit.order {
                Some(o) => println!(
                    "{name}: order {o:.2} (threshold {:.1}) -> {}",
                    fit.threshold,
                    if fit.passed { "pass" } else { "FAIL" }
                ),
                None => println!("{name}: at noise floor -> pass"),
            };
            show("L^(N+2) balance   ", &report.orders.res_conserv);
            show("energy balance    ", &report.orders.res_energy);
            show("cross-formulation ", &report.orders.cross_formulation);
            show("P+ idempotence    ", &report.orders.projection_idempotence);
            println!(
                "linear shift      : max error {:.2e} -> {}",
                report.linear_shift.max_error,
                if report.linear_shift.exact {
                    "exact"
                } else {
                    "NOT exact"
                }
            );
            eprintln!(
                "outwave: convergence study in {:.3}s",
                started.elapsed().as_secs_f64()
            );
            if report.passed {
                EXIT_OK
            } else {
                EXIT_GATES_FAILED
            }
        }
        Err(e) => {
            eprintln!("outwave: {e}");
            error_exit_code(&e)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => e.exit(),
                _ => {
                    eprintln!("{e}");
                    std::process::exit(EXIT_CONFIG_ERROR);
                }
            }
        }
    };
    let code = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Convergence(args) => cmd_convergence(args),
    };
    std::process::exit(code);
}
