use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info};

use sigflow::domain::{validation_notes, ModelVariant, RoadGrid, Scenario};
use sigflow::io::plot::{emit_plot, PlotField};
use sigflow::io::report::{build_report, failure_report, write_report};
use sigflow::io::scenario_file::parse_scenario;
use sigflow::io::snapshot::write_snapshot;
use sigflow::orchestrator::{mass_balance_report, run_scenario, verify_oracle, OracleOutcome};

#[derive(Parser)]
#[command(
    name = "sigflow",
    version,
    about = "Traffic flow through a signalized intersection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one signal cycle and write snapshots and a report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the model named in the config.
        #[arg(long)]
        model: Option<Model>,
        /// Override the number of cells.
        #[arg(long)]
        nx: Option<usize>,
        /// Compare the free-flow phase against the mass-coordinate reference.
        #[arg(long)]
        oracle_check: bool,
        /// Also write a space-time heatmap of this field.
        #[arg(long)]
        plot: Option<Field>,
    },
    /// Compare the pressureless solver with the mass-coordinate reference at
    /// the configured resolution and four times finer.
    VerifyOracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    First,
    Second,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Rho,
    V,
}

/// Exit code for documents that do not describe a valid scenario.
const INVALID: u8 = 2;

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::FAILURE
    })?;
    parse_scenario(&text).map_err(|errors| {
        eprintln!("{}: {} problem(s)", path.display(), errors.len());
        for e in errors {
            eprintln!("  {e}");
        }
        ExitCode::from(INVALID)
    })
}

fn simulate(
    config: &Path,
    out: &Path,
    model: Option<Model>,
    nx: Option<usize>,
    oracle_check: bool,
    plot: Option<Field>,
) -> Result<(), ExitCode> {
    let mut s = load(config)?;
    if let Some(m) = model {
        s.model = match m {
            Model::First => ModelVariant::First,
            Model::Second => ModelVariant::Second,
        };
    }
    if let Some(n) = nx {
        s.grid = RoadGrid::new(s.grid.x_min(), s.grid.x_max(), n).map_err(|e| {
            eprintln!("error: --nx {n}: {e}");
            ExitCode::from(INVALID)
        })?;
    }
    s.oracle_check |= oracle_check;

    let snapshots = out.join("snapshots");
    fs::create_dir_all(&snapshots).map_err(|e| {
        eprintln!("error: {}: {e}", snapshots.display());
        ExitCode::FAILURE
    })?;
    let report_path = out.join("report.json");
    let write_failed = |e: sigflow::io::IoError| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    };

    let run = match run_scenario(&s) {
        Ok(run) => run,
        Err(failure) => {
            let phase = failure
                .failed_phase
                .map_or("setup".to_string(), |p| p.to_string());
            error!("run failed in {phase}: {}", failure.error);
            eprintln!("error: {phase} phase: {}", failure.error);
            write_report(&failure_report(s.model, &failure), &report_path).map_err(write_failed)?;
            return Err(ExitCode::FAILURE);
        }
    };

    for (k, point) in run.timeline.iter().enumerate() {
        let path = snapshots.join(format!("snapshot_{k:04}.csv"));
        write_snapshot(&point.state, &path).map_err(write_failed)?;
    }
    write_report(&build_report(&run), &report_path).map_err(write_failed)?;
    if let Some(field) = plot {
        let field = match field {
            Field::Rho => PlotField::Density,
            Field::V => PlotField::Velocity,
        };
        let states: Vec<_> = run.timeline.iter().map(|p| &p.state).collect();
        let stem = format!("plot_{}", field.name());
        emit_plot(
            &states,
            field,
            Some(&run.markers),
            &out.join(format!("{stem}.csv")),
            &out.join(format!("{stem}.svg")),
        )
        .map_err(write_failed)?;
    }

    let balance = mass_balance_report(&run);
    println!(
        "{} model: {} snapshots to t={} in {}",
        run.model,
        run.timeline.len(),
        s.t_end,
        out.display()
    );
    println!(
        "mass: initial {:.6} final {:.6} closure {:.3e} (relative {:.3e})",
        balance.initial_mass,
        balance.final_mass,
        balance.closure_residual,
        balance.relative_residual
    );
    println!(
        "braking compatibility residual: {:.3e} m/s",
        run.compatibility_residual
    );
    match &run.oracle {
        Some(OracleOutcome::Compared(c)) => println!(
            "oracle at t={}: L1(rho) {:.3e}, L1(v) {:.3e}",
            c.t, c.l1_rho, c.l1_v
        ),
        Some(OracleOutcome::Skipped { reason }) => println!("oracle skipped: {reason}"),
        None => {}
    }
    info!("wrote {}", report_path.display());
    Ok(())
}

fn verify(config: &Path) -> Result<(), ExitCode> {
    let s = load(config)?;
    let [coarse, fine] = verify_oracle(&s).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })?;
    println!("n_cells  t        L1(rho)      L1(v)");
    for c in [&coarse, &fine] {
        println!(
            "{:<8} {:<8} {:<12.4e} {:.4e}",
            c.n_cells, c.t, c.l1_rho, c.l1_v
        );
    }
    if fine.l1_rho > 0.0 {
        println!("density error ratio: {:.3}", coarse.l1_rho / fine.l1_rho);
    }
    Ok(())
}

fn validate(config: &Path) -> Result<(), ExitCode> {
    let s = load(config)?;
    println!("{}: valid {} model scenario", config.display(), s.model);
    for note in validation_notes(&s) {
        println!("  note: {note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIGFLOW_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            config,
            out,
            model,
            nx,
            oracle_check,
            plot,
        } => simulate(config, out, *model, *nx, *oracle_check, *plot),
        Command::VerifyOracle { config } => verify(config),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
