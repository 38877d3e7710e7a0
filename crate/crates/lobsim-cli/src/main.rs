//! Command-line entry point: value solving, incentive computation, book
//! simulation, parameter sweeps and the validation suite, with deterministic
//! seeding and config-file loading.
//!
//! Exit status: 0 on success, 2 for configuration/parameter errors, 3 for
//! numeric-stability or grid errors, 4 when asserted validation checks fail,
//! 1 for i/o failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lobsim::config::{OutputFormat, RawConfig, RunSettings};
use lobsim::error::Error;
use lobsim::incentive::{
    incentive_schedule, per_limit_incentive_table, IncentiveSchedule, TableConvention,
};
use lobsim::model::ModelBundle;
use lobsim::report;
use lobsim::rng::DEFAULT_MASTER_SEED;
use lobsim::scenarios::{self, builtin_scenarios, defaults, GridSettings, ScenarioSpec};
use lobsim::simulator::{ensemble_average, estimate_objective, BookState, SimGrid};
use lobsim::validate::{render_checks, validate_bundle};
use lobsim::value::{
    exit_bias_allowance, feynman_kac_estimate, solve_value_pde, stationary_coefficients,
    ConvectionScheme,
};

#[derive(Parser)]
#[command(
    name = "lobsim",
    about = "Order-book SPDE simulation and optimal exchange incentives",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Parameter file; missing keys fall back to the built-in baseline set.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed for all random streams.
    #[arg(long, default_value_t = DEFAULT_MASTER_SEED)]
    seed: u64,
    /// Space step ($).
    #[arg(long)]
    dx: Option<f64>,
    /// Time step (min) for the subcommand's own stepper.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon (min).
    #[arg(long)]
    horizon: Option<f64>,
    /// Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: OutputFormat,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "csv+svg" => Ok(OutputFormat::CsvSvg),
        other => Err(format!("expected csv or csv+svg, got {other}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the adjoint value equation and report the oracle deltas.
    Value(CommonArgs),
    /// Compute the optimal incentive table and schedule.
    Incentives(CommonArgs),
    /// Simulate the controlled book with and without incentives.
    Simulate(SimulateArgs),
    /// Run built-in or user scenarios.
    Sweep(SweepArgs),
    /// Run the full oracle and property suite.
    Validate(CommonArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also export one full simulated path (t,x,u rows; large).
    #[arg(long)]
    export_path: bool,
    /// Snapshot stride (steps) for --export-path.
    #[arg(long, default_value_t = 100)]
    path_stride: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Run the four built-in scenarios.
    #[arg(long)]
    builtin: bool,
    /// Scenario files (configs with a [scenario] section).
    #[arg(value_name = "SCENARIO_FILE")]
    scenario_files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Value(args) => cmd_value(&args),
        Command::Incentives(args) => cmd_incentives(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::OutOfDomain { .. } => {
            ExitCode::from(2)
        }
        Error::Stability(_)
        | Error::Grid(_)
        | Error::SingularSystem { .. }
        | Error::NoRoot { .. }
        | Error::UnboundedDerivative => ExitCode::from(3),
        Error::Io { .. } => ExitCode::from(1),
    }
}

struct Resolved {
    bundle: ModelBundle,
    grids: GridSettings,
    n_paths: usize,
    seed: u64,
    format: OutputFormat,
    out: PathBuf,
}

fn resolve(args: &CommonArgs, subcommand: &str) -> Result<Resolved, Error> {
    let bundle = match &args.config {
        Some(path) => RawConfig::from_path(path)?.to_bundle()?,
        None => ModelBundle::baseline(),
    };
    // a tenth of a tick keeps tick intervals on whole cells for any geometry
    let mut grids = GridSettings {
        dx: args.dx.unwrap_or(bundle.book.tick / 10.0),
        ..GridSettings::default()
    };
    if let Some(dt) = args.dt {
        // the time step applies to the stepper the subcommand runs
        match subcommand {
            "value" => grids.dt_value = dt,
            _ => grids.dt_sim = dt,
        }
    }
    if let Some(h) = args.horizon {
        grids.horizon = h;
    }
    let n_paths = args.paths.unwrap_or(defaults::N_PATHS);
    Ok(Resolved {
        bundle,
        grids,
        n_paths,
        seed: args.seed,
        format: args.format,
        out: args.out.clone(),
    })
}

fn write_effective(r: &Resolved, subcommand: &str) -> Result<(), Error> {
    let run = RunSettings {
        subcommand: subcommand.to_string(),
        seed: r.seed,
        dx: r.grids.dx,
        dt_value: r.grids.dt_value,
        dt_sim: r.grids.dt_sim,
        horizon: r.grids.horizon,
        n_paths: r.n_paths,
        format: r.format,
    };
    report::write_text(
        &r.out,
        "effective_config.cfg",
        &lobsim::config::render_effective_config(&r.bundle, &run),
    )?;
    Ok(())
}

fn cmd_value(args: &CommonArgs) -> Result<ExitCode, Error> {
    let r = resolve(args, "value")?;
    write_effective(&r, "value")?;
    let book = r.bundle.book;
    let field = solve_value_pde(
        &book.ask,
        book.half_width,
        r.grids.horizon,
        r.grids.dx,
        r.grids.dt_value,
        0.5,
        ConvectionScheme::Centered,
    )?;
    report::write_value_field(&r.out.join("pfield.csv"), &field)?;

    let sv = stationary_coefficients(&book.ask, book.half_width)?;
    let sup = field.sup_delta_at(0, |x| sv.eval_unchecked(x));
    let tol = defaults::PDE_TOL_FRACTION / book.ask.alpha.abs();
    let mut text = format!(
        "solver vs closed form sup delta: {} (tolerance {})\n",
        report::fmt_sig(sup),
        report::fmt_sig(tol)
    );
    let allowance = exit_bias_allowance(&sv, book.ask.eta, defaults::DT_MC);
    for &frac in &defaults::MC_PROBES {
        let x = frac / 0.11 * book.half_width;
        let est = feynman_kac_estimate(
            &book.ask,
            book.half_width,
            0.0,
            x,
            r.grids.horizon,
            r.n_paths.max(defaults::MC_PATHS),
            defaults::DT_MC,
            r.seed,
        )?;
        let closed = sv.eval(x)?;
        text.push_str(&format!(
            "mc x={x:.3}: mean {} se {} closed {} allowance {}\n",
            report::fmt_sig(est.mean),
            report::fmt_sig(est.std_error),
            report::fmt_sig(closed),
            report::fmt_sig(allowance)
        ));
    }
    report::write_text(&r.out, "oracle.txt", &text)?;
    println!("wrote {}", r.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_incentives(args: &CommonArgs) -> Result<ExitCode, Error> {
    let r = resolve(args, "incentives")?;
    write_effective(&r, "incentives")?;
    let book = r.bundle.book;
    let sv = stationary_coefficients(&book.ask, book.half_width)?;
    let schedule = IncentiveSchedule::stationary(sv, r.bundle.intensity, r.bundle.penalty);
    let table = per_limit_incentive_table(
        &schedule,
        book.tick,
        book.n_limits(),
        TableConvention::PointAtTick,
    )?;
    report::write_limit_table(&r.out.join("incentives.csv"), &table)?;

    let field = solve_value_pde(
        &book.ask,
        book.half_width,
        r.grids.horizon,
        r.grids.dx,
        r.grids.dt_value,
        0.5,
        ConvectionScheme::Centered,
    )?;
    let (grid_schedule, admissibility) =
        incentive_schedule(&field, &r.bundle.intensity, &r.bundle.penalty);
    report::write_schedule(
        &r.out.join("schedule.csv"),
        grid_schedule.grid().expect("grid-backed schedule"),
    )?;
    report::write_text(
        &r.out,
        "admissibility.txt",
        &format!(
            "admissibility integral of f(x, Z)^2: {}\n",
            report::fmt_sig(admissibility)
        ),
    )?;
    if r.format == OutputFormat::CsvSvg {
        let series = report::Series {
            name: "incentive",
            points: table
                .rows
                .iter()
                .map(|row| (row.limit as f64, row.incentive))
                .collect(),
        };
        report::write_line_chart(
            &r.out.join("incentives.svg"),
            "incentive per unit order by limit",
            "limit",
            "incentive ($)",
            &[series],
            true,
        )?;
    }
    println!("wrote {}", r.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let r = resolve(&args.common, "simulate")?;
    write_effective(&r, "simulate")?;
    let book = r.bundle.book;
    let fi = r.bundle.ask_intensity();
    let pe = r.bundle.penalty_model();
    let sv = stationary_coefficients(&book.ask, book.half_width)?;
    let schedule = IncentiveSchedule::stationary(sv, r.bundle.intensity, r.bundle.penalty);
    // the bid side solves the mirrored problem with its own parameters
    let sv_bid = stationary_coefficients(&book.bid, book.half_width)?;
    let bid_schedule = IncentiveSchedule::stationary(sv_bid, r.bundle.intensity, r.bundle.penalty);
    let u0 = BookState::empty(book.half_width, r.grids.dx)?;
    let grid = SimGrid {
        dx: r.grids.dx,
        dt: r.grids.dt_sim,
    };
    let with = ensemble_average(
        &book,
        (&fi, &fi),
        Some((&schedule, &bid_schedule)),
        &u0,
        r.grids.horizon,
        grid,
        r.n_paths,
        r.seed,
    )?;
    let without = ensemble_average(
        &book,
        (&fi, &fi),
        None,
        &u0,
        r.grids.horizon,
        grid,
        r.n_paths,
        r.seed,
    )?;
    report::write_shape(&r.out.join("shape_with.csv"), &with)?;
    report::write_shape(&r.out.join("shape_without.csv"), &without)?;
    report::write_volumes(&r.out.join("volumes_with.csv"), &with.volumes)?;
    report::write_volumes(&r.out.join("volumes_without.csv"), &without.volumes)?;

    let obj_with = estimate_objective(
        &book,
        &fi,
        &pe,
        Some(&schedule),
        &u0,
        r.grids.horizon,
        grid,
        r.n_paths,
        r.seed,
    )?;
    let obj_without = estimate_objective(
        &book,
        &fi,
        &pe,
        None,
        &u0,
        r.grids.horizon,
        grid,
        r.n_paths,
        r.seed,
    )?;
    report::write_text(
        &r.out,
        "objective.txt",
        &format!(
            "objective with incentives:    {} +/- {}\nobjective without incentives: {} +/- {}\ntruncation fraction (with): {}\n",
            report::fmt_sig(obj_with.mean),
            report::fmt_sig(obj_with.std_error),
            report::fmt_sig(obj_without.mean),
            report::fmt_sig(obj_without.std_error),
            report::fmt_sig(with.truncation_fraction())
        ),
    )?;

    if args.export_path {
        let (_, snaps) = lobsim::simulator::simulate_book_recorded(
            &book,
            (&fi, &fi),
            Some((&schedule, &bid_schedule)),
            &u0,
            r.grids.horizon,
            grid,
            r.seed,
            args.path_stride,
        )?;
        report::write_book_path(&r.out.join("path.csv"), &snaps, &with.xs)?;
    }

    if r.format == OutputFormat::CsvSvg {
        let shape_points = |stats: &lobsim::EnsembleStats| {
            let n = stats.xs.len();
            let mut pts = Vec::with_capacity(2 * n - 1);
            for j in (1..n).rev() {
                pts.push((-stats.xs[j], stats.mean_bid[j]));
            }
            for j in 0..n {
                pts.push((stats.xs[j], stats.mean_ask[j]));
            }
            pts
        };
        report::write_line_chart(
            &r.out.join("shape.svg"),
            "mean book shape at the horizon",
            "distance from mid-price ($)",
            "mean density",
            &[
                report::Series {
                    name: "with incentives",
                    points: shape_points(&with),
                },
                report::Series {
                    name: "without incentives",
                    points: shape_points(&without),
                },
            ],
            false,
        )?;
    }
    println!("wrote {}", r.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, Error> {
    let r = resolve(&args.common, "sweep")?;
    let mut specs: Vec<ScenarioSpec> = Vec::new();
    if args.builtin {
        specs.extend(builtin_scenarios(
            &r.bundle,
            r.n_paths,
            r.seed,
            r.grids,
            r.format,
        ));
    }
    for file in &args.scenario_files {
        specs.push(scenario_from_file(file, &r, args.common.dx)?);
    }
    if specs.is_empty() {
        return Err(Error::Config {
            path: "sweep".to_string(),
            message: "nothing to run: pass --builtin and/or scenario files".to_string(),
        });
    }
    for spec in &specs {
        let sub = Resolved {
            bundle: spec.bundle()?,
            grids: spec.grids,
            n_paths: spec.n_paths,
            seed: spec.master_seed,
            format: spec.outputs,
            out: r.out.join(&spec.name),
        };
        write_effective(&sub, "sweep")?;
    }
    let sweep = scenarios::run_sweep(&specs, &r.out)?;
    for report in &sweep.reports {
        println!(
            "{}: first-limit incentive {}, oracle {}",
            report.name,
            report::fmt_sig(report.limit_table.rows[0].incentive),
            if report.oracle.all_within() {
                "PASS"
            } else {
                "FAIL"
            }
        );
    }
    let mut hard_failure = false;
    for d in &sweep.directions {
        if !d.increased {
            hard_failure = true;
            println!(
                "sensitivity direction violated: {} limit {} ({} <= {})",
                d.scenario,
                d.limit,
                report::fmt_sig(d.perturbed),
                report::fmt_sig(d.baseline)
            );
        }
    }
    if sweep.reports.iter().any(|rep| !rep.oracle.all_within()) {
        hard_failure = true;
    }
    println!("wrote {}", r.out.display());
    if hard_failure {
        eprintln!("asserted sweep invariants failed; see sensitivity.txt");
        Ok(ExitCode::from(4))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn scenario_from_file(
    file: &Path,
    r: &Resolved,
    cli_dx: Option<f64>,
) -> Result<ScenarioSpec, Error> {
    let cfg = RawConfig::from_path(file)?;
    let base = cfg.to_bundle()?;
    let section = cfg.scenario()?.ok_or_else(|| Error::Config {
        path: file.display().to_string(),
        message: "scenario file needs a [scenario] section".to_string(),
    })?;
    let mut grids = r.grids;
    // the file's own tick decides unless the file or the command line say so
    grids.dx = section
        .dx
        .or(cli_dx)
        .unwrap_or(base.book.tick / 10.0);
    if let Some(dt) = section.dt {
        grids.dt_sim = dt;
    }
    if let Some(h) = section.horizon {
        grids.horizon = h;
    }
    Ok(ScenarioSpec {
        name: section.name,
        base,
        overrides: section.overrides,
        n_paths: section.n_paths.unwrap_or(r.n_paths),
        master_seed: section.seed.unwrap_or(r.seed),
        grids,
        outputs: section.outputs.unwrap_or(r.format),
    })
}

fn cmd_validate(args: &CommonArgs) -> Result<ExitCode, Error> {
    let r = resolve(args, "validate")?;
    write_effective(&r, "validate")?;
    let checks = validate_bundle(&r.bundle, r.seed)?;
    let rendered = render_checks(&checks);
    print!("{rendered}");
    report::write_text(&r.out, "checks.txt", &rendered)?;
    if checks.iter().all(|c| c.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("validation failures detected");
        Ok(ExitCode::from(4))
    }
}
