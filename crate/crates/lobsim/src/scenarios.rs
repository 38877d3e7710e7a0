//! Experiment harness: baseline plus the perturbed-parameter scenarios, each
//! producing per-limit incentive tables, paired with/without-incentive book
//! shapes, objective estimates, an oracle triangle and a validation report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::incentive::{
    incentive_schedule, per_limit_incentive_table, IncentiveSchedule, LimitTable, TableConvention,
};
use crate::model::{validate_params, ModelBundle};
use crate::report::{self, Series};
use crate::simulator::{
    ensemble_average, estimate_objective, BookState, EnsembleStats, ObjectiveEstimate, Side,
    SimGrid,
};
use crate::value::{
    exit_bias_allowance, feynman_kac_estimate, solve_value_pde, stationary_coefficients,
    ConvectionScheme, StationaryValue,
};

/// Default grid steps and run sizes (distances in dollars, times in minutes):
/// space step tick/10, value-solver time step 1e-2, simulator time step 1e-3
/// (noise heuristic sigma^2 dt ~ 9e-5), 30-minute horizon, 200 paths.
pub mod defaults {
    pub const DX: f64 = 1e-3;
    pub const DT_VALUE: f64 = 1e-2;
    pub const DT_SIM: f64 = 1e-3;
    pub const HORIZON: f64 = 30.0;
    pub const N_PATHS: usize = 200;
    /// Paths for the exit-time Monte Carlo leg of the oracle triangle.
    pub const MC_PATHS: usize = 20_000;
    pub const DT_MC: f64 = 1e-3;
    /// Probe points for the Monte Carlo leg.
    pub const MC_PROBES: [f64; 3] = [0.02, 0.05, 0.08];
    /// Sup-norm tolerance of the solver against the closed form, as a
    /// fraction of the value bound 1/|alpha|.
    pub const PDE_TOL_FRACTION: f64 = 1e-3;
}

/// Grid and run-size settings for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub dx: f64,
    pub dt_value: f64,
    pub dt_sim: f64,
    pub horizon: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            dx: defaults::DX,
            dt_value: defaults::DT_VALUE,
            dt_sim: defaults::DT_SIM,
            horizon: defaults::HORIZON,
        }
    }
}

/// A named parameter experiment.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub base: ModelBundle,
    /// Config-key overrides applied to the base bundle.
    pub overrides: Vec<(String, f64)>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub grids: GridSettings,
    pub outputs: OutputFormat,
}

impl ScenarioSpec {
    /// The override-applied, validated bundle.
    pub fn bundle(&self) -> Result<ModelBundle> {
        let mut b = self.base;
        for (key, value) in &self.overrides {
            crate::config::apply_override(&mut b, key, *value)?;
        }
        validate_params(b.book, b.intensity, b.penalty)
    }
}

/// The four built-in scenarios: baseline, halved diffusion, five-fold
/// convection, doubled cancellation (applied to both sides).
pub fn builtin_scenarios(
    base: &ModelBundle,
    n_paths: usize,
    master_seed: u64,
    grids: GridSettings,
    outputs: OutputFormat,
) -> Vec<ScenarioSpec> {
    let spec = |name: &str, overrides: Vec<(String, f64)>| ScenarioSpec {
        name: name.to_string(),
        base: *base,
        overrides,
        n_paths,
        master_seed,
        grids,
        outputs,
    };
    vec![
        spec("baseline", vec![]),
        spec(
            "eta_half",
            vec![
                ("eta_a".to_string(), base.book.ask.eta / 2.0),
                ("eta_b".to_string(), base.book.bid.eta / 2.0),
            ],
        ),
        spec(
            "beta_x5",
            vec![
                ("beta_a".to_string(), base.book.ask.beta * 5.0),
                ("beta_b".to_string(), base.book.bid.beta * 5.0),
            ],
        ),
        spec(
            "alpha_x2",
            vec![
                ("alpha_a".to_string(), base.book.ask.alpha * 2.0),
                ("alpha_b".to_string(), base.book.bid.alpha * 2.0),
            ],
        ),
    ]
}

/// Published per-limit incentives for the benchmark parameter set and its
/// three perturbations. Reported side-by-side with computed values in
/// `validation.txt`, never asserted: the published evaluation convention per
/// limit is not stated, so magnitude agreement is not expected.
pub const REFERENCE_INCENTIVES: [(&str, [f64; 10]); 4] = [
    (
        "baseline",
        [
            1.90e-3, 8.56e-6, 2.11e-8, 4.01e-11, 6.41e-14, 8.96e-17, 1.09e-19, 1.12e-22,
            8.86e-26, 3.84e-29,
        ],
    ),
    (
        "eta_half",
        [
            3.51e-2, 1.73e-4, 4.77e-7, 1.03e-9, 1.90e-12, 3.15e-15, 4.68e-18, 6.02e-21,
            6.14e-24, 3.55e-27,
        ],
    ),
    (
        "beta_x5",
        [
            2.21e-3, 1.18e-5, 3.53e-8, 8.37e-11, 1.74e-13, 3.29e-16, 5.80e-19, 9.36e-22,
            1.28e-24, 1.09e-27,
        ],
    ),
    (
        "alpha_x2",
        [
            1.64e-2, 7.57e-5, 1.95e-7, 3.90e-10, 6.69e-13, 1.01e-15, 1.36e-18, 1.57e-21,
            1.41e-24, 7.07e-28,
        ],
    ),
];

fn reference_for(name: &str) -> Option<&'static [f64; 10]> {
    REFERENCE_INCENTIVES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| v)
}

/// One Monte Carlo probe of the oracle triangle.
#[derive(Debug, Clone, Copy)]
pub struct McProbe {
    pub x: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    pub closed_form: f64,
    pub allowance: f64,
    pub within: bool,
}

/// Cross-validation of the three value routes.
#[derive(Debug, Clone)]
pub struct OracleChecks {
    /// Sup-norm distance of the solver slice at t = 0 to the closed form.
    pub pde_sup_delta: f64,
    pub pde_tolerance: f64,
    pub mc_probes: Vec<McProbe>,
}

impl OracleChecks {
    pub fn all_within(&self) -> bool {
        self.pde_sup_delta <= self.pde_tolerance && self.mc_probes.iter().all(|p| p.within)
    }
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub bundle: ModelBundle,
    pub stationary: StationaryValue,
    pub limit_table: LimitTable,
    pub reference: Option<&'static [f64; 10]>,
    pub stats_with: EnsembleStats,
    pub stats_without: EnsembleStats,
    pub objective_with: ObjectiveEstimate,
    pub objective_without: ObjectiveEstimate,
    pub oracle: OracleChecks,
    pub admissibility: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub wall_seconds: f64,
}

/// Runs one scenario end to end and writes its reports under `out_dir`.
pub fn run_scenario(spec: &ScenarioSpec, out_dir: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let bundle = spec.bundle().map_err(|e| scenario_context(&spec.name, e))?;
    let book = bundle.book;
    let g = spec.grids;

    // closed form and finite differences for the adjoint value
    let sv = stationary_coefficients(&book.ask, book.half_width)
        .map_err(|e| scenario_context(&spec.name, e))?;
    let field = solve_value_pde(
        &book.ask,
        book.half_width,
        g.horizon,
        g.dx,
        g.dt_value,
        0.5,
        ConvectionScheme::Centered,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;
    let pde_sup_delta = field.sup_delta_at(0, |x| sv.eval_unchecked(x));
    let pde_tolerance = defaults::PDE_TOL_FRACTION / book.ask.alpha.abs();

    // Monte Carlo probes against the closed form
    let allowance = exit_bias_allowance(&sv, book.ask.eta, defaults::DT_MC);
    let mut mc_probes = Vec::new();
    for &frac in &[
        defaults::MC_PROBES[0],
        defaults::MC_PROBES[1],
        defaults::MC_PROBES[2],
    ] {
        // probe points scale with the domain in case L was overridden
        let x = frac / 0.11 * book.half_width;
        let est = feynman_kac_estimate(
            &book.ask,
            book.half_width,
            0.0,
            x,
            g.horizon,
            defaults::MC_PATHS,
            defaults::DT_MC,
            spec.master_seed,
        )
        .map_err(|e| scenario_context(&spec.name, e))?;
        let closed = sv.eval(x).map_err(|e| scenario_context(&spec.name, e))?;
        let within = (est.mean - closed).abs() <= 3.0 * est.std_error + allowance;
        mc_probes.push(McProbe {
            x,
            mc_mean: est.mean,
            mc_std_error: est.std_error,
            closed_form: closed,
            allowance,
            within,
        });
    }
    let oracle = OracleChecks {
        pde_sup_delta,
        pde_tolerance,
        mc_probes,
    };

    // stationary incentives and per-limit table; the bid side solves the
    // mirrored problem with its own parameters
    let stationary_schedule = IncentiveSchedule::stationary(sv, bundle.intensity, bundle.penalty);
    let sv_bid = stationary_coefficients(&book.bid, book.half_width)
        .map_err(|e| scenario_context(&spec.name, e))?;
    let bid_schedule = IncentiveSchedule::stationary(sv_bid, bundle.intensity, bundle.penalty);
    let limit_table = per_limit_incentive_table(
        &stationary_schedule,
        book.tick,
        book.n_limits(),
        TableConvention::PointAtTick,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;
    let (_, admissibility) = incentive_schedule(&field, &bundle.intensity, &bundle.penalty);

    // paired ensembles and objectives (common random numbers via the seed)
    let fi = bundle.ask_intensity();
    let pe = bundle.penalty_model();
    let u0 = BookState::empty(book.half_width, g.dx)?;
    let sim_grid = SimGrid {
        dx: g.dx,
        dt: g.dt_sim,
    };
    let stats_with = ensemble_average(
        &book,
        (&fi, &fi),
        Some((&stationary_schedule, &bid_schedule)),
        &u0,
        g.horizon,
        sim_grid,
        spec.n_paths,
        spec.master_seed,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;
    let stats_without = ensemble_average(
        &book,
        (&fi, &fi),
        None,
        &u0,
        g.horizon,
        sim_grid,
        spec.n_paths,
        spec.master_seed,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;
    let objective_with = estimate_objective(
        &book,
        &fi,
        &pe,
        Some(&stationary_schedule),
        &u0,
        g.horizon,
        sim_grid,
        spec.n_paths,
        spec.master_seed,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;
    let objective_without = estimate_objective(
        &book,
        &fi,
        &pe,
        None,
        &u0,
        g.horizon,
        sim_grid,
        spec.n_paths,
        spec.master_seed,
    )
    .map_err(|e| scenario_context(&spec.name, e))?;

    let report = RunReport {
        name: spec.name.clone(),
        bundle,
        stationary: sv,
        limit_table,
        reference: reference_for(&spec.name),
        stats_with,
        stats_without,
        objective_with,
        objective_without,
        oracle,
        admissibility,
        n_paths: spec.n_paths,
        master_seed: spec.master_seed,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    emit_reports(&report, out_dir, spec.outputs)?;
    Ok(report)
}

fn scenario_context(name: &str, e: Error) -> Error {
    match e {
        Error::Config { path, message } => Error::Config {
            path,
            message: format!("scenario {name}: {message}"),
        },
        Error::Grid(m) => Error::Grid(format!("scenario {name}: {m}")),
        Error::Stability(m) => Error::Stability(format!("scenario {name}: {m}")),
        other => other,
    }
}

/// Writes the CSVs, optional charts, the per-scenario validation record and a
/// human-readable summary; returns the emitted paths.
pub fn emit_reports(
    report: &RunReport,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let path = out_dir.join("incentives.csv");
    report::write_limit_table(&path, &report.limit_table)?;
    files.push(path);
    let path = out_dir.join("shape_with.csv");
    report::write_shape(&path, &report.stats_with)?;
    files.push(path);
    let path = out_dir.join("shape_without.csv");
    report::write_shape(&path, &report.stats_without)?;
    files.push(path);
    let path = out_dir.join("volumes_with.csv");
    report::write_volumes(&path, &report.stats_with.volumes)?;
    files.push(path);
    let path = out_dir.join("volumes_without.csv");
    report::write_volumes(&path, &report.stats_without.volumes)?;
    files.push(path);
    files.push(report::write_text(
        out_dir,
        "validation.txt",
        &render_validation(report),
    )?);
    files.push(report::write_text(
        out_dir,
        "summary.txt",
        &render_summary(report),
    )?);

    if format == OutputFormat::CsvSvg {
        let incentives = Series {
            name: "incentive",
            points: report
                .limit_table
                .rows
                .iter()
                .map(|r| (r.limit as f64, r.incentive))
                .collect(),
        };
        let path = out_dir.join("incentives.svg");
        report::write_line_chart(
            &path,
            &format!("{}: incentive per unit order by limit", report.name),
            "limit",
            "incentive ($)",
            &[incentives],
            true,
        )?;
        files.push(path);

        let shape = |stats: &EnsembleStats| -> Vec<(f64, f64)> {
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
        let path = out_dir.join("shape.svg");
        report::write_line_chart(
            &path,
            &format!("{}: mean book shape at the horizon", report.name),
            "distance from mid-price ($)",
            "mean density",
            &[
                Series {
                    name: "with incentives",
                    points: shape(&report.stats_with),
                },
                Series {
                    name: "without incentives",
                    points: shape(&report.stats_without),
                },
            ],
            false,
        )?;
        files.push(path);
    }
    Ok(files)
}

fn render_validation(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", report.name);
    let _ = writeln!(s, "seed: {}", report.master_seed);
    let _ = writeln!(s, "paths: {}", report.n_paths);
    let _ = writeln!(s);
    let _ = writeln!(s, "oracle triangle (closed form vs solver vs Monte Carlo):");
    let ok = report.oracle.pde_sup_delta <= report.oracle.pde_tolerance;
    let _ = writeln!(
        s,
        "  solver sup delta {} (tolerance {}) {}",
        report::fmt_sig(report.oracle.pde_sup_delta),
        report::fmt_sig(report.oracle.pde_tolerance),
        if ok { "PASS" } else { "FAIL" }
    );
    for p in &report.oracle.mc_probes {
        let _ = writeln!(
            s,
            "  mc x={:.3}: mean {} se {} closed {} allowance {} {}",
            p.x,
            report::fmt_sig(p.mc_mean),
            report::fmt_sig(p.mc_std_error),
            report::fmt_sig(p.closed_form),
            report::fmt_sig(p.allowance),
            if p.within { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "per-limit incentives, computed vs reference (reference values are"
    );
    let _ = writeln!(
        s,
        "published for this scenario family and reported only; the published"
    );
    let _ = writeln!(
        s,
        "per-limit evaluation convention is unstated, so magnitudes are not"
    );
    let _ = writeln!(s, "asserted):");
    for (i, row) in report.limit_table.rows.iter().enumerate() {
        match report.reference.and_then(|r| r.get(i)) {
            Some(&reference) => {
                let rel = (row.incentive - reference) / reference;
                let _ = writeln!(
                    s,
                    "  limit {:2}  computed {}  reference {}  rel dev {:+.3e}",
                    row.limit,
                    report::fmt_sig(row.incentive),
                    report::fmt_sig(reference),
                    rel
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "  limit {:2}  computed {}  reference n/a",
                    row.limit,
                    report::fmt_sig(row.incentive)
                );
            }
        }
    }
    let _ = writeln!(s);
    let trunc = report.stats_with.truncation_fraction();
    let _ = writeln!(
        s,
        "truncation fraction (with incentives): {} ({})",
        report::fmt_sig(trunc),
        if trunc < 0.05 {
            "PASS (< 0.05)"
        } else {
            "FAIL: noise-dominated"
        }
    );
    let _ = writeln!(
        s,
        "admissibility integral of f(x, Z)^2: {}",
        report::fmt_sig(report.admissibility)
    );
    s
}

fn render_summary(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {}", report.name);
    let _ = writeln!(
        s,
        "  eta_a {}  beta_a {}  alpha_a {}  sigma_a {}",
        report.bundle.book.ask.eta,
        report.bundle.book.ask.beta,
        report.bundle.book.ask.alpha,
        report.bundle.book.ask.sigma
    );
    let _ = writeln!(
        s,
        "  first-limit incentive: {} $/unit order",
        report::fmt_sig(report.limit_table.rows[0].incentive)
    );
    let _ = writeln!(
        s,
        "  objective with incentives:    {} +/- {}",
        report::fmt_sig(report.objective_with.mean),
        report::fmt_sig(report.objective_with.std_error)
    );
    let _ = writeln!(
        s,
        "  objective without incentives: {} +/- {}",
        report::fmt_sig(report.objective_without.mean),
        report::fmt_sig(report.objective_without.std_error)
    );
    for k in 1..=3.min(report.bundle.book.n_limits()) {
        let w = report.stats_with.volume(k, Side::Ask).unwrap_or(0.0);
        let wo = report.stats_without.volume(k, Side::Ask).unwrap_or(0.0);
        let _ = writeln!(
            s,
            "  ask volume limit {k}: with {} without {}",
            report::fmt_sig(w),
            report::fmt_sig(wo)
        );
    }
    let _ = writeln!(
        s,
        "  oracle triangle: {}",
        if report.oracle.all_within() {
            "PASS"
        } else {
            "FAIL"
        }
    );
    let _ = writeln!(s, "  wall clock: {:.1} s", report.wall_seconds);
    s
}

/// Directional comparison of a perturbed scenario against the baseline at one
/// limit.
#[derive(Debug, Clone)]
pub struct DirectionCheck {
    pub scenario: String,
    pub limit: usize,
    pub perturbed: f64,
    pub baseline: f64,
    pub increased: bool,
}

/// Result of a sweep: the per-scenario reports plus the cross-scenario
/// sensitivity directions (perturbed first-limit incentives vs baseline).
#[derive(Debug)]
pub struct SweepReport {
    pub reports: Vec<RunReport>,
    pub directions: Vec<DirectionCheck>,
}

impl SweepReport {
    pub fn directions_hold(&self) -> bool {
        self.directions.iter().all(|d| d.increased)
    }
}

/// Runs the scenarios into per-name subdirectories of `out_root` and writes
/// the cross-scenario sensitivity record.
pub fn run_sweep(specs: &[ScenarioSpec], out_root: &Path) -> Result<SweepReport> {
    let mut reports = Vec::new();
    for spec in specs {
        let dir = out_root.join(&spec.name);
        reports.push(run_scenario(spec, &dir)?);
    }
    let directions = direction_checks(&reports);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "sensitivity directions: perturbed incentive vs baseline at the first three limits"
    );
    let _ = writeln!(
        s,
        "(the published account expects an increase in every case)"
    );
    for d in &directions {
        let _ = writeln!(
            s,
            "  {} limit {}: {} vs baseline {} -> {}",
            d.scenario,
            d.limit,
            report::fmt_sig(d.perturbed),
            report::fmt_sig(d.baseline),
            if d.increased { "INCREASED (PASS)" } else { "DECREASED (FAIL)" }
        );
    }
    report::write_text(out_root, "sensitivity.txt", &s)?;
    Ok(SweepReport {
        reports,
        directions,
    })
}

/// First-three-limit direction comparisons of every non-baseline report
/// against the baseline report.
pub fn direction_checks(reports: &[RunReport]) -> Vec<DirectionCheck> {
    let Some(base) = reports.iter().find(|r| r.name == "baseline") else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for r in reports.iter().filter(|r| r.name != "baseline") {
        for k in 0..3.min(r.limit_table.rows.len()) {
            let perturbed = r.limit_table.rows[k].incentive;
            let baseline = base.limit_table.rows[k].incentive;
            out.push(DirectionCheck {
                scenario: r.name.clone(),
                limit: k + 1,
                perturbed,
                baseline,
                increased: perturbed > baseline,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec(name: &str) -> ScenarioSpec {
        // coarse grid, short horizon, few paths: fast but structurally complete
        ScenarioSpec {
            name: name.to_string(),
            base: ModelBundle::baseline(),
            overrides: vec![],
            n_paths: 4,
            master_seed: 7,
            grids: GridSettings {
                dx: 1e-3,
                dt_value: 1e-2,
                dt_sim: 5e-3,
                horizon: 1.0,
            },
            outputs: OutputFormat::Csv,
        }
    }

    #[test]
    fn builtin_scenarios_carry_the_stated_overrides() {
        let base = ModelBundle::baseline();
        let specs = builtin_scenarios(&base, 10, 1, GridSettings::default(), OutputFormat::Csv);
        assert_eq!(specs.len(), 4);
        let by_name = |n: &str| specs.iter().find(|s| s.name == n).unwrap();
        let eta = by_name("eta_half").bundle().unwrap();
        assert_eq!(eta.book.ask.eta, 5e-4);
        assert_eq!(eta.book.bid.eta, 5e-4);
        let beta = by_name("beta_x5").bundle().unwrap();
        assert_eq!(beta.book.ask.beta, 0.1);
        let alpha = by_name("alpha_x2").bundle().unwrap();
        assert_eq!(alpha.book.ask.alpha, -0.4);
        // everything else untouched
        assert_eq!(alpha.book.ask.eta, 1e-3);
        assert_eq!(alpha.intensity, base.intensity);
    }

    #[test]
    fn run_scenario_emits_the_manifest() {
        let dir = std::env::temp_dir().join("lobsim_scenario_manifest");
        std::fs::remove_dir_all(&dir).ok();
        let report = run_scenario(&tiny_spec("baseline"), &dir).unwrap();
        for name in [
            "incentives.csv",
            "shape_with.csv",
            "shape_without.csv",
            "volumes_with.csv",
            "volumes_without.csv",
            "validation.txt",
            "summary.txt",
        ] {
            assert!(dir.join(name).exists(), "missing {name}");
        }
        // csv-only: no vector charts
        assert!(!dir.join("incentives.svg").exists());
        assert!(!dir.join("shape.svg").exists());
        // validation.txt carries the reference-vs-computed block
        let text = std::fs::read_to_string(dir.join("validation.txt")).unwrap();
        assert!(text.contains("reference 1.90000000000e-3"), "{text}");
        assert_eq!(text.matches("rel dev").count(), 10);
        assert_eq!(report.limit_table.rows.len(), 10);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn svg_emission_behind_the_flag() {
        let dir = std::env::temp_dir().join("lobsim_scenario_svg");
        std::fs::remove_dir_all(&dir).ok();
        let mut spec = tiny_spec("baseline");
        spec.outputs = OutputFormat::CsvSvg;
        run_scenario(&spec, &dir).unwrap();
        assert!(dir.join("incentives.svg").exists());
        assert!(dir.join("shape.svg").exists());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn reports_are_deterministic() {
        let dir1 = std::env::temp_dir().join("lobsim_det_1");
        let dir2 = std::env::temp_dir().join("lobsim_det_2");
        std::fs::remove_dir_all(&dir1).ok();
        std::fs::remove_dir_all(&dir2).ok();
        run_scenario(&tiny_spec("baseline"), &dir1).unwrap();
        run_scenario(&tiny_spec("baseline"), &dir2).unwrap();
        for name in [
            "incentives.csv",
            "shape_with.csv",
            "shape_without.csv",
            "volumes_with.csv",
            "volumes_without.csv",
            "validation.txt",
        ] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
        std::fs::remove_dir_all(&dir1).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn scenario_errors_carry_context() {
        let mut spec = tiny_spec("broken");
        spec.overrides = vec![("alpha_a".to_string(), 0.5)];
        let dir = std::env::temp_dir().join("lobsim_scenario_err");
        let err = run_scenario(&spec, &dir).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn direction_checks_compare_against_baseline() {
        let dir = std::env::temp_dir().join("lobsim_directions");
        std::fs::remove_dir_all(&dir).ok();
        let mut specs = vec![tiny_spec("baseline")];
        let mut eta = tiny_spec("eta_half");
        eta.overrides = vec![
            ("eta_a".to_string(), 5e-4),
            ("eta_b".to_string(), 5e-4),
        ];
        specs.push(eta);
        let sweep = run_sweep(&specs, &dir).unwrap();
        assert_eq!(sweep.directions.len(), 3);
        // halved diffusion raises the incentives at the first limits
        assert!(sweep.directions.iter().all(|d| d.increased));
        assert!(dir.join("sensitivity.txt").exists());
        assert!(dir.join("baseline/incentives.csv").exists());
        assert!(dir.join("eta_half/incentives.csv").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
