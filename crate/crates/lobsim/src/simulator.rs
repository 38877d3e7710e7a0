//! Controlled order-book SPDE simulation on both sides with correlated
//! multiplicative noise.
//!
//! Each side advances by a drift-implicit, noise-explicit step: the linear
//! operator `eta d2 +/- beta d1 + alpha` is treated with a theta = 1/2
//! tridiagonal solve, the order-arrival source `f(x, Z(t,x))` enters
//! explicitly, and one shared Gaussian increment per side per step applies
//! the multiplicative noise. The bid side is simulated in mirrored distance
//! coordinates (where it satisfies the ask-form equation) and negated on
//! output, which preserves the sign convention ask >= 0 >= bid exactly.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::incentive::IncentiveSchedule;
use crate::model::{BookParams, IntensityModel, PenaltyModel, SideParams};
use crate::rng::{path_rng, StreamPurpose};
use crate::tridiag::{FactoredTridiagonal, Tridiagonal};

/// Simulation grid steps; `dx` must divide the domain width and `dt` the
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub dx: f64,
    pub dt: f64,
}

/// Order-book density on both sides. `ask[j]` holds `u(j dx) >= 0` and
/// `bid[j]` holds `u(-j dx) <= 0`; the four boundary nodes (`j = 0` and the
/// last index on each side) are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BookState {
    /// Time stamp (min).
    pub time: f64,
    pub ask: Vec<f64>,
    pub bid: Vec<f64>,
}

impl BookState {
    /// Empty book on a conforming grid.
    pub fn empty(half_width: f64, dx: f64) -> Result<Self> {
        let n = steps_of(half_width, dx, "space grid")? + 1;
        Ok(BookState {
            time: 0.0,
            ask: vec![0.0; n],
            bid: vec![0.0; n],
        })
    }

    /// Sign convention and boundary checks.
    pub fn validate(&self) -> Result<()> {
        if self.ask.len() != self.bid.len() || self.ask.len() < 3 {
            return Err(Error::Grid(format!(
                "book state needs matching side grids with >= 3 nodes (got {} / {})",
                self.ask.len(),
                self.bid.len()
            )));
        }
        let last = self.ask.len() - 1;
        for &j in &[0, last] {
            if self.ask[j] != 0.0 || self.bid[j] != 0.0 {
                return Err(Error::Grid(format!("boundary node {j} must be zero")));
            }
        }
        if self.ask.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::Grid("ask values must be >= 0".to_string()));
        }
        if self.bid.iter().any(|&v| v > 0.0 || v.is_nan()) {
            return Err(Error::Grid("bid values must be <= 0".to_string()));
        }
        Ok(())
    }
}

/// Result of a single simulated path.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub state: BookState,
    /// Number of node values clipped at zero after the noise step.
    pub truncation_events: u64,
    /// Total node-steps taken (both sides).
    pub node_steps: u64,
}

/// Book side tag for per-limit reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Ask,
    Bid,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Ask => write!(f, "ask"),
            Side::Bid => write!(f, "bid"),
        }
    }
}

/// Volume of the mean profile over one tick interval (signed: bid volumes are
/// nonpositive under the sign convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitVolume {
    pub limit: usize,
    pub side: Side,
    pub volume: f64,
}

/// Node-wise ensemble statistics of the terminal book.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    /// Distances of the ask-side nodes (bid nodes sit at the negated values).
    pub xs: Vec<f64>,
    pub mean_ask: Vec<f64>,
    pub std_ask: Vec<f64>,
    pub mean_bid: Vec<f64>,
    pub std_bid: Vec<f64>,
    pub volumes: Vec<LimitVolume>,
    pub n_paths: usize,
    pub truncation_events: u64,
    pub node_steps: u64,
}

impl EnsembleStats {
    pub fn truncation_fraction(&self) -> f64 {
        if self.node_steps == 0 {
            0.0
        } else {
            self.truncation_events as f64 / self.node_steps as f64
        }
    }

    pub fn volume(&self, limit: usize, side: Side) -> Option<f64> {
        self.volumes
            .iter()
            .find(|v| v.limit == limit && v.side == side)
            .map(|v| v.volume)
    }
}

/// Monte Carlo estimate of the exchange objective.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

fn steps_of(total: f64, step: f64, what: &str) -> Result<usize> {
    if !(step.is_finite() && step > 0.0 && total.is_finite() && total > 0.0) {
        return Err(Error::Grid(format!(
            "{what}: need positive extent and step (got {total} / {step})"
        )));
    }
    let n = (total / step).round();
    if n < 1.0 || ((n * step - total) / total).abs() > 1e-8 {
        return Err(Error::Grid(format!(
            "{what}: step {step} does not divide {total}"
        )));
    }
    Ok(n as usize)
}

/// Deduplicated per-step source rows: `f(x_j, Z(t, x_j))` (and the matching
/// incentive values) are path-independent, so they are tabulated once per
/// distinct schedule time node and shared across all paths.
struct SourceTable {
    f_rows: Vec<f64>,
    z_rows: Vec<f64>,
    row_of_step: Vec<u32>,
    n_int: usize,
}

impl SourceTable {
    fn build(
        intensity: &dyn IntensityModel,
        schedule: Option<&IncentiveSchedule>,
        xs_int: &[f64],
        dt: f64,
        n_steps: usize,
    ) -> Self {
        let n_int = xs_int.len();
        let sample_z =
            |t: f64, x: f64| -> f64 { schedule.map_or(0.0, |s| s.at(t, x).max(0.0)) };
        if schedule.is_none_or(|s| s.is_time_invariant()) {
            let z_rows: Vec<f64> = xs_int.iter().map(|&x| sample_z(0.0, x)).collect();
            let f_rows: Vec<f64> = xs_int
                .iter()
                .zip(z_rows.iter())
                .map(|(&x, &z)| intensity.evaluate(x, z))
                .collect();
            return SourceTable {
                f_rows,
                z_rows,
                row_of_step: vec![0; n_steps],
                n_int,
            };
        }
        // nearest-schedule-node sampling makes consecutive steps share rows
        let mut f_rows = Vec::new();
        let mut z_rows = Vec::new();
        let mut row_of_step = Vec::with_capacity(n_steps);
        let mut last_key: Option<Vec<u64>> = None;
        for m in 0..n_steps {
            let t = m as f64 * dt;
            let z_row: Vec<f64> = xs_int.iter().map(|&x| sample_z(t, x)).collect();
            let key: Vec<u64> = z_row.iter().map(|z| z.to_bits()).collect();
            if last_key.as_ref() != Some(&key) {
                for (&x, &z) in xs_int.iter().zip(z_row.iter()) {
                    f_rows.push(intensity.evaluate(x, z));
                }
                z_rows.extend_from_slice(&z_row);
                last_key = Some(key);
            }
            row_of_step.push((f_rows.len() / n_int - 1) as u32);
        }
        SourceTable {
            f_rows,
            z_rows,
            row_of_step,
            n_int,
        }
    }

    fn f_row(&self, step: usize) -> &[f64] {
        let r = self.row_of_step[step] as usize;
        &self.f_rows[r * self.n_int..(r + 1) * self.n_int]
    }

    fn z_row_raw(&self, row: usize) -> &[f64] {
        &self.z_rows[row * self.n_int..(row + 1) * self.n_int]
    }
}

/// One side of the book in distance coordinates, pre-factored for stepping.
struct SideEngine {
    solver: FactoredTridiagonal,
    lo: f64,
    di: f64,
    up: f64,
    w: f64,
    dt: f64,
    sigma: f64,
    source: SourceTable,
}

const THETA: f64 = 0.5;

impl SideEngine {
    fn build(
        side: &SideParams,
        intensity: &dyn IntensityModel,
        schedule: Option<&IncentiveSchedule>,
        xs_int: &[f64],
        dx: f64,
        dt: f64,
        n_steps: usize,
    ) -> Result<Self> {
        if side.sigma * side.sigma * dt > 0.1 {
            return Err(Error::Stability(format!(
                "noise heuristic sigma^2 dt <= 0.1 violated (sigma = {}, dt = {dt})",
                side.sigma
            )));
        }
        // centered bands of eta d2 + beta d1 + alpha (drift toward x = 0)
        let d2 = side.eta / (dx * dx);
        let d1 = side.beta / (2.0 * dx);
        let (lo, di, up) = (d2 - d1, -2.0 * d2 + side.alpha, d2 + d1);
        let n_int = xs_int.len();
        let implicit = Tridiagonal::uniform(
            n_int,
            -THETA * dt * lo,
            1.0 - THETA * dt * di,
            -THETA * dt * up,
        );
        Ok(SideEngine {
            solver: implicit.factor()?,
            lo,
            di,
            up,
            w: (1.0 - THETA) * dt,
            dt,
            sigma: side.sigma,
            source: SourceTable::build(intensity, schedule, xs_int, dt, n_steps),
        })
    }

    fn step(&self, step: usize, u: &mut [f64], rhs: &mut [f64], d_w: f64) -> u64 {
        let n = u.len();
        let source = self.source.f_row(step);
        for j in 0..n {
            let mut v = u[j] + self.w * self.di * u[j];
            if j > 0 {
                v += self.w * self.lo * u[j - 1];
            }
            if j + 1 < n {
                v += self.w * self.up * u[j + 1];
            }
            rhs[j] = v + self.dt * source[j];
        }
        self.solver.solve_in_place(rhs);
        let m = 1.0 + self.sigma * d_w;
        let mut clips = 0;
        for j in 0..n {
            let v = rhs[j] * m;
            if v < 0.0 {
                u[j] = 0.0;
                clips += 1;
            } else {
                u[j] = v;
            }
        }
        clips
    }
}

/// Shared two-sided stepping machinery, built once per run and immutable
/// across concurrently simulated paths.
pub struct BookEngine {
    ask: SideEngine,
    bid: SideEngine,
    rho: f64,
    dt: f64,
    n_steps: usize,
    xs: Vec<f64>,
    horizon: f64,
}

impl BookEngine {
    pub fn build(
        book: &BookParams,
        intensity: (&dyn IntensityModel, &dyn IntensityModel),
        schedules: Option<(&IncentiveSchedule, &IncentiveSchedule)>,
        horizon: f64,
        grid: SimGrid,
    ) -> Result<Self> {
        let n_x = steps_of(book.half_width, grid.dx, "space grid")? + 1;
        let n_steps = steps_of(horizon, grid.dt, "time grid")?;
        let xs: Vec<f64> = (0..n_x).map(|j| j as f64 * grid.dx).collect();
        let xs_int = &xs[1..n_x - 1];
        let (sched_ask, sched_bid) = match schedules {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        Ok(BookEngine {
            ask: SideEngine::build(
                &book.ask,
                intensity.0,
                sched_ask,
                xs_int,
                grid.dx,
                grid.dt,
                n_steps,
            )?,
            bid: SideEngine::build(
                &book.bid,
                intensity.1,
                sched_bid,
                xs_int,
                grid.dx,
                grid.dt,
                n_steps,
            )?,
            rho: book.rho,
            dt: grid.dt,
            n_steps,
            xs,
            horizon,
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn check_initial(&self, u0: &BookState) -> Result<()> {
        u0.validate()?;
        if u0.ask.len() != self.xs.len() {
            return Err(Error::Grid(format!(
                "initial state has {} nodes, grid has {}",
                u0.ask.len(),
                self.xs.len()
            )));
        }
        Ok(())
    }

    /// Runs one path. The observer sees (step index, time, ask interior,
    /// mirrored bid interior) before every step and once after the last one.
    fn run_path(
        &self,
        u0: &BookState,
        rng: &mut ChaCha12Rng,
        mut observe: impl FnMut(usize, f64, &[f64], &[f64]),
    ) -> (Vec<f64>, Vec<f64>, u64) {
        let n_int = self.xs.len() - 2;
        let mut ask: Vec<f64> = u0.ask[1..=n_int].to_vec();
        // bid side in mirrored coordinates: v(x) = -u(-x) >= 0
        let mut bid: Vec<f64> = u0.bid[1..=n_int].iter().map(|&v| -v).collect();
        let mut rhs = vec![0.0; n_int];
        let mut clips = 0;
        let corr = (1.0 - self.rho * self.rho).sqrt();
        let sqrt_dt = self.dt.sqrt();
        for m in 0..self.n_steps {
            observe(m, m as f64 * self.dt, &ask, &bid);
            let xi1: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            let dw_ask = sqrt_dt * xi1;
            let dw_bid = sqrt_dt * (self.rho * xi1 + corr * xi2);
            clips += self.ask.step(m, &mut ask, &mut rhs, dw_ask);
            clips += self.bid.step(m, &mut bid, &mut rhs, dw_bid);
        }
        observe(self.n_steps, self.horizon, &ask, &bid);
        (ask, bid, clips)
    }

    fn assemble_state(&self, ask_int: Vec<f64>, bid_int: Vec<f64>) -> BookState {
        let n_x = self.xs.len();
        let mut ask = vec![0.0; n_x];
        let mut bid = vec![0.0; n_x];
        ask[1..n_x - 1].copy_from_slice(&ask_int);
        for (j, v) in bid_int.iter().enumerate() {
            bid[j + 1] = -v;
        }
        BookState {
            time: self.horizon,
            ask,
            bid,
        }
    }

    fn node_steps(&self) -> u64 {
        2 * (self.xs.len() as u64 - 2) * self.n_steps as u64
    }
}

/// Simulates one path of the controlled book and returns the terminal state.
#[allow(clippy::too_many_arguments)]
pub fn simulate_book(
    book: &BookParams,
    intensity: (&dyn IntensityModel, &dyn IntensityModel),
    schedules: Option<(&IncentiveSchedule, &IncentiveSchedule)>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    seed: u64,
) -> Result<SimOutput> {
    simulate_book_indexed(book, intensity, schedules, u0, horizon, grid, seed, 0)
}

/// Simulates the path that [`ensemble_average`] would run at `path_index`
/// under the same master seed, so per-path statistics (paired comparisons,
/// per-path limit volumes) can be reconstructed exactly.
#[allow(clippy::too_many_arguments)]
pub fn simulate_book_indexed(
    book: &BookParams,
    intensity: (&dyn IntensityModel, &dyn IntensityModel),
    schedules: Option<(&IncentiveSchedule, &IncentiveSchedule)>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    master_seed: u64,
    path_index: u64,
) -> Result<SimOutput> {
    let engine = BookEngine::build(book, intensity, schedules, horizon, grid)?;
    engine.check_initial(u0)?;
    let mut rng = path_rng(master_seed, StreamPurpose::BookPath, path_index);
    let (ask, bid, clips) = engine.run_path(u0, &mut rng, |_, _, _, _| {});
    Ok(SimOutput {
        state: engine.assemble_state(ask, bid),
        truncation_events: clips,
        node_steps: engine.node_steps(),
    })
}

/// Like [`simulate_book`] but keeps a snapshot every `stride` steps
/// (including the initial and terminal states) for full-path export.
#[allow(clippy::too_many_arguments)]
pub fn simulate_book_recorded(
    book: &BookParams,
    intensity: (&dyn IntensityModel, &dyn IntensityModel),
    schedules: Option<(&IncentiveSchedule, &IncentiveSchedule)>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    seed: u64,
    stride: usize,
) -> Result<(SimOutput, Vec<BookState>)> {
    if stride == 0 {
        return Err(Error::invalid("stride", 0.0, "be >= 1"));
    }
    let engine = BookEngine::build(book, intensity, schedules, horizon, grid)?;
    engine.check_initial(u0)?;
    let mut rng = path_rng(seed, StreamPurpose::BookPath, 0);
    let mut snaps = Vec::new();
    let n_steps = engine.n_steps();
    let (ask, bid, clips) = engine.run_path(u0, &mut rng, |m, t, ask_int, bid_int| {
        if m % stride == 0 || m == n_steps {
            let mut state = engine.assemble_state(ask_int.to_vec(), bid_int.to_vec());
            state.time = t;
            snaps.push(state);
        }
    });
    Ok((
        SimOutput {
            state: engine.assemble_state(ask, bid),
            truncation_events: clips,
            node_steps: engine.node_steps(),
        },
        snaps,
    ))
}

/// Independent paths with per-path streams derived from the master seed;
/// node-wise mean/std of the terminal book plus per-limit volumes by
/// trapezoidal quadrature over each tick interval. Accumulation runs in path
/// order, so results are bit-identical for any degree of parallelism.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_average(
    book: &BookParams,
    intensity: (&dyn IntensityModel, &dyn IntensityModel),
    schedules: Option<(&IncentiveSchedule, &IncentiveSchedule)>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<EnsembleStats> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "be >= 2"));
    }
    let nodes_per_tick = steps_of(book.tick, grid.dx, "tick interval")?;
    let engine = BookEngine::build(book, intensity, schedules, horizon, grid)?;
    engine.check_initial(u0)?;

    let paths: Vec<(Vec<f64>, Vec<f64>, u64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(master_seed, StreamPurpose::BookPath, i as u64);
            engine.run_path(u0, &mut rng, |_, _, _, _| {})
        })
        .collect();

    let n_x = engine.xs.len();
    let n_int = n_x - 2;
    let nf = n_paths as f64;
    let mut mean_ask = vec![0.0; n_x];
    let mut mean_bid = vec![0.0; n_x];
    let mut truncation_events = 0;
    for (ask, bid, clips) in &paths {
        for j in 0..n_int {
            mean_ask[j + 1] += ask[j];
            mean_bid[j + 1] -= bid[j];
        }
        truncation_events += clips;
    }
    for v in mean_ask.iter_mut().chain(mean_bid.iter_mut()) {
        *v /= nf;
    }
    let mut std_ask = vec![0.0; n_x];
    let mut std_bid = vec![0.0; n_x];
    for (ask, bid, _) in &paths {
        for j in 0..n_int {
            let da = ask[j] - mean_ask[j + 1];
            let db = -bid[j] - mean_bid[j + 1];
            std_ask[j + 1] += da * da;
            std_bid[j + 1] += db * db;
        }
    }
    for v in std_ask.iter_mut().chain(std_bid.iter_mut()) {
        *v = (*v / (nf - 1.0)).sqrt();
    }

    let n_limits = book.n_limits();
    let trapz = |mean: &[f64], j0: usize, j1: usize| -> f64 {
        let mut s = 0.5 * (mean[j0] + mean[j1]);
        for v in &mean[j0 + 1..j1] {
            s += v;
        }
        s * grid.dx
    };
    let mut volumes = Vec::with_capacity(2 * n_limits);
    for k in 1..=n_limits {
        let (j0, j1) = ((k - 1) * nodes_per_tick, k * nodes_per_tick);
        volumes.push(LimitVolume {
            limit: k,
            side: Side::Ask,
            volume: trapz(&mean_ask, j0, j1),
        });
    }
    for k in 1..=n_limits {
        let (j0, j1) = ((k - 1) * nodes_per_tick, k * nodes_per_tick);
        volumes.push(LimitVolume {
            limit: k,
            side: Side::Bid,
            volume: trapz(&mean_bid, j0, j1),
        });
    }

    Ok(EnsembleStats {
        xs: engine.xs.clone(),
        mean_ask,
        std_ask,
        mean_bid,
        std_bid,
        volumes,
        n_paths,
        truncation_events,
        node_steps: engine.node_steps() * n_paths as u64,
    })
}

/// Monte Carlo estimate of the ask-side objective
/// `J = E[ int_0^T int_0^L (u - g(x, Z(t,x))) dx dt ]`,
/// accumulated per path by trapezoid in x and left-rectangle in t.
#[allow(clippy::too_many_arguments)]
pub fn estimate_objective(
    book: &BookParams,
    intensity_ask: &dyn IntensityModel,
    penalty: &dyn PenaltyModel,
    schedule: Option<&IncentiveSchedule>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<ObjectiveEstimate> {
    let samples = objective_samples(
        book,
        intensity_ask,
        penalty,
        schedule,
        u0,
        horizon,
        grid,
        n_paths,
        master_seed,
    )?;
    let nf = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(ObjectiveEstimate {
        mean,
        std_error,
        n_paths,
    })
}

/// Per-path objective values under the ensemble's path streams; paths with
/// equal indices share their Brownian increments across calls with the same
/// master seed, which is what paired schedule comparisons rely on.
#[allow(clippy::too_many_arguments)]
pub fn objective_samples(
    book: &BookParams,
    intensity_ask: &dyn IntensityModel,
    penalty: &dyn PenaltyModel,
    schedule: Option<&IncentiveSchedule>,
    u0: &BookState,
    horizon: f64,
    grid: SimGrid,
    n_paths: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", 0.0, "be >= 1"));
    }
    let n_x = steps_of(book.half_width, grid.dx, "space grid")? + 1;
    let n_steps = steps_of(horizon, grid.dt, "time grid")?;
    let xs: Vec<f64> = (0..n_x).map(|j| j as f64 * grid.dx).collect();
    let xs_int = &xs[1..n_x - 1];
    let engine = SideEngine::build(
        &book.ask,
        intensity_ask,
        schedule,
        xs_int,
        grid.dx,
        grid.dt,
        n_steps,
    )?;
    u0.validate()?;
    if u0.ask.len() != n_x {
        return Err(Error::Grid(format!(
            "initial state has {} nodes, grid has {n_x}",
            u0.ask.len()
        )));
    }

    // g(x, Z(t, x)) integrated in x is path-independent: one value per source row
    let n_rows = engine.source.f_rows.len() / xs_int.len();
    let mut g_int = vec![0.0; n_rows];
    for (r, g) in g_int.iter_mut().enumerate() {
        *g = grid.dx
            * xs_int
                .iter()
                .zip(engine.source.z_row_raw(r).iter())
                .map(|(&x, &z)| penalty.evaluate(x, z))
                .sum::<f64>();
    }

    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(master_seed, StreamPurpose::BookPath, i as u64);
            let mut u: Vec<f64> = u0.ask[1..n_x - 1].to_vec();
            let mut rhs = vec![0.0; n_x - 2];
            let sqrt_dt = grid.dt.sqrt();
            let mut total = 0.0;
            for m in 0..n_steps {
                let u_int: f64 = grid.dx * u.iter().sum::<f64>();
                total += grid.dt * (u_int - g_int[engine.source.row_of_step[m] as usize]);
                let xi: f64 = rng.sample(StandardNormal);
                engine.step(m, &mut u, &mut rhs, sqrt_dt * xi);
            }
            total
        })
        .collect();
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::incentive::IncentiveSchedule;
    use crate::model::{IntensityParams, ModelBundle, PowerIntensity};
    use crate::value::stationary_coefficients;
    use approx::assert_relative_eq;

    fn baseline() -> ModelBundle {
        ModelBundle::baseline()
    }

    fn zero_intensity() -> PowerIntensity {
        PowerIntensity {
            params: IntensityParams {
                lambda: 0.0,
                kappa: 1.0,
                lambda0: 0.0,
                kappa0: 1.0,
                r: 0.5,
            },
        }
    }

    fn stationary_schedule(b: &ModelBundle) -> IncentiveSchedule {
        let sv = stationary_coefficients(&b.book.ask, b.book.half_width).unwrap();
        IncentiveSchedule::stationary(sv, b.intensity, b.penalty)
    }

    #[test]
    fn degenerate_run_decays_exponentially() {
        // eta = beta = sigma = 0 and no source: every node obeys du = alpha u dt.
        let mut book = baseline().book;
        for side in [&mut book.ask, &mut book.bid] {
            side.eta = 0.0;
            side.beta = 0.0;
            side.sigma = 0.0;
        }
        let fi = zero_intensity();
        let mut u0 = BookState::empty(book.half_width, 1e-3).unwrap();
        let n = u0.ask.len();
        for j in 1..n - 1 {
            u0.ask[j] = 1.0 + (j as f64 * 0.1).sin().abs();
            u0.bid[j] = -0.5 - (j as f64 * 0.07).cos().abs();
        }
        let out = simulate_book(
            &book,
            (&fi, &fi),
            None,
            &u0,
            30.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            17,
        )
        .unwrap();
        let decay = (-0.2f64 * 30.0).exp();
        for j in 1..n - 1 {
            assert_relative_eq!(out.state.ask[j], u0.ask[j] * decay, max_relative = 1e-6);
            assert_relative_eq!(out.state.bid[j], u0.bid[j] * decay, max_relative = 1e-6);
        }
        assert_eq!(out.truncation_events, 0);
    }

    #[test]
    fn boundaries_and_signs_hold_every_step() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let (out, snaps) = simulate_book_recorded(
            &b.book,
            (&fi, &fi),
            None,
            &u0,
            0.5,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            3,
            50,
        )
        .unwrap();
        for s in snaps.iter().chain(std::iter::once(&out.state)) {
            s.validate().unwrap();
        }
    }

    #[test]
    fn deterministic_mirror_symmetry() {
        // symmetric parameters, mirrored initial book, sigma = 0: the bid
        // profile is the exact mirror of the ask profile.
        let mut book = baseline().book;
        book.ask.sigma = 0.0;
        book.bid.sigma = 0.0;
        let b = baseline();
        let fi = b.ask_intensity();
        let schedule = stationary_schedule(&b);
        let mut u0 = BookState::empty(book.half_width, 1e-3).unwrap();
        let n = u0.ask.len();
        for j in 1..n - 1 {
            let v = (j as f64 * 0.05).sin().abs() * 100.0;
            u0.ask[j] = v;
            u0.bid[j] = -v;
        }
        let out = simulate_book(
            &book,
            (&fi, &fi),
            Some((&schedule, &schedule)),
            &u0,
            1.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            5,
        )
        .unwrap();
        for j in 0..n {
            assert_eq!(
                out.state.ask[j],
                -out.state.bid[j],
                "node {j}: {} vs {}",
                out.state.ask[j],
                out.state.bid[j]
            );
        }
    }

    #[test]
    fn vanishing_noise_shrinks_ensemble_std() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 1e-3 };
        let mut quiet = b.book;
        quiet.ask.sigma = 1e-9;
        quiet.bid.sigma = 1e-9;
        let stats_q =
            ensemble_average(&quiet, (&fi, &fi), None, &u0, 1.0, grid, 8, 21).unwrap();
        let stats_n =
            ensemble_average(&b.book, (&fi, &fi), None, &u0, 1.0, grid, 8, 21).unwrap();
        let max_q = stats_q.std_ask.iter().cloned().fold(0.0, f64::max);
        let max_n = stats_n.std_ask.iter().cloned().fold(0.0, f64::max);
        let scale = stats_n.mean_ask.iter().cloned().fold(0.0, f64::max);
        assert!(max_q < 1e-6 * scale, "sigma -> 0 std {max_q}");
        assert!(max_n > 1e-3 * scale, "noisy std should be visible: {max_n}");
    }

    #[test]
    fn volumes_sum_to_total_quadrature() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let stats = ensemble_average(
            &b.book,
            (&fi, &fi),
            None,
            &u0,
            0.5,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            4,
            33,
        )
        .unwrap();
        let n_limits = b.book.n_limits();
        let sum: f64 = (1..=n_limits)
            .map(|k| stats.volume(k, Side::Ask).unwrap())
            .sum();
        // trapezoid over the union of the covered tick intervals [0, 10 tick]
        let j1 = (n_limits as f64 * b.book.tick / 1e-3).round() as usize;
        let mut trapz = 0.5 * (stats.mean_ask[0] + stats.mean_ask[j1]);
        for v in &stats.mean_ask[1..j1] {
            trapz += v;
        }
        trapz *= 1e-3;
        assert_relative_eq!(sum, trapz, max_relative = 1e-12);
    }

    #[test]
    fn ensemble_is_reproducible_and_thread_invariant() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 1e-3 };
        let run = || {
            ensemble_average(&b.book, (&fi, &fi), None, &u0, 0.2, grid, 6, 99).unwrap()
        };
        let a = run();
        let b2 = run();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        for (x, y) in a.mean_ask.iter().zip(b2.mean_ask.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.mean_ask.iter().zip(single.mean_ask.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.std_bid.iter().zip(single.std_bid.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.truncation_events, single.truncation_events);
    }

    #[test]
    fn incentives_lift_first_limits() {
        // paired seeds: same Brownian increments with and without incentives.
        let b = baseline();
        let fi = b.ask_intensity();
        let schedule = stationary_schedule(&b);
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 2e-3 };
        let with = ensemble_average(
            &b.book,
            (&fi, &fi),
            Some((&schedule, &schedule)),
            &u0,
            4.0,
            grid,
            20,
            4242,
        )
        .unwrap();
        let without =
            ensemble_average(&b.book, (&fi, &fi), None, &u0, 4.0, grid, 20, 4242).unwrap();
        for k in 1..=3 {
            let w = with.volume(k, Side::Ask).unwrap();
            let wo = without.volume(k, Side::Ask).unwrap();
            assert!(w > wo, "limit {k}: {w} <= {wo}");
            // bid side mirrors in magnitude
            let wb = with.volume(k, Side::Bid).unwrap();
            let wob = without.volume(k, Side::Bid).unwrap();
            assert!(wb < wob, "bid limit {k}: {wb} >= {wob}");
        }
    }

    #[test]
    fn truncation_fraction_is_negligible_at_baseline() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let stats = ensemble_average(
            &b.book,
            (&fi, &fi),
            None,
            &u0,
            2.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            10,
            7,
        )
        .unwrap();
        assert!(
            stats.truncation_fraction() < 0.05,
            "truncation fraction {}",
            stats.truncation_fraction()
        );
    }

    #[test]
    fn objective_zero_for_empty_uncontrolled_book() {
        let b = baseline();
        let fi = zero_intensity();
        let pe = b.penalty_model();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let est = estimate_objective(
            &b.book,
            &fi,
            &pe,
            None,
            &u0,
            1.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            4,
            13,
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn objective_matches_deterministic_mean_field() {
        // E[J] equals the deterministic run because the noise is multiplicative
        // with zero mean and the dynamics are linear in u.
        let b = baseline();
        let fi = b.ask_intensity();
        let pe = b.penalty_model();
        let schedule = stationary_schedule(&b);
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 2e-3 };
        let mc = estimate_objective(
            &b.book,
            &fi,
            &pe,
            Some(&schedule),
            &u0,
            2.0,
            grid,
            64,
            1001,
        )
        .unwrap();
        let mut quiet = b.book;
        quiet.ask.sigma = 1e-300;
        let det = estimate_objective(&quiet, &fi, &pe, Some(&schedule), &u0, 2.0, grid, 1, 1)
            .unwrap();
        let gap = (mc.mean - det.mean).abs();
        assert!(
            gap <= 4.0 * mc.std_error,
            "gap {gap} vs se {}",
            mc.std_error
        );
    }

    #[test]
    fn doubled_schedule_never_lowers_mean_profile() {
        let b = baseline();
        let fi = b.ask_intensity();
        let schedule = stationary_schedule(&b);
        let doubled = schedule.scaled(2.0).unwrap();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 2e-3 };
        let base = ensemble_average(
            &b.book,
            (&fi, &fi),
            Some((&schedule, &schedule)),
            &u0,
            2.0,
            grid,
            12,
            555,
        )
        .unwrap();
        let more = ensemble_average(
            &b.book,
            (&fi, &fi),
            Some((&doubled, &doubled)),
            &u0,
            2.0,
            grid,
            12,
            555,
        )
        .unwrap();
        // paired seeds and f increasing in z: node-wise monotone response
        for (hi, lo) in more.mean_ask.iter().zip(base.mean_ask.iter()) {
            assert!(hi + 1e-12 >= *lo);
        }
    }

    #[test]
    fn terminal_shape_is_insensitive_to_the_initial_book() {
        // ergodic decay: by the horizon the initial-condition contribution is
        // of order e^{alpha T}; deterministic runs from an empty and a
        // half-filled book land on (nearly) the same terminal profile.
        let b = baseline();
        let mut quiet = b.book;
        quiet.ask.sigma = 0.0;
        quiet.bid.sigma = 0.0;
        let fi = b.ask_intensity();
        let grid = SimGrid { dx: 1e-3, dt: 1e-3 };
        let empty = BookState::empty(b.book.half_width, grid.dx).unwrap();
        let mut half = empty.clone();
        let n = half.ask.len();
        for j in 1..n - 1 {
            half.ask[j] = 50_000.0;
            half.bid[j] = -50_000.0;
        }
        let from_empty =
            simulate_book(&quiet, (&fi, &fi), None, &empty, 30.0, grid, 3).unwrap();
        let from_half = simulate_book(&quiet, (&fi, &fi), None, &half, 30.0, grid, 3).unwrap();
        let scale = from_empty
            .state
            .ask
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        for j in 0..n {
            assert!(
                (from_empty.state.ask[j] - from_half.state.ask[j]).abs() < 1e-2 * scale,
                "node {j}: {} vs {}",
                from_empty.state.ask[j],
                from_half.state.ask[j]
            );
        }
    }

    #[test]
    fn indexed_paths_reconstruct_the_ensemble() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        let grid = SimGrid { dx: 1e-3, dt: 2e-3 };
        let n = 5;
        let stats =
            ensemble_average(&b.book, (&fi, &fi), None, &u0, 0.5, grid, n, 808).unwrap();
        let n_x = stats.xs.len();
        let mut mean = vec![0.0; n_x];
        for i in 0..n {
            let out = simulate_book_indexed(
                &b.book,
                (&fi, &fi),
                None,
                &u0,
                0.5,
                grid,
                808,
                i as u64,
            )
            .unwrap();
            for (m, u) in mean.iter_mut().zip(out.state.ask.iter()) {
                *m += u;
            }
        }
        for (m, s) in mean.iter_mut().zip(stats.mean_ask.iter()) {
            *m /= n as f64;
            assert!((*m - s).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_grids_and_states() {
        let b = baseline();
        let fi = b.ask_intensity();
        let u0 = BookState::empty(b.book.half_width, 1e-3).unwrap();
        // dx does not divide L
        assert!(simulate_book(
            &b.book,
            (&fi, &fi),
            None,
            &u0,
            1.0,
            SimGrid { dx: 3e-3, dt: 1e-3 },
            1
        )
        .is_err());
        // noise stability heuristic
        let mut loud = b.book;
        loud.ask.sigma = 40.0;
        assert!(matches!(
            simulate_book(
                &loud,
                (&fi, &fi),
                None,
                &u0,
                1.0,
                SimGrid { dx: 1e-3, dt: 1e-3 },
                1
            ),
            Err(Error::Stability(_))
        ));
        // sign violation in the initial state
        let mut bad = u0.clone();
        bad.bid[3] = 1.0;
        assert!(simulate_book(
            &b.book,
            (&fi, &fi),
            None,
            &bad,
            1.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            1
        )
        .is_err());
        // n_paths < 2 for ensembles
        assert!(ensemble_average(
            &b.book,
            (&fi, &fi),
            None,
            &u0,
            1.0,
            SimGrid { dx: 1e-3, dt: 1e-3 },
            1,
            1
        )
        .is_err());
    }
}
