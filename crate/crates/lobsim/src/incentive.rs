//! Pointwise criterion, first-order condition and optimal incentive
//! schedules.
//!
//! The exchange's pointwise criterion is
//! `H(x, u, z, p, q) = u - g(x,z) + (alpha u + f(x,z)) p + sigma u q`,
//! concave in `(u, z)` whenever `p >= 0`; maximizing it in `z` yields the
//! incentive, which for the power/exponential families has the closed form
//! `z(x) = (p lambda r / (A e^{(a + kappa) x}))^{1/(1-r)}`.

use crate::error::{Error, Result};
use crate::model::{IntensityModel, IntensityParams, PenaltyModel, PenaltyParams, SideParams};
use crate::value::{StationaryValue, ValueField};

/// Sanity cap for the first-order-condition root search, far above any
/// plausible incentive.
pub const Z_MAX: f64 = 1e6;

/// The pointwise criterion `u - g + (alpha u + f) p + sigma u q`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian(
    x: f64,
    u: f64,
    z: f64,
    p: f64,
    q: f64,
    side: &SideParams,
    intensity: &dyn IntensityModel,
    penalty: &dyn PenaltyModel,
) -> f64 {
    u - penalty.evaluate(x, z) + (side.alpha * u + intensity.evaluate(x, z)) * p
        + side.sigma * u * q
}

/// Root of the strictly decreasing map `z -> p dz f(x,z) - dz g(x,z)` in
/// `(0, Z_MAX]`, or 0 when the map is nonpositive for all z > 0 (supremum at
/// the boundary). Errors if the map stays positive up to the cap.
///
/// Bracketing plus log-space bisection; safe because `g` is convex and `f`
/// strictly concave in z for the admitted families.
pub fn foc_solve(
    x: f64,
    p_value: f64,
    intensity: &dyn IntensityModel,
    penalty: &dyn PenaltyModel,
) -> Result<f64> {
    if !(p_value.is_finite() && p_value >= 0.0) {
        return Err(Error::invalid("p_value", p_value, "be >= 0"));
    }
    if p_value == 0.0 {
        return Ok(0.0);
    }
    let map = |z: f64| p_value * intensity.dz(x, z) - penalty.dz(x, z);

    let z_floor = 1e-30;
    if map(z_floor) <= 0.0 {
        // decreasing map already nonpositive: no interior root above
        return Ok(0.0);
    }
    let mut lo = z_floor;
    let mut hi = lo;
    loop {
        hi *= 4.0;
        if hi > Z_MAX {
            return Err(Error::NoRoot { z_max: Z_MAX });
        }
        if map(hi) <= 0.0 {
            break;
        }
        lo = hi;
    }
    // log-space bisection keeps relative precision uniform over 36 decades
    let mut iter = 0;
    while hi / lo > 1.0 + 1e-14 && iter < 200 {
        let mid = (lo * hi).sqrt();
        if map(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
    }
    Ok((lo * hi).sqrt())
}

/// Closed-form stationary incentive
/// `z(x) = (pbar(x) lambda r / (A e^{(a + kappa) x}))^{1/(1-r)}`.
pub fn stationary_incentive(
    x: f64,
    sv: &StationaryValue,
    intensity: &IntensityParams,
    penalty: &PenaltyParams,
) -> Result<f64> {
    let p = sv.eval(x)?;
    Ok(incentive_from_value(x, p, intensity, penalty))
}

/// The same closed-form map applied to an arbitrary nonnegative value.
pub fn incentive_from_value(
    x: f64,
    p: f64,
    intensity: &IntensityParams,
    penalty: &PenaltyParams,
) -> f64 {
    // tiny negative p can leak in from floating-point boundary values
    let p = p.max(0.0);
    if intensity.lambda == 0.0 || p == 0.0 {
        return 0.0;
    }
    let numerator = p * intensity.lambda * intensity.r;
    let denominator =
        penalty.cost_scale * ((penalty.cost_growth + intensity.kappa) * x).exp();
    (numerator / denominator).powf(1.0 / (1.0 - intensity.r))
}

/// A per-limit incentive table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRow {
    pub limit: usize,
    /// Distance of the limit from the mid-price ($).
    pub distance: f64,
    /// Incentive per unit order ($).
    pub incentive: f64,
}

/// Per-limit incentives; rows are ordered by strictly increasing distance.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitTable {
    pub rows: Vec<LimitRow>,
}

impl LimitTable {
    pub fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].distance <= w[0].distance {
                return Err(Error::invalid(
                    "limit_table.distance",
                    w[1].distance,
                    "be strictly increasing",
                ));
            }
        }
        for row in &self.rows {
            if row.incentive < 0.0 {
                return Err(Error::invalid(
                    "limit_table.incentive",
                    row.incentive,
                    "be >= 0",
                ));
            }
        }
        Ok(())
    }
}

/// How a per-limit incentive is read off the continuous schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableConvention {
    /// Evaluate at x = k * tick (matches the per-limit rate arithmetic).
    #[default]
    PointAtTick,
    /// Average over the tick interval [(k-1) tick, k tick] (composite
    /// Simpson), retained for reconciliation experiments.
    IntervalAverage,
}

/// The control `Z(t, x) >= 0`, either closed-form stationary or grid-backed.
#[derive(Debug, Clone)]
pub struct IncentiveSchedule {
    repr: ScheduleRepr,
    scale: f64,
}

#[derive(Debug, Clone)]
enum ScheduleRepr {
    Stationary {
        value: StationaryValue,
        intensity: IntensityParams,
        penalty: PenaltyParams,
    },
    Grid(ScheduleGrid),
}

/// Grid-backed schedule values `z[i * xs.len() + j] = Z(ts[i], xs[j])`.
#[derive(Debug, Clone)]
pub struct ScheduleGrid {
    pub ts: Vec<f64>,
    pub xs: Vec<f64>,
    pub z: Vec<f64>,
}

impl IncentiveSchedule {
    /// Closed-form stationary schedule.
    pub fn stationary(
        value: StationaryValue,
        intensity: IntensityParams,
        penalty: PenaltyParams,
    ) -> Self {
        IncentiveSchedule {
            repr: ScheduleRepr::Stationary {
                value,
                intensity,
                penalty,
            },
            scale: 1.0,
        }
    }

    pub fn domain_half_width(&self) -> f64 {
        match &self.repr {
            ScheduleRepr::Stationary { value, .. } => value.half_width,
            ScheduleRepr::Grid(g) => *g.xs.last().unwrap(),
        }
    }

    /// `Z(t, x)`. Grid representations sample the nearest time node and
    /// interpolate linearly in x; outside the domain the incentive is 0.
    pub fn at(&self, t: f64, x: f64) -> f64 {
        let raw = match &self.repr {
            ScheduleRepr::Stationary {
                value,
                intensity,
                penalty,
            } => {
                if x <= 0.0 || x >= value.half_width {
                    0.0
                } else {
                    incentive_from_value(x, value.eval_unchecked(x), intensity, penalty)
                }
            }
            ScheduleRepr::Grid(g) => g.sample(t, x),
        };
        self.scale * raw
    }

    /// The schedule multiplied by a nonnegative constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::invalid("factor", factor, "be >= 0"));
        }
        Ok(IncentiveSchedule {
            repr: self.repr.clone(),
            scale: self.scale * factor,
        })
    }

    pub fn grid(&self) -> Option<&ScheduleGrid> {
        match &self.repr {
            ScheduleRepr::Grid(g) => Some(g),
            ScheduleRepr::Stationary { .. } => None,
        }
    }

    /// True when `at(t, x)` does not depend on `t`, letting steppers tabulate
    /// the arrival source once instead of per time node.
    pub fn is_time_invariant(&self) -> bool {
        match &self.repr {
            ScheduleRepr::Stationary { .. } => true,
            ScheduleRepr::Grid(g) => g.ts.len() <= 1,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl ScheduleGrid {
    fn sample(&self, t: f64, x: f64) -> f64 {
        let nt = self.ts.len();
        let nx = self.xs.len();
        let t0 = self.ts[0];
        let dt = if nt > 1 { self.ts[1] - self.ts[0] } else { 1.0 };
        let i = (((t - t0) / dt).round().max(0.0) as usize).min(nt - 1);
        let x0 = self.xs[0];
        let dx = if nx > 1 { self.xs[1] - self.xs[0] } else { 1.0 };
        let pos = (x - x0) / dx;
        if pos <= 0.0 {
            return self.z[i * nx];
        }
        if pos >= (nx - 1) as f64 {
            return self.z[i * nx + nx - 1];
        }
        let j = pos.floor() as usize;
        let w = pos - j as f64;
        (1.0 - w) * self.z[i * nx + j] + w * self.z[i * nx + j + 1]
    }
}

/// Grid schedule from a solved value field, node-wise through the closed-form
/// optimal-control map; returns the schedule and its admissibility integral
/// `int int f(x, Z(t,x))^2 dx dt` (trapezoid in x, left-rectangle in t).
pub fn incentive_schedule(
    field: &ValueField,
    intensity: &IntensityParams,
    penalty: &PenaltyParams,
) -> (IncentiveSchedule, f64) {
    let nx = field.n_x();
    let nt = field.n_t();
    let mut z = vec![0.0; nt * nx];
    for i in 0..nt {
        for j in 0..nx {
            z[i * nx + j] = incentive_from_value(field.xs[j], field.at(i, j), intensity, penalty);
        }
    }
    let grid = ScheduleGrid {
        ts: field.ts.clone(),
        xs: field.xs.clone(),
        z,
    };
    let schedule = IncentiveSchedule {
        repr: ScheduleRepr::Grid(grid),
        scale: 1.0,
    };
    let model = crate::model::PowerIntensity { params: *intensity };
    let adm = admissibility_integral(&schedule, &model);
    (schedule, adm)
}

/// `int_0^T int_0^L f(x, Z(t,x))^2 dx dt` for a grid-backed schedule
/// (trapezoid in x, left-rectangle in t). Stationary schedules are sampled on
/// a 256 x 256 grid over the same domain with a 30-minute horizon.
pub fn admissibility_integral(
    schedule: &IncentiveSchedule,
    intensity: &dyn IntensityModel,
) -> f64 {
    let (ts, xs): (Vec<f64>, Vec<f64>) = match &schedule.repr {
        ScheduleRepr::Grid(g) => (g.ts.clone(), g.xs.clone()),
        ScheduleRepr::Stationary { value, .. } => {
            let l = value.half_width;
            let n = 256;
            (
                (0..n).map(|i| 30.0 * i as f64 / n as f64).collect(),
                (0..=n).map(|j| l * j as f64 / n as f64).collect(),
            )
        }
    };
    let dx = xs[1] - xs[0];
    let dt = if ts.len() > 1 { ts[1] - ts[0] } else { 1.0 };
    let nx = xs.len();
    let n_slabs = ts.len().saturating_sub(1).max(1);
    let mut total = 0.0;
    for &t in ts.iter().take(n_slabs) {
        let mut slab = 0.0;
        for (j, &x) in xs.iter().enumerate() {
            let f = intensity.evaluate(x, schedule.at(t, x).max(0.0));
            let w = if j == 0 || j == nx - 1 { 0.5 } else { 1.0 };
            slab += w * f * f;
        }
        total += dt * dx * slab;
    }
    total
}

/// Per-limit incentive table read off a schedule at t = 0.
pub fn per_limit_incentive_table(
    schedule: &IncentiveSchedule,
    tick: f64,
    n_limits: usize,
    convention: TableConvention,
) -> Result<LimitTable> {
    let l = schedule.domain_half_width();
    if n_limits == 0 {
        return Err(Error::invalid("n_limits", 0.0, "be >= 1"));
    }
    if (n_limits as f64) * tick > l * (1.0 + 1e-12) {
        return Err(Error::invalid(
            "n_limits",
            n_limits as f64,
            &format!("satisfy n_limits * tick <= L = {l}"),
        ));
    }
    let rows = (1..=n_limits)
        .map(|k| {
            let distance = k as f64 * tick;
            let incentive = match convention {
                TableConvention::PointAtTick => schedule.at(0.0, distance),
                TableConvention::IntervalAverage => {
                    // composite Simpson over the tick interval, 20 panels
                    let a = (k - 1) as f64 * tick;
                    let n = 20;
                    let h = tick / n as f64;
                    let mut s = schedule.at(0.0, a) + schedule.at(0.0, a + tick);
                    for i in 1..n {
                        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                        s += w * schedule.at(0.0, a + i as f64 * h);
                    }
                    s * h / 3.0 / tick
                }
            };
            LimitRow {
                limit: k,
                distance,
                incentive,
            }
        })
        .collect();
    let table = LimitTable { rows };
    table.validate()?;
    Ok(table)
}
