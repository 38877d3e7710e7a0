//! Market parameters and the intensity / penalty function families.
//!
//! Units follow the benchmark parameter set throughout: distances and
//! incentives in dollars, time in minutes. All types are immutable after
//! validation and every operation here is a pure function.

use crate::error::{Error, Result};

/// Per-side dynamics of the order-book density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideParams {
    /// Diffusion coefficient ($^2/min, > 0): cancellation with symmetric replacement.
    pub eta: f64,
    /// Convection rate ($/min, >= 0): replacement of orders closer to the mid-price.
    pub beta: f64,
    /// Proportional cancellation rate (1/min, <= 0).
    pub alpha: f64,
    /// Multiplicative noise level (1/sqrt(min), > 0).
    pub sigma: f64,
}

impl SideParams {
    fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid(&field("eta"), self.eta, "be > 0"));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(&field("beta"), self.beta, "be >= 0"));
        }
        if !(self.alpha.is_finite() && self.alpha <= 0.0) {
            return Err(Error::invalid(&field("alpha"), self.alpha, "be <= 0"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(&field("sigma"), self.sigma, "be > 0"));
        }
        Ok(())
    }
}

/// Two-sided book parameters plus domain and tick geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookParams {
    pub ask: SideParams,
    pub bid: SideParams,
    /// Correlation of the two driving Brownian motions, in [-1, 1].
    pub rho: f64,
    /// Domain half-width L ($, > 0): no order further than L from the mid-price.
    pub half_width: f64,
    /// Tick size ($, 0 < tick < L).
    pub tick: f64,
}

impl BookParams {
    pub fn validate(&self) -> Result<()> {
        self.ask.validate("ask")?;
        self.bid.validate("bid")?;
        if !(self.rho.is_finite() && self.rho.abs() <= 1.0) {
            return Err(Error::invalid("rho", self.rho, "lie in [-1, 1]"));
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return Err(Error::invalid("L", self.half_width, "be > 0"));
        }
        if !(self.tick.is_finite() && self.tick > 0.0 && self.tick < self.half_width) {
            return Err(Error::invalid("tick", self.tick, "satisfy 0 < tick < L"));
        }
        Ok(())
    }

    /// Number of whole limits strictly inside the domain: the largest k with
    /// k * tick < L. With L = 0.11 and tick = 0.01 this is 10, the last cell
    /// [0.10, 0.11] absorbing the boundary.
    pub fn n_limits(&self) -> usize {
        (self.half_width / self.tick - 1e-9).floor() as usize
    }
}

/// Parameters of the order-arrival intensity family
/// `f(x, z) = lambda z^r e^{-kappa x} + lambda0 e^{-kappa0 x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityParams {
    /// Incentive-response scale ($^{-1-r}/min, >= 0).
    pub lambda: f64,
    /// Incentive-response decay ($^{-1}, > 0).
    pub kappa: f64,
    /// Baseline arrival scale ($^{-1}/min, >= 0).
    pub lambda0: f64,
    /// Baseline decay ($^{-1}, > 0).
    pub kappa0: f64,
    /// Concavity exponent, in (0, 1).
    pub r: f64,
}

impl IntensityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0 && self.r < 1.0) {
            return Err(Error::invalid("r", self.r, "lie in (0,1)"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", self.lambda, "be >= 0"));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid("kappa", self.kappa, "be > 0"));
        }
        if !(self.lambda0.is_finite() && self.lambda0 >= 0.0) {
            return Err(Error::invalid("lambda0", self.lambda0, "be >= 0"));
        }
        if !(self.kappa0.is_finite() && self.kappa0 > 0.0) {
            return Err(Error::invalid("kappa0", self.kappa0, "be > 0"));
        }
        Ok(())
    }
}

/// Parameters of the penalty family `g(x, z) = cost_scale * z * e^{cost_growth * x}`,
/// which satisfies g(x, 0) = 0 identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    /// Cost scale ($^{-2}, > 0).
    pub cost_scale: f64,
    /// Cost growth rate ($^{-1}, >= 0).
    pub cost_growth: f64,
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost_scale.is_finite() && self.cost_scale > 0.0) {
            return Err(Error::invalid("A_bar", self.cost_scale, "be > 0"));
        }
        if !(self.cost_growth.is_finite() && self.cost_growth >= 0.0) {
            return Err(Error::invalid("a_bar", self.cost_growth, "be >= 0"));
        }
        Ok(())
    }
}

/// Order-arrival rate density as a function of distance and incentive.
/// Implementations must be nondecreasing and concave in `z` for each `x`,
/// with `dz` consistent with `evaluate`.
pub trait IntensityModel: Send + Sync {
    /// Rate density at distance `x` under incentive `z` ($^{-1}/min).
    fn evaluate(&self, x: f64, z: f64) -> f64;
    /// Partial derivative in `z`; may be `f64::INFINITY` at z = 0.
    fn dz(&self, x: f64, z: f64) -> f64;
}

/// Exchange cost density for offering incentive `z` at distance `x`.
/// Implementations must vanish at z = 0, be nondecreasing in both arguments
/// and convex in `z`.
pub trait PenaltyModel: Send + Sync {
    fn evaluate(&self, x: f64, z: f64) -> f64;
    fn dz(&self, x: f64, z: f64) -> f64;
}

/// The concrete power-law intensity family.
#[derive(Debug, Clone, Copy)]
pub struct PowerIntensity {
    pub params: IntensityParams,
}

impl IntensityModel for PowerIntensity {
    fn evaluate(&self, x: f64, z: f64) -> f64 {
        let p = &self.params;
        p.lambda * z.powf(p.r) * (-p.kappa * x).exp() + p.lambda0 * (-p.kappa0 * x).exp()
    }

    fn dz(&self, x: f64, z: f64) -> f64 {
        let p = &self.params;
        if p.lambda == 0.0 {
            return 0.0;
        }
        if z == 0.0 {
            // z^{r-1} diverges; callers handle the boundary analytically.
            return f64::INFINITY;
        }
        p.lambda * p.r * z.powf(p.r - 1.0) * (-p.kappa * x).exp()
    }
}

/// The concrete linear-in-z exponential penalty family.
#[derive(Debug, Clone, Copy)]
pub struct ExpPenalty {
    pub params: PenaltyParams,
}

impl PenaltyModel for ExpPenalty {
    fn evaluate(&self, x: f64, z: f64) -> f64 {
        self.params.cost_scale * z * (self.params.cost_growth * x).exp()
    }

    fn dz(&self, x: f64, _z: f64) -> f64 {
        self.params.cost_scale * (self.params.cost_growth * x).exp()
    }
}

fn require_nonnegative_z(z: f64) -> Result<()> {
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::invalid("z", z, "be >= 0"));
    }
    Ok(())
}

/// `f(x, z)` for the power family, rejecting negative incentives.
pub fn intensity_eval(params: &IntensityParams, x: f64, z: f64) -> Result<f64> {
    require_nonnegative_z(z)?;
    Ok(PowerIntensity { params: *params }.evaluate(x, z))
}

/// `d/dz f(x, z)`; signals the divergence at z = 0 when r < 1.
pub fn intensity_dz(params: &IntensityParams, x: f64, z: f64) -> Result<f64> {
    require_nonnegative_z(z)?;
    if z == 0.0 && params.lambda > 0.0 {
        return Err(Error::UnboundedDerivative);
    }
    Ok(PowerIntensity { params: *params }.dz(x, z))
}

/// `g(x, z)` for the exponential penalty family.
pub fn penalty_eval(params: &PenaltyParams, x: f64, z: f64) -> Result<f64> {
    require_nonnegative_z(z)?;
    Ok(ExpPenalty { params: *params }.evaluate(x, z))
}

/// `d/dz g(x, z)`.
pub fn penalty_dz(params: &PenaltyParams, x: f64, z: f64) -> Result<f64> {
    require_nonnegative_z(z)?;
    Ok(ExpPenalty { params: *params }.dz(x, z))
}

/// How per-limit quantities are read off a continuous density in x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LimitConvention {
    /// Point evaluation at x = k * tick, scaled by the tick. Matches the
    /// benchmark per-limit rate arithmetic.
    #[default]
    PointAtTick,
    /// Exact integral over the tick interval [(k-1) * tick, k * tick].
    IntervalIntegral,
}

/// Arrival rate of whole unit orders at limit `k` (1/min) under the default
/// point-evaluation convention.
pub fn per_limit_rate(
    params: &IntensityParams,
    tick: f64,
    half_width: f64,
    k: usize,
    z: f64,
) -> Result<f64> {
    per_limit_rate_with(params, tick, half_width, k, z, LimitConvention::PointAtTick)
}

/// Arrival rate of unit orders at limit `k` under an explicit convention.
pub fn per_limit_rate_with(
    params: &IntensityParams,
    tick: f64,
    half_width: f64,
    k: usize,
    z: f64,
    convention: LimitConvention,
) -> Result<f64> {
    require_nonnegative_z(z)?;
    if k == 0 || (k as f64) * tick >= half_width {
        return Err(Error::OutOfDomain {
            name: format!("limit index {k}"),
            value: (k as f64) * tick,
            domain: format!("(0, {half_width})"),
        });
    }
    match convention {
        LimitConvention::PointAtTick => {
            Ok(tick * intensity_eval(params, (k as f64) * tick, z)?)
        }
        LimitConvention::IntervalIntegral => {
            // The family integrates in closed form over [x0, x1].
            let x0 = ((k - 1) as f64) * tick;
            let x1 = (k as f64) * tick;
            let seg = |scale: f64, decay: f64| -> f64 {
                if scale == 0.0 {
                    0.0
                } else {
                    scale * ((-decay * x0).exp() - (-decay * x1).exp()) / decay
                }
            };
            Ok(seg(params.lambda * z.powf(params.r), params.kappa)
                + seg(params.lambda0, params.kappa0))
        }
    }
}

/// Fully validated parameter bundle; the only way to obtain one is
/// [`validate_params`], so downstream solvers never re-check constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBundle {
    pub book: BookParams,
    pub intensity: IntensityParams,
    pub penalty: PenaltyParams,
}

impl ModelBundle {
    pub fn ask_intensity(&self) -> PowerIntensity {
        PowerIntensity {
            params: self.intensity,
        }
    }

    /// The bid side shares the symmetric family f_b(-x, z) = f_a(x, z),
    /// expressed in distance coordinates.
    pub fn bid_intensity(&self) -> PowerIntensity {
        PowerIntensity {
            params: self.intensity,
        }
    }

    pub fn penalty_model(&self) -> ExpPenalty {
        ExpPenalty {
            params: self.penalty,
        }
    }

    /// Benchmark parameter set: symmetric book, power intensity, exponential
    /// penalty. Units are dollars and minutes.
    pub fn baseline() -> Self {
        let side = SideParams {
            eta: 1e-3,
            beta: 2e-2,
            alpha: -0.2,
            sigma: 0.3,
        };
        ModelBundle {
            book: BookParams {
                ask: side,
                bid: side,
                rho: -0.05,
                half_width: 0.11,
                tick: 0.01,
            },
            intensity: IntensityParams {
                lambda: 630_000.0,
                kappa: 100.0,
                lambda0: 50_000.0,
                kappa0: 50.0,
                r: 0.5,
            },
            penalty: PenaltyParams {
                cost_scale: 4200.0,
                cost_growth: 50.0,
            },
        }
    }
}

/// Validates every structural constraint and returns the bundle unchanged.
/// The concrete intensity and penalty families additionally pass the sampled
/// shape checks (monotonicity, concavity/convexity, derivative consistency).
pub fn validate_params(
    book: BookParams,
    intensity: IntensityParams,
    penalty: PenaltyParams,
) -> Result<ModelBundle> {
    book.validate()?;
    intensity.validate()?;
    penalty.validate()?;
    let bundle = ModelBundle {
        book,
        intensity,
        penalty,
    };
    check_intensity_contract(&bundle.ask_intensity(), book.half_width)?;
    check_penalty_contract(&bundle.penalty_model(), book.half_width)?;
    Ok(bundle)
}

fn sample_xs(half_width: f64) -> [f64; 5] {
    let l = half_width;
    [0.05 * l, 0.25 * l, 0.5 * l, 0.75 * l, 0.95 * l]
}

const SAMPLE_ZS: [f64; 7] = [1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0, 10.0];

/// Sampled checks of the intensity contract: nondecreasing and midpoint-concave
/// in z, with `dz` matching a centered difference of `evaluate` to 1e-6
/// relative away from z = 0.
pub fn check_intensity_contract(model: &dyn IntensityModel, half_width: f64) -> Result<()> {
    for &x in &sample_xs(half_width) {
        for w in SAMPLE_ZS.windows(2) {
            let (z1, z2) = (w[0], w[1]);
            let f1 = model.evaluate(x, z1);
            let f2 = model.evaluate(x, z2);
            if f2 < f1 - 1e-12 * f1.abs().max(1.0) {
                return Err(Error::invalid(
                    "intensity.evaluate",
                    f2 - f1,
                    "be nondecreasing in z",
                ));
            }
            let mid = model.evaluate(x, 0.5 * (z1 + z2));
            if mid < 0.5 * (f1 + f2) - 1e-9 * (f1.abs() + f2.abs()).max(1.0) {
                return Err(Error::invalid(
                    "intensity.evaluate",
                    mid - 0.5 * (f1 + f2),
                    "be midpoint-concave in z",
                ));
            }
        }
        for &z in &SAMPLE_ZS[2..] {
            let h = 1e-4 * z;
            let fd = (model.evaluate(x, z + h) - model.evaluate(x, z - h)) / (2.0 * h);
            let an = model.dz(x, z);
            if (fd - an).abs() > 1e-6 * an.abs().max(1e-12) {
                return Err(Error::invalid(
                    "intensity.dz",
                    fd - an,
                    "match the centered difference of evaluate within 1e-6 relative",
                ));
            }
        }
    }
    Ok(())
}

/// Sampled checks of the penalty contract: vanishes at z = 0, nondecreasing in
/// both arguments, midpoint-convex in z, derivative consistent.
pub fn check_penalty_contract(model: &dyn PenaltyModel, half_width: f64) -> Result<()> {
    let xs = sample_xs(half_width);
    for &x in &xs {
        let g0 = model.evaluate(x, 0.0);
        if g0.abs() > 1e-12 {
            return Err(Error::invalid("penalty.evaluate(x, 0)", g0, "be 0"));
        }
        for w in SAMPLE_ZS.windows(2) {
            let (z1, z2) = (w[0], w[1]);
            let g1 = model.evaluate(x, z1);
            let g2 = model.evaluate(x, z2);
            if g2 < g1 - 1e-12 * g1.abs().max(1.0) {
                return Err(Error::invalid(
                    "penalty.evaluate",
                    g2 - g1,
                    "be nondecreasing in z",
                ));
            }
            let mid = model.evaluate(x, 0.5 * (z1 + z2));
            if mid > 0.5 * (g1 + g2) + 1e-9 * (g1.abs() + g2.abs()).max(1.0) {
                return Err(Error::invalid(
                    "penalty.evaluate",
                    mid - 0.5 * (g1 + g2),
                    "be midpoint-convex in z",
                ));
            }
        }
        for &z in &SAMPLE_ZS[2..] {
            let h = 1e-4 * z;
            let fd = (model.evaluate(x, z + h) - model.evaluate(x, z - h)) / (2.0 * h);
            let an = model.dz(x, z);
            if (fd - an).abs() > 1e-6 * an.abs().max(1e-12) {
                return Err(Error::invalid(
                    "penalty.dz",
                    fd - an,
                    "match the centered difference of evaluate within 1e-6 relative",
                ));
            }
        }
    }
    for w in xs.windows(2) {
        for &z in &SAMPLE_ZS {
            let g1 = model.evaluate(w[0], z);
            let g2 = model.evaluate(w[1], z);
            if g2 < g1 - 1e-12 * g1.abs().max(1.0) {
                return Err(Error::invalid(
                    "penalty.evaluate",
                    g2 - g1,
                    "be nondecreasing in x",
                ));
            }
        }
    }
    Ok(())
}
