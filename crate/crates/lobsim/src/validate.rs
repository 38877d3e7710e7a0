//! Oracle and property suite over a validated parameter bundle, runnable
//! from the command line against any configuration. Each check produces one
//! pass/fail line; hard failures drive a nonzero exit status.

use std::fmt::Write as _;

use crate::error::Result;
use crate::incentive::{foc_solve, hamiltonian, incentive_from_value, IncentiveSchedule};
use crate::model::{ModelBundle, SideParams};
use crate::report::fmt_sig;
use crate::scenarios::defaults;
use crate::simulator::{ensemble_average, simulate_book, BookState, SimGrid};
use crate::value::{
    exit_bias_allowance, feynman_kac_estimate, solve_value_pde, stationary_coefficients,
    value_upper_bound, ConvectionScheme,
};

/// One validation check outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(results: &mut Vec<CheckResult>, name: &str, passed: bool, detail: String) {
    results.push(CheckResult {
        name: name.to_string(),
        passed,
        detail,
    });
}

/// Runs the full oracle and property suite on a bundle. Deterministic given
/// the seed.
pub fn validate_bundle(bundle: &ModelBundle, master_seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let book = bundle.book;
    let side = book.ask;
    let l = book.half_width;
    // a tenth of a tick keeps every tick interval on ten cells regardless of
    // the configured geometry
    let (dx, dt_value) = (book.tick / 10.0, defaults::DT_VALUE);

    // 1. stationary closed form: root identities and boundary values
    let sv = stationary_coefficients(&side, l)?;
    let vieta_prod = (sv.nu_plus * sv.nu_minus - side.alpha / side.eta).abs()
        / (side.alpha / side.eta).abs();
    let vieta_sum = (sv.nu_plus + sv.nu_minus - side.beta / side.eta).abs()
        / (side.beta / side.eta).abs().max(1.0);
    check(
        &mut out,
        "stationary root identities",
        vieta_prod < 1e-12 && vieta_sum < 1e-12 && sv.nu_plus > 0.0 && sv.nu_minus < 0.0,
        format!("product dev {vieta_prod:.2e}, sum dev {vieta_sum:.2e}"),
    );
    let b0 = sv.eval(0.0)?.abs();
    let bl = sv.eval(l)?.abs();
    check(
        &mut out,
        "stationary boundary values",
        b0 < 1e-10 && bl < 1e-10,
        format!("|pbar(0)| = {b0:.2e}, |pbar(L)| = {bl:.2e}"),
    );

    // 2. solver vs closed form at the default grids
    let field = solve_value_pde(
        &side,
        l,
        defaults::HORIZON,
        dx,
        dt_value,
        0.5,
        ConvectionScheme::Centered,
    )?;
    let sup = field.sup_delta_at(0, |x| sv.eval_unchecked(x));
    let tol = defaults::PDE_TOL_FRACTION / side.alpha.abs();
    check(
        &mut out,
        "solver vs closed form",
        sup <= tol,
        format!("sup delta {} (tolerance {})", fmt_sig(sup), fmt_sig(tol)),
    );

    // 3. value bounds at every node
    let mut bounds_ok = true;
    let mut worst = 0.0f64;
    for i in 0..field.n_t() {
        // per-slice bound plus the scheme's per-step trapezoid error
        let bound =
            value_upper_bound(side.alpha, defaults::HORIZON - field.ts[i]) * (1.0 + 1e-6) + 1e-12;
        for j in 0..field.n_x() {
            let p = field.at(i, j);
            if p < -1e-12 || p > bound {
                bounds_ok = false;
            }
            worst = worst.max(p);
        }
    }
    check(
        &mut out,
        "value bounds 0 <= p <= 1/|alpha|",
        bounds_ok,
        format!("max p {} vs bound {}", fmt_sig(worst), fmt_sig(1.0 / side.alpha.abs())),
    );

    // 4. horizon monotonicity (dissipative variant: one-signed spatial bias)
    let mut errs = Vec::new();
    for &horizon in &[5.0, 10.0, 20.0, 30.0] {
        let f = solve_value_pde(&side, l, horizon, dx, dt_value, 0.5, ConvectionScheme::Upwind)?;
        errs.push(f.sup_delta_at(0, |x| sv.eval_unchecked(x)));
    }
    let monotone = errs.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    check(
        &mut out,
        "horizon-convergence monotonicity",
        monotone,
        format!(
            "sup errors over T = 5,10,20,30: {}",
            errs.iter().map(|e| fmt_sig(*e)).collect::<Vec<_>>().join(", ")
        ),
    );

    // 5. degenerate exit-time oracle: alpha = beta = 0
    let degenerate = SideParams {
        eta: side.eta,
        beta: 0.0,
        alpha: 0.0,
        sigma: side.sigma,
    };
    let f = solve_value_pde(
        &degenerate,
        l,
        defaults::HORIZON,
        dx,
        dt_value,
        0.5,
        ConvectionScheme::Centered,
    )?;
    let scale = l * l / (8.0 * side.eta);
    let sup = f.sup_delta_at(0, |x| x * (l - x) / (2.0 * side.eta));
    check(
        &mut out,
        "mean exit time x(L-x)/(2 eta)",
        sup / scale < 0.01,
        format!("relative sup {:.3e}", sup / scale),
    );

    // 6. Monte Carlo vs closed form at three probes
    let allowance = exit_bias_allowance(&sv, side.eta, defaults::DT_MC);
    let mut mc_ok = true;
    let mut mc_detail = String::new();
    for &frac in &defaults::MC_PROBES {
        let x = frac / 0.11 * l;
        let est = feynman_kac_estimate(
            &side,
            l,
            0.0,
            x,
            defaults::HORIZON,
            defaults::MC_PATHS,
            defaults::DT_MC,
            master_seed,
        )?;
        let closed = sv.eval(x)?;
        let gap = (est.mean - closed).abs();
        let within = gap <= 3.0 * est.std_error + allowance;
        mc_ok &= within;
        let _ = write!(
            mc_detail,
            "x={x:.3}: gap {} vs 3se+allow {}; ",
            fmt_sig(gap),
            fmt_sig(3.0 * est.std_error + allowance)
        );
    }
    check(&mut out, "exit-time Monte Carlo vs closed form", mc_ok, mc_detail);

    // 7. first-order condition vs closed form, and against a brute-force grid
    let fi = bundle.ask_intensity();
    let pe = bundle.penalty_model();
    let mut foc_ok = true;
    let mut brute_ok = true;
    for i in 0..50 {
        let x = l * (i as f64 + 0.5) / 50.0;
        let p = sv.eval(x)?.max(0.0);
        let root = foc_solve(x, p, &fi, &pe)?;
        let closed = incentive_from_value(x, p, &bundle.intensity, &bundle.penalty);
        if closed > 0.0 && ((root - closed) / closed).abs() > 1e-10 {
            foc_ok = false;
        }
        if i % 10 == 0 && root > 0.0 {
            let h_star = hamiltonian(x, 1.0, root, p, 0.0, &side, &fi, &pe);
            for k in 0..10_000 {
                let z = 100.0 * root * k as f64 / 9999.0;
                let h = hamiltonian(x, 1.0, z, p, 0.0, &side, &fi, &pe);
                if h > h_star + 1e-9 * h_star.abs().max(1.0) {
                    brute_ok = false;
                }
            }
        }
    }
    check(
        &mut out,
        "first-order condition vs closed form (1e-10)",
        foc_ok,
        String::new(),
    );
    check(
        &mut out,
        "first-order condition vs brute-force grid",
        brute_ok,
        String::new(),
    );

    // 8. degenerate book run decays exactly exponentially
    let mut degenerate_book = book;
    for s in [&mut degenerate_book.ask, &mut degenerate_book.bid] {
        s.eta = 0.0;
        s.beta = 0.0;
        s.sigma = 0.0;
    }
    let zero_fi = crate::model::PowerIntensity {
        params: crate::model::IntensityParams {
            lambda: 0.0,
            kappa: 1.0,
            lambda0: 0.0,
            kappa0: 1.0,
            r: 0.5,
        },
    };
    let mut u0 = BookState::empty(l, dx)?;
    let n = u0.ask.len();
    for j in 1..n - 1 {
        u0.ask[j] = 1.0;
        u0.bid[j] = -1.0;
    }
    let sim_grid = SimGrid {
        dx,
        dt: defaults::DT_SIM,
    };
    let run = simulate_book(
        &degenerate_book,
        (&zero_fi, &zero_fi),
        None,
        &u0,
        defaults::HORIZON,
        sim_grid,
        master_seed,
    )?;
    let expect = (book.ask.alpha * defaults::HORIZON).exp();
    let rel = run.state.ask[1..n - 1]
        .iter()
        .map(|&v| ((v - expect) / expect).abs())
        .fold(0.0, f64::max);
    check(
        &mut out,
        "degenerate run matches exp(alpha T)",
        rel < 1e-6,
        format!("max relative deviation {rel:.2e}"),
    );

    // 9. truncation fraction at a small ensemble
    let fi_model = bundle.ask_intensity();
    let sched = IncentiveSchedule::stationary(sv, bundle.intensity, bundle.penalty);
    let stats = ensemble_average(
        &book,
        (&fi_model, &fi_model),
        Some((&sched, &sched)),
        &BookState::empty(l, dx)?,
        2.0,
        sim_grid,
        20,
        master_seed,
    )?;
    check(
        &mut out,
        "truncation fraction below 5%",
        stats.truncation_fraction() < 0.05,
        format!("fraction {}", fmt_sig(stats.truncation_fraction())),
    );

    // 10. determinism of the ensemble under the same seed
    let again = ensemble_average(
        &book,
        (&fi_model, &fi_model),
        Some((&sched, &sched)),
        &BookState::empty(l, dx)?,
        2.0,
        sim_grid,
        20,
        master_seed,
    )?;
    let identical = stats
        .mean_ask
        .iter()
        .zip(again.mean_ask.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && stats
            .std_bid
            .iter()
            .zip(again.std_bid.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    check(
        &mut out,
        "ensemble determinism (bit-identical rerun)",
        identical,
        String::new(),
    );

    Ok(out)
}

/// Renders check results, one line per check.
pub fn render_checks(checks: &[CheckResult]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(
            s,
            "{} {}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            if c.detail.is_empty() {
                String::new()
            } else {
                format!(" — {}", c.detail)
            }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_bundle_passes_every_check() {
        let checks = validate_bundle(&ModelBundle::baseline(), 99).unwrap();
        assert!(checks.len() >= 10);
        for c in &checks {
            assert!(c.passed, "check failed: {} — {}", c.name, c.detail);
        }
    }
}
