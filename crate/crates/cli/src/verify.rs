//! The `verify` subcommand: invariant checks on one configured model.

use std::path::Path;

use num_rational::Ratio;
use padicwalk_core::fpt::{self, FptGrid};
use padicwalk_core::heatkernel::EvolvedBall;
use padicwalk_core::symbol::{self, aw_oracle, aw_sandwich, SymbolTable};
use padicwalk_core::{Error, HeatKernelModel, Landscape, Radius};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::emit::write_json;
use crate::CliError;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    max_error: f64,
    tolerance: f64,
}

struct Suite {
    checks: Vec<Check>,
    skipped: Vec<(&'static str, String)>,
}

impl Suite {
    /// Records `max |err|` against `tol`; an evaluation error fails the check.
    fn add(&mut self, name: &'static str, tol: f64, errors: Result<Vec<f64>, Error>) {
        let (passed, max_error) = match errors {
            Ok(v) => {
                let m = v.iter().fold(0.0f64, |a, &b| if b.is_nan() { f64::INFINITY } else { a.max(b.abs()) });
                (m <= tol, m)
            }
            Err(_) => (false, f64::INFINITY),
        };
        self.checks.push(Check { name, passed, max_error, tolerance: tol });
    }
}

/// `v` as `a/b` with `b <= 10^6` when that agrees to 1e-14 relative,
/// from the continued fraction convergents of `v`.
fn small_rational(v: f64) -> Option<String> {
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = v;
    for _ in 0..40 {
        let a = x.floor();
        let (h, k) = (a as i64 * h1 + h0, a as i64 * k1 + k0);
        if k > 1_000_000 {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        if (h as f64 / k as f64 - v).abs() <= 1e-14 * v.abs() {
            return Some(Ratio::new(h, k).to_string());
        }
        x = 1.0 / (x - a);
        if !x.is_finite() {
            return None;
        }
    }
    None
}

fn symbol_checks(suite: &mut Suite, l: &Landscape, tol: f64) -> Result<(), CliError> {
    let table = SymbolTable::new(l, -10, 10)?;
    let oracle: Result<Vec<f64>, Error> = (-10..=10)
        .map(|g| {
            let o = aw_oracle(l, g, 400)?;
            Ok((table.aw(g)? - o) / o.abs().max(1.0))
        })
        .collect();
    suite.add("symbol_matches_shell_oracle", tol, oracle);

    let sandwich: Result<Vec<f64>, Error> = (-10..=10)
        .filter(|&g| aw_sandwich(l, g).lower_certified)
        .map(|g| {
            let a = table.ln_aw(g)?;
            let s = aw_sandwich(l, g);
            Ok((s.ln_lower - a).max(0.0) + (a - s.ln_upper).max(0.0))
        })
        .collect();
    suite.add("symbol_within_growth_bounds", 1e-12, sandwich);

    let routes: Result<Vec<f64>, Error> = [-1, 0, 2]
        .iter()
        .flat_map(|&r| [Radius::Origin, Radius::Level(-2), Radius::Level(0), Radius::Level(1), Radius::Level(4)].map(|x| (r, x)))
        .map(|(r, x)| {
            let d = symbol::apply_w(&table, 1.0, r, x, symbol::Route::Direct)?;
            let s = symbol::apply_w(&table, 1.0, r, x, symbol::Route::Spectral)?;
            Ok((d - s) / d.abs().max(1.0))
        })
        .collect();
    suite.add("operator_routes_agree", tol, routes);
    Ok(())
}

fn kernel_checks(suite: &mut Suite, m: &HeatKernelModel, times: &[f64], tol: f64) {
    let mut nonneg = Vec::new();
    let forms: Result<Vec<f64>, Error> = times
        .iter()
        .flat_map(|&t| (-3..=8).map(move |b| (b, t)))
        .map(|(b, t)| {
            let z = m.z_density(Radius::Level(b), t)?;
            nonneg.push((-z).max(0.0));
            // the alternating form cancels down from a size of order p^{-bn}
            let scale = m.space().ball_volume(-b);
            Ok((z - m.z_density_alternating(b, t)?) / scale)
        })
        .collect();
    suite.add("kernel_series_forms_agree", tol, forms);
    suite.add("kernel_nonnegative", 0.0, Ok(nonneg));

    let mass: Result<Vec<f64>, Error> = times
        .iter()
        .map(|&t| {
            let r = m.mass(t)?;
            Ok(((r.sum - 1.0).abs() - r.lower_tail - r.upper_tail).max(0.0))
        })
        .collect();
    suite.add("kernel_total_mass", 1e-8, mass);

    let cdf: Result<Vec<f64>, Error> = times
        .iter()
        .flat_map(|&t| (-3..=5).map(move |k| (k, t)))
        .map(|(k, t)| Ok(m.radius_cdf(k, t)? - m.radius_cdf_shells(k, t)?))
        .collect();
    suite.add("radius_cdf_forms_agree", tol, cdf);

    let semigroup: Result<Vec<f64>, Error> = [(0.1, 1.0), (1.0, 0.1)]
        .iter()
        .flat_map(|&(a, b)| [Radius::Origin, Radius::Level(0), Radius::Level(2), Radius::Level(5)].map(|x| (a, b, x)))
        .map(|(a, b, x)| {
            let ball = EvolvedBall { model: m, ball: 0, t: a };
            Ok(m.evolve_radial(&ball, x, b)? - m.evolve_ball(0, x, a + b)?)
        })
        .collect();
    suite.add("semigroup", tol, semigroup);

    let master: Result<Vec<f64>, Error> = times
        .iter()
        .flat_map(|&t| [Radius::Origin, Radius::Level(1), Radius::Level(3)].map(|r| (r, t)))
        .map(|(r, t)| m.master_residual(r, t))
        .collect();
    suite.add("master_equation", 1e-8, master);
}

pub(crate) fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let l = cfg.landscape()?;
    let tol = cfg.tolerances.verify;
    let mut suite = Suite { checks: Vec::new(), skipped: Vec::new() };
    symbol_checks(&mut suite, &l, tol)?;
    let aw1 = SymbolTable::with_tolerance(&l, 0, 0, 1e-17)?.aw(0)?;

    let mut classification = None;
    let mut kappa = None;
    match cfg.model() {
        Ok(m) => {
            kappa = Some(m.kappa());
            kernel_checks(&mut suite, &m, &cfg.kernel.times, tol);
            match m.require_admissible() {
                Ok(()) => {
                    let balance = FptGrid::sample(&m, 0.1, 20)
                        .map(|g| vec![g.diagnostics.balance_residual.unwrap_or(f64::INFINITY)]);
                    suite.add("survival_balance", 1e-6, balance);
                    classification = Some(fpt::classify_recurrence(&m)?);
                }
                Err(e) => suite.skipped.push(("survival_balance", e.to_string())),
            }
        }
        Err(e) => suite.skipped.push(("heat kernel checks", e.to_string())),
    }

    let passed = suite.checks.iter().all(|c| c.passed);
    let report = json!({
        "landscape": l.to_spec(),
        "kappa": kappa,
        "A_w(1)": {"value": aw1, "rational": small_rational(aw1)},
        "checks": suite.checks,
        "skipped": suite.skipped.iter().map(|(n, why)| json!({"name": n, "reason": why})).collect::<Vec<_>>(),
        "classification": classification,
        "passed": passed,
    });
    write_json(&out.join("verify.json"), &report)?;
    let failed: Vec<&str> = suite.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(format!("verify: {} checks passed", suite.checks.len()))
    } else {
        Err(CliError::Tolerance(format!("verify: failed {}", failed.join(", "))))
    }
}
