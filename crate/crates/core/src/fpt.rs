//! First passage back into Z_p^n after an excursion.
//!
//! `g(t)` is the density of re-entry into Z_p^n at time `t` for the process
//! started uniformly on Z_p^n:
//!
//! ```text
//! g(t) = kappa sum_{i >= 1} vol_i phi(p^i, t) / w(p^i)
//!      = kappa sum_{g >= 1} T_g(t) P_g,   P_g = sum_{i=1}^{g} vol_i / w(p^i)
//! ```
//!
//! where `T_g` are the shell terms of the heat kernel. Because re-entry is
//! uniform on Z_p^n the first passage density `f` solves the renewal
//! equation `f(t) = g(t) - int_0^t g(t - s) f(s) ds`, and with `G = L[g]`
//! the return probability is `G(0) / (1 + G(0))`.
//!
//! The Laplace transform is taken term by term:
//!
//! ```text
//! G(s) = kappa^2 (1 - p^{-n}) sum_{j >= 1} (1/w_j - 1/w_{j+1}) P'_j / ((s + kappa a_j)(s + kappa a_{j-1}))
//! ```
//!
//! with `P'_j = sum_{i=1}^{j} p^{in} / w_i`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatkernel::HeatKernelModel;
use crate::landscape::{LandscapeType, Scope};
use crate::padic::Radius;
use crate::series::{self, EPS_TAIL, MAX_TERMS};

/// Clamped negative mass above which the Volterra solve is rejected.
pub const CLAMP_LIMIT: f64 = 1e-3;

const G_ZERO_MAX_TERMS: i32 = 4000;

fn ln_w(model: &HeatKernelModel, j: i32) -> f64 {
    model.landscape().ln_w(j)
}

/// `1/w_j - 1/w_{j+1}`.
fn weight_step(model: &HeatKernelModel, j: i32) -> f64 {
    let (a, b) = (ln_w(model, j), ln_w(model, j + 1));
    (-a).exp() * -(a - b).exp_m1()
}

/// `P'_inf = sum_{i >= 1} p^{in} / w_i`.
fn p_prime_total(model: &HeatKernelModel) -> Result<f64> {
    Ok(model.landscape().exit_integral()?.value / model.space().unit_sphere())
}

/// `g(t)`; zero at `t = 0`.
pub fn g_density(model: &HeatKernelModel, t: f64) -> Result<f64> {
    model.require_admissible()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    let s = model.space();
    let k = model.kappa();
    let p_total = s.unit_sphere() * p_prime_total(model)?;
    let mut p_g = 0.0;
    let sum = series::sum_certified(
        "re-entry density",
        1,
        1,
        model.tolerance(),
        1e-300,
        |g| {
            p_g += (s.ln_shell_volume(g) - ln_w(model, g)).exp();
            model.shell_term(g, t) * p_g
        },
        |g| p_total * model.shell_tail_bound(g + 1, t),
    )?;
    Ok(k * sum.value)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FptDiagnostics {
    /// Negative mass removed by clamping `f` at zero.
    pub clamped_mass: f64,
    /// `max |S' - (g - C S)|` over the checked grid points.
    pub balance_residual: Option<f64>,
}

/// Uniform grid `t_k = k h` carrying `g`, `S` and, once solved, `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FptGrid {
    pub h: f64,
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub survival: Vec<f64>,
    pub f: Vec<f64>,
    /// Trapezoidal `int_0^t f`.
    pub cumulative: Vec<f64>,
    pub diagnostics: FptDiagnostics,
}

impl FptGrid {
    /// Samples `g` and `S` at `k h`, `k = 0..=steps`, in parallel.
    pub fn sample(model: &HeatKernelModel, h: f64, steps: usize) -> Result<Self> {
        model.require_admissible()?;
        check_grid(h, steps)?;
        let t: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let g = t.par_iter().map(|&t| g_density(model, t)).collect::<Result<Vec<_>>>()?;
        let survival = t.par_iter().map(|&t| model.survival_s(t)).collect::<Result<Vec<_>>>()?;

        let c = model.exit_rate()?;
        let checks = 16.min(steps);
        let mut residual = 0.0f64;
        for i in 1..=checks {
            let k = i * steps / checks;
            let ds = model.time_derivative(1, Radius::Origin, t[k])?;
            residual = residual.max((ds - (g[k] - c * survival[k])).abs());
        }
        Ok(FptGrid {
            h,
            t,
            g,
            survival,
            f: Vec::new(),
            cumulative: Vec::new(),
            diagnostics: FptDiagnostics { clamped_mass: 0.0, balance_residual: Some(residual) },
        })
    }

    /// A grid with prescribed `g` samples and no model behind it.
    pub fn from_g(h: f64, g: Vec<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::InvalidParameter("g needs at least one sample".into()));
        }
        check_grid(h, g.len() - 1)?;
        Ok(FptGrid {
            h,
            t: (0..g.len()).map(|k| k as f64 * h).collect(),
            survival: Vec::new(),
            g,
            f: Vec::new(),
            cumulative: Vec::new(),
            diagnostics: FptDiagnostics::default(),
        })
    }

    pub fn is_solved(&self) -> bool {
        self.f.len() == self.g.len()
    }

    /// `int_0^T f` at the last grid time.
    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

fn check_grid(h: f64, steps: usize) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {h}")));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("grid needs at least one step".into()));
    }
    Ok(())
}

/// Solves `f(t) = g(t) - int_0^t g(t - s) f(s) ds` by the product
/// trapezoidal rule. Negative values are clamped to zero and their mass
/// reported; more than [`CLAMP_LIMIT`] of it is an error.
pub fn volterra_solve(mut grid: FptGrid) -> Result<FptGrid> {
    let g = &grid.g;
    let h = grid.h;
    let n = g.len();
    let mut f = vec![0.0; n];
    // g reversed, so the history sum is a dot product
    let rev: Vec<f64> = g.iter().rev().copied().collect();
    let denom = 1.0 + 0.5 * h * g[0];
    let mut clamped = 0.0;
    f[0] = g[0];
    for k in 1..n {
        let hist: f64 = if k > 1 {
            rev[n - k..n - 1].iter().zip(&f[1..k]).map(|(a, b)| a * b).sum()
        } else {
            0.0
        };
        let mut v = (g[k] - h * (0.5 * g[k] * f[0] + hist)) / denom;
        if v < 0.0 {
            clamped += -v * h;
            v = 0.0;
        }
        f[k] = v;
    }
    if clamped > CLAMP_LIMIT {
        return Err(Error::Degenerate(format!(
            "Volterra solve clamped {clamped:e} of negative mass; refine the grid"
        )));
    }
    let mut cumulative = vec![0.0; n];
    for k in 1..n {
        cumulative[k] = cumulative[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
    }
    grid.f = f;
    grid.cumulative = cumulative;
    grid.diagnostics.clamped_mass = clamped;
    Ok(grid)
}

/// Bound on `sum_{j > J} (1/w_j - 1/w_{j+1}) P'_j / (a_j a_{j-1})` for a
/// polynomial landscape with `alpha2 < 2n`, from `a_j >= p^{n(j+1)} / w_{j+1}`.
fn zero_tail(model: &HeatKernelModel, p_total: f64) -> Option<Box<dyn Fn(i32) -> f64 + '_>> {
    let l = model.landscape();
    let c = l.certificate();
    let s = model.space();
    let n = s.n as f64;
    if c.alpha3 != 0.0 || c.scope != Scope::Global || c.alpha2 >= 2.0 * n {
        return None;
    }
    let ln_r = (c.alpha2 - 2.0 * n) * s.ln_p();
    let ln_k = (s.unit_sphere() * p_total * c.c1).ln() + (c.alpha2 - n) * s.ln_p() - (-ln_r.exp_m1()).ln();
    Some(Box::new(move |j| (ln_k + (j + 1) as f64 * ln_r).exp()))
}

fn laplace_sum(model: &HeatKernelModel, s: Complex64) -> Result<Complex64> {
    if !(s.re > 0.0) || !s.im.is_finite() {
        return Err(Error::InvalidParameter(format!("Laplace argument needs Re s > 0, got {s}")));
    }
    let k = model.kappa();
    let space = model.space();
    let u = space.unit_sphere();
    let p_total = p_prime_total(model)?;
    let zero = zero_tail(model, p_total);
    let np = space.n as f64 * space.ln_p();
    let a = |j: i32| model.table().aw(j);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut p_j = 0.0;
    let mut a_prev = a(0)?;
    for j in 1..MAX_TERMS as i32 {
        p_j += (j as f64 * np - ln_w(model, j)).exp();
        let a_j = a(j)?;
        sum += weight_step(model, j) * p_j / ((s + k * a_j) * (s + k * a_prev));
        a_prev = a_j;
        let mut tail = p_total / (s.re * s.re * ln_w(model, j + 1).exp());
        if let Some(z) = &zero {
            tail = tail.min(z(j) / (k * k));
        }
        if tail <= EPS_TAIL * sum.norm() {
            return Ok(k * k * u * sum);
        }
    }
    Err(Error::TailCertification { context: "Laplace transform of g", terms: MAX_TERMS, tolerance: EPS_TAIL })
}

/// `G(s)` for real `s > 0`.
pub fn laplace_g(model: &HeatKernelModel, s: f64) -> Result<f64> {
    Ok(laplace_sum(model, Complex64::new(s, 0.0))?.re)
}

/// `G(s)` for `Re s > 0`.
pub fn laplace_g_complex(model: &HeatKernelModel, s: Complex64) -> Result<Complex64> {
    laplace_sum(model, s)
}

/// `G(0)`: certified, or the partial sums when the tail cannot be bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GZero {
    Finite { value: f64, tail: f64, terms: usize },
    /// Partial sums `(J, sum_{j <= J})` at doubling `J`.
    Divergent { partial_sums: Vec<(i32, f64)> },
}

impl GZero {
    pub fn value(&self) -> Option<f64> {
        match self {
            GZero::Finite { value, .. } => Some(*value),
            GZero::Divergent { .. } => None,
        }
    }
}

/// `G(0)`; it does not depend on `kappa`.
pub fn laplace_g_zero(model: &HeatKernelModel) -> Result<GZero> {
    let space = model.space();
    let u = space.unit_sphere();
    let p_total = p_prime_total(model)?;
    let np = space.n as f64 * space.ln_p();
    let term = {
        let mut p_j = 0.0;
        let mut a_prev = model.table().aw(0)?;
        move |j: i32| -> Result<f64> {
            p_j += (j as f64 * np - ln_w(model, j)).exp();
            let a_j = model.table().aw(j)?;
            let v = u * weight_step(model, j) * p_j / (a_j * a_prev);
            a_prev = a_j;
            Ok(v)
        }
    };
    let mut term = term;
    match zero_tail(model, p_total) {
        Some(tail) => {
            let mut sum = 0.0;
            for j in 1..=G_ZERO_MAX_TERMS {
                sum += term(j)?;
                let bound = u * tail(j);
                if bound <= EPS_TAIL * sum {
                    return Ok(GZero::Finite { value: sum, tail: bound, terms: j as usize });
                }
            }
            Err(Error::TailCertification { context: "G(0)", terms: G_ZERO_MAX_TERMS as usize, tolerance: EPS_TAIL })
        }
        None => {
            let mut sum = 0.0;
            let mut partial = Vec::new();
            let mut next = 1;
            for j in 1..=256 {
                let v = term(j)?;
                if !v.is_finite() {
                    break;
                }
                sum += v;
                if j == next {
                    partial.push((j, sum));
                    next *= 2;
                }
            }
            Ok(GZero::Divergent { partial_sums: partial })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecurrenceTag {
    Recurrent,
    Transient,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    #[serde(rename = "type")]
    pub landscape_type: LandscapeType,
    /// Growth exponent of `w`.
    pub alpha: f64,
    pub n: u32,
    pub tag: RecurrenceTag,
    pub return_probability: Option<f64>,
    pub diagnostics: GZero,
}

/// Recurrent for polynomial `w ~ r^alpha` with `alpha >= 2n`, transient for
/// `n < alpha < 2n`, undetermined otherwise. `G(0)` is attached but never
/// decides the tag.
pub fn classify_recurrence(model: &HeatKernelModel) -> Result<Classification> {
    let l = model.landscape();
    let c = l.certificate();
    let n = model.space().n;
    let ty = l.classify_type();
    let g0 = laplace_g_zero(model)?;
    let polynomial = ty == LandscapeType::Polynomial && c.alpha1 == c.alpha2;
    let tag = if !polynomial {
        RecurrenceTag::Undetermined
    } else if c.alpha1 >= 2.0 * n as f64 {
        RecurrenceTag::Recurrent
    } else {
        RecurrenceTag::Transient
    };
    let return_probability = match tag {
        RecurrenceTag::Recurrent => Some(1.0),
        _ => g0.value().map(|g| g / (1.0 + g)),
    };
    Ok(Classification { landscape_type: ty, alpha: c.alpha1, n, tag, return_probability, diagnostics: g0 })
}
