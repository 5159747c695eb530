//! The heat kernel `Z(x, t)`, the inverse Fourier transform of
//! `exp(-kappa t A_w(|xi|))`, and the quantities derived from it.
//!
//! With `E(g) = exp(-kappa t a(g))` and `D(g) = a(g-1) - a(g) >= 0` the
//! kernel on the sphere of level `b` is the positive series
//!
//! ```text
//! Z(p^b, t) = sum_{g >= b} p^{-ng} E(g) (1 - exp(-kappa t D(g)))
//! ```
//!
//! which is used for every evaluation; the alternating form
//! `p^{-bn} [(1 - p^{-n}) sum_{j >= 0} E(b+j) p^{-nj} - E(b-1)]` is kept as
//! a cross-check. Each term is bounded by `kappa t p^{-ng} D(g)`, which
//! telescopes to `kappa t / w(p^b)`; that bound certifies every upward tail.
//!
//! `phi(x, t)` is the kernel convolved with the indicator of Z_p^n, and
//! `S(t)` its integral over Z_p^n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{Landscape, Scope};
use crate::padic::{Radius, Space};
use crate::radial::{RadialFunction, RadialStepFunction};
use crate::series::{self, Certified, EPS_TAIL};
use crate::symbol::{self, SymbolTable};

const TABLE_LO: i32 = -200;
const TABLE_HI: i32 = 200;
const ABS_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct HeatKernelModel {
    landscape: Landscape,
    kappa: f64,
    table: SymbolTable,
    eps: f64,
    /// ln of the constant in `a(g) >= L p^{-g(a2-n)}` for `g <= -1`.
    ln_lower: f64,
}

impl HeatKernelModel {
    pub fn new(landscape: &Landscape, kappa: f64) -> Result<Self> {
        Self::with_tolerance(landscape, kappa, EPS_TAIL)
    }

    /// The model with `kappa` at its admissible maximum.
    pub fn with_auto_kappa(landscape: &Landscape) -> Result<Self> {
        Self::new(landscape, landscape.kappa_admissible_max()?)
    }

    pub fn with_tolerance(landscape: &Landscape, kappa: f64, eps: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if landscape.certificate().scope != Scope::Global {
            return Err(Error::InvalidParameter(
                "the heat kernel needs a growth certificate valid at all radii".into(),
            ));
        }
        let table = SymbolTable::with_tolerance(landscape, TABLE_LO, TABLE_HI, eps)?;
        let (c2, _) = symbol::sandwich_constants(landscape);
        let ln_lower = c2.ln() - landscape.certificate().alpha3;
        Ok(HeatKernelModel { landscape: landscape.clone(), kappa, table, eps, ln_lower })
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn space(&self) -> Space {
        self.landscape.space()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn table(&self) -> &SymbolTable {
        &self.table
    }

    pub fn tolerance(&self) -> f64 {
        self.eps
    }

    /// `C = kappa int_{|y| > 1} dy / w`, the rate of leaving Z_p^n.
    pub fn exit_rate(&self) -> Result<f64> {
        Ok(self.kappa * self.landscape.exit_integral()?.value)
    }

    /// Fails unless `kappa int_{|y| > 1} dy / w <= 1`.
    pub fn require_admissible(&self) -> Result<()> {
        let max = self.landscape.kappa_admissible_max()?;
        if self.kappa > max * (1.0 + 1e-12) {
            return Err(Error::KappaInadmissible { kappa: self.kappa, max });
        }
        Ok(())
    }

    fn a(&self, g: i32) -> f64 {
        self.table.ln_aw(g).map_or(f64::NAN, f64::exp)
    }

    /// `ln(p^{-ng} E(g) (1 - exp(-kappa t D(g))))`.
    fn ln_shell_term(&self, g: i32, t: f64) -> f64 {
        let s = self.space();
        let d = symbol::ln_gap(&self.landscape, g).exp();
        -(g as f64) * s.n as f64 * s.ln_p() - self.kappa * t * self.a(g)
            + series::ln_one_minus_exp_neg(self.kappa * t * d)
    }

    /// The contribution of the frequency sphere of level `g` to `Z(., t)`;
    /// `Z(p^b, t)` is the sum of these over `g >= b`.
    pub fn shell_term(&self, g: i32, t: f64) -> f64 {
        self.ln_shell_term(g, t).exp()
    }

    /// `kappa t / w(p^g)`: bounds `sum_{g' >= g} shell_term(g', t)`.
    pub fn shell_tail_bound(&self, g: i32, t: f64) -> f64 {
        self.kappa * t * (-self.landscape.ln_w(g)).exp()
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
        }
        Ok(())
    }

    fn z_level(&self, b: i32, t: f64) -> Result<Certified> {
        series::sum_certified(
            "heat kernel",
            b,
            1,
            self.eps,
            ABS_FLOOR,
            |g| self.shell_term(g, t),
            |g| self.shell_tail_bound(g + 1, t),
        )
    }

    /// Bound on `sum_{g' < g} p^{-ng'} E(g')` from the lower symbol bound,
    /// or `inf` while that bound is not yet decaying geometrically.
    fn downward_tail(&self, g: i32, t: f64) -> f64 {
        let s = self.space();
        let c = self.landscape.certificate();
        let np = s.n as f64 * s.ln_p();
        let growth = (c.alpha2 - s.n as f64) * s.ln_p();
        let ln_b = |h: i32| -(h as f64) * np - self.kappa * t * (self.ln_lower - h as f64 * growth).exp();
        let g = g.min(0);
        if ln_b(g - 2) - ln_b(g - 1) <= -std::f64::consts::LN_2 {
            2.0 * ln_b(g - 1).exp()
        } else {
            f64::INFINITY
        }
    }

    /// `Z(x, t)` for `|x|_p` given by `r`.
    pub fn z_density(&self, r: Radius, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        match r {
            Radius::Level(b) => Ok(self.z_level(b, t)?.value),
            Radius::Origin => {
                let up = self.z_level(0, t)?.value;
                let down = series::sum_certified(
                    "heat kernel at the origin",
                    -1,
                    -1,
                    self.eps,
                    self.eps * up,
                    |g| self.shell_term(g, t),
                    |g| self.downward_tail(g, t),
                )?;
                Ok(up + down.value)
            }
        }
    }

    /// The alternating representation of `Z(p^b, t)`, for cross-checks.
    pub fn z_density_alternating(&self, b: i32, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let s = self.space();
        let np = s.n as f64 * s.ln_p();
        let e = |g: i32| (-self.kappa * t * self.a(g)).exp();
        let sum = series::sum_certified(
            "heat kernel (alternating)",
            0,
            1,
            1e-15,
            0.0,
            |j| e(b + j) * (-(j as f64) * np).exp(),
            |j| (-((j + 1) as f64) * np).exp() / s.unit_sphere(),
        )?;
        Ok((-(b as f64) * np).exp() * (s.unit_sphere() * sum.value - e(b - 1)))
    }

    /// `Z(p^b, t)` for all `b` in `lo..=hi` at once.
    pub fn z_profile(&self, lo: i32, hi: i32, t: f64) -> Result<Vec<f64>> {
        Self::check_t(t)?;
        let top = self.z_level(hi, t)?;
        let mut out = vec![0.0; (hi - lo + 1) as usize];
        let mut acc = top.value;
        out[(hi - lo) as usize] = acc;
        for b in (lo..hi).rev() {
            acc += self.shell_term(b, t);
            out[(b - lo) as usize] = acc;
        }
        Ok(out)
    }

    /// `P(|X_t| <= p^m)` by the frequency-side series
    /// `(1 - p^{-n}) sum_{k >= 0} E(m+k) p^{-kn}`.
    pub fn radius_cdf(&self, m: i32, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(1.0);
        }
        Self::check_t(t)?;
        let s = self.space();
        let np = s.n as f64 * s.ln_p();
        let sum = series::sum_certified(
            "radius cdf",
            0,
            1,
            self.eps,
            ABS_FLOOR,
            |k| (-self.kappa * t * self.a(m + k) - k as f64 * np).exp(),
            |k| (-((k + 1) as f64) * np).exp() / s.unit_sphere(),
        )?;
        Ok((s.unit_sphere() * sum.value).min(1.0))
    }

    /// `P(|X_t| > p^m)`, summed without cancellation.
    pub fn radius_cdf_complement(&self, m: i32, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        Self::check_t(t)?;
        let s = self.space();
        let np = s.n as f64 * s.ln_p();
        let sum = series::sum_certified(
            "radius cdf complement",
            0,
            1,
            self.eps,
            ABS_FLOOR,
            |k| series::one_minus_exp_neg(self.kappa * t * self.a(m + k)) * (-(k as f64) * np).exp(),
            |k| self.kappa * t * self.a(m + k + 1) * (-((k + 1) as f64) * np).exp() / s.unit_sphere(),
        )?;
        Ok((s.unit_sphere() * sum.value).min(1.0))
    }

    /// `P(|X_t| <= p^m)` as `sum_{i <= m} vol_i Z(p^i, t)`.
    pub fn radius_cdf_shells(&self, m: i32, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let s = self.space();
        let z0 = self.z_density(Radius::Origin, t)?;
        let mut z = self.z_level(m, t)?.value;
        let sum = series::sum_certified(
            "radius cdf (shells)",
            m,
            -1,
            self.eps,
            ABS_FLOOR,
            |i| {
                if i < m {
                    z += self.shell_term(i, t);
                }
                s.shell_volume(i) * z
            },
            |i| s.ball_volume(i - 1) * z0,
        )?;
        Ok(sum.value)
    }

    /// Both CDF forms, failing if they disagree by more than `1e-9`.
    pub fn radius_cdf_checked(&self, m: i32, t: f64) -> Result<f64> {
        let dual = self.radius_cdf(m, t)?;
        let shells = self.radius_cdf_shells(m, t)?;
        if (dual - shells).abs() > 1e-9 {
            return Err(Error::Tolerance { context: "radius cdf forms", left: dual, right: shells });
        }
        Ok(dual)
    }

    /// `phi(x, t) = (Z_t * 1_{Z_p^n})(x)`.
    pub fn phi(&self, r: Radius, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
        }
        match r {
            Radius::Level(b) if b >= 1 => {
                if t == 0.0 {
                    Ok(0.0)
                } else {
                    self.z_density(r, t)
                }
            }
            _ => {
                if t == 0.0 {
                    Ok(1.0)
                } else {
                    self.radius_cdf(0, t)
                }
            }
        }
    }

    /// `S(t)`, the probability of being in Z_p^n at time `t` after a start
    /// in Z_p^n.
    pub fn survival_s(&self, t: f64) -> Result<f64> {
        self.phi(Radius::Origin, t)
    }

    /// `d^m phi / dt^m` from the frequency-side series.
    pub fn time_derivative(&self, order: u32, r: Radius, t: f64) -> Result<f64> {
        if order == 0 {
            return self.phi(r, t);
        }
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time must be nonnegative, got {t}")));
        }
        let s = self.space();
        let np = s.n as f64 * s.ln_p();
        let k = self.kappa;
        let start = match r {
            Radius::Level(b) if b >= 1 => b,
            _ => 0,
        };
        let m = order as i32;
        let term = |g: i32| {
            let a = self.a(g);
            (-k * a).powi(m) * (-k * t * a - g as f64 * np).exp()
        };
        let sum = series::sum_certified(
            "time derivative",
            start,
            1,
            self.eps,
            ABS_FLOOR,
            term,
            |g| (k * self.a(g + 1)).powi(m) * (-((g + 1) as f64) * np).exp() / s.unit_sphere(),
        )?;
        let mut v = s.unit_sphere() * sum.value;
        if start >= 1 {
            v -= term(start - 1) * (-np).exp();
        }
        Ok(v)
    }

    /// `(W phi(., t))(x)` evaluated by x-space shell sums.
    pub fn w_phi(&self, r: Radius, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let profile = PhiProfile { model: self, t, s: self.survival_s(t)? };
        let v = symbol::apply_w_direct(&self.landscape, self.kappa, &profile, r)?;
        if !v.is_finite() {
            return Err(Error::TailCertification { context: "W phi", terms: 0, tolerance: self.eps });
        }
        Ok(v)
    }

    /// `d phi / dt - W phi` at `(r, t)`.
    pub fn master_residual(&self, r: Radius, t: f64) -> Result<f64> {
        Ok(self.time_derivative(1, r, t)? - self.w_phi(r, t)?)
    }

    /// `(Z_t * 1_{B_r})(x)`.
    pub fn evolve_ball(&self, ball: i32, x: Radius, t: f64) -> Result<f64> {
        let inside = x.is_within(ball);
        if t == 0.0 {
            return Ok(if inside { 1.0 } else { 0.0 });
        }
        if inside {
            self.radius_cdf(ball, t)
        } else {
            Ok(self.space().ball_volume(ball) * self.z_density(x, t)?)
        }
    }

    /// `(Z_t * u)(x)` for a radial step function `u`.
    pub fn evolve_step(&self, u: &RadialStepFunction, x: Radius, t: f64) -> Result<f64> {
        let mut v = 0.0;
        for (r, c) in u.ball_decomposition() {
            v += c * self.evolve_ball(r, x, t)?;
        }
        Ok(v)
    }

    /// `(Z_t * f)(x)` for a general radial `f`, by x-space shell sums.
    pub fn evolve_radial(&self, f: &dyn RadialFunction, x: Radius, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let s = self.space();
        let (lo, f_in) = f.inner();
        let (a, fa) = match x {
            Radius::Level(a) if a > lo => (a, f.value(a)),
            _ => (lo, f_in),
        };
        let mut v = if a > lo {
            let za = self.z_density(Radius::Level(a), t)?;
            let mut below = f_in * s.ball_volume(lo);
            for c in lo + 1..a {
                below += s.shell_volume(c) * f.value(c);
            }
            // the sphere through x: its part not within p^{a-1} of x
            fa * (self.radius_cdf(a - 1, t)? + za * s.ball_volume(a) * (1.0 - 2.0 * s.q())) + za * below
        } else {
            f_in * self.radius_cdf(lo, t)?
        };
        let outer = series::sum_certified(
            "radial convolution",
            a + 1,
            1,
            self.eps,
            ABS_FLOOR,
            |b| s.shell_volume(b) * self.z_level(b, t).map_or(f64::NAN, |z| z.value) * f.value(b),
            |b| f.sup_beyond(b) * self.radius_cdf_complement(b, t).unwrap_or(f64::INFINITY),
        )?;
        v += outer.value;
        Ok(v)
    }

    /// `P(X_t in B)` for a ball of level `ball` whose center is at distance
    /// `x` from the starting point.
    pub fn transition_probability(&self, x: Radius, ball: i32, t: f64) -> Result<f64> {
        self.evolve_ball(ball, x, t)
    }

    /// The constant `C` with `Z(x, t) <= C t |x|^{-a1}`.
    pub fn decay_constant(&self) -> f64 {
        self.kappa / self.landscape.certificate().c0
    }

    /// `sup_{t <= u} P(t, x, B) <= C u |x - center|^{-a1} vol(B)` for `x`
    /// outside `B`, checked at sampled times.
    pub fn ball_transition_bound(&self, x_level: i32, ball: i32, u: f64) -> Result<BoundCheck> {
        if x_level <= ball {
            return Err(Error::InvalidParameter("x must lie outside the ball".into()));
        }
        Self::check_t(u)?;
        let s = self.space();
        let c = self.landscape.certificate();
        let bound = self.decay_constant() * u * (-(x_level as f64) * c.alpha1 * s.ln_p()).exp() * s.ball_volume(ball);
        let mut observed = 0.0f64;
        for i in 0..40 {
            let t = u * 0.5f64.powi(i);
            let v = self.transition_probability(Radius::Level(x_level), ball, t)?;
            if v > bound * (1.0 + 1e-12) {
                return Err(Error::BoundViolated { t, level: x_level, value: v, bound });
            }
            observed = observed.max(v);
        }
        Ok(BoundCheck { bound, max_observed: observed })
    }

    /// `C'` with `P(|X_t| > p^m) <= C' t`.
    pub fn escape_rate_bound(&self, m: i32) -> Result<f64> {
        let s = self.space();
        let np = s.n as f64 * s.ln_p();
        let sum = series::sum_certified(
            "escape rate",
            0,
            1,
            self.eps,
            ABS_FLOOR,
            |k| self.a(m + k) * (-(k as f64) * np).exp(),
            |k| self.a(m + k + 1) * (-((k + 1) as f64) * np).exp() / s.unit_sphere(),
        )?;
        Ok(self.kappa * s.unit_sphere() * sum.value * (1.0 + 2.0 * self.eps))
    }

    /// Total mass of `Z(., t)` summed over spheres, with certified bounds on
    /// the neglected spheres near the origin and at infinity.
    pub fn mass(&self, t: f64) -> Result<MassReport> {
        Self::check_t(t)?;
        let s = self.space();
        let z0 = self.z_density(Radius::Origin, t)?;
        let mut lo = 0;
        while s.ball_volume(lo - 1) * z0 > 1e-13 {
            lo -= 1;
        }
        let mut hi = 1;
        let upper = |h: i32| self.kappa * t * s.unit_sphere() * self.landscape.ln_tail_bound(h).exp();
        while upper(hi) > 1e-13 {
            hi += 1;
        }
        let z = self.z_profile(lo, hi, t)?;
        let mut sum = 0.0;
        for (i, zi) in (lo..=hi).zip(&z) {
            sum += s.shell_volume(i) * zi;
        }
        Ok(MassReport { sum, lo, hi, lower_tail: s.ball_volume(lo - 1) * z0, upper_tail: upper(hi) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub max_observed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub sum: f64,
    pub lo: i32,
    pub hi: i32,
    pub lower_tail: f64,
    pub upper_tail: f64,
}

struct PhiProfile<'a> {
    model: &'a HeatKernelModel,
    t: f64,
    s: f64,
}

impl RadialFunction for PhiProfile<'_> {
    fn inner(&self) -> (i32, f64) {
        (0, self.s)
    }

    fn value(&self, level: i32) -> f64 {
        if level <= 0 {
            self.s
        } else {
            self.model.z_density(Radius::Level(level), self.t).unwrap_or(f64::NAN)
        }
    }

    fn sup_beyond(&self, level: i32) -> f64 {
        self.value(level.max(0) + 1)
    }
}

/// `Z_t * 1_{B_r}` as a radial function.
pub struct EvolvedBall<'a> {
    pub model: &'a HeatKernelModel,
    pub ball: i32,
    pub t: f64,
}

impl RadialFunction for EvolvedBall<'_> {
    fn inner(&self) -> (i32, f64) {
        (self.ball, self.model.evolve_ball(self.ball, Radius::Origin, self.t).unwrap_or(f64::NAN))
    }

    fn value(&self, level: i32) -> f64 {
        self.model.evolve_ball(self.ball, Radius::Level(level), self.t).unwrap_or(f64::NAN)
    }

    fn sup_beyond(&self, level: i32) -> f64 {
        self.value(level.max(self.ball) + 1)
    }
}

/// Uniform time grid `t_k = k h`, `k = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub h: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(h: f64, steps: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || steps == 0 {
            return Err(Error::InvalidParameter("time grid needs h > 0 and at least one step".into()));
        }
        Ok(TimeGrid { h, steps })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 * self.h).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchySolution {
    pub times: Vec<f64>,
    pub lo: i32,
    pub hi: i32,
    /// `u(t_k)` as a step function on levels `lo..=hi`; zero beyond `hi`.
    pub profiles: Vec<RadialStepFunction>,
    /// Richardson estimate of the Duhamel quadrature error.
    pub quadrature_error: f64,
    pub warning: Option<String>,
}

/// Solves `du/dt = W u + f`, `u(0) = u0` on a uniform grid:
/// `u(t) = Z_t * u0 + int_0^t Z_{t-s} * f(s) ds`, the first term exactly
/// and the second by the trapezoidal rule. `forcing` is either empty or
/// sampled at every grid time.
pub fn cauchy_solve(
    model: &HeatKernelModel,
    u0: &RadialStepFunction,
    forcing: &[RadialStepFunction],
    grid: TimeGrid,
    levels: (i32, i32),
    tolerance: f64,
) -> Result<CauchySolution> {
    if !forcing.is_empty() && forcing.len() != grid.steps + 1 {
        return Err(Error::InvalidParameter(format!(
            "forcing has {} samples for {} grid times",
            forcing.len(),
            grid.steps + 1
        )));
    }
    let min_level = std::iter::once(u0)
        .chain(forcing)
        .filter_map(|f| f.breakpoints().first().map(|b| b.0))
        .min()
        .unwrap_or(levels.0);
    let lo = levels.0.min(min_level);
    let hi = levels.1.max(lo);
    let times = grid.times();
    let nl = (hi - lo + 1) as usize;
    let radius = |i: usize| Radius::Level(lo + i as i32);

    // kernel[lag][ball] = Z_{lag h} * 1_{B_ball} on lo..=hi
    let mut balls: Vec<i32> = forcing.iter().flat_map(|f| f.ball_decomposition().into_iter().map(|b| b.0)).collect();
    balls.sort_unstable();
    balls.dedup();
    let mut kernel = Vec::with_capacity(if balls.is_empty() { 0 } else { grid.steps + 1 });
    if !balls.is_empty() {
        for &t in &times[..=grid.steps] {
            let mut per_ball = Vec::with_capacity(balls.len());
            for &b in &balls {
                let col: Result<Vec<f64>> = (0..nl).map(|i| model.evolve_ball(b, radius(i), t)).collect();
                per_ball.push(col?);
            }
            kernel.push(per_ball);
        }
    }
    let ball_index = |r: i32| balls.binary_search(&r).unwrap_or(0);
    let convolved = |lag: usize, k: usize, i: usize| -> f64 {
        forcing[k]
            .ball_decomposition()
            .iter()
            .map(|&(r, c)| c * kernel[lag][ball_index(r)][i])
            .sum()
    };

    let mut profiles = Vec::with_capacity(times.len());
    let mut quadrature_error = 0.0f64;
    for (j, &t) in times.iter().enumerate() {
        let mut u = vec![0.0; nl];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = model.evolve_step(u0, radius(i), t)?;
        }
        if !forcing.is_empty() && j > 0 {
            for (i, ui) in u.iter_mut().enumerate() {
                let vals: Vec<f64> = (0..=j).map(|k| convolved(j - k, k, i)).collect();
                let trap = grid.h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[j]));
                if j % 2 == 0 {
                    let coarse: f64 = vals.iter().step_by(2).sum::<f64>() - 0.5 * (vals[0] + vals[j]);
                    let coarse = 2.0 * grid.h * coarse;
                    quadrature_error = quadrature_error.max((trap - coarse).abs() / 3.0);
                }
                *ui += trap;
            }
        }
        let bps = (0..nl).map(|i| (lo + i as i32, u[i])).collect();
        profiles.push(RadialStepFunction::new(bps)?);
    }
    let warning = (quadrature_error > tolerance).then(|| {
        format!("Duhamel quadrature error estimate {quadrature_error:e} exceeds {tolerance:e}; refine the time grid")
    });
    Ok(CauchySolution { times, lo, hi, profiles, quadrature_error, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> HeatKernelModel {
        let l = Landscape::power_law(Space::new(3, 1).unwrap(), 1.0, 2.0).unwrap();
        HeatKernelModel::new(&l, 1.0).unwrap()
    }

    #[test]
    fn shell_and_alternating_forms_agree() {
        let m = golden();
        for b in -5..=12 {
            for t in [1e-3, 0.1, 1.0, 10.0] {
                let z = m.z_density(Radius::Level(b), t).unwrap();
                let z2 = m.z_density_alternating(b, t).unwrap();
                assert!(z >= 0.0);
                assert!((z - z2).abs() <= 1e-10 * z.max(1.0), "b = {b}, t = {t}: {z} vs {z2}");
            }
        }
    }

    #[test]
    fn origin_dominates() {
        let m = golden();
        for t in [1e-2, 1.0, 100.0] {
            let z0 = m.z_density(Radius::Origin, t).unwrap();
            assert!(z0 >= m.z_density(Radius::Level(-30), t).unwrap());
        }
    }

    #[test]
    fn cdf_forms_agree() {
        let m = golden();
        for k in -6..=8 {
            for t in [1e-2, 0.5, 3.0] {
                let c = m.radius_cdf_checked(k, t).unwrap();
                let q = m.radius_cdf_complement(k, t).unwrap();
                assert!((c + q - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cdf_is_monotone_and_tends_to_one() {
        let m = golden();
        let mut prev = 0.0;
        for k in -20..=40 {
            let c = m.radius_cdf(k, 0.7).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        assert!((prev - 1.0).abs() < 1e-12);
        assert!((m.radius_cdf(0, 1e-9).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn phi_boundary_values() {
        let m = golden();
        assert_eq!(m.phi(Radius::Level(-2), 0.0).unwrap(), 1.0);
        assert_eq!(m.phi(Radius::Level(3), 0.0).unwrap(), 0.0);
        let mut prev = 1.0;
        for b in 1..30 {
            let v = m.phi(Radius::Level(b), 2.0).unwrap();
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = golden();
        let h = 1e-4;
        for r in [Radius::Origin, Radius::Level(1), Radius::Level(4)] {
            for t in [0.3, 2.0] {
                let d1 = m.time_derivative(1, r, t).unwrap();
                let fd1 = (m.phi(r, t + h).unwrap() - m.phi(r, t - h).unwrap()) / (2.0 * h);
                assert!((d1 - fd1).abs() <= 1e-5 * d1.abs(), "{r:?} t = {t}: {d1} vs {fd1}");
            }
        }
    }

    #[test]
    fn master_equation_holds() {
        let m = golden();
        for r in [Radius::Origin, Radius::Level(-1), Radius::Level(1), Radius::Level(3)] {
            for t in [0.05, 1.0, 5.0] {
                let res = m.master_residual(r, t).unwrap();
                assert!(res.abs() < 1e-10, "{r:?} t = {t}: {res}");
            }
        }
    }

    #[test]
    fn mass_is_one() {
        let m = golden();
        for t in [0.01, 1.0, 50.0] {
            let r = m.mass(t).unwrap();
            assert!((r.sum - 1.0).abs() < 1e-10, "t = {t}: {r:?}");
        }
    }

    #[test]
    fn semigroup_in_x_space() {
        let m = golden();
        let (t, t2) = (0.4, 1.3);
        let evolved = EvolvedBall { model: &m, ball: 0, t };
        for x in [Radius::Origin, Radius::Level(0), Radius::Level(2), Radius::Level(5)] {
            let lhs = m.evolve_radial(&evolved, x, t2).unwrap();
            let rhs = m.evolve_ball(0, x, t + t2).unwrap();
            assert!((lhs - rhs).abs() < 1e-11, "{x:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn cauchy_homogeneous_matches_phi() {
        let m = golden();
        let grid = TimeGrid::new(0.1, 5).unwrap();
        let sol = cauchy_solve(&m, &RadialStepFunction::indicator(0), &[], grid, (-2, 6), 1e-6).unwrap();
        for (k, prof) in sol.profiles.iter().enumerate() {
            let t = sol.times[k];
            for b in -2..=6 {
                let want = m.phi(Radius::Level(b), t).unwrap();
                assert!((prof.value(b) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cauchy_stationary_forcing_matches_integral() {
        let m = golden();
        let s = m.space();
        let np = s.n as f64 * s.ln_p();
        let grid = TimeGrid::new(0.01, 100).unwrap();
        let forcing = vec![RadialStepFunction::indicator(0); grid.steps + 1];
        let sol = cauchy_solve(&m, &RadialStepFunction::zero(), &forcing, grid, (0, 3), 1e-5).unwrap();
        assert!(sol.warning.is_none());
        // int_0^t S(s) ds = (1 - p^{-n}) sum_k p^{-kn} (1 - E_k(t)) / (kappa a_k)
        let t = 1.0;
        let exact: f64 = (0..200)
            .map(|k| {
                let a = m.table().aw(k).unwrap();
                s.unit_sphere() * (-(k as f64) * np).exp() * series::one_minus_exp_neg(a * t) / a
            })
            .sum();
        let got = sol.profiles[100].value(0);
        assert!((got - exact).abs() < 1e-5, "{got} vs {exact}");
    }

    #[test]
    fn transition_bounds() {
        let m = golden();
        let check = m.ball_transition_bound(5, 1, 1.0).unwrap();
        assert!(check.max_observed <= check.bound);
        let far = m.ball_transition_bound(25, 1, 1.0).unwrap();
        assert!(far.bound < 1e-30);
        assert_eq!(m.transition_probability(Radius::Level(1), 2, 0.0).unwrap(), 1.0);
        let c = m.escape_rate_bound(0).unwrap();
        for t in [1e-6, 1e-3, 0.1] {
            assert!(m.radius_cdf_complement(0, t).unwrap() <= c * t);
        }
    }

    #[test]
    fn rejects_window_certificates() {
        let l = Landscape::exponential(Space::new(3, 1).unwrap(), 1.0, 1.0, 1.0).unwrap();
        assert!(HeatKernelModel::new(&l, 1.0).is_err());
    }
}
