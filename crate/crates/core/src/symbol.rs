//! The symbol `A_w(|xi|_p)` of the operator
//!
//! ```text
//! (W f)(x) = kappa * int (f(x - y) - f(x)) / w(|y|_p) dy
//! ```
//!
//! Writing `a(g)` for the value at `|xi|_p = p^{-g}`,
//!
//! ```text
//! a(g) = (1 - p^{-n}) sum_{j >= g+2} p^{nj} / w(p^j) + p^{n(g+1)} / w(p^{g+1})
//! ```
//!
//! The second term comes from the shell `|y| = p^{g+1}`, on which the
//! character integrates to `-p^{-n}`. A variant with `p^{ng}` in the second
//! term circulates; it disagrees with the defining integral (for
//! `w = r^3`, `p = 3`, `n = 1` it gives `5/108` at `g = 0` instead of
//! `13/108`) and is only available as [`aw_unshifted_variant`] for
//! comparison.
//!
//! Values are stored as logarithms: for exponential landscapes `a(g)`
//! underflows `f64` long before it stops being positive.

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::padic::{character_shell_integral, PadicPoint, Radius};
use crate::radial::RadialFunction;
use crate::series::{self, EPS_TAIL};

/// Below this absolute size a tail counts as certified even when it is not
/// small relative to the value (super-exponentially small symbols).
const LN_ABS_FLOOR: f64 = -690.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolEntry {
    pub gamma: i32,
    pub ln_value: f64,
    pub value: f64,
    /// Absolute truncation bound on `value`.
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct SymbolTable {
    landscape: Landscape,
    lo: i32,
    hi: i32,
    eps: f64,
    ln_values: Vec<f64>,
    tail: f64,
}

impl SymbolTable {
    pub fn new(landscape: &Landscape, gamma_min: i32, gamma_max: i32) -> Result<Self> {
        Self::with_tolerance(landscape, gamma_min, gamma_max, EPS_TAIL)
    }

    pub fn with_tolerance(landscape: &Landscape, gamma_min: i32, gamma_max: i32, eps: f64) -> Result<Self> {
        if gamma_min > gamma_max {
            return Err(Error::InvalidParameter(format!("empty window {gamma_min}..={gamma_max}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("tail tolerance {eps} out of range")));
        }
        let l = landscape;
        // a(hi) >= p^{n(hi+1)} / w(p^{hi+1}) fixes the absolute tail target
        let target = (eps.ln() + l.ln_density(gamma_max + 1)).max(LN_ABS_FLOOR);
        let mut top = gamma_max + 2;
        while l.ln_tail_bound(top) > target {
            top += 1;
            if top - gamma_max > series::MAX_TERMS as i32 {
                return Err(Error::TailCertification {
                    context: "symbol table",
                    terms: series::MAX_TERMS,
                    tolerance: eps,
                });
            }
        }
        let ln_unit = l.space().unit_sphere().ln();
        let mut ln_values = vec![0.0; (gamma_max - gamma_min + 1) as usize];
        // suffix(j) = ln sum_{j <= i <= top} p^{ni} / w(p^i)
        let mut suffix = f64::NEG_INFINITY;
        for j in (gamma_min + 2..=top).rev() {
            suffix = series::ln_add(l.ln_density(j), suffix);
            let g = j - 2;
            if g <= gamma_max {
                ln_values[(g - gamma_min) as usize] = series::ln_add(ln_unit + suffix, l.ln_density(g + 1));
            }
        }
        let tail = l.space().unit_sphere() * l.ln_tail_bound(top).exp();
        Ok(SymbolTable { landscape: l.clone(), lo: gamma_min, hi: gamma_max, eps, ln_values, tail })
    }

    pub fn landscape(&self) -> &Landscape {
        &self.landscape
    }

    pub fn window(&self) -> (i32, i32) {
        (self.lo, self.hi)
    }

    pub fn tolerance(&self) -> f64 {
        self.eps
    }

    /// `ln a(g)`; outside the window the series is summed directly.
    pub fn ln_aw(&self, gamma: i32) -> Result<f64> {
        if (self.lo..=self.hi).contains(&gamma) {
            Ok(self.ln_values[(gamma - self.lo) as usize])
        } else {
            ln_aw_direct(&self.landscape, gamma, self.eps).map(|(v, _)| v)
        }
    }

    pub fn aw(&self, gamma: i32) -> Result<f64> {
        self.ln_aw(gamma).map(f64::exp)
    }

    pub fn entry(&self, gamma: i32) -> Result<SymbolEntry> {
        let (ln_value, error) = if (self.lo..=self.hi).contains(&gamma) {
            (self.ln_values[(gamma - self.lo) as usize], self.tail)
        } else {
            ln_aw_direct(&self.landscape, gamma, self.eps)?
        };
        Ok(SymbolEntry { gamma, ln_value, value: ln_value.exp(), error })
    }

    pub fn entries(&self) -> impl Iterator<Item = SymbolEntry> + '_ {
        (self.lo..=self.hi).map(move |g| SymbolEntry {
            gamma: g,
            ln_value: self.ln_values[(g - self.lo) as usize],
            value: self.ln_values[(g - self.lo) as usize].exp(),
            error: self.tail,
        })
    }

    /// `ln(a(g-1) - a(g)) = ln(p^{ng} (1/w(p^g) - 1/w(p^{g+1})))`.
    pub fn ln_gap(&self, gamma: i32) -> f64 {
        ln_gap(&self.landscape, gamma)
    }
}

pub(crate) fn ln_gap(l: &Landscape, gamma: i32) -> f64 {
    let (a, b) = (l.ln_w(gamma), l.ln_w(gamma + 1));
    if a == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    l.ln_density(gamma) + series::ln_one_minus_exp_neg(b - a)
}

/// Direct evaluation of `ln a(g)` with its absolute tail bound.
pub fn ln_aw_direct(l: &Landscape, gamma: i32, eps: f64) -> Result<(f64, f64)> {
    let ln_unit = l.space().unit_sphere().ln();
    let second = l.ln_density(gamma + 1);
    let mut acc = f64::NEG_INFINITY;
    for k in 0..series::MAX_TERMS as i32 {
        let j = gamma + 2 + k;
        acc = series::ln_add(acc, l.ln_density(j));
        let total = series::ln_add(ln_unit + acc, second);
        let tail = ln_unit + l.ln_tail_bound(j);
        if tail <= (eps.ln() + total).max(LN_ABS_FLOOR) {
            return Ok((total, tail.exp()));
        }
    }
    Err(Error::TailCertification { context: "symbol", terms: series::MAX_TERMS, tolerance: eps })
}

const ORACLE_ABS_TAIL: f64 = 1e-15;

/// Shell-by-shell evaluation of `int (1 - Psi(-y . xi)) / w(|y|) dy` at
/// `|xi| = p^{-g}`, using the character integral over each sphere and
/// nothing else. Shells run up to `j_max`; the certified tail beyond must be
/// below `1e-13` relative to the sum, or below `1e-15` outright when the sum
/// is too small for the growth certificate to resolve it.
pub fn aw_oracle(l: &Landscape, gamma: i32, j_max: i32) -> Result<f64> {
    let s = l.space();
    let (p, n) = (s.p, s.n);
    let mut total = 0.0;
    for m in gamma - 2..=j_max {
        // int_{|y| = p^m} Psi(-y . xi) dy = p^{mn} * (integral over the unit sphere at scale p^{g-m})
        let ball = (m as f64 * n as f64 * s.ln_p()).exp();
        let shell = ball * s.unit_sphere();
        let chi = ball * character_shell_integral(gamma - m, p, n);
        let w = l.ln_w(m).exp();
        if w.is_finite() {
            total += (shell - chi) / w;
        }
    }
    let tail = s.unit_sphere() * l.ln_tail_bound(j_max).exp();
    if tail > (1e-13 * total.abs()).max(ORACLE_ABS_TAIL) {
        return Err(Error::InvalidParameter(format!(
            "j_max = {j_max} leaves a tail of {tail:e} against a sum of {total:e}"
        )));
    }
    Ok(total)
}

/// The symbol with `p^{ng}` in place of `p^{n(g+1)}` in the second term.
/// Does not equal the defining integral; kept for comparison only.
pub fn aw_unshifted_variant(table: &SymbolTable, gamma: i32) -> Result<f64> {
    let l = table.landscape();
    let s = l.space();
    let correct = table.aw(gamma)?;
    let second = l.ln_density(gamma + 1).exp();
    let replaced = (gamma as f64 * s.n as f64 * s.ln_p() - l.ln_w(gamma + 1)).exp();
    Ok(correct - second + replaced)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub upper: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
    /// False when the upper growth bound, and so the lower symbol bound, is
    /// only certified on a window not containing `g + 1`.
    pub lower_certified: bool,
}

/// Constants `(C2, C3)` of the symbol bounds
/// `C2 |xi|^{a2-n} exp(-a3 p / |xi|) <= A_w(|xi|) <= C3 |xi|^{a1-n}`.
pub fn sandwich_constants(l: &Landscape) -> (f64, f64) {
    let c = l.certificate();
    let s = l.space();
    let n = s.n as f64;
    let r = s.pf().powf(n - c.alpha1);
    let c3 = r / c.c0 * (1.0 + s.unit_sphere() * r / (1.0 - r));
    let c2 = s.pf().powf(n - c.alpha2) / c.c1;
    (c2, c3)
}

pub fn aw_sandwich(l: &Landscape, gamma: i32) -> Sandwich {
    let c = l.certificate();
    let s = l.space();
    let n = s.n as f64;
    let (c2, c3) = sandwich_constants(l);
    let ln_norm = -(gamma as f64) * s.ln_p();
    let ln_upper = c3.ln() + (c.alpha1 - n) * ln_norm;
    let mut ln_lower = c2.ln() + (c.alpha2 - n) * ln_norm;
    if c.alpha3 > 0.0 {
        ln_lower -= c.alpha3 * ((gamma + 1) as f64 * s.ln_p()).exp();
    }
    Sandwich {
        lower: ln_lower.exp(),
        upper: ln_upper.exp(),
        ln_lower,
        ln_upper,
        lower_certified: c.upper_holds_at(gamma + 1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Shell sums of `(f(x - y) - f(x)) / w` in x-space.
    Direct,
    /// `-kappa F^{-1}(A_w F f)` summed over frequency shells.
    Spectral,
}

/// `(W 1_{B_r})(x)` for `|x|_p` given by `x`.
pub fn apply_w(table: &SymbolTable, kappa: f64, ball: i32, x: Radius, route: Route) -> Result<f64> {
    match route {
        Route::Direct => apply_w_direct(table.landscape(), kappa, &crate::radial::RadialStepFunction::indicator(ball), x),
        Route::Spectral => apply_w_spectral_ball(table, kappa, ball, x),
    }
}

pub fn apply_w_at(table: &SymbolTable, kappa: f64, ball: i32, x: &PadicPoint, route: Route) -> Result<f64> {
    apply_w(table, kappa, ball, x.radius(), route)
}

/// Evaluates both routes and fails if they differ by more than `tol`.
pub fn apply_w_checked(table: &SymbolTable, kappa: f64, ball: i32, x: Radius, tol: f64) -> Result<f64> {
    let d = apply_w(table, kappa, ball, x, Route::Direct)?;
    let s = apply_w(table, kappa, ball, x, Route::Spectral)?;
    if (d - s).abs() > tol {
        return Err(Error::Tolerance { context: "W direct vs spectral", left: d, right: s });
    }
    Ok(d)
}

/// `(W f)(x)` for a radial `f` by shell sums in x-space:
///
/// ```text
/// kappa [ (sum_{c < a} vol_c f_c - p^{(a-1)n} f_a) / w(p^a) + sum_{b > a} vol_b (f_b - f_a) / w(p^b) ]
/// ```
pub fn apply_w_direct(l: &Landscape, kappa: f64, f: &dyn RadialFunction, x: Radius) -> Result<f64> {
    let s = l.space();
    let (lo, f_in) = f.inner();
    let (a, fa) = match x {
        Radius::Level(a) if a > lo => (a, f.value(a)),
        _ => (lo, f_in),
    };
    let mut inner = 0.0;
    if a > lo {
        let mut below = f_in * s.ball_volume(lo);
        for c in lo + 1..a {
            below += s.shell_volume(c) * f.value(c);
        }
        inner = (below - s.ball_volume(a - 1) * fa) / l.ln_w(a).exp();
    }
    let outer = series::sum_certified(
        "W direct",
        a + 1,
        1,
        EPS_TAIL,
        1e-300,
        |b| (s.ln_shell_volume(b) - l.ln_w(b)).exp() * (f.value(b) - fa),
        |b| (f.sup_beyond(b) + fa.abs()) * s.unit_sphere() * l.ln_tail_bound(b).exp(),
    )?;
    Ok(kappa * (inner + outer.value))
}

fn apply_w_spectral_ball(table: &SymbolTable, kappa: f64, r: i32, x: Radius) -> Result<f64> {
    let l = table.landscape();
    let s = l.space();
    let np = s.n as f64 * s.ln_p();
    let (start, a) = match x {
        Radius::Origin => (r, None),
        Radius::Level(a) => (r.max(a), Some(a)),
    };
    let q = s.q();
    let sum = series::sum_certified(
        "W spectral",
        start,
        1,
        EPS_TAIL,
        1e-300,
        |g| (table.ln_aw(g).unwrap_or(f64::NEG_INFINITY) - g as f64 * np).exp(),
        |g| (table.ln_aw(g).unwrap_or(f64::INFINITY) - (g + 1) as f64 * np).exp() / (1.0 - q),
    )?;
    let mut value = s.unit_sphere() * sum.value;
    if let Some(a) = a {
        if a > r {
            value -= (table.ln_aw(a - 1)? - a as f64 * np).exp();
        }
    }
    Ok(-kappa * (r as f64 * np).exp() * value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Space;

    fn golden() -> Landscape {
        Landscape::power_law(Space::new(3, 1).unwrap(), 1.0, 2.0).unwrap()
    }

    #[test]
    fn golden_values() {
        let t = SymbolTable::new(&golden(), -10, 10).unwrap();
        assert!((t.aw(0).unwrap() - 13.0 / 108.0).abs() < 1e-15);
        assert!((t.aw(1).unwrap() - 13.0 / 972.0).abs() < 1e-16);
        assert!(t.aw(60).unwrap() < 1e-50);
        let oracle = aw_oracle(&golden(), 0, 40).unwrap();
        assert!((oracle - 13.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn unshifted_variant_misses_the_integral() {
        let t = SymbolTable::new(&golden(), -2, 2).unwrap();
        assert!((aw_unshifted_variant(&t, 0).unwrap() - 5.0 / 108.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_window_matches_table() {
        let l = golden();
        let wide = SymbolTable::new(&l, -30, 30).unwrap();
        let narrow = SymbolTable::new(&l, -2, 2).unwrap();
        for g in [-30, -7, 5, 30] {
            let (a, b) = (wide.ln_aw(g).unwrap(), narrow.ln_aw(g).unwrap());
            assert!((a - b).abs() < 2e-12, "g = {g}");
        }
    }

    #[test]
    fn gaps_match_differences() {
        let l = Landscape::exponential(Space::new(5, 2).unwrap(), 1.0, 3.0, 0.3).unwrap();
        let t = SymbolTable::new(&l, -6, 6).unwrap();
        for g in -5..=4 {
            let d = t.aw(g - 1).unwrap() - t.aw(g).unwrap();
            assert!((t.ln_gap(g).exp() - d).abs() < 1e-12 * d.abs(), "g = {g}");
        }
    }

    #[test]
    fn sandwich_ratio_is_constant_for_power_laws() {
        let l = Landscape::power_law(Space::new(5, 2).unwrap(), 0.3, 2.5).unwrap();
        let r0 = {
            let s = aw_sandwich(&l, 0);
            s.upper / s.lower
        };
        for g in -20..=20 {
            let s = aw_sandwich(&l, g);
            assert!((s.upper / s.lower - r0).abs() < 1e-10 * r0);
        }
        assert_eq!(aw_sandwich(&l, 2000).lower, 0.0);
    }

    #[test]
    fn w_of_unit_ball_at_origin() {
        let t = SymbolTable::new(&golden(), -10, 10).unwrap();
        for route in [Route::Direct, Route::Spectral] {
            let v = apply_w(&t, 1.0, 0, Radius::Origin, route).unwrap();
            assert!((v + 1.0 / 12.0).abs() < 1e-13, "{route:?}: {v}");
        }
        // far away: kappa vol(B_0) / w(|x|)
        let v = apply_w(&t, 1.0, 0, Radius::Level(4), Route::Direct).unwrap();
        assert!((v - 3f64.powi(-12)).abs() < 1e-18);
    }

    #[test]
    fn routes_agree_on_a_grid() {
        for l in [
            golden(),
            Landscape::power_law(Space::new(5, 2).unwrap(), 2.0, 1.5).unwrap(),
            Landscape::exponential(Space::new(3, 1).unwrap(), 1.0, 2.0, 0.7).unwrap(),
        ] {
            let t = SymbolTable::new(&l, -20, 40).unwrap();
            for r in -3..=3 {
                for a in (-5..=6).map(Radius::Level).chain([Radius::Origin]) {
                    apply_w_checked(&t, 0.8, r, a, 1e-9).unwrap();
                }
            }
        }
    }
}
