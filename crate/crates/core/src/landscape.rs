//! Radial energy landscapes `w(|y|_p)` and their growth certificates.
//!
//! A certificate `(C0, C1, a1, a2, a3)` asserts
//!
//! ```text
//! C0 r^a1 <= w(r) <= C1 r^a2 exp(a3 r)      for r = p^m
//! ```
//!
//! with `a1, a2 > n`. The lower half drives every certified tail bound in the
//! crate, so it must hold for all radii; the upper half may be restricted to
//! a window of levels (see [`Scope`]).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{ShellIndex, Space};
use crate::series::{self, Certified, EPS_TAIL};

/// Levels on which certificates are checked numerically.
pub const VERIFY_LO: i32 = -40;
pub const VERIFY_HI: i32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Global,
    /// The upper bound is only known to hold on `lo..=hi`.
    Window { lo: i32, hi: i32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c0: f64,
    pub c1: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    #[serde(default = "global")]
    pub scope: Scope,
}

fn global() -> Scope {
    Scope::Global
}

impl Certificate {
    pub fn upper_holds_at(&self, m: i32) -> bool {
        match self.scope {
            Scope::Global => true,
            Scope::Window { lo, hi } => (lo..=hi).contains(&m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LandscapeType {
    Polynomial,
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum BaseKind {
    PowerLaw { c: f64, alpha: f64 },
    Exponential { c: f64, beta: f64, alpha3: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    /// `f(p^m) = values[m - from_level]`, extended by the end values.
    Bounded { from_level: i32, values: Vec<f64> },
    /// `P(r) = sum_k coefficients[k] r^k` with nonnegative coefficients and
    /// `P(0) > 0`.
    Polynomial { coefficients: Vec<f64> },
}

impl Factor {
    fn ln_value(&self, m: i32, ln_p: f64) -> f64 {
        match self {
            Factor::Bounded { from_level, values } => {
                let i = (m - from_level).clamp(0, values.len() as i32 - 1);
                values[i as usize].ln()
            }
            Factor::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0.0)
                .fold(f64::NEG_INFINITY, |acc, (k, &c)| {
                    series::ln_add(acc, c.ln() + k as f64 * m as f64 * ln_p)
                }),
        }
    }
}

type WeightFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A user-supplied weight `r -> w(r)`.
#[derive(Clone)]
pub struct CustomWeight {
    pub name: String,
    w: Arc<WeightFn>,
}

impl CustomWeight {
    pub fn new(name: impl Into<String>, w: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomWeight { name: name.into(), w: Arc::new(w) }
    }
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    PowerLaw { c: f64, alpha: f64 },
    Exponential { c: f64, beta: f64, alpha3: f64 },
    ScaledProduct { base: BaseKind, factor: Factor },
    Custom(CustomWeight),
}

/// JSON form of a landscape: `{kind, parameters, p, n, certificate}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    #[serde(flatten)]
    pub kind: KindSpec,
    pub p: u32,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum KindSpec {
    PowerLaw { c: f64, alpha: f64 },
    Exponential { c: f64, beta: f64, alpha3: f64 },
    ScaledProduct { base: BaseKind, factor: Factor },
}

#[derive(Clone, Debug)]
pub struct Landscape {
    kind: Kind,
    space: Space,
    certificate: Certificate,
    tag: LandscapeType,
}

impl Landscape {
    /// `w(r) = c r^{alpha + n}`.
    pub fn power_law(space: Space, c: f64, alpha: f64) -> Result<Self> {
        let cert = power_law_certificate(space, c, alpha)?;
        Self::build(Kind::PowerLaw { c, alpha }, space, cert)
    }

    /// `w(r) = c r^beta exp(alpha3 r)`.
    pub fn exponential(space: Space, c: f64, beta: f64, alpha3: f64) -> Result<Self> {
        let cert = exponential_certificate(space, c, beta, alpha3)?;
        Self::build(Kind::Exponential { c, beta, alpha3 }, space, cert)
    }

    pub fn scaled_product(space: Space, base: BaseKind, factor: Factor) -> Result<Self> {
        let base_cert = match base {
            BaseKind::PowerLaw { c, alpha } => power_law_certificate(space, c, alpha)?,
            BaseKind::Exponential { c, beta, alpha3 } => exponential_certificate(space, c, beta, alpha3)?,
        };
        let cert = match &factor {
            Factor::Bounded { from_level, values } => {
                if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidParameter("bounded factor needs positive finite values".into()));
                }
                let last = from_level + values.len() as i32 - 1;
                if *from_level < VERIFY_LO || last > VERIFY_HI {
                    return Err(Error::InvalidParameter(format!(
                        "factor table must lie inside levels {VERIFY_LO}..={VERIFY_HI}"
                    )));
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(0.0, f64::max);
                Certificate { c0: base_cert.c0 * lo, c1: base_cert.c1 * hi, ..base_cert }
            }
            Factor::Polynomial { coefficients } => {
                if coefficients.first().is_none_or(|&c0| !(c0 > 0.0))
                    || coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0))
                {
                    return Err(Error::InvalidParameter(
                        "polynomial factor needs P(0) > 0 and nonnegative coefficients".into(),
                    ));
                }
                // r^k <= (k / (e d))^k e^{d r}
                let delta = if base_cert.alpha3 > 0.0 { base_cert.alpha3 } else { 1.0 };
                let k_sum: f64 = coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        if k == 0 {
                            c
                        } else {
                            c * (k as f64 / (std::f64::consts::E * delta)).powi(k as i32)
                        }
                    })
                    .sum();
                Certificate {
                    c0: base_cert.c0 * coefficients[0],
                    c1: base_cert.c1 * k_sum,
                    alpha3: base_cert.alpha3 + delta,
                    ..base_cert
                }
            }
        };
        Self::build(Kind::ScaledProduct { base, factor }, space, cert)
    }

    /// A user-defined weight with a claimed certificate. The claim is checked
    /// on the verification grid and its margins must not shrink towards
    /// either end of the grid.
    pub fn custom(space: Space, weight: CustomWeight, claimed: Certificate) -> Result<Self> {
        let l = Self::build(Kind::Custom(weight), space, claimed)?;
        l.check_asymptotes()?;
        Ok(l)
    }

    pub fn from_spec(spec: &LandscapeSpec) -> Result<Self> {
        let space = Space::new(spec.p, spec.n)?;
        let l = match spec.kind.clone() {
            KindSpec::PowerLaw { c, alpha } => Self::power_law(space, c, alpha)?,
            KindSpec::Exponential { c, beta, alpha3 } => Self::exponential(space, c, beta, alpha3)?,
            KindSpec::ScaledProduct { base, factor } => Self::scaled_product(space, base, factor)?,
        };
        match spec.certificate {
            None => Ok(l),
            Some(claimed) => {
                let replaced = Landscape { certificate: claimed, tag: tag_of(&claimed), ..l };
                replaced.validate()?;
                Ok(replaced)
            }
        }
    }

    /// The JSON form; `None` for custom kinds.
    pub fn to_spec(&self) -> Option<LandscapeSpec> {
        let kind = match &self.kind {
            Kind::PowerLaw { c, alpha } => KindSpec::PowerLaw { c: *c, alpha: *alpha },
            Kind::Exponential { c, beta, alpha3 } => KindSpec::Exponential { c: *c, beta: *beta, alpha3: *alpha3 },
            Kind::ScaledProduct { base, factor } => KindSpec::ScaledProduct { base: base.clone(), factor: factor.clone() },
            Kind::Custom(_) => return None,
        };
        Some(LandscapeSpec { kind, p: self.space.p, n: self.space.n, certificate: Some(self.certificate) })
    }

    fn build(kind: Kind, space: Space, certificate: Certificate) -> Result<Self> {
        let l = Landscape { kind, space, certificate, tag: tag_of(&certificate) };
        l.validate()?;
        Ok(l)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn classify_type(&self) -> LandscapeType {
        self.tag
    }

    /// Returns a copy with `w` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter("scale factor must be positive".into()));
        }
        let kind = match &self.kind {
            Kind::PowerLaw { c, alpha } => Kind::PowerLaw { c: c * factor, alpha: *alpha },
            Kind::Exponential { c, beta, alpha3 } => Kind::Exponential { c: c * factor, beta: *beta, alpha3: *alpha3 },
            Kind::ScaledProduct { base, factor: f } => {
                let base = match base {
                    BaseKind::PowerLaw { c, alpha } => BaseKind::PowerLaw { c: c * factor, alpha: *alpha },
                    BaseKind::Exponential { c, beta, alpha3 } => {
                        BaseKind::Exponential { c: c * factor, beta: *beta, alpha3: *alpha3 }
                    }
                };
                Kind::ScaledProduct { base, factor: f.clone() }
            }
            Kind::Custom(cw) => {
                let inner = cw.w.clone();
                Kind::Custom(CustomWeight::new(cw.name.clone(), move |r| factor * inner(r)))
            }
        };
        let c = self.certificate;
        let certificate = Certificate { c0: c.c0 * factor, c1: c.c1 * factor, ..c };
        Self::build(kind, self.space, certificate)
    }

    /// `ln w(p^m)`; `+inf` when `w` overflows, which callers treat as a
    /// vanishing `1/w`.
    pub fn ln_w(&self, m: i32) -> f64 {
        let ln_p = self.space.ln_p();
        let mf = m as f64;
        match &self.kind {
            Kind::PowerLaw { c, alpha } => c.ln() + mf * (alpha + self.space.n as f64) * ln_p,
            Kind::Exponential { c, beta, alpha3 } => ln_exponential(*c, *beta, *alpha3, mf, ln_p),
            Kind::ScaledProduct { base, factor } => {
                let b = match base {
                    BaseKind::PowerLaw { c, alpha } => c.ln() + mf * (alpha + self.space.n as f64) * ln_p,
                    BaseKind::Exponential { c, beta, alpha3 } => ln_exponential(*c, *beta, *alpha3, mf, ln_p),
                };
                b + factor.ln_value(m, ln_p)
            }
            Kind::Custom(cw) => (cw.w)((mf * ln_p).exp()).ln(),
        }
    }

    pub fn eval_w(&self, m: ShellIndex) -> f64 {
        self.ln_w(m.0).exp()
    }

    /// `ln(p^{mn} / w(p^m))`.
    pub fn ln_density(&self, m: i32) -> f64 {
        m as f64 * self.space.n as f64 * self.space.ln_p() - self.ln_w(m)
    }

    /// Certified bound on `ln sum_{i > j} p^{in} / w(p^i)` from the lower
    /// growth bound.
    pub fn ln_tail_bound(&self, j: i32) -> f64 {
        let c = &self.certificate;
        let d = (self.space.n as f64 - c.alpha1) * self.space.ln_p();
        -c.c0.ln() + (j + 1) as f64 * d - (-d.exp()).ln_1p()
    }

    /// `int_{|y| > 1} dy / w`.
    pub fn exit_integral(&self) -> Result<Certified> {
        let s = self.space;
        series::sum_certified(
            "exit integral",
            1,
            1,
            EPS_TAIL * 1e-2,
            0.0,
            |i| (s.ln_shell_volume(i) - self.ln_w(i)).exp(),
            |i| s.unit_sphere() * self.ln_tail_bound(i).exp(),
        )
    }

    /// Largest `kappa` with `kappa * int_{|y| > 1} dy / w <= 1`.
    pub fn kappa_admissible_max(&self) -> Result<f64> {
        Ok(1.0 / self.exit_integral()?.value)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.certificate;
        let n = self.space.n as f64;
        let ok = c.c0 > 0.0
            && c.c1 > 0.0
            && c.c0.is_finite()
            && c.c1.is_finite()
            && c.alpha1 > n
            && c.alpha2 > n
            && c.alpha3 >= 0.0
            && c.alpha3.is_finite();
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "certificate needs C0, C1 > 0, alpha1, alpha2 > n = {n}, alpha3 >= 0; got {c:?}"
            )));
        }
        if c.alpha3 == 0.0 && c.alpha1 != c.alpha2 && c.scope == Scope::Global {
            return Err(Error::InvalidParameter(
                "a polynomial certificate needs alpha1 = alpha2".into(),
            ));
        }
        let ln_p = self.space.ln_p();
        let mut prev = f64::NEG_INFINITY;
        for m in VERIFY_LO..=VERIFY_HI {
            let lw = self.ln_w(m);
            if lw.is_nan() || lw == f64::NEG_INFINITY {
                return Err(Error::CertificateViolated { level: m, detail: format!("w is not positive ({lw})") });
            }
            let slack = 1e-12 * (1.0 + lw.abs());
            let lower = c.c0.ln() + m as f64 * c.alpha1 * ln_p;
            if lower > lw + slack {
                return Err(Error::CertificateViolated {
                    level: m,
                    detail: format!("lower bound ln {lower} exceeds ln w = {lw}"),
                });
            }
            if c.upper_holds_at(m) {
                let upper = c.c1.ln() + m as f64 * c.alpha2 * ln_p + c.alpha3 * (m as f64 * ln_p).exp();
                if lw > upper + slack {
                    return Err(Error::CertificateViolated {
                        level: m,
                        detail: format!("ln w = {lw} exceeds upper bound ln {upper}"),
                    });
                }
            }
            if lw + slack < prev {
                return Err(Error::NonMonotoneWeight { level: m - 1 });
            }
            prev = lw;
        }
        Ok(())
    }

    /// Margins of both bounds must be non-decreasing towards the grid ends,
    /// so that neither bound is about to be crossed just outside the grid.
    fn check_asymptotes(&self) -> Result<()> {
        let c = &self.certificate;
        let ln_p = self.space.ln_p();
        let lower = |m: i32| self.ln_w(m) - c.c0.ln() - m as f64 * c.alpha1 * ln_p;
        let upper =
            |m: i32| c.c1.ln() + m as f64 * c.alpha2 * ln_p + c.alpha3 * (m as f64 * ln_p).exp() - self.ln_w(m);
        let ends = [(VERIFY_HI - 2, 1), (VERIFY_LO + 2, -1)];
        for (start, dir) in ends {
            for k in 0..2 {
                let (a, b) = (start + dir * k, start + dir * (k + 1));
                let tol = 1e-9 * (1.0 + lower(a).abs());
                if lower(b) + tol < lower(a) {
                    return Err(Error::CertificateViolated {
                        level: b,
                        detail: "lower-bound margin shrinks towards the end of the grid".into(),
                    });
                }
                if c.scope == Scope::Global && upper(b) + tol < upper(a) {
                    return Err(Error::CertificateViolated {
                        level: b,
                        detail: "upper-bound margin shrinks towards the end of the grid".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn ln_exponential(c: f64, beta: f64, alpha3: f64, m: f64, ln_p: f64) -> f64 {
    c.ln() + m * beta * ln_p + alpha3 * (m * ln_p).exp()
}

fn tag_of(c: &Certificate) -> LandscapeType {
    if c.alpha3 == 0.0 {
        LandscapeType::Polynomial
    } else {
        LandscapeType::Exponential
    }
}

fn power_law_certificate(space: Space, c: f64, alpha: f64) -> Result<Certificate> {
    if !(c > 0.0 && c.is_finite() && alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("power law needs c > 0 and alpha > 0, got c = {c}, alpha = {alpha}")));
    }
    let a = alpha + space.n as f64;
    Ok(Certificate { c0: c, c1: c, alpha1: a, alpha2: a, alpha3: 0.0, scope: Scope::Global })
}

fn exponential_certificate(space: Space, c: f64, beta: f64, alpha3: f64) -> Result<Certificate> {
    if !(c > 0.0 && c.is_finite() && beta >= 0.0 && beta.is_finite() && alpha3 > 0.0 && alpha3.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exponential landscape needs c > 0, beta >= 0, alpha3 > 0; got c = {c}, beta = {beta}, alpha3 = {alpha3}"
        )));
    }
    let n = space.n as f64;
    if beta > n {
        return Ok(Certificate { c0: c, c1: c, alpha1: beta, alpha2: beta, alpha3, scope: Scope::Global });
    }
    // r^{beta - a} e^{alpha3 r} is smallest at r = (a - beta) / alpha3
    let a = n + 1.0;
    let d = a - beta;
    let c0 = c * (std::f64::consts::E * alpha3 / d).powf(d);
    // c r^beta <= C1 r^a fails as r -> 0; bound it on the grid only
    let c1 = c * space.pf().powf(-(VERIFY_LO as f64) * d);
    Ok(Certificate {
        c0,
        c1,
        alpha1: a,
        alpha2: a,
        alpha3,
        scope: Scope::Window { lo: VERIFY_LO, hi: VERIFY_HI },
    })
}

/// The constant `c` for which the power law `c r^{alpha + n}` has symbol
/// exactly `|xi|_p^alpha`.
pub fn power_law_unit_constant(space: Space, alpha: f64) -> f64 {
    let p = space.pf();
    let pa = p.powf(-alpha);
    space.unit_sphere() * pa * pa / (1.0 - pa) + pa
}

pub fn eval_w(l: &Landscape, m: ShellIndex) -> f64 {
    l.eval_w(m)
}

pub fn classify_type(l: &Landscape) -> LandscapeType {
    l.classify_type()
}

pub fn kappa_admissible_max(l: &Landscape) -> Result<f64> {
    l.kappa_admissible_max()
}
