//! Digit-expansion points of Q_p^n and the Haar-measure primitives built on
//! them.
//!
//! A nonzero scalar is stored as `p^order * (d_0 + d_1 p + ... + d_{L-1} p^{L-1})`
//! with `d_0 != 0`, where `L` is the working precision. The norm is
//! `|x|_p = p^{-order}`; for points the norm is the maximum over coordinates.
//!
//! Levels are used throughout the crate instead of orders: a point of norm
//! `p^m` sits on the sphere of level `m`, so `level = -order`.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PRECISION: usize = 48;

/// The ambient space Q_p^n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    pub p: u32,
    pub n: u32,
}

impl Space {
    pub fn new(p: u32, n: u32) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::UnsupportedPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dimension n must be at least 1".into()));
        }
        Ok(Space { p, n })
    }

    pub fn pf(&self) -> f64 {
        self.p as f64
    }

    pub fn ln_p(&self) -> f64 {
        self.pf().ln()
    }

    /// `p^{-n}`.
    pub fn q(&self) -> f64 {
        self.pf().powi(-(self.n as i32))
    }

    /// `1 - p^{-n}`, the volume of the unit sphere.
    pub fn unit_sphere(&self) -> f64 {
        1.0 - self.q()
    }

    pub fn ball_volume(&self, m: i32) -> f64 {
        (self.ln_p() * (m as f64) * self.n as f64).exp()
    }

    pub fn shell_volume(&self, m: i32) -> f64 {
        shell_volume(ShellIndex(m), self.p, self.n)
    }

    pub fn ln_shell_volume(&self, m: i32) -> f64 {
        self.ln_p() * (m as f64) * self.n as f64 + self.unit_sphere().ln()
    }
}

pub fn is_odd_prime(p: u32) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Level of a sphere `{|y| = p^m}` or ball `{|y| <= p^m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ShellIndex(pub i32);

/// Norm of a point given as a level, with the origin kept separate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Radius {
    Origin,
    Level(i32),
}

impl Radius {
    pub fn is_within(&self, m: i32) -> bool {
        match self {
            Radius::Origin => true,
            Radius::Level(l) => *l <= m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    Zero,
    Finite(i32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    p: u32,
    precision: usize,
    order: Order,
    digits: Vec<u32>,
}

/// Result of a digit-window addition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AddOutcome<T> {
    pub sum: T,
    /// A carry left the top of the digit window and was dropped.
    pub overflow: bool,
    /// Leading digits lost to cancellation; the same number of trailing
    /// digits of the result are zero fill.
    pub cancelled: usize,
}

impl PadicScalar {
    pub fn zero(p: u32, precision: usize) -> Self {
        PadicScalar {
            p,
            precision,
            order: Order::Zero,
            digits: Vec::new(),
        }
    }

    /// Builds `p^order * sum digits[j] p^j`, normalising leading zeros into
    /// the order and truncating to `precision` digits.
    pub fn from_digits(p: u32, precision: usize, order: i32, digits: &[u32]) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::UnsupportedPrime(p));
        }
        if precision == 0 {
            return Err(Error::InvalidParameter("precision must be positive".into()));
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= p) {
            return Err(Error::InvalidParameter(format!("digit {d} out of range for p = {p}")));
        }
        Ok(Self::normalized(p, precision, order, digits))
    }

    fn normalized(p: u32, precision: usize, order: i32, digits: &[u32]) -> Self {
        match digits.iter().position(|&d| d != 0) {
            None => Self::zero(p, precision),
            Some(k) => {
                let mut ds: Vec<u32> = digits[k..].iter().copied().take(precision).collect();
                ds.resize(precision, 0);
                PadicScalar {
                    p,
                    precision,
                    order: Order::Finite(order + k as i32),
                    digits: ds,
                }
            }
        }
    }

    pub fn from_integer(p: u32, precision: usize, value: i64) -> Result<Self> {
        let mut v = value.unsigned_abs();
        let mut digits = Vec::new();
        while v > 0 && digits.len() < precision + 64 {
            digits.push((v % p as u64) as u32);
            v /= p as u64;
        }
        let x = Self::from_digits(p, precision, 0, &digits)?;
        Ok(if value < 0 { x.neg() } else { x })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn is_zero(&self) -> bool {
        self.order == Order::Zero
    }

    /// Level `m` with `|x|_p = p^m`, or `None` for zero.
    pub fn level(&self) -> Option<i32> {
        match self.order {
            Order::Zero => None,
            Order::Finite(o) => Some(-o),
        }
    }

    pub fn norm(&self) -> f64 {
        match self.order {
            Order::Zero => 0.0,
            Order::Finite(o) => (self.p as f64).powi(-o),
        }
    }

    fn digit_at(&self, position: i64) -> u32 {
        match self.order {
            Order::Zero => 0,
            Order::Finite(o) => {
                let i = position - o as i64;
                if i >= 0 && (i as usize) < self.digits.len() {
                    self.digits[i as usize]
                } else {
                    0
                }
            }
        }
    }

    /// Multiplication by `p^k`.
    pub fn scale(&self, k: i32) -> Self {
        let mut out = self.clone();
        if let Order::Finite(o) = self.order {
            out.order = Order::Finite(o + k);
        }
        out
    }

    /// Additive inverse within the digit window.
    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        if let Some((first, rest)) = out.digits.split_first_mut() {
            *first = self.p - *first;
            for d in rest {
                *d = self.p - 1 - *d;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<AddOutcome<Self>> {
        if self.p != other.p || self.precision != other.precision {
            return Err(Error::Mismatch(format!(
                "(p, L) = ({}, {}) vs ({}, {})",
                self.p, self.precision, other.p, other.precision
            )));
        }
        let base = match (self.order, other.order) {
            (Order::Zero, _) => return Ok(AddOutcome { sum: other.clone(), overflow: false, cancelled: 0 }),
            (_, Order::Zero) => return Ok(AddOutcome { sum: self.clone(), overflow: false, cancelled: 0 }),
            (Order::Finite(a), Order::Finite(b)) => a.min(b),
        };
        let l = self.precision;
        let mut digits = Vec::with_capacity(l);
        let mut carry = 0u32;
        for i in 0..l {
            let pos = base as i64 + i as i64;
            let s = self.digit_at(pos) + other.digit_at(pos) + carry;
            digits.push(s % self.p);
            carry = s / self.p;
        }
        let overflow = carry != 0;
        let cancelled = digits.iter().position(|&d| d != 0).unwrap_or(l);
        let sum = Self::normalized(self.p, l, base, &digits);
        Ok(AddOutcome { sum, overflow, cancelled })
    }

    /// The fractional part `{x}_p`, exactly.
    pub fn frac_part(&self) -> BigRational {
        let o = match self.order {
            Order::Finite(o) if o < 0 => o,
            _ => return BigRational::zero(),
        };
        let k = (-o) as usize;
        let p = BigInt::from(self.p);
        let mut num = BigInt::zero();
        for j in (0..k.min(self.digits.len())).rev() {
            num = num * &p + BigInt::from(self.digits[j]);
        }
        BigRational::new(num, p.pow(k as u32))
    }

    /// `Psi(x) = exp(2 pi i {x}_p)`.
    pub fn character(&self) -> Complex64 {
        let frac = self.frac_part();
        if frac.is_zero() {
            return Complex64::new(1.0, 0.0);
        }
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let theta = if frac > half { frac - BigRational::from_integer(BigInt::from(1)) } else { frac };
        Complex64::cis(std::f64::consts::TAU * theta.to_f64().unwrap_or(0.0))
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.order {
            Order::Zero => write!(f, "0"),
            Order::Finite(o) => {
                write!(f, "{}^{} * [", self.p, o)?;
                for (i, d) in self.digits.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{d}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A point of Q_p^n.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PadicPoint {
    space: Space,
    precision: usize,
    coords: Vec<PadicScalar>,
}

impl PadicPoint {
    pub fn zero(space: Space, precision: usize) -> Self {
        PadicPoint {
            space,
            precision,
            coords: vec![PadicScalar::zero(space.p, precision); space.n as usize],
        }
    }

    pub fn from_coords(coords: Vec<PadicScalar>) -> Result<Self> {
        let first = coords
            .first()
            .ok_or_else(|| Error::InvalidParameter("a point needs at least one coordinate".into()))?;
        let (p, precision) = (first.p, first.precision);
        if coords.iter().any(|c| c.p != p || c.precision != precision) {
            return Err(Error::Mismatch("coordinates use different p or precision".into()));
        }
        let space = Space::new(p, coords.len() as u32)?;
        Ok(PadicPoint { space, precision, coords })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn coords(&self) -> &[PadicScalar] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(PadicScalar::is_zero)
    }

    pub fn order(&self) -> Order {
        self.coords
            .iter()
            .filter_map(|c| match c.order {
                Order::Finite(o) => Some(o),
                Order::Zero => None,
            })
            .min()
            .map_or(Order::Zero, Order::Finite)
    }

    pub fn level(&self) -> Option<i32> {
        match self.order() {
            Order::Zero => None,
            Order::Finite(o) => Some(-o),
        }
    }

    pub fn radius(&self) -> Radius {
        self.level().map_or(Radius::Origin, Radius::Level)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(PadicScalar::norm).fold(0.0, f64::max)
    }

    pub fn in_ball(&self, m: i32) -> bool {
        self.level().is_none_or(|l| l <= m)
    }

    pub fn scale(&self, k: i32) -> Self {
        PadicPoint {
            space: self.space,
            precision: self.precision,
            coords: self.coords.iter().map(|c| c.scale(k)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        PadicPoint {
            space: self.space,
            precision: self.precision,
            coords: self.coords.iter().map(PadicScalar::neg).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<AddOutcome<Self>> {
        if self.space != other.space || self.precision != other.precision {
            return Err(Error::Mismatch("points live in different spaces or precisions".into()));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut overflow = false;
        let mut cancelled = 0;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let r = a.add(b)?;
            overflow |= r.overflow;
            cancelled = cancelled.max(r.cancelled);
            coords.push(r.sum);
        }
        Ok(AddOutcome {
            sum: PadicPoint { space: self.space, precision: self.precision, coords },
            overflow,
            cancelled,
        })
    }
}

/// Haar volume of the sphere `{|y|_p = p^m}` in Q_p^n.
pub fn shell_volume(m: ShellIndex, p: u32, n: u32) -> f64 {
    let pf = p as f64;
    let e = m.0 as f64 * n as f64;
    (1.0 - pf.powi(-(n as i32))) * (e * pf.ln()).exp()
}

/// `int_{|y| = 1} Psi(-p^j y . xi0) dy` for a unit vector `xi0`.
pub fn character_shell_integral(j: i32, p: u32, n: u32) -> f64 {
    let q = (p as f64).powi(-(n as i32));
    match j {
        j if j >= 0 => 1.0 - q,
        -1 => -q,
        _ => 0.0,
    }
}

/// A scalar whose digits from `order` on are i.i.d. uniform; leading zeros
/// are replaced by further fresh digits so that `precision` significant
/// digits are random. With `leading` the first digit is fixed.
fn random_scalar<R: Rng + ?Sized>(
    p: u32,
    precision: usize,
    order: i32,
    leading: Option<u32>,
    rng: &mut R,
) -> PadicScalar {
    let mut o = order;
    let first = match leading {
        Some(0) => return random_scalar(p, precision, order + 1, None, rng),
        Some(d) => d,
        None => loop {
            if (o - order) as usize >= precision {
                return PadicScalar::zero(p, precision);
            }
            let d = rng.random_range(0..p);
            if d != 0 {
                break d;
            }
            o += 1;
        },
    };
    let mut digits = Vec::with_capacity(precision);
    digits.push(first);
    while digits.len() < precision {
        digits.push(rng.random_range(0..p));
    }
    PadicScalar { p, precision, order: Order::Finite(o), digits }
}

/// A Haar-uniform point on the sphere `{|y|_p = p^m}`.
pub fn sample_uniform_on_shell<R: Rng + ?Sized>(
    m: ShellIndex,
    space: Space,
    precision: usize,
    rng: &mut R,
) -> PadicPoint {
    let n = space.n as usize;
    let mut lead = vec![0u32; n];
    loop {
        for d in lead.iter_mut() {
            *d = rng.random_range(0..space.p);
        }
        if lead.iter().any(|&d| d != 0) {
            break;
        }
    }
    let coords = lead
        .iter()
        .map(|&d| random_scalar(space.p, precision, -m.0, Some(d), rng))
        .collect();
    PadicPoint { space, precision, coords }
}

/// A Haar-uniform point of the ball `{|y|_p <= p^m}`.
pub fn sample_uniform_in_ball<R: Rng + ?Sized>(
    m: ShellIndex,
    space: Space,
    precision: usize,
    rng: &mut R,
) -> PadicPoint {
    let coords = (0..space.n)
        .map(|_| random_scalar(space.p, precision, -m.0, None, rng))
        .collect();
    PadicPoint { space, precision, coords }
}
