//! Certified summation helpers shared by the symbol, kernel and FPT code.

use crate::error::{Error, Result};

/// Default relative truncation tolerance.
pub const EPS_TAIL: f64 = 1e-12;

pub(crate) const MAX_TERMS: usize = 20_000;

/// `ln(e^a + e^b)` without overflow.
pub fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - e^{-x})` for `x >= 0`.
pub fn ln_one_minus_exp_neg(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

/// `1 - e^{-x}` computed without cancellation.
pub fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certified {
    pub value: f64,
    /// Upper bound on the absolute value of the discarded tail.
    pub tail: f64,
    pub terms: usize,
}

/// Sums `term(j)` for `j = start, start + step, ...` until `tail_after(j)`
/// bounds the rest below `rel * |sum| + abs`.
pub(crate) fn sum_certified<F, T>(
    context: &'static str,
    start: i32,
    step: i32,
    rel: f64,
    abs: f64,
    mut term: F,
    mut tail_after: T,
) -> Result<Certified>
where
    F: FnMut(i32) -> f64,
    T: FnMut(i32) -> f64,
{
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 0..MAX_TERMS {
        let j = start + step * k as i32;
        let x = term(j);
        // Neumaier summation
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        let tail = tail_after(j);
        let total = sum + comp;
        if tail <= rel * total.abs() + abs {
            return Ok(Certified { value: total, tail, terms: k + 1 });
        }
    }
    Err(Error::TailCertification { context, terms: MAX_TERMS, tolerance: rel })
}
