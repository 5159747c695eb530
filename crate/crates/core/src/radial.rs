//! Radial functions on Q_p^n, described level by level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::Radius;

/// A function of `|x|_p` that is constant on some ball around the origin.
pub trait RadialFunction {
    /// `(lo, v)`: the function equals `v` on the ball of level `lo`.
    fn inner(&self) -> (i32, f64);

    /// Value on the sphere of level `level`.
    fn value(&self, level: i32) -> f64;

    /// Upper bound on `|f|` over all levels above `level`.
    fn sup_beyond(&self, level: i32) -> f64;

    fn value_at(&self, r: Radius) -> f64 {
        match r {
            Radius::Origin => self.inner().1,
            Radius::Level(l) => self.value(l),
        }
    }
}

/// A locally constant, compactly supported radial function. Breakpoints
/// `(m_k, v_k)` with increasing levels mean `f = v_1` on the ball of level
/// `m_1`, `f = v_k` on levels `m_{k-1} + 1 ..= m_k`, and `f = 0` beyond the
/// last level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RadialStepFunction {
    breakpoints: Vec<(i32, f64)>,
}

impl RadialStepFunction {
    pub fn new(breakpoints: Vec<(i32, f64)>) -> Result<Self> {
        if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter("breakpoint levels must increase strictly".into()));
        }
        if breakpoints.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter("breakpoint values must be finite".into()));
        }
        Ok(RadialStepFunction { breakpoints })
    }

    pub fn zero() -> Self {
        RadialStepFunction::default()
    }

    /// The indicator of the ball of level `r`.
    pub fn indicator(r: i32) -> Self {
        RadialStepFunction { breakpoints: vec![(r, 1.0)] }
    }

    pub fn breakpoints(&self) -> &[(i32, f64)] {
        &self.breakpoints
    }

    pub fn is_zero(&self) -> bool {
        self.breakpoints.iter().all(|&(_, v)| v == 0.0)
    }

    /// Coefficients `c_k` with `f = sum_k c_k 1_{B_{m_k}}`.
    pub fn ball_decomposition(&self) -> Vec<(i32, f64)> {
        let mut out = Vec::with_capacity(self.breakpoints.len());
        for (k, &(m, v)) in self.breakpoints.iter().enumerate() {
            let next = self.breakpoints.get(k + 1).map_or(0.0, |b| b.1);
            if v != next {
                out.push((m, v - next));
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        RadialStepFunction { breakpoints: self.breakpoints.iter().map(|&(m, v)| (m, s * v)).collect() }
    }
}

impl RadialFunction for RadialStepFunction {
    fn inner(&self) -> (i32, f64) {
        self.breakpoints.first().copied().unwrap_or((0, 0.0))
    }

    fn value(&self, level: i32) -> f64 {
        self.breakpoints
            .iter()
            .find(|&&(m, _)| m >= level)
            .map_or(0.0, |&(_, v)| v)
    }

    fn sup_beyond(&self, level: i32) -> f64 {
        let mut sup = 0.0f64;
        let mut prev = i32::MIN;
        for &(m, v) in &self.breakpoints {
            // the step of (m, v) covers levels prev + 1 ..= m
            if m > level && prev < m {
                sup = sup.max(v.abs());
            }
            prev = m;
        }
        sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_values() {
        let f = RadialStepFunction::new(vec![(-1, 2.0), (1, 0.5), (3, -1.0)]).unwrap();
        assert_eq!(f.value(-7), 2.0);
        assert_eq!(f.value(-1), 2.0);
        assert_eq!(f.value(0), 0.5);
        assert_eq!(f.value(1), 0.5);
        assert_eq!(f.value(2), -1.0);
        assert_eq!(f.value(4), 0.0);
        assert_eq!(f.value_at(Radius::Origin), 2.0);
        assert_eq!(f.sup_beyond(1), 1.0);
        assert_eq!(f.sup_beyond(3), 0.0);
    }

    #[test]
    fn ball_decomposition_reconstructs() {
        let f = RadialStepFunction::new(vec![(-2, 1.0), (0, 3.0), (2, 3.0), (4, -0.5)]).unwrap();
        let balls = f.ball_decomposition();
        for level in -5..7 {
            let v: f64 = balls.iter().filter(|&&(r, _)| level <= r).map(|&(_, c)| c).sum();
            assert!((v - f.value(level)).abs() < 1e-15, "level {level}");
        }
    }

    #[test]
    fn rejects_unsorted() {
        assert!(RadialStepFunction::new(vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(RadialStepFunction::new(vec![(0, f64::NAN)]).is_err());
    }
}
