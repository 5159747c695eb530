use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("prime {0} is not supported (need an odd prime)")]
    UnsupportedPrime(u32),

    #[error("operands disagree: {0}")]
    Mismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("growth certificate violated at level {level}: {detail}")]
    CertificateViolated { level: i32, detail: String },

    #[error("weight is not non-decreasing between levels {level} and {}", level + 1)]
    NonMonotoneWeight { level: i32 },

    #[error("series tail could not be certified below {tolerance:e} after {terms} terms ({context})")]
    TailCertification {
        context: &'static str,
        terms: usize,
        tolerance: f64,
    },

    #[error("representations disagree ({context}): {left} vs {right}")]
    Tolerance {
        context: &'static str,
        left: f64,
        right: f64,
    },

    #[error("kappa = {kappa} exceeds the admissible maximum {max}: kappa * int_{{|y| > 1}} dy / w(|y|) must not exceed 1")]
    KappaInadmissible { kappa: f64, max: f64 },

    #[error("retained increment mass {retained} is below 1 - 1e-9")]
    TruncationMass { retained: f64 },

    #[error("bound check failed at t = {t}, level {level}: {value} > {bound}")]
    BoundViolated {
        t: f64,
        level: i32,
        value: f64,
        bound: f64,
    },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures of a numerical tolerance or certificate, as opposed
    /// to malformed input.
    pub fn is_tolerance(&self) -> bool {
        matches!(
            self,
            Error::TailCertification { .. }
                | Error::Tolerance { .. }
                | Error::TruncationMass { .. }
                | Error::BoundViolated { .. }
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
