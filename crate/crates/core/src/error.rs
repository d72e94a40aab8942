use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("distribution is not normalized: total mass {0}")]
    Normalization(f64),

    #[error("ground-set size mismatch: {0} vs {1}")]
    SizeMismatch(u32, u32),

    #[error("ground-set size {n} exceeds the limit {limit} for {context}")]
    TooLarge {
        n: u64,
        limit: u64,
        context: &'static str,
    },

    #[error("element index {index} out of range for ground set of size {n}")]
    IndexOutOfRange { index: u32, n: u32 },

    #[error("mask {mask:#x} does not fit a ground set of size {n}")]
    MaskOutOfRange { mask: u64, n: u32 },

    #[error("conditioning event has zero probability")]
    ZeroProbabilityPrefix,

    #[error("family is empty")]
    EmptyFamily,

    #[error("family is not union-closed")]
    NotUnionClosed,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("internal solver failure: {0}")]
    Solver(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_prob(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_open_prob(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "(0, 1)",
        })
    }
}
