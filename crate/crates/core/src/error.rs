use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid range [{lo}, {hi}]: need 1 <= lo <= hi")]
    InvalidRange { lo: u64, hi: u64 },

    #[error("64-bit overflow while accumulating {quantity} at n = {n}")]
    Overflow { n: u64, quantity: &'static str },

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("arguments are not coprime: common prime {0}")]
    NotCoprime(String),

    #[error("coprime combination routes disagree for S_s: {route_a} vs {route_b}")]
    RouteMismatch { route_a: String, route_b: String },

    #[error("prime {0} already divides N")]
    PrimeInSupport(String),

    #[error("ratio S_s(N)/N = {ratio} is not below the target {target}")]
    RatioNotBelowTarget { ratio: String, target: String },

    #[error("target must be positive, got {0}")]
    NonPositiveTarget(String),

    #[error("tolerance must be positive, got {0}")]
    NonPositiveTolerance(String),

    #[error("Euler factor inner sum did not converge at p = {p} (k = {k}, j = {j})")]
    NonConvergentInnerSum { p: u64, k: u32, j: u32 },

    #[error("unknown additive function {0:?}")]
    UnknownFunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
