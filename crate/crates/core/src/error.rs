use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime")]
    InvalidPrime(u64),

    #[error("p-adic branch requires f = 1 (got f = {0}); use the laurent branch for q = p^f")]
    UnsupportedExtension(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("modulus polynomial {0:?} is not a monic irreducible of the requested degree")]
    InvalidModulus(Vec<u32>),

    #[error("{what} has size {size}, above the cap {cap}")]
    SizeCap {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("closure of {what} exceeded the budget of {budget} elements")]
    BudgetExceeded { what: String, budget: usize },

    #[error("argument is not a unit")]
    NonUnit,

    #[error("dimension or level mismatch: {0}")]
    Mismatch(String),

    #[error(
        "rank decision not certified: smallest kept pivot {kept:e}, largest dropped pivot {dropped:e}"
    )]
    RankGap { kept: f64, dropped: f64 },

    #[error("no beta with det(a - beta c) a unit was found; the input matrix is probably not invertible")]
    ChangSearchFailed,

    #[error("declared conductor exponent {declared} but the model shows {empirical}")]
    ConductorMismatch { declared: u32, empirical: u32 },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
