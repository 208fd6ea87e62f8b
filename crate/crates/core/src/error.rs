use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("constant term vanishes; no holomorphic reciprocal at the origin")]
    ZeroConstantTerm,

    #[error("matrix is not unitary (max deviation of U*U from I is {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("point lies outside the open unit ball (|z|^2+|w|^2 = {radius_sq})")]
    OutsideBall { radius_sq: f64 },

    #[error("alpha = {alpha} is outside the admissible range {range}")]
    AlphaOutOfRange { alpha: f64, range: &'static str },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("polynomial vanishes on the closed ball of radius {radius} (min |p| = {min_modulus:.3e})")]
    InteriorZero { radius: f64, min_modulus: f64 },

    #[error("truncation tail did not settle before order cap {cap} (reached order {order})")]
    TruncationFailure { order: u32, cap: u32 },

    #[error("boundary zero is not a simple root after rotation (|dp/dw| = {derivative:.3e})")]
    MultipleBranch { derivative: f64 },

    #[error("branch fit residual {residual:.3e} exceeds tolerance")]
    FitResidualTooLarge { residual: f64 },

    #[error("zero set on the sphere is empty; inequality is vacuous (min |p| = {min_modulus})")]
    DegenerateFit { min_modulus: f64 },

    #[error("kernel argument must be positive, got {0}")]
    NonpositiveArgument(f64),

    #[error("support points {first} and {second} coincide")]
    DuplicateSupportPoints { first: usize, second: usize },

    #[error("syntax error at position {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("exponent at position {position} is not a nonnegative integer")]
    ExponentNotInteger { position: usize },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
