use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("exponential rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("product prior must have at least one factor")]
    EmptyProduct,

    #[error("product prior cannot mix uniform and exponential factors")]
    MixedFamilies,

    #[error(
        "{bits} fractional bits cannot certify 1e-9 accuracy for the Irwin-Hall sum \
         (m={m}, x={x}); certified error bound {bound:.3e}"
    )]
    PrecisionInsufficient { m: u32, bits: u32, x: f64, bound: f64 },

    #[error("grid too coarse: {skipped} of {total} cells straddle kink surfaces (limit 20%)")]
    GridTooCoarse { skipped: usize, total: usize },

    #[error(
        "domain truncation at w_max={w_max} leaves an analytic tail bound {tail:.3e}, \
         above the allowed {limit:.3e}"
    )]
    TruncationInsufficient { w_max: f64, tail: f64, limit: f64 },

    #[error("LP instance too large: {0}")]
    LpTooLarge(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
