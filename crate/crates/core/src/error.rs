use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid origami: {0}")]
    InvalidOrigami(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("orbit exceeds cap of {cap} vertices")]
    OrbitCap { cap: usize },
    #[error("shear action violates the relation {0}")]
    Relation(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("reduction did not terminate within {0} steps")]
    ReductionGuard(usize),
    #[error("radius {radius} exceeds the embedded-ball bound {bound}")]
    OutOfRange { radius: f64, bound: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPermutation(_) => "invalid_permutation",
            Error::InvalidOrigami(_) => "invalid_origami",
            Error::Parse(_) => "parse",
            Error::OrbitCap { .. } => "orbit_cap",
            Error::Relation(_) => "relation",
            Error::Degenerate(_) => "degenerate",
            Error::ReductionGuard(_) => "reduction_guard",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
