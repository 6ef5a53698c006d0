use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("grid has {points} points, above the cap of {cap}; pass {flag} to raise it")]
    CapExceeded {
        points: u128,
        cap: usize,
        flag: &'static str,
    },
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("particle ({sort}, {index}) does not exist")]
    InvalidParticle { sort: usize, index: usize },
    #[error("grid and system specification disagree: {0}")]
    Mismatch(String),
    #[error("wave function has zero norm after (anti)symmetrization")]
    ZeroNorm,
    #[error("wave field contains non-finite values")]
    NonFinite,
    #[error("azimuthal symmetry check failed: variation {variation:e} exceeds {limit:e}")]
    SymmetryBroken { variation: f64, limit: f64 },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
