use thiserror::Error;

pub type Result<T> = std::result::Result<T, NeedletError>;

#[derive(Debug, Error)]
pub enum NeedletError {
    #[error("argument {value} outside [-1, 1] ({what})")]
    Domain { what: &'static str, value: f64 },

    #[error("degree {requested} exceeds the configured cap {cap} (set NEEDLET_DEGREE_CAP to raise it)")]
    DegreeCap { requested: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("degenerate value: {0}")]
    Degenerate(String),

    #[error("non-positive variance c_{l} = {value}")]
    NonPositiveVariance { l: usize, value: f64 },

    #[error("harmonic degree {available} is below the {required} needed at this scale")]
    DegreeInsufficient { required: usize, available: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("zero coefficient at l = {l} inside the fit window")]
    ZeroInWindow { l: usize },

    #[error("band-limit violation: nonzero coefficient above degree {band_limit}")]
    BandLimit { band_limit: usize },

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NeedletError {
    /// Errors caused by the caller's configuration rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            NeedletError::Domain { .. }
                | NeedletError::InvalidParameter(_)
                | NeedletError::Spectrum(_)
                | NeedletError::NonPositiveVariance { .. }
                | NeedletError::Io(_)
                | NeedletError::Json(_)
                | NeedletError::Csv(_)
                | NeedletError::BandLimit { .. }
                | NeedletError::EmptySequence
        )
    }
}
