use thiserror::Error;

/// Errors raised while estimating or using a space deformation model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate scaling: all off-diagonal entries equal {0}")]
    DegenerateScaling(f64),

    #[error(
        "no data within bandwidth {bandwidth} of the pair ({first}, {second}); increase the bandwidth"
    )]
    EmptyKernelSupport {
        bandwidth: f64,
        first: usize,
        second: usize,
    },

    #[error("degenerate configuration: all points coincide")]
    DegenerateConfiguration,

    #[error("stress increased at iteration {iteration} (trace: {trace:?})")]
    StressIncrease { iteration: usize, trace: Vec<f64> },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("covariance matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("experimental variogram carries no spatial structure")]
    NoSpatialStructure,

    #[error("{0} locations exceed the dense factorization cap of {1}")]
    TooLarge(usize, usize),

    #[error("no hyper-parameter pair produced a defined score")]
    NoDefinedScore,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::DegenerateScaling(_)
                | Error::EmptyKernelSupport { .. }
                | Error::DegenerateConfiguration
                | Error::StressIncrease { .. }
                | Error::SingularSystem(_)
                | Error::NotPositiveDefinite { .. }
                | Error::NoSpatialStructure
                | Error::NoDefinedScore
        )
    }
}

/// Tags errors from one pipeline stage with its name.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
