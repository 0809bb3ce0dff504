use thiserror::Error;

/// Errors raised anywhere in the integration pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OmicsError {
    /// A caller-supplied argument is outside its valid range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A value lies outside the domain of a transform (e.g. Box-Cox on x <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Every feature was removed by a filtering step.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// A feature has no observed value in any sample.
    #[error("feature `{0}` is not observed in any sample and cannot be imputed")]
    UnimputableFeature(String),

    /// Input is structurally valid but carries no usable information.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Sample identifiers disagree across inputs that must be aligned.
    #[error("sample alignment mismatch: {}", .0.join(", "))]
    Alignment(Vec<String>),

    /// Failure inside a named pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<OmicsError>,
    },
}

impl OmicsError {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        OmicsError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping any stage labels.
    pub fn root(&self) -> &OmicsError {
        match self {
            OmicsError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, OmicsError>;
