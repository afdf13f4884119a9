use std::path::PathBuf;

use smallcell_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: CoreError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0} invariant check(s) failed")]
    Validation(usize),
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(msg) => HarnessError::Schema(msg),
            other => HarnessError::Stage { stage: "setup".into(), source: other },
        }
    }
}

impl HarnessError {
    pub fn stage(stage: impl Into<String>) -> impl Fn(CoreError) -> HarnessError {
        let stage = stage.into();
        move |source| HarnessError::Stage { stage: stage.clone(), source }
    }

    /// Process exit status: 2 for configuration problems, 3 for evaluation
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema(_) | HarnessError::Parse { .. } => 2,
            HarnessError::Stage { source: CoreError::Config(_), .. } => 2,
            HarnessError::Stage { source: CoreError::EmptyCell { .. }, .. } => 3,
            HarnessError::Stage { stage, .. } if stage.starts_with("evaluat") => 3,
            _ => 1,
        }
    }
}
