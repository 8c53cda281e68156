use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, unusable output directory.
    #[error("{0}")]
    Usage(String),

    /// A hypothesis check came back negative.
    #[error("check failed in stage {stage}: {detail}")]
    CheckFailed { stage: String, detail: String },

    #[error("numeric failure in stage {stage}: {source}")]
    Numeric { stage: String, source: seqrpf::Error },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status: 1 usage/config, 2 check failure, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::CheckFailed { .. } => 2,
            CliError::Numeric { .. } => 3,
        }
    }

    /// Wrap a toolkit error raised while running `stage`; caller mistakes
    /// stay usage errors.
    pub fn from_core(stage: &str, e: seqrpf::Error) -> Self {
        if e.is_usage() {
            CliError::Usage(format!("{stage}: {e}"))
        } else {
            CliError::Numeric { stage: stage.into(), source: e }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}
