use dtree_mcmc::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration and input validation problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::UnknownLabelColumn(_)
                | Error::NonNumericCell { .. }
                | Error::EmptyDataset
                | Error::EmptyClass(_)
                | Error::InvalidDataset(_)
                | Error::InvalidFoldCount { .. }
                | Error::Config(_)
                | Error::FeatureCountMismatch { .. }
                | Error::Schema { .. }
                | Error::InvalidTree(_) => 2,
                _ => 3,
            },
            CliError::Output { .. } => 3,
        }
    }
}
