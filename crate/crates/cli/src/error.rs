use dfgp::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{count} forecast keys have no matching actual; first offenders: {}", .offenders.join(", "))]
    KeyMismatch { count: usize, offenders: Vec<String> },
    #[error("gradient check failed")]
    GradcheckFailed,
}

impl CliError {
    /// 1 gradcheck failure, 2 config, 3 data, 4 numeric, 5 unknown series, 6 key mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::GradcheckFailed => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::KeyMismatch { .. } => 6,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Domain(_) => 2,
                Error::Parse { .. }
                | Error::Gap { .. }
                | Error::Length { .. }
                | Error::Alignment(_)
                | Error::DegenerateNormalizer(_)
                | Error::Io { .. } => 3,
                Error::Shape(_)
                | Error::Numeric { .. }
                | Error::Tape(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Singular { .. } => 4,
                Error::UnknownSeries(_) => 5,
            },
        }
    }

    /// Short tag naming the failing layer, used as the message prefix.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "gradcheck",
            2 => "config error",
            3 => "data error",
            4 => "numeric error",
            5 => "unknown series",
            _ => "key mismatch",
        }
    }
}
