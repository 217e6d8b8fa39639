use authcap::iproject::LFuncError;
use authcap::probcore::ProbError;
use authcap::regions::RegionError;
use authcap::simkit::SimError;
use authcap::typelab::TypeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Budget(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ProbError> for CliError {
    fn from(e: ProbError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LFuncError> for CliError {
    fn from(e: LFuncError) -> Self {
        match e {
            LFuncError::Budget(_) => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<RegionError> for CliError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::Budget(_) => CliError::Budget(e.to_string()),
            RegionError::LFunc(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TypeError> for CliError {
    fn from(e: TypeError) -> Self {
        match e {
            TypeError::Budget(_) => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Budget { .. } => CliError::Budget(e.to_string()),
            SimError::Type(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
