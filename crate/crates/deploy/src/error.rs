use thiserror::Error;

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("{0}")]
    Usage(String),
    #[error("scenario error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("synthesis infeasible: {0}")]
    Infeasible(sls_core::Error),
    #[error("{0}")]
    Core(sls_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<sls_core::Error> for DeployError {
    fn from(e: sls_core::Error) -> Self {
        match e {
            sls_core::Error::Infeasible { .. } => DeployError::Infeasible(e),
            e => DeployError::Core(e),
        }
    }
}

impl DeployError {
    /// 1 for usage, schema, and runtime errors; 2 for an infeasible synthesis.
    pub fn exit_code(&self) -> i32 {
        match self {
            DeployError::Infeasible(_) => 2,
            _ => 1,
        }
    }
}
