use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("scenario {scenario}: {source}")]
    Core {
        scenario: String,
        #[source]
        source: bsvi_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

pub type LabResult<T> = std::result::Result<T, LabError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}

pub(crate) trait CoreContext<T> {
    fn in_scenario(self, scenario: &str) -> LabResult<T>;
}

impl<T> CoreContext<T> for bsvi_core::Result<T> {
    fn in_scenario(self, scenario: &str) -> LabResult<T> {
        self.map_err(|source| LabError::Core {
            scenario: scenario.to_string(),
            source,
        })
    }
}
