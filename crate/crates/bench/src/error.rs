use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: robust_policy::Error,
    },
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Tags a core error with the module that raised it.
pub trait ModuleContext<T> {
    fn module(self, module: &'static str) -> Result<T>;
}

impl<T> ModuleContext<T> for robust_policy::Result<T> {
    fn module(self, module: &'static str) -> Result<T> {
        self.map_err(|source| BenchError::Module { module, source })
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
    let path = path.into();
    move |source| BenchError::Io { path, source }
}
