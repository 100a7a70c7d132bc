use std::path::{Path, PathBuf};

use semfield_core::field::NetworkArchitecture;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] semfield_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A file exists but its contents are wrong.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("checkpoint architecture {found:?} does not match the configured {expected:?}")]
    ArchitectureMismatch {
        expected: NetworkArchitecture,
        found: NetworkArchitecture,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 validation, 3 runtime.
    pub fn exit_code(&self) -> u8 {
        use semfield_core::Error as C;
        match self {
            Error::Usage(_) => 1,
            Error::Config(_) | Error::Format { .. } | Error::ArchitectureMismatch { .. } => 2,
            Error::Core(
                C::InvalidArchitecture(_)
                | C::InvalidConfig(_)
                | C::InvalidScene(_)
                | C::InvalidDataset(_)
                | C::InvalidLabel { .. }
                | C::EmptyDataset
                | C::NoPositiveRays
                | C::NoTargetPixels,
            ) => 2,
            Error::Core(_) | Error::Io { .. } => 3,
        }
    }
}
