use std::path::Path;

use thiserror::Error;

use crate::config::ConfigError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_ALGORITHM: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: clothground::Error,
    },
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(clothground::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    pub fn write(stage: &'static str, path: &Path, source: std::io::Error) -> CliError {
        CliError::Stage {
            stage,
            source: clothground::Error::Io {
                path: path.to_path_buf(),
                source,
            },
        }
    }

    /// Process exit status: 2 configuration, 3 input/output, 4 algorithm.
    pub fn exit_code(&self) -> u8 {
        use clothground::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { stage, source } => match source {
                E::Io { .. }
                | E::MalformedHeader(_)
                | E::TruncatedBody { .. }
                | E::UnsupportedProperty(_)
                | E::UnsupportedFormat(_)
                | E::MalformedBody(_)
                | E::NonFiniteCoordinate { .. }
                | E::NonUnitQuaternion { .. } => EXIT_IO,
                E::InvalidParameter(_) if *stage == "load" || *stage == "merge" => EXIT_IO,
                E::InvalidParameter(_) | E::InvalidCellSize(_) | E::InvalidSpec(_) => EXIT_CONFIG,
                _ => EXIT_ALGORITHM,
            },
        }
    }
}
