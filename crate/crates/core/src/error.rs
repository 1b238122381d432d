use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("calibration failure: vacuum variance {vacuum} does not exceed electronic variance {electronic}")]
    Calibration { vacuum: f64, electronic: f64 },
    #[error("frame format: {0}")]
    Format(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("phase tracking diverged in frame {frame_id}: covariance {p_cov}")]
    Tracking { frame_id: u64, p_cov: f64 },
    #[error("sync failure in frame {frame_id}: peak ratio {ratio:.2}")]
    Sync { frame_id: u64, ratio: f64 },
    #[error("frame {frame_id}: {source}")]
    InFrame {
        frame_id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
