use std::io;

use crate::media::Resolution;
use crate::soc_model::ProcessorId;

/// Errors raised while building or running a simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown resolution `{0}` (expected qcif, cif or 4cif)")]
    UnknownResolution(String),

    #[error("{field} must be positive, got {value}")]
    NonPositiveValue { field: &'static str, value: f64 },

    #[error("manifest has no chunks")]
    EmptyManifest,

    #[error(
        "no profile entry for (proc={proc}, resolution={resolution}, bitrate={bitrate_kbps} kbps, clock={clock_mhz} MHz)"
    )]
    ProfileMiss {
        proc: ProcessorId,
        resolution: Resolution,
        bitrate_kbps: f64,
        clock_mhz: f64,
    },

    #[error("phase template is empty")]
    EmptyTemplate,

    #[error("end-of-stream for chunk {0} without an active pad")]
    EosWithoutActivePad(usize),

    #[error("pipeline must be in state {expected} to {action}")]
    InvalidState {
        expected: &'static str,
        action: &'static str,
    },

    #[error("malformed trace at segment {index}: {reason}")]
    MalformedTrace { index: usize, reason: String },

    #[error("reports were produced from different manifests")]
    ManifestMismatch,

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
