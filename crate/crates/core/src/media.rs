//! Video qualities, chunks and chunked stream manifests.
//!
//! A stream is a sequence of independently decodable chunks, each with exactly
//! one quality. Chunk boundaries are the only points where quality (and hence
//! the decoding processor) may change.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::policy::Policy;

/// Display rate used when a scenario does not set one.
pub const DEFAULT_FRAMERATE_HZ: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "qcif")]
    Qcif,
    #[serde(rename = "cif")]
    Cif,
    #[serde(rename = "4cif")]
    FourCif,
}

impl Resolution {
    pub const ALL: [Resolution; 3] = [Resolution::Qcif, Resolution::Cif, Resolution::FourCif];

    pub fn width(self) -> u32 {
        match self {
            Resolution::Qcif => 176,
            Resolution::Cif => 352,
            Resolution::FourCif => 704,
        }
    }

    pub fn height(self) -> u32 {
        match self {
            Resolution::Qcif => 144,
            Resolution::Cif => 288,
            Resolution::FourCif => 576,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Resolution::Qcif => "qcif",
            Resolution::Cif => "cif",
            Resolution::FourCif => "4cif",
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qcif" => Ok(Resolution::Qcif),
            "cif" => Ok(Resolution::Cif),
            "4cif" => Ok(Resolution::FourCif),
            _ => Err(Error::UnknownResolution(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoQuality {
    pub resolution: Resolution,
    pub bitrate_kbps: f64,
    pub framerate_hz: f64,
}

impl VideoQuality {
    pub fn new(resolution: Resolution, bitrate_kbps: f64, framerate_hz: f64) -> Result<Self> {
        check_positive("bitrate_kbps", bitrate_kbps)?;
        check_positive("framerate_hz", framerate_hz)?;
        Ok(Self {
            resolution,
            bitrate_kbps,
            framerate_hz,
        })
    }

    /// Quality at the default 30 Hz display rate.
    pub fn at_default_rate(resolution: Resolution, bitrate_kbps: f64) -> Result<Self> {
        Self::new(resolution, bitrate_kbps, DEFAULT_FRAMERATE_HZ)
    }

    /// Display period of one frame in milliseconds.
    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.framerate_hz
    }
}

impl fmt::Display for VideoQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}kbps", self.resolution, self.bitrate_kbps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub index: usize,
    pub quality: VideoQuality,
    pub duration_s: f64,
    pub frame_count: u64,
}

/// One chunk as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSpec {
    pub resolution: String,
    pub bitrate_kbps: f64,
    pub duration_s: f64,
}

impl ChunkSpec {
    pub fn new(resolution: &str, bitrate_kbps: f64, duration_s: f64) -> Self {
        Self {
            resolution: resolution.to_string(),
            bitrate_kbps,
            duration_s,
        }
    }
}

/// Ordered, non-empty list of chunks sharing one framerate.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamManifest {
    framerate_hz: f64,
    chunks: Vec<Chunk>,
}

impl StreamManifest {
    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn framerate_hz(&self) -> f64 {
        self.framerate_hz
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn total_frames(&self) -> u64 {
        self.chunks.iter().map(|c| c.frame_count).sum()
    }

    pub fn to_specs(&self) -> Vec<ChunkSpec> {
        self.chunks
            .iter()
            .map(|c| ChunkSpec {
                resolution: c.quality.resolution.name().to_string(),
                bitrate_kbps: c.quality.bitrate_kbps,
                duration_s: c.duration_s,
            })
            .collect()
    }

    /// Hex SHA-256 over the canonical scenario encoding of the chunk list.
    pub fn content_hash(&self) -> String {
        let scenario = Scenario {
            framerate_hz: self.framerate_hz,
            chunks: self.to_specs(),
            policy: None,
        };
        let canonical = serde_json::to_string(&scenario).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Builds a manifest from `(resolution, bitrate, duration)` triples.
///
/// Frame counts are `round(duration * framerate)`, never less than one.
pub fn manifest_from_spec(spec: &[ChunkSpec], framerate_hz: f64) -> Result<StreamManifest> {
    check_positive("framerate_hz", framerate_hz)?;
    if spec.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let chunks = spec
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let resolution: Resolution = s.resolution.parse()?;
            check_positive("duration_s", s.duration_s)?;
            let quality = VideoQuality::new(resolution, s.bitrate_kbps, framerate_hz)?;
            let frame_count = ((s.duration_s * framerate_hz).round() as u64).max(1);
            Ok(Chunk {
                index,
                quality,
                duration_s: s.duration_s,
                frame_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StreamManifest {
        framerate_hz,
        chunks,
    })
}

/// Scenario file: `{"framerate_hz":30, "chunks":[...], "policy":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_framerate")]
    pub framerate_hz: f64,
    pub chunks: Vec<ChunkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
}

fn default_framerate() -> f64 {
    DEFAULT_FRAMERATE_HZ
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_manifest(manifest: &StreamManifest, policy: Option<Policy>) -> Self {
        Self {
            framerate_hz: manifest.framerate_hz,
            chunks: manifest.to_specs(),
            policy,
        }
    }

    pub fn manifest(&self) -> Result<StreamManifest> {
        manifest_from_spec(&self.chunks, self.framerate_hz)
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveValue { field, value })
    }
}
