//! Energy-aware switching of video decoding between a general-purpose
//! processor and a DSP, one chunk at a time.
//!
//! The crate simulates a GPP + DSP system-on-chip decoding an adaptive stream.
//! A streaming [`pipeline`] re-plugs the decoder at chunk boundaries according
//! to a [`policy`]; each frame expands into timed power phases from a
//! [`soc_model::DecodeProfile`]; [`accounting`] integrates the resulting power
//! trace into per-chunk energy reports.
//!
//! ```
//! use dyps::{bundled, simulate, Policy, ProcessorId};
//!
//! let profile = bundled::paper_profile();
//! let manifest = bundled::case_study_scenario().manifest().unwrap();
//! let switching = simulate(&manifest, &Policy::threshold(), &profile).unwrap();
//! let dsp_only = simulate(&manifest, &Policy::forced(ProcessorId::Dsp), &profile).unwrap();
//! assert_eq!(switching.report.switch_count, 1);
//! assert!(switching.report.total_energy_j < dsp_only.report.total_energy_j);
//! ```

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod bundled;
pub mod error;
pub mod media;
pub mod pipeline;
pub mod policy;
pub mod soc_model;

pub use accounting::{
    compare, energy_report, export_trace, import_trace, integrate, overhead_fractions, Comparison,
    EnergyReport, PowerTrace, Segment, Tag, TraceFormat,
};
pub use error::{Error, Result};
pub use media::{manifest_from_spec, ChunkSpec, Resolution, Scenario, StreamManifest, VideoQuality};
pub use pipeline::{build_pipeline, simulate, Message, MessageKind, Pipeline, RunOutput};
pub use policy::{select_processor, Policy, ProcessorSelector};
pub use soc_model::{
    frame_energy, frame_timeline, lookup_profile, switch_cost, DecodeProfile, Phase, PhaseKind,
    ProcessorId,
};
