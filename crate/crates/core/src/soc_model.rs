//! GPP + DSP system-on-chip model.
//!
//! A [`DecodeProfile`] maps `(processor, resolution, bitrate band, clock)` to a
//! per-frame template of power phases. A DSP frame decode is an offload cycle
//! driven by the GPP: cache write-back, parameter transfer, DSP cache
//! invalidation, the decode itself with its DMA tail, return status and GPP
//! wakeup. A GPP frame decode is a single `GppDecode` phase.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Resolution, VideoQuality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcessorId {
    #[serde(rename = "GPP")]
    Gpp,
    #[serde(rename = "DSP")]
    Dsp,
}

impl ProcessorId {
    pub const ALL: [ProcessorId; 2] = [ProcessorId::Gpp, ProcessorId::Dsp];

    pub fn other(self) -> ProcessorId {
        match self {
            ProcessorId::Gpp => ProcessorId::Dsp,
            ProcessorId::Dsp => ProcessorId::Gpp,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProcessorId::Gpp => "GPP",
            ProcessorId::Dsp => "DSP",
        }
    }
}

impl fmt::Display for ProcessorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcessorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "GPP" | "ARM" => Ok(ProcessorId::Gpp),
            "DSP" => Ok(ProcessorId::Dsp),
            _ => Err(format!("unknown processor `{s}` (expected GPP or DSP)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessorConfig {
    pub id: ProcessorId,
    pub clock_mhz: f64,
    pub idle_w: f64,
    /// Busy power outside any decode template; used for the default relink cost.
    pub active_w: f64,
    #[serde(default)]
    pub wakeup_latency_ms: f64,
    #[serde(default)]
    pub wakeup_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseKind {
    GppCacheWriteBack,
    ParamTransfer,
    DspCacheInvalidate,
    GppIdleWait,
    DspDecode,
    DmaTransfer,
    ReturnStatus,
    GppWakeup,
    GppDecode,
}

impl PhaseKind {
    pub const ALL: [PhaseKind; 9] = [
        PhaseKind::GppCacheWriteBack,
        PhaseKind::ParamTransfer,
        PhaseKind::DspCacheInvalidate,
        PhaseKind::GppIdleWait,
        PhaseKind::DspDecode,
        PhaseKind::DmaTransfer,
        PhaseKind::ReturnStatus,
        PhaseKind::GppWakeup,
        PhaseKind::GppDecode,
    ];

    /// Processor whose rail carries this phase's `processor_w`.
    pub fn owner(self) -> ProcessorId {
        match self {
            PhaseKind::GppCacheWriteBack
            | PhaseKind::ParamTransfer
            | PhaseKind::GppIdleWait
            | PhaseKind::GppWakeup
            | PhaseKind::GppDecode => ProcessorId::Gpp,
            PhaseKind::DspCacheInvalidate
            | PhaseKind::DspDecode
            | PhaseKind::DmaTransfer
            | PhaseKind::ReturnStatus => ProcessorId::Dsp,
        }
    }

    /// Decoding work proper; everything else is offload overhead.
    pub fn is_decode(self) -> bool {
        matches!(
            self,
            PhaseKind::DspDecode | PhaseKind::DmaTransfer | PhaseKind::GppDecode
        )
    }

    /// Which decode path (the decoder processor) this phase belongs to.
    pub fn path(self) -> ProcessorId {
        match self {
            PhaseKind::GppDecode => ProcessorId::Gpp,
            _ => ProcessorId::Dsp,
        }
    }

    /// Position in the DSP offload cycle. `None` for the GPP path.
    fn dsp_cycle_rank(self) -> Option<u8> {
        match self {
            PhaseKind::GppCacheWriteBack => Some(0),
            PhaseKind::ParamTransfer => Some(1),
            PhaseKind::DspCacheInvalidate => Some(2),
            PhaseKind::GppIdleWait => Some(3),
            PhaseKind::DspDecode => Some(4),
            PhaseKind::DmaTransfer => Some(5),
            PhaseKind::ReturnStatus => Some(6),
            PhaseKind::GppWakeup => Some(7),
            PhaseKind::GppDecode => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseKind::GppCacheWriteBack => "GppCacheWriteBack",
            PhaseKind::ParamTransfer => "ParamTransfer",
            PhaseKind::DspCacheInvalidate => "DspCacheInvalidate",
            PhaseKind::GppIdleWait => "GppIdleWait",
            PhaseKind::DspDecode => "DspDecode",
            PhaseKind::DmaTransfer => "DmaTransfer",
            PhaseKind::ReturnStatus => "ReturnStatus",
            PhaseKind::GppWakeup => "GppWakeup",
            PhaseKind::GppDecode => "GppDecode",
        }
    }
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PhaseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown phase kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RailPower {
    #[serde(rename = "proc_w")]
    pub processor_w: f64,
    #[serde(rename = "mem_w", default)]
    pub memory_w: f64,
}

impl RailPower {
    pub fn new(processor_w: f64, memory_w: f64) -> Self {
        Self {
            processor_w,
            memory_w,
        }
    }

    pub fn total_w(&self) -> f64 {
        self.processor_w + self.memory_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    #[serde(rename = "ms")]
    pub duration_ms: f64,
    #[serde(flatten)]
    pub power: RailPower,
}

impl Phase {
    pub fn new(kind: PhaseKind, duration_ms: f64, processor_w: f64, memory_w: f64) -> Self {
        Self {
            kind,
            duration_ms,
            power: RailPower::new(processor_w, memory_w),
        }
    }

    pub fn energy_j(&self) -> f64 {
        self.duration_ms * 1e-3 * self.power.total_w()
    }
}

/// Half-open bitrate band `[lo, hi)` in kbps, written as `[lo, hi]` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct BitrateBand {
    pub lo: f64,
    pub hi: f64,
}

impl BitrateBand {
    pub fn contains(&self, kbps: f64) -> bool {
        self.lo <= kbps && kbps < self.hi
    }

    pub fn overlaps(&self, other: &BitrateBand) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

impl From<[f64; 2]> for BitrateBand {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<BitrateBand> for [f64; 2] {
    fn from(b: BitrateBand) -> Self {
        [b.lo, b.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub proc: ProcessorId,
    pub resolution: Resolution,
    pub bitrate_kbps: BitrateBand,
    pub clock_mhz: f64,
    pub phases: Vec<Phase>,
}

impl ProfileEntry {
    pub fn span_ms(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_ms).sum()
    }

    /// True when one frame fits in the display period at `framerate_hz`.
    pub fn is_real_time(&self, framerate_hz: f64) -> bool {
        self.span_ms() <= 1000.0 / framerate_hz
    }
}

/// Cost of relinking the demuxer to a different decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchCostConfig {
    pub duration_ms: f64,
    /// Power above GPP idle while the relink runs.
    pub power_w: f64,
}

pub const DEFAULT_SWITCH_DURATION_MS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchCost {
    pub duration_ms: f64,
    pub energy_j: f64,
}

/// Profile file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeProfile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub processors: Vec<ProcessorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_cost: Option<SwitchCostConfig>,
    pub entries: Vec<ProfileEntry>,
}

impl DecodeProfile {
    /// Parses and validates a profile.
    pub fn from_json(text: &str) -> Result<Self> {
        let profile: DecodeProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    /// Checks every profile invariant, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));

        for id in ProcessorId::ALL {
            let n = self.processors.iter().filter(|p| p.id == id).count();
            if n != 1 {
                return bad(format!("expected exactly one {id} processor, found {n}"));
            }
        }
        for p in &self.processors {
            if !(p.clock_mhz > 0.0) {
                return bad(format!("{} clock_mhz must be positive", p.id));
            }
            for (name, v) in [
                ("idle_w", p.idle_w),
                ("active_w", p.active_w),
                ("wakeup_latency_ms", p.wakeup_latency_ms),
                ("wakeup_w", p.wakeup_w),
            ] {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("{} {name} must be non-negative", p.id));
                }
            }
        }
        if let Some(sc) = &self.switch_cost {
            if !(sc.duration_ms >= 0.0) || !(sc.power_w >= 0.0) {
                return bad("switch_cost values must be non-negative".into());
            }
        }
        if self.entries.is_empty() {
            return bad("entries list is empty".into());
        }

        for (i, e) in self.entries.iter().enumerate() {
            let label = format!("entry {i} ({}, {}, {} MHz)", e.proc, e.resolution, e.clock_mhz);
            if !(e.bitrate_kbps.lo >= 0.0 && e.bitrate_kbps.lo < e.bitrate_kbps.hi) {
                return bad(format!("{label}: bitrate band must satisfy 0 <= lo < hi"));
            }
            if !(e.clock_mhz > 0.0) {
                return bad(format!("{label}: clock_mhz must be positive"));
            }
            if e.phases.is_empty() {
                return bad(format!("{label}: phase list is empty"));
            }
            for ph in &e.phases {
                if !(ph.duration_ms >= 0.0) || !ph.duration_ms.is_finite() {
                    return bad(format!("{label}: {} has negative duration", ph.kind));
                }
                if !(ph.power.processor_w >= 0.0 && ph.power.memory_w >= 0.0) {
                    return bad(format!("{label}: {} has negative power", ph.kind));
                }
                if ph.kind.path() != e.proc {
                    return bad(format!("{label}: phase {} does not belong to the {} path", ph.kind, e.proc));
                }
            }
            if !(e.span_ms() > 0.0) {
                return bad(format!("{label}: total phase duration must be positive"));
            }
            let required = match e.proc {
                ProcessorId::Gpp => PhaseKind::GppDecode,
                ProcessorId::Dsp => PhaseKind::DspDecode,
            };
            if !e.phases.iter().any(|p| p.kind == required) {
                return bad(format!("{label}: missing {required} phase"));
            }
            if e.proc == ProcessorId::Dsp {
                let ranks: Vec<u8> = e.phases.iter().filter_map(|p| p.kind.dsp_cycle_rank()).collect();
                if ranks.windows(2).any(|w| w[0] > w[1]) {
                    return bad(format!("{label}: phases are out of offload-cycle order"));
                }
            }
            for (j, other) in self.entries.iter().enumerate().skip(i + 1) {
                if other.proc == e.proc
                    && other.resolution == e.resolution
                    && other.clock_mhz == e.clock_mhz
                    && other.bitrate_kbps.overlaps(&e.bitrate_kbps)
                {
                    return bad(format!("{label}: bitrate band overlaps entry {j}"));
                }
            }
        }
        Ok(())
    }

    pub fn processor(&self, id: ProcessorId) -> &ProcessorConfig {
        self.processors
            .iter()
            .find(|p| p.id == id)
            .expect("validated profile has both processors")
    }

    /// Phase template for `(proc, quality, clock)`.
    pub fn lookup(&self, proc: ProcessorId, q: &VideoQuality, clock_mhz: f64) -> Result<&[Phase]> {
        self.entries
            .iter()
            .find(|e| {
                e.proc == proc
                    && e.resolution == q.resolution
                    && e.clock_mhz == clock_mhz
                    && e.bitrate_kbps.contains(q.bitrate_kbps)
            })
            .map(|e| e.phases.as_slice())
            .ok_or(Error::ProfileMiss {
                proc,
                resolution: q.resolution,
                bitrate_kbps: q.bitrate_kbps,
                clock_mhz,
            })
    }

    /// Template at the processor's configured clock.
    pub fn lookup_at_configured_clock(&self, proc: ProcessorId, q: &VideoQuality) -> Result<&[Phase]> {
        self.lookup(proc, q, self.processor(proc).clock_mhz)
    }

    /// Relink cost, defaulting to 5 ms at GPP active-minus-idle power.
    pub fn switch_cost_config(&self) -> SwitchCostConfig {
        self.switch_cost.unwrap_or_else(|| {
            let gpp = self.processor(ProcessorId::Gpp);
            SwitchCostConfig {
                duration_ms: DEFAULT_SWITCH_DURATION_MS,
                power_w: (gpp.active_w - gpp.idle_w).max(0.0),
            }
        })
    }

    /// Real-time capability of every entry at `framerate_hz`, in file order.
    pub fn real_time_report(&self, framerate_hz: f64) -> Vec<EntryCapability> {
        self.entries
            .iter()
            .map(|e| EntryCapability {
                proc: e.proc,
                resolution: e.resolution,
                bitrate_kbps: e.bitrate_kbps,
                clock_mhz: e.clock_mhz,
                span_ms: e.span_ms(),
                real_time: e.is_real_time(framerate_hz),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryCapability {
    pub proc: ProcessorId,
    pub resolution: Resolution,
    pub bitrate_kbps: BitrateBand,
    pub clock_mhz: f64,
    pub span_ms: f64,
    pub real_time: bool,
}

/// Free-function form of [`DecodeProfile::lookup`].
pub fn lookup_profile<'p>(
    profile: &'p DecodeProfile,
    proc: ProcessorId,
    q: &VideoQuality,
    clock_mhz: f64,
) -> Result<&'p [Phase]> {
    profile.lookup(proc, q, clock_mhz)
}

/// A phase placed on the absolute simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTimeline {
    pub frame_index: u64,
    pub start_ms: f64,
    pub spans: Vec<PhaseSpan>,
}

impl FrameTimeline {
    pub fn end_ms(&self) -> f64 {
        self.spans.last().map_or(self.start_ms, |s| s.end_ms)
    }

    pub fn span_ms(&self) -> f64 {
        self.spans.iter().map(|s| s.phase.duration_ms).sum()
    }
}

/// Lays a phase template out contiguously from `start_ms`.
///
/// Zero-duration phases are dropped; they contribute neither time nor energy.
pub fn frame_timeline(template: &[Phase], frame_index: u64, start_ms: f64) -> Result<FrameTimeline> {
    if template.is_empty() {
        return Err(Error::EmptyTemplate);
    }
    let mut cursor = start_ms;
    let spans = template
        .iter()
        .filter(|p| p.duration_ms > 0.0)
        .map(|&phase| {
            let span = PhaseSpan {
                phase,
                start_ms: cursor,
                end_ms: cursor + phase.duration_ms,
            };
            cursor = span.end_ms;
            span
        })
        .collect();
    Ok(FrameTimeline {
        frame_index,
        start_ms,
        spans,
    })
}

/// Energy of one frame, split by rail and by decode vs. overhead.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameEnergy {
    pub gpp_j: f64,
    pub dsp_j: f64,
    pub memory_j: f64,
    pub decode_j: f64,
    pub overhead_j: f64,
    pub decode_ms: f64,
    pub overhead_ms: f64,
}

impl FrameEnergy {
    pub fn total_j(&self) -> f64 {
        self.decode_j + self.overhead_j
    }

    pub fn overhead_time_fraction(&self) -> f64 {
        fraction(self.overhead_ms, self.decode_ms + self.overhead_ms)
    }

    pub fn overhead_energy_fraction(&self) -> f64 {
        fraction(self.overhead_j, self.total_j())
    }

    pub fn rail_j(&self, proc: ProcessorId) -> f64 {
        match proc {
            ProcessorId::Gpp => self.gpp_j,
            ProcessorId::Dsp => self.dsp_j,
        }
    }
}

pub(crate) fn fraction(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        part / whole
    } else {
        0.0
    }
}

pub fn frame_energy(timeline: &FrameTimeline) -> FrameEnergy {
    template_energy(timeline.spans.iter().map(|s| &s.phase))
}

/// Energy of a phase template without placing it on the clock.
pub fn template_energy<'a>(phases: impl IntoIterator<Item = &'a Phase>) -> FrameEnergy {
    let mut e = FrameEnergy::default();
    for p in phases {
        let secs = p.duration_ms * 1e-3;
        let proc_j = secs * p.power.processor_w;
        let mem_j = secs * p.power.memory_w;
        match p.kind.owner() {
            ProcessorId::Gpp => e.gpp_j += proc_j,
            ProcessorId::Dsp => e.dsp_j += proc_j,
        }
        e.memory_j += mem_j;
        if p.kind.is_decode() {
            e.decode_j += proc_j + mem_j;
            e.decode_ms += p.duration_ms;
        } else {
            e.overhead_j += proc_j + mem_j;
            e.overhead_ms += p.duration_ms;
        }
    }
    e
}

pub fn switch_cost(config: &SwitchCostConfig, from: ProcessorId, to: ProcessorId) -> SwitchCost {
    if from == to {
        SwitchCost {
            duration_ms: 0.0,
            energy_j: 0.0,
        }
    } else {
        SwitchCost {
            duration_ms: config.duration_ms,
            energy_j: config.duration_ms * 1e-3 * config.power_w,
        }
    }
}
