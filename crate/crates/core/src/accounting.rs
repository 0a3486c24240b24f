//! Power traces, energy integration and reports.
//!
//! A [`PowerTrace`] is piecewise constant: contiguous segments, each with a
//! GPP, DSP and memory rail level. Each segment has an owner processor (the
//! one doing the work, or idling on behalf of the active decoder). Owner rail
//! plus memory is charged to the segment's chunk; the other processor's rail
//! goes to a baseline bucket. Relink segments charge the GPP's power above idle
//! to the switch bucket.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::Resolution;
use crate::soc_model::{fraction, PhaseKind, ProcessorConfig, ProcessorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Tag {
    Phase(PhaseKind),
    /// Idle filler up to the next frame slot, on the given processor.
    Idle(ProcessorId),
    /// Decoder relink.
    Switch,
}

impl Tag {
    pub fn owner(self) -> ProcessorId {
        match self {
            Tag::Phase(k) => k.owner(),
            Tag::Idle(p) => p,
            Tag::Switch => ProcessorId::Gpp,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Phase(k) => f.write_str(k.name()),
            Tag::Idle(p) => write!(f, "Idle.{p}"),
            Tag::Switch => f.write_str("Switch"),
        }
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "Switch" {
            Ok(Tag::Switch)
        } else if let Some(p) = s.strip_prefix("Idle.") {
            Ok(Tag::Idle(p.parse()?))
        } else {
            Ok(Tag::Phase(s.parse()?))
        }
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for Tag {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start_ms: f64,
    pub t_end_ms: f64,
    pub gpp_w: f64,
    pub dsp_w: f64,
    pub mem_w: f64,
    pub tag: Tag,
    pub chunk: Option<usize>,
}

impl Segment {
    pub fn duration_ms(&self) -> f64 {
        self.t_end_ms - self.t_start_ms
    }

    pub fn total_w(&self) -> f64 {
        self.gpp_w + self.dsp_w + self.mem_w
    }

    pub fn energy_j(&self) -> f64 {
        self.duration_ms() * 1e-3 * self.total_w()
    }

    pub fn rail_w(&self, proc: ProcessorId) -> f64 {
        match proc {
            ProcessorId::Gpp => self.gpp_w,
            ProcessorId::Dsp => self.dsp_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTrace {
    pub segments: Vec<Segment>,
}

impl PowerTrace {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn end_ms(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end_ms)
    }

    /// Contiguous, non-overlapping, strictly positive segments from t = 0.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0.0;
        for (index, s) in self.segments.iter().enumerate() {
            if s.t_start_ms != expected {
                let reason = if s.t_start_ms > expected { "gap" } else { "overlap" };
                return Err(Error::MalformedTrace {
                    index,
                    reason: format!("{reason}: starts at {} ms, expected {expected} ms", s.t_start_ms),
                });
            }
            if !(s.t_start_ms < s.t_end_ms) {
                return Err(Error::MalformedTrace {
                    index,
                    reason: format!("empty or reversed span [{}, {}]", s.t_start_ms, s.t_end_ms),
                });
            }
            if !(s.gpp_w >= 0.0 && s.dsp_w >= 0.0 && s.mem_w >= 0.0) {
                return Err(Error::MalformedTrace {
                    index,
                    reason: "negative rail power".into(),
                });
            }
            expected = s.t_end_ms;
        }
        Ok(())
    }
}

/// Exact integral of a trace, broken down several ways.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Integral {
    pub total_j: f64,
    pub gpp_j: f64,
    pub dsp_j: f64,
    pub mem_j: f64,
    pub per_tag: BTreeMap<Tag, f64>,
    pub per_chunk: BTreeMap<usize, f64>,
}

pub fn integrate(trace: &PowerTrace) -> Result<Integral> {
    trace.validate()?;
    let mut out = Integral::default();
    for s in &trace.segments {
        let secs = s.duration_ms() * 1e-3;
        let e = secs * s.total_w();
        out.total_j += e;
        out.gpp_j += secs * s.gpp_w;
        out.dsp_j += secs * s.dsp_w;
        out.mem_j += secs * s.mem_w;
        *out.per_tag.entry(s.tag).or_insert(0.0) += e;
        if let Some(c) = s.chunk {
            *out.per_chunk.entry(c).or_insert(0.0) += e;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OverheadFractions {
    pub time: f64,
    pub energy: f64,
}

/// Share of a chunk's frame phases that is not decoding (idle filler excluded).
///
/// Energy counts the owner rail plus memory, matching per-frame template energy.
pub fn overhead_fractions(trace: &PowerTrace, chunk_index: usize) -> OverheadFractions {
    let (mut over_ms, mut all_ms, mut over_j, mut all_j) = (0.0, 0.0, 0.0, 0.0);
    for s in trace.segments.iter().filter(|s| s.chunk == Some(chunk_index)) {
        let Tag::Phase(kind) = s.tag else { continue };
        let ms = s.duration_ms();
        let j = ms * 1e-3 * (s.rail_w(kind.owner()) + s.mem_w);
        all_ms += ms;
        all_j += j;
        if !kind.is_decode() {
            over_ms += ms;
            over_j += j;
        }
    }
    OverheadFractions {
        time: fraction(over_ms, all_ms),
        energy: fraction(over_j, all_j),
    }
}

/// Frame and timing facts about one chunk that a trace alone cannot carry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkStats {
    pub chunk_index: usize,
    pub resolution: Resolution,
    pub bitrate_kbps: f64,
    pub processor: ProcessorId,
    pub frames: u64,
    pub deadline_misses: u64,
    /// Playback time of the chunk's frame slots, relinks excluded.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub chunk_index: usize,
    pub resolution: Resolution,
    pub bitrate_kbps: f64,
    pub processor: ProcessorId,
    pub frames: u64,
    pub energy_j: f64,
    pub decode_energy_j: f64,
    pub overhead_energy_j: f64,
    pub idle_energy_j: f64,
    pub deadline_misses: u64,
    pub achieved_fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub manifest_hash: String,
    pub framerate_hz: f64,
    pub total_time_ms: f64,
    pub total_energy_j: f64,
    /// Idle energy of the processor not owning each segment.
    pub baseline_energy_j: f64,
    pub switch_count: usize,
    pub switch_time_ms: f64,
    pub switch_energy_j: f64,
    pub per_processor_energy_j: BTreeMap<ProcessorId, f64>,
    pub memory_energy_j: f64,
    pub frames_rendered: u64,
    pub deadline_misses: u64,
    pub chunks: Vec<ChunkReport>,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Derives the energy report from a trace plus per-chunk frame statistics.
pub fn energy_report(
    trace: &PowerTrace,
    processors: &[ProcessorConfig],
    manifest_hash: &str,
    framerate_hz: f64,
    stats: &[ChunkStats],
    switch_count: usize,
) -> Result<EnergyReport> {
    let integral = integrate(trace)?;
    let idle_w = |id: ProcessorId| {
        processors
            .iter()
            .find(|p| p.id == id)
            .map_or(0.0, |p| p.idle_w)
    };

    let mut chunks: Vec<ChunkReport> = stats
        .iter()
        .map(|s| ChunkReport {
            chunk_index: s.chunk_index,
            resolution: s.resolution,
            bitrate_kbps: s.bitrate_kbps,
            processor: s.processor,
            frames: s.frames,
            energy_j: 0.0,
            decode_energy_j: 0.0,
            overhead_energy_j: 0.0,
            idle_energy_j: 0.0,
            deadline_misses: s.deadline_misses,
            achieved_fps: if s.wall_ms > 0.0 {
                (s.frames as f64 * 1000.0 / s.wall_ms).min(framerate_hz)
            } else {
                0.0
            },
        })
        .collect();
    let slot: BTreeMap<usize, usize> = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| (c.chunk_index, i))
        .collect();

    let (mut baseline, mut switch_j, mut switch_ms) = (0.0, 0.0, 0.0);
    for (index, s) in trace.segments.iter().enumerate() {
        let secs = s.duration_ms() * 1e-3;
        let owner = s.tag.owner();
        let other = owner.other();
        if s.tag == Tag::Switch {
            let idle = idle_w(owner).min(s.rail_w(owner));
            switch_j += secs * (s.rail_w(owner) - idle);
            switch_ms += s.duration_ms();
            baseline += secs * (idle + s.rail_w(other) + s.mem_w);
            continue;
        }
        baseline += secs * s.rail_w(other);
        let attributed = secs * (s.rail_w(owner) + s.mem_w);
        let Some(&i) = s.chunk.and_then(|c| slot.get(&c)) else {
            return Err(Error::MalformedTrace {
                index,
                reason: format!("segment chunk {:?} has no chunk statistics", s.chunk),
            });
        };
        let c = &mut chunks[i];
        c.energy_j += attributed;
        match s.tag {
            Tag::Phase(k) if k.is_decode() => c.decode_energy_j += attributed,
            Tag::Phase(_) => c.overhead_energy_j += attributed,
            _ => c.idle_energy_j += attributed,
        }
    }

    Ok(EnergyReport {
        manifest_hash: manifest_hash.to_string(),
        framerate_hz,
        total_time_ms: trace.end_ms(),
        total_energy_j: integral.total_j,
        baseline_energy_j: baseline,
        switch_count,
        switch_time_ms: switch_ms,
        switch_energy_j: switch_j,
        per_processor_energy_j: BTreeMap::from([
            (ProcessorId::Gpp, integral.gpp_j),
            (ProcessorId::Dsp, integral.dsp_j),
        ]),
        memory_energy_j: integral.mem_j,
        frames_rendered: stats.iter().map(|s| s.frames).sum(),
        deadline_misses: stats.iter().map(|s| s.deadline_misses).sum(),
        chunks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saving {
    pub base_j: f64,
    pub variant_j: f64,
    /// `(base - variant) / base * 100`; negative when the variant uses more.
    pub saving_percent: f64,
}

impl Saving {
    fn new(base_j: f64, variant_j: f64) -> Self {
        let saving_percent = if base_j == 0.0 && variant_j == 0.0 {
            0.0
        } else {
            (base_j - variant_j) / base_j * 100.0
        };
        Self {
            base_j,
            variant_j,
            saving_percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Keyed by resolution; sums chunk energies of that resolution.
    pub per_quality: BTreeMap<Resolution, Saving>,
    pub total: Saving,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (res, s) in &self.per_quality {
            writeln!(f, "{res}: {:.1}% saving ({:.6} J -> {:.6} J)", s.saving_percent, s.base_j, s.variant_j)?;
        }
        write!(
            f,
            "total: {:.1}% saving ({:.6} J -> {:.6} J)",
            self.total.saving_percent, self.total.base_j, self.total.variant_j
        )
    }
}

pub fn compare(base: &EnergyReport, variant: &EnergyReport) -> Result<Comparison> {
    if base.manifest_hash != variant.manifest_hash || base.chunks.len() != variant.chunks.len() {
        return Err(Error::ManifestMismatch);
    }
    let mut sums: BTreeMap<Resolution, (f64, f64)> = BTreeMap::new();
    for (b, v) in base.chunks.iter().zip(&variant.chunks) {
        if b.chunk_index != v.chunk_index || b.resolution != v.resolution {
            return Err(Error::ManifestMismatch);
        }
        let e = sums.entry(b.resolution).or_default();
        e.0 += b.energy_j;
        e.1 += v.energy_j;
    }
    Ok(Comparison {
        per_quality: sums
            .into_iter()
            .map(|(r, (b, v))| (r, Saving::new(b, v)))
            .collect(),
        total: Saving::new(base.total_energy_j, variant.total_energy_j),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "json" => Ok(TraceFormat::Json),
            _ => Err(format!("unknown trace format `{s}` (expected csv or json)")),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["t_start_ms", "t_end_ms", "gpp_w", "dsp_w", "mem_w", "tag", "chunk"];

pub fn write_csv<W: Write>(trace: &PowerTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in &trace.segments {
        // f64 Display is the shortest exact round-trip form.
        w.write_record([
            s.t_start_ms.to_string(),
            s.t_end_ms.to_string(),
            s.gpp_w.to_string(),
            s.dsp_w.to_string(),
            s.mem_w.to_string(),
            s.tag.to_string(),
            s.chunk.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<PowerTrace> {
    let mut r = csv::Reader::from_reader(input);
    let mut segments = Vec::new();
    for (index, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::MalformedTrace {
            index,
            reason: format!("bad {what} field"),
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            rec.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad(what))
        };
        let tag = rec
            .get(5)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("tag"))?;
        let chunk = match rec.get(6) {
            Some("") | None => None,
            Some(v) => Some(v.parse().map_err(|_| bad("chunk"))?),
        };
        segments.push(Segment {
            t_start_ms: num(0, "t_start_ms")?,
            t_end_ms: num(1, "t_end_ms")?,
            gpp_w: num(2, "gpp_w")?,
            dsp_w: num(3, "dsp_w")?,
            mem_w: num(4, "mem_w")?,
            tag,
            chunk,
        });
    }
    Ok(PowerTrace { segments })
}

pub fn export_trace(trace: &PowerTrace, format: TraceFormat, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    match format {
        TraceFormat::Csv => write_csv(trace, file),
        TraceFormat::Json => {
            serde_json::to_writer(file, trace)?;
            Ok(())
        }
    }
}

pub fn import_trace(format: TraceFormat, path: &Path) -> Result<PowerTrace> {
    let file = File::open(path)?;
    match format {
        TraceFormat::Csv => read_csv(file),
        TraceFormat::Json => Ok(serde_json::from_reader(file)?),
    }
}
