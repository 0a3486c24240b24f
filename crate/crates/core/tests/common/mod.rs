#![allow(dead_code)]

use dyps::accounting::PowerTrace;
use dyps::pipeline::{Message, MessageKind, RunOutput};
use dyps::{manifest_from_spec, ChunkSpec, PhaseKind, ProcessorId, Resolution, Segment, StreamManifest, Tag};
use rand::Rng;

pub const BITRATES: [(&str, &[f64]); 3] = [
    ("qcif", &[128.0, 256.0, 512.0, 1000.0]),
    ("cif", &[512.0, 1000.0, 2000.0, 4000.0]),
    ("4cif", &[2000.0, 4000.0, 8000.0]),
];

/// 1-20 chunks with random qualities covered by the bundled profile.
pub fn random_manifest<R: Rng>(rng: &mut R) -> StreamManifest {
    let n = rng.gen_range(1..=20);
    let specs: Vec<ChunkSpec> = (0..n)
        .map(|_| {
            let (res, rates) = BITRATES[rng.gen_range(0..BITRATES.len())];
            let kbps = rates[rng.gen_range(0..rates.len())];
            ChunkSpec::new(res, kbps, rng.gen_range(0.05..1.5))
        })
        .collect();
    manifest_from_spec(&specs, 30.0).unwrap()
}

/// Contiguous random trace starting at 0.
pub fn random_trace<R: Rng>(rng: &mut R) -> PowerTrace {
    let n = rng.gen_range(1..60);
    let mut t = 0.0;
    let segments = (0..n)
        .map(|_| {
            let d: f64 = rng.gen_range(0.05..50.0);
            let s = Segment {
                t_start_ms: t,
                t_end_ms: t + d,
                gpp_w: rng.gen_range(0.0..2.0),
                dsp_w: rng.gen_range(0.0..2.0),
                mem_w: rng.gen_range(0.0..0.5),
                tag: Tag::Phase(PhaseKind::ALL[rng.gen_range(0..PhaseKind::ALL.len())]),
                chunk: Some(0),
            };
            t = s.t_end_ms;
            s
        })
        .collect();
    PowerTrace::new(segments)
}

/// Midpoint Riemann sum of total power, in joules, at `step_ms` resolution.
///
/// Samples the trace independently of `integrate`: walks fixed time steps and
/// looks up the segment under each sample point.
pub fn riemann_energy_j(trace: &PowerTrace, step_ms: f64) -> f64 {
    let end = trace.segments.last().map_or(0.0, |s| s.t_end_ms);
    let steps = (end / step_ms).ceil() as u64;
    let mut seg = 0;
    let mut sum_w = 0.0;
    for i in 0..steps {
        let t = (i as f64 + 0.5) * step_ms;
        if t >= end {
            break;
        }
        while trace.segments[seg].t_end_ms <= t {
            seg += 1;
        }
        let s = &trace.segments[seg];
        sum_w += s.gpp_w + s.dsp_w + s.mem_w;
    }
    sum_w * step_ms * 1e-3
}

/// Straight per-segment duration x power sum.
pub fn phase_sum_j(trace: &PowerTrace) -> f64 {
    let mut total = 0.0;
    for s in &trace.segments {
        total += (s.t_end_ms - s.t_start_ms) / 1000.0 * (s.gpp_w + s.dsp_w + s.mem_w);
    }
    total
}

pub fn default_map(res: Resolution) -> ProcessorId {
    match res {
        Resolution::Qcif => ProcessorId::Gpp,
        Resolution::Cif | Resolution::FourCif => ProcessorId::Dsp,
    }
}

pub fn switch_messages(bus: &[Message]) -> Vec<(f64, usize)> {
    bus.iter()
        .filter_map(|m| match m.kind {
            MessageKind::SwitchPerformed { chunk_index, .. } => Some((m.t_ms, chunk_index)),
            _ => None,
        })
        .collect()
}

/// Violations of the seamless-switch rule in one run.
///
/// Every switch into chunk k must fall strictly after chunk k-1's last frame
/// phase and strictly before chunk k's first, and no phase may span it.
pub fn seamlessness_violations(out: &RunOutput) -> Vec<String> {
    let mut v = Vec::new();
    let phase_span = |chunk: usize| {
        let phases: Vec<&Segment> = out
            .trace
            .segments
            .iter()
            .filter(|s| s.chunk == Some(chunk) && matches!(s.tag, Tag::Phase(_)))
            .collect();
        (
            phases.first().map(|s| s.t_start_ms),
            phases.last().map(|s| s.t_end_ms),
        )
    };
    for (t, k) in switch_messages(&out.bus) {
        if k == 0 {
            v.push(format!("switch into chunk 0 at {t}"));
            continue;
        }
        let (_, prev_end) = phase_span(k - 1);
        let (next_start, _) = phase_span(k);
        if !(prev_end.is_some_and(|e| e < t) && next_start.is_some_and(|s| t < s)) {
            v.push(format!("switch at {t} into chunk {k}: prev end {prev_end:?}, next start {next_start:?}"));
        }
        if out
            .trace
            .segments
            .iter()
            .any(|s| matches!(s.tag, Tag::Phase(_)) && s.t_start_ms < t && t < s.t_end_ms)
        {
            v.push(format!("a frame phase spans switch time {t}"));
        }
    }
    v
}

/// Replays link/unlink messages; returns the largest number of simultaneously
/// linked decoders seen.
pub fn max_linked(bus: &[Message]) -> usize {
    let mut linked: Vec<ProcessorId> = Vec::new();
    let mut max = 0;
    for m in bus {
        match m.kind {
            MessageKind::PadLinked { decoder, .. } => linked.push(decoder),
            MessageKind::PadUnlinked { decoder, .. } => {
                if let Some(i) = linked.iter().position(|&d| d == decoder) {
                    linked.remove(i);
                }
            }
            _ => {}
        }
        max = max.max(linked.len());
    }
    max
}
