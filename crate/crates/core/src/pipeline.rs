//! Miniature streaming pipeline with dynamic decoder re-plugging.
//!
//! Topology: source -> demuxer -> {GPP decoder | DSP decoder} -> sink. Both
//! decoders exist from construction; only one is linked at a time. The
//! demuxer announces each chunk with a new source pad. The first pad is linked
//! straight away, later pads wait in a FIFO. Each end-of-stream drains the
//! current pad, pops the next one and links it to whichever decoder the policy
//! picks for its caps. That relink is where a processor switch happens.
//!
//! Everything runs on one simulated clock inside [`Pipeline::run`]; there is no
//! real concurrency.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::accounting::{energy_report, ChunkStats, EnergyReport, PowerTrace, Segment, Tag};
use crate::error::{Error, Result};
use crate::media::{StreamManifest, VideoQuality};
use crate::policy::ProcessorSelector;
use crate::soc_model::{frame_timeline, switch_cost, DecodeProfile, ProcessorId, SwitchCostConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Source,
    Demuxer,
    DecoderGpp,
    DecoderDsp,
    Sink,
}

impl ElementKind {
    pub fn decoder(proc: ProcessorId) -> ElementKind {
        match proc {
            ProcessorId::Gpp => ElementKind::DecoderGpp,
            ProcessorId::Dsp => ElementKind::DecoderDsp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub name: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadDirection {
    Src,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PadState {
    Pending,
    Linked,
    Drained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub quality: VideoQuality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pad {
    pub id: usize,
    pub chunk_index: usize,
    pub direction: PadDirection,
    pub caps: Caps,
    pub state: PadState,
    /// Decoder whose sink pad this pad feeds, while linked.
    pub peer: Option<ElementKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineState {
    Null,
    Playing,
    Done,
}

impl PipelineState {
    fn name(self) -> &'static str {
        match self {
            PipelineState::Null => "Null",
            PipelineState::Playing => "Playing",
            PipelineState::Done => "Done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MessageKind {
    NewPad {
        pad_id: usize,
        chunk_index: usize,
        caps: Caps,
    },
    PadLinked {
        pad_id: usize,
        chunk_index: usize,
        decoder: ProcessorId,
    },
    PadUnlinked {
        pad_id: usize,
        chunk_index: usize,
        decoder: ProcessorId,
    },
    Eos {
        chunk_index: usize,
    },
    SwitchPerformed {
        from: ProcessorId,
        to: ProcessorId,
        chunk_index: usize,
    },
    StateChanged {
        from: PipelineState,
        to: PipelineState,
    },
    Error {
        text: String,
    },
}

/// Bus message. The log is ordered by `t_ms`, ties in emission order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub t_ms: f64,
    #[serde(flatten)]
    pub kind: MessageKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub chunk_index: usize,
    pub frame_index: u64,
    pub processor: ProcessorId,
    pub start_ms: f64,
    pub decode_end_ms: f64,
    pub slot_end_ms: f64,
    pub deadline_miss: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: PowerTrace,
    pub report: EnergyReport,
    pub bus: Vec<Message>,
    pub frames: Vec<FrameRecord>,
}

pub struct Pipeline<'a> {
    manifest: &'a StreamManifest,
    selector: &'a dyn ProcessorSelector,
    profile: &'a DecodeProfile,
    switch_cost: SwitchCostConfig,
    elements: Vec<Element>,
    pads: Vec<Pad>,
    pad_queue: VecDeque<usize>,
    active_pad: Option<usize>,
    active_decoder: Option<ProcessorId>,
    previous_decoder: Option<ProcessorId>,
    clock_ms: f64,
    state: PipelineState,
    bus: Vec<Message>,
    segments: Vec<Segment>,
    frames: Vec<FrameRecord>,
    stats: Vec<ChunkStats>,
    switch_count: usize,
}

/// Instantiates both decoders and checks that the profile covers every
/// processor the policy may choose for every chunk.
pub fn build_pipeline<'a>(
    manifest: &'a StreamManifest,
    policy: &'a dyn ProcessorSelector,
    profile: &'a DecodeProfile,
) -> Result<Pipeline<'a>> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    for chunk in manifest.chunks() {
        for proc in policy.candidates(&chunk.quality) {
            profile.lookup_at_configured_clock(proc, &chunk.quality)?;
        }
    }
    Ok(Pipeline {
        manifest,
        selector: policy,
        profile,
        switch_cost: profile.switch_cost_config(),
        elements: vec![
            Element { kind: ElementKind::Source, name: "filesrc" },
            Element { kind: ElementKind::Demuxer, name: "demux" },
            Element { kind: ElementKind::DecoderGpp, name: "gpp_decoder" },
            Element { kind: ElementKind::DecoderDsp, name: "dsp_decoder" },
            Element { kind: ElementKind::Sink, name: "videosink" },
        ],
        pads: Vec::new(),
        pad_queue: VecDeque::new(),
        active_pad: None,
        active_decoder: None,
        previous_decoder: None,
        clock_ms: 0.0,
        state: PipelineState::Null,
        bus: Vec::new(),
        segments: Vec::new(),
        frames: Vec::new(),
        stats: Vec::new(),
        switch_count: 0,
    })
}

/// Builds and runs a pipeline in one call.
pub fn simulate(
    manifest: &StreamManifest,
    policy: &dyn ProcessorSelector,
    profile: &DecodeProfile,
) -> Result<RunOutput> {
    build_pipeline(manifest, policy, profile)?.run()
}

impl<'a> Pipeline<'a> {
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn pads(&self) -> &[Pad] {
        &self.pads
    }

    pub fn pad_queue_len(&self) -> usize {
        self.pad_queue.len()
    }

    pub fn active_decoder(&self) -> Option<ProcessorId> {
        self.active_decoder
    }

    pub fn state(&self) -> PipelineState {
        self.state
    }

    pub fn clock_ms(&self) -> f64 {
        self.clock_ms
    }

    pub fn bus(&self) -> &[Message] {
        &self.bus
    }

    fn emit(&mut self, kind: MessageKind) {
        self.bus.push(Message {
            t_ms: self.clock_ms,
            kind,
        });
    }

    fn set_state(&mut self, to: PipelineState) {
        let from = self.state;
        self.state = to;
        self.emit(MessageKind::StateChanged { from, to });
    }

    /// Creates the demuxer source pad for a chunk.
    pub fn demux_pad(&self, chunk_index: usize) -> Pad {
        Pad {
            id: self.pads.len(),
            chunk_index,
            direction: PadDirection::Src,
            caps: Caps {
                quality: self.manifest.chunks()[chunk_index].quality,
            },
            state: PadState::Pending,
            peer: None,
        }
    }

    /// New-pad handler: link now if no decoder is linked, else queue.
    pub fn on_new_pad(&mut self, mut pad: Pad) -> Result<()> {
        match self.state {
            PipelineState::Null => self.set_state(PipelineState::Playing),
            PipelineState::Playing => {}
            PipelineState::Done => {
                return Err(Error::InvalidState {
                    expected: "Playing",
                    action: "accept a new pad",
                })
            }
        }
        pad.id = self.pads.len();
        pad.state = PadState::Pending;
        pad.peer = None;
        let id = pad.id;
        self.emit(MessageKind::NewPad {
            pad_id: id,
            chunk_index: pad.chunk_index,
            caps: pad.caps,
        });
        self.pads.push(pad);
        if self.active_pad.is_none() {
            self.link(id)
        } else {
            self.pad_queue.push_back(id);
            Ok(())
        }
    }

    /// End-of-stream handler: drain the current pad, relink the next queued one.
    pub fn on_eos(&mut self, chunk_index: usize) -> Result<()> {
        let pad_id = match self.active_pad {
            Some(id) if self.pads[id].chunk_index == chunk_index => id,
            _ => return Err(Error::EosWithoutActivePad(chunk_index)),
        };
        self.emit(MessageKind::Eos { chunk_index });
        let decoder = self.active_decoder.take().expect("active pad implies a linked decoder");
        let pad = &mut self.pads[pad_id];
        pad.state = PadState::Drained;
        pad.peer = None;
        self.active_pad = None;
        self.previous_decoder = Some(decoder);
        self.emit(MessageKind::PadUnlinked {
            pad_id,
            chunk_index,
            decoder,
        });
        match self.pad_queue.pop_front() {
            Some(next) => self.link(next),
            None => {
                self.set_state(PipelineState::Done);
                Ok(())
            }
        }
    }

    fn link(&mut self, pad_id: usize) -> Result<()> {
        let chunk_index = self.pads[pad_id].chunk_index;
        let quality = self.pads[pad_id].caps.quality;
        let proc = self.selector.select(&quality, self.profile, self.previous_decoder)?;

        if let Some(from) = self.previous_decoder.filter(|&p| p != proc) {
            let cost = switch_cost(&self.switch_cost, from, proc);
            let start = self.clock_ms;
            let end = start + cost.duration_ms;
            if end > start {
                self.segments.push(Segment {
                    t_start_ms: start,
                    t_end_ms: end,
                    gpp_w: self.idle_w(ProcessorId::Gpp) + self.switch_cost.power_w,
                    dsp_w: self.idle_w(ProcessorId::Dsp),
                    mem_w: 0.0,
                    tag: Tag::Switch,
                    chunk: None,
                });
            }
            // Stamped mid-relink so it sits strictly between the two chunks' frames.
            self.clock_ms = start + 0.5 * cost.duration_ms;
            self.emit(MessageKind::SwitchPerformed {
                from,
                to: proc,
                chunk_index,
            });
            self.clock_ms = end;
            self.switch_count += 1;
        }

        let pad = &mut self.pads[pad_id];
        pad.state = PadState::Linked;
        pad.peer = Some(ElementKind::decoder(proc));
        self.active_pad = Some(pad_id);
        self.active_decoder = Some(proc);
        self.emit(MessageKind::PadLinked {
            pad_id,
            chunk_index,
            decoder: proc,
        });
        Ok(())
    }

    fn idle_w(&self, proc: ProcessorId) -> f64 {
        self.profile.processor(proc).idle_w
    }

    /// Decodes every frame of the chunk on the linked pad.
    fn play_active_chunk(&mut self) -> Result<()> {
        let pad_id = self.active_pad.ok_or(Error::InvalidState {
            expected: "Playing with a linked pad",
            action: "play a chunk",
        })?;
        let proc = self.active_decoder.expect("linked pad has a decoder");
        let (manifest, profile) = (self.manifest, self.profile);
        let chunk = &manifest.chunks()[self.pads[pad_id].chunk_index];
        let template = match profile.lookup_at_configured_clock(proc, &chunk.quality) {
            Ok(t) => t,
            Err(e) => {
                self.emit(MessageKind::Error { text: e.to_string() });
                return Err(e);
            }
        };
        let period = chunk.quality.frame_period_ms();
        let idle_active = self.idle_w(proc);
        let idle_other = self.idle_w(proc.other());
        let chunk_start = self.clock_ms;
        let mut misses = 0;

        for frame_index in 0..chunk.frame_count {
            let slot_start = self.clock_ms;
            let timeline = frame_timeline(template, frame_index, slot_start)?;
            for span in &timeline.spans {
                let owner = span.phase.kind.owner();
                let (gpp_w, dsp_w) = match owner {
                    ProcessorId::Gpp => (span.phase.power.processor_w, self.idle_w(ProcessorId::Dsp)),
                    ProcessorId::Dsp => (self.idle_w(ProcessorId::Gpp), span.phase.power.processor_w),
                };
                self.segments.push(Segment {
                    t_start_ms: span.start_ms,
                    t_end_ms: span.end_ms,
                    gpp_w,
                    dsp_w,
                    mem_w: span.phase.power.memory_w,
                    tag: Tag::Phase(span.phase.kind),
                    chunk: Some(chunk.index),
                });
            }
            let decode_end = timeline.end_ms();
            let slot_end = slot_start + period;
            let deadline_miss = decode_end > slot_end;
            if deadline_miss {
                misses += 1;
                self.clock_ms = decode_end;
            } else {
                if slot_end > decode_end {
                    let (gpp_w, dsp_w) = match proc {
                        ProcessorId::Gpp => (idle_active, idle_other),
                        ProcessorId::Dsp => (idle_other, idle_active),
                    };
                    self.segments.push(Segment {
                        t_start_ms: decode_end,
                        t_end_ms: slot_end,
                        gpp_w,
                        dsp_w,
                        mem_w: 0.0,
                        tag: Tag::Idle(proc),
                        chunk: Some(chunk.index),
                    });
                }
                self.clock_ms = slot_end;
            }
            self.frames.push(FrameRecord {
                chunk_index: chunk.index,
                frame_index,
                processor: proc,
                start_ms: slot_start,
                decode_end_ms: decode_end,
                slot_end_ms: self.clock_ms,
                deadline_miss,
            });
        }

        self.stats.push(ChunkStats {
            chunk_index: chunk.index,
            resolution: chunk.quality.resolution,
            bitrate_kbps: chunk.quality.bitrate_kbps,
            processor: proc,
            frames: chunk.frame_count,
            deadline_misses: misses,
            wall_ms: self.clock_ms - chunk_start,
        });
        Ok(())
    }

    /// Plays the whole manifest and returns trace, report and bus log.
    ///
    /// The demuxer looks one chunk ahead: the pad for chunk k+1 is announced
    /// as chunk k starts. Frames that overrun their display slot are counted
    /// as deadline misses and push later frames back; none are dropped.
    pub fn run(mut self) -> Result<RunOutput> {
        if self.state != PipelineState::Null {
            return Err(Error::InvalidState {
                expected: PipelineState::Null.name(),
                action: "run",
            });
        }
        self.set_state(PipelineState::Playing);
        let first = self.demux_pad(0);
        self.on_new_pad(first)?;

        let n = self.manifest.len();
        for k in 0..n {
            if k + 1 < n {
                let next = self.demux_pad(k + 1);
                self.on_new_pad(next)?;
            }
            self.play_active_chunk()?;
            self.on_eos(k)?;
        }
        debug_assert_eq!(self.state, PipelineState::Done);
        debug_assert!(self.pad_queue.is_empty());

        let trace = PowerTrace::new(self.segments);
        let report = energy_report(
            &trace,
            &self.profile.processors,
            &self.manifest.content_hash(),
            self.manifest.framerate_hz(),
            &self.stats,
            self.switch_count,
        )?;
        Ok(RunOutput {
            trace,
            report,
            bus: self.bus,
            frames: self.frames,
        })
    }
}

/// Writes the bus log as JSON lines.
pub fn write_bus_log<W: Write>(bus: &[Message], mut out: W) -> Result<()> {
    for m in bus {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_bus_log<R: BufRead>(input: R) -> Result<Vec<Message>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
