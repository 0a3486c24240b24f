mod common;

use dyps::accounting::{energy_report, import_trace, ChunkStats, TraceFormat};
use dyps::pipeline::RunOutput;
use dyps::{
    bundled, export_trace, simulate, ChunkSpec, DecodeProfile, PhaseKind, Policy, ProcessorId, Resolution,
    StreamManifest, Tag,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn stats_of(out: &RunOutput) -> Vec<ChunkStats> {
    out.report
        .chunks
        .iter()
        .map(|c| {
            let frames: Vec<_> = out.frames.iter().filter(|f| f.chunk_index == c.chunk_index).collect();
            ChunkStats {
                chunk_index: c.chunk_index,
                resolution: c.resolution,
                bitrate_kbps: c.bitrate_kbps,
                processor: c.processor,
                frames: c.frames,
                deadline_misses: c.deadline_misses,
                wall_ms: frames.last().unwrap().slot_end_ms - frames.first().unwrap().start_ms,
            }
        })
        .collect()
}

fn arb_manifest() -> impl Strategy<Value = StreamManifest> {
    any::<u64>().prop_map(|seed| common::random_manifest(&mut ChaCha8Rng::seed_from_u64(seed)))
}

fn arb_policy() -> impl Strategy<Value = Policy> {
    prop_oneof![
        Just(Policy::threshold()),
        Just(Policy::EnergyArgmin),
        Just(Policy::forced(ProcessorId::Gpp)),
        Just(Policy::forced(ProcessorId::Dsp)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_buckets_sum_to_total(m in arb_manifest(), policy in arb_policy()) {
        let profile = bundled::paper_profile();
        let out = simulate(&m, &policy, &profile).unwrap();
        let r = &out.report;
        let parts: f64 = r.chunks.iter().map(|c| c.energy_j).sum::<f64>() + r.switch_energy_j + r.baseline_energy_j;
        prop_assert!(rel_close(parts, r.total_energy_j, 1e-9), "{parts} vs {}", r.total_energy_j);
        for c in &r.chunks {
            prop_assert!(c.achieved_fps <= r.framerate_hz);
            prop_assert!(rel_close(c.decode_energy_j + c.overhead_energy_j + c.idle_energy_j, c.energy_j, 1e-9));
        }
    }

    #[test]
    fn report_rederives_from_exported_trace(m in arb_manifest(), policy in arb_policy()) {
        let profile = bundled::paper_profile();
        let out = simulate(&m, &policy, &profile).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        export_trace(&out.trace, TraceFormat::Csv, &path).unwrap();
        let back = import_trace(TraceFormat::Csv, &path).unwrap();
        prop_assert_eq!(&back, &out.trace);
        let again = energy_report(&back, &profile.processors, &m.content_hash(), m.framerate_hz(), &stats_of(&out), out.report.switch_count).unwrap();
        prop_assert!(rel_close(again.total_energy_j, out.report.total_energy_j, 1e-9));
        prop_assert!(rel_close(again.baseline_energy_j, out.report.baseline_energy_j, 1e-9));
        prop_assert!(rel_close(again.switch_energy_j + 1.0, out.report.switch_energy_j + 1.0, 1e-9));
        for (a, b) in again.chunks.iter().zip(&out.report.chunks) {
            prop_assert!(rel_close(a.energy_j, b.energy_j, 1e-9));
            prop_assert!(rel_close(a.decode_energy_j, b.decode_energy_j, 1e-9));
            prop_assert!(rel_close(a.overhead_energy_j + 1.0, b.overhead_energy_j + 1.0, 1e-9));
        }
        prop_assert_eq!(again, out.report);
    }

    #[test]
    fn one_decoder_linked_at_a_time(m in arb_manifest(), policy in arb_policy()) {
        let profile = bundled::paper_profile();
        let out = simulate(&m, &policy, &profile).unwrap();
        prop_assert_eq!(common::max_linked(&out.bus), 1);
        for w in out.bus.windows(2) {
            prop_assert!(w[0].t_ms <= w[1].t_ms);
        }
    }

    #[test]
    fn frames_are_conserved_and_disjoint(m in arb_manifest(), policy in arb_policy()) {
        let profile = bundled::paper_profile();
        let out = simulate(&m, &policy, &profile).unwrap();
        prop_assert_eq!(out.frames.len() as u64, m.total_frames());
        prop_assert!(out.trace.validate().is_ok());
        for w in out.frames.windows(2) {
            prop_assert!(w[0].slot_end_ms <= w[1].start_ms);
            prop_assert!(w[0].decode_end_ms <= w[0].slot_end_ms);
        }
        let decode_phases = out.trace.segments.iter().filter(|s| matches!(s.tag, Tag::Phase(PhaseKind::GppDecode | PhaseKind::DspDecode))).count() as u64;
        prop_assert_eq!(decode_phases, m.total_frames());
    }

    #[test]
    fn switch_time_is_bounded(m in arb_manifest(), policy in arb_policy()) {
        let profile = bundled::paper_profile();
        let cost = profile.switch_cost_config();
        let out = simulate(&m, &policy, &profile).unwrap();
        prop_assert!(out.report.switch_time_ms <= out.report.switch_count as f64 * cost.duration_ms + 1e-9);
        prop_assert!(common::seamlessness_violations(&out).is_empty());
    }

    // The processor used for a chunk depends only on its quality.
    #[test]
    fn assignment_survives_permutation(m in arb_manifest(), seed in any::<u64>(), policy in prop_oneof![Just(Policy::threshold()), Just(Policy::EnergyArgmin)]) {
        use rand::seq::SliceRandom;
        let profile = bundled::paper_profile();
        let mut specs = m.to_specs();
        specs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = dyps::manifest_from_spec(&specs, m.framerate_hz()).unwrap();
        let key = |r: &dyps::accounting::ChunkReport| (r.resolution, r.bitrate_kbps.to_bits());
        let a = simulate(&m, &policy, &profile).unwrap();
        let b = simulate(&shuffled, &policy, &profile).unwrap();
        let mut map = std::collections::BTreeMap::new();
        for c in a.report.chunks.iter() {
            map.insert(key(c), c.processor);
        }
        for c in b.report.chunks.iter() {
            prop_assert_eq!(map[&key(c)], c.processor);
        }
    }
}

fn case_study() -> (DecodeProfile, StreamManifest) {
    (bundled::paper_profile(), bundled::case_study_scenario().manifest().unwrap())
}

#[test]
fn case_study_trace_matches_riemann_oracle() {
    let (profile, m) = case_study();
    for policy in [Policy::threshold(), Policy::forced(ProcessorId::Dsp)] {
        let out = simulate(&m, &policy, &profile).unwrap();
        let riemann = common::riemann_energy_j(&out.trace, 0.01);
        assert!(
            rel_close(riemann, out.report.total_energy_j, 1e-3),
            "{riemann} vs {}",
            out.report.total_energy_j
        );
    }
}

#[test]
fn case_study_gpp_rail_during_qcif_decode() {
    let (profile, m) = case_study();
    let out = simulate(&m, &Policy::threshold(), &profile).unwrap();
    let qcif_decode: Vec<_> = out
        .trace
        .segments
        .iter()
        .filter(|s| s.chunk == Some(1) && s.tag == Tag::Phase(PhaseKind::GppDecode))
        .collect();
    assert_eq!(qcif_decode.len(), 300);
    assert!(qcif_decode.iter().all(|s| (s.gpp_w - 0.85).abs() < 1e-12));
}

#[test]
fn switching_lowers_mean_power_during_qcif_chunk() {
    let (profile, m) = case_study();
    let mean_power = |policy: &Policy| {
        let out = simulate(&m, policy, &profile).unwrap();
        let (mut j, mut ms) = (0.0, 0.0);
        for s in out.trace.segments.iter().filter(|s| s.chunk == Some(1)) {
            j += s.energy_j();
            ms += s.duration_ms();
        }
        j / (ms * 1e-3)
    };
    let on = mean_power(&Policy::threshold());
    let off = mean_power(&Policy::forced(ProcessorId::Dsp));
    assert!(on < off, "{on} W with switching vs {off} W without");
}

#[test]
fn case_study_low_overhead_time() {
    let (profile, m) = case_study();
    let out = simulate(&m, &Policy::threshold(), &profile).unwrap();
    assert_eq!(out.report.switch_count, 1);
    assert_eq!(out.report.switch_time_ms, 5.0);
    assert!(out.report.switch_time_ms <= 0.01 * out.report.total_time_ms);
    assert!((out.report.switch_energy_j - 0.004).abs() < 1e-12);
}

#[test]
fn case_study_chunk_energy_oracle() {
    // Per-frame DSP qcif: 2.1 mJ of phases + (1000/30 - 3.2) ms idle at 0.05 W.
    // Per-frame GPP qcif: 1.1 ms at 0.85 W + (1000/30 - 1.1) ms idle at 0.05 W.
    let period = 1000.0 / 30.0;
    let dsp_frame = 2.1e-3 + (period - 3.2) * 1e-3 * 0.05;
    let gpp_frame = 1.1e-3 * 0.85 + (period - 1.1) * 1e-3 * 0.05;
    let (profile, m) = case_study();
    let on = simulate(&m, &Policy::threshold(), &profile).unwrap();
    let off = simulate(&m, &Policy::forced(ProcessorId::Dsp), &profile).unwrap();
    assert!(rel_close(on.report.chunks[1].energy_j, 300.0 * gpp_frame, 1e-9));
    assert!(rel_close(off.report.chunks[1].energy_j, 300.0 * dsp_frame, 1e-9));
    let expected = (1.0 - gpp_frame / dsp_frame) * 100.0;
    let cmp = dyps::compare(&off.report, &on.report).unwrap();
    assert!((cmp.per_quality[&Resolution::Qcif].saving_percent - expected).abs() < 1e-6);
    assert!((expected - 29.39).abs() < 0.01);
}

#[test]
fn user_profile_switch_cost_override() {
    let (mut profile, m) = case_study();
    profile.switch_cost = Some(dyps::soc_model::SwitchCostConfig { duration_ms: 12.0, power_w: 0.5 });
    let out = simulate(&m, &Policy::threshold(), &profile).unwrap();
    assert_eq!(out.report.switch_time_ms, 12.0);
    assert!((out.report.switch_energy_j - 0.006).abs() < 1e-12);
}

#[test]
fn unknown_quality_under_argmin_is_caught_before_playback() {
    let profile = bundled::paper_profile();
    let m = dyps::manifest_from_spec(&[ChunkSpec::new("qcif", 5000.0, 1.0)], 30.0).unwrap();
    assert!(matches!(
        dyps::build_pipeline(&m, &Policy::EnergyArgmin, &profile),
        Err(dyps::Error::ProfileMiss { .. })
    ));
    // The threshold rule only needs the GPP entry, which also misses at 5000 kbps.
    assert!(dyps::build_pipeline(&m, &Policy::threshold(), &profile).is_err());
}
