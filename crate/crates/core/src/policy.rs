//! Decoder selection policies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::media::{Resolution, VideoQuality};
use crate::soc_model::{template_energy, DecodeProfile, ProcessorId};

/// Chooses the decoding processor for a chunk.
///
/// Implement this to plug other criteria (bitrate, system load) into the
/// pipeline. `candidates` must list every processor `select` may return for
/// `q`, so the pipeline can check profile coverage before playback.
pub trait ProcessorSelector {
    fn select(
        &self,
        q: &VideoQuality,
        profile: &DecodeProfile,
        current: Option<ProcessorId>,
    ) -> Result<ProcessorId>;

    fn candidates(&self, q: &VideoQuality) -> Vec<ProcessorId>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum Policy {
    /// Fixed resolution to processor map.
    #[serde(rename = "threshold")]
    ResolutionThreshold {
        #[serde(default = "default_threshold_map")]
        map: BTreeMap<Resolution, ProcessorId>,
    },
    /// Processor with the lower per-frame template energy.
    #[serde(rename = "argmin")]
    EnergyArgmin,
    #[serde(rename = "forced")]
    ForcedProcessor { proc: ProcessorId },
}

/// qcif on the GPP, cif and 4cif on the DSP.
pub fn default_threshold_map() -> BTreeMap<Resolution, ProcessorId> {
    BTreeMap::from([
        (Resolution::Qcif, ProcessorId::Gpp),
        (Resolution::Cif, ProcessorId::Dsp),
        (Resolution::FourCif, ProcessorId::Dsp),
    ])
}

impl Default for Policy {
    fn default() -> Self {
        Policy::threshold()
    }
}

impl Policy {
    pub fn threshold() -> Self {
        Policy::ResolutionThreshold {
            map: default_threshold_map(),
        }
    }

    pub fn forced(proc: ProcessorId) -> Self {
        Policy::ForcedProcessor { proc }
    }
}

impl ProcessorSelector for Policy {
    fn select(
        &self,
        q: &VideoQuality,
        profile: &DecodeProfile,
        current: Option<ProcessorId>,
    ) -> Result<ProcessorId> {
        match self {
            Policy::ResolutionThreshold { map } => Ok(map_lookup(map, q.resolution)),
            Policy::ForcedProcessor { proc } => Ok(*proc),
            Policy::EnergyArgmin => {
                let gpp = template_energy(profile.lookup_at_configured_clock(ProcessorId::Gpp, q)?).total_j();
                let dsp = template_energy(profile.lookup_at_configured_clock(ProcessorId::Dsp, q)?).total_j();
                Ok(if gpp < dsp {
                    ProcessorId::Gpp
                } else if dsp < gpp {
                    ProcessorId::Dsp
                } else {
                    current.unwrap_or(ProcessorId::Gpp)
                })
            }
        }
    }

    fn candidates(&self, q: &VideoQuality) -> Vec<ProcessorId> {
        match self {
            Policy::ResolutionThreshold { map } => vec![map_lookup(map, q.resolution)],
            Policy::ForcedProcessor { proc } => vec![*proc],
            Policy::EnergyArgmin => ProcessorId::ALL.to_vec(),
        }
    }
}

// An incomplete user map falls back to the default rule.
fn map_lookup(map: &BTreeMap<Resolution, ProcessorId>, res: Resolution) -> ProcessorId {
    map.get(&res)
        .copied()
        .unwrap_or_else(|| default_threshold_map()[&res])
}

/// Free-function form of [`ProcessorSelector::select`].
pub fn select_processor(
    policy: &Policy,
    q: &VideoQuality,
    profile: &DecodeProfile,
    current: Option<ProcessorId>,
) -> Result<ProcessorId> {
    policy.select(q, profile, current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::error::Error;
    use crate::soc_model::{Phase, PhaseKind, ProfileEntry};
    use proptest::prelude::*;

    fn q(res: Resolution, kbps: f64) -> VideoQuality {
        VideoQuality::at_default_rate(res, kbps).unwrap()
    }

    #[test]
    fn default_threshold_map_is_total() {
        let p = bundled::paper_profile();
        let policy = Policy::threshold();
        assert_eq!(policy.select(&q(Resolution::Qcif, 512.0), &p, None).unwrap(), ProcessorId::Gpp);
        assert_eq!(policy.select(&q(Resolution::Cif, 4000.0), &p, None).unwrap(), ProcessorId::Dsp);
        assert_eq!(policy.select(&q(Resolution::FourCif, 4000.0), &p, None).unwrap(), ProcessorId::Dsp);
    }

    #[test]
    fn threshold_never_consults_the_profile() {
        let mut p = bundled::paper_profile();
        p.entries.clear();
        for r in Resolution::ALL {
            assert!(Policy::threshold().select(&q(r, 1e9), &p, None).is_ok());
        }
    }

    #[test]
    fn argmin_picks_gpp_for_low_qcif() {
        // Oracle: per-frame energies computed by hand from the bundled file.
        // GPP qcif: 1.1 ms * 0.85 W = 0.935 mJ. DSP qcif: 1.47 + 0.63 = 2.1 mJ.
        let p = bundled::paper_profile();
        let quality = q(Resolution::Qcif, 256.0);
        let gpp = template_energy(p.lookup(ProcessorId::Gpp, &quality, 720.0).unwrap()).total_j();
        let dsp = template_energy(p.lookup(ProcessorId::Dsp, &quality, 520.0).unwrap()).total_j();
        assert!((gpp - 0.935e-3).abs() < 1e-12);
        assert!((dsp - 2.1e-3).abs() < 1e-12);
        assert_eq!(Policy::EnergyArgmin.select(&quality, &p, None).unwrap(), ProcessorId::Gpp);
    }

    #[test]
    fn argmin_agrees_with_threshold_on_bundled_profile() {
        let p = bundled::paper_profile();
        for quality in [
            q(Resolution::Qcif, 256.0),
            q(Resolution::Qcif, 512.0),
            q(Resolution::Cif, 4000.0),
            q(Resolution::FourCif, 4000.0),
        ] {
            assert_eq!(
                Policy::EnergyArgmin.select(&quality, &p, None).unwrap(),
                Policy::threshold().select(&quality, &p, None).unwrap(),
                "{quality}"
            );
        }
    }

    fn tied_profile() -> DecodeProfile {
        let mut p = bundled::paper_profile();
        p.entries = vec![
            ProfileEntry {
                proc: ProcessorId::Gpp,
                resolution: Resolution::Cif,
                bitrate_kbps: [0.0, 1e4].into(),
                clock_mhz: 720.0,
                phases: vec![Phase::new(PhaseKind::GppDecode, 10.0, 1.0, 0.0)],
            },
            ProfileEntry {
                proc: ProcessorId::Dsp,
                resolution: Resolution::Cif,
                bitrate_kbps: [0.0, 1e4].into(),
                clock_mhz: 520.0,
                phases: vec![Phase::new(PhaseKind::DspDecode, 20.0, 0.5, 0.0)],
            },
        ];
        p.validate().unwrap();
        p
    }

    #[test]
    fn argmin_tie_goes_to_current() {
        let p = tied_profile();
        let quality = q(Resolution::Cif, 1000.0);
        assert_eq!(Policy::EnergyArgmin.select(&quality, &p, Some(ProcessorId::Dsp)).unwrap(), ProcessorId::Dsp);
        assert_eq!(Policy::EnergyArgmin.select(&quality, &p, Some(ProcessorId::Gpp)).unwrap(), ProcessorId::Gpp);
        assert_eq!(Policy::EnergyArgmin.select(&quality, &p, None).unwrap(), ProcessorId::Gpp);
    }

    #[test]
    fn argmin_missing_entry_is_profile_miss() {
        let p = tied_profile();
        let err = Policy::EnergyArgmin.select(&q(Resolution::Qcif, 256.0), &p, None).unwrap_err();
        assert!(matches!(err, Error::ProfileMiss { resolution: Resolution::Qcif, .. }));
    }

    #[test]
    fn forced_ignores_quality() {
        let p = bundled::paper_profile();
        let policy = Policy::forced(ProcessorId::Dsp);
        for r in Resolution::ALL {
            assert_eq!(policy.select(&q(r, 100.0), &p, Some(ProcessorId::Gpp)).unwrap(), ProcessorId::Dsp);
        }
    }

    #[test]
    fn policy_json_forms() {
        let t: Policy = serde_json::from_str(r#"{"mode":"threshold"}"#).unwrap();
        assert_eq!(t, Policy::threshold());
        let a: Policy = serde_json::from_str(r#"{"mode":"argmin"}"#).unwrap();
        assert_eq!(a, Policy::EnergyArgmin);
        let f: Policy = serde_json::from_str(r#"{"mode":"forced","proc":"DSP"}"#).unwrap();
        assert_eq!(f, Policy::forced(ProcessorId::Dsp));
        let custom: Policy =
            serde_json::from_str(r#"{"mode":"threshold","map":{"qcif":"GPP","cif":"GPP","4cif":"DSP"}}"#).unwrap();
        assert_eq!(custom.select(&q(Resolution::Cif, 1.0), &tied_profile(), None).unwrap(), ProcessorId::Gpp);
    }

    proptest! {
        #[test]
        fn argmin_is_scale_invariant(
            scale in 1e-3f64..1e3,
            res in prop::sample::select(Resolution::ALL.to_vec()),
            kbps in 1.0f64..1999.0,
        ) {
            let p = bundled::paper_profile();
            let mut scaled = p.clone();
            for e in &mut scaled.entries {
                for ph in &mut e.phases {
                    ph.power.processor_w *= scale;
                    ph.power.memory_w *= scale;
                }
            }
            let quality = q(res, kbps);
            prop_assert_eq!(
                Policy::EnergyArgmin.select(&quality, &p, None).unwrap(),
                Policy::EnergyArgmin.select(&quality, &scaled, None).unwrap()
            );
        }
    }
}
