//! Profile and scenario files shipped with the crate.

use crate::media::Scenario;
use crate::soc_model::DecodeProfile;

/// Derived two-processor profile (`examples/paper.json`).
pub const PAPER_PROFILE_JSON: &str = include_str!("../examples/paper.json");

/// One cif@4000 chunk followed by one qcif@512 chunk, 10 s each (`examples/s5.json`).
pub const CASE_STUDY_SCENARIO_JSON: &str = include_str!("../examples/s5.json");

pub fn paper_profile() -> DecodeProfile {
    DecodeProfile::from_json(PAPER_PROFILE_JSON).expect("bundled profile is valid")
}

pub fn case_study_scenario() -> Scenario {
    Scenario::from_json(CASE_STUDY_SCENARIO_JSON).expect("bundled scenario is valid")
}
