#![allow(dead_code)]

use std::path::PathBuf;

use ibvs_sim::scenario::{self, ScenarioSpec};
use ibvs_sim::{Mode, Scenario};

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn reference_path() -> PathBuf {
    scenarios_dir().join("reference.toml")
}

pub fn locations_path() -> PathBuf {
    scenarios_dir().join("locations.toml")
}

pub fn reference_spec() -> ScenarioSpec {
    ScenarioSpec::load(&reference_path()).expect("reference scenario parses")
}

/// The reference scenario in `mode`, optionally without its noise section.
pub fn reference(mode: Mode, noisy: bool) -> Scenario {
    let mut spec = reference_spec();
    spec.mode = mode;
    if !noisy {
        spec.noise = None;
    }
    scenario::validate(&spec).expect("reference scenario is valid")
}
