//! Shared fixtures for the benchmarks.

use sqeeg_core::preprocess::{clean, PreprocessParams};
use sqeeg_core::synth::{gen_raw_cohort, RawCohortSpec};
use sqeeg_core::{Recording, RoiMap};

/// One cleaned 40 s resting-state recording with its ROI map.
pub fn cleaned_rs_recording(seed: u64) -> (Recording, RoiMap) {
    let spec = RawCohortSpec {
        n_gs: 2,
        n_ps: 2,
        no_n3_gs: 0,
        no_n3_ps: 0,
        sample_rate: 250.0,
        rs_seconds: 40.0,
        nap_epochs: 6,
        seed,
        ..RawCohortSpec::default()
    };
    let cohort = gen_raw_cohort(&spec).expect("synthetic cohort");
    let raw = cohort
        .recordings
        .into_iter()
        .find(|r| r.recording.state.rs_index == Some(1))
        .expect("RS 1 recording");
    let cleaned = clean(&raw.recording, &PreprocessParams::default()).expect("clean");
    (cleaned.recording, cohort.roi_map)
}
