#![allow(dead_code)]

use risklab::ingest::write_county_table;
use risklab::pipeline::PipelineConfig;
use risklab::synth::synthetic_counties;
use std::path::{Path, PathBuf};

pub const FIXTURE_SEED: u64 = 2020;

/// Writes a synthetic county table into `dir` and returns its path.
pub fn write_fixture(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join("counties.csv");
    let recs = synthetic_counties(n, seed, 0.02);
    let f = std::fs::File::create(&path).unwrap();
    write_county_table(&recs, f).unwrap();
    path
}

/// Oversample-first config over a fixture, writing into `out`.
pub fn oversample_first_config(input: &Path, out: &Path) -> PipelineConfig {
    PipelineConfig {
        input_path: input.to_path_buf(),
        output_dir: out.to_path_buf(),
        seed: 7,
        smote_before_split: true,
        ..PipelineConfig::default()
    }
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
