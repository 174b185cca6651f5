//! Run configuration, replay/sweep drivers and result files.

mod config;
mod output;
mod run;

pub use config::{desk_segment_bytes, parse_bytes, RunConfig, Source, SyntheticKind, ENV_PREFIX, KEYS};
pub use output::{
    results_csv, results_json, sweep_csv_header, sweep_csv_row, write_outputs, SCHEMA_VERSION,
};
pub use run::{
    load_volumes, memory_report, replay, replay_volumes, simulate, sweep, worst_case, MemoryReport,
    ReplayResult, SimOutcome, SweepGrid, SweepRow, Volume, VolumeResult, MIN_MEMORY_SAMPLES,
};
