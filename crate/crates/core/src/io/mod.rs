//! Configuration files, experiment drivers and output files.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{load_config, parse_config, ConfigFile, RunConfig};
pub use experiments::{
    audit_directory, interpolate_state, l2_distance, run_m_sweep, run_single, run_tau_refinement, simulate,
    FieldDistance, RefinementTable, RunOutput, SweepTable,
};
pub use output::{read_snapshots, write_report, TimeseriesRow, TIMESERIES_HEADER};
