//! Run configuration, the adaptive time loop, the error metric and output
//! files.

mod config;
mod metric;
mod output;
mod run;

pub use config::{SimulationConfig, SCHEMA_VERSION};
pub use metric::error_metric;
pub use output::{
    coefficients_text, compare_runs, list_snapshots, parse_coefficients, read_snapshot, run, snapshot_paths,
    vtk_raster, write_manifest, write_outputs, write_snapshot, RunSummary, Snapshot, TimeSeriesWriter,
    MANIFEST_FILE, TIMESERIES_FILE,
};
pub use run::{initial_condition, initial_mesh, AdaptiveOutcome, Simulation, TimeSeriesRecord};
