//! Instance generation, experiments, sweeps and certification reports.

pub mod config;
pub mod experiment;
pub mod falsify;
pub mod instances;
pub mod io;
pub mod matrix_io;
pub mod presets;
pub mod sweep;
