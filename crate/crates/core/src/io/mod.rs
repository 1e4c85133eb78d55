//! File formats: network and scenario TOML, CSV tables, SVG plots and reports.

mod network_file;
mod report;
mod scenario;
mod svg;
mod tables;

use thiserror::Error;

use crate::equilibrium::EquilibriumError;

pub use network_file::{EndTag, MaterialEntry, MaterialKind, MemberEntry, NetworkFile, NodeEntry, NodeKindTag, SpringEntry, StringEntry};
pub use report::{analyze_report, diagnostics_report, verification_report};
pub use scenario::{
    build_data, build_equilibrium, build_shape, read_csv_columns, read_text, ControlBlock, DataEntry, EquilibriumBlock, LegEntry,
    NumericsBlock, Scenario, ScenarioFile, ShapeEntry, SimulateBlock, StartEntry, Task, VerifyBlock,
};
pub use svg::{bounds, plot_svg, Bounds, Series};
pub use tables::{
    controls_csv, energy_csv, fmt_f64, read_controls, sim_traces_csv, snapshots_csv, traces_csv, CONTROL_HEADER, TRACE_HEADER,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("equilibrium: {0}")]
    Equilibrium(#[from] EquilibriumError),
}
