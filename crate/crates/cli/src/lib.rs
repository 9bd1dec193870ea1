//! Experiment driver for the transmission eigenvalue solver: configuration,
//! direct and two-grid runs written as CSV tables, convergence studies and
//! Matrix Market export.

pub mod config;
pub mod error;
pub mod solve;
pub mod study;

use std::path::PathBuf;

pub use config::{parse_refraction, ExperimentConfig, Method};
pub use error::CliError;
pub use solve::{run_solve, Cell, SolveReport, TableRow};
pub use study::{convergence_study, fit_slope, ConvergenceReport, LevelResult};

/// Assembles the fine-mesh pencil and writes `<prefix>_K.mtx` and `<prefix>_M.mtx`.
pub fn dump_matrices(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf), CliError> {
    let prefix = cfg.out_prefix.as_ref().ok_or_else(|| CliError::config("out_prefix", "required for dump"))?;
    let domain = cfg.domain_spec()?;
    let n = cfg.refraction_index()?;
    if cfg.fine < 2 {
        return Err(CliError::config("fine", "need at least 2 subdivisions"));
    }
    let mesh = tefem_core::Mesh::build(domain, cfg.fine)?;
    let pencil = tefem_core::assembly::assemble_pencil(&mesh, &n, cfg.identity_trick)?;
    pencil
        .export_matrix_market(prefix)
        .map_err(|e| match e {
            tefem_core::Error::Io(source) => CliError::io(format!("writing {}", prefix.display()), source),
            other => other.into(),
        })
}
