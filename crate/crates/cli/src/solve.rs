use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use tefem_core::arnoldi::{principal_sqrt, solve_primal, wavenumber_order};
use tefem_core::assembly::assemble_pencil;
use tefem_core::{ArnoldiOptions, DomainSpec, Error, Mesh, RefractionF64, TwoGridSolver};

use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;

pub const CSV_HEADER: [&str; 11] = [
    "j",
    "H",
    "h",
    "k_H_re",
    "k_H_im",
    "k_twogrid_re",
    "k_twogrid_im",
    "k_direct_re",
    "k_direct_im",
    "residual",
    "wall_time_s",
];

/// Printed in place of a value the solver could not deliver.
pub const FAILED: &str = "---";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Empty,
    Value(Complex64),
    Failed,
}

impl Cell {
    pub fn value(&self) -> Option<Complex64> {
        match self {
            Cell::Value(z) => Some(*z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// 1-based eigenvalue index.
    pub j: usize,
    pub h_coarse: Option<f64>,
    pub h_fine: f64,
    pub k_coarse: Cell,
    pub k_twogrid: Cell,
    pub k_direct: Cell,
    /// Residual of the value the method produced (two-grid or direct).
    pub residual: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct SolveReport {
    pub rows: Vec<TableRow>,
    /// First numerical failure; the rows still hold everything that did succeed.
    pub failure: Option<Error>,
}

impl SolveReport {
    pub fn exit_code(&self) -> u8 {
        if self.failure.is_some() {
            3
        } else {
            0
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CliError::io("writing CSV", e.into());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            let mut rec = vec![r.j.to_string(), r.h_coarse.map(fixed).unwrap_or_default(), fixed(r.h_fine)];
            for cell in [r.k_coarse, r.k_twogrid, r.k_direct] {
                let (re, im) = cell_text(cell);
                rec.push(re);
                rec.push(im);
            }
            rec.push(r.residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| FAILED.into()));
            rec.push(format!("{:.3}", r.wall_time_s));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io("writing CSV", e))
    }
}

/// Ten decimals, without a sign on zero.
pub fn fixed(v: f64) -> String {
    let s = format!("{v:.10}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn cell_text(cell: Cell) -> (String, String) {
    match cell {
        Cell::Empty => (String::new(), String::new()),
        Cell::Failed => (FAILED.into(), FAILED.into()),
        Cell::Value(z) => (fixed(z.re), fixed(z.im)),
    }
}

/// Numerical failures become part of the report, anything else aborts the run.
fn absorb(e: Error) -> Result<Error, CliError> {
    match CliError::from(e) {
        CliError::Solver(inner) => Ok(inner),
        other => Err(other),
    }
}

/// Rows to report out of a sorted spectrum: `nev`, plus a conjugate partner the cut would split.
pub fn row_count(lambdas: &[Complex64], nev: usize) -> usize {
    let n = nev.min(lambdas.len());
    if n > 0 && n < lambdas.len() {
        let last = lambdas[n - 1];
        if last.im > 0.0 && (lambdas[n] - last.conj()).norm() <= 1e-8 * last.norm() {
            return n + 1;
        }
    }
    n
}

pub struct DirectOutcome {
    /// `(k, residual)` in reporting order.
    pub values: Vec<(Complex64, Option<f64>)>,
    pub failure: Option<Error>,
    pub wall_time_s: f64,
}

/// Assembly, factorization and eigensolve on one mesh.
pub fn direct_solve(
    domain: DomainSpec,
    n: &RefractionF64,
    nsub: usize,
    nev: usize,
    opts: &ArnoldiOptions,
    identity_trick: bool,
) -> Result<DirectOutcome, CliError> {
    let start = Instant::now();
    let mesh = Mesh::build(domain, nsub)?;
    let pencil = assemble_pencil(&mesh, n, identity_trick)?;
    let (values, failure) = match solve_primal(&pencil, nev, opts) {
        Ok(s) => (s.pairs.iter().map(|p| (p.k, Some(p.residual))).collect(), None),
        Err(Error::Convergence { wanted, mut converged }) => {
            converged.sort_by(wavenumber_order);
            let values = converged.iter().map(|&l| (principal_sqrt(l), None)).collect();
            (values, Some(Error::Convergence { wanted, converged }))
        }
        Err(e) => (Vec::new(), Some(absorb(e)?)),
    };
    Ok(DirectOutcome { values, failure, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Runs one `solve` experiment. Configuration problems are errors; numerical
/// failures are recorded in the report so a partial table can still be written.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveReport, CliError> {
    cfg.validate_solve()?;
    let domain = cfg.domain_spec()?;
    let n = cfg.refraction_index()?;
    let opts = cfg.arnoldi();
    let h_fine = std::f64::consts::SQRT_2 / cfg.fine as f64;
    match cfg.method {
        Method::Direct => {
            let d = direct_solve(domain, &n, cfg.fine, cfg.nev, &opts, cfg.identity_trick)?;
            let count = d.values.len().max(cfg.nev);
            let rows = (0..count)
                .map(|i| {
                    let (k_direct, residual) = match d.values.get(i) {
                        Some(&(k, res)) => (Cell::Value(k), res),
                        None => (Cell::Failed, None),
                    };
                    TableRow {
                        j: i + 1,
                        h_coarse: None,
                        h_fine,
                        k_coarse: Cell::Empty,
                        k_twogrid: Cell::Empty,
                        k_direct,
                        residual,
                        wall_time_s: d.wall_time_s,
                    }
                })
                .collect();
            Ok(SolveReport { rows, failure: d.failure })
        }
        Method::TwoGrid => run_two_grid(cfg, domain, &n, &opts, h_fine),
    }
}

fn run_two_grid(
    cfg: &ExperimentConfig,
    domain: DomainSpec,
    n: &RefractionF64,
    opts: &ArnoldiOptions,
    h_fine: f64,
) -> Result<SolveReport, CliError> {
    let coarse = cfg.coarse.expect("validated");
    let h_coarse = Some(std::f64::consts::SQRT_2 / coarse as f64);
    let start = Instant::now();
    let mut failure = None;
    let mut corrected: Vec<(Cell, Cell, Option<f64>)> = Vec::new();
    match TwoGridSolver::new(domain, n, coarse, cfg.fine, cfg.nev, opts) {
        Ok(solver) => {
            let lambdas = solver.coarse_spectrum.lambdas();
            for j in 0..row_count(&lambdas, cfg.nev) {
                let k_coarse = Cell::Value(solver.coarse_spectrum.pairs[j].k);
                match solver.solve(j, cfg.cluster_tol) {
                    Ok(r) => corrected.push((k_coarse, Cell::Value(r.k), Some(r.residual))),
                    Err(e) => {
                        let e = absorb(e)?;
                        failure.get_or_insert(e);
                        corrected.push((k_coarse, Cell::Failed, None));
                    }
                }
            }
        }
        Err(e) => failure = Some(absorb(e)?),
    }
    let wall_time_s = start.elapsed().as_secs_f64();
    let direct = if cfg.with_direct {
        let d = direct_solve(domain, n, cfg.fine, cfg.nev, opts, cfg.identity_trick)?;
        if failure.is_none() {
            failure = d.failure;
        }
        Some(d.values)
    } else {
        None
    };
    let count = corrected.len().max(direct.as_ref().map_or(0, |d| d.len())).max(cfg.nev);
    let rows = (0..count)
        .map(|i| {
            let (k_coarse, k_twogrid, residual) = corrected.get(i).copied().unwrap_or((Cell::Failed, Cell::Failed, None));
            let k_direct = match &direct {
                None => Cell::Empty,
                Some(d) => d.get(i).map_or(Cell::Failed, |&(k, _)| Cell::Value(k)),
            };
            TableRow { j: i + 1, h_coarse, h_fine, k_coarse, k_twogrid, k_direct, residual, wall_time_s }
        })
        .collect();
    Ok(SolveReport { rows, failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_has_no_sign() {
        assert_eq!(fixed(-1e-17), "0.0000000000");
        assert_eq!(fixed(-0.25), "-0.2500000000");
        assert_eq!(fixed(1.8795931085), "1.8795931085");
    }

    #[test]
    fn conjugate_partner_extends_the_cut() {
        let z = Complex64::new(20.0, 8.0);
        let l = [Complex64::new(3.0, 0.0), z, z.conj(), Complex64::new(30.0, 0.0)];
        assert_eq!(row_count(&l, 2), 3);
        assert_eq!(row_count(&l, 3), 3);
        assert_eq!(row_count(&l, 1), 1);
        assert_eq!(row_count(&l, 9), 4);
    }

    #[test]
    fn failed_cells_use_the_sentinel() {
        let report = SolveReport {
            rows: vec![TableRow {
                j: 1,
                h_coarse: None,
                h_fine: 0.5,
                k_coarse: Cell::Empty,
                k_twogrid: Cell::Empty,
                k_direct: Cell::Failed,
                residual: None,
                wall_time_s: 0.0,
            }],
            failure: Some(Error::Convergence { wanted: 1, converged: vec![] }),
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,,0.5000000000,,,,,---,---,---,0.000");
        assert_eq!(report.exit_code(), 3);
    }
}
