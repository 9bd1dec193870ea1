use std::io::Write;

use num_complex::Complex64;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::solve::{direct_solve, fixed, FAILED};

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    /// `k_j` for `j = 1..=nev`; `None` when the level failed.
    pub k: Vec<Option<Complex64>>,
    pub wall_time_s: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Ascending in `N`.
    pub levels: Vec<LevelResult>,
    /// Index into `levels` of the finest level that succeeded.
    pub reference: Option<usize>,
    /// Least-squares slope of `log |k_j - k_ref|` against `log h`, per eigenvalue.
    pub slopes: Vec<Option<f64>>,
}

impl ConvergenceReport {
    /// `(h, |k_j,h - k_j,ref|)` over the non-reference levels that have a value.
    pub fn errors(&self, j: usize) -> Vec<(f64, f64)> {
        let Some(r) = self.reference else { return Vec::new() };
        let Some(k_ref) = self.levels[r].k.get(j).copied().flatten() else { return Vec::new() };
        self.levels[..r]
            .iter()
            .filter_map(|l| l.k.get(j).copied().flatten().map(|k| (l.h, (k - k_ref).norm())))
            .filter(|&(_, e)| e > 0.0)
            .collect()
    }

    pub fn exit_code(&self) -> u8 {
        if self.slopes.iter().all(Option::is_some) {
            0
        } else {
            3
        }
    }

    /// One row per level and eigenvalue: `N,h,j,k_re,k_im,error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CliError::io("writing CSV", e.into());
        w.write_record(["N", "h", "j", "k_re", "k_im", "error"]).map_err(io)?;
        for (li, level) in self.levels.iter().enumerate() {
            for (j, k) in level.k.iter().enumerate() {
                let (re, im) = k.map_or((FAILED.into(), FAILED.into()), |z| (fixed(z.re), fixed(z.im)));
                let err = match (k, self.reference) {
                    (_, Some(r)) if r == li => String::new(),
                    (Some(_), Some(_)) => self
                        .errors(j)
                        .iter()
                        .find(|(h, _)| *h == level.h)
                        .map_or(FAILED.into(), |(_, e)| format!("{e:.6e}")),
                    _ => FAILED.into(),
                };
                w.write_record([level.n.to_string(), fixed(level.h), (j + 1).to_string(), re, im, err]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| CliError::io("writing CSV", e))
    }

    /// Whitespace-separated `log h  log error` blocks, one per eigenvalue, separated by two blank lines.
    pub fn write_plot_data<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (j, slope) in self.slopes.iter().enumerate() {
            if j > 0 {
                writeln!(out, "\n")?;
            }
            match slope {
                Some(s) => writeln!(out, "# j={} slope={s:.4}", j + 1)?,
                None => writeln!(out, "# j={} slope=missing", j + 1)?,
            }
            writeln!(out, "# log_h log_error")?;
            for (h, e) in self.errors(j) {
                writeln!(out, "{:.10} {:.10}", h.ln(), e.ln())?;
            }
        }
        Ok(())
    }
}

/// Least-squares slope through `(ln x, ln y)`; needs at least three points.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Direct solves on every level; the finest successful level is the reference.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport, CliError> {
    cfg.validate_study()?;
    let domain = cfg.domain_spec()?;
    let n = cfg.refraction_index()?;
    let opts = cfg.arnoldi();
    let mut sizes = cfg.levels.clone();
    sizes.sort_unstable();
    let mut levels = Vec::with_capacity(sizes.len());
    for &nsub in &sizes {
        let d = direct_solve(domain, &n, nsub, cfg.nev, &opts, cfg.identity_trick)?;
        let (k, failure) = match d.failure {
            None => (d.values.iter().take(cfg.nev).map(|&(k, _)| Some(k)).collect(), None),
            Some(e) => (vec![None; cfg.nev], Some(e.to_string())),
        };
        levels.push(LevelResult { n: nsub, h: std::f64::consts::SQRT_2 / nsub as f64, k, wall_time_s: d.wall_time_s, failure });
    }
    let reference = levels.iter().rposition(|l| l.failure.is_none());
    let mut report = ConvergenceReport { levels, reference, slopes: Vec::new() };
    report.slopes = (0..cfg.nev).map(|j| fit_slope(&report.errors(j))).collect();
    Ok(report)
}
