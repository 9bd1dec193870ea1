use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tefem_core::{ArnoldiOptions, DomainSpec, RefractionF64, RefractionIndex};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    #[value(name = "twogrid")]
    #[serde(rename = "twogrid")]
    TwoGrid,
}

/// Everything one experiment needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `square` or `lshape`.
    pub domain: String,
    /// `const:<c>` or `affine:<c0>,<c1>,<c2>` for `n = c0 + c1 x + c2 y`.
    pub refraction: String,
    pub method: Method,
    pub coarse: Option<usize>,
    pub fine: usize,
    pub nev: usize,
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub cluster_tol: f64,
    pub deterministic: bool,
    pub identity_trick: bool,
    /// Also solve directly on the fine mesh in two-grid runs.
    pub with_direct: bool,
    pub levels: Vec<usize>,
    pub out: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub out_prefix: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opts = ArnoldiOptions::default();
        ExperimentConfig {
            domain: "square".into(),
            refraction: "const:16".into(),
            method: Method::Direct,
            coarse: None,
            fine: 32,
            nev: 4,
            tol: opts.tol,
            krylov_dim: opts.krylov_dim,
            max_restarts: opts.max_restarts,
            cluster_tol: opts.cluster_tol,
            deterministic: true,
            identity_trick: true,
            with_direct: true,
            levels: vec![8, 16, 32, 64],
            out: None,
            plot_data: None,
            out_prefix: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, CliError> {
        self.domain.parse().map_err(|_| CliError::config("domain", format!("expected square or lshape, got `{}`", self.domain)))
    }

    pub fn refraction_index(&self) -> Result<RefractionF64, CliError> {
        parse_refraction(&self.refraction)
    }

    pub fn arnoldi(&self) -> ArnoldiOptions {
        ArnoldiOptions {
            tol: self.tol,
            krylov_dim: self.krylov_dim,
            max_restarts: self.max_restarts,
            cluster_tol: self.cluster_tol,
            deterministic: self.deterministic,
        }
    }

    fn check_common(&self) -> Result<(), CliError> {
        self.domain_spec()?;
        self.refraction_index()?;
        if self.nev == 0 {
            return Err(CliError::config("nev", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::config("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.krylov_dim < self.nev + 2 {
            return Err(CliError::config("krylov_dim", format!("must be at least nev + 2 = {}", self.nev + 2)));
        }
        if !(self.cluster_tol >= 0.0) {
            return Err(CliError::config("cluster_tol", "must be non-negative"));
        }
        Ok(())
    }

    pub fn validate_solve(&self) -> Result<(), CliError> {
        self.check_common()?;
        if self.fine < 2 {
            return Err(CliError::config("fine", "need at least 2 subdivisions"));
        }
        if self.method == Method::TwoGrid {
            let coarse = self.coarse.ok_or_else(|| CliError::config("coarse", "required for the two-grid method"))?;
            if coarse < 2 {
                return Err(CliError::config("coarse", "need at least 2 subdivisions"));
            }
            if !self.fine.is_multiple_of(coarse) {
                return Err(CliError::config("fine", format!("{} is not a multiple of the coarse size {coarse}", self.fine)));
            }
        }
        Ok(())
    }

    pub fn validate_study(&self) -> Result<(), CliError> {
        self.check_common()?;
        if self.levels.len() < 4 {
            return Err(CliError::config("levels", "need at least 4 levels (3 fit points plus the reference)"));
        }
        if let Some(&bad) = self.levels.iter().find(|&&n| n < 2) {
            return Err(CliError::config("levels", format!("level {bad} has fewer than 2 subdivisions")));
        }
        let mut sorted = self.levels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.levels.len() {
            return Err(CliError::config("levels", "levels must be distinct"));
        }
        Ok(())
    }
}

/// Parses `const:<c>` or `affine:<c0>,<c1>,<c2>`.
pub fn parse_refraction(spec: &str) -> Result<RefractionF64, CliError> {
    let bad = |msg: String| CliError::config("refraction", msg);
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| bad(format!("`{spec}`: expected const:<c> or affine:<c0>,<c1>,<c2>")))?;
    let values = args
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("`{spec}`: `{s}` is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad(format!("`{spec}`: coefficients must be finite")));
    }
    match (kind.trim(), values.as_slice()) {
        ("const", [c]) => Ok(RefractionIndex::Constant(*c)),
        ("affine", [c0, c1, c2]) => Ok(RefractionIndex::Affine(*c0, *c1, *c2)),
        ("const", v) => Err(bad(format!("`{spec}`: const takes 1 coefficient, got {}", v.len()))),
        ("affine", v) => Err(bad(format!("`{spec}`: affine takes 3 coefficients, got {}", v.len()))),
        (other, _) => Err(bad(format!("`{spec}`: unknown kind `{other}`"))),
    }
}
