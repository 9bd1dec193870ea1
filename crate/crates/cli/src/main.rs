use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tefem_cli::{convergence_study, dump_matrices, run_solve, CliError, ExperimentConfig, Method};

#[derive(Parser)]
#[command(name = "tefem", version, about = "Transmission eigenvalues with bicubic C1 finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct or two-grid eigenvalues written as a CSV table.
    Solve(SolveArgs),
    /// Direct solves over several mesh levels with fitted convergence slopes.
    Study(StudyArgs),
    /// Export the pencil matrices K and M in Matrix Market format.
    Dump(DumpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// JSON experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// square or lshape
    #[arg(long)]
    domain: Option<String>,
    /// Refraction index: const:<c> or affine:<c0>,<c1>,<c2>
    #[arg(long = "n", value_name = "SPEC")]
    refraction: Option<String>,
    /// Fine mesh subdivisions per unit length.
    #[arg(long)]
    fine: Option<usize>,
    #[arg(long)]
    nev: Option<usize>,
    /// Residual tolerance for accepted eigenpairs.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    krylov_dim: Option<usize>,
    #[arg(long)]
    max_restarts: Option<usize>,
    #[arg(long)]
    cluster_tol: Option<f64>,
    /// Serial reductions, bit-reproducible output.
    #[arg(long, conflicts_with = "parallel_reductions")]
    deterministic: bool,
    /// Parallel inner products whose summation order is not fixed.
    #[arg(long)]
    parallel_reductions: bool,
    /// Replace D by the identity in the direct pencils.
    #[arg(long, value_enum)]
    identity_trick: Option<OnOff>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Coarse mesh subdivisions for the two-grid method.
    #[arg(long)]
    coarse: Option<usize>,
    /// Skip the direct fine solve in two-grid runs.
    #[arg(long)]
    no_direct: bool,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    /// Mesh levels, e.g. 8,16,32,64; the finest is the reference.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Per-level CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// (log h, log error) blocks for plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    common: Common,
    /// Writes <PATH>_K.mtx and <PATH>_M.mtx.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

fn load(c: Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = c.domain {
        cfg.domain = v;
    }
    if let Some(v) = c.refraction {
        cfg.refraction = v;
    }
    if let Some(v) = c.fine {
        cfg.fine = v;
    }
    if let Some(v) = c.nev {
        cfg.nev = v;
    }
    if let Some(v) = c.tol {
        cfg.tol = v;
    }
    if let Some(v) = c.krylov_dim {
        cfg.krylov_dim = v;
    }
    if let Some(v) = c.max_restarts {
        cfg.max_restarts = v;
    }
    if let Some(v) = c.cluster_tol {
        cfg.cluster_tol = v;
    }
    if c.deterministic {
        cfg.deterministic = true;
    }
    if c.parallel_reductions {
        cfg.deterministic = false;
    }
    if let Some(v) = c.identity_trick {
        cfg.identity_trick = matches!(v, OnOff::On);
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(format!("creating {}", path.display()), e))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve(a) => {
            let mut cfg = load(a.common)?;
            if let Some(m) = a.method {
                cfg.method = m;
            }
            if a.coarse.is_some() {
                cfg.coarse = a.coarse;
            }
            if a.no_direct {
                cfg.with_direct = false;
            }
            if a.out.is_some() {
                cfg.out = a.out;
            }
            let report = run_solve(&cfg)?;
            match &cfg.out {
                Some(p) => report.write_csv(create(p)?)?,
                None => report.write_csv(std::io::stdout().lock())?,
            }
            if let Some(e) = &report.failure {
                eprintln!("tefem: solver failed: {e}");
            }
            Ok(report.exit_code())
        }
        Command::Study(a) => {
            let mut cfg = load(a.common)?;
            if let Some(l) = a.levels {
                cfg.levels = l;
            }
            if a.out.is_some() {
                cfg.out = a.out;
            }
            if a.plot_data.is_some() {
                cfg.plot_data = a.plot_data;
            }
            let report = convergence_study(&cfg)?;
            for level in &report.levels {
                if let Some(e) = &level.failure {
                    eprintln!("tefem: level N={} failed: {e}", level.n);
                }
            }
            match &cfg.out {
                Some(p) => report.write_csv(create(p)?)?,
                None => report.write_csv(std::io::stdout().lock())?,
            }
            if let Some(p) = &cfg.plot_data {
                report.write_plot_data(create(p)?).map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
            }
            for (j, s) in report.slopes.iter().enumerate() {
                match s {
                    Some(s) => eprintln!("j={} slope={s:.4}", j + 1),
                    None => eprintln!("j={} slope=missing (fewer than 3 levels)", j + 1),
                }
            }
            Ok(report.exit_code())
        }
        Command::Dump(a) => {
            let mut cfg = load(a.common)?;
            if a.out_prefix.is_some() {
                cfg.out_prefix = a.out_prefix;
            }
            let (k, m) = dump_matrices(&cfg)?;
            println!("{}\n{}", k.display(), m.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tefem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
