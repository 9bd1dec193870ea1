//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use tefem_cli::solve::direct_solve;
use tefem_cli::{convergence_study, run_solve, ExperimentConfig, Method};
use tefem_core::arnoldi::{pair_dual, pencil_residual, solve_dual, solve_primal};
use tefem_core::assembly::assemble_pencil;
use tefem_core::two_grid::{rayleigh_identity_check, two_grid_solve};
use tefem_core::{ArnoldiOptions, DomainSpec, Mesh, PencilF64, RefractionF64, RefractionIndex, SpectrumF64};

type Outcome = Result<String, String>;

fn constant() -> RefractionF64 {
    RefractionIndex::Constant(16.0)
}

fn affine() -> RefractionF64 {
    RefractionIndex::Affine(8.0, 1.0, -1.0)
}

fn pencil(domain: DomainSpec, nsub: usize, n: &RefractionF64, trick: bool) -> PencilF64 {
    assemble_pencil(&Mesh::build(domain, nsub).unwrap(), n, trick).unwrap()
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Checks `(label, got, want)` triples against a relative tolerance.
fn within(checks: &[(&str, f64, f64)], tol: f64) -> Outcome {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for &(label, got, want) in checks {
        let e = rel(got, want);
        worst = worst.max(e);
        if !(e <= tol) {
            bad.push(format!("{label}={got:.10} (want {want:.10}, rel {e:.1e})"));
        }
    }
    if bad.is_empty() {
        Ok(format!("max rel err {worst:.1e} <= {tol:.0e}"))
    } else {
        Err(bad.join("; "))
    }
}

/// Spectra collected along the way for the invariant checks.
struct Collected {
    spectra: Vec<(String, PencilF64, SpectrumF64)>,
}

fn solve_kept(c: &mut Collected, label: &str, domain: DomainSpec, nsub: usize, n: &RefractionF64, nev: usize) -> Result<SpectrumF64, String> {
    let p = pencil(domain, nsub, n, true);
    let s = solve_primal(&p, nev, &ArnoldiOptions::default()).map_err(|e| e.to_string())?;
    c.spectra.push((label.to_string(), p, s.clone()));
    Ok(s)
}

fn criterion_1(c: &mut Collected) -> Outcome {
    let start = Instant::now();
    let s = solve_kept(c, "square const N=32", DomainSpec::UnitSquare, 32, &constant(), 4)?;
    let elapsed = start.elapsed();
    let k: Vec<f64> = s.pairs.iter().map(|p| p.k.re).collect();
    let msg = within(
        &[("k1", k[0], 1.8795931085), ("k2", k[1], 2.4442447101), ("k3", k[2], 2.4442447101), ("k4", k[3], 2.8664469634)],
        5e-6,
    )?;
    if elapsed > Duration::from_secs(120) {
        return Err(format!("took {:.1} s", elapsed.as_secs_f64()));
    }
    Ok(format!("{msg}, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let cfg = ExperimentConfig {
        method: Method::TwoGrid,
        coarse: Some(8),
        fine: 32,
        nev: 4,
        with_direct: false,
        ..Default::default()
    };
    let opts = cfg.arnoldi();
    // best of three for both timings
    let mut t_two_grid = f64::INFINITY;
    let mut report = None;
    for _ in 0..3 {
        let start = Instant::now();
        let r = run_solve(&cfg).map_err(|e| e.to_string())?;
        t_two_grid = t_two_grid.min(start.elapsed().as_secs_f64());
        report = Some(r);
    }
    let report = report.unwrap();
    if let Some(e) = &report.failure {
        return Err(e.to_string());
    }
    let mut t_direct = f64::INFINITY;
    for _ in 0..3 {
        let start = Instant::now();
        let d = direct_solve(DomainSpec::UnitSquare, &constant(), 32, 4, &opts, true).map_err(|e| e.to_string())?;
        t_direct = t_direct.min(start.elapsed().as_secs_f64());
        if let Some(e) = d.failure {
            return Err(e.to_string());
        }
    }
    let k: Vec<f64> = report.rows.iter().map(|r| r.k_twogrid.value().map_or(f64::NAN, |z| z.re)).collect();
    let msg = within(
        &[("k1", k[0], 1.8795932933), ("k2", k[1], 2.4442475976), ("k3", k[2], 2.4442475976), ("k4", k[3], 2.8664515120)],
        5e-6,
    )?;
    if t_two_grid >= t_direct {
        return Err(format!("two-grid {t_two_grid:.3} s is not faster than direct {t_direct:.3} s"));
    }
    Ok(format!("{msg}, two-grid {t_two_grid:.3} s < direct {t_direct:.3} s"))
}

fn criterion_3(c: &mut Collected) -> Outcome {
    let s = solve_kept(c, "square affine N=32", DomainSpec::UnitSquare, 32, &affine(), 6)?;
    let k: Vec<Complex64> = s.pairs.iter().map(|p| p.k).collect();
    let (plus, minus) = (k[4], k[5]);
    within(
        &[
            ("k1", k[0].re, 2.8221945051),
            ("Re k5", plus.re, 4.4965591247),
            ("Im k5", plus.im, 0.8715053132),
            ("Re k6", minus.re, 4.4965591247),
            ("Im k6", minus.im, -0.8715053132),
        ],
        2e-5,
    )
}

fn criterion_4(c: &mut Collected) -> Outcome {
    let s = solve_kept(c, "lshape const N=32", DomainSpec::LShape, 32, &constant(), 4)?;
    let k: Vec<f64> = s.pairs.iter().map(|p| p.k.re).collect();
    within(&[("k1", k[0], 1.4780403370), ("k2", k[1], 1.5697716222), ("k4", k[3], 1.7831208523)], 2e-5)
}

fn criterion_5() -> Outcome {
    let study = |domain: &str, nev: usize| {
        let cfg = ExperimentConfig { domain: domain.into(), nev, levels: vec![8, 16, 32, 64], ..Default::default() };
        convergence_study(&cfg).map_err(|e| e.to_string())
    };
    let square = study("square", 1)?;
    let lshape = study("lshape", 2)?;
    let slope = |r: &tefem_cli::ConvergenceReport, j: usize| r.slopes[j].ok_or_else(|| format!("no slope for j={}", j + 1));
    let checks = [("square k1", slope(&square, 0)?, 4.0), ("lshape k1", slope(&lshape, 0)?, 1.3), ("lshape k2", slope(&lshape, 1)?, 2.3)];
    let text: Vec<String> = checks.iter().map(|(l, s, w)| format!("{l} {s:.3} (target {w})")).collect();
    if checks.iter().all(|(_, s, w)| (s - w).abs() <= 0.3) {
        Ok(text.join(", "))
    } else {
        Err(text.join(", "))
    }
}

/// All finite eigenvalues of `K x = lambda M x` from a dense LU solve and a dense eigendecomposition.
fn dense_oracle(p: &PencilF64) -> Vec<Complex64> {
    let to_dense = |m: &tefem_core::SparseMatrixF64| {
        let d = m.to_dense();
        DMatrix::from_fn(d.len(), d.len(), |i, j| d[i][j])
    };
    let t = to_dense(&p.k).lu().solve(&to_dense(&p.m)).unwrap();
    let scale = t.amax();
    t.complex_eigenvalues().iter().filter(|mu| mu.norm() > 1e-10 * scale).map(|mu| mu.inv()).collect()
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (nsub, nev) in [(2, 4), (4, 8)] {
        for n in [constant(), affine()] {
            let p = pencil(DomainSpec::UnitSquare, nsub, &n, false);
            let oracle = dense_oracle(&p);
            let s = solve_primal(&p, nev, &ArnoldiOptions::default()).map_err(|e| e.to_string())?;
            for pair in &s.pairs {
                let e = oracle.iter().map(|o| (o - pair.lambda).norm() / o.norm()).fold(f64::INFINITY, f64::min);
                worst = worst.max(e);
                count += 1;
            }
        }
    }
    if worst > 1e-9 {
        return Err(format!("oracle mismatch {worst:.1e} > 1e-9"));
    }
    let mut trick_worst = 0.0f64;
    for n in [constant(), affine()] {
        let on = solve_primal(&pencil(DomainSpec::UnitSquare, 4, &n, true), 8, &ArnoldiOptions::default()).map_err(|e| e.to_string())?;
        let off = solve_primal(&pencil(DomainSpec::UnitSquare, 4, &n, false), 8, &ArnoldiOptions::default()).map_err(|e| e.to_string())?;
        if on.pairs.len() != off.pairs.len() {
            return Err("identity trick changes the number of pairs".into());
        }
        for (a, b) in on.pairs.iter().zip(&off.pairs) {
            trick_worst = trick_worst.max((a.lambda - b.lambda).norm() / b.lambda.norm());
        }
    }
    if trick_worst > 1e-10 {
        return Err(format!("identity trick on/off differ by {trick_worst:.1e} > 1e-10"));
    }
    Ok(format!("{count} eigenvalues vs dense oracle, max rel {worst:.1e}; trick on/off max rel {trick_worst:.1e}"))
}

fn invariants(label: &str, p: &PencilF64, s: &SpectrumF64, tol: f64) -> Result<(), String> {
    for (i, pair) in s.pairs.iter().enumerate() {
        let a = p.a_norm(&pair.x);
        if (a - 1.0).abs() > 1e-10 {
            return Err(format!("{label} pair {}: A-norm {a}", i + 1));
        }
        let r = pencil_residual(&p.k, &p.m, pair.lambda, &pair.x);
        if r > tol || (r - pair.residual).abs() > 1e-3 * r.max(1e-300) + 1e-16 {
            return Err(format!("{label} pair {}: residual {r:e} (reported {:e})", i + 1, pair.residual));
        }
        if pair.lambda.im.abs() > 1e-8 * pair.lambda.norm()
            && !s.pairs.iter().any(|q| (q.lambda - pair.lambda.conj()).norm() <= 1e-8 * pair.lambda.norm())
        {
            return Err(format!("{label} pair {}: conjugate of {} missing", i + 1, pair.lambda));
        }
    }
    Ok(())
}

fn criterion_7(c: &Collected) -> Outcome {
    let opts = ArnoldiOptions::default();
    let mut worst = 0.0f64;
    let mut pairs_checked = 0;
    let mut extra = Vec::new();
    for n in [constant(), affine()] {
        let p = pencil(DomainSpec::UnitSquare, 4, &n, false);
        let s = solve_primal(&p, 4, &opts).map_err(|e| e.to_string())?;
        let d = solve_dual(&p, 4, &opts).map_err(|e| e.to_string())?;
        let idx = pair_dual(&s, &d, 1e-6).map_err(|e| e.to_string())?;
        for (j, (pair, &i)) in s.pairs.iter().zip(&idx).enumerate() {
            let dev = rayleigh_identity_check(&p, pair.lambda, &pair.x, &d[i].y_raw, 20, 100 + j as u64).map_err(|e| e.to_string())?;
            let scaled = dev / (pair.lambda.norm() + 1.0);
            worst = worst.max(scaled);
            pairs_checked += 1;
            if scaled > 1e-10 {
                return Err(format!("identity deviation {dev:.1e} at lambda = {}", pair.lambda));
            }
        }
        extra.push(("square N=4".to_string(), p, s));
    }
    let mut reported = 0;
    for (label, p, s) in c.spectra.iter().chain(extra.iter()) {
        invariants(label, p, s, opts.tol)?;
        reported += s.pairs.len();
    }
    Ok(format!(
        "identity max {worst:.1e}*(|lambda|+1) over {pairs_checked} pairs x 20 samples; invariants hold on {reported} reported pairs"
    ))
}

fn criterion_8() -> Outcome {
    let opts = ArnoldiOptions::default();
    let mut checks = Vec::new();
    for (name, n) in [("constant", constant()), ("affine", affine())] {
        let tg = two_grid_solve(DomainSpec::UnitSquare, &n, 16, 16, 0, &opts).map_err(|e| e.to_string())?;
        let direct = solve_primal(&pencil(DomainSpec::UnitSquare, 16, &n, true), 1, &opts).map_err(|e| e.to_string())?;
        let want = direct.pairs[0].lambda;
        checks.push((name, (tg.lambda - want).norm() / want.norm()));
    }
    let text: Vec<String> = checks.iter().map(|(n, e)| format!("{n} rel {e:.1e}")).collect();
    if checks.iter().all(|(_, e)| *e <= 1e-10) {
        Ok(text.join(", "))
    } else {
        Err(text.join(", "))
    }
}

fn main() {
    let mut collected = Collected { spectra: Vec::new() };
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "direct square n=16 N=32", criterion_1(&mut collected)),
        (2, "two-grid square 8->32", criterion_2()),
        (3, "direct square affine N=32", criterion_3(&mut collected)),
        (4, "direct lshape n=16 N=32", criterion_4(&mut collected)),
        (5, "convergence slopes", criterion_5()),
        (6, "dense oracle and identity trick", criterion_6()),
        (7, "identity suite and invariants", criterion_7(&collected)),
        (8, "two-grid with H = h", criterion_8()),
    ];
    let mut failed = 0;
    for (i, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {i} PASS [{name}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {i} FAIL [{name}] {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
