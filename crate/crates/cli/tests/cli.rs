use std::path::Path;
use std::process::{Command, Output};

use tefem_core::SparseMatrix;

fn tefem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tefem")).args(args).output().expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn without_wall_time(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn lshape_direct_fourth_wavenumber() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.csv");
    let o = tefem(&[
        "solve", "--method", "direct", "--domain", "lshape", "--n", "const:16", "--fine", "32", "--nev", "4", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    assert_eq!(r[3][0], "4");
    let k4: f64 = r[3][7].parse().unwrap();
    assert!((k4 - 1.7831208523).abs() <= 2e-5 * 1.7831208523);
    assert_eq!(r[3][2], "0.0441941738");
    assert!(r[3][1].is_empty() && r[3][3].is_empty() && r[3][5].is_empty());
}

#[test]
fn malformed_refraction_exits_with_2() {
    let o = tefem(&["solve", "--n", "affine:1", "--fine", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("refraction"));
}

#[test]
fn unnested_two_grid_sizes_exit_with_2() {
    let o = tefem(&["solve", "--method", "twogrid", "--coarse", "3", "--fine", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fine"));
    let o = tefem(&["solve", "--n", "const:0.5", "--fine", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tefem(&["solve", "--method", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_failure_still_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fail.csv");
    let o = tefem(&[
        "solve", "--fine", "8", "--nev", "6", "--krylov-dim", "8", "--max-restarts", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let r = rows(&out);
    assert_eq!(r.len(), 6);
    assert!(r.iter().any(|row| row[7] == "---"));
}

#[test]
fn deterministic_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("run{i}.csv"))).collect();
    for p in &paths {
        let o = tefem(&[
            "solve", "--method", "twogrid", "--coarse", "4", "--fine", "8", "--n", "affine:8,1,-1", "--nev", "6",
            "--deterministic", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(without_wall_time(&paths[0]), without_wall_time(&paths[1]));
}

#[test]
fn json_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let out = dir.path().join("t.csv");
    std::fs::write(&cfg, r#"{"domain": "square", "refraction": "const:16", "method": "twogrid", "coarse": 4, "fine": 16, "nev": 2}"#).unwrap();
    let o = tefem(&["solve", "--config", cfg.to_str().unwrap(), "--fine", "8", "--no-direct", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][1], "0.3535533906");
    assert_eq!(r[0][2], "0.1767766953");
    assert!(!r[0][5].is_empty() && r[0][7].is_empty());

    std::fs::write(&cfg, r#"{"fine": 8, "colour": "red"}"#).unwrap();
    assert_eq!(tefem(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn study_writes_plot_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let (out, plot) = (dir.path().join("s.csv"), dir.path().join("s.dat"));
    let o = tefem(&[
        "study", "--levels", "4,8,16,32", "--nev", "1", "--out", out.to_str().unwrap(), "--plot-data", plot.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("j=1 slope="));
    let data = std::fs::read_to_string(&plot).unwrap();
    let points: Vec<(f64, f64)> = data
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(points.len(), 3);
    assert!(points.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1));
    assert_eq!(rows(&out).len(), 4);

    let o = tefem(&["study", "--levels", "4,8,16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dump_writes_readable_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("pencil");
    let o = tefem(&["dump", "--fine", "4", "--identity-trick", "off", "--out-prefix", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k = SparseMatrix::<f64>::read_matrix_market(dir.path().join("pencil_K.mtx")).unwrap();
    let m = SparseMatrix::<f64>::read_matrix_market(dir.path().join("pencil_M.mtx")).unwrap();
    // 9 interior nodes, 4 unknowns each, two fields
    assert_eq!((k.nrows(), m.ncols()), (72, 72));
    assert!(m.nnz() > k.nnz() / 2);
    assert_eq!(tefem(&["dump"]).status.code(), Some(2));
}
