//! Assembled blocks against a dense, cell-by-cell quadrature oracle that shares no
//! code with the library element: physical-coordinate Hermite factors, Golub–Welsch
//! Gauss points, and the non-integrated form of the `b` integrand for every `n`.

use nalgebra::{DMatrix, SymmetricEigen};
use tefem_core::assembly::{assemble_matrices, DofMap};
use tefem_core::element::ShapeTable;
use tefem_core::{DomainSpec, Mesh, RefractionIndex};

fn gauss(p: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(p, p);
    for k in 1..p {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let e = SymmetricEigen::new(j);
    (0..p)
        .map(|i| (0.5 * (e.eigenvalues[i] + 1.0), e.eigenvectors[(0, i)].powi(2)))
        .collect()
}

/// Value and first two derivatives of the 1-D Hermite factor attached to node `x0`
/// on an interval of length `s`, evaluated at `x`.
fn factor(slope: bool, x0: f64, s: f64, x: f64) -> [f64; 3] {
    let sigma = if x >= x0 { 1.0 } else { -1.0 };
    let t = (x - x0).abs() / s;
    if slope {
        [sigma * s * t * (1.0 - t).powi(2), (1.0 - t) * (1.0 - 3.0 * t), (6.0 * t - 4.0) * sigma / s]
    } else {
        [1.0 - 3.0 * t * t + 2.0 * t.powi(3), (-6.0 * t + 6.0 * t * t) * sigma / s, (-6.0 + 12.0 * t) / (s * s)]
    }
}

/// `[phi, phi_x, phi_y, laplacian]` of the global function for (node at `p`, kind `d`).
fn global(p: [f64; 2], d: usize, s: f64, x: f64, y: f64) -> [f64; 4] {
    let fx = factor(d == 1 || d == 3, p[0], s, x);
    let fy = factor(d == 2 || d == 3, p[1], s, y);
    [fx[0] * fy[0], fx[1] * fy[0], fx[0] * fy[1], fx[2] * fy[0] + fx[0] * fy[2]]
}

struct Blocks {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

fn oracle(mesh: &Mesh<f64>, n: impl Fn(f64, f64) -> f64) -> Blocks {
    let dofs = DofMap::new(mesh);
    let nf = dofs.n_free;
    let s = mesh.cell_side();
    let rule = gauss(8);
    let mut out = Blocks {
        a: DMatrix::zeros(nf, nf),
        b: DMatrix::zeros(nf, nf),
        c: DMatrix::zeros(nf, nf),
        d: DMatrix::zeros(nf, nf),
    };
    for cell in &mesh.cells {
        let o = mesh.nodes[cell[0]];
        let mut members: Vec<(usize, [f64; 2], usize)> = Vec::new();
        for &node in cell {
            for k in 0..4 {
                if let Some(g) = dofs.dof(node, k) {
                    members.push((g, mesh.nodes[node], k));
                }
            }
        }
        for &(qx, wx) in &rule {
            for &(qy, wy) in &rule {
                let (x, y) = (o[0] + qx * s, o[1] + qy * s);
                let w = wx * wy * s * s;
                let g = 1.0 / (n(x, y) - 1.0);
                let vals: Vec<[f64; 4]> = members.iter().map(|&(_, p, k)| global(p, k, s, x, y)).collect();
                for (i, &(gi, _, _)) in members.iter().enumerate() {
                    for (l, &(gl, _, _)) in members.iter().enumerate() {
                        let (pi, pl) = (vals[i], vals[l]);
                        let grad = pi[1] * pl[1] + pi[2] * pl[2];
                        out.a[(gi, gl)] += w * g * pi[3] * pl[3];
                        out.b[(gi, gl)] -= w * (g * pi[0] * pl[3] + g * pi[3] * pl[0] - grad);
                        out.c[(gi, gl)] -= w * (1.0 + g) * pi[0] * pl[0];
                        out.d[(gi, gl)] += w * pi[0] * pl[0];
                    }
                }
            }
        }
    }
    out
}

fn max_rel(lib: &tefem_core::SparseMatrix<f64>, dense: &DMatrix<f64>) -> f64 {
    let got = lib.to_dense();
    let scale = dense.amax();
    let mut worst = 0.0f64;
    for i in 0..dense.nrows() {
        for j in 0..dense.ncols() {
            worst = worst.max((got[i][j] - dense[(i, j)]).abs() / scale);
        }
    }
    worst
}

fn compare(domain: DomainSpec, nsub: usize, n: RefractionIndex<f64>, tol: f64) {
    let mesh = Mesh::build(domain, nsub).unwrap();
    let quad = ShapeTable::new(n.default_quad_order()).unwrap();
    let lib = assemble_matrices(&mesh, &n, &quad).unwrap();
    let want = oracle(&mesh, |x, y| n.value(x, y));
    for (name, l, o) in [("A", &lib.a, &want.a), ("B", &lib.b, &want.b), ("C", &lib.c, &want.c), ("D", &lib.d, &want.d)] {
        let e = max_rel(l, o);
        assert!(e <= tol, "{name} on {domain:?} N={nsub}: {e:e}");
    }
}

#[test]
fn gauss_oracle_is_exact_for_degree_fifteen() {
    let s: f64 = gauss(8).iter().map(|(x, w)| w * x.powi(15)).sum();
    assert!((s - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn single_free_node_constant_index() {
    compare(DomainSpec::UnitSquare, 2, RefractionIndex::Constant(16.0), 1e-13);
}

#[test]
fn lshape_constant_index() {
    compare(DomainSpec::LShape, 2, RefractionIndex::Constant(16.0), 1e-13);
}

#[test]
fn affine_index_matches_non_integrated_form() {
    // the library integrates the b-form by parts and uses 5 points; only quadrature error remains
    compare(DomainSpec::UnitSquare, 3, RefractionIndex::Affine(8.0, 1.0, -1.0), 1e-7);
    compare(DomainSpec::LShape, 2, RefractionIndex::Affine(8.0, 1.0, -1.0), 1e-7);
}

#[test]
fn stiffness_with_one_free_node_is_positive_definite() {
    let mesh = Mesh::build(DomainSpec::UnitSquare, 2).unwrap();
    let quad = ShapeTable::new(4).unwrap();
    let lib = assemble_matrices(&mesh, &RefractionIndex::Constant(16.0), &quad).unwrap();
    let a = lib.a.to_dense();
    assert_eq!(a.len(), 4);
    let m = DMatrix::from_fn(4, 4, |i, j| a[i][j]);
    assert!(SymmetricEigen::new(m).eigenvalues.iter().all(|&v| v > 0.0));
}
