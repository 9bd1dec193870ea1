//! Global matrices of the linearized transmission problem and the block pencil `(K, M)`.
//!
//! With `g = 1/(n-1)` the four blocks are
//!
//! * `a(l,i) = int g lap(xi_i) lap(xi_l)`
//! * `b(l,i) = -int { g xi_i lap(xi_l) + g lap(xi_i) xi_l - grad xi_i . grad xi_l }` for constant `n`,
//!   `b(l,i) = int { grad(g xi_i) . grad xi_l + grad xi_i . grad((1+g) xi_l) }` for affine `n`
//! * `c(l,i) = -int n g xi_i xi_l`
//! * `d(l,i) = int xi_i xi_l`
//!
//! and the pencil is `K = diag(A, D)`, `M = [[B, C], [D, 0]]`.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;

use crate::element::{eval_local, ShapeTable, DOFS_PER_NODE, NUM_BASIS};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;
use crate::sparse::{SparseMatrix, Triplets};

/// Smallest admissible `inf n - 1`.
pub const MIN_CONTRAST: f64 = 1e-8;

/// Index of refraction `n(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefractionIndex<T> {
    Constant(T),
    /// `n(x) = c0 + c1 x1 + c2 x2`
    Affine(T, T, T),
}

impl<T: Real> RefractionIndex<T> {
    #[inline]
    pub fn value(&self, x: T, y: T) -> T {
        match *self {
            RefractionIndex::Constant(c) => c,
            RefractionIndex::Affine(c0, c1, c2) => c0 + c1 * x + c2 * y,
        }
    }

    #[inline]
    pub fn gradient(&self) -> [T; 2] {
        match *self {
            RefractionIndex::Constant(_) => [T::zero(); 2],
            RefractionIndex::Affine(_, c1, c2) => [c1, c2],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RefractionIndex::Constant(_))
    }

    /// Quadrature order that integrates the polynomial part of every block exactly.
    pub fn default_quad_order(&self) -> usize {
        if self.is_constant() {
            4
        } else {
            5
        }
    }

    /// Checks `n > 1` (with margin) at every cell corner and center.
    pub fn validate(&self, mesh: &Mesh<T>) -> Result<()> {
        let half = mesh.cell_side() * T::lit(0.5);
        let check = |x: T, y: T| -> Result<()> {
            let n = self.value(x, y);
            if n - T::one() >= T::lit(MIN_CONTRAST) {
                Ok(())
            } else {
                Err(Error::Model(format!("n({x}, {y}) = {n}")))
            }
        };
        for p in &mesh.nodes {
            check(p[0], p[1])?;
        }
        for c in 0..mesh.num_cells() {
            let o = mesh.cell_origin(c);
            check(o[0] + half, o[1] + half)?;
        }
        Ok(())
    }
}

/// Free-DOF numbering shared by both fields. Every DOF at a boundary node is clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    node_free: Vec<Option<usize>>,
    /// Free DOFs per scalar field.
    pub n_free: usize,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let mut next = 0usize;
        let node_free = (0..mesh.num_nodes())
            .map(|k| {
                if mesh.is_boundary(k) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        DofMap { node_free, n_free: next * DOFS_PER_NODE }
    }

    /// Index within one field of DOF `kind` at `node`, if free.
    #[inline]
    pub fn dof(&self, node: usize, kind: usize) -> Option<usize> {
        self.node_free[node].map(|f| f * DOFS_PER_NODE + kind)
    }

    /// Global index of a `u` DOF in the two-field system.
    pub fn u_index(&self, node: usize, kind: usize) -> Option<usize> {
        self.dof(node, kind)
    }

    /// Global index of an `omega` DOF in the two-field system.
    pub fn w_index(&self, node: usize, kind: usize) -> Option<usize> {
        self.dof(node, kind).map(|d| d + self.n_free)
    }

    /// Local DOF vector of a cell, gathered from one field.
    pub fn gather<T: Real>(&self, mesh: &Mesh<T>, cell: usize, field: &[T]) -> [T; NUM_BASIS] {
        let mut out = [T::zero(); NUM_BASIS];
        for (c, &node) in mesh.cells[cell].iter().enumerate() {
            for k in 0..DOFS_PER_NODE {
                if let Some(d) = self.dof(node, k) {
                    out[4 * c + k] = field[d];
                }
            }
        }
        out
    }

    /// Nodal interpolation of `f(x, y) = [u, u_x, u_y, u_xy]` into one field.
    pub fn interpolate<T: Real>(&self, mesh: &Mesh<T>, f: impl Fn(T, T) -> [T; 4]) -> Vec<T> {
        let mut v = vec![T::zero(); self.n_free];
        for (node, p) in mesh.nodes.iter().enumerate() {
            if self.node_free[node].is_some() {
                let vals = f(p[0], p[1]);
                for k in 0..DOFS_PER_NODE {
                    v[self.dof(node, k).unwrap()] = vals[k];
                }
            }
        }
        v
    }

    /// Evaluates `[u, u_x, u_y, u_xy, u_xx, u_yy]` of a field at a physical point.
    pub fn evaluate<T: Real>(&self, mesh: &Mesh<T>, field: &[T], x: T, y: T) -> Option<[T; 6]> {
        let (cell, xi, eta) = mesh.locate(x, y)?;
        Some(eval_local(&self.gather(mesh, cell, field), xi, eta, mesh.cell_side()))
    }
}

/// The four assembled blocks, restricted to free DOFs.
#[derive(Debug, Clone)]
pub struct FeMatrices<T> {
    pub a: SparseMatrix<T>,
    pub b: SparseMatrix<T>,
    pub c: SparseMatrix<T>,
    pub d: SparseMatrix<T>,
    pub dofs: DofMap,
}

type Local<T> = [[T; NUM_BASIS]; NUM_BASIS];

struct LocalBlocks<T> {
    a: Local<T>,
    b: Local<T>,
    c: Local<T>,
    d: Local<T>,
}

pub fn assemble_matrices<T: Real>(
    mesh: &Mesh<T>,
    n: &RefractionIndex<T>,
    quad: &ShapeTable<T>,
) -> Result<FeMatrices<T>> {
    n.validate(mesh)?;
    let dofs = DofMap::new(mesh);
    let side = mesh.cell_side();
    let jac = side * side;
    let phys = quad.physical(side);
    let grad_n = n.gradient();
    let constant = n.is_constant();

    let local = |cell: usize| -> LocalBlocks<T> {
        let o = mesh.cell_origin(cell);
        let zero = [[T::zero(); NUM_BASIS]; NUM_BASIS];
        let mut lb = LocalBlocks { a: zero, b: zero, c: zero, d: zero };
        for (q, &(xi, eta, w)) in quad.quad_points.iter().enumerate() {
            let (x, y) = (o[0] + xi * side, o[1] + eta * side);
            let nv = n.value(x, y);
            let g = T::one() / (nv - T::one());
            // grad g = -grad n / (n-1)^2
            let gg = [-grad_n[0] * g * g, -grad_n[1] * g * g];
            let wq = w * jac;
            let ph = &phys[q];
            for l in 0..NUM_BASIS {
                let [pl, plx, ply, plxx, plyy] = ph[l];
                let lap_l = plxx + plyy;
                for i in l..NUM_BASIS {
                    let [pi, pix, piy, pixx, piyy] = ph[i];
                    let lap_i = pixx + piyy;
                    let grad = pix * plx + piy * ply;
                    let mass = pi * pl;
                    lb.a[l][i] += wq * g * lap_i * lap_l;
                    lb.d[l][i] += wq * mass;
                    lb.c[l][i] -= wq * (T::one() + g) * mass;
                    lb.b[l][i] += if constant {
                        -wq * (g * pi * lap_l + g * lap_i * pl - grad)
                    } else {
                        wq * ((T::one() + g + g) * grad
                            + gg[0] * (pi * plx + pl * pix)
                            + gg[1] * (pi * ply + pl * piy))
                    };
                }
            }
        }
        // every block is symmetric; mirror the upper triangle so K is bitwise symmetric
        for blk in [&mut lb.a, &mut lb.b, &mut lb.c, &mut lb.d] {
            for l in 0..NUM_BASIS {
                for i in 0..l {
                    blk[l][i] = blk[i][l];
                }
            }
        }
        lb
    };

    // per-cell work in parallel, insertion in cell order so the result is independent of scheduling
    let locals: Vec<LocalBlocks<T>> = (0..mesh.num_cells()).into_par_iter().map(local).collect();

    let nf = dofs.n_free;
    let cap = mesh.num_cells() * NUM_BASIS * NUM_BASIS;
    let mut ta = Triplets::with_capacity(nf, nf, cap);
    let mut tb = Triplets::with_capacity(nf, nf, cap);
    let mut tc = Triplets::with_capacity(nf, nf, cap);
    let mut td = Triplets::with_capacity(nf, nf, cap);
    for (cell, lb) in locals.iter().enumerate() {
        let map: Vec<Option<usize>> = (0..NUM_BASIS)
            .map(|b| dofs.dof(mesh.cells[cell][b / 4], b % 4))
            .collect();
        for l in 0..NUM_BASIS {
            let Some(gl) = map[l] else { continue };
            for i in 0..NUM_BASIS {
                let Some(gi) = map[i] else { continue };
                ta.push(gl, gi, lb.a[l][i]);
                tb.push(gl, gi, lb.b[l][i]);
                tc.push(gl, gi, lb.c[l][i]);
                td.push(gl, gi, lb.d[l][i]);
            }
        }
    }
    Ok(FeMatrices { a: ta.build(), b: tb.build(), c: tc.build(), d: td.build(), dofs })
}

/// Stiffness matrix `int grad xi_i . grad xi_l` on free DOFs.
pub fn assemble_stiffness<T: Real>(mesh: &Mesh<T>, quad: &ShapeTable<T>) -> SparseMatrix<T> {
    let dofs = DofMap::new(mesh);
    let side = mesh.cell_side();
    let phys = quad.physical(side);
    let mut t = Triplets::new(dofs.n_free, dofs.n_free);
    for cell in 0..mesh.num_cells() {
        for l in 0..NUM_BASIS {
            let Some(gl) = dofs.dof(mesh.cells[cell][l / 4], l % 4) else { continue };
            for i in 0..NUM_BASIS {
                let Some(gi) = dofs.dof(mesh.cells[cell][i / 4], i % 4) else { continue };
                let v: T = quad
                    .quad_points
                    .iter()
                    .zip(&phys)
                    .map(|(q, ph)| q.2 * side * side * (ph[i][1] * ph[l][1] + ph[i][2] * ph[l][2]))
                    .sum();
                t.push(gl, gi, v);
            }
        }
    }
    t.build()
}

/// Block pencil `K x = lambda M x` on the two-field space.
#[derive(Debug, Clone)]
pub struct BlockPencil<T> {
    pub k: SparseMatrix<T>,
    pub m: SparseMatrix<T>,
    pub identity_trick: bool,
    /// Free DOFs per field; the system size is `2 * n_free`.
    pub n_free: usize,
}

impl<T: Real> BlockPencil<T> {
    pub fn build(mats: &FeMatrices<T>, identity_trick: bool) -> Self {
        let nf = mats.dofs.n_free;
        let eye = SparseMatrix::identity(nf);
        let dd = if identity_trick { &eye } else { &mats.d };
        let k = SparseMatrix::block2x2(Some(&mats.a), None, None, Some(dd), nf);
        let m = SparseMatrix::block2x2(Some(&mats.b), Some(&mats.c), Some(dd), None, nf);
        BlockPencil { k, m, identity_trick, n_free: nf }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_free
    }

    /// `(y^T K x, y^T M x)`: the forms `A` and `B` between a primal vector and a raw dual vector.
    pub fn evaluate_forms(&self, x: &[Complex<T>], y_raw: &[Complex<T>]) -> Result<(Complex<T>, Complex<T>)> {
        let n = self.dim();
        for len in [x.len(), y_raw.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let kx = self.k.mul_vec_complex(x);
        let mx = self.m.mul_vec_complex(x);
        Ok((bilinear(y_raw, &kx), bilinear(y_raw, &mx)))
    }

    /// A-norm `sqrt(x^H K x)`.
    pub fn a_norm(&self, x: &[Complex<T>]) -> T {
        let kx = self.k.mul_vec_complex(x);
        x.iter().zip(&kx).map(|(a, b)| (a.conj() * b).re).sum::<T>().max(T::zero()).sqrt()
    }

    /// Writes `<prefix>_K.mtx` and `<prefix>_M.mtx`.
    pub fn export_matrix_market(&self, prefix: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let prefix = prefix.as_ref();
        let with_suffix = |s: &str| {
            let mut name = prefix.file_name().map(|f| f.to_os_string()).unwrap_or_default();
            name.push(s);
            prefix.with_file_name(name)
        };
        let (pk, pm) = (with_suffix("_K.mtx"), with_suffix("_M.mtx"));
        self.k.write_matrix_market(&pk)?;
        self.m.write_matrix_market(&pm)?;
        Ok((pk, pm))
    }
}

/// Assembles with the default quadrature order for `n` and builds the pencil.
pub fn assemble_pencil<T: Real>(mesh: &Mesh<T>, n: &RefractionIndex<T>, identity_trick: bool) -> Result<BlockPencil<T>> {
    let quad = ShapeTable::new(n.default_quad_order())?;
    Ok(BlockPencil::build(&assemble_matrices(mesh, n, &quad)?, identity_trick))
}

/// `y^T x` without conjugation.
#[inline]
pub fn bilinear<T: Real>(y: &[Complex<T>], x: &[Complex<T>]) -> Complex<T> {
    y.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// `y^H x`.
#[inline]
pub fn sesquilinear<T: Real>(y: &[Complex<T>], x: &[Complex<T>]) -> Complex<T> {
    y.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainSpec;

    fn mats(n: usize, r: RefractionIndex<f64>) -> FeMatrices<f64> {
        let mesh = Mesh::build(DomainSpec::UnitSquare, n).unwrap();
        let quad = ShapeTable::new(r.default_quad_order()).unwrap();
        assemble_matrices(&mesh, &r, &quad).unwrap()
    }

    #[test]
    fn sizes_on_n8() {
        let m = mats(8, RefractionIndex::Constant(16.0));
        assert_eq!(m.dofs.n_free, 196);
        for blk in [&m.a, &m.b, &m.c, &m.d] {
            assert_eq!((blk.nrows(), blk.ncols()), (196, 196));
        }
        assert_eq!(BlockPencil::build(&m, true).dim(), 392);
    }

    #[test]
    fn refraction_must_exceed_one() {
        let mesh = Mesh::<f64>::build(DomainSpec::UnitSquare, 4).unwrap();
        let quad = ShapeTable::new(4).unwrap();
        let r = assemble_matrices(&mesh, &RefractionIndex::Affine(1.5, -1.0, 0.0), &quad);
        assert!(matches!(r, Err(Error::Model(_))));
        let r = assemble_matrices(&mesh, &RefractionIndex::Constant(1.0), &quad);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn constant_b_is_scaled_stiffness() {
        let n = 16.0;
        let m = mats(4, RefractionIndex::Constant(n));
        let mesh = Mesh::build(DomainSpec::UnitSquare, 4).unwrap();
        let s: SparseMatrix<f64> = assemble_stiffness(&mesh, &ShapeTable::new(4).unwrap());
        let scale = m.b.max_abs();
        for (r, c, v) in s.iter() {
            assert!((m.b.get(r, c) - (n + 1.0) / (n - 1.0) * v).abs() <= 1e-12 * scale);
        }
        for (r, c, v) in m.b.iter() {
            assert!((m.b.get(c, r) - v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn affine_b_is_symmetric() {
        let m = mats(4, RefractionIndex::Affine(8.0, 1.0, -1.0));
        let scale = m.b.max_abs();
        for (r, c, v) in m.b.iter() {
            assert!((m.b.get(c, r) - v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn forms_on_unit_vector() {
        let p = BlockPencil::build(&mats(2, RefractionIndex::Constant(16.0)), true);
        let mut e = vec![Complex::new(0.0, 0.0); p.dim()];
        e[0] = Complex::new(1.0, 0.0);
        let (a, b) = p.evaluate_forms(&e, &e).unwrap();
        assert_eq!(a, Complex::new(p.k.get(0, 0), 0.0));
        assert_eq!(b, Complex::new(p.m.get(0, 0), 0.0));
        assert!(matches!(p.evaluate_forms(&e[1..], &e), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pencil_blocks() {
        let m = mats(3, RefractionIndex::Constant(4.0));
        let nf = m.dofs.n_free;
        for trick in [false, true] {
            let p = BlockPencil::build(&m, trick);
            for (r, c, v) in p.k.iter() {
                assert_eq!(p.k.get(c, r), v);
            }
            let expect_d = |r: usize, c: usize| if trick { f64::from(u8::from(r == c)) } else { m.d.get(r, c) };
            for r in 0..nf {
                for c in 0..nf {
                    assert_eq!(p.m.get(r, c), m.b.get(r, c));
                    assert_eq!(p.m.get(r, c + nf), m.c.get(r, c));
                    assert_eq!(p.m.get(r + nf, c), expect_d(r, c));
                    assert_eq!(p.m.get(r + nf, c + nf), 0.0);
                    assert_eq!(p.k.get(r + nf, c + nf), expect_d(r, c));
                }
            }
        }
    }

    #[test]
    fn export_roundtrip() {
        let p = BlockPencil::build(&mats(2, RefractionIndex::Constant(16.0)), false);
        let dir = tempfile::tempdir().unwrap();
        let (pk, pm) = p.export_matrix_market(dir.path().join("n2")).unwrap();
        assert!(pk.ends_with("n2_K.mtx") && pm.ends_with("n2_M.mtx"));
        assert_eq!(SparseMatrix::<f64>::read_matrix_market(&pk).unwrap(), p.k);
        assert_eq!(SparseMatrix::<f64>::read_matrix_market(&pm).unwrap(), p.m);
        let lines = std::fs::read_to_string(&pm).unwrap().lines().count();
        assert_eq!(lines, 2 + p.m.nnz());
    }
}
