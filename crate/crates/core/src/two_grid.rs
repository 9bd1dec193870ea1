//! Two-grid eigenvalue correction.
//!
//! The eigenproblem is solved only on a coarse mesh. The coarse primal vector and a
//! dual vector projected onto the dual eigenspace are prolonged to the fine mesh,
//! each is improved by one linear solve with the fine `K`, and the eigenvalue is
//! recovered from the two-sided Rayleigh quotient `y^T K x / y^T M x`.
//!
//! Both levels use the pencil with the genuine `D` block (identity trick off): the
//! dual vectors and the fine-level quotient are only consistent in that form.

use num_complex::Complex;
use rand::{Rng, SeedableRng};

use crate::arnoldi::{
    pair_dual, pencil_residual, principal_sqrt, solve_dual_with, solve_primal_with, to_c64, ArnoldiOptions,
    DualPair, SpectrumResult,
};
use crate::assembly::{assemble_pencil, bilinear, BlockPencil, DofMap, RefractionIndex};
use crate::element::{eval_local, DOFS_PER_NODE, NUM_BASIS};
use crate::error::{Error, Result};
use crate::linalg::{ComplexLu, SpdFactor};
use crate::mesh::{DomainSpec, Mesh, NestingMap};
use crate::scalar::Real;
use crate::sparse::{SparseMatrix, Triplets};

type C<T> = Complex<T>;

/// Coarse-level input to the correction.
#[derive(Debug, Clone)]
pub struct CoarsePair<T> {
    pub lambda: C<T>,
    pub k: C<T>,
    /// Primal coarse vector, unit A-norm.
    pub x: Vec<C<T>>,
    /// Projected dual vector in raw (bilinear pairing) form, unit A-norm.
    pub y_star_raw: Vec<C<T>>,
    /// Number of dual vectors in the projection basis.
    pub q_used: usize,
    /// `y*^T M x` on the coarse mesh.
    pub b_value: C<T>,
}

#[derive(Debug, Clone)]
pub struct TwoGridResult<T> {
    /// Corrected eigenvalue `lambda^h`.
    pub lambda: C<T>,
    pub k: C<T>,
    pub x_fine: Vec<C<T>>,
    pub y_fine: Vec<C<T>>,
    pub coarse: CoarsePair<T>,
    /// `|y_fine^T M x_fine|`
    pub b_fine: T,
    /// `||K x - lambda^h M x||_2 / ||x||_2` for the fine primal vector.
    pub residual: T,
    /// Same for the fine dual vector against `M^T`.
    pub dual_residual: T,
}

/// Exact re-representation of coarse bicubic fields on a nested fine mesh, as a
/// sparse matrix from coarse to fine free DOFs of one field.
#[derive(Debug, Clone)]
pub struct Prolongation<T> {
    matrix: SparseMatrix<T>,
}

impl<T: Real> Prolongation<T> {
    pub fn new(nesting: &NestingMap<T>) -> Result<Self> {
        let (coarse, fine) = (&nesting.coarse, &nesting.fine);
        let (cdofs, fdofs) = (DofMap::new(coarse), DofMap::new(fine));
        let side = coarse.cell_side();
        let mut trip = Triplets::new(fdofs.n_free, cdofs.n_free);
        for (node, p) in fine.nodes.iter().enumerate() {
            if fdofs.dof(node, 0).is_none() {
                continue;
            }
            let (cell, xi, eta) = coarse
                .locate(p[0], p[1])
                .ok_or_else(|| Error::Nesting(format!("fine node {node} outside the coarse mesh")))?;
            for b in 0..NUM_BASIS {
                let Some(col) = cdofs.dof(coarse.cells[cell][b / 4], b % 4) else {
                    continue;
                };
                let mut unit = [T::zero(); NUM_BASIS];
                unit[b] = T::one();
                let vals = eval_local(&unit, xi, eta, side);
                for (kind, &v) in vals.iter().take(DOFS_PER_NODE).enumerate() {
                    if v != T::zero() {
                        trip.push(fdofs.dof(node, kind).unwrap(), col, v);
                    }
                }
            }
        }
        Ok(Prolongation { matrix: trip.build() })
    }

    pub fn coarse_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn fine_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// One scalar field.
    pub fn apply_field(&self, coarse: &[T]) -> Vec<T> {
        self.matrix.mul_vec(coarse)
    }

    /// Two-field complex vector `[u; omega]`.
    pub fn apply(&self, coarse: &[C<T>]) -> Result<Vec<C<T>>> {
        let nc = self.coarse_dim();
        if coarse.len() != 2 * nc {
            return Err(Error::DimensionMismatch { expected: 2 * nc, got: coarse.len() });
        }
        let mut out = Vec::with_capacity(2 * self.fine_dim());
        for half in coarse.chunks(nc) {
            let re: Vec<T> = half.iter().map(|z| z.re).collect();
            let im: Vec<T> = half.iter().map(|z| z.im).collect();
            out.extend(self.apply_field(&re).into_iter().zip(self.apply_field(&im)).map(|(r, i)| C::new(r, i)));
        }
        Ok(out)
    }
}

/// Prolongs a two-field coarse vector to the fine mesh of `nesting`.
pub fn prolongate<T: Real>(nesting: &NestingMap<T>, coarse_vec: &[C<T>]) -> Result<Vec<C<T>>> {
    Prolongation::new(nesting)?.apply(coarse_vec)
}

/// Element of the span of the dual vectors closest to `x` in the A-inner product,
/// normalized to unit A-norm and returned in raw form.
///
/// Raw dual vectors are conjugated into function coefficients `c_i`; the Gram system
/// `sum_i beta_i c_l^H K c_i = c_l^H K x` gives `u = sum_i beta_i c_i`.
pub fn project_dual<T: Real>(pencil: &BlockPencil<T>, x: &[C<T>], duals: &[&[C<T>]]) -> Result<Vec<C<T>>> {
    let n = pencil.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if duals.is_empty() {
        return Err(Error::DegenerateCluster);
    }
    let coeffs: Vec<Vec<C<T>>> = duals
        .iter()
        .map(|y| {
            if y.len() != n {
                Err(Error::DimensionMismatch { expected: n, got: y.len() })
            } else {
                Ok(y.iter().map(|z| z.conj()).collect())
            }
        })
        .collect::<Result<_>>()?;
    let kc: Vec<Vec<C<T>>> = coeffs.iter().map(|c| pencil.k.mul_vec_complex(c)).collect();
    let kx = pencil.k.mul_vec_complex(x);
    let q = coeffs.len();
    let herm = |a: &[C<T>], b: &[C<T>]| -> C<T> { a.iter().zip(b).map(|(p, r)| p.conj() * r).sum() };
    let gram: Vec<Vec<C<T>>> = (0..q).map(|l| (0..q).map(|i| herm(&coeffs[l], &kc[i])).collect()).collect();
    let rhs: Vec<C<T>> = (0..q).map(|l| herm(&coeffs[l], &kx)).collect();
    let beta = ComplexLu::new(gram, false)
        .map_err(|e| match e {
            Error::SingularSystem => Error::DegenerateCluster,
            other => other,
        })?
        .solve(&rhs);
    let mut u = vec![C::new(T::zero(), T::zero()); n];
    for (b, c) in beta.iter().zip(&coeffs) {
        u.iter_mut().zip(c).for_each(|(ui, ci)| *ui += b * ci);
    }
    let norm = pencil.a_norm(&u);
    if !(norm > T::lit(1e-12)) {
        return Err(Error::ProjectionCollapse { norm: norm.to_f64_lossy() });
    }
    Ok(u.iter().map(|z| (z / norm).conj()).collect())
}

/// Coarse primal and dual spectra, the fine pencil and its factor, and the prolongation.
/// Corrections for several eigenvalues reuse all of them.
pub struct TwoGridSolver<T> {
    pub coarse_pencil: BlockPencil<T>,
    pub fine_pencil: BlockPencil<T>,
    pub coarse_spectrum: SpectrumResult<T>,
    pub coarse_dual: Vec<DualPair<T>>,
    fine_mt: SparseMatrix<T>,
    fine_factor: SpdFactor<T>,
    prolongation: Prolongation<T>,
}

impl<T: Real> TwoGridSolver<T> {
    /// Solves the coarse eigenproblem for `nev` eigenvalues (plus two to complete a
    /// trailing cluster) and prepares the fine level.
    pub fn new(
        domain: DomainSpec,
        n: &RefractionIndex<T>,
        n_coarse: usize,
        n_fine: usize,
        nev: usize,
        opts: &ArnoldiOptions,
    ) -> Result<Self> {
        let coarse = Mesh::build(domain, n_coarse)?;
        let fine = Mesh::build(domain, n_fine)?;
        let nesting = NestingMap::build(&coarse, &fine)?;
        let coarse_pencil = assemble_pencil(&coarse, n, false)?;
        let fine_pencil = assemble_pencil(&fine, n, false)?;
        Self::from_parts(&nesting, coarse_pencil, fine_pencil, nev, opts)
    }

    pub fn from_parts(
        nesting: &NestingMap<T>,
        coarse_pencil: BlockPencil<T>,
        fine_pencil: BlockPencil<T>,
        nev: usize,
        opts: &ArnoldiOptions,
    ) -> Result<Self> {
        if coarse_pencil.identity_trick || fine_pencil.identity_trick {
            return Err(Error::InvalidArgument("two-grid correction needs pencils without the identity trick".into()));
        }
        let prolongation = Prolongation::new(nesting)?;
        for (want, got) in [(coarse_pencil.n_free, prolongation.coarse_dim()), (fine_pencil.n_free, prolongation.fine_dim())] {
            if want != got {
                return Err(Error::DimensionMismatch { expected: want, got });
            }
        }
        let nev_c = (nev + 2).min(coarse_pencil.dim());
        let coarse_factor = SpdFactor::new(&coarse_pencil.k)?;
        let coarse_spectrum = solve_primal_with(&coarse_pencil, &coarse_factor, nev_c, opts)?;
        let coarse_dual = solve_dual_with(&coarse_pencil, &coarse_factor, nev_c, opts)?;
        pair_dual(&coarse_spectrum, &coarse_dual, 1e-6)?;
        let fine_factor = SpdFactor::new(&fine_pencil.k)?;
        let fine_mt = fine_pencil.m.transpose();
        Ok(TwoGridSolver { coarse_pencil, fine_pencil, coarse_spectrum, coarse_dual, fine_mt, fine_factor, prolongation })
    }

    /// Coarse eigenpair `index` (0-based) with its projected dual vector.
    pub fn coarse_pair(&self, index: usize, cluster_tol: f64) -> Result<CoarsePair<T>> {
        let pair = self
            .coarse_spectrum
            .pairs
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("eigenvalue index {index} not computed on the coarse mesh")))?;
        let lambda = pair.lambda;
        let tol = T::lit(cluster_tol.max(1e-6));
        let q = self.coarse_spectrum.cluster_of(index).len().max(1);
        let mut near: Vec<(T, &DualPair<T>)> = self
            .coarse_dual
            .iter()
            .map(|d| ((d.lambda - lambda).norm() / lambda.norm(), d))
            .filter(|(dist, _)| *dist <= tol)
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        near.truncate(q);
        if near.is_empty() {
            return Err(Error::Pairing { lambda: to_c64(lambda) });
        }
        let basis: Vec<&[C<T>]> = near.iter().map(|(_, d)| d.y_raw.as_slice()).collect();
        let y_star_raw = project_dual(&self.coarse_pencil, &pair.x, &basis)?;
        let (_, b_value) = self.coarse_pencil.evaluate_forms(&pair.x, &y_star_raw)?;
        Ok(CoarsePair { lambda, k: pair.k, x: pair.x.clone(), y_star_raw, q_used: basis.len(), b_value })
    }

    /// Corrected eigenvalue for coarse index `index` (0-based).
    pub fn solve(&self, index: usize, cluster_tol: f64) -> Result<TwoGridResult<T>> {
        let coarse = self.coarse_pair(index, cluster_tol)?;
        self.correct(coarse)
    }

    /// Fine-level solves and Rayleigh quotient for a prepared coarse pair.
    pub fn correct(&self, coarse: CoarsePair<T>) -> Result<TwoGridResult<T>> {
        let lambda_h = coarse.lambda;
        let px = self.prolongation.apply(&coarse.x)?;
        let py = self.prolongation.apply(&coarse.y_star_raw)?;
        let scale = |v: Vec<C<T>>| -> Vec<C<T>> { v.into_iter().map(|z| z * lambda_h).collect() };
        let rhs_x = scale(self.fine_pencil.m.mul_vec_complex(&px));
        let rhs_y = scale(self.fine_mt.mul_vec_complex(&py));
        let (x_fine, y_fine) = rayon::join(
            || self.fine_factor.solve_complex(&rhs_x),
            || self.fine_factor.solve_complex(&rhs_y),
        );
        let (a_val, b_val) = self.fine_pencil.evaluate_forms(&x_fine, &y_fine)?;
        let norm = |v: &[C<T>]| v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if b_val.norm() <= T::lit(1e-12) * norm(&x_fine) * norm(&y_fine) {
            return Err(Error::QuotientDegenerate { value: b_val.norm().to_f64_lossy() });
        }
        let lambda = a_val / b_val;
        let residual = pencil_residual(&self.fine_pencil.k, &self.fine_pencil.m, lambda, &x_fine);
        let dual_residual = pencil_residual(&self.fine_pencil.k, &self.fine_mt, lambda, &y_fine);
        Ok(TwoGridResult {
            lambda,
            k: principal_sqrt(lambda),
            x_fine,
            y_fine,
            coarse,
            b_fine: b_val.norm(),
            residual,
            dual_residual,
        })
    }
}

/// One-shot two-grid correction of coarse eigenvalue `index` (0-based).
pub fn two_grid_solve<T: Real>(
    domain: DomainSpec,
    n: &RefractionIndex<T>,
    n_coarse: usize,
    n_fine: usize,
    index: usize,
    opts: &ArnoldiOptions,
) -> Result<TwoGridResult<T>> {
    TwoGridSolver::new(domain, n, n_coarse, n_fine, index + 1, opts)?.solve(index, opts.cluster_tol)
}

/// Both sides of the error identity for the two-sided Rayleigh quotient:
///
/// `R(v, v*) - lambda = [A(v - x, v* - y) - lambda B(v - x, v* - y)] / B(v, v*)`
///
/// with `A = y^T K x`, `B = y^T M x`. Returns `|lhs - rhs|`.
pub fn rayleigh_identity_deviation<T: Real>(
    pencil: &BlockPencil<T>,
    lambda: C<T>,
    x: &[C<T>],
    y_raw: &[C<T>],
    v: &[C<T>],
    v_star: &[C<T>],
) -> Result<T> {
    let (av, bv) = pencil.evaluate_forms(v, v_star)?;
    let dx: Vec<C<T>> = v.iter().zip(x).map(|(a, b)| a - b).collect();
    let dy: Vec<C<T>> = v_star.iter().zip(y_raw).map(|(a, b)| a - b).collect();
    let (ad, bd) = pencil.evaluate_forms(&dx, &dy)?;
    let lhs = av / bv - lambda;
    let rhs = (ad - lambda * bd) / bv;
    Ok((lhs - rhs).norm())
}

/// Maximum identity deviation over `samples` random pairs `(x + e, y + e*)`.
/// Pairs with `|B(v, v*)|` below `1e-3 ||M v|| ||v*||` are redrawn, at most 50 times each.
pub fn rayleigh_identity_check<T: Real>(
    pencil: &BlockPencil<T>,
    lambda: C<T>,
    x: &[C<T>],
    y_raw: &[C<T>],
    samples: usize,
    seed: u64,
) -> Result<T> {
    let n = pencil.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let norm = |v: &[C<T>]| v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let (nx, ny) = (norm(x), norm(y_raw));
    let mut worst = T::zero();
    for _ in 0..samples {
        let mut accepted = None;
        for _ in 0..50 {
            let mut draw = |base: &[C<T>], scale: T| -> Vec<C<T>> {
                let s = scale / T::from_usize_lossy(n).sqrt();
                base.iter()
                    .map(|b| b + C::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0))) * s)
                    .collect()
            };
            let v = draw(x, nx);
            let vs = draw(y_raw, ny);
            let mv = pencil.m.mul_vec_complex(&v);
            if bilinear(&vs, &mv).norm() >= T::lit(1e-3) * norm(&mv) * norm(&vs) {
                accepted = Some((v, vs));
                break;
            }
        }
        let (v, vs) = accepted.ok_or(Error::QuotientDegenerate { value: 0.0 })?;
        worst = worst.max(rayleigh_identity_deviation(pencil, lambda, x, y_raw, &v, &vs)?);
    }
    Ok(worst)
}
