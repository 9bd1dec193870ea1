//! Small dense complex systems.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square complex matrix.
pub type ComplexMatrix<T> = Vec<Vec<Complex<T>>>;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct ComplexLu<T> {
    lu: ComplexMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> ComplexLu<T> {
    /// Factors `a`. Pivots smaller than `eps * n * max|a|` are an error unless
    /// `perturb` is set, in which case they are replaced by that threshold
    /// (the usual trick for inverse iteration at a computed eigenvalue).
    pub fn new(mut a: ComplexMatrix<T>, perturb: bool) -> Result<Self> {
        let n = a.len();
        let amax = a
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |m, z| m.max(z.norm()));
        let floor = T::epsilon() * T::from_usize_lossy(n.max(1)) * amax.max(T::min_positive_value());
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i][k].norm()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            a.swap(k, p);
            perm.swap(k, p);
            if pmax <= floor {
                if !perturb {
                    return Err(Error::SingularSystem);
                }
                a[k][k] = Complex::new(floor, T::zero());
            }
            let piv = a[k][k];
            for i in k + 1..n {
                let f = a[i][k] / piv;
                if f == Complex::new(T::zero(), T::zero()) {
                    continue;
                }
                a[i][k] = f;
                let (top, bottom) = a.split_at_mut(i);
                let rk = &top[k];
                for (x, &y) in bottom[0][k + 1..].iter_mut().zip(&rk[k + 1..]) {
                    *x -= f * y;
                }
            }
        }
        Ok(ComplexLu { lu: a, perm })
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.lu.len();
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i][k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[i][k] * x[k];
            }
            x[i] = s / self.lu[i][i];
        }
        x
    }
}

/// Solves `G x = rhs` by partial-pivot elimination.
pub fn dense_solve_complex<T: Real>(g: &ComplexMatrix<T>, rhs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let n = g.len();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rhs.len() });
    }
    if let Some(bad) = g.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
    }
    Ok(ComplexLu::new(g.clone(), false)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    type C = Complex<f64>;

    #[test]
    fn identity_and_diagonal() {
        let id = vec![vec![C::new(1.0, 0.0), C::new(0.0, 0.0)], vec![C::new(0.0, 0.0), C::new(1.0, 0.0)]];
        let b = vec![C::new(3.0, -1.0), C::new(0.5, 2.0)];
        assert_eq!(dense_solve_complex(&id, &b).unwrap(), b);
        let g = vec![vec![C::new(2.0, 0.0), C::new(0.0, 0.0)], vec![C::new(0.0, 0.0), C::new(0.0, 1.0)]];
        let x = dense_solve_complex(&g, &[C::new(2.0, 0.0), C::new(0.0, 1.0)]).unwrap();
        assert!((x[0] - C::new(1.0, 0.0)).norm() < 1e-15 && (x[1] - C::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 5;
        let g: ComplexMatrix<f64> = (0..n)
            .map(|_| (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect();
        let b: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let x = dense_solve_complex(&g, &b).unwrap();
        let r: f64 = (0..n)
            .map(|i| (g[i].iter().zip(&x).map(|(a, b)| a * b).sum::<C>() - b[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(r <= 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let z = C::new(0.0, 0.0);
        let o = C::new(1.0, 0.0);
        let g = vec![vec![o, o], vec![o, o]];
        assert!(matches!(dense_solve_complex(&g, &[o, z]), Err(Error::SingularSystem)));
        assert!(matches!(dense_solve_complex(&g, &[o]), Err(Error::DimensionMismatch { .. })));
    }
}
