//! Real nonsymmetric eigenvalues: Householder reduction to upper Hessenberg form,
//! Francis double-shift QR, and eigenvectors by inverse iteration.

use num_complex::Complex;
use rand::{Rng, SeedableRng};

use super::dense::ComplexLu;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues (and optionally eigenvectors) of a small real matrix.
#[derive(Debug, Clone)]
pub struct HessenbergEig<T> {
    pub values: Vec<Complex<T>>,
    /// Unit 2-norm eigenvectors, one per value, when requested.
    pub vectors: Option<Vec<Vec<Complex<T>>>>,
}

/// Reduces a dense square matrix to upper Hessenberg form in place.
pub fn reduce_to_hessenberg<T: Real>(a: &mut [Vec<T>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha_sq: T = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum();
        let alpha = alpha_sq.sqrt();
        if alpha == T::zero() {
            continue;
        }
        let sign = if a[k + 1][k] >= T::zero() { T::one() } else { -T::one() };
        let mut v: Vec<T> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] += sign * alpha;
        let vnorm_sq: T = v.iter().map(|x| *x * *x).sum();
        if vnorm_sq == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        // A <- (I - 2vv^T/v^Tv) A
        for j in 0..n {
            let s: T = v.iter().enumerate().map(|(t, vt)| *vt * a[k + 1 + t][j]).sum();
            let f = two * s / vnorm_sq;
            for (t, vt) in v.iter().enumerate() {
                a[k + 1 + t][j] -= f * *vt;
            }
        }
        // A <- A (I - 2vv^T/v^Tv)
        for row in a.iter_mut() {
            let s: T = v.iter().enumerate().map(|(t, vt)| *vt * row[k + 1 + t]).sum();
            let f = two * s / vnorm_sq;
            for (t, vt) in v.iter().enumerate() {
                row[k + 1 + t] -= f * *vt;
            }
        }
        for i in k + 2..n {
            a[i][k] = T::zero();
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.
pub fn hessenberg_eigenvalues<T: Real>(h: &[Vec<T>]) -> Result<HessenbergEig<T>> {
    let values = francis_qr(h)?;
    Ok(HessenbergEig { values, vectors: None })
}

/// Eigenvalues and eigenvectors of an upper Hessenberg matrix.
pub fn hessenberg_eigen<T: Real>(h: &[Vec<T>]) -> Result<HessenbergEig<T>> {
    let values = francis_qr(h)?;
    let vectors = inverse_iteration(h, &values)?;
    Ok(HessenbergEig { values, vectors: Some(vectors) })
}

/// Eigenvalues and optionally eigenvectors of a general dense real matrix.
pub fn dense_eigen<T: Real>(a: &[Vec<T>], with_vectors: bool) -> Result<HessenbergEig<T>> {
    let mut h = a.to_vec();
    reduce_to_hessenberg(&mut h);
    let values = francis_qr(&h)?;
    let vectors = if with_vectors { Some(inverse_iteration(a, &values)?) } else { None };
    Ok(HessenbergEig { values, vectors })
}

/// Francis double-shift QR with deflation on `|h[l][l-1]| <= eps (|h[l-1][l-1]| + |h[l][l]|)`.
/// At most `100 m` sweeps are performed.
fn francis_qr<T: Real>(h: &[Vec<T>]) -> Result<Vec<Complex<T>>> {
    let n = h.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy
    let mut a = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[i][j];
        }
    }
    let eps = T::epsilon();
    let zero = T::zero();
    let sign = |a: T, b: T| if b >= zero { a.abs() } else { -a.abs() };
    let mut anorm = zero;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];
    let limit = 100 * n;
    let mut sweeps = 0usize;
    let mut nn = n;
    let mut t = zero;
    while nn >= 1 {
        let mut its = 0usize;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == zero {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = T::lit(0.5) * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= zero {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != zero {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = zero;
                    wi[nn] = zero;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            sweeps += 1;
            if sweeps > limit {
                return Err(Error::IterationLimit { limit });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = zero;
                if i != m + 2 {
                    a[i][i - 3] = zero;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = zero;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != zero {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

/// Eigenvectors for the given eigenvalues by inverse iteration on shifted complex copies.
///
/// Vectors of (numerically) repeated eigenvalues are kept mutually orthogonal, and
/// vectors of conjugate eigenvalues are exact conjugates.
pub fn inverse_iteration<T: Real>(a: &[Vec<T>], values: &[Complex<T>]) -> Result<Vec<Vec<Complex<T>>>> {
    let n = a.len();
    let zero = Complex::new(T::zero(), T::zero());
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()))
        .max(T::min_positive_value());
    let cluster_tol = T::lit(1e-7) * scale;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out: Vec<Vec<Complex<T>>> = Vec::with_capacity(values.len());
    for (idx, &theta) in values.iter().enumerate() {
        if theta.im < T::zero() {
            // conjugate partner already computed?
            let partner = (0..idx).find(|&j| {
                let v = values[j];
                (v.re - theta.re).abs() <= cluster_tol && (v.im + theta.im).abs() <= cluster_tol && v.im > T::zero()
            });
            if let Some(j) = partner {
                let conj = out[j].iter().map(|z| z.conj()).collect();
                out.push(conj);
                continue;
            }
        }
        let siblings: Vec<usize> = (0..idx).filter(|&j| (values[j] - theta).norm() <= cluster_tol).collect();
        let shifted: Vec<Vec<Complex<T>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let v = Complex::new(a[i][j], T::zero());
                        if i == j {
                            v - theta
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let lu = ComplexLu::new(shifted, true)?;
        let mut v: Vec<Complex<T>> = (0..n)
            .map(|_| Complex::new(T::lit(rng.gen_range(0.5..1.5)), T::zero()))
            .collect();
        for _ in 0..4 {
            orthogonalize(&mut v, siblings.iter().map(|&j| &out[j]));
            normalize(&mut v);
            v = lu.solve(&v);
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::SingularSystem);
            }
        }
        orthogonalize(&mut v, siblings.iter().map(|&j| &out[j]));
        normalize(&mut v);
        if v.iter().all(|z| *z == zero) {
            return Err(Error::SingularSystem);
        }
        out.push(v);
    }
    Ok(out)
}

fn orthogonalize<'a, T: Real + 'a>(v: &mut [Complex<T>], basis: impl Iterator<Item = &'a Vec<Complex<T>>> + Clone) {
    for _ in 0..2 {
        for b in basis.clone() {
            let c: Complex<T> = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
}

fn normalize<T: Real>(v: &mut [Complex<T>]) {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if nrm > T::zero() {
        v.iter_mut().for_each(|z| *z = *z / nrm);
    }
}
