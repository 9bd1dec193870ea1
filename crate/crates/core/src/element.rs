//! Bogner–Fox–Schmit bicubic Hermite rectangle on the reference cell `[0,1]^2`.
//!
//! Local basis index `b = 4 * corner + kind`, corners counterclockwise from the
//! lower-left one, kinds ordered `(value, d/dx, d/dy, d2/dxdy)`.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const NUM_BASIS: usize = 16;
pub const DOFS_PER_NODE: usize = 4;

/// Reference corner positions, counterclockwise from `(0,0)`.
pub const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Nodal degree-of-freedom kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Value = 0,
    Dx = 1,
    Dy = 2,
    Dxy = 3,
}

/// 1-D cubic Hermite functions on `[0,1]` and their first three derivatives.
///
/// `end` selects the node (0 or 1); `slope` selects the value or slope function.
#[inline]
pub fn hermite<T: Real>(end: usize, slope: bool, t: T) -> [T; 4] {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let six = T::lit(6.0);
    let t2 = t * t;
    let t3 = t2 * t;
    match (end, slope) {
        // 1 - 3t^2 + 2t^3
        (0, false) => [one - three * t2 + two * t3, six * (t2 - t), six * (two * t - one), T::lit(12.0)],
        // t - 2t^2 + t^3
        (0, true) => [
            t - two * t2 + t3,
            one - T::lit(4.0) * t + three * t2,
            six * t - T::lit(4.0),
            six,
        ],
        // 3t^2 - 2t^3
        (1, false) => [three * t2 - two * t3, six * (t - t2), six * (one - two * t), -T::lit(12.0)],
        // -t^2 + t^3
        (_, true) => [t3 - t2, three * t2 - two * t, six * t - two, six],
        (_, false) => unreachable!("hermite end must be 0 or 1"),
    }
}

/// Reference basis derivatives at a point: `[phi, phi_x, phi_y, phi_xx, phi_yy, phi_xy]`.
pub fn reference_basis<T: Real>(b: usize, xi: T, eta: T) -> [T; 6] {
    let (cx, cy) = CORNERS[b / 4];
    let (sx, sy) = match b % 4 {
        0 => (false, false),
        1 => (true, false),
        2 => (false, true),
        _ => (true, true),
    };
    let hx = hermite(cx, sx, xi);
    let hy = hermite(cy, sy, eta);
    [
        hx[0] * hy[0],
        hx[1] * hy[0],
        hx[0] * hy[1],
        hx[2] * hy[0],
        hx[0] * hy[2],
        hx[1] * hy[1],
    ]
}

/// Gauss–Legendre rule with `p` points mapped to `[0,1]`: `(nodes, weights)`.
pub fn gauss_legendre<T: Real>(p: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = Vec::with_capacity(p);
    let mut weights = Vec::with_capacity(p);
    let pf = p as f64;
    for i in 0..p {
        // Newton iteration on P_p from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (pf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=p {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pp = if p == 1 { 1.0 } else { pf * (x * p1 - p0) / (x * x - 1.0) };
            dp = pp;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if p == 1 {
            x = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(T::lit(0.5 * (1.0 - x)));
        weights.push(T::lit(0.5 * w));
    }
    (nodes, weights)
}

/// Basis values at tensor Gauss points of the reference cell.
#[derive(Debug, Clone)]
pub struct ShapeTable<T> {
    /// `(xi, eta, weight)`
    pub quad_points: Vec<(T, T, T)>,
    /// `values[q][b] = [phi, phi_x, phi_y, phi_xx, phi_yy]` in reference coordinates.
    pub values: Vec<[[T; 5]; NUM_BASIS]>,
}

impl<T: Real> ShapeTable<T> {
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {order} under-integrates bicubic products (need >= 4)"
            )));
        }
        let (x, w) = gauss_legendre::<T>(order);
        let mut quad_points = Vec::with_capacity(order * order);
        let mut values = Vec::with_capacity(order * order);
        for j in 0..order {
            for i in 0..order {
                quad_points.push((x[i], x[j], w[i] * w[j]));
                let mut row = [[T::zero(); 5]; NUM_BASIS];
                for (b, r) in row.iter_mut().enumerate() {
                    let v = reference_basis(b, x[i], x[j]);
                    *r = [v[0], v[1], v[2], v[3], v[4]];
                }
                values.push(row);
            }
        }
        Ok(ShapeTable { quad_points, values })
    }

    pub fn order(&self) -> usize {
        (self.quad_points.len() as f64).sqrt().round() as usize
    }

    /// Physical derivatives for every quadrature point on a cell of side `side`.
    pub fn physical(&self, side: T) -> Vec<[[T; 5]; NUM_BASIS]> {
        self.values
            .iter()
            .map(|row| {
                let mut out = [[T::zero(); 5]; NUM_BASIS];
                for b in 0..NUM_BASIS {
                    out[b] = map_derivatives(b, &row[b], side);
                }
                out
            })
            .collect()
    }
}

/// Scale factor carried by the DOF of basis `b` so that global DOFs are physical
/// derivatives at the nodes.
#[inline]
pub fn dof_scale<T: Real>(b: usize, side: T) -> T {
    match b % 4 {
        0 => T::one(),
        1 | 2 => side,
        _ => side * side,
    }
}

/// Maps reference `[phi, phi_x, phi_y, phi_xx, phi_yy]` of basis `b` to physical
/// derivatives on a cell of side `side`.
#[inline]
pub fn map_derivatives<T: Real>(b: usize, reference: &[T; 5], side: T) -> [T; 5] {
    let s = dof_scale(b, side);
    let inv = T::one() / side;
    let inv2 = inv * inv;
    [
        reference[0] * s,
        reference[1] * s * inv,
        reference[2] * s * inv,
        reference[3] * s * inv2,
        reference[4] * s * inv2,
    ]
}

/// Evaluates `[u, u_x, u_y, u_xy, u_xx, u_yy]` at reference point `(xi, eta)` of a
/// cell of side `side`, given the 16 local DOFs.
pub fn eval_local<T: Real>(dofs: &[T; NUM_BASIS], xi: T, eta: T, side: T) -> [T; 6] {
    let inv = T::one() / side;
    let mut out = [T::zero(); 6];
    for (b, &d) in dofs.iter().enumerate() {
        if d == T::zero() {
            continue;
        }
        let r = reference_basis(b, xi, eta);
        let s = dof_scale(b, side) * d;
        out[0] += s * r[0];
        out[1] += s * r[1] * inv;
        out[2] += s * r[2] * inv;
        out[3] += s * r[5] * inv * inv;
        out[4] += s * r[3] * inv * inv;
        out[5] += s * r[4] * inv * inv;
    }
    out
}
