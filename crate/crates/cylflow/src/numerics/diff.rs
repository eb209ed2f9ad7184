//! Grid fields and one-dimensional differentiation operators.
//!
//! Periodic directions use dense spectral collocation matrices (exact below
//! the Nyquist mode); bounded directions use 5-point finite-difference
//! stencils, centered in the interior and one-sided within two cells of the
//! boundary, so polynomials of degree <= 4 differentiate exactly everywhere.

use crate::numerics::lu_factor;

/// A sampled field on a structured grid: `ncomp` values per grid point,
/// point-major (`data[p * ncomp + c]`). The grid shape is carried by the
/// chart, not the field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(points: usize, ncomp: usize) -> Self {
        Field { ncomp, data: vec![0.0; points * ncomp] }
    }

    pub fn points(&self) -> usize {
        self.data.len() / self.ncomp
    }

    #[inline]
    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    #[inline]
    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * self.ncomp..(p + 1) * self.ncomp]
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field { ncomp: self.ncomp, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn axpy(&mut self, s: f64, other: &Field) {
        assert_eq!(self.ncomp, other.ncomp);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Max over points of the Euclidean norm of the component vector.
    pub fn max_pointwise_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in 0..self.points() {
            let v: f64 = self.at(p).iter().map(|x| x * x).sum::<f64>().sqrt();
            m = m.max(v);
        }
        m
    }
}

/// One-dimensional differentiation operator along a grid axis.
#[derive(Debug, Clone)]
pub enum DiffOp {
    /// Dense m x m matrix (spectral collocation), row-major.
    Dense { m: usize, mat: Vec<f64> },
    /// Banded 5-point stencils: row `i` applies `weights[i]` to samples
    /// starting at `start[i]`.
    Stencil { m: usize, weights: Vec<[f64; 5]>, start: Vec<usize> },
}

impl DiffOp {
    pub fn len(&self) -> usize {
        match self {
            DiffOp::Dense { m, .. } => *m,
            DiffOp::Stencil { m, .. } => *m,
        }
    }

    /// Apply to one line of samples.
    pub fn apply_line(&self, src: &[f64], dst: &mut [f64]) {
        match self {
            DiffOp::Dense { m, mat } => {
                for i in 0..*m {
                    let row = &mat[i * m..(i + 1) * m];
                    let mut s = 0.0;
                    for j in 0..*m {
                        s += row[j] * src[j];
                    }
                    dst[i] = s;
                }
            }
            DiffOp::Stencil { m, weights, start } => {
                for i in 0..*m {
                    let s0 = start[i];
                    let w = &weights[i];
                    dst[i] = w[0] * src[s0]
                        + w[1] * src[s0 + 1]
                        + w[2] * src[s0 + 2]
                        + w[3] * src[s0 + 3]
                        + w[4] * src[s0 + 4];
                }
            }
        }
    }
}

/// Spectral differentiation matrix of the given order (1 or 2) for an even
/// number `m` of equispaced points on a periodic interval of length `period`.
///
/// Exact (to rounding) on trigonometric polynomials below the Nyquist mode;
/// circulant, hence equivariant under grid shifts.
pub fn periodic_diff(m: usize, order: usize, period: f64) -> DiffOp {
    assert!(m >= 4 && m % 2 == 0, "periodic_diff requires even m >= 4");
    assert!(order == 1 || order == 2);
    let h = 2.0 * std::f64::consts::PI / m as f64;
    // Scale factor from the reference 2*pi period.
    let s = 2.0 * std::f64::consts::PI / period;
    let mut mat = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let k = i as isize - j as isize;
            let e = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let v = if order == 1 {
                if i == j {
                    0.0
                } else {
                    0.5 * e / (0.5 * h * k as f64).tan()
                }
            } else if i == j {
                -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0
            } else {
                -e / (2.0 * (0.5 * h * k as f64).sin().powi(2))
            };
            mat[i * m + j] = v * s.powi(order as i32);
        }
    }
    DiffOp::Dense { m, mat }
}

/// 5-point finite-difference operator of the given order (1 or 2) on `m`
/// equispaced points with spacing `h`. Centered away from the ends,
/// one-sided within two cells of them.
pub fn axis_diff(m: usize, order: usize, h: f64) -> DiffOp {
    assert!(m >= 5, "axis_diff requires at least 5 points");
    assert!(order == 1 || order == 2);
    let mut weights = Vec::with_capacity(m);
    let mut start = Vec::with_capacity(m);
    for i in 0..m {
        let s0 = (i as isize - 2).clamp(0, m as isize - 5) as usize;
        weights.push(stencil_weights(i as isize - s0 as isize, order, h));
        start.push(s0);
    }
    DiffOp::Stencil { m, weights, start }
}

/// Weights of the 5-point stencil evaluated at node offset `at` (in units of
/// h, relative to the first stencil node), for derivative `order`. Solves the
/// 5x5 moment system, so degree <= 4 polynomials are exact by construction.
fn stencil_weights(at: isize, order: usize, h: f64) -> [f64; 5] {
    let mut a = [0.0; 25];
    let mut b = [0.0; 5];
    for r in 0..5 {
        for k in 0..5 {
            let d = (k as isize - at) as f64;
            a[r * 5 + k] = d.powi(r as i32);
        }
    }
    // d^order/dx^order of x^r at 0 is r! when r == order.
    b[order] = if order == 1 { 1.0 } else { 2.0 };
    let lu = lu_factor(5, &a).expect("vandermonde is nonsingular");
    let x = lu.solve(&b);
    let mut w = [0.0; 5];
    for k in 0..5 {
        w[k] = x[k] / h.powi(order as i32);
    }
    w
}

/// Apply `op` along axis `axis` of a field living on a grid with the given
/// `shape` (row-major multi-index, axis 0 slowest).
pub fn apply_along_axis(shape: &[usize], field: &Field, axis: usize, op: &DiffOp) -> Field {
    let m = shape[axis];
    assert_eq!(op.len(), m);
    let points: usize = shape.iter().product();
    assert_eq!(points, field.points());
    let ncomp = field.ncomp;
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = Field::zeros(points, ncomp);
    let mut line = vec![0.0; m];
    let mut dline = vec![0.0; m];
    for o in 0..outer {
        for i in 0..inner {
            for c in 0..ncomp {
                for j in 0..m {
                    let p = (o * m + j) * inner + i;
                    line[j] = field.data[p * ncomp + c];
                }
                op.apply_line(&line, &mut dline);
                for j in 0..m {
                    let p = (o * m + j) * inner + i;
                    out.data[p * ncomp + c] = dline[j];
                }
            }
        }
    }
    out
}
