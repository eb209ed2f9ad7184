//! Self-contained dense linear algebra and grid differentiation.
//!
//! Everything downstream works pointwise with small matrices (the induced
//! metric is n x n with n <= 3, projectors are N x N with N <= 8), so a
//! cyclic Jacobi eigensolver and a Cholesky factorization cover all needs
//! deterministically. Grid differentiation lives in [`diff`].

pub mod diff;

use crate::error::Error;
use crate::Result;

/// Dense symmetric matrix with symmetry enforced by storage: only the upper
/// triangle is kept, so `m[(i,j)] == m[(j,i)]` holds identically.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    /// Packed upper triangle, row by row: (0,0),(0,1),...,(0,d-1),(1,1),...
    upper: Vec<f64>,
}

#[inline]
fn pack_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, upper: vec![0.0; dim * (dim + 1) / 2] }
    }

    /// Build from a full row-major matrix, averaging the off-diagonal pairs.
    pub fn from_full(dim: usize, full: &[f64]) -> Self {
        assert_eq!(full.len(), dim * dim);
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (full[i * dim + j] + full[j * dim + i]));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[pack_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.upper[pack_index(self.dim, i, j)] = v;
    }

    pub fn to_full(&self) -> Vec<f64> {
        let d = self.dim;
        let mut full = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                full[i * d + j] = self.get(i, j);
            }
        }
        full
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

/// Result of a symmetric eigendecomposition. Eigenvalues ascend; column `c`
/// of `vectors` (row-major, `dim x dim`) is the unit eigenvector for
/// `values[c]`, with the sign fixed so that its first component of magnitude
/// above 1e-12 is positive.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl EigenResult {
    pub fn vector(&self, c: usize) -> Vec<f64> {
        (0..self.dim).map(|r| self.vectors[r * self.dim + c]).collect()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Deterministic: fixed sweep order, ascending eigenvalue sort with stable
/// tie-breaking, and a fixed eigenvector sign convention, so repeated calls
/// are byte-identical.
pub fn sym_eig(m: &SymMatrix) -> EigenResult {
    let d = m.dim;
    let mut a = m.to_full();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
        }
        s.sqrt()
    };

    let scale = m.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        if off(&a) <= 1.0e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1.0e-18 * scale {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        a[i * d + i]
            .partial_cmp(&a[j * d + j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut values = Vec::with_capacity(d);
    let mut vectors = vec![0.0; d * d];
    for (col, &idx) in order.iter().enumerate() {
        values.push(a[idx * d + idx]);
        // Sign convention: first component with |.| > 1e-12 is positive.
        let mut sign = 1.0;
        for r in 0..d {
            let x = v[r * d + idx];
            if x.abs() > 1.0e-12 {
                sign = x.signum();
                break;
            }
        }
        for r in 0..d {
            vectors[r * d + col] = sign * v[r * d + idx];
        }
    }
    EigenResult { values, vectors, dim: d }
}

/// Solve `m x = rhs` for a symmetric positive definite matrix.
///
/// Definiteness is checked up front through the smallest eigenvalue
/// (rejected below 1e-10 relative to the norm), the solve is Cholesky with
/// one step of iterative refinement, and the residual is verified against
/// 1e-10 * |rhs|.
pub fn solve(m: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = m.dim;
    assert_eq!(rhs.len(), d);
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let eig = sym_eig(m);
    if eig.values[0] <= 1.0e-10 * scale {
        return Err(Error::Geometry(format!(
            "solve: matrix not positive definite (lambda_min = {:.3e}, scale = {:.3e})",
            eig.values[0], scale
        )));
    }
    let l = cholesky(m)?;
    let mut x = chol_solve(&l, d, rhs);
    // One round of iterative refinement.
    let r: Vec<f64> = m
        .matvec(&x)
        .iter()
        .zip(rhs)
        .map(|(ax, b)| b - ax)
        .collect();
    let dx = chol_solve(&l, d, &r);
    for i in 0..d {
        x[i] += dx[i];
    }
    let resid: f64 = m
        .matvec(&x)
        .iter()
        .zip(rhs)
        .map(|(ax, b)| (b - ax) * (b - ax))
        .sum::<f64>()
        .sqrt();
    let rhs_norm = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    if resid > 1.0e-10 * rhs_norm.max(1.0) {
        return Err(Error::Resolution(format!(
            "solve: residual {resid:.3e} exceeds 1e-10 * |rhs|"
        )));
    }
    Ok(x)
}

/// Lower Cholesky factor of an SPD matrix, row-major dense.
pub fn cholesky(m: &SymMatrix) -> Result<Vec<f64>> {
    let d = m.dim;
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Geometry(
                        "cholesky: matrix not positive definite".into(),
                    ));
                }
                l[i * d + j] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

fn chol_solve(l: &[f64], d: usize, rhs: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    x
}

/// Dense LU factorization with partial pivoting (row-major, square).
/// Used for the finite-difference stencil solves and the implicit flow step.
pub struct Lu {
    pub dim: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

pub fn lu_factor(dim: usize, a: &[f64]) -> Result<Lu> {
    assert_eq!(a.len(), dim * dim);
    let mut lu = a.to_vec();
    let mut piv: Vec<usize> = (0..dim).collect();
    for col in 0..dim {
        let mut pmax = col;
        let mut vmax = lu[col * dim + col].abs();
        for r in (col + 1)..dim {
            let v = lu[r * dim + col].abs();
            if v > vmax {
                vmax = v;
                pmax = r;
            }
        }
        if vmax == 0.0 {
            return Err(Error::Resolution("lu_factor: singular matrix".into()));
        }
        if pmax != col {
            for c in 0..dim {
                lu.swap(col * dim + c, pmax * dim + c);
            }
            piv.swap(col, pmax);
        }
        let inv = 1.0 / lu[col * dim + col];
        for r in (col + 1)..dim {
            let f = lu[r * dim + col] * inv;
            lu[r * dim + col] = f;
            for c in (col + 1)..dim {
                lu[r * dim + c] -= f * lu[col * dim + c];
            }
        }
    }
    Ok(Lu { dim, lu, piv })
}

impl Lu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| rhs[p]).collect();
        for i in 0..d {
            for k in 0..i {
                x[i] -= self.lu[i * d + k] * x[k];
            }
        }
        for i in (0..d).rev() {
            for k in (i + 1)..d {
                x[i] -= self.lu[i * d + k] * x[k];
            }
            x[i] /= self.lu[i * d + i];
        }
        x
    }
}

/// Nodes and weights of the `q`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_q(x) and derivative by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1.0e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=q {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[q - 1 - i] = x;
        weights[q - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with a composite 20-point Gauss-Legendre rule on
/// `cells` equal subintervals. Machine precision for analytic integrands at
/// the cell scale.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cells: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(20);
    let h = (b - a) / cells as f64;
    let mut total = 0.0;
    for c in 0..cells {
        let lo = a + c as f64 * h;
        let mid = lo + 0.5 * h;
        let mut cell = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            cell += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * cell;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_2x2_matches_quadratic_formula() {
        // Independent oracle: eigenvalues of [[2,1],[1,3]] from the
        // characteristic polynomial, lambda = (5 +- sqrt(5)) / 2.
        let mut m = SymMatrix::zeros(2);
        m.set(0, 0, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 1, 3.0);
        let e = sym_eig(&m);
        let lo = (5.0 - 5.0f64.sqrt()) / 2.0;
        let hi = (5.0 + 5.0f64.sqrt()) / 2.0;
        assert!((e.values[0] - lo).abs() < 1.0e-13);
        assert!((e.values[1] - hi).abs() < 1.0e-13);
    }

    #[test]
    fn eig_reassembles_and_is_orthonormal() {
        let mut m = SymMatrix::zeros(4);
        let entries = [
            (0, 0, 1.5),
            (0, 1, -0.3),
            (0, 2, 0.7),
            (0, 3, 0.1),
            (1, 1, 2.0),
            (1, 2, 0.4),
            (1, 3, -0.9),
            (2, 2, -1.0),
            (2, 3, 0.2),
            (3, 3, 0.6),
        ];
        for (i, j, v) in entries {
            m.set(i, j, v);
        }
        let e = sym_eig(&m);
        let d = 4;
        // V diag(L) V^T == M to 1e-12 * |M|.
        let scale = m.norm();
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for c in 0..d {
                    s += e.vectors[i * d + c] * e.values[c] * e.vectors[j * d + c];
                }
                assert!((s - m.get(i, j)).abs() <= 1.0e-12 * scale);
            }
        }
        for c1 in 0..d {
            for c2 in 0..d {
                let mut s = 0.0;
                for r in 0..d {
                    s += e.vectors[r * d + c1] * e.vectors[r * d + c2];
                }
                let want = if c1 == c2 { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1.0e-12);
            }
        }
        // Ascending order.
        for c in 1..d {
            assert!(e.values[c] >= e.values[c - 1]);
        }
    }

    #[test]
    fn eig_deterministic_signs() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        m.set(2, 2, 2.0);
        m.set(0, 1, 0.5);
        let a = sym_eig(&m);
        let b = sym_eig(&m);
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
        for c in 0..3 {
            let v = a.vector(c);
            let first = v.iter().find(|x| x.abs() > 1.0e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn solve_spd_and_reject_indefinite() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 0, 4.0);
        m.set(1, 1, 5.0);
        m.set(2, 2, 6.0);
        m.set(0, 1, 1.0);
        m.set(1, 2, -0.5);
        let rhs = [1.0, -2.0, 0.5];
        let x = solve(&m, &rhs).unwrap();
        let ax = m.matvec(&x);
        for i in 0..3 {
            assert!((ax[i] - rhs[i]).abs() < 1.0e-10);
        }

        let mut bad = SymMatrix::zeros(2);
        bad.set(0, 0, 1.0);
        bad.set(1, 1, -1.0);
        assert!(solve(&bad, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn lu_solves_general_system() {
        let a = [2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let lu = lu_factor(3, &a).unwrap();
        let x = lu.solve(&[8.0, -11.0, -3.0]);
        let want = [2.0, 3.0, -1.0];
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1.0e-12);
        }
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        // 20-point rule integrates x^k exactly for k <= 39; check a Gaussian
        // against the closed form on a wide interval.
        let v = integrate_gl(|x| (-x * x / 4.0).exp(), -40.0, 40.0, 80);
        let want = 2.0 * std::f64::consts::PI.sqrt();
        assert!((v - want).abs() < 1.0e-13);
    }
}
