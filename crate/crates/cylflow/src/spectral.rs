//! The drift operators on the model cylinder and the Jacobi-field basis.
//!
//! On S^k_{sqrt(2k)} x R^{n-k} the stability operator acts componentwise on
//! a normal graph V = V^0 N + sum_alpha V^alpha dz_alpha:
//!
//!   L V = {(script-L + 1) V^0} N + sum {(script-L + 1/2) V^alpha} dz_alpha,
//!
//! where script-L = Delta - (1/2) y . grad_y is the Gaussian drift
//! Laplacian in cylinder coordinates. Its kernel (the Jacobi fields) is
//! spanned by four finite families built from the first spherical
//! eigenfunctions f (Delta_theta f = -f/2) and the axis coordinates:
//!
//!   { y_j f(theta) N },  { (y_i y_j - 2 delta_ij) N },
//!   { f(theta) dz_alpha },  { y_j dz_alpha }.

use crate::chart::{ChartGrid, NormalField};
use crate::error::Error;
use crate::gaussian::QuadratureRule;
use crate::numerics::diff::Field;
use crate::Result;
use serde::Serialize;

/// Componentwise drift Laplacian script-L = Delta - (1/2) y . grad_y on a
/// multi-component scalar field over the cylinder chart.
pub fn drift_laplacian(grid: &ChartGrid, v: &Field) -> Field {
    let r2 = 2.0 * grid.k as f64; // r^2 = 2k
    let nk = grid.n - grid.k;
    let mut out = Field::zeros(grid.points, v.ncomp);

    match grid.k {
        1 => {
            let d2t = grid.diff(v, 0, 2);
            out.axpy(1.0 / r2, &d2t);
        }
        2 => {
            // Sphere Laplacian in latitude/longitude coordinates:
            // (1/r^2)[d^2_u + cot(u) d_u + (1/sin^2 u) d^2_v].
            let d2u = grid.diff(v, 0, 2);
            let d1u = grid.diff(v, 0, 1);
            let d2v = grid.diff(v, 1, 2);
            for p in 0..grid.points {
                let idx = grid.multi_index(p);
                let u = grid.axes[0].coord[idx[0]];
                let (su, cu) = (u.sin(), u.cos());
                let dst = out.at_mut(p);
                for c in 0..v.ncomp {
                    dst[c] += (d2u.at(p)[c] + (cu / su) * d1u.at(p)[c]
                        + d2v.at(p)[c] / (su * su))
                        / r2;
                }
            }
        }
        _ => unreachable!(),
    }

    for j in 0..nk {
        let axis = grid.k + j;
        let d2 = grid.diff(v, axis, 2);
        let d1 = grid.diff(v, axis, 1);
        for p in 0..grid.points {
            let yj = grid.y.data[p * nk + j];
            let dst = out.at_mut(p);
            for c in 0..v.ncomp {
                dst[c] += d2.at(p)[c] - 0.5 * yj * d1.at(p)[c];
            }
        }
    }
    out
}

/// The stability operator L V = {(script-L + 1)V^0} N + {(script-L + 1/2)
/// V^alpha} dz_alpha on the model cylinder.
pub fn apply_l(grid: &ChartGrid, v: &NormalField) -> NormalField {
    let mut out = drift_laplacian(grid, &v.values);
    for p in 0..grid.points {
        let src = v.values.at(p);
        let dst = out.at_mut(p);
        dst[0] += src[0];
        for c in 1..v.ncomp() {
            dst[c] += 0.5 * src[c];
        }
    }
    NormalField { values: out, taper: v.taper }
}

/// First spherical eigenfunction number h at grid point p: the unit-sphere
/// coordinate function x_h / r, h in 0..=k.
fn sphere_harmonic(grid: &ChartGrid, h: usize, p: usize) -> f64 {
    grid.normal.data[p * grid.amb + h]
}

/// One Jacobi basis, both in its natural (family-labelled) form and
/// Gaussian-L^2-orthonormalized.
pub struct JacobiBasis {
    /// Raw fields in fixed enumeration order (see `labels`).
    pub raw: Vec<NormalField>,
    /// Orthonormalized fields, same order.
    pub ortho: Vec<NormalField>,
    /// Change of basis: ortho[i] = sum_j coef[i][j] raw[j] (row-major,
    /// lower triangular).
    pub chol_coef: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub rule: QuadratureRule,
}

/// Gaussian L^2 inner product of two normal fields under a rule.
pub fn inner(rule: &QuadratureRule, u: &NormalField, v: &NormalField) -> f64 {
    let nc = u.ncomp();
    assert_eq!(nc, v.ncomp());
    let mut s = 0.0;
    for (p, &w) in rule.weights.iter().enumerate() {
        let a = u.values.at(p);
        let b = v.values.at(p);
        let mut d = 0.0;
        for c in 0..nc {
            d += a[c] * b[c];
        }
        s += w * d;
    }
    s
}

/// Expected basis dimension for the (k, n, N) instance.
pub fn jacobi_dimension(grid: &ChartGrid) -> usize {
    let k = grid.k;
    let nk = grid.n - grid.k;
    let z = grid.zdim();
    (k + 1) * nk + nk * (nk + 1) / 2 + z * (k + 1) + z * nk
}

/// Enumerate the four Jacobi families in display order and orthonormalize
/// sequentially (deterministic, so projection coefficients are
/// reproducible).
pub fn jacobi_basis(grid: &ChartGrid) -> Result<JacobiBasis> {
    let k = grid.k;
    let nk = grid.n - grid.k;
    let z = grid.zdim();
    let nc = 1 + z;
    let rule = crate::gaussian::cylinder_rule(grid)?;

    let mut raw: Vec<NormalField> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    // Family 1: {y_j f_h(theta)} N.
    for j in 0..nk {
        for h in 0..=k {
            let mut f = Field::zeros(grid.points, nc);
            for p in 0..grid.points {
                f.at_mut(p)[0] = grid.y.data[p * nk + j] * sphere_harmonic(grid, h, p);
            }
            raw.push(NormalField { values: f, taper: None });
            labels.push(format!("axis_harmonic[y{j}][f{h}]"));
        }
    }
    // Family 2: {(y_i y_j - 2 delta_ij)} N, i <= j.
    for i in 0..nk {
        for j in i..nk {
            let mut f = Field::zeros(grid.points, nc);
            for p in 0..grid.points {
                let yi = grid.y.data[p * nk + i];
                let yj = grid.y.data[p * nk + j];
                f.at_mut(p)[0] = yi * yj - if i == j { 2.0 } else { 0.0 };
            }
            raw.push(NormalField { values: f, taper: None });
            labels.push(format!("quadratic[y{i}y{j}]"));
        }
    }
    // Family 3: {f_h(theta)} dz_alpha (normal rotations).
    for alpha in 0..z {
        for h in 0..=k {
            let mut f = Field::zeros(grid.points, nc);
            for p in 0..grid.points {
                f.at_mut(p)[1 + alpha] = sphere_harmonic(grid, h, p);
            }
            raw.push(NormalField { values: f, taper: None });
            labels.push(format!("rotation[z{alpha}][f{h}]"));
        }
    }
    // Family 4: {y_j} dz_alpha (axis-normal rotations).
    for alpha in 0..z {
        for j in 0..nk {
            let mut f = Field::zeros(grid.points, nc);
            for p in 0..grid.points {
                f.at_mut(p)[1 + alpha] = grid.y.data[p * nk + j];
            }
            raw.push(NormalField { values: f, taper: None });
            labels.push(format!("axis_rotation[z{alpha}][y{j}]"));
        }
    }
    debug_assert_eq!(raw.len(), jacobi_dimension(grid));

    // Sequential (modified Gram-Schmidt) orthonormalization, tracking the
    // expansion of each orthonormal field in the raw ones.
    let dim = raw.len();
    let mut ortho: Vec<NormalField> = Vec::with_capacity(dim);
    let mut chol_coef: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut v = raw[i].clone();
        let mut coef = vec![0.0; dim];
        coef[i] = 1.0;
        for (j, e) in ortho.iter().enumerate() {
            let c = inner(&rule, &v, e);
            v.values.axpy(-c, &e.values);
            for (dst, src) in coef.iter_mut().zip(chol_coef[j].iter()) {
                *dst -= c * src;
            }
        }
        let nrm = inner(&rule, &v, &v).max(0.0).sqrt();
        if nrm < 1e-12 {
            return Err(Error::Geometry(format!(
                "jacobi_basis: family member {} degenerate on this grid",
                labels[i]
            )));
        }
        v.values = v.values.scaled(1.0 / nrm);
        for c in coef.iter_mut() {
            *c /= nrm;
        }
        ortho.push(v);
        chol_coef.push(coef);
    }

    Ok(JacobiBasis { raw, ortho, chol_coef, labels, rule })
}

/// Coefficients of a Jacobi field in the natural family parameterization.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiCoefficients {
    /// Harmonic coefficients of each f_j: (n-k) rows of (k+1) entries.
    pub f_axis: Vec<Vec<f64>>,
    /// Symmetric quadratic coefficients b_ij, i <= j, row-major.
    pub b: Vec<f64>,
    /// Harmonic coefficients of each f^alpha: (N-n-1) rows of (k+1).
    pub f_rot: Vec<Vec<f64>>,
    /// Axis-rotation coefficients a_j^alpha: (N-n-1) rows of (n-k).
    pub a: Vec<Vec<f64>>,
    /// Flat coefficient vector in basis enumeration order with labels.
    pub labeled: Vec<(String, f64)>,
}

pub struct JacobiProjection {
    pub coefficients: JacobiCoefficients,
    /// Coefficients against the orthonormalized basis.
    pub ortho_coefficients: Vec<f64>,
    /// The projection sum itself.
    pub jacobi_part: NormalField,
    /// V minus its Jacobi projection; Gaussian-L^2-orthogonal to the basis.
    pub remainder: NormalField,
}

/// Orthogonal projection of a normal field onto the Jacobi span.
pub fn project_jacobi(
    grid: &ChartGrid,
    basis: &JacobiBasis,
    v: &NormalField,
) -> JacobiProjection {
    let dim = basis.ortho.len();
    let mut c_ortho = vec![0.0; dim];
    let mut jac = NormalField::zeros(grid);
    for i in 0..dim {
        let c = inner(&basis.rule, v, &basis.ortho[i]);
        c_ortho[i] = c;
        jac.values.axpy(c, &basis.ortho[i].values);
    }
    let mut rem = v.clone();
    rem.values.axpy(-1.0, &jac.values);

    // Natural coefficients: d_j = sum_i c_i chol_coef[i][j].
    let mut d = vec![0.0; dim];
    for i in 0..dim {
        for j in 0..dim {
            d[j] += c_ortho[i] * basis.chol_coef[i][j];
        }
    }

    let k = grid.k;
    let nk = grid.n - grid.k;
    let z = grid.zdim();
    let mut it = d.iter();
    let f_axis: Vec<Vec<f64>> =
        (0..nk).map(|_| (0..=k).map(|_| *it.next().unwrap()).collect()).collect();
    let b: Vec<f64> = (0..nk * (nk + 1) / 2).map(|_| *it.next().unwrap()).collect();
    let f_rot: Vec<Vec<f64>> =
        (0..z).map(|_| (0..=k).map(|_| *it.next().unwrap()).collect()).collect();
    let a: Vec<Vec<f64>> =
        (0..z).map(|_| (0..nk).map(|_| *it.next().unwrap()).collect()).collect();
    let labeled = basis.labels.iter().cloned().zip(d.iter().copied()).collect();

    JacobiProjection {
        coefficients: JacobiCoefficients { f_axis, b, f_rot, a, labeled },
        ortho_coefficients: c_ortho,
        jacobi_part: jac,
        remainder: rem,
    }
}

/// Empirical constants of the pointwise Jacobi bounds.
#[derive(Debug, Clone, Serialize)]
pub struct PointwiseBoundReport {
    /// max |J| / (1 + |x|^2), normalized by the L^2 norm over the fixed
    /// comparison ball B_{sqrt(2n) + 1}.
    pub c_value: f64,
    /// max (|grad J| + |Hess J|) / (1 + |x|), same normalization.
    pub c_grad_hess: f64,
    /// max |Hess J(., axis directions)|, normalized by the full Gaussian
    /// L^2 norm.
    pub c_axis_hess: f64,
    /// Max variation of the axis-Hessian rows along the axis directions
    /// (exactly constant for quadratic-family elements).
    pub axis_hess_variation: f64,
    pub ball_l2: f64,
    pub full_l2: f64,
}

/// Derivative of a multi-component field in the orthonormal cylinder frame
/// directions (arclength scaling on angle axes).
fn frame_diff(grid: &ChartGrid, v: &Field, axis: usize) -> Field {
    let mut d = grid.diff(v, axis, 1);
    let r = grid.sphere_radius();
    match grid.axes[axis].kind {
        crate::chart::AxisKind::Bounded => {}
        crate::chart::AxisKind::Latitude => d = d.scaled(1.0 / r),
        crate::chart::AxisKind::Periodic => {
            if grid.k == 1 {
                d = d.scaled(1.0 / r);
            } else {
                for p in 0..grid.points {
                    let idx = grid.multi_index(p);
                    let u = grid.axes[0].coord[idx[0]];
                    let s = 1.0 / (r * u.sin());
                    for c in 0..v.ncomp {
                        d.at_mut(p)[c] *= s;
                    }
                }
            }
        }
    }
    d
}

pub fn jacobi_pointwise_bounds(
    grid: &ChartGrid,
    rule: &QuadratureRule,
    j_field: &NormalField,
) -> Result<PointwiseBoundReport> {
    let npts = grid.points;
    let ndir = grid.n;

    let grads: Vec<Field> = (0..ndir).map(|a| frame_diff(grid, &j_field.values, a)).collect();
    let mut hess: Vec<Field> = Vec::new(); // (a, b) row-major
    for a in 0..ndir {
        for b in 0..ndir {
            hess.push(frame_diff(grid, &grads[a], b));
        }
    }

    // L^2 over the fixed comparison ball and over the full grid.
    let ball_r2 = {
        let rb = (2.0 * grid.n as f64).sqrt() + 1.0;
        rb * rb
    };
    let mut ball_sq = 0.0;
    let mut mags = vec![0.0; npts];
    for p in 0..npts {
        let v = j_field.values.at(p);
        let m2: f64 = v.iter().map(|x| x * x).sum();
        mags[p] = m2.sqrt();
        if grid.x_norm2[p] <= ball_r2 {
            ball_sq += rule.weights[p] * m2;
        }
    }
    let ball_l2 = ball_sq.max(0.0).sqrt();
    let full_l2 = rule.l2(&mags);
    if ball_l2 <= 0.0 || full_l2 <= 0.0 {
        return Err(Error::Geometry("jacobi_pointwise_bounds: zero field".into()));
    }

    let mut c_value: f64 = 0.0;
    let mut c_grad_hess: f64 = 0.0;
    let mut c_axis_hess: f64 = 0.0;
    let mut axis_rows = Field::zeros(npts, 1);
    for p in 0..npts {
        let xa = grid.x_norm2[p].sqrt();
        c_value = c_value.max(mags[p] / (1.0 + grid.x_norm2[p]));
        let mut g2 = 0.0;
        for g in &grads {
            g2 += g.at(p).iter().map(|x| x * x).sum::<f64>();
        }
        let mut h2 = 0.0;
        let mut ax2 = 0.0;
        for a in 0..ndir {
            for b in 0..ndir {
                let row: f64 = hess[a * ndir + b].at(p).iter().map(|x| x * x).sum();
                h2 += row;
                if b >= grid.k {
                    ax2 += row;
                }
            }
        }
        c_grad_hess = c_grad_hess.max((g2.sqrt() + h2.sqrt()) / (1.0 + xa));
        c_axis_hess = c_axis_hess.max(ax2.sqrt());
        axis_rows.data[p] = ax2.sqrt();
    }
    c_value /= ball_l2;
    c_grad_hess /= ball_l2;
    c_axis_hess /= full_l2;

    // Variation of the axis-Hessian rows along the axis directions.
    let mut axis_hess_variation: f64 = 0.0;
    for a in grid.k..ndir {
        let d = grid.diff(&axis_rows, a, 1);
        for p in 0..npts {
            axis_hess_variation = axis_hess_variation.max(d.data[p].abs());
        }
    }

    Ok(PointwiseBoundReport {
        c_value,
        c_grad_hess,
        c_axis_hess,
        axis_hess_variation,
        ball_l2,
        full_l2,
    })
}
