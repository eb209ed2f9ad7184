//! Discrete geometry of immersed surfaces: jets, the codimension defect
//! scalar P, and the Simons-type identity residuals.
//!
//! Conventions (all enforced by tests):
//! * A(X, Y) = (D_X Y)^perp in coordinates: A_ij = Pi(d_i d_j F), and the
//!   mean curvature vector is H = -g^{ij} A_ij, so the round cylinder has
//!   H = x_s / 2 pointing away from the axis and |H| = sqrt(k/2).
//! * phi = x^perp / 2 - H vanishes exactly on shrinkers.
//! * Covariant derivatives are assembled from ambient partials plus
//!   projection; tangential index corrections use Gamma^m_ij = g^{mp}
//!   <F_p, d_i d_j F>, never a separately discretized metric connection.
//! * Normal Hessians follow Hess_V(E_i, E_j) = grad^perp_j grad^perp_i V -
//!   grad^perp_{grad^T_j E_i} V (second slot differentiates; asymmetric).
//! * Orthonormal frames come from the Cholesky factor of the metric in
//!   coordinate order, so every frame-summed expression is deterministic.

pub mod identities;
pub mod ops;
pub mod pfield;

use crate::chart::{ChartGrid, Immersion};
use crate::error::Error;
use crate::numerics::diff::Field;
use crate::numerics::{sym_eig, SymMatrix};
use crate::Result;

pub use identities::{
    drift_tau_residual, gradh_residual, kappa_audit, nablan_residual, simons_residual,
    KappaReport,
};
pub use pfield::{compute_p, PField};

/// Curvature floor: |H| below this is treated as degenerate and tau = A/|H|
/// is not formed.
pub const H_MIN: f64 = 1.0e-6;

/// Packed index of the symmetric pair (i, j), i <= j, in dimension n.
#[inline]
pub fn sidx(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Pointwise second-order data of an immersion on a chart grid.
///
/// Tensors with lower surface indices are stored in coordinate frame;
/// `onb_*` helpers convert them to the Cholesky orthonormal frame where the
/// identity formulas take their textbook shape.
#[derive(Debug, Clone)]
pub struct GeometryJet {
    pub n: usize,
    pub amb: usize,
    pub points: usize,
    /// Coordinate frames F_i = d_i F, one field per axis.
    pub xi: Vec<Field>,
    /// Second partials d_i d_j F, packed symmetric.
    pub xij: Vec<Field>,
    /// Ambient positions (copy of the immersion).
    pub x: Field,
    /// Metric, inverse metric: points x nsym.
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    /// Lower Cholesky factor of g, points x (n*n) row-major.
    pub lchol: Vec<f64>,
    /// Frame-change matrix M = L^{-T} (points x n*n): E_a = sum_i M[i,a] F_i.
    pub onb: Vec<f64>,
    /// Normal projector, points x (amb*amb).
    pub pi: Vec<f64>,
    /// Second fundamental form A_ij = Pi(d_i d_j F), points x nsym x amb.
    pub a: Vec<f64>,
    /// Christoffel symbols Gamma^m_ij, points x n x nsym.
    pub gamma: Vec<f64>,
    pub h: Field,
    pub h_norm: Vec<f64>,
    /// Unit normal N = H/|H| where defined.
    pub nvec: Field,
    /// Whether |H| >= H_MIN at the point.
    pub tau_ok: Vec<bool>,
    pub phi: Field,
    pub x_t: Field,
    pub x_perp: Field,
    pub sqrt_det_g: Vec<f64>,
}

impl GeometryJet {
    pub fn nsym(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// A_ij at point p (coordinate frame), as an ambient vector slice.
    #[inline]
    pub fn a_vec(&self, p: usize, i: usize, j: usize) -> &[f64] {
        let ns = self.nsym();
        let s = sidx(self.n, i, j);
        &self.a[(p * ns + s) * self.amb..(p * ns + s + 1) * self.amb]
    }

    #[inline]
    pub fn gamma_at(&self, p: usize, m: usize, i: usize, j: usize) -> f64 {
        let ns = self.nsym();
        self.gamma[p * self.n * ns + m * ns + sidx(self.n, i, j)]
    }

    #[inline]
    pub fn g_at(&self, p: usize, i: usize, j: usize) -> f64 {
        self.g[p * self.nsym() + sidx(self.n, i, j)]
    }

    #[inline]
    pub fn ginv_at(&self, p: usize, i: usize, j: usize) -> f64 {
        self.ginv[p * self.nsym() + sidx(self.n, i, j)]
    }

    /// Project an ambient vector onto the normal space at p (in place into
    /// `out`).
    pub fn project_normal(&self, p: usize, v: &[f64], out: &mut [f64]) {
        let amb = self.amb;
        let pi = &self.pi[p * amb * amb..(p + 1) * amb * amb];
        for i in 0..amb {
            let mut s = 0.0;
            for j in 0..amb {
                s += pi[i * amb + j] * v[j];
            }
            out[i] = s;
        }
    }

    /// Convert a rank-1 lower tensor with vector values (layout n x amb) to
    /// the orthonormal frame.
    pub fn onb1(&self, p: usize, t: &[f64]) -> Vec<f64> {
        let (n, amb) = (self.n, self.amb);
        let m = &self.onb[p * n * n..(p + 1) * n * n];
        let mut out = vec![0.0; n * amb];
        for a in 0..n {
            for i in 0..n {
                let w = m[i * n + a];
                if w != 0.0 {
                    for c in 0..amb {
                        out[a * amb + c] += w * t[i * amb + c];
                    }
                }
            }
        }
        out
    }

    /// Convert a packed-symmetric rank-2 lower tensor with vector values
    /// (layout nsym x amb) to the orthonormal frame (layout n*n x amb).
    pub fn onb2_sym(&self, p: usize, t: &[f64]) -> Vec<f64> {
        let (n, amb) = (self.n, self.amb);
        let m = &self.onb[p * n * n..(p + 1) * n * n];
        let mut out = vec![0.0; n * n * amb];
        for a in 0..n {
            for b in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let w = m[i * n + a] * m[j * n + b];
                        if w != 0.0 {
                            let src = sidx(n, i, j) * amb;
                            for c in 0..amb {
                                out[(a * n + b) * amb + c] += w * t[src + c];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Convert a full rank-2 lower tensor with vector values (layout n*n x
    /// amb) to the orthonormal frame.
    pub fn onb2_full(&self, p: usize, t: &[f64]) -> Vec<f64> {
        let (n, amb) = (self.n, self.amb);
        let m = &self.onb[p * n * n..(p + 1) * n * n];
        let mut out = vec![0.0; n * n * amb];
        for a in 0..n {
            for b in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let w = m[i * n + a] * m[j * n + b];
                        if w != 0.0 {
                            for c in 0..amb {
                                out[(a * n + b) * amb + c] += w * t[(i * n + j) * amb + c];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Convert a rank-3 lower tensor, first index free and last two packed
    /// (layout n x nsym x amb), to the orthonormal frame (n*n*n x amb).
    pub fn onb3(&self, p: usize, t: &[f64]) -> Vec<f64> {
        let (n, amb) = (self.n, self.amb);
        let ns = self.nsym();
        let m = &self.onb[p * n * n..(p + 1) * n * n];
        let mut out = vec![0.0; n * n * n * amb];
        for a in 0..n {
            for b in 0..n {
                for c2 in 0..n {
                    for i in 0..n {
                        let mia = m[i * n + a];
                        if mia == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            for l in 0..n {
                                let w = mia * m[j * n + b] * m[l * n + c2];
                                if w != 0.0 {
                                    let src = (i * ns + sidx(n, j, l)) * amb;
                                    let dst = ((a * n + b) * n + c2) * amb;
                                    for c in 0..amb {
                                        out[dst + c] += w * t[src + c];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Components of the tangential position x^T in the orthonormal frame:
    /// (x^T)_a = <x, E_a>.
    pub fn xt_onb(&self, p: usize) -> Vec<f64> {
        let (n, amb) = (self.n, self.amb);
        let m = &self.onb[p * n * n..(p + 1) * n * n];
        let x = self.x.at(p);
        let mut out = vec![0.0; n];
        for a in 0..n {
            for i in 0..n {
                let w = m[i * n + a];
                if w != 0.0 {
                    let fi = self.xi[i].at(p);
                    let mut s = 0.0;
                    for c in 0..amb {
                        s += x[c] * fi[c];
                    }
                    out[a] += w * s;
                }
            }
        }
        out
    }

    /// A in the orthonormal frame at p: layout n*n x amb.
    pub fn a_onb(&self, p: usize) -> Vec<f64> {
        let ns = self.nsym();
        self.onb2_sym(p, &self.a[p * ns * self.amb..(p + 1) * ns * self.amb])
    }

    /// |A|^2 at p (orthonormal frame sum).
    pub fn a_norm2(&self, p: usize) -> f64 {
        let a = self.a_onb(p);
        a.iter().map(|v| v * v).sum()
    }
}

/// Build the geometry jet of an immersion. Fails if the induced metric
/// degenerates or the normal projector loses idempotency beyond 1e-8.
pub fn jet(grid: &ChartGrid, imm: &Immersion) -> Result<GeometryJet> {
    let n = grid.n;
    let amb = grid.amb;
    let points = grid.points;
    let ns = n * (n + 1) / 2;
    assert_eq!(imm.x.ncomp, amb);
    assert_eq!(imm.x.points(), points);

    let xi: Vec<Field> = (0..n).map(|a| grid.diff(&imm.x, a, 1)).collect();
    let mut xij: Vec<Field> = Vec::with_capacity(ns);
    for i in 0..n {
        for j in i..n {
            if i == j {
                xij.push(grid.diff(&imm.x, i, 2));
            } else {
                xij.push(grid.diff(&xi[i], j, 1));
            }
        }
    }

    let mut g = vec![0.0; points * ns];
    let mut ginv = vec![0.0; points * ns];
    let mut lchol = vec![0.0; points * n * n];
    let mut onb = vec![0.0; points * n * n];
    let mut pi = vec![0.0; points * amb * amb];
    let mut a = vec![0.0; points * ns * amb];
    let mut gamma = vec![0.0; points * n * ns];
    let mut h = Field::zeros(points, amb);
    let mut h_norm = vec![0.0; points];
    let mut nvec = Field::zeros(points, amb);
    let mut tau_ok = vec![false; points];
    let mut phi = Field::zeros(points, amb);
    let mut x_t = Field::zeros(points, amb);
    let mut x_perp = Field::zeros(points, amb);
    let mut sqrt_det_g = vec![0.0; points];

    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };

    for p in 0..points {
        // Metric and Cholesky frame.
        let mut gm = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = dot(xi[i].at(p), xi[j].at(p));
                gm.set(i, j, v);
                g[p * ns + sidx(n, i, j)] = v;
            }
        }
        let l = crate::numerics::cholesky(&gm).map_err(|_| {
            Error::Geometry(format!("jet: induced metric degenerate at point {p}"))
        })?;
        lchol[p * n * n..(p + 1) * n * n].copy_from_slice(&l);
        let mut det_sqrt = 1.0;
        for i in 0..n {
            det_sqrt *= l[i * n + i];
        }
        sqrt_det_g[p] = det_sqrt;

        // M = L^{-T}: solve L^T M = I column by column (back substitution).
        let m = &mut onb[p * n * n..(p + 1) * n * n];
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            for i in (0..n).rev() {
                let mut s = e[i];
                for k2 in (i + 1)..n {
                    s -= l[k2 * n + i] * m[k2 * n + col];
                }
                m[i * n + col] = s / l[i * n + i];
            }
        }

        // Inverse metric from the Cholesky factor: g^{-1} = M M^T.
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += m[i * n + c] * m[j * n + c];
                }
                ginv[p * ns + sidx(n, i, j)] = s;
            }
        }

        // Normal projector Pi = I - F_i g^{ij} F_j^T.
        {
            let pip = &mut pi[p * amb * amb..(p + 1) * amb * amb];
            for c in 0..amb {
                pip[c * amb + c] = 1.0;
            }
            for i in 0..n {
                for j in 0..n {
                    let gij = ginv[p * ns + sidx(n, i, j)];
                    let fi = xi[i].at(p);
                    let fj = xi[j].at(p);
                    for c in 0..amb {
                        for d in 0..amb {
                            pip[c * amb + d] -= gij * fi[c] * fj[d];
                        }
                    }
                }
            }
            // Idempotency check (algebraic up to the metric solve accuracy).
            let mut resid: f64 = 0.0;
            for c in 0..amb {
                for d in 0..amb {
                    let mut s = 0.0;
                    for e in 0..amb {
                        s += pip[c * amb + e] * pip[e * amb + d];
                    }
                    resid = resid.max((s - pip[c * amb + d]).abs());
                }
            }
            if resid > 1.0e-8 {
                return Err(Error::Resolution(format!(
                    "jet: projector idempotency residual {resid:.3e} at point {p}"
                )));
            }
        }

        // Second fundamental form, Christoffels, mean curvature.
        let pip = &pi[p * amb * amb..(p + 1) * amb * amb];
        for s in 0..ns {
            let xs = xij[s].at(p);
            let av = &mut a[(p * ns + s) * amb..(p * ns + s + 1) * amb];
            for c in 0..amb {
                let mut acc = 0.0;
                for d in 0..amb {
                    acc += pip[c * amb + d] * xs[d];
                }
                av[c] = acc;
            }
            // Gamma^m_{ij} = g^{mq} <F_q, d_i d_j F>.
            for mi in 0..n {
                let mut acc = 0.0;
                for q in 0..n {
                    acc += ginv[p * ns + sidx(n, mi, q)] * dot(xi[q].at(p), xs);
                }
                gamma[p * n * ns + mi * ns + s] = acc;
            }
        }
        {
            let hp = h.at_mut(p);
            for i in 0..n {
                for j in 0..n {
                    let gij = ginv[p * ns + sidx(n, i, j)];
                    let av = &a[(p * ns + sidx(n, i, j)) * amb..(p * ns + sidx(n, i, j) + 1) * amb];
                    for c in 0..amb {
                        hp[c] -= gij * av[c];
                    }
                }
            }
            let hn = dot(hp, hp).sqrt();
            h_norm[p] = hn;
            if hn >= H_MIN {
                tau_ok[p] = true;
                let nv = nvec.at_mut(p);
                for c in 0..amb {
                    nv[c] = hp[c] / hn;
                }
            }
        }

        // Tangential/normal split of the position and phi = x^perp/2 - H.
        {
            let x = imm.x.at(p);
            let xperp = x_perp.at_mut(p);
            for c in 0..amb {
                let mut s = 0.0;
                for d in 0..amb {
                    s += pip[c * amb + d] * x[d];
                }
                xperp[c] = s;
            }
            let xt = x_t.at_mut(p);
            for c in 0..amb {
                xt[c] = x[c] - xperp[c];
            }
            let hp = h.at(p);
            let ph = phi.at_mut(p);
            for c in 0..amb {
                ph[c] = 0.5 * xperp[c] - hp[c];
            }
        }
    }

    Ok(GeometryJet {
        n,
        amb,
        points,
        xi,
        xij,
        x: imm.x.clone(),
        g,
        ginv,
        lchol,
        onb,
        pi,
        a,
        gamma,
        h,
        h_norm,
        nvec,
        tau_ok,
        phi,
        x_t,
        x_perp,
        sqrt_det_g,
    })
}

/// Eigenvalues of tau^N = <A, N>/|H| at every point, in the convention
/// "T has eigenvalue lambda if T x + lambda x = 0" (so the model cylinder
/// reports {0 x (n-k), 1/k x k} while the plain trace g^{ij} tau^N_ij stays
/// -1). Values ascend per point.
pub fn taun_spectrum(jet: &GeometryJet) -> Result<Field> {
    let n = jet.n;
    let mut out = Field::zeros(jet.points, n);
    for p in 0..jet.points {
        if !jet.tau_ok[p] {
            return Err(Error::Geometry(format!(
                "taun_spectrum: |H| below {H_MIN:.1e} at point {p}"
            )));
        }
        let a = jet.a_onb(p);
        let nv = jet.nvec.at(p);
        let mut tn = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let av = &a[(i * n + j) * jet.amb..(i * n + j + 1) * jet.amb];
                let v: f64 = av.iter().zip(nv).map(|(x, y)| x * y).sum();
                tn.set(i, j, v / jet.h_norm[p]);
            }
        }
        let eig = sym_eig(&tn);
        // Sign convention: negate so the cylinder spectrum reads {0, 1/k},
        // then re-sort ascending.
        let mut vals: Vec<f64> = eig.values.iter().map(|v| -v).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.at_mut(p).copy_from_slice(&vals);
    }
    Ok(out)
}

/// Trace g^{ij} tau^N_ij at every point (the plain tensor trace, -1 on any
/// shrinker with the crate's sign conventions).
pub fn taun_trace(jet: &GeometryJet) -> Vec<f64> {
    let n = jet.n;
    let mut out = vec![0.0; jet.points];
    for p in 0..jet.points {
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                let av = jet.a_vec(p, i, j);
                let nv = jet.nvec.at(p);
                let v: f64 = av.iter().zip(nv).map(|(x, y)| x * y).sum();
                tr += jet.ginv_at(p, i, j) * v / jet.h_norm[p];
            }
        }
        out[p] = tr;
    }
    out
}

#[cfg(test)]
mod tests;
