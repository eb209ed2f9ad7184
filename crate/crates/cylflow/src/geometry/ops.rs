//! Covariant differentiation of fields along an immersed surface.
//!
//! All operators are assembled from grid partial derivatives of the stored
//! discrete fields plus pointwise projection; tangential index corrections
//! contract with the Gamma^m_ij already recorded in the jet.

use crate::chart::ChartGrid;
use crate::geometry::{sidx, GeometryJet};
use crate::numerics::diff::Field;

/// Coordinate gradient of a scalar field: layout n per point.
pub fn grad_scalar(grid: &ChartGrid, f: &[f64]) -> Field {
    let n = grid.n;
    let fld = Field { ncomp: 1, data: f.to_vec() };
    let mut out = Field::zeros(grid.points, n);
    for a in 0..n {
        let d = grid.diff(&fld, a, 1);
        for p in 0..grid.points {
            out.data[p * n + a] = d.data[p];
        }
    }
    out
}

/// Covariant Hessian of a scalar: Hess f (i,j) = d_i d_j f - Gamma^m_ij d_m f,
/// packed symmetric (nsym per point).
pub fn hess_scalar(grid: &ChartGrid, jet: &GeometryJet, f: &[f64]) -> Field {
    let n = grid.n;
    let ns = n * (n + 1) / 2;
    let fld = Field { ncomp: 1, data: f.to_vec() };
    let grad = grad_scalar(grid, f);
    let mut second = Vec::with_capacity(ns);
    let firsts: Vec<Field> = (0..n).map(|a| grid.diff(&fld, a, 1)).collect();
    for i in 0..n {
        for j in i..n {
            if i == j {
                second.push(grid.diff(&fld, i, 2));
            } else {
                second.push(grid.diff(&firsts[i], j, 1));
            }
        }
    }
    let mut out = Field::zeros(grid.points, ns);
    for p in 0..grid.points {
        for i in 0..n {
            for j in i..n {
                let s = sidx(n, i, j);
                let mut v = second[s].data[p];
                for m in 0..n {
                    v -= jet.gamma_at(p, m, i, j) * grad.data[p * n + m];
                }
                out.data[p * ns + s] = v;
            }
        }
    }
    out
}

/// Normal-bundle covariant derivative of a normal vector field:
/// (grad^perp_a V) = Pi(d_a V). Layout n x amb per point.
pub fn covgrad_normal(grid: &ChartGrid, jet: &GeometryJet, v: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let mut out = Field::zeros(grid.points, n * amb);
    let mut tmp = vec![0.0; amb];
    for a in 0..n {
        let d = grid.diff(v, a, 1);
        for p in 0..grid.points {
            jet.project_normal(p, d.at(p), &mut tmp);
            out.data[p * n * amb + a * amb..p * n * amb + (a + 1) * amb].copy_from_slice(&tmp);
        }
    }
    out
}

/// Normal Hessian of a normal vector field under the asymmetric convention
/// Hess_V(E_i, E_j) = grad^perp_j grad^perp_i V - grad^perp over the
/// tangential connection term. Full layout n*n x amb per point, index
/// (i * n + j) with j the differentiating slot.
pub fn hess_normal(grid: &ChartGrid, jet: &GeometryJet, v: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let w = covgrad_normal(grid, jet, v); // W_i = grad^perp_i V
    let mut out = Field::zeros(grid.points, n * n * amb);
    let mut tmp = vec![0.0; amb];
    for j in 0..n {
        let dj = grid.diff(&w, j, 1); // d_j W, layout n x amb
        for p in 0..grid.points {
            for i in 0..n {
                jet.project_normal(p, &dj.at(p)[i * amb..(i + 1) * amb], &mut tmp);
                let dst = &mut out.data
                    [(p * n * n + i * n + j) * amb..(p * n * n + i * n + j + 1) * amb];
                dst.copy_from_slice(&tmp);
                for m in 0..n {
                    let gm = jet.gamma_at(p, m, j, i);
                    if gm != 0.0 {
                        let wm = &w.data[(p * n + m) * amb..(p * n + m + 1) * amb];
                        for c in 0..amb {
                            dst[c] -= gm * wm[c];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Trace of the normal Hessian: the (drift-free) normal Laplacian
/// Delta^perp V. Layout amb per point.
pub fn laplace_normal(grid: &ChartGrid, jet: &GeometryJet, v: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let hess = hess_normal(grid, jet, v);
    let mut out = Field::zeros(grid.points, amb);
    for p in 0..grid.points {
        for i in 0..n {
            for j in 0..n {
                let gij = jet.ginv_at(p, i, j);
                let hv = &hess.data[(p * n * n + i * n + j) * amb..(p * n * n + i * n + j + 1) * amb];
                let dst = out.at_mut(p);
                for c in 0..amb {
                    dst[c] += gij * hv[c];
                }
            }
        }
    }
    out
}

/// Drift term grad^perp_{x^T} V for a normal field: contract the covariant
/// gradient with the tangential position (x^T)^c = g^{cm} <F_m, x>.
pub fn drift_normal(grid: &ChartGrid, jet: &GeometryJet, cov: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let mut out = Field::zeros(grid.points, amb);
    for p in 0..grid.points {
        let x = jet.x.at(p);
        for c2 in 0..n {
            let mut xc = 0.0;
            for m in 0..n {
                let fm = jet.xi[m].at(p);
                let fmx: f64 = fm.iter().zip(x).map(|(a, b)| a * b).sum();
                xc += jet.ginv_at(p, c2, m) * fmx;
            }
            let wv = &cov.data[(p * n + c2) * amb..(p * n + c2 + 1) * amb];
            let dst = out.at_mut(p);
            for c in 0..amb {
                dst[c] += xc * wv[c];
            }
        }
    }
    out
}

/// Covariant derivative of a symmetric normal-valued 2-tensor:
/// (grad_c T)_ij = Pi(d_c T_ij) - Gamma^m_ci T_mj - Gamma^m_cj T_im.
/// Input layout nsym x amb, output n x nsym x amb per point (the symmetry in
/// (i, j) survives differentiation).
pub fn covgrad_sym2(grid: &ChartGrid, jet: &GeometryJet, t: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let ns = n * (n + 1) / 2;
    assert_eq!(t.ncomp, ns * amb);
    let mut out = Field::zeros(grid.points, n * ns * amb);
    let mut tmp = vec![0.0; amb];
    for cdir in 0..n {
        let d = grid.diff(t, cdir, 1);
        for p in 0..grid.points {
            for i in 0..n {
                for j in i..n {
                    let s = sidx(n, i, j);
                    jet.project_normal(p, &d.at(p)[s * amb..(s + 1) * amb], &mut tmp);
                    let base = (p * n * ns + cdir * ns + s) * amb;
                    out.data[base..base + amb].copy_from_slice(&tmp);
                    for m in 0..n {
                        let g1 = jet.gamma_at(p, m, cdir, i);
                        if g1 != 0.0 {
                            let src = &t.data[(p * ns + sidx(n, m, j)) * amb
                                ..(p * ns + sidx(n, m, j) + 1) * amb];
                            for c in 0..amb {
                                out.data[base + c] -= g1 * src[c];
                            }
                        }
                        let g2 = jet.gamma_at(p, m, cdir, j);
                        if g2 != 0.0 {
                            let src = &t.data[(p * ns + sidx(n, i, m)) * amb
                                ..(p * ns + sidx(n, i, m) + 1) * amb];
                            for c in 0..amb {
                                out.data[base + c] -= g2 * src[c];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Rough (Bochner) Laplacian of a symmetric normal-valued 2-tensor:
/// (Delta T)_ij = g^{cd} (grad^2 T)_{cd, ij}, built by differentiating the
/// stored covariant gradient once more.
pub fn laplace_sym2(grid: &ChartGrid, jet: &GeometryJet, t: &Field, cov: &Field) -> Field {
    let n = grid.n;
    let amb = grid.amb;
    let ns = n * (n + 1) / 2;
    let _ = t;
    let mut out = Field::zeros(grid.points, ns * amb);
    let mut tmp = vec![0.0; amb];
    for ddir in 0..n {
        let dcov = grid.diff(cov, ddir, 1); // d_d (grad T), layout n x nsym x amb
        for p in 0..grid.points {
            for cdir in 0..n {
                let gcd = jet.ginv_at(p, cdir, ddir);
                if gcd == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in i..n {
                        let s = sidx(n, i, j);
                        // Pi(d_d B_{c,ij})
                        let src = &dcov.at(p)[(cdir * ns + s) * amb..(cdir * ns + s + 1) * amb];
                        jet.project_normal(p, src, &mut tmp);
                        // Index corrections: - G^m_dc B_{m,ij} - G^m_di B_{c,mj}
                        //                    - G^m_dj B_{c,im}.
                        for m in 0..n {
                            let g0 = jet.gamma_at(p, m, ddir, cdir);
                            if g0 != 0.0 {
                                let b = &cov.data[(p * n * ns + m * ns + s) * amb
                                    ..(p * n * ns + m * ns + s + 1) * amb];
                                for c in 0..amb {
                                    tmp[c] -= g0 * b[c];
                                }
                            }
                            let g1 = jet.gamma_at(p, m, ddir, i);
                            if g1 != 0.0 {
                                let sm = sidx(n, m, j);
                                let b = &cov.data[(p * n * ns + cdir * ns + sm) * amb
                                    ..(p * n * ns + cdir * ns + sm + 1) * amb];
                                for c in 0..amb {
                                    tmp[c] -= g1 * b[c];
                                }
                            }
                            let g2 = jet.gamma_at(p, m, ddir, j);
                            if g2 != 0.0 {
                                let sm = sidx(n, i, m);
                                let b = &cov.data[(p * n * ns + cdir * ns + sm) * amb
                                    ..(p * n * ns + cdir * ns + sm + 1) * amb];
                                for c in 0..amb {
                                    tmp[c] -= g2 * b[c];
                                }
                            }
                        }
                        let dst = &mut out.data[(p * ns + s) * amb..(p * ns + s + 1) * amb];
                        for c in 0..amb {
                            dst[c] += gcd * tmp[c];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Contract the covariant gradient of a sym-2 tensor with a tangential
/// direction given by its contravariant coordinate components `w^c` (field,
/// n per point): returns (grad_w T)_ij, layout nsym x amb.
pub fn direction_contract_sym2(
    grid: &ChartGrid,
    cov: &Field,
    wc: &Field,
) -> Field {
    let npts = grid.points;
    let n = grid.n;
    let ns = n * (n + 1) / 2;
    let amb = grid.amb;
    let mut out = Field::zeros(npts, ns * amb);
    for p in 0..npts {
        for cdir in 0..n {
            let w = wc.data[p * n + cdir];
            if w == 0.0 {
                continue;
            }
            for s in 0..ns {
                let src = &cov.data[(p * n * ns + cdir * ns + s) * amb
                    ..(p * n * ns + cdir * ns + s + 1) * amb];
                let dst = &mut out.data[(p * ns + s) * amb..(p * ns + s + 1) * amb];
                for c in 0..amb {
                    dst[c] += w * src[c];
                }
            }
        }
    }
    out
}

/// Contravariant coordinate components of the tangential position:
/// (x^T)^c = g^{cm} <F_m, x>. Layout n per point.
pub fn xt_components(grid: &ChartGrid, jet: &GeometryJet) -> Field {
    let n = grid.n;
    let mut out = Field::zeros(grid.points, n);
    for p in 0..grid.points {
        let x = jet.x.at(p);
        for c2 in 0..n {
            let mut s = 0.0;
            for m in 0..n {
                let fm = jet.xi[m].at(p);
                let fmx: f64 = fm.iter().zip(x).map(|(a, b)| a * b).sum();
                s += jet.ginv_at(p, c2, m) * fmx;
            }
            out.data[p * n + c2] = s;
        }
    }
    out
}

/// Drift Laplacian on a symmetric normal 2-tensor:
/// (script-L T)_ij = (Delta T)_ij - (1/2)(grad_{x^T} T)_ij.
pub fn drift_laplace_sym2(grid: &ChartGrid, jet: &GeometryJet, t: &Field) -> (Field, Field) {
    let cov = covgrad_sym2(grid, jet, t);
    let lap = laplace_sym2(grid, jet, t, &cov);
    let xt = xt_components(grid, jet);
    let drift = direction_contract_sym2(grid, &cov, &xt);
    let mut out = lap;
    out.axpy(-0.5, &drift);
    (out, cov)
}
