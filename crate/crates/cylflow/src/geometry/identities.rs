//! Residuals of the curvature identities satisfied by any immersed surface,
//! evaluated on discrete jets. Each returns pointwise residual magnitudes;
//! callers turn them into Gaussian-L^2 / max norms and refinement fits.
//!
//! With L = script-L + 1/2 + sum <., A_kl> A_kl acting on symmetric normal
//! 2-tensors (script-L the drift Laplacian), the Simons-type identity reads
//!
//!   (L A)_ij = A_ij + 2 <A_jl, A_ik> A_lk
//!              - <A_ml, A_il> A_jm - <A_jl, A_ml> A_im
//!              + Hess_phi(E_i, E_j) + A^phi_jm A_im,
//!
//! with the traced form L H = H - Delta^perp phi - A^phi_im A_im. The
//! first-derivative identity is grad^perp_i H = -A(x^T, E_i)/2 -
//! grad^perp_i phi, with its Hessian refinement, and the |grad N| identity
//! and the drift-tau identity follow the same frame conventions.

use crate::chart::{AxisKind, ChartGrid};
use crate::error::Error;
use crate::gaussian::QuadratureRule;
use crate::geometry::ops;
use crate::geometry::pfield::compute_p;
use crate::geometry::GeometryJet;
use crate::numerics::diff::Field;
use crate::Result;

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Residuals of the Simons identity: full tensor form, traced (mean
/// curvature) form, and the cubic A-terms of the right-hand side alone
/// (which cancel identically in codimension one).
pub struct SimonsResidual {
    pub full: Vec<f64>,
    pub traced: Vec<f64>,
    pub cubic: Vec<f64>,
}

pub fn simons_residual(grid: &ChartGrid, jet: &GeometryJet) -> Result<SimonsResidual> {
    let n = jet.n;
    let amb = jet.amb;
    let ns = jet.nsym();
    let npts = jet.points;

    let a_field = Field { ncomp: ns * amb, data: jet.a.clone() };
    let (la, _cov_a) = ops::drift_laplace_sym2(grid, jet, &a_field);
    let hessphi = ops::hess_normal(grid, jet, &jet.phi);
    // Traced form ingredients.
    let lap_h = ops::laplace_normal(grid, jet, &jet.h);
    let cov_h = ops::covgrad_normal(grid, jet, &jet.h);
    let drift_h = ops::drift_normal(grid, jet, &cov_h);
    let lap_phi = ops::laplace_normal(grid, jet, &jet.phi);

    let mut out = SimonsResidual {
        full: vec![0.0; npts],
        traced: vec![0.0; npts],
        cubic: vec![0.0; npts],
    };

    for p in 0..npts {
        let a = jet.a_onb(p);
        let la_onb = jet.onb2_sym(p, &la.data[p * ns * amb..(p + 1) * ns * amb]);
        let hp_onb = jet.onb2_full(p, &hessphi.data[p * n * n * amb..(p + 1) * n * n * amb]);
        let phi = jet.phi.at(p);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        // A^phi in the orthonormal frame.
        let mut aphi = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                aphi[i * n + j] = dot(av(i, j), phi);
            }
        }

        let mut full2 = 0.0;
        let mut cubic2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut lhs = vec![0.0; amb];
                let lav = &la_onb[(i * n + j) * amb..(i * n + j + 1) * amb];
                for c in 0..amb {
                    lhs[c] = lav[c] + 0.5 * av(i, j)[c];
                }
                for k2 in 0..n {
                    for l in 0..n {
                        let w = dot(av(i, j), av(k2, l));
                        let akl = av(k2, l);
                        for c in 0..amb {
                            lhs[c] += w * akl[c];
                        }
                    }
                }

                let mut rhs = vec![0.0; amb];
                let mut cub = vec![0.0; amb];
                for c in 0..amb {
                    rhs[c] = av(i, j)[c] + hp_onb[(i * n + j) * amb + c];
                }
                for l in 0..n {
                    for k2 in 0..n {
                        let w = 2.0 * dot(av(j, l), av(i, k2));
                        let alk = av(l, k2);
                        for c in 0..amb {
                            cub[c] += w * alk[c];
                        }
                    }
                    for m in 0..n {
                        let w1 = dot(av(m, l), av(i, l));
                        let ajm = av(j, m);
                        let w2 = dot(av(j, l), av(m, l));
                        let aim = av(i, m);
                        for c in 0..amb {
                            cub[c] -= w1 * ajm[c] + w2 * aim[c];
                        }
                    }
                }
                for m in 0..n {
                    let w = aphi[j * n + m];
                    let aim = av(i, m);
                    for c in 0..amb {
                        rhs[c] += w * aim[c];
                    }
                }
                for c in 0..amb {
                    let r = lhs[c] - rhs[c] - cub[c];
                    full2 += r * r;
                    cubic2 += cub[c] * cub[c];
                }
            }
        }
        out.full[p] = full2.sqrt();
        out.cubic[p] = cubic2.sqrt();

        // Traced: L H = H - Delta^perp phi - A^phi_im A_im.
        let h = jet.h.at(p);
        let mut traced2 = 0.0;
        for c in 0..amb {
            let mut lh = lap_h.at(p)[c] - 0.5 * drift_h.at(p)[c] + 0.5 * h[c];
            // + sum <H, A_kl> A_kl (orthonormal frame).
            let mut cubic_h = 0.0;
            for k2 in 0..n {
                for l in 0..n {
                    cubic_h += dot(h, av(k2, l)) * av(k2, l)[c];
                }
            }
            lh += cubic_h;
            let mut rhs = h[c] - lap_phi.at(p)[c];
            for i in 0..n {
                for m in 0..n {
                    rhs -= aphi[i * n + m] * av(i, m)[c];
                }
            }
            let r = lh - rhs;
            traced2 += r * r;
        }
        out.traced[p] = traced2.sqrt();
    }
    Ok(out)
}

/// Residuals of the first-derivative identity for H and its Hessian
/// refinement.
pub struct GradHResidual {
    /// | grad^perp_i H + A(x^T, E_i)/2 + grad^perp_i phi | summed over i.
    pub first: Vec<f64>,
    /// | Hess_H(i,j) + Hess_phi(i,j) + (grad_{x^T} A)_ij / 2 + A_ij / 2
    ///   + A_ik A^{x^perp}_jk / 2 |.
    pub hess: Vec<f64>,
}

pub fn gradh_residual(grid: &ChartGrid, jet: &GeometryJet) -> Result<GradHResidual> {
    let n = jet.n;
    let amb = jet.amb;
    let ns = jet.nsym();
    let npts = jet.points;

    let cov_h = ops::covgrad_normal(grid, jet, &jet.h);
    let cov_phi = ops::covgrad_normal(grid, jet, &jet.phi);
    let hess_h = ops::hess_normal(grid, jet, &jet.h);
    let hess_phi = ops::hess_normal(grid, jet, &jet.phi);
    let a_field = Field { ncomp: ns * amb, data: jet.a.clone() };
    let cov_a = ops::covgrad_sym2(grid, jet, &a_field);
    let xt = ops::xt_components(grid, jet);
    let drift_a = ops::direction_contract_sym2(grid, &cov_a, &xt);

    let mut out = GradHResidual { first: vec![0.0; npts], hess: vec![0.0; npts] };

    for p in 0..npts {
        let a = jet.a_onb(p);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        let covh = jet.onb1(p, &cov_h.data[p * n * amb..(p + 1) * n * amb]);
        let covphi = jet.onb1(p, &cov_phi.data[p * n * amb..(p + 1) * n * amb]);
        let xt_onb = jet.xt_onb(p);

        let mut first2 = 0.0;
        for i in 0..n {
            for c in 0..amb {
                let mut axt = 0.0;
                for b in 0..n {
                    axt += xt_onb[b] * av(b, i)[c];
                }
                let r = covh[i * amb + c] + 0.5 * axt + covphi[i * amb + c];
                first2 += r * r;
            }
        }
        out.first[p] = first2.sqrt();

        let hh = jet.onb2_full(p, &hess_h.data[p * n * n * amb..(p + 1) * n * n * amb]);
        let hp = jet.onb2_full(p, &hess_phi.data[p * n * n * amb..(p + 1) * n * n * amb]);
        let da = jet.onb2_sym(p, &drift_a.data[p * ns * amb..(p + 1) * ns * amb]);
        let xperp = jet.x_perp.at(p);
        let mut hess2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for c in 0..amb {
                    let mut axp = 0.0;
                    for k2 in 0..n {
                        axp += av(i, k2)[c] * dot(av(j, k2), xperp);
                    }
                    let r = hh[(i * n + j) * amb + c]
                        + hp[(i * n + j) * amb + c]
                        + 0.5 * da[(i * n + j) * amb + c]
                        + 0.5 * av(i, j)[c]
                        + 0.5 * axp;
                    hess2 += r * r;
                }
            }
        }
        out.hess[p] = hess2.sqrt();
    }
    Ok(out)
}

/// Residuals of the |grad N| identity: `weingarten` compares
/// |H|^2 |grad N|^2 with |grad H|^2 - |grad |H||^2; `expanded` compares the
/// latter with its phi-expansion. Their difference cross-checks the two
/// claimed equalities against each other.
pub struct NablaNResidual {
    pub weingarten: Vec<f64>,
    pub expanded: Vec<f64>,
}

pub fn nablan_residual(grid: &ChartGrid, jet: &GeometryJet) -> Result<NablaNResidual> {
    let n = jet.n;
    let amb = jet.amb;
    let npts = jet.points;
    for p in 0..npts {
        if !jet.tau_ok[p] {
            return Err(Error::Geometry(format!(
                "nablan_residual: |H| degenerate at point {p}"
            )));
        }
    }

    let cov_n = ops::covgrad_normal(grid, jet, &jet.nvec);
    let cov_h = ops::covgrad_normal(grid, jet, &jet.h);
    let cov_phi = ops::covgrad_normal(grid, jet, &jet.phi);
    let grad_hn = ops::grad_scalar(grid, &jet.h_norm);

    let mut out = NablaNResidual { weingarten: vec![0.0; npts], expanded: vec![0.0; npts] };

    for p in 0..npts {
        let a = jet.a_onb(p);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        let covn = jet.onb1(p, &cov_n.data[p * n * amb..(p + 1) * n * amb]);
        let covh = jet.onb1(p, &cov_h.data[p * n * amb..(p + 1) * n * amb]);
        let covphi = jet.onb1(p, &cov_phi.data[p * n * amb..(p + 1) * n * amb]);
        let xt = jet.xt_onb(p);
        let nv = jet.nvec.at(p);
        let h2 = jet.h_norm[p] * jet.h_norm[p];

        let gradn2: f64 = covn.iter().map(|v| v * v).sum();
        let gradh2: f64 = covh.iter().map(|v| v * v).sum();
        // |grad |H||^2 = g^{ij} d_i|H| d_j|H|.
        let mut gradhn2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                gradhn2 += jet.ginv_at(p, i, j)
                    * grad_hn.data[p * n + i]
                    * grad_hn.data[p * n + j];
            }
        }

        let mid = gradh2 - gradhn2;
        out.weingarten[p] = (h2 * gradn2 - mid).abs();

        // phi-expansion.
        let mut axt2 = 0.0;
        let mut anxt2 = 0.0;
        let mut tr_agradphi = 0.0;
        let mut tr_an_phin = 0.0;
        let mut phin2 = 0.0;
        let gradphi2: f64 = covphi.iter().map(|v| v * v).sum();
        for i in 0..n {
            let cphi = &covphi[i * amb..(i + 1) * amb];
            let mut axt_vec = vec![0.0; amb];
            let mut anxt = 0.0;
            for b in 0..n {
                let abi = av(b, i);
                for c in 0..amb {
                    axt_vec[c] += xt[b] * abi[c];
                }
                anxt += xt[b] * dot(abi, nv);
            }
            axt2 += dot(&axt_vec, &axt_vec);
            anxt2 += anxt * anxt;
            tr_agradphi += dot(&axt_vec, cphi);
            let phin = dot(cphi, nv);
            tr_an_phin += anxt * phin;
            phin2 += phin * phin;
        }
        let rhs = 0.25 * axt2 - 0.25 * anxt2 + tr_agradphi + gradphi2 - tr_an_phin - phin2;
        out.expanded[p] = (mid - rhs).abs();
    }
    Ok(out)
}

/// Residual of the drift-tau identity
/// |H| <A, script-L_{|H|^2} tau> = P + (phi terms).
pub fn drift_tau_residual(grid: &ChartGrid, jet: &GeometryJet) -> Result<Vec<f64>> {
    let n = jet.n;
    let amb = jet.amb;
    let ns = jet.nsym();
    let npts = jet.points;

    // tau = A / |H| as a coordinate tensor field.
    let mut tau = Field::zeros(npts, ns * amb);
    for p in 0..npts {
        if !jet.tau_ok[p] {
            return Err(Error::Geometry(format!(
                "drift_tau_residual: |H| degenerate at point {p}"
            )));
        }
        let inv = 1.0 / jet.h_norm[p];
        for c in 0..ns * amb {
            tau.data[p * ns * amb + c] = jet.a[p * ns * amb + c] * inv;
        }
    }
    let (ltau, cov_tau) = ops::drift_laplace_sym2(grid, jet, &tau);
    // Extra drift along grad log |H|^2: contravariant components
    // w^c = g^{cm} * 2 d_m |H| / |H|.
    let grad_hn = ops::grad_scalar(grid, &jet.h_norm);
    let mut w = Field::zeros(npts, n);
    for p in 0..npts {
        for c2 in 0..n {
            let mut s = 0.0;
            for m in 0..n {
                s += jet.ginv_at(p, c2, m) * 2.0 * grad_hn.data[p * n + m] / jet.h_norm[p];
            }
            w.data[p * n + c2] = s;
        }
    }
    let extra = ops::direction_contract_sym2(grid, &cov_tau, &w);
    let mut lw_tau = ltau;
    lw_tau.axpy(1.0, &extra);

    let hess_phi = ops::hess_normal(grid, jet, &jet.phi);
    let lap_phi = ops::laplace_normal(grid, jet, &jet.phi);
    let cov_phi = ops::covgrad_normal(grid, jet, &jet.phi);
    let pfield = compute_p(jet)?;

    let mut out = vec![0.0; npts];
    for p in 0..npts {
        let a = jet.a_onb(p);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        let t_onb = jet.onb2_sym(p, &lw_tau.data[p * ns * amb..(p + 1) * ns * amb]);
        let hp = jet.onb2_full(p, &hess_phi.data[p * n * n * amb..(p + 1) * n * n * amb]);
        let covphi = jet.onb1(p, &cov_phi.data[p * n * amb..(p + 1) * n * amb]);
        let phi = jet.phi.at(p);
        let nv = jet.nvec.at(p);
        let xt = jet.xt_onb(p);
        let hn = jet.h_norm[p];
        let mut a2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                a2 += dot(av(i, j), av(i, j));
            }
        }

        // LHS.
        let mut lhs = 0.0;
        for i in 0..n {
            for j in 0..n {
                lhs += dot(av(i, j), &t_onb[(i * n + j) * amb..(i * n + j + 1) * amb]);
            }
        }
        lhs *= hn;

        // RHS terms.
        let mut aphi_cubic = 0.0; // A^phi_jm <A_im, A_ij>
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    aphi_cubic += dot(av(j, m), phi) * dot(av(i, m), av(i, j));
                }
            }
        }
        let mut hessphi_a = 0.0;
        for i in 0..n {
            for j in 0..n {
                hessphi_a += dot(&hp[(i * n + j) * amb..(i * n + j + 1) * amb], av(i, j));
            }
        }
        let dphi_n = dot(lap_phi.at(p), nv);
        let mut aphi_an = 0.0;
        for i in 0..n {
            for j in 0..n {
                aphi_an += dot(av(i, j), phi) * dot(av(i, j), nv);
            }
        }
        let mut tr_an_phin = 0.0;
        let mut phin2 = 0.0;
        let mut tr_agradphi = 0.0;
        let gradphi2: f64 = covphi.iter().map(|v| v * v).sum();
        for i in 0..n {
            let cphi = &covphi[i * amb..(i + 1) * amb];
            let mut axt_vec = vec![0.0; amb];
            let mut anxt = 0.0;
            for b in 0..n {
                let abi = av(b, i);
                for c in 0..amb {
                    axt_vec[c] += xt[b] * abi[c];
                }
                anxt += xt[b] * dot(abi, nv);
            }
            let phin = dot(cphi, nv);
            tr_an_phin += anxt * phin;
            phin2 += phin * phin;
            tr_agradphi += dot(&axt_vec, cphi);
        }
        let rhs = pfield.p[p]
            + aphi_cubic
            + hessphi_a
            + (a2 / hn) * (dphi_n + aphi_an)
            + (a2 / (hn * hn)) * (tr_an_phin + phin2 - tr_agradphi - gradphi2);
        out[p] = (lhs - rhs).abs();
    }
    Ok(out)
}

/// The localized integral inequality audit:
///   int psi^2 (|grad tau|^2 |H|^2 + 2 P) e^{-f}
///     <= 4 int |A|^2 |grad psi|^2 e^{-f} + C (phi terms).
/// Reports each side and the smallest admissible C.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KappaReport {
    pub lhs: f64,
    /// The gradient term including its sharp constant 4.
    pub grad_term: f64,
    pub phi_term_1: f64,
    pub phi_term_2: f64,
    /// Smallest C with lhs <= grad_term + C (phi_term_1 + phi_term_2).
    pub c_min: f64,
}

pub fn kappa_audit(
    grid: &ChartGrid,
    jet: &GeometryJet,
    psi: &[f64],
    rule: &QuadratureRule,
) -> Result<KappaReport> {
    let n = jet.n;
    let amb = jet.amb;
    let ns = jet.nsym();
    let npts = jet.points;
    assert_eq!(psi.len(), npts);

    // The cutoff must vanish within two cells of every bounded-axis
    // boundary (one-sided stencil zone).
    for p in 0..npts {
        if psi[p] == 0.0 {
            continue;
        }
        let idx = grid.multi_index(p);
        for (a, ax) in grid.axes.iter().enumerate() {
            if ax.kind == AxisKind::Bounded && (idx[a] < 2 || idx[a] + 2 >= ax.m) {
                return Err(Error::Config(
                    "kappa_audit: cutoff support touches the grid boundary".into(),
                ));
            }
        }
    }

    let mut tau = Field::zeros(npts, ns * amb);
    for p in 0..npts {
        if !jet.tau_ok[p] {
            return Err(Error::Geometry(format!("kappa_audit: |H| degenerate at point {p}")));
        }
        let inv = 1.0 / jet.h_norm[p];
        for c in 0..ns * amb {
            tau.data[p * ns * amb + c] = jet.a[p * ns * amb + c] * inv;
        }
    }
    let cov_tau = ops::covgrad_sym2(grid, jet, &tau);
    let grad_psi = ops::grad_scalar(grid, psi);
    let hess_phi = ops::hess_normal(grid, jet, &jet.phi);
    let cov_phi = ops::covgrad_normal(grid, jet, &jet.phi);
    let pf = compute_p(jet)?;

    let mut i_lhs = vec![0.0; npts];
    let mut i_grad = vec![0.0; npts];
    let mut i_phi1 = vec![0.0; npts];
    let mut i_phi2 = vec![0.0; npts];
    for p in 0..npts {
        let psi2 = psi[p] * psi[p];
        let a = jet.a_onb(p);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        let covt = jet.onb3(p, &cov_tau.data[p * n * ns * amb..(p + 1) * n * ns * amb]);
        let gradtau2: f64 = covt.iter().map(|v| v * v).sum();
        let hn = jet.h_norm[p];
        let mut a2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                a2 += dot(av(i, j), av(i, j));
            }
        }
        i_lhs[p] = psi2 * (gradtau2 * hn * hn + 2.0 * pf.p[p]);

        let mut gradpsi2 = 0.0;
        for i in 0..n {
            for j in 0..n {
                gradpsi2 += jet.ginv_at(p, i, j)
                    * grad_psi.data[p * n + i]
                    * grad_psi.data[p * n + j];
            }
        }
        i_grad[p] = a2 * gradpsi2;

        let hp = jet.onb2_full(p, &hess_phi.data[p * n * n * amb..(p + 1) * n * n * amb]);
        let hessphi_norm: f64 = hp.iter().map(|v| v * v).sum::<f64>().sqrt();
        let phi_norm: f64 = dot(jet.phi.at(p), jet.phi.at(p)).sqrt();
        let a_norm = a2.sqrt();
        i_phi1[p] = (a_norm + a2 / hn) * (a2 * phi_norm + hessphi_norm) * psi2;

        let covphi = jet.onb1(p, &cov_phi.data[p * n * amb..(p + 1) * n * amb]);
        let gradphi: f64 = covphi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xt = jet.xt_onb(p);
        let mut axt2 = 0.0;
        for i in 0..n {
            let mut axt_vec = vec![0.0; amb];
            for b in 0..n {
                let abi = av(b, i);
                for c in 0..amb {
                    axt_vec[c] += xt[b] * abi[c];
                }
            }
            axt2 += dot(&axt_vec, &axt_vec);
        }
        i_phi2[p] = (a2 * gradphi / (hn * hn)) * (axt2.sqrt() + gradphi) * psi2;
    }

    let lhs = rule.integrate_values(&i_lhs);
    let grad_term = 4.0 * rule.integrate_values(&i_grad);
    let phi_term_1 = rule.integrate_values(&i_phi1);
    let phi_term_2 = rule.integrate_values(&i_phi2);
    let slack = lhs - grad_term;
    let c_min = if slack <= 0.0 {
        0.0
    } else if phi_term_1 + phi_term_2 > 0.0 {
        slack / (phi_term_1 + phi_term_2)
    } else {
        f64::INFINITY
    };
    Ok(KappaReport { lhs, grad_term, phi_term_1, phi_term_2, c_min })
}
