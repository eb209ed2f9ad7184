//! First variations of the geometric quantities along a normal direction,
//! validated against centered finite differences of the nonlinear geometry
//! pipeline.
//!
//! The orientation matters: the finite-difference ladder (with Richardson
//! extrapolation) is treated as ground truth and the analytic formula is
//! the artifact under test, so a sign or index error in either the formula
//! or the geometry assembly shows up as a broken convergence order rather
//! than being silently consistent.

use crate::chart::{self, ChartGrid, Immersion, NormalField, Provenance};
use crate::error::Error;
use crate::gaussian;
use crate::geometry::{self, ops, GeometryJet};
use crate::numerics::diff::Field;
use crate::rates;
use crate::Result;
use serde::Serialize;

/// Default probe step ladder for the finite-difference oracle.
pub const S_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Outcome of one analytic-vs-finite-difference comparison.
pub struct VariationResult {
    pub op: &'static str,
    pub direction_label: String,
    /// The analytic derivative field at s = 0.
    pub analytic: Field,
    /// Richardson-extrapolated centered difference from the two smallest
    /// steps.
    pub fd: Field,
    /// (step, max pointwise discrepancy analytic vs centered FD).
    pub discrepancies: Vec<(f64, f64)>,
    /// Slope of log(discrepancy) against log(step); ~2 for a correct
    /// analytic formula, infinite when the discrepancy is at roundoff.
    pub fitted_order: f64,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationSummary {
    pub op: &'static str,
    pub direction_label: String,
    pub analytic_vs_fd_order: f64,
    pub max_discrepancy: f64,
}

impl VariationResult {
    pub fn summary(&self) -> VariationSummary {
        VariationSummary {
            op: self.op,
            direction_label: self.direction_label.clone(),
            analytic_vs_fd_order: self.fitted_order,
            max_discrepancy: self.max_discrepancy,
        }
    }
}

/// Ambient realization of a normal field over the cylinder.
fn ambient_direction(grid: &ChartGrid, v: &NormalField) -> Field {
    let amb = grid.amb;
    let zstart = grid.n + 1;
    let mut out = Field::zeros(grid.points, amb);
    for p in 0..grid.points {
        let vals = v.values.at(p);
        let nrm = grid.normal.at(p);
        let dst = out.at_mut(p);
        for c in 0..amb {
            dst[c] = vals[0] * nrm[c];
        }
        for a in 0..grid.zdim() {
            dst[zstart + a] += vals[1 + a];
        }
    }
    out
}

/// Centered differences of an arbitrary jet extract over the step ladder,
/// plus the Richardson combination of the two smallest steps.
fn fd_ladder<F>(
    grid: &ChartGrid,
    v: &NormalField,
    s_list: &[f64],
    extract: F,
) -> Result<(Vec<(f64, Field)>, Field)>
where
    F: Fn(&GeometryJet) -> Field,
{
    assert!(s_list.len() >= 2);
    let mut ladder = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let plus = geometry::jet(grid, &chart::graph(grid, &v.scaled(s))?)?;
        let minus = geometry::jet(grid, &chart::graph(grid, &v.scaled(-s))?)?;
        let mut d = extract(&plus);
        d.axpy(-1.0, &extract(&minus));
        ladder.push((s, d.scaled(1.0 / (2.0 * s))));
    }
    // Richardson: D(s/2) + (D(s/2) - D(s)) / 3 for the smallest pair
    // (assumes the ladder decreases; exact ratio not required for a good
    // reference, only for optimal cancellation).
    let last = ladder.len() - 1;
    let mut rich = ladder[last].1.scaled(4.0 / 3.0);
    rich.axpy(-1.0 / 3.0, &ladder[last - 1].1);
    Ok((ladder, rich))
}

fn assemble(
    op: &'static str,
    label: &str,
    analytic: Field,
    ladder: Vec<(f64, Field)>,
    rich: Field,
) -> VariationResult {
    let mut discrepancies = Vec::with_capacity(ladder.len());
    for (s, fd) in &ladder {
        let mut d = fd.clone();
        d.axpy(-1.0, &analytic);
        discrepancies.push((*s, d.max_pointwise_norm()));
    }
    let max_discrepancy = {
        let mut d = rich.clone();
        d.axpy(-1.0, &analytic);
        d.max_pointwise_norm()
    };
    // Centered differences of O(1) fields amplify roundoff by 1/(2s);
    // below ~1e-10 the ladder is noise and the formula is exact.
    let fitted_order = if discrepancies.iter().all(|&(_, d)| d < 1e-10) {
        f64::INFINITY
    } else {
        let xs: Vec<f64> = discrepancies.iter().map(|&(s, _)| s).collect();
        let ys: Vec<f64> = discrepancies.iter().map(|&(_, d)| d.max(1e-300)).collect();
        rates::powerlaw_fit(&xs, &ys).map(|(slope, _, _)| slope).unwrap_or(f64::NAN)
    };
    VariationResult {
        op,
        direction_label: label.to_string(),
        analytic,
        fd: rich,
        discrepancies,
        fitted_order,
        max_discrepancy,
    }
}

/// First variation of the normal projection. The analytic matrix is
///   Pi_s = - sum_{i,j} g^{ij} [ (Pi d_i V) F_j^T + F_i (Pi d_j V)^T ],
/// which satisfies Pi Pi_s Pi = 0 identically.
pub fn dpi(
    grid: &ChartGrid,
    jet: &GeometryJet,
    v: &NormalField,
    label: &str,
    s_list: &[f64],
) -> Result<VariationResult> {
    let n = grid.n;
    let amb = grid.amb;
    let vamb = ambient_direction(grid, v);
    let w = ops::covgrad_normal(grid, jet, &vamb); // Pi(d_i V), n x amb

    let mut analytic = Field::zeros(grid.points, amb * amb);
    for p in 0..grid.points {
        let dst = analytic.at_mut(p);
        for i in 0..n {
            let wi = &w.data[(p * n + i) * amb..(p * n + i + 1) * amb];
            for j in 0..n {
                let gij = jet.ginv_at(p, i, j);
                let fj = jet.xi[j].at(p);
                for c in 0..amb {
                    for d in 0..amb {
                        dst[c * amb + d] -= gij * (wi[c] * fj[d] + fj[c] * wi[d]);
                    }
                }
            }
        }
    }

    let (ladder, rich) = fd_ladder(grid, v, s_list, |j| Field {
        ncomp: amb * amb,
        data: j.pi.clone(),
    })?;
    Ok(assemble("dPi", label, analytic, ladder, rich))
}

/// Max pointwise norm of Pi * M * Pi for a matrix field (the sandwiched
/// variation must vanish identically).
pub fn pi_sandwich_norm(jet: &GeometryJet, m_field: &Field) -> f64 {
    let amb = jet.amb;
    let mut worst: f64 = 0.0;
    for p in 0..jet.points {
        let pi = &jet.pi[p * amb * amb..(p + 1) * amb * amb];
        let m = m_field.at(p);
        for c in 0..amb {
            for d in 0..amb {
                let mut s = 0.0;
                for a in 0..amb {
                    for b in 0..amb {
                        s += pi[c * amb + a] * m[a * amb + b] * pi[b * amb + d];
                    }
                }
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// First variation of the mean curvature vector:
///   H_s = -( Delta^perp V + sum_{a,b} <V, A_ab> A_ab
///            + F_k g^{mk} <d_m V, H> ).
pub fn dh(
    grid: &ChartGrid,
    jet: &GeometryJet,
    v: &NormalField,
    label: &str,
    s_list: &[f64],
) -> Result<VariationResult> {
    let n = grid.n;
    let amb = grid.amb;
    let vamb = ambient_direction(grid, v);
    let lap = ops::laplace_normal(grid, jet, &vamb);

    let mut analytic = Field::zeros(grid.points, amb);
    for p in 0..grid.points {
        let a = jet.a_onb(p);
        let vp = vamb.at(p);
        let dst = analytic.at_mut(p);
        for c in 0..amb {
            dst[c] = -lap.at(p)[c];
        }
        for i in 0..n {
            for j in 0..n {
                let aij = &a[(i * n + j) * amb..(i * n + j + 1) * amb];
                let w: f64 = aij.iter().zip(vp).map(|(x, y)| x * y).sum();
                for c in 0..amb {
                    dst[c] -= w * aij[c];
                }
            }
        }
    }
    // Tangential part - F_k g^{mk} <d_m V, H>: raw partials, once per axis.
    for m in 0..n {
        let dv = grid.diff(&vamb, m, 1);
        for p in 0..grid.points {
            let h = jet.h.at(p);
            let dvh: f64 = dv.at(p).iter().zip(h).map(|(x, y)| x * y).sum();
            let dst = analytic.at_mut(p);
            for k2 in 0..n {
                let gmk = jet.ginv_at(p, m, k2);
                let fk = jet.xi[k2].at(p);
                for c in 0..amb {
                    dst[c] -= gmk * dvh * fk[c];
                }
            }
        }
    }

    let (ladder, rich) = fd_ladder(grid, v, s_list, |j| j.h.clone())?;
    Ok(assemble("dH", label, analytic, ladder, rich))
}

/// First variation of the second fundamental form (packed symmetric
/// coordinate components):
///   (A_ij)_s = - F_k g^{kl} <grad^perp_l V, A_ij>
///              + Hess_V(E_i, E_j) - A^V_ik g^{kl} A_lj.
pub fn da(
    grid: &ChartGrid,
    jet: &GeometryJet,
    v: &NormalField,
    label: &str,
    s_list: &[f64],
) -> Result<VariationResult> {
    let n = grid.n;
    let amb = grid.amb;
    let ns = jet.nsym();
    let vamb = ambient_direction(grid, v);
    let cov = ops::covgrad_normal(grid, jet, &vamb);
    let hess = ops::hess_normal(grid, jet, &vamb);

    let mut analytic = Field::zeros(grid.points, ns * amb);
    for p in 0..grid.points {
        let vp = vamb.at(p);
        for i in 0..n {
            for j in i..n {
                let aij = jet.a_vec(p, i, j);
                let mut t = vec![0.0; amb];
                // Symmetrized Hessian (the asymmetric normal-curvature
                // parts cancel against the cubic term in the sum).
                for c in 0..amb {
                    t[c] = 0.5
                        * (hess.data[(p * n * n + i * n + j) * amb + c]
                            + hess.data[(p * n * n + j * n + i) * amb + c]);
                }
                // - F_k g^{kl} <grad^perp_l V, A_ij>.
                for k2 in 0..n {
                    for l in 0..n {
                        let w: f64 = cov.data[(p * n + l) * amb..(p * n + l + 1) * amb]
                            .iter()
                            .zip(aij)
                            .map(|(x, y)| x * y)
                            .sum();
                        let gkl = jet.ginv_at(p, k2, l);
                        let fk = jet.xi[k2].at(p);
                        for c in 0..amb {
                            t[c] -= gkl * w * fk[c];
                        }
                    }
                }
                // - A^V_ik g^{kl} A_lj, symmetrized in (i, j).
                for k2 in 0..n {
                    for l in 0..n {
                        let gkl = jet.ginv_at(p, k2, l);
                        let av_ik: f64 =
                            jet.a_vec(p, i, k2).iter().zip(vp).map(|(x, y)| x * y).sum();
                        let av_jk: f64 =
                            jet.a_vec(p, j, k2).iter().zip(vp).map(|(x, y)| x * y).sum();
                        let alj = jet.a_vec(p, l, j);
                        let ali = jet.a_vec(p, l, i);
                        for c in 0..amb {
                            t[c] -= 0.5 * gkl * (av_ik * alj[c] + av_jk * ali[c]);
                        }
                    }
                }
                let s = geometry::sidx(n, i, j);
                analytic.at_mut(p)[s * amb..(s + 1) * amb].copy_from_slice(&t);
            }
        }
    }

    let (ladder, rich) = fd_ladder(grid, v, s_list, |j| Field {
        ncomp: ns * amb,
        data: j.a.clone(),
    })?;
    Ok(assemble("dA", label, analytic, ladder, rich))
}

/// First variation of phi = x^perp / 2 - H:
///   phi_s = (V - grad^perp_{x^T} V)/2 + Delta^perp V
///           + sum <V, A_ab> A_ab - F_j g^{ij} <grad^perp_i V, phi>.
/// On the cylinder (phi = 0) this is exactly the stability operator L V,
/// assembled here from the geometry pipeline rather than the spectral
/// module so the two code paths check each other.
pub fn dphi(
    grid: &ChartGrid,
    jet: &GeometryJet,
    v: &NormalField,
    label: &str,
    s_list: &[f64],
) -> Result<VariationResult> {
    let n = grid.n;
    let amb = grid.amb;
    let vamb = ambient_direction(grid, v);
    let cov = ops::covgrad_normal(grid, jet, &vamb);
    let lap = ops::laplace_normal(grid, jet, &vamb);
    let drift = ops::drift_normal(grid, jet, &cov);

    let mut analytic = Field::zeros(grid.points, amb);
    for p in 0..grid.points {
        let a = jet.a_onb(p);
        let vp = vamb.at(p);
        let phi = jet.phi.at(p);
        let dst = analytic.at_mut(p);
        for c in 0..amb {
            dst[c] = 0.5 * (vp[c] - drift.at(p)[c]) + lap.at(p)[c];
        }
        for i in 0..n {
            for j in 0..n {
                let aij = &a[(i * n + j) * amb..(i * n + j + 1) * amb];
                let w: f64 = aij.iter().zip(vp).map(|(x, y)| x * y).sum();
                for c in 0..amb {
                    dst[c] += w * aij[c];
                }
            }
        }
        // Tangential: - F_j g^{ij} <grad^perp_i V, phi>.
        for i in 0..n {
            let wphi: f64 = cov.data[(p * n + i) * amb..(p * n + i + 1) * amb]
                .iter()
                .zip(phi)
                .map(|(x, y)| x * y)
                .sum();
            for j in 0..n {
                let gij = jet.ginv_at(p, i, j);
                let fj = jet.xi[j].at(p);
                for c in 0..amb {
                    dst[c] -= gij * wphi * fj[c];
                }
            }
        }
    }

    let (ladder, rich) = fd_ladder(grid, v, s_list, |j| j.phi.clone())?;
    Ok(assemble("dphi", label, analytic, ladder, rich))
}

/// One scalar line of the cylinder variation table.
#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub name: &'static str,
    pub fitted_order: f64,
    pub max_discrepancy: f64,
}

pub struct CylinderVariationTable {
    pub entries: Vec<TableEntry>,
    /// Analytic (|A|^2)' field, kept for reuse in tests.
    pub d_a2: Vec<f64>,
    /// Analytic |H|' field.
    pub d_habs: Vec<f64>,
    /// Analytic N' field (ambient components).
    pub d_n: Field,
}

/// The explicit first-variation formulas on the model cylinder, each
/// validated against centered finite differences of the nonlinear
/// quantity:
///   (|A|^2)'   = (|A^N|^2)' = -sqrt(2/k) (Delta_theta + 1/2) u,
///   (|A^2|^2)' = -(sqrt(2)/(k sqrt k)) (Delta_theta + 1/2) u,
///   (<A_ij, A_ml>^2)' = -sqrt(2/k) (Delta_theta + 1/2) u,
///   |H|'       = -Delta u - u/2,
///   N'         = -grad u - sqrt(2/k) (Delta u^alpha) dz_alpha,
/// with Delta_theta the sphere-factor Laplacian and Delta, grad the full
/// cylinder operators.
pub fn cylinder_variation_table(
    grid: &ChartGrid,
    v: &NormalField,
    s_list: &[f64],
) -> Result<CylinderVariationTable> {
    let amb = grid.amb;
    let npts = grid.points;
    let kf = grid.k as f64;
    let jet0 = geometry::jet(grid, &chart::build_cylinder(grid))?;

    // Scalar u and its sphere / full Laplacians.
    let u = Field { ncomp: 1, data: (0..npts).map(|p| v.values.at(p)[0]).collect() };
    let zdim = grid.zdim();
    let full = |f: &Field| -> Field {
        // Full drift-free cylinder Laplacian via the spectral helper minus
        // the drift part.
        let mut lap = crate::spectral::drift_laplacian(grid, f);
        let nk = grid.n - grid.k;
        for j in 0..nk {
            let d1 = grid.diff(f, grid.k + j, 1);
            for p in 0..npts {
                let yj = grid.y.data[p * nk + j];
                for c in 0..f.ncomp {
                    lap.at_mut(p)[c] += 0.5 * yj * d1.at(p)[c];
                }
            }
        }
        lap
    };
    let lap_u_full = full(&u);
    let mut lap_u_sphere = lap_u_full.clone();
    for j in 0..(grid.n - grid.k) {
        let d2 = grid.diff(&u, grid.k + j, 2);
        for p in 0..npts {
            lap_u_sphere.data[p] -= d2.data[p];
        }
    }

    let fac = (2.0 / kf).sqrt();
    let d_a2: Vec<f64> =
        (0..npts).map(|p| -fac * (lap_u_sphere.data[p] + 0.5 * u.data[p])).collect();
    let d_a22: Vec<f64> = d_a2.iter().map(|x| x / kf).collect();
    let d_habs: Vec<f64> = (0..npts).map(|p| -lap_u_full.data[p] - 0.5 * u.data[p]).collect();

    // N' = -grad u (ambient tangent vector) - sqrt(2/k) (Delta u^alpha) dz.
    let mut d_n = Field::zeros(npts, amb);
    for i in 0..grid.n {
        let d1 = grid.diff(&u, i, 1);
        for p in 0..npts {
            let fi = jet0.xi[i].at(p);
            let gii = jet0.ginv_at(p, i, i);
            // Diagonal metric on the product chart: grad u = g^{ii} u_i F_i.
            let dst = d_n.at_mut(p);
            for c in 0..amb {
                dst[c] -= gii * d1.data[p] * fi[c];
            }
        }
    }
    let zstart = grid.n + 1;
    for alpha in 0..zdim {
        let ua = Field {
            ncomp: 1,
            data: (0..npts).map(|p| v.values.at(p)[1 + alpha]).collect(),
        };
        let lap_ua = full(&ua);
        for p in 0..npts {
            d_n.at_mut(p)[zstart + alpha] -= fac * lap_ua.data[p];
        }
    }

    // Finite differences of the nonlinear quantities.
    let extract_scalars = |j: &GeometryJet| -> Field {
        let n = j.n;
        let mut out = Field::zeros(j.points, 4); // |A|^2, |A^N|^2, |A^2|^2, <A,A>^2
        for p in 0..j.points {
            let a = j.a_onb(p);
            let nv = j.nvec.at(p);
            let av =
                |i: usize, jj: usize| -> &[f64] { &a[(i * n + jj) * amb..(i * n + jj + 1) * amb] };
            let mut a2 = 0.0;
            let mut an2 = 0.0;
            let mut asq2 = 0.0;
            let mut quad = 0.0;
            for i in 0..n {
                for jj in 0..n {
                    let aij = av(i, jj);
                    a2 += aij.iter().map(|x| x * x).sum::<f64>();
                    let an: f64 = aij.iter().zip(nv).map(|(x, y)| x * y).sum();
                    an2 += an * an;
                    let mut sq = 0.0;
                    for k2 in 0..n {
                        sq += av(i, k2).iter().zip(av(k2, jj)).map(|(x, y)| x * y).sum::<f64>();
                    }
                    asq2 += sq * sq;
                    for k2 in 0..n {
                        for l in 0..n {
                            let w: f64 =
                                aij.iter().zip(av(k2, l)).map(|(x, y)| x * y).sum();
                            quad += w * w;
                        }
                    }
                }
            }
            let dst = out.at_mut(p);
            dst[0] = a2;
            dst[1] = an2;
            dst[2] = asq2;
            dst[3] = quad;
        }
        out
    };

    let (lad_s, rich_s) = fd_ladder(grid, v, s_list, extract_scalars)?;
    let (lad_h, rich_h) = fd_ladder(grid, v, s_list, |j| Field {
        ncomp: 1,
        data: j.h_norm.clone(),
    })?;
    let (lad_n, rich_n) = fd_ladder(grid, v, s_list, |j| j.nvec.clone())?;

    let mut entries = Vec::new();
    let names4 = ["d|A|^2", "d|A^N|^2", "d|A^2|^2", "d<A,A>^2"];
    for (c, name) in names4.iter().enumerate() {
        let want: &[f64] = match c {
            0 | 1 => &d_a2,
            2 => &d_a22,
            _ => &d_a2,
        };
        let analytic = Field { ncomp: 1, data: want.to_vec() };
        let ladder: Vec<(f64, Field)> = lad_s
            .iter()
            .map(|(s, f)| {
                (*s, Field { ncomp: 1, data: (0..npts).map(|p| f.at(p)[c]).collect() })
            })
            .collect();
        let rich = Field { ncomp: 1, data: (0..npts).map(|p| rich_s.at(p)[c]).collect() };
        let r = assemble("table", name, analytic, ladder, rich);
        entries.push(TableEntry {
            name,
            fitted_order: r.fitted_order,
            max_discrepancy: r.max_discrepancy,
        });
    }
    let rh = assemble("table", "d|H|", Field { ncomp: 1, data: d_habs.clone() }, lad_h, rich_h);
    entries.push(TableEntry {
        name: "d|H|",
        fitted_order: rh.fitted_order,
        max_discrepancy: rh.max_discrepancy,
    });
    let rn = assemble("table", "dN", d_n.clone(), lad_n, rich_n);
    entries.push(TableEntry {
        name: "dN",
        fitted_order: rn.fitted_order,
        max_discrepancy: rn.max_discrepancy,
    });

    Ok(CylinderVariationTable { entries, d_a2, d_habs, d_n })
}

/// Log-log fit of ||P_{sU}||_{L^1} against s.
#[derive(Debug, Clone, Serialize)]
pub struct TaylorPFit {
    pub slope: f64,
    pub residual: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Onset order of the codimension defect P along a normal direction: P
/// vanishes on the cylinder and P'(0) = 0, so a generic direction gives
/// slope ~2 and a Jacobi direction (vanishing Hessian) slope >= 3.
pub fn taylor_p(grid: &ChartGrid, u: &NormalField, s_list: &[f64]) -> Result<TaylorPFit> {
    let mut samples = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let imm = chart::graph(grid, &u.scaled(s))?;
        let jet = geometry::jet(grid, &imm)?;
        let pf = geometry::compute_p(&jet)?;
        let rule = gaussian::quadrature(grid, &jet.sqrt_det_g, &jet.x, Provenance::Custom)?;
        let mags: Vec<f64> = pf.p.iter().map(|x| x.abs()).collect();
        samples.push((s, rule.integrate_values(&mags)));
    }
    let xs: Vec<f64> = samples.iter().map(|&(s, _)| s).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, v)| v.max(1e-300)).collect();
    let (slope, _, residual) = rates::powerlaw_fit(&xs, &ys)?;
    if residual > 0.05 {
        return Err(Error::Resolution(format!(
            "taylor_p: log-log fit residual {residual:.3} exceeds 0.05 (slope {slope:.3})"
        )));
    }
    Ok(TaylorPFit { slope, residual, samples })
}

/// L^1 norm of P on one immersion (used for the tangential-deformation
/// checks where no fit is wanted).
pub fn p_l1(grid: &ChartGrid, imm: &Immersion) -> Result<f64> {
    let jet = geometry::jet(grid, imm)?;
    let pf = geometry::compute_p(&jet)?;
    let rule = gaussian::quadrature(grid, &jet.sqrt_det_g, &jet.x, Provenance::Custom)?;
    Ok(rule.integrate_values(&pf.p.iter().map(|x| x.abs()).collect::<Vec<_>>()))
}
