use super::*;
use crate::chart::{build_cylinder, graph, rotate_immersion, ChartGrid, NormalField};
use crate::gaussian::{quadrature, QuadratureRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid214() -> ChartGrid {
    ChartGrid::new(1, 2, 4, 32, 6.0, 81).unwrap()
}

fn theta(grid: &ChartGrid, p: usize) -> f64 {
    grid.pos.at(p)[1].atan2(grid.pos.at(p)[0])
}

/// Mixed-component analytic test graph: a radial profile plus a flat normal
/// component, both Gaussian-decaying along the axis.
fn mixed_field(grid: &ChartGrid, amp: f64) -> NormalField {
    NormalField::from_fn(grid, |p| {
        let th = theta(grid, p);
        let y = grid.y.data[p];
        let e = (-y * y).exp();
        let mut v = vec![amp * th.sin() * e];
        for _ in 0..grid.zdim() {
            v.push(amp * th.cos() * y * (-y * y / 2.0).exp());
        }
        v
    })
}

fn rule_for(grid: &ChartGrid, jet: &GeometryJet) -> QuadratureRule {
    quadrature(grid, &jet.sqrt_det_g, &jet.x, crate::chart::Provenance::Custom).unwrap()
}

fn random_orthogonal(amb: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![0.0; amb * amb];
    for c in 0..amb {
        let mut v: Vec<f64> = (0..amb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for prev in 0..c {
            let d: f64 = (0..amb).map(|i| v[i] * q[prev * amb + i]).sum();
            for i in 0..amb {
                v[i] -= d * q[prev * amb + i];
            }
        }
        let nrm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(nrm > 1e-6);
        for i in 0..amb {
            q[c * amb + i] = v[i] / nrm;
        }
    }
    // Rows are orthonormal; as a matrix acting by x -> Q x this is a
    // general element of O(amb), which is all the invariance tests need.
    q
}

#[test]
fn cylinder_exact_values() {
    let g = grid214();
    let jet = jet(&g, &build_cylinder(&g)).unwrap();
    let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
    for p in 0..g.points {
        assert!((jet.h_norm[p] - inv_sqrt2).abs() < 1e-12);
        assert!((jet.a_norm2(p) - 0.5).abs() < 1e-12);
        assert!(jet.phi.at(p).iter().all(|v| v.abs() < 1e-10));
        // A_thth = -(g_thth / sqrt(2k)) N = -sqrt(2) N in chart coordinates.
        let nrm = g.normal.at(p);
        let a00 = jet.a_vec(p, 0, 0);
        for c in 0..g.amb {
            assert!((a00[c] + 2.0f64.sqrt() * nrm[c]).abs() < 1e-10);
        }
        // H points along the radial normal with |H| = 1/sqrt(2).
        for c in 0..g.amb {
            assert!((jet.h.at(p)[c] - inv_sqrt2 * nrm[c]).abs() < 1e-10);
        }
    }
    let spec = taun_spectrum(&jet).unwrap();
    let tr = taun_trace(&jet);
    for p in 0..g.points {
        assert!(spec.at(p)[0].abs() < 1e-9);
        assert!((spec.at(p)[1] - 1.0).abs() < 1e-9);
        assert!((tr[p] + 1.0).abs() < 1e-8);
    }
}

#[test]
fn projector_invariants_on_graph() {
    let g = grid214();
    let jet = jet(&g, &graph(&g, &mixed_field(&g, 0.05)).unwrap()).unwrap();
    let amb = g.amb;
    for p in (0..g.points).step_by(7) {
        let pi = &jet.pi[p * amb * amb..(p + 1) * amb * amb];
        for c in 0..amb {
            for d in 0..amb {
                // Symmetry.
                assert!((pi[c * amb + d] - pi[d * amb + c]).abs() < 1e-10);
                // Idempotency.
                let mut s = 0.0;
                for e in 0..amb {
                    s += pi[c * amb + e] * pi[e * amb + d];
                }
                assert!((s - pi[c * amb + d]).abs() < 1e-10);
            }
        }
        // Pi annihilates the frame.
        for i in 0..g.n {
            let fi = jet.xi[i].at(p);
            for c in 0..amb {
                let mut s = 0.0;
                for d in 0..amb {
                    s += pi[c * amb + d] * fi[d];
                }
                assert!(s.abs() < 1e-9);
            }
        }
        // Trace identity g^{ij} A_ij = -H holds by construction.
        for c in 0..amb {
            let mut s = 0.0;
            for i in 0..g.n {
                for j in 0..g.n {
                    s += jet.ginv_at(p, i, j) * jet.a_vec(p, i, j)[c];
                }
            }
            assert!((s + jet.h.at(p)[c]).abs() < 1e-10);
        }
    }
}

#[test]
fn p_vanishes_on_cylinder() {
    let g = grid214();
    let jet = jet(&g, &build_cylinder(&g)).unwrap();
    let pf = compute_p(&jet).unwrap();
    for p in 0..g.points {
        assert!(pf.p[p].abs() < 1e-10);
    }
}

#[test]
fn p_vanishes_on_hypersurfaces() {
    // N = n + 1 = 3: no flat normal directions, so every graph stays a
    // hypersurface and P must cancel identically, not just to
    // discretization order.
    let g = ChartGrid::new(1, 2, 3, 32, 6.0, 81).unwrap();
    let u = NormalField::from_fn(&g, |p| {
        let th = theta(&g, p);
        let y = g.y.data[p];
        vec![0.08 * (th.sin() + 0.3 * (2.0 * th).cos()) * (-y * y / 3.0).exp()]
    });
    let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
    let pf = compute_p(&jet).unwrap();
    let worst = pf.p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-8, "max |P| = {worst:.3e}");
}

/// Independent recomputation of P in raw chart indices (metric
/// contractions instead of the orthonormal frame) — a genuinely different
/// code path from compute_p.
fn naive_p(jet: &GeometryJet, p: usize) -> f64 {
    let n = jet.n;
    let gi = |i: usize, j: usize| jet.ginv_at(p, i, j);
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };
    let nv = jet.nvec.at(p);
    let hn = jet.h_norm[p];

    // <A_ij, A_kl> with all indices down.
    let a = |i: usize, j: usize| jet.a_vec(p, i, j);

    let mut a2 = 0.0; // |A|^2
    let mut an2 = 0.0; // |A^N|^2
    let mut asq = 0.0; // |A^2|^2
    let mut t2 = 0.0; // 2 <A_jl, A_ik><A_lk, A_ij> (raised)
    let mut t3 = 0.0; // <A_ij, A_kl>^2 (raised)
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let gik = gi(i, k);
                    let gjl = gi(j, l);
                    a2 += gik * gjl * dot(a(i, j), a(k, l));
                    an2 += gik * gjl * dot(a(i, j), nv) * dot(a(k, l), nv);
                }
            }
        }
    }
    // (A^2)_{ij} = g^{kl} <A_ik, A_lj>; |A^2|^2 = g^{ia}g^{jb}(A^2)_{ij}(A^2)_{ab}.
    let mut asq_dn = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    asq_dn[i * n + j] += gi(k, l) * dot(a(i, k), a(l, j));
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for x in 0..n {
                for y in 0..n {
                    asq += gi(i, x) * gi(j, y) * asq_dn[i * n + j] * asq_dn[x * n + y];
                }
            }
        }
    }
    // Quadruple contractions 2 <A_jl, A_ik><A_lk, A_ij> and
    // <A_ij, A_kl>^2, all eight indices raised pairwise.
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    for ii in 0..n {
                        for jj in 0..n {
                            for kk in 0..n {
                                for ll in 0..n {
                                    let w = gi(i, ii) * gi(j, jj) * gi(k, kk) * gi(l, ll);
                                    t2 += 2.0 * w * dot(a(j, l), a(i, k)) * dot(a(ll, kk), a(ii, jj));
                                    t3 += w * dot(a(i, j), a(k, l)) * dot(a(ii, jj), a(kk, ll));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    // A(x^T, .) terms: b_i = x^T contracted into the first slot.
    let mut axt2 = 0.0;
    let mut anxt2 = 0.0;
    let xt = jet.x_t.at(p);
    // x^T components (x^T)^m = g^{mq} <F_q, x^T>.
    let mut xtc = vec![0.0; n];
    for m in 0..n {
        for q in 0..n {
            xtc[m] += gi(m, q) * dot(jet.xi[q].at(p), xt);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let gij = gi(i, j);
            let mut bi = vec![0.0; jet.amb];
            let mut bj = vec![0.0; jet.amb];
            for m in 0..n {
                for c in 0..jet.amb {
                    bi[c] += xtc[m] * a(m, i)[c];
                    bj[c] += xtc[m] * a(m, j)[c];
                }
            }
            axt2 += gij * dot(&bi, &bj);
            anxt2 += gij * dot(&bi, nv) * dot(&bj, nv);
        }
    }

    a2 * an2 - 2.0 * asq + t2 - t3 + (a2 / (4.0 * hn * hn)) * (anxt2 - axt2)
}

#[test]
fn p_matches_naive_index_loop_oracle() {
    let g = grid214();
    let jet = jet(&g, &graph(&g, &mixed_field(&g, 0.06)).unwrap()).unwrap();
    let pf = compute_p(&jet).unwrap();
    for p in (0..g.points).step_by(11) {
        let want = naive_p(&jet, p);
        assert!(
            (pf.p[p] - want).abs() < 1e-10 * (1.0 + want.abs()),
            "P mismatch at {p}: {} vs {}",
            pf.p[p],
            want
        );
        // Stored terms sum to P.
        let sum: f64 = (0..5).map(|t| pf.terms[t][p]).sum();
        assert!((sum - pf.p[p]).abs() < 1e-12);
    }
}

#[test]
fn frame_invariance_under_ambient_rotation() {
    let g = grid214();
    let imm = graph(&g, &mixed_field(&g, 0.05)).unwrap();
    let q = random_orthogonal(g.amb, 42);
    let rot = rotate_immersion(&imm, &q, g.amb);
    let j0 = jet(&g, &imm).unwrap();
    let j1 = jet(&g, &rot).unwrap();
    let p0 = compute_p(&j0).unwrap();
    let p1 = compute_p(&j1).unwrap();
    let s0 = taun_spectrum(&j0).unwrap();
    let s1 = taun_spectrum(&j1).unwrap();
    for p in 0..g.points {
        assert!((j0.h_norm[p] - j1.h_norm[p]).abs() < 1e-9);
        assert!((j0.a_norm2(p) - j1.a_norm2(p)).abs() < 1e-9);
        assert!((p0.p[p] - p1.p[p]).abs() < 1e-9);
        for i in 0..g.n {
            assert!((s0.at(p)[i] - s1.at(p)[i]).abs() < 1e-9);
        }
    }
}

#[test]
fn tau_spectrum_perturbation_sweep() {
    let g = grid214();
    let mut prev = f64::INFINITY;
    for &amp in &[0.04, 0.02, 0.01] {
        let jet = jet(&g, &graph(&g, &mixed_field(&g, amp)).unwrap()).unwrap();
        let spec = taun_spectrum(&jet).unwrap();
        let mut dev: f64 = 0.0;
        for p in 0..g.points {
            dev = dev.max(spec.at(p)[0].abs()).max((spec.at(p)[1] - 1.0).abs());
        }
        assert!(dev < prev, "deviation must shrink with amplitude");
        assert!(dev < 10.0 * amp, "dev = {dev:.3e} at amplitude {amp}");
        prev = dev;
    }
}

#[test]
fn identities_vanish_on_cylinder() {
    let g = grid214();
    let jet = jet(&g, &build_cylinder(&g)).unwrap();
    let s = simons_residual(&g, &jet).unwrap();
    let gh = gradh_residual(&g, &jet).unwrap();
    let nn = nablan_residual(&g, &jet).unwrap();
    let dt = drift_tau_residual(&g, &jet).unwrap();
    for p in 0..g.points {
        assert!(s.full[p] < 1e-8, "simons full {} at {p}", s.full[p]);
        assert!(s.traced[p] < 1e-8);
        assert!(gh.first[p] < 1e-9);
        assert!(gh.hess[p] < 1e-9);
        assert!(nn.weingarten[p] < 1e-9);
        assert!(nn.expanded[p] < 1e-9);
        assert!(dt[p] < 1e-8);
    }
}

#[test]
fn simons_cubic_terms_cancel_on_hypersurfaces() {
    let g = ChartGrid::new(1, 2, 3, 32, 6.0, 81).unwrap();
    let u = NormalField::from_fn(&g, |p| {
        let th = theta(&g, p);
        let y = g.y.data[p];
        vec![0.05 * th.sin() * (-y * y / 2.0).exp()]
    });
    let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
    let s = simons_residual(&g, &jet).unwrap();
    for p in 0..g.points {
        assert!(s.cubic[p] < 1e-10, "cubic = {:.3e} at {p}", s.cubic[p]);
    }
}

#[test]
fn gradh_exact_on_round_cylinder_family() {
    // Radial graph u = c is another round cylinder (radius sqrt(2) + c);
    // every term in the first-derivative identity is constant, so the
    // residual is pure roundoff.
    let g = grid214();
    let u = NormalField::from_fn(&g, |_| vec![0.1, 0.0]);
    let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
    let gh = gradh_residual(&g, &jet).unwrap();
    for p in 0..g.points {
        assert!(gh.first[p] < 1e-8);
    }
}

#[test]
fn drift_tau_p_term_negligible_in_codimension_one() {
    let g = ChartGrid::new(1, 2, 3, 32, 6.0, 81).unwrap();
    let u = NormalField::from_fn(&g, |p| {
        let th = theta(&g, p);
        let y = g.y.data[p];
        vec![0.05 * th.cos() * (-y * y / 2.0).exp()]
    });
    let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
    let pf = compute_p(&jet).unwrap();
    for p in 0..g.points {
        assert!(pf.p[p].abs() < 1e-10);
    }
}

/// Gaussian-L^2 norms of all identity residuals on the analytic graph
/// u = 0.05 sin(theta) e^{-y^2} must decay at fitted order >= 3.5 in the
/// axis spacing (5-point stencil pipeline is 4th order).
#[test]
fn identity_residuals_refine_at_order() {
    let mut hs = Vec::new();
    let mut r_simons = Vec::new();
    let mut r_traced = Vec::new();
    let mut r_gradh = Vec::new();
    let mut r_hess = Vec::new();
    let mut r_nablan = Vec::new();
    let mut r_drift = Vec::new();
    for &m_y in &[49usize, 97, 193] {
        let g = ChartGrid::new(1, 2, 4, 32, 6.0, m_y).unwrap();
        let u = NormalField::from_fn(&g, |p| {
            let th = theta(&g, p);
            let y = g.y.data[p];
            vec![0.05 * th.sin() * (-y * y).exp(), 0.0]
        });
        let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
        let rule = rule_for(&g, &jet);
        let s = simons_residual(&g, &jet).unwrap();
        let gh = gradh_residual(&g, &jet).unwrap();
        let nn = nablan_residual(&g, &jet).unwrap();
        let dt = drift_tau_residual(&g, &jet).unwrap();
        hs.push(2.0 * g.r_box / (m_y - 1) as f64);
        r_simons.push(rule.l2(&s.full));
        r_traced.push(rule.l2(&s.traced));
        r_gradh.push(rule.l2(&gh.first));
        r_hess.push(rule.l2(&gh.hess));
        r_nablan.push(rule.l2(&nn.expanded));
        r_drift.push(rule.l2(&dt));
    }
    for (name, r) in [
        ("simons", &r_simons),
        ("simons_traced", &r_traced),
        ("gradh", &r_gradh),
        ("gradh_hess", &r_hess),
        ("nablan", &r_nablan),
        ("drift_tau", &r_drift),
    ] {
        let (slope, _, _) = crate::rates::powerlaw_fit(&hs, r).unwrap();
        assert!(slope >= 3.5, "{name}: fitted order {slope:.2}, residuals {r:?}");
    }
}

#[test]
fn nablan_internal_cross_check() {
    let g = grid214();
    // Axis-dependent graph: N varies along y as well as theta.
    let u = NormalField::from_fn(&g, |p| {
        let th = theta(&g, p);
        let y = g.y.data[p];
        vec![0.04 * y * th.sin() * (-y * y / 4.0).exp(), 0.02 * th.cos() * (-y * y / 4.0).exp()]
    });
    let jet = jet(&g, &graph(&g, &u).unwrap()).unwrap();
    let nn = nablan_residual(&g, &jet).unwrap();
    let rule = rule_for(&g, &jet);
    // The two equalities must agree with each other at least as well as
    // each holds individually (they share the middle expression).
    let wein = rule.l2(&nn.weingarten);
    let expa = rule.l2(&nn.expanded);
    assert!(wein < 1e-4, "weingarten residual {wein:.3e}");
    assert!(expa < 1e-4, "expanded residual {expa:.3e}");
}

fn psi_profile(g: &ChartGrid) -> Vec<f64> {
    (0..g.points)
        .map(|p| crate::chart::taper_weight(g.y_abs[p], g.r_box - 2.5, g.r_box - 0.5))
        .collect()
}

#[test]
fn kappa_trivial_on_cylinder() {
    let g = grid214();
    let jet = jet(&g, &build_cylinder(&g)).unwrap();
    let rule = rule_for(&g, &jet);
    let rep = kappa_audit(&g, &jet, &psi_profile(&g), &rule).unwrap();
    assert!(rep.lhs.abs() < 1e-10, "lhs = {:.3e}", rep.lhs);
    assert_eq!(rep.c_min, 0.0);
}

#[test]
fn kappa_rejects_boundary_support() {
    let g = grid214();
    let jet = jet(&g, &build_cylinder(&g)).unwrap();
    let rule = rule_for(&g, &jet);
    let psi = vec![1.0; g.points];
    match kappa_audit(&g, &jet, &psi, &rule) {
        Err(Error::Config(_)) => {}
        other => panic!("expected configuration error, got {other:?}"),
    }
}

#[test]
fn kappa_constant_bounded_in_amplitude_sweep() {
    let g = grid214();
    let psi = psi_profile(&g);
    let mut cs = Vec::new();
    for &amp in &[0.04, 0.02, 0.01] {
        let jet = jet(&g, &graph(&g, &mixed_field(&g, amp)).unwrap()).unwrap();
        let rule = rule_for(&g, &jet);
        let rep = kappa_audit(&g, &jet, &psi, &rule).unwrap();
        assert!(rep.c_min.is_finite());
        cs.push(rep.c_min);
    }
    let cmax = cs.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(cmax < 1e3, "implied constants {cs:?}");
}
