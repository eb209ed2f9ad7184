//! The codimension defect scalar P.
//!
//! With all sums over an orthonormal tangent frame,
//!
//!   P = |A|^2 |A^N|^2 - 2 |A^2|^2
//!       + sum_{ijkl} ( 2 <A_jl, A_ik> <A_lk, A_ij> - <A_ij, A_kl>^2 )
//!       + (|A|^2 / 4|H|^2) ( |A^N(x^T, .)|^2 - |A(x^T, .)|^2 ),
//!
//! where A^N = <A, N>, (A^2)_ij = <A_ik, A_kj>, and A(x^T, .) contracts the
//! first slot with the tangential position. P vanishes identically in
//! codimension one and vanishes to second order at the round cylinder.

use crate::error::Error;
use crate::geometry::GeometryJet;
use crate::Result;

/// Pointwise P together with its five assembled terms (same order as the
/// defining sum above).
pub struct PField {
    pub p: Vec<f64>,
    pub terms: [Vec<f64>; 5],
}

pub fn compute_p(jet: &GeometryJet) -> Result<PField> {
    let n = jet.n;
    let amb = jet.amb;
    let npts = jet.points;
    let mut out = PField {
        p: vec![0.0; npts],
        terms: [
            vec![0.0; npts],
            vec![0.0; npts],
            vec![0.0; npts],
            vec![0.0; npts],
            vec![0.0; npts],
        ],
    };

    for pt in 0..npts {
        if !jet.tau_ok[pt] {
            return Err(Error::Geometry(format!(
                "compute_p: |H| degenerate at point {pt}"
            )));
        }
        let a = jet.a_onb(pt); // n*n x amb
        let nv = jet.nvec.at(pt);
        let xt = jet.xt_onb(pt);
        let av = |i: usize, j: usize| -> &[f64] { &a[(i * n + j) * amb..(i * n + j + 1) * amb] };
        let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(x, y)| x * y).sum() };

        // |A|^2 and A^N.
        let mut a2 = 0.0;
        let mut an = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a2 += dot(av(i, j), av(i, j));
                an[i * n + j] = dot(av(i, j), nv);
            }
        }
        let an2: f64 = an.iter().map(|v| v * v).sum();

        // (A^2)_ij = <A_ik, A_kj>.
        let mut asq = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += dot(av(i, k), av(k, j));
                }
                asq[i * n + j] = s;
            }
        }
        let asq2: f64 = asq.iter().map(|v| v * v).sum();

        // Quartic frame sums.
        let mut cross = 0.0; // 2 <A_jl, A_ik> <A_lk, A_ij>
        let mut square = 0.0; // <A_ij, A_kl>^2
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        cross += 2.0 * dot(av(j, l), av(i, k)) * dot(av(l, k), av(i, j));
                        let v = dot(av(i, j), av(k, l));
                        square += v * v;
                    }
                }
            }
        }

        // Position-contracted slots.
        let mut axt2 = 0.0; // |A(x^T, .)|^2
        let mut anxt2 = 0.0; // |A^N(x^T, .)|^2
        for j in 0..n {
            let mut vecj = vec![0.0; amb];
            let mut anj = 0.0;
            for i in 0..n {
                let aij = av(i, j);
                for c in 0..amb {
                    vecj[c] += xt[i] * aij[c];
                }
                anj += xt[i] * an[i * n + j];
            }
            axt2 += dot(&vecj, &vecj);
            anxt2 += anj * anj;
        }

        let h2 = jet.h_norm[pt] * jet.h_norm[pt];
        let t0 = a2 * an2;
        let t1 = -2.0 * asq2;
        let t2 = cross;
        let t3 = -square;
        let t4 = a2 / (4.0 * h2) * (anxt2 - axt2);
        out.terms[0][pt] = t0;
        out.terms[1][pt] = t1;
        out.terms[2][pt] = t2;
        out.terms[3][pt] = t3;
        out.terms[4][pt] = t4;
        out.p[pt] = t0 + t1 + t2 + t3 + t4;
    }
    Ok(out)
}
