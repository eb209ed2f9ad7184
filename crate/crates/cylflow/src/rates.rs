//! Gaussian tail integrals and discrete rate extraction.
//!
//! The tail side: with gamma_q(R) = int_R^inf r^q e^{-r^2/4} dr, integration
//! by parts gives the recursion
//!
//!   gamma_{p+1}(R) = 2 R^p e^{-R^2/4} + 2 p gamma_{p-1}(R),
//!
//! seeded by gamma_1(R) = 2 e^{-R^2/4} exactly and gamma_0(R) by numerical
//! quadrature. Bounds of the form gamma_q(R) <= c_q R^{q-1} e^{-R^2/4}
//! (R >= 1) propagate through the same recursion with c_{p+1} = 2 + 2p
//! c_{p-1}, c_0 = c_1 = 2, giving the closed-form bound
//! c_{m,k} R^{m+k-2} e^{-R^2/4} for the mass of |x|^k e^{-|x|^2/4} outside
//! the ball of radius R in R^m.
//!
//! The rate side: from an energy trace F_j the window drops
//! delta_j = sqrt(F_{j-1} - F_{j+2}) are summed in powers beta; the partial
//! sums converge iff the fitted decay exponent of delta_j^beta exceeds 1.

use crate::error::Error;
use crate::numerics::integrate_gl;
use crate::Result;

/// gamma_q(R) = int_R^inf r^q e^{-r^2/4} dr, by the two-term recursion from
/// the exact odd seed and a quadrature even seed.
pub fn gamma_q(q: usize, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Config("gamma_q: need r > 0".into()));
    }
    let e = (-r * r / 4.0).exp();
    // Walk the recursion up from the seed q in {0, 1} to the requested q.
    let mut p = q % 2;
    let mut val = if p == 1 { 2.0 * e } else { gamma_q_quadrature(0, r) };
    while p + 2 <= q {
        // gamma_{p+2} = 2 r^{p+1} e^{-r^2/4} + 2 (p+1) gamma_p.
        val = 2.0 * r.powi((p + 1) as i32) * e + 2.0 * (p + 1) as f64 * val;
        p += 2;
    }
    Ok(val)
}

/// gamma_q(R) by composite Gauss-Legendre quadrature (machine precision for
/// the q, R range of interest; the integrand is negligible past R + 40).
pub fn gamma_q_quadrature(q: usize, r: f64) -> f64 {
    let hi = r + 40.0;
    let cells = (hi - r).ceil() as usize * 2;
    integrate_gl(|x| x.powi(q as i32) * (-x * x / 4.0).exp(), r, hi, cells)
}

/// Coefficient c_q of the tail bound gamma_q(R) <= c_q R^{q-1} e^{-R^2/4}
/// for R >= 1.
pub fn gamma_bound_coeff(q: usize) -> f64 {
    // c_0 = c_1 = 2; c_{p+2} = 2 + 2 (p + 1) c_p along each parity chain.
    let mut p = q % 2;
    let mut val = 2.0;
    while p + 2 <= q {
        val = 2.0 + 2.0 * (p + 1) as f64 * val;
        p += 2;
    }
    val
}

/// Closed-form bound on gamma_q(R) for R >= 1.
pub fn gamma_bound(q: usize, r: f64) -> Result<f64> {
    if r < 1.0 {
        return Err(Error::Config("gamma_bound: valid for r >= 1 only".into()));
    }
    Ok(gamma_bound_coeff(q) * r.powi(q as i32 - 1) * (-r * r / 4.0).exp())
}

/// Surface measure of the unit sphere S^{m-1} (the two-point set for m = 1).
pub fn unit_sphere_area(m: usize) -> f64 {
    assert!(m >= 1);
    // 2 pi^{m/2} / Gamma(m/2), with half-integer Gamma by recursion.
    let pi = std::f64::consts::PI;
    let gamma_half = |twice: usize| -> f64 {
        // Gamma(twice / 2).
        if twice % 2 == 0 {
            let mut v = 1.0;
            for i in 1..(twice / 2) {
                v *= i as f64;
            }
            v
        } else {
            let mut v = pi.sqrt();
            let mut x = 0.5;
            while (2.0 * x) as usize + 1 < twice {
                v *= x;
                x += 1.0;
            }
            v
        }
    };
    2.0 * pi.powf(m as f64 / 2.0) / gamma_half(m)
}

/// Tail of the moment integral over the complement of a ball:
/// `value` is int_{R^m \ B_r} |x|^k e^{-|x|^2/4} dx = omega_{m-1}
/// gamma_{k+m-1}(r) by the recursion; `bound` is the closed form
/// c_{m,k} r^{m+k-2} e^{-r^2/4}; `quadrature` recomputes the value
/// independently.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailResult {
    pub m: usize,
    pub k: usize,
    pub r: f64,
    pub value: f64,
    pub bound: f64,
    pub quadrature: f64,
}

pub fn gaussian_tail(m: usize, k: usize, r: f64) -> Result<TailResult> {
    if m < 1 {
        return Err(Error::Config("gaussian_tail: need m >= 1".into()));
    }
    let omega = unit_sphere_area(m);
    let q = k + m - 1;
    let value = omega * gamma_q(q, r)?;
    let bound = omega * gamma_bound(q, r.max(1.0))?;
    let quadrature = omega * gamma_q_quadrature(q, r);
    Ok(TailResult { m, k, r, value, bound, quadrature })
}

/// A synthetic or measured energy trace with its window drops.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SequenceRecord {
    pub f: Vec<f64>,
    pub f_inf: f64,
    /// delta_j = sqrt(F_{j-1} - F_{j+2}), one entry per admissible window
    /// (index 0 corresponds to j = 1 in 0-based trace indexing).
    pub delta: Vec<f64>,
}

/// Window drops of an energy trace. Requires monotone nonincreasing input
/// up to the stated slack.
pub fn window_deltas(f: &[f64]) -> Result<Vec<f64>> {
    if f.len() < 4 {
        return Err(Error::Config("window_deltas: need at least 4 samples".into()));
    }
    let mut d = Vec::with_capacity(f.len() - 3);
    for j in 1..f.len() - 2 {
        let drop = f[j - 1] - f[j + 2];
        if drop < -1.0e-12 {
            return Err(Error::Gate(format!(
                "window_deltas: trace increases across window {j} (drop = {drop:.3e})"
            )));
        }
        d.push(drop.max(0.0).sqrt());
    }
    Ok(d)
}

/// Synthetic power-law trace F_j = f_inf + c (j + 1)^{-1/alpha}, j = 0.., the
/// model profile of a flow obeying a Lojasiewicz inequality with exponent
/// alpha.
pub fn synth_sequence(alpha: f64, c: f64, f_inf: f64, j_max: usize) -> Result<SequenceRecord> {
    if !(alpha > 0.0 && c > 0.0 && j_max >= 8) {
        return Err(Error::Config("synth_sequence: need alpha, c > 0, j_max >= 8".into()));
    }
    let f: Vec<f64> = (0..j_max)
        .map(|j| f_inf + c * ((j + 1) as f64).powf(-1.0 / alpha))
        .collect();
    let delta = window_deltas(&f)?;
    Ok(SequenceRecord { f, f_inf, delta })
}

/// Least-squares line fit of log y against log x over the given samples.
/// Returns (slope, intercept, rms residual in log space). Non-positive
/// samples are rejected.
pub fn powerlaw_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Config("powerlaw_fit: need >= 2 paired samples".into()));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::Config("powerlaw_fit: samples must be positive".into()));
        }
        lx.push(x.ln());
        ly.push(y.ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..lx.len() {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if sxx == 0.0 {
        return Err(Error::Config("powerlaw_fit: degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for i in 0..lx.len() {
        let r = ly[i] - (intercept + slope * lx[i]);
        ss += r * r;
    }
    Ok((slope, intercept, (ss / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SummabilityVerdict {
    Summable,
    NotEstablished,
    Inconclusive,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SummabilityReport {
    pub beta: f64,
    /// Fitted decay exponent sigma of delta_j^beta ~ j^{-sigma}.
    pub sigma: f64,
    /// RMS log-space fit residual; above 0.05 the verdict is Inconclusive.
    pub residual: f64,
    pub verdict: SummabilityVerdict,
    pub partial_sum: f64,
}

/// Decide summability of sum_j delta_j^beta by fitting the decay exponent of
/// the partial-sum increments on the tail half of the data.
pub fn summability_check(delta: &[f64], beta: f64) -> Result<SummabilityReport> {
    if delta.len() < 16 {
        return Err(Error::Config("summability_check: need >= 16 deltas".into()));
    }
    let lo = delta.len() / 2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut partial = 0.0;
    for (i, &d) in delta.iter().enumerate() {
        let inc = d.powf(beta);
        partial += inc;
        if i >= lo && d > 0.0 {
            xs.push((i + 1) as f64);
            ys.push(inc);
        }
    }
    if xs.len() < 8 {
        return Err(Error::Config("summability_check: too few positive tail deltas".into()));
    }
    let (slope, _, residual) = powerlaw_fit(&xs, &ys)?;
    let sigma = -slope;
    let verdict = if residual > 0.05 {
        SummabilityVerdict::Inconclusive
    } else if sigma > 1.0 {
        SummabilityVerdict::Summable
    } else {
        SummabilityVerdict::NotEstablished
    };
    Ok(SummabilityReport { beta, sigma, residual, verdict, partial_sum: partial })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RateReport {
    /// Fitted polynomial rate rho in tail_j = sum_{i >= j} delta_i^2 ~ j^{-rho}.
    pub rho: f64,
    pub residual: f64,
    /// Set when the decay is faster than any polynomial (geometric traces).
    pub superpolynomial: bool,
}

/// Extract the convergence rate from the tail sums of delta_j^2. Geometric
/// decay is detected by a consistent ratio test and flagged instead of
/// force-fitted.
pub fn rate_extraction(delta: &[f64]) -> Result<RateReport> {
    if delta.len() < 32 {
        return Err(Error::Config("rate_extraction: need >= 32 deltas".into()));
    }
    // Ratio test on the second half.
    let lo = delta.len() / 2;
    let mut ratios = Vec::new();
    for i in lo..delta.len() - 1 {
        if delta[i] > 0.0 && delta[i + 1] > 0.0 {
            ratios.push(delta[i + 1] / delta[i]);
        }
    }
    if ratios.len() >= 8 {
        let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
        if max_ratio < 0.9 {
            return Ok(RateReport { rho: f64::INFINITY, residual: 0.0, superpolynomial: true });
        }
    }
    // Tail sums over the first half (so truncation error of the finite trace
    // stays subdominant), fitted as a power law.
    let mut tail = vec![0.0; delta.len() + 1];
    for i in (0..delta.len()).rev() {
        tail[i] = tail[i + 1] + delta[i] * delta[i];
    }
    let hi = delta.len() / 4;
    let lo = (delta.len() / 32).max(4);
    if hi <= lo + 4 {
        return Err(Error::Config("rate_extraction: trace too short for the fit window".into()));
    }
    let xs: Vec<f64> = (lo..hi).map(|j| (j + 1) as f64).collect();
    let ys: Vec<f64> = (lo..hi).map(|j| tail[j]).collect();
    let (slope, _, residual) = powerlaw_fit(&xs, &ys)?;
    Ok(RateReport { rho: -slope, residual, superpolynomial: false })
}

/// Finite summation by parts:
/// sum_{j=k}^{N} b_j (a_j - a_{j+1})
///   = b_k a_k - b_N a_{N+1} + sum_{j=k}^{N-1} a_{j+1} (b_{j+1} - b_j).
/// Returns (lhs, rhs); they agree to rounding for any sequences.
pub fn summation_by_parts(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(b.len() >= 2 && a.len() >= b.len() + 1);
    let n = b.len() - 1;
    let mut lhs = 0.0;
    for j in 0..=n {
        lhs += b[j] * (a[j] - a[j + 1]);
    }
    let mut rhs = b[0] * a[0] - b[n] * a[n + 1];
    for j in 0..n {
        rhs += a[j + 1] * (b[j + 1] - b[j]);
    }
    (lhs, rhs)
}

/// Hoelder split used by the summability lemma: for 0 < beta < 2 and a > 0,
/// sum delta_j^beta <= (sum delta_j^2 j^{2a/beta})^{beta/2}
///                     (sum j^{-2a/(2-beta)})^{(2-beta)/2}.
/// Returns (lhs, rhs).
pub fn hoelder_split(delta: &[f64], beta: f64, a: f64) -> (f64, f64) {
    assert!(beta > 0.0 && beta < 2.0 && a > 0.0);
    let mut lhs = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (i, &d) in delta.iter().enumerate() {
        let j = (i + 1) as f64;
        lhs += d.powf(beta);
        s1 += d * d * j.powf(2.0 * a / beta);
        s2 += j.powf(-2.0 * a / (2.0 - beta));
    }
    (lhs, s1.powf(beta / 2.0) * s2.powf((2.0 - beta) / 2.0))
}
