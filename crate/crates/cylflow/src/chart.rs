//! Cylinder charts, normal fields, and graph immersions.
//!
//! The reference surface is S^k_{sqrt(2k)} x R^{n-k} in R^N. A chart is a
//! structured parameter grid: spherical angle axes first (periodic for k = 1;
//! an open latitude axis plus a periodic longitude axis for k = 2), then
//! n - k truncated Euclidean axes on [-R_box, R_box]. Nearby surfaces are
//! normal graphs: a scalar component along the radial sphere normal plus one
//! component per flat normal direction z_alpha.

use crate::error::Error;
use crate::numerics::diff::{apply_along_axis, axis_diff, periodic_diff, DiffOp, Field};
use crate::Result;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Periodic angle, spectral differentiation.
    Periodic,
    /// Truncated Euclidean axis, finite differences.
    Bounded,
    /// Open latitude interval (0, pi) sampled at cell midpoints (k = 2).
    Latitude,
}

#[derive(Debug, Clone)]
pub struct AxisSpec {
    pub kind: AxisKind,
    pub m: usize,
    pub h: f64,
    pub coord: Vec<f64>,
}

/// Structured grid over the cylinder together with cached differentiation
/// operators. All fields and immersions in the crate live on such a grid,
/// stored point-major with axis 0 slowest ("theta-major then y").
#[derive(Debug, Clone)]
pub struct ChartGrid {
    pub k: usize,
    pub n: usize,
    /// Ambient dimension N.
    pub amb: usize,
    pub m_theta: usize,
    pub m_y: usize,
    pub r_box: f64,
    /// k >= 2 charts are supported but flagged experimental.
    pub experimental: bool,
    pub axes: Vec<AxisSpec>,
    pub shape: Vec<usize>,
    pub points: usize,
    /// Cylinder positions in R^N.
    pub pos: Field,
    /// Radial sphere normal (unit) in R^N.
    pub normal: Field,
    /// Axis coordinates y per point (n - k components).
    pub y: Field,
    /// |y| per point.
    pub y_abs: Vec<f64>,
    /// |x|^2 per point on the cylinder (= 2k + |y|^2).
    pub x_norm2: Vec<f64>,
    d1: Vec<DiffOp>,
    d2: Vec<DiffOp>,
}

impl ChartGrid {
    /// Number of flat normal directions z_alpha.
    pub fn zdim(&self) -> usize {
        self.amb - self.n - 1
    }

    /// Sphere radius sqrt(2k).
    pub fn sphere_radius(&self) -> f64 {
        (2.0 * self.k as f64).sqrt()
    }

    /// Surface measure of the sphere factor S^k_{sqrt(2k)}.
    pub fn sphere_volume(&self) -> f64 {
        match self.k {
            1 => 2.0 * std::f64::consts::PI * self.sphere_radius(),
            2 => 4.0 * std::f64::consts::PI * self.sphere_radius().powi(2),
            _ => unreachable!(),
        }
    }

    /// Smallest physical grid spacing (arclength for angle axes).
    pub fn h_min(&self) -> f64 {
        let mut h = f64::INFINITY;
        for a in &self.axes {
            let scale = match a.kind {
                AxisKind::Bounded => 1.0,
                AxisKind::Periodic | AxisKind::Latitude => self.sphere_radius(),
            };
            h = h.min(a.h * scale);
        }
        h
    }

    pub fn d1(&self, axis: usize) -> &DiffOp {
        &self.d1[axis]
    }

    pub fn d2(&self, axis: usize) -> &DiffOp {
        &self.d2[axis]
    }

    /// Differentiate a field along a parameter axis (order 1 or 2).
    pub fn diff(&self, field: &Field, axis: usize, order: usize) -> Field {
        let op = if order == 1 { &self.d1[axis] } else { &self.d2[axis] };
        apply_along_axis(&self.shape, field, axis, op)
    }

    pub fn new(
        k: usize,
        n: usize,
        amb: usize,
        m_theta: usize,
        r_box: f64,
        m_y: usize,
    ) -> Result<ChartGrid> {
        if !(k == 1 || k == 2) {
            return Err(Error::Config(format!("k = {k} not supported (k must be 1 or 2)")));
        }
        if n <= k {
            return Err(Error::Config(format!("need n > k, got n = {n}, k = {k}")));
        }
        if amb < n + 1 {
            return Err(Error::Config(format!("need N >= n + 1, got N = {amb}, n = {n}")));
        }
        if m_theta < 16 || m_theta % 2 != 0 {
            return Err(Error::Resolution(format!(
                "m_theta = {m_theta} too coarse: need even m_theta >= 16"
            )));
        }
        if m_y < 17 {
            return Err(Error::Resolution(format!("m_y = {m_y} too coarse: need m_y >= 17")));
        }
        let r_min = (2.0 * n as f64).sqrt() + 2.0;
        if r_box < r_min {
            return Err(Error::Config(format!(
                "R_box = {r_box} below the minimum sqrt(2n) + 2 = {r_min:.3}"
            )));
        }

        let mut axes = Vec::new();
        match k {
            1 => {
                let m = m_theta;
                let h = 2.0 * std::f64::consts::PI / m as f64;
                axes.push(AxisSpec {
                    kind: AxisKind::Periodic,
                    m,
                    h,
                    coord: (0..m).map(|i| i as f64 * h).collect(),
                });
            }
            2 => {
                let mu = m_theta / 2;
                let hu = std::f64::consts::PI / mu as f64;
                axes.push(AxisSpec {
                    kind: AxisKind::Latitude,
                    m: mu,
                    h: hu,
                    coord: (0..mu).map(|i| (i as f64 + 0.5) * hu).collect(),
                });
                let m = m_theta;
                let h = 2.0 * std::f64::consts::PI / m as f64;
                axes.push(AxisSpec {
                    kind: AxisKind::Periodic,
                    m,
                    h,
                    coord: (0..m).map(|i| i as f64 * h).collect(),
                });
            }
            _ => unreachable!(),
        }
        for _ in 0..(n - k) {
            let m = m_y;
            let h = 2.0 * r_box / (m - 1) as f64;
            axes.push(AxisSpec {
                kind: AxisKind::Bounded,
                m,
                h,
                coord: (0..m).map(|i| -r_box + i as f64 * h).collect(),
            });
        }

        let shape: Vec<usize> = axes.iter().map(|a| a.m).collect();
        let points: usize = shape.iter().product();

        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for a in &axes {
            match a.kind {
                AxisKind::Periodic => {
                    d1.push(periodic_diff(a.m, 1, 2.0 * std::f64::consts::PI));
                    d2.push(periodic_diff(a.m, 2, 2.0 * std::f64::consts::PI));
                }
                AxisKind::Bounded | AxisKind::Latitude => {
                    d1.push(axis_diff(a.m, 1, a.h));
                    d2.push(axis_diff(a.m, 2, a.h));
                }
            }
        }

        let mut grid = ChartGrid {
            k,
            n,
            amb,
            m_theta,
            m_y,
            r_box,
            experimental: k >= 2,
            axes,
            shape,
            points,
            pos: Field::zeros(points, amb),
            normal: Field::zeros(points, amb),
            y: Field::zeros(points, n - k),
            y_abs: vec![0.0; points],
            x_norm2: vec![0.0; points],
            d1,
            d2,
        };
        grid.fill_positions();
        Ok(grid)
    }

    /// Multi-index of a flat point index.
    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.shape.len()];
        let mut rem = p;
        for a in (0..self.shape.len()).rev() {
            idx[a] = rem % self.shape[a];
            rem /= self.shape[a];
        }
        idx
    }

    fn fill_positions(&mut self) {
        let r = self.sphere_radius();
        let k = self.k;
        let nk = self.n - k;
        for p in 0..self.points {
            let idx = self.multi_index(p);
            let mut x = vec![0.0; self.amb];
            match k {
                1 => {
                    let th = self.axes[0].coord[idx[0]];
                    x[0] = r * th.cos();
                    x[1] = r * th.sin();
                }
                2 => {
                    let u = self.axes[0].coord[idx[0]];
                    let v = self.axes[1].coord[idx[1]];
                    x[0] = r * u.sin() * v.cos();
                    x[1] = r * u.sin() * v.sin();
                    x[2] = r * u.cos();
                }
                _ => unreachable!(),
            }
            let mut y2 = 0.0;
            for j in 0..nk {
                let yv = self.axes[k + j].coord[idx[k + j]];
                x[k + 1 + j] = yv;
                self.y.data[p * nk + j] = yv;
                y2 += yv * yv;
            }
            self.y_abs[p] = y2.sqrt();
            self.x_norm2[p] = 2.0 * k as f64 + y2;
            for c in 0..self.amb {
                self.pos.data[p * self.amb + c] = x[c];
                self.normal.data[p * self.amb + c] = if c <= k { x[c] / r } else { 0.0 };
            }
        }
    }
}

/// Normal graph data over a chart: component 0 along the radial sphere
/// normal, components 1.. along the flat normal directions z_alpha. A taper
/// profile, once applied, is recorded so re-tapering is a no-op.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub values: Field,
    /// (inner, outer) radii of the applied taper, if any.
    pub taper: Option<(f64, f64)>,
}

impl NormalField {
    pub fn zeros(grid: &ChartGrid) -> Self {
        NormalField { values: Field::zeros(grid.points, 1 + grid.zdim()), taper: None }
    }

    pub fn ncomp(&self) -> usize {
        self.values.ncomp
    }

    /// Build from a closure giving components at each grid point.
    pub fn from_fn<F: Fn(usize) -> Vec<f64>>(grid: &ChartGrid, f: F) -> Self {
        let ncomp = 1 + grid.zdim();
        let mut v = Field::zeros(grid.points, ncomp);
        for p in 0..grid.points {
            let vals = f(p);
            assert_eq!(vals.len(), ncomp);
            v.at_mut(p).copy_from_slice(&vals);
        }
        NormalField { values: v, taper: None }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.max_pointwise_norm()
    }

    /// Normalize to unit sup norm (no-op on the zero field).
    pub fn normalized(&self) -> NormalField {
        let s = self.sup_norm();
        if s == 0.0 {
            return self.clone();
        }
        NormalField { values: self.values.scaled(1.0 / s), taper: self.taper }
    }

    pub fn scaled(&self, s: f64) -> NormalField {
        NormalField { values: self.values.scaled(s), taper: self.taper }
    }
}

/// Quintic smoothstep on [0, 1]: 6t^5 - 15t^4 + 10t^3.
fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Taper weight at axial radius `r`: 1 inside `inner`, 0 outside `outer`,
/// quintic blend between (value 1/2 at the midpoint).
pub fn taper_weight(r: f64, inner: f64, outer: f64) -> f64 {
    1.0 - smoothstep5((r - inner) / (outer - inner))
}

/// Multiply a normal field by the radial taper profile, making it compactly
/// supported in |y| < outer. Applying the same taper twice is the identity
/// (the profile is recorded on the field), so taper is a projection.
pub fn taper(grid: &ChartGrid, u: &NormalField, inner: f64, outer: f64) -> Result<NormalField> {
    if !(0.0 < inner && inner < outer && outer <= grid.r_box) {
        return Err(Error::Config(format!(
            "taper radii must satisfy 0 < inner < outer <= R_box, got ({inner}, {outer})"
        )));
    }
    if u.taper == Some((inner, outer)) {
        return Ok(u.clone());
    }
    let mut out = u.clone();
    for p in 0..grid.points {
        let w = taper_weight(grid.y_abs[p], inner, outer);
        for v in out.values.at_mut(p) {
            *v *= w;
        }
    }
    out.taper = Some((inner, outer));
    Ok(out)
}

/// How an immersion was produced; drives tail accounting in the Gaussian
/// quadrature (surfaces known to coincide with the cylinder beyond the taper
/// radius get their axial tails completed analytically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Cylinder,
    /// Graph of a tapered field; beyond `outer` it is exactly the cylinder.
    TaperedGraph { outer: f64 },
    /// Graph of an untapered field; tails are only bounded, not completed.
    Graph,
    /// Anything else (rotated, dilated, reparametrized test surfaces).
    Custom,
}

/// A discrete immersion: ambient positions per grid point.
#[derive(Debug, Clone)]
pub struct Immersion {
    pub x: Field,
    pub provenance: Provenance,
}

/// The exact model cylinder as an immersion on the chart grid.
pub fn build_cylinder(grid: &ChartGrid) -> Immersion {
    Immersion { x: grid.pos.clone(), provenance: Provenance::Cylinder }
}

/// Graph of a normal field over the cylinder:
///   X = x_cyl + u * N_cyl + sum_alpha u^alpha e_{z_alpha}.
///
/// Rejects graphs leaving the tube radius sqrt(2k)/2 (the surface would
/// touch the cylinder axis before that and the chart degenerates).
pub fn graph(grid: &ChartGrid, u: &NormalField) -> Result<Immersion> {
    let sup = u.sup_norm();
    let tube = grid.sphere_radius() / 2.0;
    if sup >= tube {
        return Err(Error::Geometry(format!(
            "graph amplitude {sup:.4} exceeds the tube radius {tube:.4}"
        )));
    }
    let amb = grid.amb;
    let zdim = grid.zdim();
    let zstart = grid.n + 1;
    let mut x = grid.pos.clone();
    for p in 0..grid.points {
        let vals = u.values.at(p);
        let nrm = grid.normal.at(p);
        let xp = x.at_mut(p);
        for c in 0..amb {
            xp[c] += vals[0] * nrm[c];
        }
        for a in 0..zdim {
            xp[zstart + a] += vals[1 + a];
        }
    }
    let provenance = match u.taper {
        Some((_, outer)) => Provenance::TaperedGraph { outer },
        None => Provenance::Graph,
    };
    Ok(Immersion { x, provenance })
}

/// Reparametrized cylinder (k = 1): the same point set as the model cylinder,
/// sampled at (theta + s*a, y + s*b). Purely tangential deformations of this
/// kind must leave every extrinsic invariant of the surface unchanged.
pub fn reparametrized_cylinder(
    grid: &ChartGrid,
    a: &Field,
    b: &Field,
    s: f64,
) -> Result<Immersion> {
    if grid.k != 1 {
        return Err(Error::Config("reparametrized_cylinder requires k = 1".into()));
    }
    let nk = grid.n - grid.k;
    assert_eq!(a.ncomp, 1);
    assert_eq!(b.ncomp, nk);
    let r = grid.sphere_radius();
    let mut x = Field::zeros(grid.points, grid.amb);
    for p in 0..grid.points {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]] + s * a.data[p];
        let xp = x.at_mut(p);
        xp[0] = r * th.cos();
        xp[1] = r * th.sin();
        for j in 0..nk {
            let y = grid.axes[1 + j].coord[idx[1 + j]] + s * b.data[p * nk + j];
            if y.abs() > grid.r_box {
                return Err(Error::Geometry(
                    "reparametrization pushes points outside the chart box".into(),
                ));
            }
            xp[2 + j] = y;
        }
    }
    Ok(Immersion { x, provenance: Provenance::Custom })
}

/// Apply an ambient orthogonal map to an immersion (frame-invariance tests).
pub fn rotate_immersion(imm: &Immersion, q: &[f64], amb: usize) -> Immersion {
    assert_eq!(q.len(), amb * amb);
    let mut x = Field::zeros(imm.x.points(), amb);
    for p in 0..imm.x.points() {
        let src = imm.x.at(p);
        let dst = x.at_mut(p);
        for i in 0..amb {
            let mut s = 0.0;
            for j in 0..amb {
                s += q[i * amb + j] * src[j];
            }
            dst[i] = s;
        }
    }
    Immersion { x, provenance: Provenance::Custom }
}

/// Write a normal field as CSV: a header row with the chart signature, then
/// one row per grid point (theta-major ordering) with the components.
pub fn write_field_csv<W: Write>(
    w: &mut W,
    grid: &ChartGrid,
    u: &NormalField,
) -> std::io::Result<()> {
    writeln!(w, "k,n,N,m_theta,r_box,m_y,ncomp,taper_inner,taper_outer")?;
    let (ti, to) = match u.taper {
        Some((a, b)) => (format!("{a:.17e}"), format!("{b:.17e}")),
        None => (String::new(), String::new()),
    };
    writeln!(
        w,
        "{},{},{},{},{:.17e},{},{},{},{}",
        grid.k, grid.n, grid.amb, grid.m_theta, grid.r_box, grid.m_y, u.ncomp(), ti, to
    )?;
    for p in 0..grid.points {
        let row: Vec<String> = u.values.at(p).iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a normal field written by [`write_field_csv`], checking that the
/// chart signature matches `grid`.
pub fn read_field_csv<R: BufRead>(r: &mut R, grid: &ChartGrid) -> Result<NormalField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("field csv: missing header".into()))??;
    if header.trim() != "k,n,N,m_theta,r_box,m_y,ncomp,taper_inner,taper_outer" {
        return Err(Error::Config("field csv: unrecognized header".into()));
    }
    let sig = lines
        .next()
        .ok_or_else(|| Error::Config("field csv: missing signature row".into()))??;
    let parts: Vec<&str> = sig.trim().split(',').collect();
    if parts.len() != 9 {
        return Err(Error::Config("field csv: malformed signature row".into()));
    }
    let want = [
        grid.k.to_string(),
        grid.n.to_string(),
        grid.amb.to_string(),
        grid.m_theta.to_string(),
    ];
    for (got, want) in parts[..4].iter().zip(&want) {
        if got != want {
            return Err(Error::Config(format!(
                "field csv: chart signature mismatch ({got} vs {want})"
            )));
        }
    }
    let r_box: f64 = parts[4]
        .parse()
        .map_err(|_| Error::Config("field csv: bad r_box".into()))?;
    if (r_box - grid.r_box).abs() > 1.0e-12 {
        return Err(Error::Config("field csv: r_box mismatch".into()));
    }
    if parts[5] != grid.m_y.to_string() {
        return Err(Error::Config("field csv: m_y mismatch".into()));
    }
    let ncomp: usize = parts[6]
        .parse()
        .map_err(|_| Error::Config("field csv: bad ncomp".into()))?;
    if ncomp != 1 + grid.zdim() {
        return Err(Error::Config("field csv: component count mismatch".into()));
    }
    let taper = if parts[7].is_empty() {
        None
    } else {
        let a: f64 = parts[7]
            .parse()
            .map_err(|_| Error::Config("field csv: bad taper_inner".into()))?;
        let b: f64 = parts[8]
            .parse()
            .map_err(|_| Error::Config("field csv: bad taper_outer".into()))?;
        Some((a, b))
    };
    let mut values = Field::zeros(grid.points, ncomp);
    for p in 0..grid.points {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("field csv: missing row {p}")))??;
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != ncomp {
            return Err(Error::Config(format!("field csv: row {p} has wrong width")));
        }
        for (c, col) in cols.iter().enumerate() {
            values.data[p * ncomp + c] = col
                .parse()
                .map_err(|_| Error::Config(format!("field csv: bad value at row {p}")))?;
        }
    }
    Ok(NormalField { values, taper })
}
