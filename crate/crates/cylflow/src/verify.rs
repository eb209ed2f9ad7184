//! The verification suite behind `cylflow verify`: every structural identity
//! the crate implements, evaluated on concrete surfaces with explicit gates,
//! emitted as one record per check. Exit status is "all gates pass".

use serde::Serialize;

use crate::chart::{graph, ChartGrid, NormalField, Provenance};
use crate::config::ExperimentConfig;
use crate::error::Error;
use crate::gaussian::{self, quadrature, QuadratureRule};
use crate::geometry::{
    self, compute_p, drift_tau_residual, gradh_residual, nablan_residual, simons_residual,
    taun_spectrum, GeometryJet,
};
use crate::rates;
use crate::spectral;
use crate::variation;
use crate::Result;

/// One verification check: what was measured, on which resolution, how
/// large the residual is, and whether it clears its gate.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualRecord {
    pub name: String,
    pub m_theta: usize,
    pub m_y: usize,
    pub residual_l2: f64,
    pub residual_max: f64,
    /// Fitted refinement/onset order where the check is a ladder fit.
    pub fitted_order: Option<f64>,
    /// Human-readable gate the record was judged against.
    pub gate: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub entries: Vec<ResidualRecord>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failing(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.pass).map(|e| e.name.as_str()).collect()
    }
}

fn graph_rule(grid: &ChartGrid, jet: &GeometryJet) -> Result<QuadratureRule> {
    quadrature(grid, &jet.sqrt_det_g, &jet.x, Provenance::Custom)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Suite {
    entries: Vec<ResidualRecord>,
}

impl Suite {
    fn push_value(&mut self, name: &str, grid: &ChartGrid, value: f64, tol: f64) {
        self.entries.push(ResidualRecord {
            name: name.to_string(),
            m_theta: grid.m_theta,
            m_y: grid.m_y,
            residual_l2: value,
            residual_max: value,
            fitted_order: None,
            gate: format!("residual <= {tol:.1e}"),
            pass: value <= tol,
        });
    }

    fn push_order(
        &mut self,
        name: &str,
        grid: &ChartGrid,
        l2: f64,
        max: f64,
        order: f64,
        min_order: f64,
    ) {
        self.entries.push(ResidualRecord {
            name: name.to_string(),
            m_theta: grid.m_theta,
            m_y: grid.m_y,
            residual_l2: l2,
            residual_max: max,
            fitted_order: Some(order),
            gate: format!("fitted order >= {min_order}"),
            pass: order >= min_order,
        });
    }
}

/// The graph the refinement ladder runs on.
fn ladder_field(grid: &ChartGrid) -> NormalField {
    NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut v = vec![0.0; 1 + grid.zdim()];
        v[0] = 0.05 * th.sin() * (-y * y).exp();
        v
    })
}

/// Cylinder exact values, codimension defect, and the Gaussian area with
/// its tail accounting, all on the configured grid.
fn cylinder_checks(suite: &mut Suite, grid: &ChartGrid) -> Result<()> {
    let imm = crate::chart::build_cylinder(grid);
    let jet = geometry::jet(grid, &imm)?;
    let h_exact = ((grid.k as f64) / 2.0).sqrt();
    let mut dev_h: f64 = 0.0;
    let mut dev_a2: f64 = 0.0;
    for p in 0..grid.points {
        dev_h = dev_h.max((jet.h_norm[p] - h_exact).abs());
        // |A|^2 = k * (1/sqrt(2k))^2 = 1/2 on the model cylinder.
        dev_a2 = dev_a2.max((jet.a_norm2(p) - 0.5).abs());
    }
    suite.push_value("cylinder_mean_curvature", grid, dev_h, 1.0e-8);
    suite.push_value("cylinder_second_fundamental_form", grid, dev_a2, 1.0e-8);
    suite.push_value("cylinder_shrinker_equation", grid, jet.phi.max_pointwise_norm(), 1.0e-8);
    let pf = compute_p(&jet)?;
    suite.push_value("cylinder_codimension_defect", grid, max_abs(&pf.p), 1.0e-8);
    let spec = taun_spectrum(&jet)?;
    let mut dev_spec: f64 = 0.0;
    for p in 0..grid.points {
        let sp = spec.at(p);
        dev_spec = dev_spec.max(sp[0].abs());
        dev_spec = dev_spec.max((sp[grid.n - 1] - 1.0 / grid.k as f64).abs());
    }
    suite.push_value("cylinder_tau_spectrum", grid, dev_spec, 1.0e-8);

    let rule = quadrature(grid, &jet.sqrt_det_g, &jet.x, Provenance::Cylinder)?;
    let f = gaussian::f_value(&rule);
    let closed = gaussian::f_cylinder_closed_form(grid);
    let gap = (f.value - closed).abs();
    suite.entries.push(ResidualRecord {
        name: "gaussian_area_closed_form".to_string(),
        m_theta: grid.m_theta,
        m_y: grid.m_y,
        residual_l2: gap,
        residual_max: f.error_bound,
        fitted_order: None,
        gate: "gap <= error bound and error bound <= 1e-6".to_string(),
        pass: gap <= f.error_bound && f.error_bound <= 1.0e-6,
    });
    Ok(())
}

/// Residual refinement of the four curvature identities over an axis ladder.
fn identity_ladder(suite: &mut Suite, m_theta: usize, r_box: f64) -> Result<()> {
    let ladder = [49usize, 97, 193];
    let mut hs = Vec::new();
    let mut res: Vec<Vec<f64>> = vec![Vec::new(); 6];
    let mut finest: Vec<(f64, f64)> = vec![(0.0, 0.0); 6];
    let mut finest_grid: Option<ChartGrid> = None;
    for &m_y in &ladder {
        let g = ChartGrid::new(1, 2, 4, m_theta, r_box, m_y)?;
        let u = ladder_field(&g);
        let jet = geometry::jet(&g, &graph(&g, &u)?)?;
        let rule = graph_rule(&g, &jet)?;
        let s = simons_residual(&g, &jet)?;
        let gh = gradh_residual(&g, &jet)?;
        let nn = nablan_residual(&g, &jet)?;
        let dt = drift_tau_residual(&g, &jet)?;
        hs.push(2.0 * g.r_box / (m_y - 1) as f64);
        for (slot, vals) in [&s.full, &s.traced, &gh.first, &gh.hess, &nn.expanded, &dt]
            .iter()
            .enumerate()
        {
            res[slot].push(rule.l2(vals));
            finest[slot] = (rule.l2(vals), max_abs(vals));
        }
        finest_grid = Some(g);
    }
    let g = finest_grid.unwrap();
    let names = [
        "simons_identity",
        "simons_identity_traced",
        "gradient_h_identity",
        "gradient_h_hessian_identity",
        "normal_direction_gradient_identity",
        "drift_tau_identity",
    ];
    for (slot, name) in names.iter().enumerate() {
        let (slope, _, _) = rates::powerlaw_fit(&hs, &res[slot])?;
        suite.push_order(name, &g, finest[slot].0, finest[slot].1, slope, 3.5);
    }
    Ok(())
}

/// The codimension defect vanishes identically for hypersurfaces: three
/// distinct graphs in ambient dimension n + 1.
fn p_codim1_check(suite: &mut Suite, cfg_grid: &ChartGrid) -> Result<()> {
    let g = ChartGrid::new(
        cfg_grid.k,
        cfg_grid.n,
        cfg_grid.n + 1,
        cfg_grid.m_theta.min(32),
        cfg_grid.r_box,
        cfg_grid.m_y.min(81),
    )?;
    let shapes: [Box<dyn Fn(f64, f64) -> f64>; 3] = [
        Box::new(|th: f64, y: f64| 0.05 * th.sin() * (-y * y).exp()),
        Box::new(|th: f64, y: f64| 0.04 * (2.0 * th).cos() * y * (-y * y / 2.0).exp()),
        Box::new(|th: f64, y: f64| 0.03 * (th.sin() + (3.0 * th).cos()) * (-y * y / 4.0).exp()),
    ];
    let mut worst: f64 = 0.0;
    for shape in &shapes {
        let u = NormalField::from_fn(&g, |p| {
            let idx = g.multi_index(p);
            vec![shape(g.axes[0].coord[idx[0]], g.axes[1].coord[idx[1]])]
        });
        let jet = geometry::jet(&g, &graph(&g, &u)?)?;
        let pf = compute_p(&jet)?;
        worst = worst.max(max_abs(&pf.p));
    }
    suite.push_value("codimension_one_defect_vanishes", &g, worst, 1.0e-8);
    Ok(())
}

fn jacobi_checks(suite: &mut Suite, grid: &ChartGrid) -> Result<()> {
    let basis = spectral::jacobi_basis(grid)?;
    let expected = spectral::jacobi_dimension(grid);
    suite.entries.push(ResidualRecord {
        name: "jacobi_dimension".to_string(),
        m_theta: grid.m_theta,
        m_y: grid.m_y,
        residual_l2: basis.ortho.len() as f64,
        residual_max: expected as f64,
        fitted_order: None,
        gate: format!("dimension == {expected}"),
        pass: basis.ortho.len() == expected,
    });

    let mut worst_kernel: f64 = 0.0;
    for j in &basis.ortho {
        let lj = spectral::apply_l(grid, j);
        let norm_j = spectral::inner(&basis.rule, j, j).sqrt();
        let norm_lj = spectral::inner(&basis.rule, &lj, &lj).sqrt();
        worst_kernel = worst_kernel.max(norm_lj / norm_j);
    }
    suite.push_value("jacobi_fields_in_kernel", grid, worst_kernel, 1.0e-7);

    // Idempotency: projecting the projection changes nothing.
    let probe = NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut v = vec![0.0; 1 + grid.zdim()];
        v[0] = 0.03 * y * th.sin() + 0.02 * (3.0 * th).cos() * (-y * y / 2.0).exp();
        if grid.zdim() > 0 {
            v[1] = 0.02 * th.cos();
        }
        v
    });
    let proj = spectral::project_jacobi(grid, &basis, &probe);
    let again = spectral::project_jacobi(grid, &basis, &proj.jacobi_part);
    let mut dev: f64 = 0.0;
    for (a, b) in proj.ortho_coefficients.iter().zip(&again.ortho_coefficients) {
        dev = dev.max((a - b).abs());
    }
    dev = dev.max(again.remainder.values.max_pointwise_norm());
    suite.push_value("jacobi_projection_idempotent", grid, dev, 1.0e-10);
    Ok(())
}

fn variation_checks(suite: &mut Suite, grid: &ChartGrid) -> Result<()> {
    // Trigonometric-polynomial direction: exactly representable by the
    // discrete pipeline, so the FD ladder sees the pure s^2 signal.
    let v = NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut out = vec![0.0; 1 + grid.zdim()];
        out[0] = (th.sin() + 0.4 * (2.0 * th).cos()) * (1.0 + 0.3 * y + 0.05 * y * y);
        if grid.zdim() > 0 {
            out[1] = th.cos() * (0.5 * y - 0.04 * y * y) + 0.2;
        }
        out
    });
    let imm = crate::chart::build_cylinder(grid);
    let jet = geometry::jet(grid, &imm)?;
    let s_list = variation::S_LADDER;
    for (name, result) in [
        ("first_variation_projector", variation::dpi(grid, &jet, &v, "trig_poly", &s_list)?),
        ("first_variation_mean_curvature", variation::dh(grid, &jet, &v, "trig_poly", &s_list)?),
        (
            "first_variation_second_fundamental_form",
            variation::da(grid, &jet, &v, "trig_poly", &s_list)?,
        ),
        ("first_variation_shrinker_field", variation::dphi(grid, &jet, &v, "trig_poly", &s_list)?),
    ] {
        suite.push_order(
            name,
            grid,
            result.max_discrepancy,
            result.max_discrepancy,
            result.fitted_order,
            1.8,
        );
    }
    Ok(())
}

fn taylor_p_checks(suite: &mut Suite, grid: &ChartGrid) -> Result<()> {
    if grid.zdim() == 0 {
        return Ok(());
    }
    let s_list = [4.0e-2, 2.0e-2, 1.0e-2];
    let generic = NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut v = vec![0.0; 1 + grid.zdim()];
        v[0] = th.sin() * (-y * y).exp();
        v[1] = th.cos() * y * (-y * y / 2.0).exp();
        v
    });
    let jacobi = NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut v = vec![0.0; 1 + grid.zdim()];
        v[0] = y * th.sin();
        v[1] = th.cos();
        v
    });
    let fit_g = variation::taylor_p(grid, &generic, &s_list)?;
    let fit_j = variation::taylor_p(grid, &jacobi, &s_list)?;
    suite.push_order("defect_onset_generic", grid, fit_g.residual, fit_g.residual, fit_g.slope, 1.9);
    suite.push_order("defect_onset_jacobi", grid, fit_j.residual, fit_j.residual, fit_j.slope, 2.8);
    suite.push_order(
        "defect_onset_separation",
        grid,
        fit_g.slope,
        fit_j.slope,
        fit_j.slope - fit_g.slope,
        0.8,
    );
    Ok(())
}

/// Run the whole suite on the configured grid. Returns the report; gate
/// failures are reported in it, not raised as errors (the caller decides
/// the exit code).
pub fn run(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let grid = cfg.build_grid()?;
    if grid.k != 1 || grid.n != 2 {
        return Err(Error::Config(
            "verify: the identity suite runs on the reference chart k = 1, n = 2".into(),
        ));
    }
    let mut suite = Suite { entries: Vec::new() };
    cylinder_checks(&mut suite, &grid)?;
    identity_ladder(&mut suite, grid.m_theta.min(32), grid.r_box)?;
    p_codim1_check(&mut suite, &grid)?;
    jacobi_checks(&mut suite, &grid)?;
    variation_checks(&mut suite, &grid)?;
    taylor_p_checks(&mut suite, &grid)?;
    let passed = suite.entries.iter().all(|e| e.pass);
    Ok(VerifyReport { entries: suite.entries, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn cfg(n_ambient: usize) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"
command = "verify"

[grid]
k = 1
n = 2
n_ambient = {n_ambient}
m_theta = 32
r_box = 6.0
m_y = 97
"#
        ))
        .unwrap()
    }

    #[test]
    fn default_suite_passes_with_full_coverage() {
        let report = run(&cfg(4)).unwrap();
        assert!(report.entries.len() >= 12, "only {} entries", report.entries.len());
        assert!(report.passed, "failing checks: {:?}", report.failing());
        // Ladder entries carry fitted orders.
        assert!(report.entries.iter().filter(|e| e.fitted_order.is_some()).count() >= 10);
    }

    #[test]
    fn hypersurface_configuration_still_passes() {
        // In ambient dimension n + 1 the defect checks degenerate to the
        // codimension-one statement and the Jacobi basis shrinks; the suite
        // must still be green.
        let report = run(&cfg(3)).unwrap();
        assert!(report.passed, "failing checks: {:?}", report.failing());
    }
}
