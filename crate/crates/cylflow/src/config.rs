//! Experiment configuration: a TOML file with one block per concern, schema
//! checked strictly (unknown keys are rejected) before any computation runs.
//!
//! ```toml
//! command = "evolve"
//!
//! [grid]
//! k = 1
//! n = 2
//! n_ambient = 4
//! m_theta = 32
//! r_box = 6.0
//! m_y = 81
//!
//! [initial]
//! modes = [{ label = "sin2theta", amplitude = 0.02 }]
//! taper_inner = 3.0
//! taper_outer = 5.0
//! seed = 0
//!
//! [stepper]
//! dt = 0.02
//! t_end = 2.0
//! scheme = "imex"
//! cadence = 10
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{taper, ChartGrid, NormalField};
use crate::error::Error;
use crate::flow::{EvolveOptions, Scheme};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Evolve,
    Loja,
    Tail,
    Rates,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Evolve => "evolve",
            Command::Loja => "loja",
            Command::Tail => "tail",
            Command::Rates => "rates",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub k: usize,
    pub n: usize,
    pub n_ambient: usize,
    pub m_theta: usize,
    pub r_box: f64,
    pub m_y: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    /// One of: radial_constant, sin2theta, gaussian_bump, jacobi_quadratic,
    /// generic_mixed, random.
    pub label: String,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub modes: Vec<ModeSpec>,
    #[serde(default = "default_taper_inner")]
    pub taper_inner: f64,
    #[serde(default = "default_taper_outer")]
    pub taper_outer: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_taper_inner() -> f64 {
    3.0
}
fn default_taper_outer() -> f64 {
    5.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperBlock {
    pub dt: f64,
    pub t_end: f64,
    /// "imex" or "explicit".
    pub scheme: String,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
}

fn default_cadence() -> usize {
    10
}

impl StepperBlock {
    pub fn scheme(&self) -> Result<Scheme> {
        match self.scheme.as_str() {
            "imex" => Ok(Scheme::Imex),
            "explicit" => Ok(Scheme::Explicit),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?}: expected \"imex\" or \"explicit\""
            ))),
        }
    }

    pub fn evolve_options(&self) -> Result<EvolveOptions> {
        Ok(EvolveOptions {
            dt: self.dt,
            t_end: self.t_end,
            scheme: self.scheme()?,
            cadence: self.cadence,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailBlock {
    pub m: usize,
    pub k_pow: usize,
    pub r: f64,
    #[serde(default = "default_q_max")]
    pub q_max: usize,
}

fn default_q_max() -> usize {
    6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesBlock {
    pub alpha: f64,
    pub c: f64,
    pub f_inf: f64,
    pub j_max: usize,
    #[serde(default)]
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LojaBlock {
    /// "synthetic" (uses the [rates] block as the generator) or "flow"
    /// (runs [initial]+[stepper] and fits the measured energy sequence).
    pub source: String,
    #[serde(default = "default_tail_guard")]
    pub tail_guard: f64,
}

fn default_tail_guard() -> f64 {
    1.0e-9
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub grid: GridBlock,
    #[serde(default)]
    pub initial: Option<InitialBlock>,
    #[serde(default)]
    pub stepper: Option<StepperBlock>,
    #[serde(default)]
    pub tail: Option<TailBlock>,
    #[serde(default)]
    pub rates: Option<RatesBlock>,
    #[serde(default)]
    pub loja: Option<LojaBlock>,
    #[serde(default)]
    pub output: Option<OutputBlock>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text)
    }

    /// Blocks each command requires must be present; the grid must build.
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, block: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "command \"{}\" requires a [{block}] block",
                    self.command.name()
                )))
            }
        };
        match self.command {
            Command::Verify => {}
            Command::Evolve => {
                need(self.initial.is_some(), "initial")?;
                need(self.stepper.is_some(), "stepper")?;
            }
            Command::Loja => {
                need(self.loja.is_some(), "loja")?;
                let loja = self.loja.as_ref().unwrap();
                match loja.source.as_str() {
                    "synthetic" => need(self.rates.is_some(), "rates")?,
                    "flow" => {
                        need(self.initial.is_some(), "initial")?;
                        need(self.stepper.is_some(), "stepper")?;
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "unknown loja source {other:?}: expected \"synthetic\" or \"flow\""
                        )))
                    }
                }
            }
            Command::Tail => need(self.tail.is_some(), "tail")?,
            Command::Rates => need(self.rates.is_some(), "rates")?,
        }
        if let Some(init) = &self.initial {
            if init.modes.is_empty() {
                return Err(Error::Config("[initial] needs at least one mode".into()));
            }
            if !(init.taper_inner < init.taper_outer && init.taper_outer <= self.grid.r_box) {
                return Err(Error::Config(format!(
                    "taper radii must satisfy inner < outer <= r_box, got {} < {} <= {}",
                    init.taper_inner, init.taper_outer, self.grid.r_box
                )));
            }
        }
        self.build_grid()?;
        Ok(())
    }

    pub fn build_grid(&self) -> Result<ChartGrid> {
        let g = &self.grid;
        ChartGrid::new(g.k, g.n, g.n_ambient, g.m_theta, g.r_box, g.m_y)
    }

    /// Assemble the initial field from the configured mode superposition,
    /// then taper it. The seed (overridable on the command line) feeds only
    /// the "random" mode.
    pub fn build_initial(&self, grid: &ChartGrid, seed: u64) -> Result<NormalField> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::Config("no [initial] block configured".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ncomp = 1 + grid.zdim();
        let mut raw = NormalField::zeros(grid);
        for mode in &init.modes {
            let add = mode_field(grid, &mode.label, mode.amplitude, ncomp, &mut rng)?;
            raw.values.axpy(1.0, &add.values);
        }
        taper(grid, &raw, init.taper_inner, init.taper_outer)
    }
}

fn mode_field(
    grid: &ChartGrid,
    label: &str,
    amp: f64,
    ncomp: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NormalField> {
    // Random low-mode coefficients are drawn up front so the field is a
    // deterministic function of the seed regardless of grid traversal.
    let coef: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let field = NormalField::from_fn(grid, |p| {
        let idx = grid.multi_index(p);
        let th = grid.axes[0].coord[idx[0]];
        let y = grid.axes[1].coord[idx[1]];
        let mut v = vec![0.0; ncomp];
        match label {
            "radial_constant" => v[0] = amp,
            "sin2theta" => v[0] = amp * (2.0 * th).sin(),
            "gaussian_bump" => v[0] = amp * (-y * y / 2.0).exp(),
            "jacobi_quadratic" => v[0] = amp * (y * y - 2.0),
            "generic_mixed" => {
                v[0] = amp * th.sin() * (-y * y).exp();
                if ncomp > 1 {
                    v[1] = amp * th.cos() * y * (-y * y / 2.0).exp();
                }
            }
            "random" => {
                let e1 = (-y * y / 2.0).exp();
                let e2 = (-y * y / 4.0).exp();
                v[0] = amp
                    * (coef[0]
                        + coef[1] * th.sin()
                        + coef[2] * (2.0 * th).cos() * y
                        + coef[3] * (3.0 * th).sin())
                    * e1;
                if ncomp > 1 {
                    v[1] = amp
                        * (coef[4] + coef[5] * th.cos() + coef[6] * (2.0 * th).sin() * y)
                        * e2;
                }
                for a in 2..ncomp {
                    v[a] = amp * coef[7] * th.sin() * e1;
                }
            }
            _ => {}
        }
        v
    });
    let known = [
        "radial_constant",
        "sin2theta",
        "gaussian_bump",
        "jacobi_quadratic",
        "generic_mixed",
        "random",
    ];
    if !known.contains(&label) {
        return Err(Error::Config(format!(
            "unknown initial mode {label:?}: expected one of {known:?}"
        )));
    }
    Ok(field)
}
