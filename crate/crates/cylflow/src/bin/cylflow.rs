//! Batch front end: one experiment per invocation, driven by a TOML config,
//! with versioned JSON/CSV outputs. Exit codes: 0 success, 1 verification
//! gate failure, 2 resolution/stiffness, 3 geometry breach, 4 config/IO.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cylflow::chart::ChartGrid;
use cylflow::config::{Command as ConfigCommand, ExperimentConfig};
use cylflow::error::Error;
use cylflow::flow::{self, FlowTrace, LojaFit};
use cylflow::rates::{self, SequenceRecord};
use cylflow::report::{rates_csv, trace_csv, write_text, ReportEnvelope};
use cylflow::{gaussian, verify, Result};

#[derive(Parser)]
#[command(name = "cylflow", version, about = "Shrinking-cylinder flow laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the identity verification suite.
    Verify(RunArgs),
    /// Evolve configured initial data and write the flow trace.
    Evolve(RunArgs),
    /// Fit the Lojasiewicz exponent from a synthetic or measured sequence.
    Loja(RunArgs),
    /// Tabulate the Gaussian tail recursion and its closed-form bound.
    Tail(RunArgs),
    /// Generate and analyze a synthetic energy sequence.
    Rates(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment TOML.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [output].dir; default "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides [initial].seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.cmd {
        Cmd::Verify(a) => (ConfigCommand::Verify, a),
        Cmd::Evolve(a) => (ConfigCommand::Evolve, a),
        Cmd::Loja(a) => (ConfigCommand::Loja, a),
        Cmd::Tail(a) => (ConfigCommand::Tail, a),
        Cmd::Rates(a) => (ConfigCommand::Rates, a),
    };
    match run(name, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    cfg_text: String,
    out_dir: PathBuf,
    seed: u64,
}

impl Ctx {
    fn envelope<T: Serialize>(&self, payload: T) -> ReportEnvelope<T> {
        ReportEnvelope::new(self.cfg.command.name(), &self.cfg_text, self.seed, payload)
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }
}

fn run(expected: ConfigCommand, args: &RunArgs) -> Result<ExitCode> {
    let cfg_text = std::fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let cfg = ExperimentConfig::parse(&cfg_text)?;
    if cfg.command != expected {
        return Err(Error::Config(format!(
            "config declares command \"{}\" but the \"{}\" subcommand was invoked",
            cfg.command.name(),
            expected.name()
        )));
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| {
            cfg.output.as_ref().and_then(|o| o.dir.as_ref()).map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = args
        .seed
        .or_else(|| cfg.initial.as_ref().map(|i| i.seed))
        .unwrap_or(0);
    let ctx = Ctx { cfg, cfg_text, out_dir, seed };

    match expected {
        ConfigCommand::Verify => cmd_verify(&ctx),
        ConfigCommand::Evolve => cmd_evolve(&ctx),
        ConfigCommand::Loja => cmd_loja(&ctx),
        ConfigCommand::Tail => cmd_tail(&ctx),
        ConfigCommand::Rates => cmd_rates(&ctx),
    }
}

fn cmd_verify(ctx: &Ctx) -> Result<ExitCode> {
    let report = verify::run(&ctx.cfg)?;
    let passed = report.passed;
    let failing: Vec<String> = report.failing().iter().map(|s| s.to_string()).collect();
    ctx.envelope(&report).write(&ctx.path("verify.json"))?;
    for e in &report.entries {
        println!(
            "{} {} (residual {:.3e}{})",
            if e.pass { "pass" } else { "FAIL" },
            e.name,
            e.residual_l2,
            match e.fitted_order {
                Some(o) => format!(", order {o:.2}"),
                None => String::new(),
            }
        );
    }
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification gates failed: {}", failing.join(", "));
        Ok(ExitCode::from(1))
    }
}

#[derive(Serialize)]
struct EvolveSummary<'a> {
    final_t: f64,
    final_f: f64,
    integer_f: &'a [f64],
    deltas: &'a [f64],
    scales: &'a [flow::ShrinkerScale],
}

fn run_flow(ctx: &Ctx) -> Result<(ChartGrid, FlowTrace, flow::FlowState)> {
    let grid = ctx.cfg.build_grid()?;
    let u0 = ctx.cfg.build_initial(&grid, ctx.seed)?;
    let opts = ctx
        .cfg
        .stepper
        .as_ref()
        .ok_or_else(|| Error::Config("no [stepper] block configured".into()))?
        .evolve_options()?;
    let (trace, state) = flow::evolve(&grid, &u0, &opts)?;
    Ok((grid, trace, state))
}

fn cmd_evolve(ctx: &Ctx) -> Result<ExitCode> {
    let (_, trace, state) = run_flow(ctx)?;
    write_text(&ctx.path("trace.csv"), &trace_csv(&trace))?;
    let summary = EvolveSummary {
        final_t: state.t,
        final_f: state.f_total,
        integer_f: &trace.integer_f,
        deltas: &trace.deltas,
        scales: &trace.scales,
    };
    ctx.envelope(&summary).write(&ctx.path("evolve.json"))?;
    println!(
        "evolved to t = {:.4}: F = {:.12}, {} trace rows",
        state.t,
        state.f_total,
        trace.samples.len()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct LojaSummary {
    source: String,
    f_reference: f64,
    fit: LojaFit,
}

fn cmd_loja(ctx: &Ctx) -> Result<ExitCode> {
    let loja = ctx.cfg.loja.as_ref().unwrap();
    let (f_seq, f_ref, guard) = match loja.source.as_str() {
        "synthetic" => {
            let r = ctx.cfg.rates.as_ref().unwrap();
            let rec = rates::synth_sequence(r.alpha, r.c, r.f_inf, r.j_max)?;
            (rec.f, r.f_inf, loja.tail_guard)
        }
        _ => {
            let (grid, trace, _) = run_flow(ctx)?;
            let f_cyl = gaussian::f_cylinder_closed_form(&grid);
            let guard = loja.tail_guard.max(
                trace.samples.first().map(|s| s.tail_bound).unwrap_or(loja.tail_guard),
            );
            (trace.integer_f, f_cyl, guard)
        }
    };
    let fit = flow::loja_audit(&f_seq, f_ref, guard)?;
    if fit.conclusive {
        println!(
            "alpha = {:.4} (slope {:.4}, residual {:.4}, {} windows)",
            fit.alpha, fit.slope, fit.residual, fit.points_used
        );
    } else {
        println!("inconclusive: only {} usable windows", fit.points_used);
    }
    let summary = LojaSummary { source: loja.source.clone(), f_reference: f_ref, fit };
    ctx.envelope(&summary).write(&ctx.path("loja.json"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TailRow {
    q: usize,
    gamma_recursion: f64,
    gamma_quadrature: f64,
    bound: f64,
}

#[derive(Serialize)]
struct TailSummary {
    m: usize,
    k_pow: usize,
    r: f64,
    rows: Vec<TailRow>,
    tail_value: f64,
    tail_bound: f64,
}

fn cmd_tail(ctx: &Ctx) -> Result<ExitCode> {
    let t = ctx.cfg.tail.as_ref().unwrap();
    let mut rows = Vec::new();
    for q in 0..=t.q_max {
        rows.push(TailRow {
            q,
            gamma_recursion: rates::gamma_q(q, t.r)?,
            gamma_quadrature: rates::gamma_q_quadrature(q, t.r),
            bound: rates::gamma_bound(q, t.r)?,
        });
    }
    let tail = rates::gaussian_tail(t.m, t.k_pow, t.r)?;
    for row in &rows {
        println!(
            "gamma_{}({}) = {:.12e} (quadrature {:.12e}, bound {:.12e})",
            row.q, t.r, row.gamma_recursion, row.gamma_quadrature, row.bound
        );
    }
    let summary = TailSummary {
        m: t.m,
        k_pow: t.k_pow,
        r: t.r,
        rows,
        tail_value: tail.value,
        tail_bound: tail.bound,
    };
    ctx.envelope(&summary).write(&ctx.path("tail.json"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RatesSummary {
    record: SequenceRecord,
    rate: rates::RateReport,
    summability: Vec<rates::SummabilityReport>,
}

fn cmd_rates(ctx: &Ctx) -> Result<ExitCode> {
    let r = ctx.cfg.rates.as_ref().unwrap();
    let rec = rates::synth_sequence(r.alpha, r.c, r.f_inf, r.j_max)?;
    let rate = rates::rate_extraction(&rec.delta)?;
    let mut summability = Vec::new();
    for &beta in &r.betas {
        summability.push(rates::summability_check(&rec.delta, beta)?);
    }
    write_text(&ctx.path("rates.csv"), &rates_csv(&rec))?;
    println!("rho_fit = {:.4} over {} windows", rate.rho, rec.delta.len());
    let summary = RatesSummary { record: rec, rate, summability };
    ctx.envelope(&summary).write(&ctx.path("rates.json"))?;
    Ok(ExitCode::SUCCESS)
}
