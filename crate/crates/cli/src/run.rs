use std::fs;
use std::path::PathBuf;

use padicwalk_core::fpt::{self, FptGrid};
use padicwalk_core::heatkernel::{cauchy_solve, TimeGrid};
use padicwalk_core::symbol::{aw_sandwich, SymbolTable};
use padicwalk_core::walker::{ReturnEstimate, WalkConfig, Walker};
use padicwalk_core::RadialStepFunction;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::emit::{fmt_f64, write_csv, write_json};
use crate::{verify, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Symbol,
    Kernel,
    Cauchy,
    Walk,
    Fpt,
    Verify,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub command: Command,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: u64,
    workers: usize,
}

/// Runs one subcommand; returns a one-line summary.
pub fn run(opts: &RunOptions) -> Result<String, CliError> {
    let cfg = ExperimentConfig::load(&opts.config)?;
    let workers = opts.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Validation("workers must be positive".into()));
    }
    let out = opts.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let ctx = Ctx { seed: cfg.resolve_seed(opts.seed), cfg, out, workers };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| match opts.command {
        Command::Symbol => symbol(&ctx),
        Command::Kernel => kernel(&ctx),
        Command::Cauchy => cauchy(&ctx),
        Command::Walk => walk(&ctx),
        Command::Fpt => fpt_cmd(&ctx),
        Command::Verify => verify::verify(&ctx.cfg, &ctx.out),
    })
}

fn symbol(ctx: &Ctx) -> Result<String, CliError> {
    let l = ctx.cfg.landscape()?;
    let s = &ctx.cfg.symbol;
    let table = SymbolTable::with_tolerance(&l, s.gamma_min, s.gamma_max, ctx.cfg.tolerances.series)?;
    let mut rows = Vec::new();
    for e in table.entries() {
        let sw = aw_sandwich(&l, e.gamma);
        rows.push(vec![
            e.gamma.to_string(),
            fmt_f64(e.value),
            fmt_f64(sw.lower),
            fmt_f64(sw.upper),
            fmt_f64(e.error),
        ]);
    }
    let n = rows.len();
    write_csv(&ctx.out.join("symbol.csv"), &["gamma", "A_w", "lower", "upper", "certified_error"], rows)?;
    Ok(format!("symbol: {n} rows"))
}

fn sorted_times(times: &[f64]) -> Vec<f64> {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn kernel(ctx: &Ctx) -> Result<String, CliError> {
    let model = ctx.cfg.model()?;
    let k = &ctx.cfg.kernel;
    let times = sorted_times(&k.times);
    let (mut z_rows, mut c_rows, mut s_rows) = (Vec::new(), Vec::new(), Vec::new());
    for &t in &times {
        let z = model.z_profile(k.level_min, k.level_max, t)?;
        for (b, z) in (k.level_min..=k.level_max).zip(z) {
            z_rows.push(vec![b.to_string(), fmt_f64(t), fmt_f64(z)]);
        }
        for m in k.level_min..=k.level_max {
            c_rows.push(vec![m.to_string(), fmt_f64(t), fmt_f64(model.radius_cdf(m, t)?)]);
        }
        s_rows.push(vec![fmt_f64(t), fmt_f64(model.survival_s(t)?)]);
    }
    write_csv(&ctx.out.join("kernel_z.csv"), &["radius_level", "t", "Z"], z_rows)?;
    write_csv(&ctx.out.join("kernel_cdf.csv"), &["m", "t", "CDF"], c_rows)?;
    write_csv(&ctx.out.join("kernel_survival.csv"), &["t", "S"], s_rows)?;
    Ok(format!("kernel: {} times, levels {}..={}", times.len(), k.level_min, k.level_max))
}

fn cauchy(ctx: &Ctx) -> Result<String, CliError> {
    let model = ctx.cfg.model()?;
    let c = &ctx.cfg.cauchy;
    let u0 = RadialStepFunction::new(c.initial.clone())?;
    let grid = TimeGrid::new(c.h, c.steps)?;
    let forcing = if c.forcing.is_empty() {
        Vec::new()
    } else {
        vec![RadialStepFunction::new(c.forcing.clone())?; c.steps + 1]
    };
    let sol = cauchy_solve(&model, &u0, &forcing, grid, (c.level_min, c.level_max), ctx.cfg.tolerances.cauchy_quadrature)?;
    let mut rows = Vec::new();
    for (t, prof) in sol.times.iter().zip(&sol.profiles) {
        for &(b, v) in prof.breakpoints() {
            rows.push(vec![fmt_f64(*t), b.to_string(), fmt_f64(v)]);
        }
    }
    write_csv(&ctx.out.join("cauchy.csv"), &["t", "radius_level", "u"], rows)?;
    write_json(
        &ctx.out.join("cauchy_summary.json"),
        &json!({
            "levels": [sol.lo, sol.hi],
            "quadrature_error": sol.quadrature_error,
            "warning": sol.warning,
        }),
    )?;
    if let Some(w) = &sol.warning {
        eprintln!("warning: {w}");
    }
    Ok(format!("cauchy: {} time steps on levels {}..={}", c.steps, sol.lo, sol.hi))
}

fn walk(ctx: &Ctx) -> Result<String, CliError> {
    let model = ctx.cfg.model()?;
    let w = &ctx.cfg.walk;
    let mut cfg = WalkConfig::new(model, w.dt, w.horizon, w.paths, ctx.seed)?;
    cfg.mode = w.mode;
    cfg.start = w.start;
    cfg.precision = w.precision;
    cfg.workers = ctx.workers;
    let walker = Walker::new(cfg)?;
    let records = walker.run()?;
    let rows = records.iter().map(|r| {
        vec![
            r.path_index.to_string(),
            r.exit_step.map_or(String::new(), |k| k.to_string()),
            r.return_step.map_or("CENSORED".into(), |k| k.to_string()),
        ]
    });
    write_csv(&ctx.out.join("walk_paths.csv"), &["path_index", "exit_step", "return_step"], rows)?;
    let est = padicwalk_core::FptEstimate::from_records(&records, walker.config().steps, w.dt);
    let hist = est.histogram(w.histogram_bin).into_iter().map(|(t, c)| vec![fmt_f64(t), c.to_string()]);
    write_csv(&ctx.out.join("walk_histogram.csv"), &["t_bin", "count"], hist)?;
    let ret = ReturnEstimate::from_records(&records).ok();
    let events: u64 = records.iter().map(|r| r.precision_events as u64).sum();
    write_json(
        &ctx.out.join("walk_summary.json"),
        &json!({
            "paths": records.len(),
            "seed": ctx.seed,
            "steps": walker.config().steps,
            "censored_fraction": est.censored_fraction(),
            "return_probability": ret,
            "precision_events": events,
        }),
    )?;
    Ok(format!("walk: {} paths, censored fraction {}", records.len(), est.censored_fraction()))
}

fn fpt_cmd(ctx: &Ctx) -> Result<String, CliError> {
    let model = ctx.cfg.model()?;
    model.require_admissible()?;
    let f = &ctx.cfg.fpt;
    let steps = (f.horizon / f.h).round() as usize;
    let grid = fpt::volterra_solve(FptGrid::sample(&model, f.h, steps)?)?;
    let rows = (0..grid.t.len()).map(|k| {
        vec![fmt_f64(grid.t[k]), fmt_f64(grid.g[k]), fmt_f64(grid.f[k]), fmt_f64(grid.cumulative[k])]
    });
    write_csv(&ctx.out.join("fpt.csv"), &["t", "g", "f", "cumulative_f"], rows)?;
    let mut lap = Vec::new();
    for &s in &sorted_times(&f.laplace_s) {
        lap.push(vec![fmt_f64(s), fmt_f64(fpt::laplace_g(&model, s)?)]);
    }
    write_csv(&ctx.out.join("laplace.csv"), &["s", "G"], lap)?;
    let class = fpt::classify_recurrence(&model)?;
    write_json(&ctx.out.join("classification.json"), &class)?;
    write_json(&ctx.out.join("fpt_diagnostics.json"), &grid.diagnostics)?;
    Ok(format!("fpt: {:?}, int f = {}", class.tag, grid.total_mass()))
}
