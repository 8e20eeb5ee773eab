//! The `harnack-lab` command line.
//!
//! Exit codes: 0 success or pass, 1 domain-level failure (hypothesis fails,
//! positivity violated, check outside tolerance), 2 usage or configuration
//! error. Output files never contain timestamps; progress goes to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, RunConfig, SEED_ENV};
use crate::error::Error;
use crate::expr::{Expr, ExprError};
use crate::feynman_kac::{default_horizon, evaluate, make_solution, sandwich_check};
use crate::field::{Grid, PointFunction, ScalarField};
use crate::harnack::{
    counterexample_scan, default_family, random_family, region_inequality_check, scan_family, window_average_x,
    Candidate, HarnackReport, SubGrid, Subcylinder,
};
use crate::operator::{all_names, check_hypothesis, classify_regions, residual, CylinderDomain, OperatorSpec};
use crate::report::{fmt_f64, heatmap, line_plot};
use crate::sde::{comparability_constant, simulate_batch, EmpiricalMeasure, SimConfig};
use crate::solutions::{from_catalog, AnalyticSolution, Validity};

#[derive(Debug, Parser)]
#[command(name = "harnack-lab", version, about = "Shear-drift operator experiments: hypothesis checks, path simulation, Feynman-Kac evaluation and Harnack ratios")]
pub struct Cli {
    /// Sectioned TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `[sim] seed` and HARNACK_LAB_SEED.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores). Never changes output bytes.
    #[arg(long, global = true, value_name = "INT")]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    /// Config override, e.g. `--set sim.dt=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the sign-change and derivative conditions on beta.
    Check,
    /// Simulate a path batch and its stopped-state histogram.
    Simulate,
    /// Feynman-Kac estimate at the start point, optionally with the sandwich check.
    Evaluate,
    /// Manufacture a positive field from boundary data.
    MakeSolution,
    /// Sup/inf ratios over a family of positive solutions.
    Harnack,
    /// Ratios of the constant-drift family.
    Counterexample,
    /// Drift regions A_d^+ and A_d^- and the region ratio.
    Regions,
    /// Window averages in x of a catalog solution.
    Average,
}

enum Failure {
    Config(Vec<String>),
    Run(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        Failure::Run(e.into())
    }
}

type Outcome = Result<bool, Failure>;

/// Exit code for a library error: configuration-type problems map to 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Expr(ExprError::Domain(_)) => 1,
        Error::Expr(_) => 2,
        Error::EvalAt { .. } | Error::OutsideSupport(_) | Error::NonPositive { .. } | Error::EmptyRegion(_) => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    run_cli(&cli, env_seed.as_deref())
}

pub fn run_cli(cli: &Cli, env_seed: Option<&str>) -> i32 {
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.workers {
        Some(0) => {
            eprintln!("configuration error:\n  --workers must be at least 1");
            return 2;
        }
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli, &cfg, env_seed)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Config(problems)) => {
            eprintln!("configuration error:\n  {}", problems.join("\n  "));
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    cfg: &'a RunConfig,
    op: OperatorSpec,
    dom: CylinderDomain,
}

fn dispatch(cli: &Cli, cfg: &RunConfig, env_seed: Option<&str>) -> Outcome {
    let sim = cfg.sim_config(cli.seed, env_seed);
    let (op, dom) = match cfg.operator() {
        Ok(v) => v,
        Err(ConfigError(mut problems)) => {
            // Keep collecting command problems against a stand-in operator.
            let probe_dom = CylinderDomain::default();
            let probe = OperatorSpec::new("0", "0", cfg.operator.n, &probe_dom);
            match (probe, &sim) {
                (Ok(probe), Ok(sim)) => problems.extend(preflight(cli.command, cfg, &probe, &probe_dom, sim)),
                (_, Err(e)) => problems.extend(e.0.iter().cloned()),
                _ => {}
            }
            return Err(Failure::Config(problems));
        }
    };
    let sim = sim?;
    let problems = preflight(cli.command, cfg, &op, &dom, &sim);
    if !problems.is_empty() {
        return Err(Failure::Config(problems));
    }
    fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let ctx = Ctx { cli, cfg, op, dom };
    match cli.command {
        Command::Check => cmd_check(&ctx),
        Command::Simulate => cmd_simulate(&ctx, &sim),
        Command::Evaluate => cmd_evaluate(&ctx, &sim),
        Command::MakeSolution => cmd_make_solution(&ctx, &sim),
        Command::Harnack => cmd_harnack(&ctx, &sim),
        Command::Counterexample => cmd_counterexample(&ctx),
        Command::Regions => cmd_regions(&ctx),
        Command::Average => cmd_average(&ctx),
    }
}

fn need(problems: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        problems.push(msg());
    }
}

/// Command-specific preconditions, all reported together.
fn preflight(cmd: Command, cfg: &RunConfig, op: &OperatorSpec, dom: &CylinderDomain, sim: &SimConfig) -> Vec<String> {
    let mut p = Vec::new();
    let uses_sim = matches!(cmd, Command::Simulate | Command::Evaluate | Command::MakeSolution)
        || (cmd == Command::Harnack && cfg.harnack.random > 0);
    if uses_sim {
        p.extend(sim.problems(op, dom).into_iter().map(|m| format!("sim: {m}")));
    }
    let start_y = cfg.start_y();
    if matches!(cmd, Command::Simulate | Command::Evaluate) {
        need(&mut p, start_y.len() == op.dim_y(), || {
            format!("start: y has {} coordinates, N - 1 = {}", start_y.len(), op.dim_y())
        });
        need(&mut p, start_y.iter().map(|v| v * v).sum::<f64>() < dom.stop_radius.powi(2), || {
            "start: y must lie strictly inside the stopping ball".into()
        });
        need(&mut p, cfg.start.x.is_finite(), || "start: x must be finite".into());
    }
    let grid_ok = |nx: usize, ny: usize| nx >= 2 && ny >= 2;
    match cmd {
        Command::Check => {
            need(&mut p, cfg.check.grid_step > 0.0, || "check: grid_step must be positive".into());
        }
        Command::Simulate => {
            let s = &cfg.simulate;
            need(&mut p, s.bins >= 1, || "simulate: bins must be at least 1".into());
            if let Some(y2) = &s.compare_y {
                need(&mut p, y2.len() == op.dim_y(), || "simulate: compare_y has the wrong dimension".into());
            }
        }
        Command::Evaluate => {
            let e = &cfg.evaluate;
            need(&mut p, e.solution.is_none() || e.data.is_none(), || {
                "evaluate: set at most one of `solution` and `data`".into()
            });
            if let Some(t) = e.t {
                need(&mut p, t > 0.0 && t.is_finite(), || "evaluate: t must be positive".into());
            }
            need(&mut p, e.k_sigma >= 0.0, || "evaluate: k_sigma must be non-negative".into());
            need(&mut p, grid_ok(e.nx, e.ny), || "evaluate: nx and ny must be at least 2".into());
        }
        Command::MakeSolution => {
            let m = &cfg.make_solution;
            need(&mut p, m.t_solve > 0.0, || "make_solution: t_solve must be positive".into());
            need(&mut p, m.n_paths >= 1, || "make_solution: n_paths must be at least 1".into());
            need(&mut p, grid_ok(m.nx, m.ny), || "make_solution: nx and ny must be at least 2".into());
            need(&mut p, m.t_solve >= sim.dt, || "make_solution: t_solve must be at least dt".into());
            if let Err(e) = Expr::parse(&m.data, &all_names(op.dim_n())) {
                p.push(format!("make_solution: data: {e}"));
            }
        }
        Command::Harnack => {
            let h = &cfg.harnack;
            need(&mut p, grid_ok(h.nx, h.ny), || "harnack: nx and ny must be at least 2".into());
            if h.random > 0 {
                need(&mut p, h.t_solve >= sim.dt, || "harnack: t_solve must be at least dt".into());
                need(&mut p, h.n_paths >= 1, || "harnack: n_paths must be at least 1".into());
                need(&mut p, grid_ok(h.random_nx, h.random_ny), || {
                    "harnack: random_nx and random_ny must be at least 2".into()
                });
            }
        }
        Command::Counterexample => {
            let c = &cfg.counterexample;
            need(&mut p, !c.lambdas.is_empty(), || "counterexample: lambdas is empty".into());
            need(
                &mut p,
                c.lambdas.iter().all(|l| *l > 0.0) && c.lambdas.windows(2).all(|w| w[1] > w[0]),
                || "counterexample: lambdas must be positive and strictly increasing".into(),
            );
            need(&mut p, grid_ok(c.nx, c.ny), || "counterexample: nx and ny must be at least 2".into());
        }
        Command::Regions => {
            let r = &cfg.regions;
            need(&mut p, r.d > 0.0, || "regions: d must be positive".into());
            need(&mut p, r.grid_step > 0.0, || "regions: grid_step must be positive".into());
            need(&mut p, r.nx >= 2, || "regions: nx must be at least 2".into());
        }
        Command::Average => {
            let a = &cfg.average;
            need(&mut p, a.z > 0.0 && a.z <= 1.0 / 3.0 + 1e-15, || "average: z must be in (0, 1/3]".into());
            need(&mut p, grid_ok(a.nx, a.ny), || "average: nx and ny must be at least 2".into());
        }
    }
    p
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn write_field(dir: &Path, stem: &str, field: &ScalarField, svg: bool, title: &str) -> Result<(), Error> {
    field.save(dir, stem)?;
    if svg {
        if let Some(s) = heatmap(field, title) {
            write_text(dir, &format!("{stem}.svg"), &s)?;
        }
    }
    Ok(())
}

fn cmd_check(ctx: &Ctx) -> Outcome {
    let c = &ctx.cfg.check;
    let report = check_hypothesis(&ctx.op, &ctx.dom, c.r, c.grid_step)?;
    write_text(&ctx.cli.out, "check.json", &(report.to_json()? + "\n"))?;
    if let Some(d) = &report.domain_error {
        println!("check: fail, beta not evaluable at {:?}: {}", d.point, d.message);
    } else if report.pass {
        println!(
            "check: pass (r = {}, min derivative mass {}, beta in [{}, {}])",
            report.r, report.min_derivative_mass, report.beta_min, report.beta_max
        );
    } else {
        let mut why = Vec::new();
        if !report.sign_change_ok {
            why.push(format!(
                "sign change fails: beta ranges over [{}, {}]",
                report.beta_min, report.beta_max
            ));
        }
        if report.min_derivative_mass <= report.tolerance {
            why.push(format!(
                "derivative mass up to order {} vanishes at {:?}",
                report.r, report.min_mass_at
            ));
        }
        println!("check: fail ({})", why.join("; "));
    }
    Ok(report.pass)
}

fn cmd_simulate(ctx: &Ctx, sim: &SimConfig) -> Outcome {
    let (cfg, out) = (ctx.cfg, &ctx.cli.out);
    let start_y = cfg.start_y();
    let batch = simulate_batch(&ctx.op, &ctx.dom, cfg.start.x, &start_y, sim)?;
    let mut buf = Vec::new();
    batch.write_csv(&mut buf)?;
    fs::write(out.join("paths.csv"), buf).map_err(Error::from)?;
    let nu = EmpiricalMeasure::from_batch(&batch, ctx.dom.stop_radius, cfg.simulate.bins)?;
    let mut buf = Vec::new();
    nu.write_csv(&mut buf)?;
    fs::write(out.join("nu.csv"), buf).map_err(Error::from)?;
    let invariants = batch.check_invariants(&ctx.op, ctx.dom.stop_radius, sim.dt);
    let comparability = match &cfg.simulate.compare_y {
        Some(y2) => Some(comparability_constant(
            &ctx.op,
            &ctx.dom,
            &start_y,
            y2,
            sim.t_max,
            sim,
            cfg.simulate.bins,
            cfg.simulate.mass_floor,
        )?),
        None => None,
    };
    let stats = batch.stop_time_stats();
    write_json(
        out,
        "simulate.json",
        &json!({
            "start": { "x": cfg.start.x, "y": start_y },
            "sim": sim,
            "exit_fraction": batch.exit_fraction(),
            "mean_stop_time": stats.mean,
            "stop_time_std_error": stats.std_error,
            "exit_mass": nu.exit_mass(),
            "invariants_ok": invariants.is_ok(),
            "invariant_violation": invariants.as_ref().err(),
            "comparability": comparability,
        }),
    )?;
    if ctx.cli.svg && nu.dim_y == 1 {
        let pts: Vec<(f64, f64)> = (0..nu.counts.len()).map(|k| (nu.bin_center(k)[0], nu.mass(k))).collect();
        write_text(out, "nu.svg", &line_plot(&pts, "stopped y histogram", "y1", "mass", false))?;
    }
    println!(
        "simulate: {} paths, exit fraction {}, mean stop time {} +- {}",
        batch.len(),
        batch.exit_fraction(),
        stats.mean,
        stats.std_error
    );
    if let Err(msg) = &invariants {
        eprintln!("invariant violated: {msg}");
    }
    Ok(invariants.is_ok())
}

fn catalog(ctx: &Ctx, entry: &str, validity: Validity) -> Result<AnalyticSolution, Error> {
    from_catalog(entry, &ctx.op, &ctx.dom, validity)
}

fn cmd_evaluate(ctx: &Ctx, sim: &SimConfig) -> Outcome {
    let (cfg, out) = (ctx.cfg, &ctx.cli.out);
    let e = &cfg.evaluate;
    let start_y = cfg.start_y();
    let solution = match (&e.solution, &e.data) {
        (Some(entry), _) => Some(catalog(ctx, entry, Validity::cylinder(&ctx.dom))?),
        (None, None) => Some(catalog(ctx, "kolmogorov(10)", Validity::cylinder(&ctx.dom))?),
        (None, Some(_)) => None,
    };
    // A catalog solution brings its own coefficients.
    let op = match &solution {
        Some(s) => s.operator(&ctx.dom)?,
        None => ctx.op.clone(),
    };
    let data: Box<dyn PointFunction> = match (&solution, &e.data) {
        (Some(s), _) => Box::new(s.clone()),
        (None, Some(text)) => Box::new(Expr::parse(text, &all_names(op.dim_n()))?),
        (None, None) => unreachable!("checked in preflight"),
    };
    if start_y.len() != op.dim_y() {
        return Err(Failure::Config(vec![format!(
            "start: y has {} coordinates, the solution needs {}",
            start_y.len(),
            op.dim_y()
        )]));
    }
    let t = e.t.unwrap_or_else(|| default_horizon(&op));
    let est = evaluate(&op, &ctx.dom, data.as_ref(), cfg.start.x, &start_y, t, sim)?;
    let exact = match &solution {
        Some(s) => Some(s.value(cfg.start.x, &start_y)?),
        None => None,
    };
    let within = exact.map(|u| (est.value - u).abs() <= 3.0 * est.std_error);
    write_json(
        out,
        "evaluate.json",
        &json!({
            "start": { "x": cfg.start.x, "y": start_y },
            "solution": solution.as_ref().map(|s| s.name()),
            "data": e.data,
            "estimate": est,
            "exact": exact,
            "within_3_std_error": within,
        }),
    )?;
    println!("evaluate: {} +- {} (t = {t})", est.value, est.std_error);
    let mut ok = within.unwrap_or(true);
    if e.sandwich {
        let grid = Grid::cylinder(ctx.dom.x_lo, ctx.dom.x_hi, ctx.dom.radius, op.dim_y(), e.nx, e.ny)?;
        let field = ScalarField::sample(&grid, data.as_ref())?;
        let v = sandwich_check(&op, &ctx.dom, &field, cfg.start.x, &start_y, t, sim, e.k_sigma)?;
        write_json(out, "sandwich.json", &v)?;
        println!(
            "sandwich: {} ({} <= {} <= {})",
            if v.pass { "pass" } else { "fail" },
            v.lower,
            v.u_start,
            v.upper
        );
        ok &= v.pass;
    }
    Ok(ok)
}

fn cmd_make_solution(ctx: &Ctx, sim: &SimConfig) -> Outcome {
    let (m, out) = (&ctx.cfg.make_solution, &ctx.cli.out);
    let data = Expr::parse(&m.data, &all_names(ctx.op.dim_n()))?;
    let grid = Grid::cylinder(ctx.dom.x_lo, ctx.dom.x_hi, ctx.dom.radius, ctx.op.dim_y(), m.nx, m.ny)?;
    let made = make_solution(&ctx.op, &ctx.dom, &data, m.t_solve, &sim.with_paths(m.n_paths), &grid)?;
    write_field(out, "field", &made.value, ctx.cli.svg, "manufactured field")?;
    made.std_error.write_csv(fs::File::create(out.join("field_std_error.csv")).map_err(Error::from)?)?;
    let res = residual(&made.value, &ctx.op)?;
    let (lo, hi) = made
        .value
        .present()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(v), hi.max(v)));
    write_json(
        out,
        "make_solution.json",
        &json!({
            "data": data.to_string(),
            "t_solve": m.t_solve,
            "n_paths": m.n_paths,
            "seed": sim.master_seed,
            "nodes_present": made.value.present().count(),
            "min": lo,
            "max": hi,
            "max_std_error": made.std_error.max_abs(),
            "residual_max_abs": res.max_abs(),
        }),
    )?;
    println!("make-solution: {} nodes, values in [{lo}, {hi}]", made.value.present().count());
    Ok(lo > 0.0)
}

fn write_reports_csv(dir: &Path, name: &str, reports: &[HarnackReport], dim_n: usize) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    let names = all_names(dim_n);
    let mut header = vec!["solution".to_string(), "sup".into(), "inf".into(), "ratio".into()];
    header.extend(names.iter().map(|n| format!("argmax_{n}")));
    header.extend(names.iter().map(|n| format!("argmin_{n}")));
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.solution.clone(), fmt_f64(r.sup), fmt_f64(r.inf), fmt_f64(r.ratio)];
        row.extend(r.argmax.iter().map(|&v| fmt_f64(v)));
        row.extend(r.argmin.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_harnack(ctx: &Ctx, sim: &SimConfig) -> Outcome {
    let (h, out) = (&ctx.cfg.harnack, &ctx.cli.out);
    let sub = Subcylinder::of(&ctx.dom);
    let analytic = if h.family.is_empty() {
        default_family(&ctx.op, &ctx.dom, &sub)?
    } else {
        h.family
            .iter()
            .map(|e| catalog(ctx, e, sub.validity()))
            .collect::<Result<Vec<_>, _>>()?
    };
    let random = if h.random > 0 {
        let grid = SubGrid {
            nx: h.random_nx,
            ny: h.random_ny,
        };
        random_family(&ctx.op, &ctx.dom, &sub, grid, h.random, h.t_solve, &sim.with_paths(h.n_paths))?
    } else {
        Vec::new()
    };
    if analytic.iter().any(|s| s.dim_n() != ctx.op.dim_n()) {
        return Err(Failure::Config(vec!["harnack: family members must share the operator dimension".into()]));
    }
    let mut cands: Vec<Candidate> = analytic.iter().map(Candidate::Function).collect();
    cands.extend(random.iter().map(|(name, field)| Candidate::Field {
        name: name.clone(),
        field,
    }));
    if cands.is_empty() {
        return Err(Failure::Config(vec!["harnack: the solution family is empty".into()]));
    }
    let scan = scan_family(&cands, &sub, SubGrid { nx: h.nx, ny: h.ny })?;
    write_reports_csv(out, "harnack.csv", &scan.reports, ctx.op.dim_n())?;
    write_json(
        out,
        "harnack.json",
        &json!({
            "family": scan.reports.iter().map(|r| r.solution.as_str()).collect::<Vec<_>>(),
            "max_ratio": scan.max_ratio,
            "argmax": scan.reports[scan.argmax].solution,
            "verdict": if scan.max_ratio.is_finite() { "bounded" } else { "unbounded" },
            "subdomain": sub,
        }),
    )?;
    if ctx.cli.svg {
        let pts: Vec<(f64, f64)> = scan.reports.iter().enumerate().map(|(i, r)| (i as f64, r.ratio)).collect();
        write_text(out, "harnack.svg", &line_plot(&pts, "sup/inf ratio per solution", "solution index", "ratio", false))?;
    }
    println!("harnack: max ratio {} ({})", scan.max_ratio, scan.reports[scan.argmax].solution);
    Ok(true)
}

fn cmd_counterexample(ctx: &Ctx) -> Outcome {
    let (c, out) = (&ctx.cfg.counterexample, &ctx.cli.out);
    let sub = Subcylinder::of(&ctx.dom);
    let scan = counterexample_scan(&c.lambdas, &sub, SubGrid { nx: c.nx, ny: c.ny })?;
    let mut w = csv::Writer::from_path(out.join("counterexample.csv")).map_err(Error::from)?;
    w.write_record(["lambda", "ratio", "closed_form", "sup", "inf"]).map_err(Error::from)?;
    for r in &scan.rows {
        w.write_record([
            fmt_f64(r.lambda),
            fmt_f64(r.ratio),
            fmt_f64(r.closed_form),
            fmt_f64(r.report.sup),
            fmt_f64(r.report.inf),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    let max_ratio = scan.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    write_json(
        out,
        "counterexample.json",
        &json!({
            "family": "counterexample",
            "lambdas": c.lambdas,
            "ratios": scan.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
            "max_ratio": max_ratio,
            "verdict": scan.verdict,
            "subdomain": sub,
        }),
    )?;
    if ctx.cli.svg {
        let pts: Vec<(f64, f64)> = scan.rows.iter().map(|r| (r.lambda, r.ratio)).collect();
        write_text(out, "counterexample.svg", &line_plot(&pts, "sup/inf ratio", "lambda", "ratio", true))?;
    }
    println!("counterexample: verdict {:?}, max ratio {max_ratio}", scan.verdict);
    Ok(true)
}

fn cmd_regions(ctx: &Ctx) -> Outcome {
    let (r, out) = (&ctx.cfg.regions, &ctx.cli.out);
    let set = classify_regions(&ctx.op, &ctx.dom, r.d, r.grid_step)?;
    let mut w = csv::Writer::from_path(out.join("regions.csv")).map_err(Error::from)?;
    let mut header = vec!["region".to_string()];
    header.extend((1..=ctx.op.dim_y()).map(|j| format!("y{j}")));
    w.write_record(&header).map_err(Error::from)?;
    for (label, pts) in [("plus", &set.plus), ("minus", &set.minus)] {
        for p in pts {
            let mut row = vec![label.to_string()];
            row.extend(p.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row).map_err(Error::from)?;
        }
    }
    w.flush().map_err(Error::from)?;
    write_json(
        out,
        "regions.json",
        &json!({
            "d": set.d,
            "plus_nodes": set.plus.len(),
            "minus_nodes": set.minus.len(),
            "neither_nodes": set.neither,
            "warning": set.warning,
        }),
    )?;
    println!("regions: {} plus, {} minus, {} neither", set.plus.len(), set.minus.len(), set.neither);
    if let Some(w) = &set.warning {
        println!("regions: {w}");
        return Ok(false);
    }
    let Some(entry) = &r.solution else {
        return Ok(true);
    };
    let u = catalog(ctx, entry, Validity::subcylinder(&ctx.dom))?;
    let check = region_inequality_check(&u, &ctx.op, &ctx.dom, r.d, r.grid_step, r.nx, r.cap)?;
    write_json(out, "region_check.json", &check)?;
    println!("regions: ratio {} (cap {})", check.ratio, check.cap);
    Ok(check.within_cap)
}

fn cmd_average(ctx: &Ctx) -> Outcome {
    let (a, out) = (&ctx.cfg.average, &ctx.cli.out);
    let u = catalog(ctx, &a.solution, Validity::cylinder(&ctx.dom))?;
    let grid = Grid::cylinder(ctx.dom.x_lo, ctx.dom.x_hi, ctx.dom.radius, u.dim_n() - 1, a.nx, a.ny)?;
    let field = u.sample(&grid)?;
    let target = a.target.unwrap_or([ctx.dom.sub_x_lo, ctx.dom.sub_x_hi]);
    let v = window_average_x(&field, a.z, (target[0], target[1]))?;
    write_field(out, "average", &v, ctx.cli.svg, "window average in x")?;
    println!("average: {} nodes, z = {}", v.grid().len(), a.z);
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn go(args: &[&str], out: &Path) -> i32 {
        let mut v = vec!["harnack-lab".to_string()];
        v.extend(args.iter().map(|s| s.to_string()));
        v.push("--out".into());
        v.push(out.display().to_string());
        let cli = Cli::try_parse_from(v).unwrap();
        run_cli(&cli, None)
    }

    #[test]
    fn check_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(go(&["check", "--set", "operator.beta=y1"], dir.path()), 0);
        assert!(dir.path().join("check.json").exists());
        assert_eq!(go(&["check", "--set", "operator.beta=y1^2"], dir.path()), 1);
        let text = fs::read_to_string(dir.path().join("check.json")).unwrap();
        assert!(text.contains("\"sign_change_ok\": false"));
        assert_eq!(go(&["check", "--set", "operator.beta=q1"], dir.path()), 2);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["harnack-lab", "frobnicate"]), 2);
        assert_eq!(run(["harnack-lab", "check", "--workers", "0"]), 2);
        assert_eq!(run(["harnack-lab", "check", "--config", "/nonexistent/cfg.toml"]), 2);
    }

    #[test]
    fn error_code_mapping() {
        assert_eq!(exit_code(&Error::Invalid("x".into())), 2);
        assert_eq!(exit_code(&Error::NonPositive { value: 0.0, point: vec![] }), 1);
        assert_eq!(exit_code(&Error::EmptyRegion("x".into())), 1);
        assert_eq!(exit_code(&Error::Expr(ExprError::UndeclaredVariable("q".into()))), 2);
    }

    #[test]
    fn simulate_zero_drift_keeps_start_x() {
        let dir = tempfile::tempdir().unwrap();
        let code = go(
            &[
                "simulate",
                "--set",
                "operator.beta=0",
                "--set",
                "sim.n_paths=50",
                "--set",
                "sim.dt=0.01",
                "--set",
                "start.x=0.25",
            ],
            dir.path(),
        );
        assert_eq!(code, 0);
        let mut rdr = csv::Reader::from_path(dir.path().join("paths.csv")).unwrap();
        let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 50);
        assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.25));
    }

    #[test]
    fn harnack_and_counterexample_commands() {
        let dir = tempfile::tempdir().unwrap();
        let code = go(
            &["harnack", "--set", "harnack.family=[\"constant(1)\", \"constant(5)\", \"constant(100)\"]", "--svg"],
            dir.path(),
        );
        assert_eq!(code, 0);
        let j: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("harnack.json")).unwrap()).unwrap();
        assert_eq!(j["max_ratio"], 1.0);
        assert_eq!(go(&["counterexample", "--svg"], dir.path()), 0);
        let j: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("counterexample.json")).unwrap()).unwrap();
        assert_eq!(j["verdict"], "divergent");
        assert!(dir.path().join("counterexample.svg").exists());
        assert_eq!(go(&["harnack", "--set", "harnack.family=[\"kolmogorov(0.1)\"]"], dir.path()), 1);
    }
}
