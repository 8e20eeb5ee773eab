//! Euler–Maruyama simulation of `dX = β(Y) dt`, `dY = √2 dB`, stopped when `Y`
//! leaves the open ball of radius `stop_radius`.
//!
//! The `x` coordinate is tracked as a displacement from the start, so paths
//! started at `(x, y)` and `(x', y)` with the same seed share their `Y`
//! trajectory and their displacement bit for bit.
//!
//! Exits are detected at grid times. With [`ExitRule::Bridge`] (the default) a
//! step that ends inside the ball is also stopped with the probability that the
//! Brownian bridge between its endpoints crossed the sphere, using the tangent
//! half-space approximation `exp(-d0·d1/h)` (`d` = distance to the sphere,
//! diffusion coefficient 2). That removes the `O(√dt)` bias of grid-only
//! monitoring. Either way the recorded `y` is the step's endpoint projected
//! radially onto the closed ball.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::MAX_DIM;
use crate::operator::{CylinderDomain, OperatorSpec};
use crate::report::fmt_f64;
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitRule {
    /// Stop only when a grid-time state is outside the ball.
    GridOnly,
    /// Also stop on a sampled Brownian-bridge crossing between grid times.
    #[default]
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub exit_rule: ExitRule,
}

impl SimConfig {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_PATHS: usize = 100_000;

    pub fn new(dt: f64, t_max: f64, n_paths: usize, master_seed: u64) -> SimConfig {
        SimConfig {
            dt,
            t_max,
            n_paths,
            master_seed,
            exit_rule: ExitRule::Bridge,
        }
    }

    pub fn with_horizon(&self, t_max: f64) -> SimConfig {
        SimConfig { t_max, ..*self }
    }

    pub fn with_seed(&self, master_seed: u64) -> SimConfig {
        SimConfig { master_seed, ..*self }
    }

    pub fn with_paths(&self, n_paths: usize) -> SimConfig {
        SimConfig { n_paths, ..*self }
    }

    pub fn problems(&self, op: &OperatorSpec, dom: &CylinderDomain) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            out.push(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.dt > self.t_max {
            out.push(format!("dt {} exceeds t_max {}", self.dt, self.t_max));
        }
        if self.n_paths == 0 {
            out.push("n_paths must be at least 1".into());
        }
        if op.beta_sup() * self.dt >= 0.1 * dom.stop_radius {
            out.push(format!(
                "dt {} too large: ||beta||_inf * dt = {} must stay below 0.1 * stop_radius",
                self.dt,
                op.beta_sup() * self.dt
            ));
        }
        out
    }

    pub fn validate(&self, op: &OperatorSpec, dom: &CylinderDomain) -> Result<()> {
        match self.problems(op, dom).as_slice() {
            [] => Ok(()),
            p => Err(invalid(p.join("; "))),
        }
    }
}

/// Final state of one path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PathEnd {
    pub displacement: f64,
    pub y: [f64; MAX_DIM],
    pub stop_time: f64,
    pub gamma_integral: f64,
    pub exited: bool,
}

fn check_start(start_y: &[f64], op: &OperatorSpec, radius: f64) -> Result<()> {
    if start_y.len() != op.dim_y() {
        return Err(invalid(format!(
            "start has {} transverse coordinates, operator needs {}",
            start_y.len(),
            op.dim_y()
        )));
    }
    let norm2: f64 = start_y.iter().map(|v| v * v).sum();
    if !(norm2 < radius * radius) {
        return Err(invalid(format!(
            "start y {start_y:?} is not strictly inside the ball of radius {radius}"
        )));
    }
    Ok(())
}

/// Runs one path. `observe(t, x, y)` sees the start and every grid-time state
/// up to and including the (projected) stopping state.
pub(crate) fn run_path(
    op: &OperatorSpec,
    radius: f64,
    start_x: f64,
    start_y: &[f64],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    mut observe: impl FnMut(f64, f64, &[f64]),
) -> Result<PathEnd> {
    let dim = start_y.len();
    let mut y = [0.0; MAX_DIM];
    y[..dim].copy_from_slice(start_y);
    let r2 = radius * radius;
    let n_full = (cfg.t_max / cfg.dt * (1.0 + 1e-12)).floor() as u64;
    let remainder = cfg.t_max - n_full as f64 * cfg.dt;
    let n_steps = if remainder > 1e-9 * cfg.dt { n_full + 1 } else { n_full };
    let sigma = (2.0 * cfg.dt).sqrt();

    let mut disp = 0.0;
    let mut gamma_integral = 0.0;
    let mut t = 0.0;
    let mut norm2: f64 = start_y.iter().map(|v| v * v).sum();
    observe(0.0, start_x, &y[..dim]);

    for k in 1..=n_steps {
        let (h, s, t_next) = if k <= n_full {
            (cfg.dt, sigma, k as f64 * cfg.dt)
        } else {
            (remainder, (2.0 * remainder).sqrt(), cfg.t_max)
        };
        let x = start_x + disp;
        let here = &y[..dim];
        let beta = op.beta_at(here).map_err(|e| at(x, here, e))?;
        if !op.gamma_is_zero() {
            gamma_integral += h * op.gamma_at(x, here).map_err(|e| at(x, here, e))?;
        }
        disp += beta * h;
        let prev_norm2 = norm2;
        norm2 = 0.0;
        for v in y[..dim].iter_mut() {
            let xi: f64 = rng.sample(StandardNormal);
            *v += s * xi;
            norm2 += *v * *v;
        }
        t = t_next;
        let mut exited = norm2 >= r2;
        if !exited && cfg.exit_rule == ExitRule::Bridge {
            let d0 = radius - prev_norm2.sqrt();
            let d1 = radius - norm2.sqrt();
            let a = d0 * d1 / h;
            if a < 40.0 {
                let u: f64 = rng.random();
                exited = u < (-a).exp();
            }
        }
        if exited {
            let scale = radius / norm2.sqrt();
            for v in y[..dim].iter_mut() {
                *v *= scale;
            }
            observe(t, start_x + disp, &y[..dim]);
            return Ok(PathEnd {
                displacement: disp,
                y,
                stop_time: t,
                gamma_integral,
                exited: true,
            });
        }
        observe(t, start_x + disp, &y[..dim]);
    }
    Ok(PathEnd {
        displacement: disp,
        y,
        stop_time: t,
        gamma_integral,
        exited: false,
    })
}

fn at(x: f64, y: &[f64], e: Error) -> Error {
    let mut p = vec![x];
    p.extend_from_slice(y);
    Error::at(p, e)
}

/// Mean with its standard error (sample standard deviation over `√n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Two passes in slice order, so the result does not depend on scheduling.
    pub fn from_slice(values: &[f64]) -> MeanEstimate {
        let n = values.len();
        if n == 0 {
            return MeanEstimate {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate { mean, std_error, n }
    }
}

/// Stopped states of a batch of paths from one start point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    start_x: f64,
    start_y: Vec<f64>,
    dim_y: usize,
    displacement: Vec<f64>,
    stopped_y: Vec<f64>,
    stop_time: Vec<f64>,
    gamma_integral: Vec<f64>,
    exited: Vec<bool>,
}

impl PathBatch {
    fn from_ends(start_x: f64, start_y: &[f64], ends: Vec<PathEnd>) -> PathBatch {
        let dim_y = start_y.len();
        let mut b = PathBatch {
            start_x,
            start_y: start_y.to_vec(),
            dim_y,
            displacement: Vec::with_capacity(ends.len()),
            stopped_y: Vec::with_capacity(ends.len() * dim_y),
            stop_time: Vec::with_capacity(ends.len()),
            gamma_integral: Vec::with_capacity(ends.len()),
            exited: Vec::with_capacity(ends.len()),
        };
        for e in ends {
            b.displacement.push(e.displacement);
            b.stopped_y.extend_from_slice(&e.y[..dim_y]);
            b.stop_time.push(e.stop_time);
            b.gamma_integral.push(e.gamma_integral);
            b.exited.push(e.exited);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.stop_time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stop_time.is_empty()
    }

    pub fn start_x(&self) -> f64 {
        self.start_x
    }

    pub fn start_y(&self) -> &[f64] {
        &self.start_y
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    /// `X_{t∧τ} - X_0`; identical across start abscissae under a shared seed.
    pub fn displacement(&self, i: usize) -> f64 {
        self.displacement[i]
    }

    pub fn stopped_x(&self, i: usize) -> f64 {
        self.start_x + self.displacement[i]
    }

    pub fn stopped_y(&self, i: usize) -> &[f64] {
        &self.stopped_y[i * self.dim_y..(i + 1) * self.dim_y]
    }

    pub fn stop_time(&self, i: usize) -> f64 {
        self.stop_time[i]
    }

    pub fn gamma_integral(&self, i: usize) -> f64 {
        self.gamma_integral[i]
    }

    pub fn exited(&self, i: usize) -> bool {
        self.exited[i]
    }

    pub fn exit_fraction(&self) -> f64 {
        self.exited.iter().filter(|&&e| e).count() as f64 / self.len() as f64
    }

    pub fn stop_time_stats(&self) -> MeanEstimate {
        MeanEstimate::from_slice(&self.stop_time)
    }

    /// Checks the per-path support, ball and potential bounds.
    pub fn check_invariants(&self, op: &OperatorSpec, radius: f64, dt: f64) -> std::result::Result<(), String> {
        let r2 = radius * radius * (1.0 + 1e-12);
        for i in 0..self.len() {
            let t = self.stop_time[i];
            let dx = self.displacement[i].abs();
            if dx > op.beta_sup() * (t + dt) {
                return Err(format!("path {i}: |dx| = {dx} exceeds ||beta|| (t + dt)"));
            }
            let n2: f64 = self.stopped_y(i).iter().map(|v| v * v).sum();
            if n2 > r2 {
                return Err(format!("path {i}: stopped y outside the closed ball"));
            }
            let g = self.gamma_integral[i].abs();
            if g > op.gamma_sup() * t + 1e-12 {
                return Err(format!("path {i}: |gamma integral| = {g} exceeds ||gamma|| t"));
            }
        }
        Ok(())
    }

    /// `path_id,stopped_x,stopped_y1..,stop_time,gamma_integral,exited`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path_id".to_string(), "stopped_x".to_string()];
        header.extend((1..=self.dim_y).map(|j| format!("stopped_y{j}")));
        header.extend(["stop_time", "gamma_integral", "exited"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string(), fmt_f64(self.stopped_x(i))];
            row.extend(self.stopped_y(i).iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(self.stop_time[i]));
            row.push(fmt_f64(self.gamma_integral[i]));
            row.push(u8::from(self.exited[i]).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `cfg.n_paths` paths from `(start_x, start_y)`; path `i` uses stream `i`.
pub fn simulate_batch(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    start_x: f64,
    start_y: &[f64],
    cfg: &SimConfig,
) -> Result<PathBatch> {
    cfg.validate(op, dom)?;
    simulate_batch_tagged(op, dom.stop_radius, start_x, start_y, cfg, 0)
}

pub(crate) fn simulate_batch_tagged(
    op: &OperatorSpec,
    radius: f64,
    start_x: f64,
    start_y: &[f64],
    cfg: &SimConfig,
    tag: u64,
) -> Result<PathBatch> {
    check_start(start_y, op, radius)?;
    let ends = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.master_seed, tag, i as u64);
            run_path(op, radius, start_x, start_y, cfg, &mut rng, |_, _, _| {})
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathBatch::from_ends(start_x, start_y, ends))
}

/// Grid-time states of a single path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    /// Flattened, `dim_y` values per time.
    pub ys: Vec<f64>,
}

/// Re-runs path `path_index` of [`simulate_batch`] and records every state.
pub fn simulate_trajectory(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    start_x: f64,
    start_y: &[f64],
    cfg: &SimConfig,
    path_index: usize,
) -> Result<Trajectory> {
    cfg.validate(op, dom)?;
    check_start(start_y, op, dom.stop_radius)?;
    let mut traj = Trajectory {
        times: Vec::new(),
        xs: Vec::new(),
        ys: Vec::new(),
    };
    let mut rng = path_rng(cfg.master_seed, 0, path_index as u64);
    run_path(op, dom.stop_radius, start_x, start_y, cfg, &mut rng, |t, x, y| {
        traj.times.push(t);
        traj.xs.push(x);
        traj.ys.extend_from_slice(y);
    })?;
    Ok(traj)
}

/// Histogram of stopped `y` over cubic cells of `[-R, R]^{N-1}`, plus an exit shell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub radius: f64,
    pub bins_per_axis: usize,
    pub dim_y: usize,
    pub counts: Vec<u64>,
    pub exit_count: u64,
    pub total: u64,
}

impl EmpiricalMeasure {
    pub fn from_batch(batch: &PathBatch, radius: f64, bins_per_axis: usize) -> Result<EmpiricalMeasure> {
        if bins_per_axis == 0 {
            return Err(invalid("need at least one bin per axis"));
        }
        let dim_y = batch.dim_y();
        let cells = bins_per_axis
            .checked_pow(dim_y as u32)
            .filter(|&c| c <= 10_000_000)
            .ok_or_else(|| invalid("too many histogram bins"))?;
        let mut m = EmpiricalMeasure {
            radius,
            bins_per_axis,
            dim_y,
            counts: vec![0; cells],
            exit_count: 0,
            total: batch.len() as u64,
        };
        for i in 0..batch.len() {
            if batch.exited(i) {
                m.exit_count += 1;
            } else {
                let k = m.bin_of(batch.stopped_y(i));
                m.counts[k] += 1;
            }
        }
        Ok(m)
    }

    pub fn bin_of(&self, y: &[f64]) -> usize {
        let width = 2.0 * self.radius / self.bins_per_axis as f64;
        y.iter().fold(0, |acc, &v| {
            let i = (((v + self.radius) / width).floor().max(0.0) as usize).min(self.bins_per_axis - 1);
            acc * self.bins_per_axis + i
        })
    }

    pub fn bin_center(&self, mut k: usize) -> Vec<f64> {
        let width = 2.0 * self.radius / self.bins_per_axis as f64;
        let mut c = vec![0.0; self.dim_y];
        for slot in c.iter_mut().rev() {
            *slot = -self.radius + (k % self.bins_per_axis) as f64 * width + width / 2.0;
            k /= self.bins_per_axis;
        }
        c
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.counts[k] as f64 / self.total as f64
    }

    pub fn exit_mass(&self) -> f64 {
        self.exit_count as f64 / self.total as f64
    }

    pub fn interior_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.total as f64
    }

    /// `bin,y1..,count,mass`; the last row is the exit shell with empty centre.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["bin".to_string()];
        header.extend((1..=self.dim_y).map(|j| format!("y{j}")));
        header.extend(["count", "mass"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.counts.len() {
            let mut row = vec![k.to_string()];
            row.extend(self.bin_center(k).into_iter().map(fmt_f64));
            row.push(self.counts[k].to_string());
            row.push(fmt_f64(self.mass(k)));
            w.write_record(&row)?;
        }
        let mut row = vec!["exit".to_string()];
        row.extend(std::iter::repeat_n(String::new(), self.dim_y));
        row.push(self.exit_count.to_string());
        row.push(fmt_f64(self.exit_mass()));
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

/// Empirical law of the stopped transverse process at horizon `t`.
pub fn estimate_nu(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    start_x: f64,
    y: &[f64],
    t: f64,
    cfg: &SimConfig,
    bins: usize,
) -> Result<EmpiricalMeasure> {
    let batch = simulate_batch(op, dom, start_x, y, &cfg.with_horizon(t))?;
    EmpiricalMeasure::from_batch(&batch, dom.stop_radius, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparability {
    pub h: f64,
    pub bins_used: usize,
    pub bins_excluded: usize,
    /// Bin attaining the minimum; `None` means the exit shell.
    pub worst_bin: Option<usize>,
}

/// Empirical `h_t`: the smallest two-sided mass ratio between the laws from `y1`
/// and `y2` over bins (exit shell included) holding at least `mass_floor`
/// counts in both histograms.
#[allow(clippy::too_many_arguments)]
pub fn comparability_constant(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    y1: &[f64],
    y2: &[f64],
    t: f64,
    cfg: &SimConfig,
    bins: usize,
    mass_floor: u64,
) -> Result<Comparability> {
    if !(t > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    for y in [y1, y2] {
        let n2: f64 = y.iter().map(|v| v * v).sum();
        if !(n2 < dom.inner_radius * dom.inner_radius) {
            return Err(invalid(format!("{y:?} is not strictly inside the inner ball")));
        }
    }
    let a = estimate_nu(op, dom, 0.0, y1, t, cfg, bins)?;
    let b = estimate_nu(op, dom, 0.0, y2, t, cfg, bins)?;
    let pairs = a
        .counts
        .iter()
        .zip(&b.counts)
        .enumerate()
        .map(|(k, (&p, &q))| (Some(k), p, q))
        .chain(std::iter::once((None, a.exit_count, b.exit_count)));
    let mut out = Comparability {
        h: f64::INFINITY,
        bins_used: 0,
        bins_excluded: 0,
        worst_bin: None,
    };
    for (k, p, q) in pairs {
        if p == 0 && q == 0 {
            continue;
        }
        if p < mass_floor || q < mass_floor {
            out.bins_excluded += 1;
            continue;
        }
        out.bins_used += 1;
        let (pm, qm) = (p as f64 / a.total as f64, q as f64 / b.total as f64);
        let ratio = (pm / qm).min(qm / pm);
        if ratio < out.h {
            out.h = ratio;
            out.worst_bin = k;
        }
    }
    if out.bins_used == 0 {
        return Err(invalid(format!(
            "no bin reaches {mass_floor} counts in both histograms; horizon too short for the bin size"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dom() -> CylinderDomain {
        CylinderDomain::default()
    }

    fn op(beta: &str, gamma: &str, n: usize) -> OperatorSpec {
        OperatorSpec::new(beta, gamma, n, &dom()).unwrap()
    }

    #[test]
    fn zero_drift_keeps_x() {
        let o = op("0", "0", 2);
        let b = simulate_batch(&o, &dom(), 0.7, &[0.3], &SimConfig::new(1e-2, 1.0, 500, 1)).unwrap();
        assert!((0..b.len()).all(|i| b.stopped_x(i) == 0.7));
    }

    #[test]
    fn config_and_start_validation() {
        let o = op("y1", "0", 2);
        assert!(simulate_batch(&o, &dom(), 0.0, &[2.0], &SimConfig::new(1e-3, 1.0, 10, 1)).is_err());
        assert!(simulate_batch(&o, &dom(), 0.0, &[0.0, 0.0], &SimConfig::new(1e-3, 1.0, 10, 1)).is_err());
        // ||beta|| = 3.15, so dt = 0.1 breaks the step-size bound
        let bad = SimConfig::new(0.1, 1.0, 10, 1);
        assert!(simulate_batch(&o, &dom(), 0.0, &[0.0], &bad).is_err());
        assert_eq!(SimConfig::new(2.0, 1.0, 0, 1).problems(&o, &dom()).len(), 3);
    }

    #[test]
    fn translation_in_x_is_exact() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-3, 0.5, 2_000, 9);
        let a = simulate_batch(&o, &dom(), 1.5, &[0.4], &cfg).unwrap();
        let b = simulate_batch(&o, &dom(), 0.0, &[0.4], &cfg).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.displacement(i), b.displacement(i));
            assert_eq!(a.stopped_y(i), b.stopped_y(i));
            assert_eq!(a.stop_time(i), b.stop_time(i));
            assert_eq!(a.exited(i), b.exited(i));
        }
    }

    #[test]
    fn batches_are_deterministic_across_thread_counts() {
        let o = op("sin(y1)", "0.5*cos(x)", 3);
        let cfg = SimConfig::new(1e-2, 1.0, 300, 4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_batch(&o, &dom(), 0.0, &[0.1, -0.2], &cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn invariants_hold_per_path() {
        let o = op("y1^2 - 1", "cos(x*y1)", 2);
        let cfg = SimConfig::new(1e-2, 3.0, 2_000, 5);
        let b = simulate_batch(&o, &dom(), 0.0, &[1.0], &cfg).unwrap();
        b.check_invariants(&o, dom().stop_radius, cfg.dt).unwrap();
        assert!(b.exit_fraction() > 0.5);
    }

    #[test]
    fn trajectory_matches_batch_path() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-2, 2.0, 20, 3);
        let b = simulate_batch(&o, &dom(), 0.0, &[0.5], &cfg).unwrap();
        for i in 0..20 {
            let tr = simulate_trajectory(&o, &dom(), 0.0, &[0.5], &cfg, i).unwrap();
            assert_eq!(*tr.times.last().unwrap(), b.stop_time(i));
            assert_eq!(*tr.xs.last().unwrap(), b.stopped_x(i));
            assert_eq!(*tr.ys.last().unwrap(), b.stopped_y(i)[0]);
            assert_eq!(tr.times[0], 0.0);
        }
    }

    #[test]
    fn horizon_not_multiple_of_dt_ends_at_horizon() {
        let o = op("0", "1", 2);
        let cfg = SimConfig::new(0.3, 1.0, 50, 2);
        let b = simulate_batch(&o, &dom(), 0.0, &[0.0], &cfg).unwrap();
        for i in 0..b.len() {
            if !b.exited(i) {
                assert_eq!(b.stop_time(i), 1.0);
                assert!((b.gamma_integral(i) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_horizon_marginal_variance() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-3, 0.1, 20_000, 17);
        let b = simulate_batch(&o, &dom(), 0.0, &[0.0], &cfg).unwrap();
        let ys: Vec<f64> = (0..b.len()).filter(|&i| !b.exited(i)).map(|i| b.stopped_y(i)[0]).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Var of the sample variance of a Gaussian: 2σ⁴/(n-1)
        let se = (2.0 * 0.2f64.powi(2) / (n - 1.0)).sqrt();
        assert!((var - 0.2).abs() < 3.0 * se, "var {var}");
        assert!(b.exit_fraction() < 1e-3);
        let nu = EmpiricalMeasure::from_batch(&b, 2.0, 20).unwrap();
        assert!((nu.interior_mass() + nu.exit_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nu_is_independent_of_start_x() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-3, 0.5, 3_000, 8);
        let a = estimate_nu(&o, &dom(), -2.0, &[0.3], 0.5, &cfg, 20).unwrap();
        let b = estimate_nu(&o, &dom(), 4.0, &[0.3], 0.5, &cfg, 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_horizon_mass_exits() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-2, 50.0, 5_000, 8);
        let nu = estimate_nu(&o, &dom(), 0.0, &[0.0], 50.0, &cfg, 20).unwrap();
        assert!(nu.exit_mass() > 1.0 - 1e-3);
    }

    #[test]
    fn histogram_bins_and_centres() {
        let m = EmpiricalMeasure {
            radius: 2.0,
            bins_per_axis: 4,
            dim_y: 2,
            counts: vec![0; 16],
            exit_count: 0,
            total: 1,
        };
        assert_eq!(m.bin_of(&[-2.0, -2.0]), 0);
        assert_eq!(m.bin_of(&[1.99, 2.0]), 15);
        assert_eq!(m.bin_center(m.bin_of(&[0.1, -0.1])), vec![0.5, -0.5]);
    }

    #[test]
    fn comparability_identities() {
        let o = op("y1", "0", 2);
        let cfg = SimConfig::new(1e-2, 1.0, 5_000, 21);
        let same = comparability_constant(&o, &dom(), &[0.2], &[0.2], 1.0, &cfg, 20, 20).unwrap();
        assert_eq!(same.h, 1.0);
        let ab = comparability_constant(&o, &dom(), &[-0.5], &[0.5], 1.0, &cfg, 20, 20).unwrap();
        let ba = comparability_constant(&o, &dom(), &[0.5], &[-0.5], 1.0, &cfg, 20, 20).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.h > 0.0 && ab.h <= 1.0);
        assert!(comparability_constant(&o, &dom(), &[1.5], &[0.0], 1.0, &cfg, 20, 20).is_err());
        let tiny = SimConfig::new(1e-3, 1e-3, 10, 1);
        assert!(comparability_constant(&o, &dom(), &[0.0], &[0.1], 1e-3, &tiny, 20, 20).is_err());
    }

    #[test]
    fn csv_row_count_matches_paths() {
        let o = op("y1", "0", 2);
        let b = simulate_batch(&o, &dom(), 0.0, &[0.0], &SimConfig::new(1e-2, 0.5, 37, 1)).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 38);
        assert!(text.starts_with("path_id,stopped_x,stopped_y1,stop_time,gamma_integral,exited\n"));
    }
}
