//! Monte Carlo evaluation of `E[exp(∫γ) u(X_{t∧τ}, Y_{t∧τ})]`, the two-sided
//! comparison `e^{-t} E[u] ≤ u ≤ e^{t} E[u]`, and fields manufactured from
//! positive boundary data.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{Grid, PointFunction, ScalarField};
use crate::operator::{CylinderDomain, OperatorSpec};
use crate::rng::path_rng;
use crate::sde::{run_path, simulate_batch, MeanEstimate, PathBatch, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: f64,
}

/// Horizon `1/‖β‖∞` (grid estimate); `1` when `β ≡ 0`.
pub fn default_horizon(op: &OperatorSpec) -> f64 {
    if op.beta_max() > 0.0 {
        1.0 / op.beta_max()
    } else {
        1.0
    }
}

fn payoffs<F>(batch: &PathBatch, u: &F, weighted: bool) -> Result<Vec<f64>>
where
    F: PointFunction + ?Sized,
{
    (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = (batch.stopped_x(i), batch.stopped_y(i));
            let v = u.value(x, y).map_err(|e| {
                let mut p = vec![x];
                p.extend_from_slice(y);
                Error::at(p, e)
            })?;
            Ok(if weighted { batch.gamma_integral(i).exp() * v } else { v })
        })
        .collect()
}

/// Mean and standard error of `exp(∫γ)·u` at the stopped states of a fresh batch.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<F>(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    u_data: &F,
    start_x: f64,
    start_y: &[f64],
    t: f64,
    cfg: &SimConfig,
) -> Result<FkEstimate>
where
    F: PointFunction + ?Sized,
{
    let cfg = cfg.with_horizon(t);
    let batch = simulate_batch(op, dom, start_x, start_y, &cfg)?;
    let est = MeanEstimate::from_slice(&payoffs(&batch, u_data, true)?);
    Ok(FkEstimate {
        value: est.mean,
        std_error: est.std_error,
        n_paths: est.n,
        horizon: t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichVerdict {
    pub start: Vec<f64>,
    pub horizon: f64,
    pub k_sigma: f64,
    pub u_start: f64,
    /// Unweighted mean of `u` at the stopped states.
    pub mean: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Checks `e^{-t}(E - kσ) ≤ u(start) ≤ e^{t}(E + kσ)` with `E` the unweighted
/// mean of the interpolated field at the stopped states. Needs `‖γ‖∞ ≤ 1`.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_check(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    u: &ScalarField,
    start_x: f64,
    start_y: &[f64],
    t: f64,
    cfg: &SimConfig,
    k_sigma: f64,
) -> Result<SandwichVerdict> {
    if op.gamma_max() > 1.0 + 1e-12 {
        return Err(invalid(format!(
            "sandwich needs ||gamma||_inf <= 1, estimated {}; rescale gamma first",
            op.gamma_max()
        )));
    }
    if !(k_sigma >= 0.0) {
        return Err(invalid("k_sigma must be non-negative"));
    }
    let u_start = u.interpolate(start_x, start_y)?;
    let batch = simulate_batch(op, dom, start_x, start_y, &cfg.with_horizon(t))?;
    let est = MeanEstimate::from_slice(&payoffs(&batch, &Interp(u), false)?);
    let lower = (-t).exp() * (est.mean - k_sigma * est.std_error);
    let upper = t.exp() * (est.mean + k_sigma * est.std_error);
    let mut start = vec![start_x];
    start.extend_from_slice(start_y);
    Ok(SandwichVerdict {
        start,
        horizon: t,
        k_sigma,
        u_start,
        mean: est.mean,
        std_error: est.std_error,
        lower,
        upper,
        pass: lower <= u_start && u_start <= upper,
    })
}

struct Interp<'a>(&'a ScalarField);

impl PointFunction for Interp<'_> {
    fn value(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.0.interpolate(x, y)
    }
}

/// A manufactured field and its node-wise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedField {
    pub value: ScalarField,
    pub std_error: ScalarField,
}

/// At every node strictly inside the stopping ball, the mean of `exp(∫γ)·g` at
/// the stopped state (exit or horizon). Other nodes are left absent. Node `k`
/// draws its paths from stream tag `k + 1`.
pub fn make_solution<F>(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    g: &F,
    t_solve: f64,
    cfg: &SimConfig,
    grid: &Grid,
) -> Result<ManufacturedField>
where
    F: PointFunction + ?Sized,
{
    let cfg = cfg.with_horizon(t_solve);
    cfg.validate(op, dom)?;
    if grid.dim_y() != op.dim_y() {
        return Err(invalid(format!(
            "grid has {} transverse axes, operator needs {}",
            grid.dim_y(),
            op.dim_y()
        )));
    }
    let r2 = dom.stop_radius * dom.stop_radius;
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            let (x, y) = (p[0], &p[1..]);
            if !(y.iter().map(|v| v * v).sum::<f64>() < r2) {
                return Ok((f64::NAN, f64::NAN));
            }
            let mut vals = Vec::with_capacity(cfg.n_paths);
            for i in 0..cfg.n_paths {
                let mut rng = path_rng(cfg.master_seed, k as u64 + 1, i as u64);
                let end = run_path(op, dom.stop_radius, x, y, &cfg, &mut rng, |_, _, _| {})?;
                let (sx, sy) = (x + end.displacement, &end.y[..y.len()]);
                let v = g.value(sx, sy).map_err(|e| {
                    let mut q = vec![sx];
                    q.extend_from_slice(sy);
                    Error::at(q, e)
                })?;
                if !(v > 0.0) {
                    let mut q = vec![sx];
                    q.extend_from_slice(sy);
                    return Err(Error::NonPositive { value: v, point: q });
                }
                vals.push(end.gamma_integral.exp() * v);
            }
            let est = MeanEstimate::from_slice(&vals);
            Ok((est.mean, est.std_error))
        })
        .collect::<Result<Vec<_>>>()?;
    let (value, se): (Vec<f64>, Vec<f64>) = nodes.into_iter().unzip();
    Ok(ManufacturedField {
        value: ScalarField::new(grid.clone(), value)?,
        std_error: ScalarField::new(grid.clone(), se)?,
    })
}
