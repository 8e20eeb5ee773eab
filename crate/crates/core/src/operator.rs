//! The operator `L = Δ_y + β(y) ∂_x` with potential `γ(x, y)`, its cylinder
//! domain, and the checks made on `β` before anything is simulated.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::field::{ball_lattice, lattice_points, Axis, ScalarField, MAX_DIM};

/// Derivative mass at or below this counts as vanishing.
pub const DERIVATIVE_MASS_TOLERANCE: f64 = 1e-12;
/// Grid maxima are inflated by this factor to give sup-norm upper bounds.
pub const SUP_SAFETY_FACTOR: f64 = 1.05;
/// Highest derivative order searched when reporting the smallest passing order.
pub const MAX_SEARCH_ORDER: u32 = 4;

/// Names of the transverse variables for an `n`-dimensional problem: `y1 .. y{n-1}`.
pub fn y_names(dim_n: usize) -> Vec<String> {
    (1..dim_n).map(|j| format!("y{j}")).collect()
}

/// `x` followed by [`y_names`].
pub fn all_names(dim_n: usize) -> Vec<String> {
    std::iter::once("x".to_string()).chain(y_names(dim_n)).collect()
}

/// Cylinder `(x_lo, x_hi) × B_radius` with the subcylinder `[sub_x_lo, sub_x_hi] × B_inner_radius`
/// and the ball `B_stop_radius` whose exit stops the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderDomain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub sub_x_lo: f64,
    pub sub_x_hi: f64,
    pub radius: f64,
    pub stop_radius: f64,
    pub inner_radius: f64,
}

impl Default for CylinderDomain {
    fn default() -> Self {
        CylinderDomain {
            x_lo: -5.0,
            x_hi: 6.0,
            sub_x_lo: 0.0,
            sub_x_hi: 1.0,
            radius: 3.0,
            stop_radius: 2.0,
            inner_radius: 1.0,
        }
    }
}

impl CylinderDomain {
    /// All violated constraints, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let all = [
            self.x_lo,
            self.x_hi,
            self.sub_x_lo,
            self.sub_x_hi,
            self.radius,
            self.stop_radius,
            self.inner_radius,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            out.push("domain values must be finite".to_string());
            return out;
        }
        if !(self.x_lo < self.sub_x_lo && self.sub_x_lo < self.sub_x_hi && self.sub_x_hi < self.x_hi) {
            out.push(format!(
                "need a < a' < b' < b, got a={}, a'={}, b'={}, b={}",
                self.x_lo, self.sub_x_lo, self.sub_x_hi, self.x_hi
            ));
        }
        if !(0.0 < self.inner_radius
            && self.inner_radius < self.stop_radius
            && self.stop_radius <= self.radius)
        {
            out.push(format!(
                "need 0 < inner_radius < stop_radius <= radius, got {}, {}, {}",
                self.inner_radius, self.stop_radius, self.radius
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.problems().as_slice() {
            [] => Ok(()),
            p => Err(invalid(p.join("; "))),
        }
    }

    pub fn shifted_x(&self, dx: f64) -> CylinderDomain {
        CylinderDomain {
            x_lo: self.x_lo + dx,
            x_hi: self.x_hi + dx,
            sub_x_lo: self.sub_x_lo + dx,
            sub_x_hi: self.sub_x_hi + dx,
            ..*self
        }
    }
}

/// `β`, `γ` and the dimension, with sup-norm estimates taken on a verification grid.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    beta: Expr,
    gamma: Expr,
    dim_n: usize,
    beta_const: Option<f64>,
    gamma_const: Option<f64>,
    beta_max: f64,
    gamma_max: f64,
}

impl OperatorSpec {
    /// Parses `β` over `y1..` and `γ` over `x, y1..`, then estimates the sup norms
    /// on the closed cylinder `[x_lo, x_hi] × closed B_radius`.
    pub fn new(beta: &str, gamma: &str, dim_n: usize, dom: &CylinderDomain) -> Result<OperatorSpec> {
        if !(2..=MAX_DIM).contains(&dim_n) {
            return Err(invalid(format!("dimension N must be in 2..={MAX_DIM}, got {dim_n}")));
        }
        let beta = Expr::parse(beta, &y_names(dim_n))?;
        let gamma = Expr::parse(gamma, &all_names(dim_n))?;
        Self::from_exprs(beta, gamma, dim_n, dom)
    }

    pub fn from_exprs(beta: Expr, gamma: Expr, dim_n: usize, dom: &CylinderDomain) -> Result<OperatorSpec> {
        dom.validate()?;
        if beta.variables() != y_names(dim_n).as_slice() {
            return Err(invalid("beta must be declared over y1..y{N-1}"));
        }
        if gamma.variables() != all_names(dim_n).as_slice() {
            return Err(invalid("gamma must be declared over x, y1..y{N-1}"));
        }
        let mut spec = OperatorSpec {
            beta_const: beta.as_constant(),
            gamma_const: gamma.as_constant(),
            beta,
            gamma,
            dim_n,
            beta_max: 0.0,
            gamma_max: 0.0,
        };
        spec.estimate_norms(dom)?;
        Ok(spec)
    }

    fn estimate_norms(&mut self, dom: &CylinderDomain) -> Result<()> {
        let dim_y = self.dim_y();
        // Keep the transverse lattice near 10^5 points whatever the dimension.
        let per_axis = ((1e5f64).powf(1.0 / dim_y as f64).floor() as usize).clamp(5, 121) | 1;
        let ys = ball_lattice(dom.radius, dim_y, per_axis, true);
        let xs: Vec<f64> = if self.gamma.depends_on("x") {
            let ax = Axis::new(dom.x_lo, dom.x_hi, 101)?;
            (0..ax.n).map(|i| ax.coord(i)).collect()
        } else {
            vec![dom.x_lo]
        };
        let mut beta_max: f64 = 0.0;
        let mut gamma_max: f64 = 0.0;
        for y in &ys {
            beta_max = beta_max.max(self.beta_at(y).map_err(|e| Error::at(y.clone(), e))?.abs());
            for &x in &xs {
                let g = self.gamma_at(x, y).map_err(|e| {
                    let mut p = vec![x];
                    p.extend_from_slice(y);
                    Error::at(p, e)
                })?;
                gamma_max = gamma_max.max(g.abs());
            }
        }
        self.beta_max = beta_max;
        self.gamma_max = gamma_max;
        Ok(())
    }

    pub fn beta(&self) -> &Expr {
        &self.beta
    }

    pub fn gamma(&self) -> &Expr {
        &self.gamma
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn dim_y(&self) -> usize {
        self.dim_n - 1
    }

    /// Grid maximum of `|β|` on the closed domain ball.
    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    /// Upper bound used for `‖β‖∞`.
    pub fn beta_sup(&self) -> f64 {
        self.beta_max * SUP_SAFETY_FACTOR
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn gamma_sup(&self) -> f64 {
        self.gamma_max * SUP_SAFETY_FACTOR
    }

    pub fn gamma_is_zero(&self) -> bool {
        self.gamma_const == Some(0.0)
    }

    #[inline]
    pub fn beta_at(&self, y: &[f64]) -> Result<f64> {
        match self.beta_const {
            Some(c) => Ok(c),
            None => Ok(self.beta.eval(y)?),
        }
    }

    #[inline]
    pub fn gamma_at(&self, x: f64, y: &[f64]) -> Result<f64> {
        match self.gamma_const {
            Some(c) => Ok(c),
            None => {
                let mut buf = [0.0; MAX_DIM];
                buf[0] = x;
                buf[1..=y.len()].copy_from_slice(y);
                Ok(self.gamma.eval(&buf[..=y.len()])?)
            }
        }
    }

    /// Same operator with `γ` replaced.
    pub fn with_gamma(&self, gamma: &str, dom: &CylinderDomain) -> Result<OperatorSpec> {
        OperatorSpec::new(&self.beta.to_string(), gamma, self.dim_n, dom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainFailure {
    pub point: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HormanderReport {
    pub pass: bool,
    pub r: u32,
    pub min_derivative_mass: f64,
    /// Lattice point of minimal derivative mass.
    pub min_mass_at: Vec<f64>,
    /// `[y⁻, y⁺]`: points where `β < 0` and `β > 0`, when they exist.
    pub sign_witnesses: [Option<Vec<f64>>; 2],
    pub sign_change_ok: bool,
    pub beta_min: f64,
    pub beta_max: f64,
    /// Smallest order (searched up to `max(r, 4)`) at which the derivative mass stays positive.
    pub smallest_passing_r: Option<u32>,
    pub grid_step: f64,
    pub grid_points: usize,
    pub tolerance: f64,
    pub domain_error: Option<DomainFailure>,
}

impl HormanderReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// All partial derivatives `D^ζ β` with `|ζ| <= order`, grouped by order.
pub fn derivatives_by_order(beta: &Expr, order: u32) -> Result<Vec<Vec<Expr>>> {
    let names = beta.variables().to_vec();
    // Each multi-index is generated once by differentiating in non-decreasing variable order.
    let mut levels: Vec<Vec<(usize, Expr)>> = vec![vec![(0, beta.clone())]];
    for _ in 0..order {
        let prev = levels.last().expect("level zero exists");
        let mut next = Vec::new();
        for (last, e) in prev {
            for (j, name) in names.iter().enumerate().skip(*last) {
                next.push((j, e.differentiate(name)?));
            }
        }
        levels.push(next);
    }
    Ok(levels
        .into_iter()
        .map(|level| level.into_iter().map(|(_, e)| e).collect())
        .collect())
}

/// Checks `inf β < 0 < sup β` and `Σ_{|ζ|<=r} |D^ζ β| > 0` on a lattice of the closed domain ball.
pub fn check_hypothesis(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    r: u32,
    grid_step: f64,
) -> Result<HormanderReport> {
    if !(grid_step > 0.0) {
        return Err(invalid("grid_step must be positive"));
    }
    let n = lattice_points(dom.radius, grid_step);
    if 2.0 * dom.radius / grid_step < 9.0 {
        return Err(invalid(format!(
            "grid_step {grid_step} resolves the ball of radius {} with fewer than 10 points per axis",
            dom.radius
        )));
    }
    let actual_step = 2.0 * dom.radius / (n - 1) as f64;
    let search = r.max(MAX_SEARCH_ORDER);
    let derivs = derivatives_by_order(op.beta(), search)?;
    let points = ball_lattice(dom.radius, op.dim_y(), n, true);

    let mut min_mass = vec![f64::INFINITY; search as usize + 1];
    let mut min_mass_at = vec![Vec::new(); search as usize + 1];
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut at_min, mut at_max) = (Vec::new(), Vec::new());
    let mut domain_error = None;

    'points: for y in &points {
        let mut mass = 0.0;
        for (k, level) in derivs.iter().enumerate() {
            for d in level {
                match d.eval(y) {
                    Ok(v) => mass += v.abs(),
                    Err(e) => {
                        domain_error = Some(DomainFailure {
                            point: y.clone(),
                            message: e.to_string(),
                        });
                        break 'points;
                    }
                }
            }
            if mass < min_mass[k] {
                min_mass[k] = mass;
                min_mass_at[k] = y.clone();
            }
        }
        let b = op.beta_at(y)?;
        if b < bmin {
            bmin = b;
            at_min = y.clone();
        }
        if b > bmax {
            bmax = b;
            at_max = y.clone();
        }
    }

    let sign_change_ok = domain_error.is_none() && bmin < 0.0 && bmax > 0.0;
    let smallest = min_mass
        .iter()
        .position(|&m| m > DERIVATIVE_MASS_TOLERANCE)
        .map(|k| k as u32);
    let ok_mass = min_mass[r as usize] > DERIVATIVE_MASS_TOLERANCE;
    Ok(HormanderReport {
        pass: domain_error.is_none() && sign_change_ok && ok_mass,
        r,
        min_derivative_mass: min_mass[r as usize],
        min_mass_at: std::mem::take(&mut min_mass_at[r as usize]),
        sign_witnesses: [
            (bmin < 0.0).then_some(at_min),
            (bmax > 0.0).then_some(at_max),
        ],
        sign_change_ok,
        beta_min: bmin,
        beta_max: bmax,
        smallest_passing_r: if domain_error.is_none() { smallest } else { None },
        grid_step: actual_step,
        grid_points: points.len(),
        tolerance: DERIVATIVE_MASS_TOLERANCE,
        domain_error,
    })
}

/// The drift regions `A_d^± = { y ∈ B_inner : ±β(y) > d }` on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSet {
    pub d: f64,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
    pub neither: usize,
    pub warning: Option<String>,
}

impl RegionSet {
    pub fn both_nonempty(&self) -> bool {
        !self.plus.is_empty() && !self.minus.is_empty()
    }
}

pub fn classify_regions(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    d: f64,
    grid_step: f64,
) -> Result<RegionSet> {
    if !(d > 0.0) {
        return Err(invalid(format!("level d must be positive, got {d}")));
    }
    if !(grid_step > 0.0) {
        return Err(invalid("grid_step must be positive"));
    }
    let n = lattice_points(dom.inner_radius, grid_step);
    let mut set = RegionSet {
        d,
        plus: Vec::new(),
        minus: Vec::new(),
        neither: 0,
        warning: None,
    };
    for y in ball_lattice(dom.inner_radius, op.dim_y(), n, false) {
        let b = op.beta_at(&y).map_err(|e| Error::at(y.clone(), e))?;
        if b > d {
            set.plus.push(y);
        } else if -b > d {
            set.minus.push(y);
        } else {
            set.neither += 1;
        }
    }
    let empty: Vec<&str> = [("A_d^+", set.plus.is_empty()), ("A_d^-", set.minus.is_empty())]
        .iter()
        .filter(|(_, e)| *e)
        .map(|(n, _)| *n)
        .collect();
    if !empty.is_empty() {
        set.warning = Some(format!("{} empty at d = {d}", empty.join(" and ")));
    }
    Ok(set)
}

/// Central-difference residual `Δ_y u + β u_x + γ u` at interior nodes. Boundary
/// nodes, and nodes next to absent values, are absent in the result.
pub fn residual(u: &ScalarField, op: &OperatorSpec) -> Result<ScalarField> {
    let grid = u.grid();
    if grid.axes.len() != op.dim_n() {
        return Err(invalid(format!(
            "field has {} axes, operator dimension is {}",
            grid.axes.len(),
            op.dim_n()
        )));
    }
    if let Some(a) = grid.axes.iter().find(|a| a.n < 3) {
        return Err(invalid(format!("grid too small: axis with {} points", a.n)));
    }
    let vals = u.values();
    let strides: Vec<usize> = (0..grid.axes.len()).map(|d| grid.stride(d)).collect();
    let steps: Vec<f64> = grid.axes.iter().map(|a| a.step()).collect();
    let mut out = vec![f64::NAN; vals.len()];
    let mut idx = vec![0usize; grid.axes.len()];
    for (k, slot) in out.iter_mut().enumerate() {
        grid.unravel(k, &mut idx);
        if idx.iter().zip(&grid.axes).any(|(&i, a)| i == 0 || i + 1 == a.n) {
            continue;
        }
        let c = vals[k];
        let xp = vals[k + strides[0]];
        let xm = vals[k - strides[0]];
        let mut lap = 0.0;
        let mut missing = c.is_nan() || xp.is_nan() || xm.is_nan();
        for d in 1..grid.axes.len() {
            let (p, m) = (vals[k + strides[d]], vals[k - strides[d]]);
            missing |= p.is_nan() || m.is_nan();
            lap += (p - 2.0 * c + m) / (steps[d] * steps[d]);
        }
        if missing {
            continue;
        }
        let point = grid.point(k);
        let beta = op.beta_at(&point[1..]).map_err(|e| Error::at(point.clone(), e))?;
        let gamma = op
            .gamma_at(point[0], &point[1..])
            .map_err(|e| Error::at(point.clone(), e))?;
        *slot = lap + beta * (xp - xm) / (2.0 * steps[0]) + gamma * c;
    }
    ScalarField::new(grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FnPoint, Grid};
    use proptest::prelude::*;

    fn dom3() -> CylinderDomain {
        CylinderDomain::default()
    }

    fn op(beta: &str, gamma: &str, n: usize) -> OperatorSpec {
        OperatorSpec::new(beta, gamma, n, &dom3()).unwrap()
    }

    #[test]
    fn default_domain_is_valid_and_bad_ones_report_every_problem() {
        assert!(dom3().validate().is_ok());
        let bad = CylinderDomain {
            sub_x_lo: 2.0,
            sub_x_hi: 1.0,
            inner_radius: 2.5,
            ..dom3()
        };
        assert_eq!(bad.problems().len(), 2);
    }

    #[test]
    fn sup_norm_estimates() {
        let o = op("y1", "sin(x)", 2);
        assert_eq!(o.beta_max(), 3.0);
        assert!((o.beta_sup() - 3.15).abs() < 1e-12);
        assert!(o.gamma_max() <= 1.0 && o.gamma_max() > 0.99);
        let c = op("1", "0", 2);
        assert_eq!(c.beta_max(), 1.0);
        assert!(c.gamma_is_zero());
        assert!(OperatorSpec::new("x", "0", 2, &dom3()).is_err());
        assert!(OperatorSpec::new("y1", "0", 1, &dom3()).is_err());
    }

    #[test]
    fn hypothesis_linear_beta_passes() {
        let rep = check_hypothesis(&op("y1", "0", 2), &dom3(), 1, 0.05).unwrap();
        assert!(rep.pass);
        assert!(rep.sign_change_ok);
        assert_eq!(rep.sign_witnesses[0].as_deref(), Some(&[-3.0][..]));
        assert_eq!(rep.sign_witnesses[1].as_deref(), Some(&[3.0][..]));
        assert_eq!(rep.min_derivative_mass, 1.0);
        assert_eq!(rep.smallest_passing_r, Some(1));
    }

    #[test]
    fn hypothesis_square_fails_sign_change() {
        let rep = check_hypothesis(&op("y1^2", "0", 2), &dom3(), 2, 0.05).unwrap();
        assert!(!rep.pass);
        assert!(!rep.sign_change_ok);
        assert_eq!(rep.beta_min, 0.0);
        assert!(rep.sign_witnesses[0].is_none());
        // y^2 + |2y| + 2 never vanishes
        assert!(rep.min_derivative_mass >= 2.0);
    }

    #[test]
    fn hypothesis_sine_in_two_transverse_dims() {
        let rep = check_hypothesis(&op("sin(y1)", "0", 3), &dom3(), 1, 0.1).unwrap();
        assert!(rep.pass);
        // brute force: min of |sin t| + |cos t| over the lattice coordinates
        let n = lattice_points(3.0, 0.1);
        let ax = Axis::new(-3.0, 3.0, n).unwrap();
        let brute = (0..n)
            .map(|i| ax.coord(i))
            .map(|t| t.sin().abs() + t.cos().abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(rep.min_derivative_mass, brute);
        assert!((brute - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hypothesis_degenerate_and_error_cases() {
        // y^3 needs third derivatives at the origin
        let rep = check_hypothesis(&op("y1^3", "0", 2), &dom3(), 2, 0.05).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.min_derivative_mass, 0.0);
        assert_eq!(rep.smallest_passing_r, Some(3));
        let rep3 = check_hypothesis(&op("y1^3", "0", 2), &dom3(), 3, 0.05).unwrap();
        assert!(rep3.pass);
        assert!(check_hypothesis(&op("y1", "0", 2), &dom3(), 1, 1.0).is_err());
        let sq = OperatorSpec::new("y1", "0", 2, &dom3()).unwrap();
        let bad = OperatorSpec { beta: Expr::parse("sqrt(y1)", &["y1"]).unwrap(), beta_const: None, ..sq };
        let rep = check_hypothesis(&bad, &dom3(), 1, 0.05).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.domain_error.unwrap().point, vec![-3.0]);
    }

    #[test]
    fn hypothesis_verdict_stable_under_refinement() {
        for (beta, n, r) in [("y1", 2, 1), ("y1^2", 2, 2), ("sin(y1)", 3, 1), ("y1 - y2^2", 3, 2), ("1 + 0*y1", 2, 2)] {
            let o = op(beta, "0", n);
            let coarse = check_hypothesis(&o, &dom3(), r, 0.2).unwrap();
            let fine = check_hypothesis(&o, &dom3(), r, 0.1).unwrap();
            assert_eq!(coarse.pass, fine.pass, "{beta}");
        }
    }

    #[test]
    fn json_has_contract_fields() {
        let rep = check_hypothesis(&op("y1", "0", 2), &dom3(), 1, 0.05).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        for key in ["pass", "r", "min_derivative_mass", "sign_witnesses", "grid_step"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["sign_witnesses"][0][0], -3.0);
    }

    #[test]
    fn regions_for_linear_beta() {
        let set = classify_regions(&op("y1", "0", 2), &dom3(), 0.5, 0.05).unwrap();
        assert!(set.warning.is_none());
        assert!(set.plus.iter().all(|p| p[0] > 0.5 && p[0] < 1.0));
        assert!(set.minus.iter().all(|p| p[0] < -0.5 && p[0] > -1.0));
        assert_eq!(set.plus.len(), 9);
        assert_eq!(set.minus.len(), 9);
        let none = classify_regions(&op("y1", "0", 2), &dom3(), 2.0, 0.05).unwrap();
        assert!(none.plus.is_empty() && none.minus.is_empty());
        assert!(none.warning.is_some());
        assert!(classify_regions(&op("y1", "0", 2), &dom3(), 0.0, 0.05).is_err());
    }

    #[test]
    fn regions_for_sine() {
        let o = op("sin(y1)", "0", 3);
        // sin(1) < 0.9, so nothing inside the unit ball clears this level
        let high = classify_regions(&o, &dom3(), 0.9, 0.05).unwrap();
        assert!(high.plus.is_empty() && high.minus.is_empty());
        assert!(high.warning.is_some());
        let mid = classify_regions(&o, &dom3(), 0.5, 0.05).unwrap();
        assert!(mid.both_nonempty());
        assert_eq!(mid.plus.len(), mid.minus.len());
    }

    proptest! {
        #[test]
        fn regions_monotone_in_level(d1 in 0.01f64..1.0, gap in 0.0f64..1.0) {
            let o = op("y1 + 0.3*sin(3*y2)", "0", 3);
            let d2 = d1 + gap;
            let a = classify_regions(&o, &dom3(), d1, 0.1).unwrap();
            let b = classify_regions(&o, &dom3(), d2, 0.1).unwrap();
            prop_assert!(b.plus.iter().all(|p| a.plus.contains(p)));
            prop_assert!(b.minus.iter().all(|p| a.minus.contains(p)));
        }
    }

    fn max_residual(u: &ScalarField, o: &OperatorSpec) -> f64 {
        residual(u, o).unwrap().max_abs()
    }

    #[test]
    fn residual_of_constant_is_exactly_zero() {
        let o = op("y1", "0", 2);
        let g = Grid::cylinder(-5.0, 6.0, 3.0, 1, 13, 17).unwrap();
        let u = ScalarField::sample(&g, &FnPoint(|_: f64, _: &[f64]| 1.0)).unwrap();
        let r = residual(&u, &o).unwrap();
        assert_eq!(r.max_abs(), 0.0);
        assert_eq!(r.present().count(), 11 * 15);
    }

    #[test]
    fn residual_of_kolmogorov_polynomial_vanishes() {
        let o = op("y1", "0", 2);
        let u = FnPoint(|x: f64, y: &[f64]| x - y[0].powi(3) / 6.0 + 10.0);
        for (nx, ny) in [(3, 3), (12, 7), (101, 101), (301, 201)] {
            let g = Grid::cylinder(-5.0, 6.0, 3.0, 1, nx, ny).unwrap();
            let f = ScalarField::sample(&g, &u).unwrap();
            assert!(max_residual(&f, &o) <= 1e-9, "{nx}x{ny}");
        }
    }

    #[test]
    fn residual_converges_at_second_order() {
        let o = op("1", "0", 2);
        let u = FnPoint(|x: f64, y: &[f64]| (-4.0 * x).exp() * (2.0 * y[0]).cosh());
        let errs: Vec<f64> = [41, 81, 161]
            .iter()
            .map(|&n| {
                let g = Grid::cylinder(0.0, 1.0, 1.0, 1, n, n).unwrap();
                max_residual(&ScalarField::sample(&g, &u).unwrap(), &o)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn residual_rejects_tiny_or_mismatched_grids() {
        let o = op("y1", "0", 2);
        let g = Grid::cylinder(0.0, 1.0, 1.0, 1, 2, 5).unwrap();
        let f = ScalarField::sample(&g, &FnPoint(|_: f64, _: &[f64]| 1.0)).unwrap();
        assert!(residual(&f, &o).is_err());
        let g3 = Grid::cylinder(0.0, 1.0, 1.0, 2, 5, 5).unwrap();
        let f3 = ScalarField::sample(&g3, &FnPoint(|_: f64, _: &[f64]| 1.0)).unwrap();
        assert!(residual(&f3, &o).is_err());
    }
}
