//! Sup/inf ratios of positive solutions over subcylinders, and the diagnostics
//! built on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::feynman_kac::make_solution;
use crate::field::{ball_lattice, lattice_points, Axis, Grid, PointFunction, ScalarField};
use crate::operator::{classify_regions, CylinderDomain, OperatorSpec};
use crate::sde::SimConfig;
use crate::solutions::{
    constant, counterexample_on, kolmogorov_poly_on, random_positive_data, separable_on, AnalyticSolution, Validity,
};

/// Closed subcylinder `[x_lo, x_hi] × closed ball of radius` in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Subcylinder {
    pub x_lo: f64,
    pub x_hi: f64,
    pub radius: f64,
}

impl Subcylinder {
    pub fn of(dom: &CylinderDomain) -> Subcylinder {
        Subcylinder {
            x_lo: dom.sub_x_lo,
            x_hi: dom.sub_x_hi,
            radius: dom.inner_radius,
        }
    }

    pub fn shifted_x(&self, dx: f64) -> Subcylinder {
        Subcylinder {
            x_lo: self.x_lo + dx,
            x_hi: self.x_hi + dx,
            ..*self
        }
    }

    pub fn validity(&self) -> Validity {
        Validity {
            x_lo: self.x_lo,
            x_hi: self.x_hi,
            radius: self.radius,
        }
    }

    fn contains(&self, x: f64, y: &[f64]) -> bool {
        let tol = 1e-12 * (1.0 + self.x_lo.abs().max(self.x_hi.abs()));
        let r2 = self.radius * self.radius * (1.0 + 1e-12);
        x >= self.x_lo - tol && x <= self.x_hi + tol && y.iter().map(|v| v * v).sum::<f64>() <= r2
    }
}

/// Node counts for sampling a function on a subcylinder. `ny` nodes span
/// `[-R, R]` on each transverse axis; nodes outside the closed ball are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubGrid {
    pub nx: usize,
    pub ny: usize,
}

impl Default for SubGrid {
    fn default() -> SubGrid {
        SubGrid { nx: 101, ny: 101 }
    }
}

impl SubGrid {
    pub fn grid(&self, sub: &Subcylinder, dim_y: usize) -> Result<Grid> {
        Grid::cylinder(sub.x_lo, sub.x_hi, sub.radius, dim_y, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub solution: String,
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
    pub argmax: Vec<f64>,
    pub argmin: Vec<f64>,
    pub subdomain: Subcylinder,
    pub nodes: usize,
}

/// Extrema over `(flat index, value)` pairs in index order; first occurrence wins ties.
fn extremes(name: &str, grid: &Grid, sub: &Subcylinder, values: &[(usize, f64)]) -> Result<HarnackReport> {
    let mut best: Option<((usize, f64), (usize, f64))> = None;
    for &(k, v) in values {
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                value: v,
                point: grid.point(k),
            });
        }
        best = Some(match best {
            None => ((k, v), (k, v)),
            Some((hi, lo)) => (if v > hi.1 { (k, v) } else { hi }, if v < lo.1 { (k, v) } else { lo }),
        });
    }
    let ((kmax, sup), (kmin, inf)) =
        best.ok_or_else(|| Error::EmptyRegion(format!("no grid node inside the subcylinder for `{name}`")))?;
    Ok(HarnackReport {
        solution: name.to_string(),
        sup,
        inf,
        ratio: sup / inf,
        argmax: grid.point(kmax),
        argmin: grid.point(kmin),
        subdomain: *sub,
        nodes: values.len(),
    })
}

/// Grid sup/inf of a function over the closed subcylinder.
pub fn sup_inf_ratio<F>(name: &str, u: &F, dim_y: usize, sub: &Subcylinder, grid: SubGrid) -> Result<HarnackReport>
where
    F: PointFunction + ?Sized,
{
    let g = grid.grid(sub, dim_y)?;
    let values = (0..g.len())
        .into_par_iter()
        .filter_map(|k| {
            let p = g.point(k);
            sub.contains(p[0], &p[1..])
                .then(|| u.value(p[0], &p[1..]).map(|v| (k, v)).map_err(|e| Error::at(p, e)))
        })
        .collect::<Result<Vec<_>>>()?;
    extremes(name, &g, sub, &values)
}

/// Sup/inf over the nodes of `u` that lie in the closed subcylinder.
pub fn sup_inf_ratio_field(name: &str, u: &ScalarField, sub: &Subcylinder) -> Result<HarnackReport> {
    let g = u.grid();
    let mut values = Vec::new();
    for (k, &v) in u.values().iter().enumerate() {
        let p = g.point(k);
        if !sub.contains(p[0], &p[1..]) {
            continue;
        }
        if v.is_nan() {
            return Err(Error::OutsideSupport(p));
        }
        values.push((k, v));
    }
    extremes(name, g, sub, &values)
}

/// A member of a family under test.
pub enum Candidate<'a> {
    Function(&'a AnalyticSolution),
    Field { name: String, field: &'a ScalarField },
}

impl Candidate<'_> {
    pub fn name(&self) -> &str {
        match self {
            Candidate::Function(s) => s.name(),
            Candidate::Field { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyScan {
    pub reports: Vec<HarnackReport>,
    pub max_ratio: f64,
    /// Index into `reports` of the family maximum.
    pub argmax: usize,
}

pub fn scan_family(family: &[Candidate], sub: &Subcylinder, grid: SubGrid) -> Result<FamilyScan> {
    if family.is_empty() {
        return Err(invalid("empty solution family"));
    }
    let reports = family
        .iter()
        .map(|c| match c {
            Candidate::Function(s) => sup_inf_ratio(s.name(), *s, s.dim_n() - 1, sub, grid),
            Candidate::Field { name, field } => sup_inf_ratio_field(name, field, sub),
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, max_ratio) = reports
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, r)| if r.ratio > best.1 { (i, r.ratio) } else { best });
    Ok(FamilyScan {
        reports,
        max_ratio,
        argmax,
    })
}

/// Analytic family shipped for an operator: `constant(1)` when `γ ≡ 0`, the
/// Kolmogorov polynomials for `β = y1`, and separable solutions with
/// `λ ∈ {±0.5, ±1, ±2}` that stay positive on the subcylinder.
pub fn default_family(op: &OperatorSpec, dom: &CylinderDomain, sub: &Subcylinder) -> Result<Vec<AnalyticSolution>> {
    let v = sub.validity();
    let mut out = Vec::new();
    if op.gamma_is_zero() {
        out.push(constant(1.0, op, v)?);
    }
    if op.dim_n() == 2 && op.gamma_is_zero() && op.beta().to_string() == "y1" {
        for c in [2.0, 5.0, 10.0, 100.0] {
            out.push(kolmogorov_poly_on(c, v)?);
        }
    }
    if op.dim_n() == 2 && op.gamma().as_constant().is_some() {
        for lambda in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
            if let Ok(s) = separable_on(lambda, op, 0.0, dom, v) {
                if s.positivity().positive {
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}

/// `count` fields manufactured from random positive boundary data, each on the
/// subcylinder grid. Field `i` uses boundary data `(seed, i)` and path seed
/// derived from `(seed, i)`.
pub fn random_family(
    op: &OperatorSpec,
    dom: &CylinderDomain,
    sub: &Subcylinder,
    grid: SubGrid,
    count: usize,
    t_solve: f64,
    cfg: &SimConfig,
) -> Result<Vec<(String, ScalarField)>> {
    let g = grid.grid(sub, op.dim_y())?;
    (0..count as u64)
        .map(|i| {
            let data = random_positive_data(cfg.master_seed, i, op.dim_n())?;
            let path_seed = crate::rng::derive_seed(cfg.master_seed, 1_000_000 + i);
            let m = make_solution(op, dom, &data, t_solve, &cfg.with_seed(path_seed), &g)?;
            Ok((format!("random({},{i})", cfg.master_seed), m.value))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Divergent,
    NotDivergent,
    /// Fewer than two points.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub lambda: f64,
    pub ratio: f64,
    /// `e^{λ(b'-a')} cosh(√λ R')`, the exact ratio over the subcylinder.
    pub closed_form: f64,
    pub report: HarnackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleScan {
    pub rows: Vec<CounterexampleRow>,
    pub verdict: Verdict,
}

/// Ratios of the `β ≡ 1` family. Divergent iff the ratios increase strictly and
/// the last exceeds ten times the first.
pub fn counterexample_scan(lambdas: &[f64], sub: &Subcylinder, grid: SubGrid) -> Result<CounterexampleScan> {
    if lambdas.is_empty() {
        return Err(invalid("empty lambda list"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("lambda values must be positive and strictly increasing"));
    }
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let s = counterexample_on(lambda, sub.validity())?;
            let report = sup_inf_ratio(s.name(), &s, 1, sub, grid)?;
            Ok(CounterexampleRow {
                lambda,
                ratio: report.ratio,
                closed_form: (lambda * (sub.x_hi - sub.x_lo)).exp() * (lambda.sqrt() * sub.radius).cosh(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if rows.len() < 2 {
        Verdict::Inconclusive
    } else if rows.windows(2).all(|w| w[1].ratio > w[0].ratio) && rows[rows.len() - 1].ratio > 10.0 * rows[0].ratio {
        Verdict::Divergent
    } else {
        Verdict::NotDivergent
    };
    Ok(CounterexampleScan { rows, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCheck {
    pub d: f64,
    pub plus_nodes: usize,
    pub minus_nodes: usize,
    pub sup_plus: f64,
    pub sup_plus_at: Vec<f64>,
    pub sup_minus: f64,
    pub sup_minus_at: Vec<f64>,
    pub inf_inner: f64,
    pub inf_inner_at: Vec<f64>,
    pub ratio_plus: f64,
    pub ratio_minus: f64,
    /// Larger of the two ratios.
    pub ratio: f64,
    pub cap: f64,
    pub within_cap: bool,
}

/// `sup over [a', b'] × A_d^±` against `inf over [a', b'] × B_inner`, both on
/// the open-ball lattice of spacing `grid_step` and `nx` abscissae.
#[allow(clippy::too_many_arguments)]
pub fn region_inequality_check<F>(
    u: &F,
    op: &OperatorSpec,
    dom: &CylinderDomain,
    d: f64,
    grid_step: f64,
    nx: usize,
    cap: f64,
) -> Result<RegionCheck>
where
    F: PointFunction + ?Sized,
{
    let regions = classify_regions(op, dom, d, grid_step)?;
    if let Some(w) = &regions.warning {
        return Err(Error::EmptyRegion(w.clone()));
    }
    let xs = Axis::new(dom.sub_x_lo, dom.sub_x_hi, nx)?;
    let n = lattice_points(dom.inner_radius, grid_step);
    let inner = ball_lattice(dom.inner_radius, op.dim_y(), n, false);
    let extreme = |ys: &[Vec<f64>], want_max: bool| -> Result<(f64, Vec<f64>)> {
        let mut best = (if want_max { f64::NEG_INFINITY } else { f64::INFINITY }, Vec::new());
        for i in 0..xs.n {
            let x = xs.coord(i);
            for y in ys {
                let v = u.value(x, y).map_err(|e| {
                    let mut p = vec![x];
                    p.extend_from_slice(y);
                    Error::at(p, e)
                })?;
                if !(v > 0.0) {
                    let mut p = vec![x];
                    p.extend_from_slice(y);
                    return Err(Error::NonPositive { value: v, point: p });
                }
                if (want_max && v > best.0) || (!want_max && v < best.0) {
                    let mut p = vec![x];
                    p.extend_from_slice(y);
                    best = (v, p);
                }
            }
        }
        Ok(best)
    };
    let (inf_inner, inf_inner_at) = extreme(&inner, false)?;
    let (sup_plus, sup_plus_at) = extreme(&regions.plus, true)?;
    let (sup_minus, sup_minus_at) = extreme(&regions.minus, true)?;
    let (ratio_plus, ratio_minus) = (sup_plus / inf_inner, sup_minus / inf_inner);
    let ratio = ratio_plus.max(ratio_minus);
    Ok(RegionCheck {
        d,
        plus_nodes: regions.plus.len(),
        minus_nodes: regions.minus.len(),
        sup_plus,
        sup_plus_at,
        sup_minus,
        sup_minus_at,
        inf_inner,
        inf_inner_at,
        ratio_plus,
        ratio_minus,
        ratio,
        cap,
        within_cap: ratio <= cap,
    })
}

/// `v(x, y) = ∫_{-z}^{z} u(x + s, y) ds` at the nodes of `u` with `x` in
/// `target`, integrating the piecewise-linear interpolant in `x` exactly.
pub fn window_average_x(u: &ScalarField, z: f64, target: (f64, f64)) -> Result<ScalarField> {
    if !(z > 0.0 && z <= 1.0 / 3.0 + 1e-15) {
        return Err(invalid(format!("window half-width must be in (0, 1/3], got {z}")));
    }
    let grid = u.grid();
    let ax = grid.axes[0];
    let tol = 1e-9 * ax.step();
    if target.0 - z < ax.lo - tol || target.1 + z > ax.hi + tol {
        return Err(invalid(format!(
            "insufficient grid margin: need x in [{}, {}], grid covers [{}, {}]",
            target.0 - z,
            target.1 + z,
            ax.lo,
            ax.hi
        )));
    }
    let first = (0..ax.n).find(|&i| ax.coord(i) >= target.0 - tol);
    let last = (0..ax.n).rev().find(|&i| ax.coord(i) <= target.1 + tol);
    let (i0, i1) = match (first, last) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => return Err(invalid("target interval holds fewer than two grid abscissae")),
    };
    let out_axis = Axis::new(ax.coord(i0), ax.coord(i1), i1 - i0 + 1)?;
    let mut axes = grid.axes.clone();
    axes[0] = out_axis;
    let out_grid = Grid::new(axes)?;
    let stride = grid.stride(0);
    let h = ax.step();
    let xs: Vec<f64> = (0..ax.n).map(|i| ax.coord(i)).collect();
    let mut values = vec![f64::NAN; out_grid.len()];
    for line in 0..stride {
        let f: Vec<f64> = (0..ax.n).map(|i| u.values()[i * stride + line]).collect();
        if f.iter().any(|v| v.is_nan()) {
            continue;
        }
        let mut prefix = vec![0.0; ax.n];
        for i in 1..ax.n {
            prefix[i] = prefix[i - 1] + (xs[i] - xs[i - 1]) * (f[i] + f[i - 1]) / 2.0;
        }
        // Integral of the interpolant from xs[0] to x.
        let cumulative = |x: f64| {
            let i = (((x - ax.lo) / h).floor().max(0.0) as usize).min(ax.n - 2);
            let w = ((x - xs[i]) / (xs[i + 1] - xs[i])).clamp(0.0, 1.0);
            let fx = f[i] + w * (f[i + 1] - f[i]);
            prefix[i] + (x - xs[i]) * (f[i] + fx) / 2.0
        };
        for k in 0..out_axis.n {
            let x = out_axis.coord(k);
            let lo = (x - z).max(ax.lo);
            let hi = (x + z).min(ax.hi);
            values[k * stride + line] = cumulative(hi) - cumulative(lo);
        }
    }
    ScalarField::new(out_grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnPoint;
    use crate::solutions::{counterexample_family, counterexample_ratio, kolmogorov_poly_on};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dom() -> CylinderDomain {
        CylinderDomain::default()
    }

    fn sub() -> Subcylinder {
        Subcylinder::of(&dom())
    }

    #[test]
    fn constant_has_unit_ratio() {
        let c = FnPoint(|_: f64, _: &[f64]| 3.5);
        let r = sup_inf_ratio("c", &c, 1, &sub(), SubGrid::default()).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.argmax, r.argmin);
    }

    #[test]
    fn kolmogorov_extremes() {
        let k = kolmogorov_poly_on(10.0, sub().validity()).unwrap();
        let r = sup_inf_ratio(k.name(), &k, 1, &sub(), SubGrid::default()).unwrap();
        assert_relative_eq!(r.sup, 11.0 + 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(r.inf, 10.0 - 1.0 / 6.0, max_relative = 1e-14);
        assert_eq!(r.argmax, vec![1.0, -1.0]);
        assert_eq!(r.argmin, vec![0.0, 1.0]);
        assert_relative_eq!(r.ratio, 67.0 / 59.0, max_relative = 1e-14);
    }

    #[test]
    fn kolmogorov_family_decreases_in_c() {
        let fam: Vec<_> = [2.0, 5.0, 10.0, 100.0]
            .iter()
            .map(|&c| kolmogorov_poly_on(c, sub().validity()).unwrap())
            .collect();
        let cands: Vec<_> = fam.iter().map(Candidate::Function).collect();
        let scan = scan_family(&cands, &sub(), SubGrid::default()).unwrap();
        assert!(scan.reports.windows(2).all(|w| w[1].ratio < w[0].ratio));
        assert_eq!(scan.argmax, 0);
        assert_relative_eq!(scan.max_ratio, (2.0 + 7.0 / 6.0) / (2.0 - 1.0 / 6.0), max_relative = 1e-14);
    }

    #[test]
    fn constants_family_and_empty_family() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let fam: Vec<_> = [1.0, 5.0, 100.0]
            .iter()
            .map(|&c| constant(c, &op, sub().validity()).unwrap())
            .collect();
        let cands: Vec<_> = fam.iter().map(Candidate::Function).collect();
        assert_eq!(scan_family(&cands, &sub(), SubGrid::default()).unwrap().max_ratio, 1.0);
        assert!(scan_family(&[], &sub(), SubGrid::default()).is_err());
    }

    #[test]
    fn nonpositive_is_refused_with_location() {
        let f = FnPoint(|x: f64, _: &[f64]| x - 0.5);
        match sup_inf_ratio("f", &f, 1, &sub(), SubGrid { nx: 11, ny: 11 }) {
            Err(Error::NonPositive { point, .. }) => assert_eq!(point[0], 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counterexample_matches_closed_form() {
        let scan = counterexample_scan(&[1.0, 2.0, 4.0, 8.0], &sub(), SubGrid::default()).unwrap();
        assert_eq!(scan.verdict, Verdict::Divergent);
        for row in &scan.rows {
            assert_relative_eq!(row.ratio, counterexample_ratio(row.lambda), max_relative = 1e-12);
            assert_relative_eq!(row.ratio, row.closed_form, max_relative = 1e-12);
        }
        assert_relative_eq!(scan.rows[2].report.sup, 2.0f64.cosh(), max_relative = 1e-14);
        let single = counterexample_scan(&[0.01], &sub(), SubGrid::default()).unwrap();
        assert_eq!(single.verdict, Verdict::Inconclusive);
        assert!((single.rows[0].ratio - 1.015).abs() < 1e-3);
        assert!(counterexample_scan(&[], &sub(), SubGrid::default()).is_err());
        assert!(counterexample_scan(&[2.0, 1.0], &sub(), SubGrid::default()).is_err());
    }

    #[test]
    fn field_ratio_matches_function_ratio_on_nodes() {
        let s = counterexample_family(2.0).unwrap();
        let g = SubGrid { nx: 21, ny: 21 }.grid(&sub(), 1).unwrap();
        let f = s.sample(&g).unwrap();
        let a = sup_inf_ratio_field("f", &f, &sub()).unwrap();
        let b = sup_inf_ratio("f", &s, 1, &sub(), SubGrid { nx: 21, ny: 21 }).unwrap();
        assert_eq!(a.ratio, b.ratio);
    }

    #[test]
    fn region_check_examples() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let one = FnPoint(|_: f64, _: &[f64]| 1.0);
        assert_eq!(region_inequality_check(&one, &op, &dom(), 0.5, 0.1, 11, 10.0).unwrap().ratio, 1.0);
        let k = kolmogorov_poly_on(10.0, sub().validity()).unwrap();
        let r = region_inequality_check(&k, &op, &dom(), 0.5, 0.1, 11, 10.0).unwrap();
        // open lattice on (-1, 1) with step 0.1: extremes at y = ±0.9
        let u = |x: f64, y: f64| x - y * y * y / 6.0 + 10.0;
        assert_relative_eq!(r.sup_minus, u(1.0, -0.9), max_relative = 1e-12);
        assert_relative_eq!(r.sup_plus, u(1.0, 0.6), max_relative = 1e-12);
        assert_relative_eq!(r.inf_inner, u(0.0, 0.9), max_relative = 1e-12);
        assert!(r.within_cap);
        let flat = OperatorSpec::new("1", "0", 2, &dom()).unwrap();
        assert!(matches!(
            region_inequality_check(&one, &flat, &dom(), 0.5, 0.1, 11, 10.0),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn window_average_examples() {
        let g = Grid::cylinder(-5.0, 6.0, 3.0, 1, 111, 31).unwrap();
        let z = 1.0 / 3.0;
        let c = ScalarField::sample(&g, &FnPoint(|_: f64, _: &[f64]| 2.0)).unwrap();
        let v = window_average_x(&c, z, (0.0, 1.0)).unwrap();
        assert_eq!(v.grid().axes[0].n, 11);
        assert!(v.values().iter().all(|&w| (w - 4.0 * z).abs() < 1e-12));
        let lin = ScalarField::sample(&g, &FnPoint(|x: f64, _: &[f64]| x)).unwrap();
        let v = window_average_x(&lin, z, (0.0, 1.0)).unwrap();
        for k in 0..v.grid().len() {
            let p = v.grid().point(k);
            assert!((v.values()[k] - 2.0 * z * p[0]).abs() < 1e-12);
        }
        let k = ScalarField::sample(&g, &FnPoint(|x: f64, y: &[f64]| x - y[0].powi(3) / 6.0 + 10.0)).unwrap();
        let v = window_average_x(&k, z, (0.0, 1.0)).unwrap();
        for j in 0..v.grid().len() {
            let p = v.grid().point(j);
            let exact = 2.0 * z * (p[0] + 10.0) - 2.0 * z * p[1].powi(3) / 6.0;
            assert!((v.values()[j] - exact).abs() <= 1e-9);
        }
        assert!(window_average_x(&c, 0.5, (0.0, 1.0)).is_err());
        assert!(window_average_x(&c, z, (-4.9, 1.0)).is_err());
    }

    #[test]
    fn shipped_family_stabilises_under_refinement() {
        for beta in ["y1", "sin(y1)"] {
            let op = OperatorSpec::new(beta, "0", 2, &dom()).unwrap();
            let fam = default_family(&op, &dom(), &sub()).unwrap();
            assert!(fam.len() >= 3, "{beta}");
            let cands: Vec<_> = fam.iter().map(Candidate::Function).collect();
            let coarse = scan_family(&cands, &sub(), SubGrid { nx: 51, ny: 51 }).unwrap();
            let fine = scan_family(&cands, &sub(), SubGrid { nx: 101, ny: 101 }).unwrap();
            assert!(fine.max_ratio <= 1.05 * coarse.max_ratio, "{beta}");
        }
    }

    #[test]
    fn random_family_is_positive_and_reproducible() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let cfg = SimConfig::new(1e-2, 1.0, 20, 3);
        let grid = SubGrid { nx: 3, ny: 5 };
        let a = random_family(&op, &dom(), &sub(), grid, 2, 1.0, &cfg).unwrap();
        let b = random_family(&op, &dom(), &sub(), grid, 2, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        for (name, f) in &a {
            let r = sup_inf_ratio_field(name, f, &sub()).unwrap();
            assert!(r.ratio >= 1.0 && r.ratio.is_finite());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn ratio_invariances(lambda in 0.1f64..6.0, k in -20i32..20, dx in -3.0f64..3.0) {
            let s = counterexample_family(lambda).unwrap();
            let grid = SubGrid { nx: 11, ny: 11 };
            let base = sup_inf_ratio("u", &s, 1, &sub(), grid).unwrap();
            prop_assert!(base.ratio >= 1.0);
            let c = 2f64.powi(k);
            let scaled = FnPoint(|x: f64, y: &[f64]| c * s.value(x, y).unwrap());
            prop_assert_eq!(sup_inf_ratio("cu", &scaled, 1, &sub(), grid).unwrap().ratio, base.ratio);
            let moved = FnPoint(|x: f64, y: &[f64]| s.value(x - dx, y).unwrap());
            let r = sup_inf_ratio("u", &moved, 1, &sub().shifted_x(dx), grid).unwrap();
            prop_assert!((r.ratio - base.ratio).abs() <= 1e-12 * base.ratio);
        }
    }
}
