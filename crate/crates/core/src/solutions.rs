//! Exact and ODE-backed positive solutions of `Δ_y u + β(y) u_x + γ u = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::field::{Grid, PointFunction, ScalarField};
use crate::operator::{all_names, y_names, CylinderDomain, OperatorSpec};
use crate::rng::derive_seed;

pub const ODE_STEP: f64 = 1e-3;

/// Region on which a solution's positivity and residual are certified:
/// `[x_lo, x_hi] × closed ball of radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Validity {
    pub x_lo: f64,
    pub x_hi: f64,
    pub radius: f64,
}

impl Validity {
    pub fn cylinder(dom: &CylinderDomain) -> Validity {
        Validity {
            x_lo: dom.x_lo,
            x_hi: dom.x_hi,
            radius: dom.radius,
        }
    }

    pub fn subcylinder(dom: &CylinderDomain) -> Validity {
        Validity {
            x_lo: dom.sub_x_lo,
            x_hi: dom.sub_x_hi,
            radius: dom.inner_radius,
        }
    }

    /// Verification grid: 101 x-nodes and an odd per-axis count shrinking with dimension.
    pub fn grid(&self, dim_y: usize) -> Result<Grid> {
        let ny = match dim_y {
            1 => 101,
            2 => 41,
            _ => 11,
        };
        Grid::cylinder(self.x_lo, self.x_hi, self.radius, dim_y, 101, ny)
    }
}

/// Grid minimum over the validity region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positivity {
    pub min: f64,
    pub at: Vec<f64>,
    pub positive: bool,
}

/// `φ` with `φ″ + (λβ(y) + γ)φ = 0`, `φ(y0) = 1`, `φ′(y0) = 0`, tabulated by RK4.
#[derive(Debug, Clone)]
pub struct Profile {
    pub lambda: f64,
    pub gamma: f64,
    pub y0: f64,
    pub step: f64,
    k_lo: i64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// Max difference against the same integration at half the step.
    pub error_estimate: f64,
}

fn rk4_table(beta: &Expr, lambda: f64, gamma: f64, y0: f64, h: f64, k_lo: i64, k_hi: i64) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = |y: f64| -> Result<f64> { Ok(lambda * beta.eval(&[y]).map_err(|e| Error::at(vec![y], e))? + gamma) };
    let n = (k_hi - k_lo + 1) as usize;
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    let origin = (-k_lo) as usize;
    phi[origin] = 1.0;
    let step = |y: f64, p: f64, d: f64, h: f64| -> Result<(f64, f64)> {
        let qm = q(y + h / 2.0)?;
        let (k1p, k1d) = (d, -q(y)? * p);
        let (k2p, k2d) = (d + h / 2.0 * k1d, -qm * (p + h / 2.0 * k1p));
        let (k3p, k3d) = (d + h / 2.0 * k2d, -qm * (p + h / 2.0 * k2p));
        let (k4p, k4d) = (d + h * k3d, -q(y + h)? * (p + h * k3p));
        Ok((
            p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            d + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
        ))
    };
    for i in origin + 1..n {
        let y = y0 + (i as i64 - 1 + k_lo) as f64 * h;
        (phi[i], dphi[i]) = step(y, phi[i - 1], dphi[i - 1], h)?;
    }
    for i in (0..origin).rev() {
        let y = y0 + (i as i64 + 1 + k_lo) as f64 * h;
        (phi[i], dphi[i]) = step(y, phi[i + 1], dphi[i + 1], -h)?;
    }
    Ok((phi, dphi))
}

impl Profile {
    /// Integrates over `[y_lo, y_hi]` (which must contain `y0`), one step beyond each end.
    pub fn integrate(beta: &Expr, lambda: f64, gamma: f64, y0: f64, y_lo: f64, y_hi: f64) -> Result<Profile> {
        if !(y_lo <= y0 && y0 <= y_hi) {
            return Err(invalid(format!("y0 = {y0} outside [{y_lo}, {y_hi}]")));
        }
        let h = ODE_STEP;
        let k_lo = -(((y0 - y_lo) / h).ceil() as i64) - 1;
        let k_hi = ((y_hi - y0) / h).ceil() as i64 + 1;
        let (phi, dphi) = rk4_table(beta, lambda, gamma, y0, h, k_lo, k_hi)?;
        let (fine, _) = rk4_table(beta, lambda, gamma, y0, h / 2.0, 2 * k_lo, 2 * k_hi)?;
        let error_estimate = phi
            .iter()
            .enumerate()
            .map(|(i, p)| (p - fine[2 * i]).abs())
            .fold(0.0, f64::max);
        Ok(Profile {
            lambda,
            gamma,
            y0,
            step: h,
            k_lo,
            phi,
            dphi,
            error_estimate,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        self.y0 + (i as i64 + self.k_lo) as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn table(&self) -> &[f64] {
        &self.phi
    }

    /// Cubic Hermite interpolation of the table.
    pub fn value(&self, y: f64) -> Result<f64> {
        let s = (y - self.y0) / self.step - self.k_lo as f64;
        if !(s >= 0.0 && s <= (self.len() - 1) as f64) {
            return Err(Error::OutsideSupport(vec![y]));
        }
        let i = (s.floor() as usize).min(self.len() - 2);
        let t = s - i as f64;
        let (p0, p1) = (self.phi[i], self.phi[i + 1]);
        let (m0, m1) = (self.dphi[i] * self.step, self.dphi[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1)
    }

    /// Sign change or zero of the table within `[lo, hi]` closest to `y0`.
    pub fn first_zero_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let origin = (-self.k_lo) as usize;
        let inside = |i: usize| (lo..=hi).contains(&self.node(i));
        let crossing = |a: usize, b: usize| {
            let (pa, pb) = (self.phi[a], self.phi[b]);
            (pb <= 0.0).then(|| {
                let ya = self.node(a);
                ya + (self.node(b) - ya) * pa / (pa - pb)
            })
        };
        let up = (origin..self.len() - 1)
            .take_while(|&i| inside(i + 1))
            .find_map(|i| crossing(i, i + 1));
        let down = (1..=origin)
            .rev()
            .take_while(|&i| inside(i - 1))
            .find_map(|i| crossing(i, i - 1));
        match (up, down) {
            (Some(a), Some(b)) => Some(if (a - self.y0).abs() <= (self.y0 - b).abs() { a } else { b }),
            (a, b) => a.or(b),
        }
    }

    /// Max over interior nodes of `|φ″ + (λβ + γ)φ| / max|φ|`, with `φ″` from
    /// the five-point stencil.
    pub fn ode_residual(&self, beta: &Expr) -> Result<f64> {
        let h2 = self.step * self.step;
        let scale = self.phi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let mut worst: f64 = 0.0;
        for i in 2..self.len() - 2 {
            let p = &self.phi;
            let d2 = (-p[i + 2] + 16.0 * p[i + 1] - 30.0 * p[i] + 16.0 * p[i - 1] - p[i - 2]) / (12.0 * h2);
            let y = self.node(i);
            let q = self.lambda * beta.eval(&[y])? + self.gamma;
            worst = worst.max((d2 + q * p[i]).abs());
        }
        Ok(worst / scale)
    }
}

#[derive(Debug, Clone)]
enum Form {
    Closed(Expr),
    Separable(Profile),
}

#[derive(Debug, Clone)]
pub struct AnalyticSolution {
    name: String,
    beta: Expr,
    gamma: Expr,
    dim_n: usize,
    form: Form,
    validity: Validity,
    positivity: Positivity,
}

impl PointFunction for AnalyticSolution {
    fn value(&self, x: f64, y: &[f64]) -> Result<f64> {
        match &self.form {
            Form::Closed(e) => e.value(x, y),
            Form::Separable(p) => Ok((p.lambda * x).exp() * p.value(y[0])?),
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

impl AnalyticSolution {
    fn build(name: String, beta: Expr, gamma: Expr, dim_n: usize, form: Form, validity: Validity) -> Result<AnalyticSolution> {
        let mut s = AnalyticSolution {
            name,
            beta,
            gamma,
            dim_n,
            form,
            validity,
            positivity: Positivity {
                min: f64::NAN,
                at: Vec::new(),
                positive: false,
            },
        };
        s.positivity = s.certify()?;
        Ok(s)
    }

    fn closed(name: String, beta: &str, gamma: &str, u: &str, dim_n: usize, validity: Validity) -> Result<AnalyticSolution> {
        let beta = Expr::parse(beta, &y_names(dim_n))?;
        let gamma = Expr::parse(gamma, &all_names(dim_n))?;
        let u = Expr::parse(u, &all_names(dim_n))?;
        Self::build(name, beta, gamma, dim_n, Form::Closed(u), validity)
    }

    fn certify(&self) -> Result<Positivity> {
        let grid = self.validity.grid(self.dim_n - 1)?;
        let r2 = self.validity.radius * self.validity.radius * (1.0 + 1e-12);
        let mut best = (f64::INFINITY, Vec::new());
        for k in 0..grid.len() {
            let p = grid.point(k);
            if p[1..].iter().map(|v| v * v).sum::<f64>() > r2 {
                continue;
            }
            let v = self.value(p[0], &p[1..]).map_err(|e| Error::at(p.clone(), e))?;
            if v < best.0 {
                best = (v, p);
            }
        }
        Ok(Positivity {
            min: best.0,
            positive: best.0 > 0.0,
            at: best.1,
        })
    }

    fn require_positive(self) -> Result<AnalyticSolution> {
        if self.positivity.positive {
            Ok(self)
        } else {
            Err(Error::NonPositive {
                value: self.positivity.min,
                point: self.positivity.at.clone(),
            })
        }
    }

    pub fn name(&self) -> &str {
        &self.name
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

    pub fn validity(&self) -> Validity {
        self.validity
    }

    pub fn positivity(&self) -> &Positivity {
        &self.positivity
    }

    /// The closed form, if there is one.
    pub fn expr(&self) -> Option<&Expr> {
        match &self.form {
            Form::Closed(e) => Some(e),
            Form::Separable(_) => None,
        }
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.form {
            Form::Separable(p) => Some(p),
            Form::Closed(_) => None,
        }
    }

    pub fn operator(&self, dom: &CylinderDomain) -> Result<OperatorSpec> {
        OperatorSpec::from_exprs(self.beta.clone(), self.gamma.clone(), self.dim_n, dom)
    }

    pub fn sample(&self, grid: &Grid) -> Result<ScalarField> {
        ScalarField::sample(grid, self)
    }

    /// Symbolic `Δ_y u + β u_x + γ u` for closed forms.
    pub fn residual_expr(&self) -> Result<Option<Expr>> {
        let Form::Closed(u) = &self.form else {
            return Ok(None);
        };
        let names = all_names(self.dim_n);
        let mut terms = Vec::new();
        for y in &names[1..] {
            terms.push(format!("({})", u.differentiate(y)?.differentiate(y)?));
        }
        let beta = self.beta.rebind(&names)?;
        terms.push(format!("({beta}) * ({})", u.differentiate("x")?));
        terms.push(format!("({}) * ({u})", self.gamma));
        Ok(Some(Expr::parse(&terms.join(" + "), &names)?.simplify()))
    }

    /// Certified residual on the verification grid. Closed forms: exact symbolic
    /// residual relative to `max(1, |u|)`. Separable: the normalised ODE residual
    /// of the tabulated profile.
    pub fn residual_bound(&self) -> Result<f64> {
        match &self.form {
            Form::Separable(p) => p.ode_residual(&self.beta),
            Form::Closed(u) => {
                let r = self.residual_expr()?.expect("closed form");
                let grid = self.validity.grid(self.dim_n - 1)?;
                let r2 = self.validity.radius * self.validity.radius * (1.0 + 1e-12);
                let mut worst: f64 = 0.0;
                for k in 0..grid.len() {
                    let p = grid.point(k);
                    if p[1..].iter().map(|v| v * v).sum::<f64>() > r2 {
                        continue;
                    }
                    let scale = u.eval(&p)?.abs().max(1.0);
                    worst = worst.max(r.eval(&p)?.abs() / scale);
                }
                Ok(worst)
            }
        }
    }
}

/// `x - y³/6 + c` with `β = y`, `γ ≡ 0`, `N = 2`; positive on the whole default cylinder.
pub fn kolmogorov_poly(c: f64) -> Result<AnalyticSolution> {
    kolmogorov_poly_on(c, Validity::cylinder(&CylinderDomain::default()))
}

/// As [`kolmogorov_poly`] with positivity required only on `validity`.
pub fn kolmogorov_poly_on(c: f64, validity: Validity) -> Result<AnalyticSolution> {
    AnalyticSolution::closed(
        format!("kolmogorov({c})"),
        "y1",
        "0",
        &format!("x - y1^3/6 + {}", fmt_num(c)),
        2,
        validity,
    )?
    .require_positive()
}

/// `e^{λx} φ(y)` for the scalar-`y` operator `op` with constant `γ`. Rejected when
/// `φ` vanishes on the inner interval; positivity on the rest of the validity
/// region is only reported.
pub fn separable(lambda: f64, op: &OperatorSpec, y0: f64, dom: &CylinderDomain) -> Result<AnalyticSolution> {
    separable_on(lambda, op, y0, dom, Validity::cylinder(dom))
}

pub fn separable_on(
    lambda: f64,
    op: &OperatorSpec,
    y0: f64,
    dom: &CylinderDomain,
    validity: Validity,
) -> Result<AnalyticSolution> {
    if op.dim_n() != 2 {
        return Err(invalid("separable solutions need N = 2"));
    }
    let gamma = op
        .gamma()
        .as_constant()
        .ok_or_else(|| invalid("separable solutions need a constant gamma"))?;
    if !lambda.is_finite() {
        return Err(invalid("lambda must be finite"));
    }
    let r = validity.radius;
    let profile = Profile::integrate(op.beta(), lambda, gamma, y0, -r, r)?;
    let inner = dom.inner_radius.min(r);
    if let Some(z) = profile.first_zero_in(-inner, inner) {
        return Err(Error::NonPositive {
            value: 0.0,
            point: vec![validity.x_lo, z],
        });
    }
    AnalyticSolution::build(
        format!("separable({lambda},{gamma})"),
        op.beta().clone(),
        op.gamma().clone(),
        2,
        Form::Separable(profile),
        validity,
    )
}

/// `e^{-λx} cosh(√λ y)` with `β ≡ 1`, `γ ≡ 0`, `N = 2`.
pub fn counterexample_family(lambda: f64) -> Result<AnalyticSolution> {
    counterexample_on(lambda, Validity::cylinder(&CylinderDomain::default()))
}

pub fn counterexample_on(lambda: f64, validity: Validity) -> Result<AnalyticSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    AnalyticSolution::closed(
        format!("counterexample({lambda})"),
        "1",
        "0",
        &format!("exp(-{lambda} * x) * cosh(sqrt({lambda}) * y1)"),
        2,
        validity,
    )
}

/// `u ≡ c` for the operator `op`, which must have `γ ≡ 0`.
pub fn constant(c: f64, op: &OperatorSpec, validity: Validity) -> Result<AnalyticSolution> {
    if !op.gamma_is_zero() {
        return Err(invalid("constants solve the equation only when gamma = 0"));
    }
    AnalyticSolution::closed(
        format!("constant({c})"),
        &op.beta().to_string(),
        "0",
        &fmt_num(c),
        op.dim_n(),
        validity,
    )?
    .require_positive()
}

/// Closed-form value of the sup/inf ratio of the counterexample family over
/// `[0, 1] × [-1, 1]`.
pub fn counterexample_ratio(lambda: f64) -> f64 {
    lambda.exp() * lambda.sqrt().cosh()
}

fn split_call(entry: &str) -> Result<(&str, Vec<f64>)> {
    let entry = entry.trim();
    let Some(open) = entry.find('(') else {
        return Ok((entry, Vec::new()));
    };
    let name = entry[..open].trim();
    let args = entry[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| invalid(format!("catalog entry `{entry}` is missing `)`")))?;
    let values = args
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("catalog entry `{entry}`: `{}` is not a number", a.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name, values))
}

/// `kolmogorov[(C)]`, `separable(λ[, γ])`, `counterexample(λ)`, `constant(c)`.
/// `separable` uses `op`'s `β`; `constant` uses `op`'s `β` and dimension.
pub fn from_catalog(entry: &str, op: &OperatorSpec, dom: &CylinderDomain, validity: Validity) -> Result<AnalyticSolution> {
    let (name, args) = split_call(entry)?;
    let arity = |lo: usize, hi: usize| {
        if (lo..=hi).contains(&args.len()) {
            Ok(())
        } else {
            Err(invalid(format!("catalog entry `{entry}` takes {lo}..={hi} arguments")))
        }
    };
    match name {
        "kolmogorov" => {
            arity(0, 1)?;
            kolmogorov_poly_on(args.first().copied().unwrap_or(10.0), validity)
        }
        "separable" => {
            arity(1, 2)?;
            let op = match args.get(1) {
                Some(&g) => op.with_gamma(&fmt_num(g), dom)?,
                None => op.clone(),
            };
            separable_on(args[0], &op, 0.0, dom, validity)
        }
        "counterexample" => {
            arity(1, 1)?;
            counterexample_on(args[0], validity)
        }
        "constant" => {
            arity(1, 1)?;
            constant(args[0], op, validity)
        }
        _ => Err(invalid(format!(
            "unknown catalog entry `{name}`; expected kolmogorov, separable, counterexample or constant"
        ))),
    }
}

/// Smooth positive boundary data `exp(a₁ sin(w₁x + p₁) + a₂ Σ cos(w₂y_j + p₂))`
/// with coefficients drawn from `(seed, index)`.
pub fn random_positive_data(seed: u64, index: u64, dim_n: usize) -> Result<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
    let a1: f64 = rng.random_range(0.2..1.0);
    let w1: f64 = rng.random_range(0.5..2.0);
    let p1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let a2: f64 = rng.random_range(0.2..1.0);
    let w2: f64 = rng.random_range(0.5..2.0);
    let p2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let ys: Vec<String> = y_names(dim_n)
        .iter()
        .map(|y| format!("cos({w2} * {y} + {p2})"))
        .collect();
    let text = format!("exp({a1} * sin({w1} * x + {p1}) + {a2} * ({}))", ys.join(" + "));
    Ok(Expr::parse(&text, &all_names(dim_n))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dom() -> CylinderDomain {
        CylinderDomain::default()
    }

    #[test]
    fn kolmogorov_examples() {
        let k = kolmogorov_poly(10.0).unwrap();
        assert!(k.residual_bound().unwrap() <= 1e-9);
        assert_relative_eq!(k.positivity().min, 0.5, epsilon = 1e-12);
        assert_eq!(k.positivity().at, vec![-5.0, 3.0]);
        assert_relative_eq!(k.value(1.0, &[-1.0]).unwrap(), 11.0 + 1.0 / 6.0, epsilon = 1e-12);
        assert!(matches!(kolmogorov_poly(0.0), Err(Error::NonPositive { .. })));
        // only the subcylinder needs C > 1/6
        assert!(kolmogorov_poly_on(2.0, Validity::subcylinder(&dom())).is_ok());
        assert!(kolmogorov_poly_on(0.1, Validity::subcylinder(&dom())).is_err());
    }

    #[test]
    fn cosh_profile_matches_closed_form() {
        let op = OperatorSpec::new("1", "0", 2, &dom()).unwrap();
        let s = separable(-4.0, &op, 0.0, &dom()).unwrap();
        let p = s.profile().unwrap();
        for i in (0..p.len()).step_by(97) {
            let y = p.node(i);
            let exact = (2.0 * y).cosh();
            assert!(((p.table()[i] - exact) / exact).abs() <= 1e-8, "y={y}");
        }
        for y in [-2.9995f64, -1.23456, 0.0, 0.7072, 2.9999] {
            let exact = (-4.0f64 * 0.3).exp() * (2.0 * y).cosh();
            assert!(((s.value(0.3, &[y]).unwrap() - exact) / exact).abs() <= 1e-8);
        }
        assert!(s.residual_bound().unwrap() <= 1e-6);
        assert!(p.error_estimate < 1e-8);
    }

    #[test]
    fn cos_profile_matches_closed_form() {
        // φ″ = -φ on an interval short enough that cos stays positive on the inner ball
        let op = OperatorSpec::new("1", "0", 2, &dom()).unwrap();
        let s = separable(1.0, &op, 0.0, &dom()).unwrap();
        let p = s.profile().unwrap();
        for i in (0..p.len()).step_by(101) {
            let y = p.node(i);
            assert!((p.table()[i] - y.cos()).abs() <= 1e-8);
        }
        assert!(!s.positivity().positive);
        let min = 6.0f64.exp() * 3.0f64.cos();
        assert!((s.positivity().min - min).abs() <= 1e-8 * min.abs());
    }

    #[test]
    fn zero_on_inner_interval_is_rejected() {
        let op = OperatorSpec::new("1", "0", 2, &dom()).unwrap();
        // cos(2y) vanishes at π/4
        match separable(4.0, &op, 0.0, &dom()) {
            Err(Error::NonPositive { point, .. }) => {
                assert!((point[1].abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-6)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_lambda_gives_unit_profile() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let s = separable(0.0, &op, 0.0, &dom()).unwrap();
        assert!(s.profile().unwrap().table().iter().all(|&v| v == 1.0));
    }

    /// Power series for φ″ = -yφ, φ(0)=1, φ′(0)=0: a₀=1, a₁=0, a₂=0,
    /// a_{n+3} = -a_n / ((n+3)(n+2)).
    fn airy_series(y: f64) -> f64 {
        let mut a = vec![1.0, 0.0, 0.0];
        for n in 0..150 {
            let next = -a[n] / (((n + 3) * (n + 2)) as f64);
            a.push(next);
        }
        a.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    #[test]
    fn airy_profile_matches_series() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let s = separable(1.0, &op, 0.0, &dom()).unwrap();
        for k in 0..=60 {
            let y = -3.0 + 0.1 * k as f64;
            assert!((s.value(0.0, &[y]).unwrap() - airy_series(y)).abs() <= 1e-6, "y={y}");
        }
    }

    #[test]
    fn positive_separable_with_potential() {
        let op = OperatorSpec::new("y1", "-0.5", 2, &dom()).unwrap();
        let s = separable(0.2, &op, 0.0, &dom()).unwrap();
        assert!(s.positivity().positive);
        assert!(s.residual_bound().unwrap() <= 1e-6);
    }

    #[test]
    fn counterexample_closed_form() {
        let s = counterexample_family(4.0).unwrap();
        assert!(s.residual_bound().unwrap() <= 1e-12);
        let (sup, inf) = (s.value(0.0, &[1.0]).unwrap(), s.value(1.0, &[0.0]).unwrap());
        assert_relative_eq!(sup, 2.0f64.cosh(), max_relative = 1e-14);
        assert_relative_eq!(inf, (-4.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(sup / inf, counterexample_ratio(4.0), max_relative = 1e-14);
        assert!(counterexample_family(0.0).is_err());
        let ratios: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0].map(counterexample_ratio).to_vec();
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn catalog_names() {
        let op = OperatorSpec::new("y1", "0", 2, &dom()).unwrap();
        let v = Validity::cylinder(&dom());
        assert_eq!(from_catalog("kolmogorov", &op, &dom(), v).unwrap().name(), "kolmogorov(10)");
        assert_eq!(from_catalog("constant(5)", &op, &dom(), v).unwrap().value(0.0, &[0.0]).unwrap(), 5.0);
        assert!(from_catalog("separable(0.2, -0.5)", &op, &dom(), v).is_ok());
        assert!(from_catalog("counterexample(2)", &op, &dom(), v).is_ok());
        assert!(from_catalog("counterexample", &op, &dom(), v).is_err());
        assert!(from_catalog("nonsense(1)", &op, &dom(), v).is_err());
        assert!(from_catalog("constant(-1)", &op, &dom(), v).is_err());
        assert!(from_catalog("kolmogorov(x)", &op, &dom(), v).is_err());
    }

    #[test]
    fn random_data_is_positive_and_reproducible() {
        let a = random_positive_data(7, 3, 3).unwrap();
        assert_eq!(a, random_positive_data(7, 3, 3).unwrap());
        assert_ne!(a, random_positive_data(7, 4, 3).unwrap());
        let v = a.value(0.4, &[0.1, -0.2]).unwrap();
        assert!(v > 0.0);
    }
}
