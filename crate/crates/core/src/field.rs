//! Regular grids over cylinders and functions sampled on them.
//!
//! Axis 0 is always `x`; axes `1..` are `y1, y2, ...`. Values are stored
//! row-major with `x` outermost. A node whose value is `NaN` is absent (outside
//! the ball a manufactured field was computed on, or in the boundary layer of
//! a residual).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::report::fmt_f64;

/// Something that can be evaluated at a point `(x, y)` of the cylinder.
pub trait PointFunction: Sync {
    fn value(&self, x: f64, y: &[f64]) -> Result<f64>;
}

pub(crate) const MAX_DIM: usize = 9;

/// Expressions are evaluated with variables ordered `x, y1, y2, ...`.
impl PointFunction for Expr {
    fn value(&self, x: f64, y: &[f64]) -> Result<f64> {
        let mut buf = [0.0; MAX_DIM];
        if y.len() + 1 > MAX_DIM {
            return Err(invalid("too many dimensions"));
        }
        buf[0] = x;
        buf[1..=y.len()].copy_from_slice(y);
        Ok(self.eval(&buf[..=y.len()])?)
    }
}

/// Adapts a closure to [`PointFunction`].
pub struct FnPoint<F>(pub F);

impl<F> PointFunction for FnPoint<F>
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn value(&self, x: f64, y: &[f64]) -> Result<f64> {
        Ok((self.0)(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Axis> {
        if !(lo.is_finite() && hi.is_finite()) || n == 0 || (n > 1 && lo >= hi) || (n == 1 && lo != hi)
        {
            return Err(invalid(format!("bad axis [{lo}, {hi}] with {n} points")));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn step(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    /// Node coordinate; endpoints and symmetric midpoints are exact.
    pub fn coord(&self, i: usize) -> f64 {
        let m = self.n.saturating_sub(1);
        if i == 0 {
            self.lo
        } else if i == m {
            self.hi
        } else {
            (self.lo * (m - i) as f64 + self.hi * i as f64) / m as f64
        }
    }

    /// Cell index and fractional weight for `p`, or `None` outside the axis.
    fn locate(&self, p: f64) -> Option<(usize, f64)> {
        if self.n == 1 {
            return ((p - self.lo).abs() <= 1e-12 * (1.0 + p.abs())).then_some((0, 0.0));
        }
        let h = self.step();
        let slack = 1e-9 * h;
        if p < self.lo - slack || p > self.hi + slack {
            return None;
        }
        let s = (p - self.lo) / h;
        let i = (s.floor().max(0.0) as usize).min(self.n - 2);
        Some((i, (s - i as f64).clamp(0.0, 1.0)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Grid> {
        if axes.len() < 2 || axes.len() > MAX_DIM {
            return Err(invalid(format!(
                "grid needs between 2 and {MAX_DIM} axes, got {}",
                axes.len()
            )));
        }
        Ok(Grid { axes })
    }

    /// `x ∈ [x_lo, x_hi]` with `nx` nodes; each y-axis spans `[-radius, radius]` with `ny` nodes.
    pub fn cylinder(x_lo: f64, x_hi: f64, radius: f64, dim_y: usize, nx: usize, ny: usize) -> Result<Grid> {
        let mut axes = vec![Axis::new(x_lo, x_hi, nx)?];
        for _ in 0..dim_y {
            axes.push(Axis::new(-radius, radius, ny)?);
        }
        Grid::new(axes)
    }

    pub fn dim_y(&self) -> usize {
        self.axes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.n + i)
    }

    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for (slot, a) in idx.iter_mut().zip(&self.axes).rev() {
            *slot = flat % a.n;
            flat /= a.n;
        }
    }

    /// Stride of `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.n).product()
    }

    /// Coordinates `(x, y1, ...)` of a node.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.axes.len()];
        self.unravel(flat, &mut idx);
        idx.iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    pub fn shifted_x(&self, dx: f64) -> Grid {
        let mut g = self.clone();
        g.axes[0].lo += dx;
        g.axes[0].hi += dx;
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct FieldHeader<'a> {
    axes: Vec<NamedAxis<'a>>,
    nodes: usize,
    present_nodes: usize,
}

#[derive(Serialize)]
struct NamedAxis<'a> {
    name: &'a str,
    lo: f64,
    hi: f64,
    n: usize,
    step: f64,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "field has {} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Samples `f` at every node; fails on the first evaluation error.
    pub fn sample<F: PointFunction + ?Sized>(grid: &Grid, f: &F) -> Result<ScalarField> {
        let values = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f.value(p[0], &p[1..]).map_err(|e| Error::at(p.clone(), e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, flat: usize) -> Option<f64> {
        let v = self.values[flat];
        (!v.is_nan()).then_some(v)
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(|(k, &v)| (k, v))
    }

    /// Multilinear interpolation. Corners with zero weight are ignored, so a
    /// node query returns the stored value exactly.
    pub fn interpolate(&self, x: f64, y: &[f64]) -> Result<f64> {
        let dims = self.grid.axes.len();
        if y.len() + 1 != dims {
            return Err(invalid(format!(
                "point has {} coordinates, field has {dims} axes",
                y.len() + 1
            )));
        }
        let mut cells = [(0usize, 0.0f64); MAX_DIM];
        for (d, axis) in self.grid.axes.iter().enumerate() {
            let p = if d == 0 { x } else { y[d - 1] };
            cells[d] = axis.locate(p).ok_or_else(|| {
                let mut pt = vec![x];
                pt.extend_from_slice(y);
                Error::OutsideSupport(pt)
            })?;
        }
        let mut acc = 0.0;
        'corner: for mask in 0..(1usize << dims) {
            let mut weight = 1.0;
            let mut flat = 0;
            for (d, axis) in self.grid.axes.iter().enumerate() {
                let (i, w) = cells[d];
                let upper = mask >> d & 1 == 1;
                let wd = if upper { w } else { 1.0 - w };
                if wd == 0.0 {
                    continue 'corner;
                }
                weight *= wd;
                flat = flat * axis.n + i + usize::from(upper);
            }
            let v = self.values[flat];
            if v.is_nan() {
                let mut pt = vec![x];
                pt.extend_from_slice(y);
                return Err(Error::OutsideSupport(pt));
            }
            acc += weight * v;
        }
        Ok(acc)
    }

    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> ScalarField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| if v.is_nan() { v } else { f(&self.grid.point(k), v) })
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.present().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    pub fn axis_names(&self) -> Vec<String> {
        std::iter::once("x".to_string())
            .chain((1..self.grid.axes.len()).map(|j| format!("y{j}")))
            .collect()
    }

    /// CSV with one row per present node: `x,y1,...,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.axis_names();
        header.push("value".into());
        w.write_record(&header)?;
        for (k, v) in self.present() {
            let mut row: Vec<String> = self.grid.point(k).into_iter().map(fmt_f64).collect();
            row.push(fmt_f64(v));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn header_json(&self) -> Result<String> {
        let names = self.axis_names();
        let header = FieldHeader {
            axes: self
                .grid
                .axes
                .iter()
                .zip(&names)
                .map(|(a, name)| NamedAxis {
                    name,
                    lo: a.lo,
                    hi: a.hi,
                    n: a.n,
                    step: a.step(),
                })
                .collect(),
            nodes: self.grid.len(),
            present_nodes: self.present().count(),
        };
        Ok(serde_json::to_string_pretty(&header)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        std::fs::write(dir.join(format!("{stem}.json")), self.header_json()? + "\n")?;
        Ok(())
    }
}

impl PointFunction for ScalarField {
    fn value(&self, x: f64, y: &[f64]) -> Result<f64> {
        self.interpolate(x, y)
    }
}

/// Lattice over `[-radius, radius]^dim` with `n` nodes per axis, filtered to the ball.
/// `closed` keeps nodes on the sphere; otherwise they are excluded.
pub fn ball_lattice(radius: f64, dim: usize, n: usize, closed: bool) -> Vec<Vec<f64>> {
    let axis = Axis {
        lo: -radius,
        hi: radius,
        n,
    };
    let r2 = radius * radius;
    let tol = 1e-12 * r2;
    let total = n.pow(dim as u32);
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    for mut k in 0..total {
        for slot in idx.iter_mut().rev() {
            *slot = k % n;
            k /= n;
        }
        let p: Vec<f64> = idx.iter().map(|&i| axis.coord(i)).collect();
        let norm2: f64 = p.iter().map(|v| v * v).sum();
        let inside = if closed { norm2 <= r2 + tol } else { norm2 < r2 - tol };
        if inside {
            out.push(p);
        }
    }
    out
}

/// Odd node count per axis for a lattice over `[-radius, radius]` whose spacing is at most `step`.
pub fn lattice_points(radius: f64, step: f64) -> usize {
    2 * (radius / step - 1e-9).ceil().max(1.0) as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_coordinates_are_exact_at_ends_and_centre() {
        let a = Axis::new(-1.0, 1.0, 101).unwrap();
        assert_eq!(a.coord(0), -1.0);
        assert_eq!(a.coord(50), 0.0);
        assert_eq!(a.coord(100), 1.0);
        let b = Axis::new(0.1, 0.7, 7).unwrap();
        assert_eq!(b.coord(6), 0.7);
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::cylinder(0.0, 1.0, 1.0, 2, 3, 4).unwrap();
        let mut idx = [0; 3];
        for k in 0..g.len() {
            g.unravel(k, &mut idx);
            assert_eq!(g.flat(&idx), k);
        }
        assert_eq!(g.stride(0), 16);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn interpolation_is_exact_for_multilinear_functions() {
        let g = Grid::cylinder(-1.0, 2.0, 1.0, 2, 7, 5).unwrap();
        let f = FnPoint(|x: f64, y: &[f64]| 1.0 + 2.0 * x - y[0] + 0.5 * x * y[1]);
        let field = ScalarField::sample(&g, &f).unwrap();
        for &(x, a, b) in &[(0.3, 0.2, -0.7), (-1.0, -1.0, 1.0), (1.99, 0.01, 0.5)] {
            let want = f.value(x, &[a, b]).unwrap();
            let got = field.interpolate(x, &[a, b]).unwrap();
            assert!((want - got).abs() < 1e-12, "{want} vs {got}");
        }
        assert!(matches!(
            field.interpolate(2.5, &[0.0, 0.0]),
            Err(Error::OutsideSupport(_))
        ));
    }

    #[test]
    fn absent_nodes_block_interpolation_only_when_weighted() {
        let g = Grid::cylinder(0.0, 1.0, 1.0, 1, 2, 3).unwrap();
        let field = ScalarField::new(g, vec![1.0, 2.0, f64::NAN, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(field.interpolate(0.0, &[0.0]).unwrap(), 2.0);
        assert!(field.interpolate(0.0, &[0.5]).is_err());
    }

    #[test]
    fn lattice_membership() {
        let open = ball_lattice(1.0, 1, 5, false);
        assert_eq!(open, vec![vec![-0.5], vec![0.0], vec![0.5]]);
        let closed = ball_lattice(1.0, 1, 5, true);
        assert_eq!(closed.len(), 5);
        assert_eq!(lattice_points(3.0, 0.5), 13);
        assert_eq!(lattice_points(3.0, 0.4), 17);
    }

    #[test]
    fn csv_skips_absent_nodes() {
        let g = Grid::cylinder(0.0, 1.0, 1.0, 1, 2, 2).unwrap();
        let field = ScalarField::new(g, vec![1.0, f64::NAN, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("x,y1,value\n"));
    }
}
