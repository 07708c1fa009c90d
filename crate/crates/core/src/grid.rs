//! Uniform periodic grid and the discrete calculus used everywhere else.
//!
//! Index arithmetic wraps modulo `n`, so periodicity of the field and of all
//! its derivatives is structural. Stencils are second-order centered
//! differences; quadrature is the periodic rectangle rule.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[origin, origin + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    n: usize,
    length: f64,
    origin: f64,
}

/// Serialized form of a [`Grid`]; `dx` is always derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
    #[serde(default)]
    pub origin: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::with_origin(s.n, s.length, s.origin)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            n: g.n,
            length: g.length,
            origin: g.origin,
        }
    }
}

impl Grid {
    /// Grid on `[0, length)`.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        Self::with_origin(n, length, 0.0)
    }

    pub fn with_origin(n: usize, length: f64, origin: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "grid.n must be even and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Parameter(format!(
                "grid.length must be positive, got {length}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::Parameter("grid.origin must be finite".into()));
        }
        Ok(Grid { n, length, origin })
    }

    /// The `[0, 2π)` grid used by the figure reproductions.
    pub fn periodic_2pi(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Node coordinate `x_i`.
    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx()
    }

    /// Interface coordinate `x_{i+1/2}`.
    pub fn x_half(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Index `i + offset` wrapped into `0..n`.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        let n = self.n as isize;
        (((i as isize + offset) % n + n) % n) as usize
    }

    /// Samples `f` at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField {
            grid: *self,
            values: self.nodes().map(f).collect(),
        }
    }

    pub fn constant(&self, c: f64) -> PeriodicField {
        PeriodicField {
            grid: *self,
            values: vec![c; self.n],
        }
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.length == other.length && self.origin == other.origin
    }
}

/// Samples of a scalar function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    values: Vec<f64>,
}

/// L², H¹ and sup norms plus the minimum of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub sup: f64,
    pub min: f64,
}

impl PeriodicField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at index {i}")));
        }
        Ok(PeriodicField { grid, values })
    }

    /// Builds a field without the finiteness check; used on hot paths where
    /// values come from arithmetic on finite inputs.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        PeriodicField { grid, values }
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

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, i: usize, offset: isize) -> f64 {
        self.values[self.grid.wrap(i, offset)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        PeriodicField::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &PeriodicField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<PeriodicField> {
        self.check_grid(other)?;
        Ok(PeriodicField::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn check_grid(&self, other: &PeriodicField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "fields live on different grids ({:?} vs {:?})",
                self.grid, other.grid
            )))
        }
    }

    /// Cyclic shift by `k` grid points: `out[i] = self[i - k]`.
    pub fn shifted(&self, k: isize) -> PeriodicField {
        let values = (0..self.len()).map(|i| self.at(i, -k)).collect();
        PeriodicField::from_raw(self.grid, values)
    }

    pub fn scaled(&self, s: f64) -> PeriodicField {
        self.map(|v| s * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(f_{i+1} - f_{i-1}) / 2dx`
    pub fn d1(&self) -> PeriodicField {
        let c = 0.5 / self.grid.dx();
        self.stencil(|i| c * (self.at(i, 1) - self.at(i, -1)))
    }

    /// `(f_{i+1} - 2 f_i + f_{i-1}) / dx²`
    pub fn d2(&self) -> PeriodicField {
        let dx = self.grid.dx();
        let c = 1.0 / (dx * dx);
        self.stencil(|i| c * (self.at(i, 1) - 2.0 * self.values[i] + self.at(i, -1)))
    }

    /// `(f_{i+2} - 2 f_{i+1} + 2 f_{i-1} - f_{i-2}) / 2dx³`
    pub fn d3(&self) -> PeriodicField {
        let dx = self.grid.dx();
        let c = 0.5 / (dx * dx * dx);
        self.stencil(|i| {
            c * (self.at(i, 2) - 2.0 * self.at(i, 1) + 2.0 * self.at(i, -1) - self.at(i, -2))
        })
    }

    /// Forward difference `(f_{i+1} - f_i) / dx`, located at `x_{i+1/2}`.
    pub fn forward_diff(&self) -> Vec<f64> {
        let inv = 1.0 / self.grid.dx();
        (0..self.len())
            .map(|i| inv * (self.at(i, 1) - self.values[i]))
            .collect()
    }

    fn stencil(&self, f: impl Fn(usize) -> f64) -> PeriodicField {
        PeriodicField::from_raw(self.grid, (0..self.len()).map(f).collect())
    }

    /// Periodic rectangle rule: `dx · Σ f_i`.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// `∫ f g dx` with the same quadrature.
    pub fn dot(&self, other: &PeriodicField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.grid.dx()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn norms(&self) -> Norms {
        let sq: f64 = self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx();
        let d = self.d1();
        let dsq: f64 = d.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx();
        Norms {
            l2: sq.sqrt(),
            h1: (sq + dsq).sqrt(),
            sup: self.sup_abs(),
            min: self.min(),
        }
    }

    /// Writes `x,<column>` rows with a one-line header at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W, column: &str) -> Result<()> {
        let mut buf = String::with_capacity(self.len() * 48);
        writeln!(buf, "x,{column}").unwrap();
        for (i, v) in self.values.iter().enumerate() {
            writeln!(buf, "{:.16e},{:.16e}", self.grid.x(i), v).unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    /// Reads a field written by [`write_csv`](Self::write_csv) onto `grid`.
    /// The x column must match the grid nodes.
    pub fn read_csv<R: BufRead>(input: R, grid: Grid) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.n());
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Input(format!("line {}: missing column", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("line {}: {e}", lineno + 1)))
            };
            let x = parse(cols.next())?;
            let v = parse(cols.next())?;
            let i = values.len();
            if i >= grid.n() {
                return Err(Error::Dimension(format!(
                    "file has more than {} data rows",
                    grid.n()
                )));
            }
            if (x - grid.x(i)).abs() > 1e-9 * grid.length().max(1.0) {
                return Err(Error::Dimension(format!(
                    "row {} has x = {x}, grid node is {}",
                    i,
                    grid.x(i)
                )));
            }
            values.push(v);
        }
        PeriodicField::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g(n: usize) -> Grid {
        Grid::periodic_2pi(n).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(9, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(PeriodicField::new(g(8), vec![0.0; 7]).is_err());
        assert!(PeriodicField::new(g(8), vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn derivatives_annihilate_constants() {
        let f = g(32).constant(1.7);
        for d in [f.d1(), f.d2(), f.d3()] {
            assert!(d.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn d2_of_cos_is_second_order() {
        let err = |n: usize| {
            let grid = g(n);
            let d = grid.sample(f64::cos).d2();
            grid.nodes()
                .zip(d.values())
                .map(|(x, v)| (v + x.cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 1e-3);
        assert_abs_diff_eq!(e1 / e2, 4.0, epsilon = 0.05);
    }

    #[test]
    fn d3_of_sin_is_minus_cos() {
        let grid = g(128);
        let d = grid.sample(f64::sin).d3();
        let dx = grid.dx();
        for (x, v) in grid.nodes().zip(d.values()) {
            assert!((v + x.cos()).abs() < dx * dx);
        }
    }

    #[test]
    fn quadrature_examples() {
        let grid = g(16);
        assert_eq!(grid.constant(1.0).integrate(), 2.0 * PI);
        assert_abs_diff_eq!(grid.sample(f64::sin).integrate(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            grid.sample(|x| x.sin().powi(2)).integrate(),
            PI,
            epsilon = 1e-12
        );
    }

    #[test]
    fn norm_examples() {
        let grid = g(64);
        let z = grid.constant(0.0).norms();
        assert_eq!((z.l2, z.h1, z.sup, z.min), (0.0, 0.0, 0.0, 0.0));
        let two = grid.constant(2.0).norms();
        assert_abs_diff_eq!(two.l2, 2.0 * (2.0 * PI).sqrt(), epsilon = 1e-13);
        assert_eq!((two.sup, two.min), (2.0, 2.0));
        let c = grid.sample(f64::cos).norms();
        assert_abs_diff_eq!(c.l2, PI.sqrt(), epsilon = 1e-10);
        let dx = grid.dx();
        assert!((c.h1 - (2.0 * PI).sqrt()).abs() < dx * dx);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = Grid::with_origin(16, 2.0 * PI, -PI).unwrap();
        let f = grid.sample(|x| (3.0 * x).sin() + 0.1 * x.cos());
        let mut buf = Vec::new();
        f.write_csv(&mut buf, "h").unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,h\n"));
        let back = PeriodicField::read_csv(buf.as_slice(), grid).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn shift_matches_index_wrap() {
        let grid = g(8);
        let f = PeriodicField::new(grid, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(f.shifted(1).values()[0], 7.0);
        assert_eq!(f.shifted(-2).values()[7], 1.0);
    }

    fn field_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 32)
    }

    proptest! {
        #[test]
        fn gradient_integrates_to_zero(v in field_strategy()) {
            let f = PeriodicField::new(g(32), v).unwrap();
            let scale = f.sup_abs().max(1.0) / g(32).dx();
            prop_assert!(f.d1().integrate().abs() <= 1e-13 * scale);
        }

        #[test]
        fn summation_by_parts(a in field_strategy(), b in field_strategy()) {
            let f = PeriodicField::new(g(32), a).unwrap();
            let h = PeriodicField::new(g(32), b).unwrap();
            let lhs = f.dot(&h.d1()).unwrap();
            let rhs = -f.d1().dot(&h).unwrap();
            let scale = f.sup_abs().max(1.0) * h.sup_abs().max(1.0) * 2.0 * PI / g(32).dx();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
        }
    }
}
