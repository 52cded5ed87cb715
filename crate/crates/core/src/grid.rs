//! Uniform 1-D grids and cell-averaged fields.
//!
//! The real line is truncated to `[x_min, x_min + n dx]` and everything
//! outside is treated as zero (zero extension). Fields store cell averages,
//! so `mass` is an exact Riemann sum and the finite-volume solver conserves
//! it to rounding.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::solver::SolutionStore;

/// Smallest admissible cell count.
pub const MIN_CELLS: usize = 8;

/// Relative slack used by the nonnegativity invariant of [`Field`].
pub const NONNEG_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() {
            return Err(Error::invalid("grid origin must be finite"));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::range("dx", dx, "(0, inf)"));
        }
        if n < MIN_CELLS {
            return Err(Error::range("n", n as f64, "[8, inf)"));
        }
        Ok(Grid { x_min, dx, n })
    }

    /// `n` cells covering `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::range("half_width", half_width, "(0, inf)"));
        }
        Grid::new(-half_width, 2.0 * half_width / n as f64, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n as f64 * self.dx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest distance from the origin still inside the domain.
    pub fn half_width(&self) -> f64 {
        (-self.x_min).max(self.x_max())
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.center(i))
    }

    /// Same origin, spacing and size up to a relative tolerance.
    pub fn matches(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.dx.max(self.x_min.abs())
    }
}

/// Cell averages of a real function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    nonneg: bool,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} cells", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at cell {i}")));
        }
        Ok(Field { grid, values, nonneg: false })
    }

    /// Like [`Field::new`] but also certifies nonnegativity (up to
    /// `NONNEG_SLACK` relative rounding).
    pub fn nonnegative(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mut f = Field::new(grid, values)?;
        if !f.satisfies_nonneg() {
            return Err(Error::invalid(format!("field has negative values (min {})", f.min())));
        }
        f.nonneg = true;
        Ok(f)
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: alloc::vec![0.0; grid.len()], nonneg: true }
    }

    /// Samples `f` at the cell centers.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        let mut field = Field::new(grid, values)?;
        field.nonneg = field.values.iter().all(|&v| v >= 0.0);
        Ok(field)
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>, nonneg: bool) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values, nonneg }
    }

    pub(crate) fn with_nonneg_flag(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn satisfies_nonneg(&self) -> bool {
        self.min() >= -NONNEG_SLACK * self.max_abs().max(1.0)
    }

    /// `(sum |f_i|^p dx)^(1/p)`, or `max |f_i|` for `p = inf`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::range("p", p, "[1, inf]"));
        }
        let peak = self.max_abs();
        if p.is_infinite() || peak == 0.0 {
            return Ok(peak);
        }
        let dx = self.grid.dx;
        if p == 1.0 {
            return Ok(self.values.iter().map(|v| v.abs()).sum::<f64>() * dx);
        }
        if p == 2.0 {
            return Ok(libm::sqrt(self.values.iter().map(|v| v * v).sum::<f64>() * dx));
        }
        // Scale by the peak so large p neither overflows nor underflows.
        let s: f64 = self.values.iter().map(|v| libm::pow(v.abs() / peak, p)).sum();
        Ok(peak * libm::pow(s * dx, 1.0 / p))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx
    }

    /// Signed mass `sum f_i dx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx
    }

    /// Piecewise-linear interpolation between cell centers.
    ///
    /// Inside the two boundary half-cells the nearest value is held
    /// constant; outside `[x_min, x_max]` the result is zero. Both choices
    /// keep the interpolant monotone and sign-preserving.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        if !(x >= g.x_min && x <= g.x_max()) {
            return 0.0;
        }
        let s = (x - g.x_min) / g.dx - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = g.n - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s as usize;
        let theta = s - i as f64;
        if theta == 0.0 {
            return self.values[i];
        }
        (1.0 - theta) * self.values[i] + theta * self.values[i + 1]
    }

    /// `sum_{|x_i| > r} |f_i| dx`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || r >= self.grid.half_width() {
            return Err(Error::range("R", r, "(0, domain half-width)"));
        }
        Ok(self.tail_mass_unchecked(r))
    }

    pub(crate) fn tail_mass_unchecked(&self, r: f64) -> f64 {
        let g = &self.grid;
        self.values.iter().enumerate().filter(|(i, _)| g.center(*i).abs() > r).map(|(_, v)| v.abs()).sum::<f64>() * g.dx
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| c * v).collect(), nonneg: self.nonneg && c >= 0.0 }
    }

    /// Pointwise `self - other` on a matching grid.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        if !self.grid.matches(&other.grid) {
            return Err(Error::GridMismatch("difference of fields on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_parts(self.grid, values, false))
    }

    /// Linear blend `(1 - theta) self + theta other`.
    pub(crate) fn lerp(&self, other: &Field, theta: f64) -> Field {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| (1.0 - theta) * a + theta * b).collect();
        Field::from_parts(self.grid, values, self.nonneg && other.nonneg)
    }

    /// Total variation `sum |f_{i+1} - f_i|` including the jumps to the zero
    /// extension.
    pub fn total_variation(&self) -> f64 {
        let v = &self.values;
        let inner: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        inner + v[0].abs() + v[v.len() - 1].abs()
    }
}

/// The scaled field `x -> lambda u(lambda^2 t, lambda x)` sampled at the
/// centers of `target`.
///
/// `u(s, .)` is obtained by linear interpolation in time between the two
/// snapshots bracketing `s = lambda^2 t` and by [`Field::interpolate`] in
/// space.
pub fn rescale(store: &SolutionStore, lambda: f64, t: f64, target: &Grid) -> Result<Field> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::range("lambda", lambda, "(0, inf)"));
    }
    if !(t > 0.0) {
        return Err(Error::range("t", t, "(0, inf)"));
    }
    let s = lambda * lambda * t;
    let u = store.field_at(s)?;
    let values = target.centers().map(|x| lambda * u.interpolate(lambda * x)).collect();
    Ok(Field::from_parts(*target, values, u.is_nonneg()))
}
