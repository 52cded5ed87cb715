use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{quadratic_form_taps, Convolver, DiscreteKernel};

use super::{numerical_flux, stable_dt_values, SolverConfig};

/// Per-step bookkeeping returned by [`Stepper::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// `dt (Q(u) + D_flux(u) + D_visc(u))` evaluated at the old state.
    pub dissipation: f64,
    /// Mass that left the domain during the step (flux, kernel tail and
    /// viscous boundary terms); `mass_new = mass_old - leak`.
    pub leak: f64,
}

/// Reusable buffers and the cached convolution plan for one grid, kernel
/// and configuration.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SolverConfig,
    dx: f64,
    n: usize,
    taps: Vec<f64>,
    conv: Convolver,
    conv_buf: Vec<f64>,
    flux_buf: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Grid, kernel: &DiscreteKernel, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let dx = grid.dx();
        if (kernel.dx() - dx).abs() > 1e-12 * dx {
            return Err(Error::SpacingMismatch { left: kernel.dx(), right: dx });
        }
        let n = grid.len();
        Ok(Stepper {
            cfg: cfg.clone(),
            dx,
            n,
            taps: kernel.weights().iter().map(|w| w * dx).collect(),
            conv: Convolver::new(kernel, n, cfg.convolution),
            conv_buf: vec![0.0; n],
            flux_buf: vec![0.0; n + 1],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn stable_dt(&self, u: &[f64]) -> f64 {
        stable_dt_values(u, self.dx, &self.cfg)
    }

    /// `out_i = sum_j w_j dx f_{i-j}` with zero extension.
    pub fn convolve(&self, f: &[f64], out: &mut [f64]) {
        self.conv.apply(f, out);
    }

    /// Interface fluxes `F_{i-1/2}` for `i = 0..=n` with zero ghost cells.
    pub fn interface_fluxes(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, o) in out.iter_mut().enumerate().take(n + 1) {
            let ul = if k == 0 { 0.0 } else { u[k - 1] };
            let ur = if k == n { 0.0 } else { u[k] };
            *o = numerical_flux(ul, ur, &self.cfg);
        }
    }

    /// Kernel quadratic form `sum_i sum_j w_j dx (u_i - u_{i-j})^2 dx` over
    /// every index where a term can be nonzero.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        quadratic_form_taps(&self.taps, u, self.dx)
    }

    /// `out = u + dt L(u)`.
    pub fn advance(&mut self, u: &[f64], dt: f64, out: &mut [f64]) -> StepReport {
        let n = self.n;
        let dx = self.dx;
        let eps = self.cfg.viscosity_eps;
        let mut conv = core::mem::take(&mut self.conv_buf);
        let mut fl = core::mem::take(&mut self.flux_buf);
        self.conv.apply(u, &mut conv);
        self.interface_fluxes(u, &mut fl);
        let at = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { u[i as usize] };
        let mut d_flux = 0.0;
        let mut d_visc = 0.0;
        for i in 0..n {
            let lap = at(i as isize + 1) - 2.0 * u[i] + at(i as isize - 1);
            let rhs = conv[i] - u[i] - (fl[i + 1] - fl[i]) / dx + eps * lap / (dx * dx);
            out[i] = u[i] + dt * rhs;
            d_flux += u[i] * (fl[i + 1] - fl[i]);
            d_visc += u[i] * lap;
        }
        let mass: f64 = u.iter().sum::<f64>() * dx;
        let inside: f64 = conv.iter().sum::<f64>() * dx;
        let leak = dt * (fl[n] - fl[0]) + dt * (mass - inside) + dt * eps * (u[0] + u[n - 1]) / dx;
        let q = if dt > 0.0 { self.quadratic_form(u) } else { 0.0 };
        let dissipation = dt * (q + 2.0 * d_flux - 2.0 * eps * d_visc / dx);
        self.conv_buf = conv;
        self.flux_buf = fl;
        StepReport { dissipation, leak }
    }
}
