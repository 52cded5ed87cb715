//! Explicit monotone finite-volume integration of
//! `u_t = J * u - u - (f(u))_x + eps u_xx` with `f(u) = a |u|^{q-1} u`.

mod diagnostics;
mod stepper;
mod store;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use diagnostics::{
    energy_ledger_check, entropy_residual, vanishing_viscosity_compare, EnergyResidual, EntropyStep, ViscosityRow,
};
pub use stepper::{StepReport, Stepper};
pub use store::{LedgerRow, SolutionStore};

use crate::error::{Error, Result};
use crate::grid::{Field, NONNEG_SLACK};
use crate::kernel::{ConvolutionPath, DiscreteKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    EngquistOsher,
    Godunov,
    /// `F(uL, uR) = f(uL)`; only valid for `a >= 0` and nonnegative data.
    UpwindPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub q: f64,
    pub a: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub viscosity_eps: f64,
    pub t_end: f64,
    /// Times (in `(0, t_end]`) at which snapshots are stored. `0` and
    /// `t_end` are always stored.
    pub snapshot_times: Vec<f64>,
    pub convolution: ConvolutionPath,
    /// Optional cap on the adaptive step.
    pub dt_max: Option<f64>,
}

impl SolverConfig {
    pub fn new(q: f64, t_end: f64) -> Self {
        SolverConfig {
            q,
            a: 1.0,
            cfl: 0.45,
            scheme: Scheme::EngquistOsher,
            viscosity_eps: 0.0,
            t_end,
            snapshot_times: Vec::new(),
            convolution: ConvolutionPath::Fft,
            dt_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 2.0) || !self.q.is_finite() {
            return Err(Error::range("q", self.q, "[2, inf)"));
        }
        if !self.a.is_finite() {
            return Err(Error::range("a", self.a, "finite"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::range("cfl", self.cfl, "(0, 1]"));
        }
        if !(self.viscosity_eps >= 0.0) || !self.viscosity_eps.is_finite() {
            return Err(Error::range("viscosity_eps", self.viscosity_eps, "[0, inf)"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::range("t_end", self.t_end, "(0, inf)"));
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::range("dt_max", d, "(0, inf)"));
            }
        }
        if self.scheme == Scheme::UpwindPositive && self.a < 0.0 {
            return Err(Error::invalid("upwind_positive requires a >= 0"));
        }
        for w in self.snapshot_times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::invalid(format!(
                    "snapshot times must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end)) {
            return Err(Error::range("snapshot time", *t, "[0, t_end]"));
        }
        Ok(())
    }

    /// Stored times after the initial one, ending with `t_end`.
    pub(crate) fn targets(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.snapshot_times.iter().copied().filter(|t| *t > 0.0 && *t < self.t_end).collect();
        out.push(self.t_end);
        out
    }

    /// `f(u) = a |u|^{q-1} u`.
    pub fn flux(&self, u: f64) -> f64 {
        flux(self.q, self.a, u)
    }

    /// `f'(u) = a q |u|^{q-1}`.
    pub fn dflux(&self, u: f64) -> f64 {
        dflux(self.q, self.a, u)
    }

    pub fn numerical_flux(&self, ul: f64, ur: f64) -> f64 {
        numerical_flux(ul, ur, self)
    }
}

fn abs_pow(u: f64, e: f64) -> f64 {
    let v = u.abs();
    if e == 1.0 {
        v
    } else if e == 2.0 {
        v * v
    } else {
        libm::pow(v, e)
    }
}

pub fn flux(q: f64, a: f64, u: f64) -> f64 {
    a * abs_pow(u, q - 1.0) * u
}

pub fn dflux(q: f64, a: f64, u: f64) -> f64 {
    a * q * abs_pow(u, q - 1.0)
}

/// Monotone two-point flux `F(uL, uR)` with `F(u, u) = f(u)`.
///
/// `f'` has the sign of `a` everywhere, so the Engquist-Osher splitting is
/// `f+ = f, f- = 0` for `a >= 0` and the reverse otherwise.
pub fn numerical_flux(ul: f64, ur: f64, cfg: &SolverConfig) -> f64 {
    let f = |u| flux(cfg.q, cfg.a, u);
    match cfg.scheme {
        Scheme::EngquistOsher => {
            if cfg.a >= 0.0 {
                f(ul)
            } else {
                f(ur)
            }
        }
        Scheme::Godunov => {
            // f is monotone, so the extrema over [uL, uR] sit at the ends
            let (fl, fr) = (f(ul), f(ur));
            if ul <= ur {
                fl.min(fr)
            } else {
                fl.max(fr)
            }
        }
        Scheme::UpwindPositive => f(ul),
    }
}

/// `cfl / (max |f'(u_i)| / dx + 1 + 2 eps / dx^2)`.
pub fn stable_dt(field: &Field, _kernel: &DiscreteKernel, cfg: &SolverConfig) -> f64 {
    stable_dt_values(field.values(), field.grid().dx(), cfg)
}

pub(crate) fn stable_dt_values(u: &[f64], dx: f64, cfg: &SolverConfig) -> f64 {
    let speed = u.iter().fold(0.0f64, |m, v| m.max(cfg.dflux(*v).abs()));
    cfg.cfl / (speed / dx + 1.0 + 2.0 * cfg.viscosity_eps / (dx * dx))
}

fn check_inputs(field: &Field, kernel: &DiscreteKernel, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    let dx = field.grid().dx();
    if (kernel.dx() - dx).abs() > 1e-12 * dx {
        return Err(Error::SpacingMismatch { left: kernel.dx(), right: dx });
    }
    if cfg.scheme == Scheme::UpwindPositive && field.min() < -NONNEG_SLACK * field.max_abs().max(1.0) {
        return Err(Error::invalid("upwind_positive requires nonnegative data"));
    }
    Ok(())
}

/// One explicit Euler step of the finite-volume scheme.
pub fn step(field: &Field, kernel: &DiscreteKernel, cfg: &SolverConfig, dt: f64) -> Result<Field> {
    check_inputs(field, kernel, cfg)?;
    let limit = stable_dt(field, kernel, cfg);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut stepper = Stepper::new(field.grid(), kernel, cfg)?;
    let mut out = vec![0.0; field.grid().len()];
    stepper.advance(field.values(), dt, &mut out);
    Field::new(*field.grid(), out).map(|f| f.with_nonneg_flag(field.is_nonneg()))
}

/// Integrates from `phi` to `cfg.t_end`.
///
/// The step is `min(stable_dt, dt_max)`, clipped so every requested
/// snapshot time is hit exactly. Each accepted step appends a ledger row.
pub fn run(phi: &Field, kernel: &DiscreteKernel, cfg: &SolverConfig) -> Result<SolutionStore> {
    check_inputs(phi, kernel, cfg)?;
    let grid = *phi.grid();
    let dx = grid.dx();
    let nonneg = phi.is_nonneg() || phi.min() >= 0.0;
    let mut stepper = Stepper::new(&grid, kernel, cfg)?;
    let mut store = SolutionStore::start(cfg.clone(), kernel.clone(), phi.clone().with_nonneg_flag(nonneg));
    let mut u = phi.values().to_vec();
    let mut next = vec![0.0; u.len()];
    let mut t = 0.0;
    for target in cfg.targets() {
        while t < target {
            let mut dt = stable_dt_values(&u, dx, cfg);
            if let Some(cap) = cfg.dt_max {
                dt = dt.min(cap);
            }
            let remaining = target - t;
            let hits = dt >= remaining * (1.0 - 1e-12);
            if hits {
                dt = remaining;
            }
            let report = stepper.advance(&u, dt, &mut next);
            let t_new = if hits { target } else { t + dt };
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { t: t_new, last_good: alloc::boxed::Box::new(store) });
            }
            core::mem::swap(&mut u, &mut next);
            t = t_new;
            store.push_row(LedgerRow {
                t,
                dt,
                mass: u.iter().sum::<f64>() * dx,
                l2_norm_sq: u.iter().map(|v| v * v).sum::<f64>() * dx,
                dissipation: report.dissipation,
                leak: report.leak,
            });
        }
        store.push_snapshot(t, Field::from_parts(grid, u.clone(), nonneg));
    }
    Ok(store)
}
