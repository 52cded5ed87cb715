use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernel::DiscreteKernel;

use super::{numerical_flux, run, stable_dt, SolutionStore, SolverConfig, Stepper};

/// Energy balance between two consecutive snapshots:
/// `|u(t1)|^2 + sum dt (Q + D) - |u(t0)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyResidual {
    pub t_start: f64,
    pub t_end: f64,
    pub residual: f64,
}

/// Residuals over every consecutive snapshot pair. For an explicit Euler
/// run the residual equals `sum dt^2 |L(u)|^2`, so it is nonnegative and
/// first order in the step.
pub fn energy_ledger_check(store: &SolutionStore) -> Result<Vec<EnergyResidual>> {
    let times = store.times();
    if times.len() < 2 {
        return Err(Error::Precondition("energy check needs at least two snapshots".into()));
    }
    let ledger = store.ledger();
    let mut out = Vec::with_capacity(times.len() - 1);
    let mut row = 0;
    for (i, w) in times.windows(2).enumerate() {
        let tol = 1e-12 * w[1].abs().max(1.0);
        let mut dissipated = 0.0;
        while row < ledger.len() && ledger[row].t <= w[1] + tol {
            if ledger[row].t > w[0] + tol {
                dissipated += ledger[row].dissipation;
            }
            row += 1;
        }
        let e0 = store.snapshots()[i].l2_norm_sq();
        let e1 = store.snapshots()[i + 1].l2_norm_sq();
        out.push(EnergyResidual { t_start: w[0], t_end: w[1], residual: e1 + dissipated - e0 });
    }
    Ok(out)
}

/// Worst Kruzkov cell-entropy residual of one step over all requested
/// levels and cells; nonpositive values certify the inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyStep {
    pub t: f64,
    /// Inequality with the nonlocal term applied to the entropy,
    /// `dt (J * eta(u) - eta(u))`. Monotone schemes satisfy it up to
    /// rounding.
    pub worst: f64,
    /// Inequality with the chain-rule form `dt eta'(u) (J * u - u)`. An
    /// explicit step can exceed it by `O(dt)` in cells where `u` crosses
    /// the level `k`.
    pub worst_chain_rule: f64,
}

/// Replays the run recorded in `store` (same steps, same arithmetic) and
/// evaluates the discrete entropy inequality for `eta_k(u) = (u - k)^+`
/// with the entropy flux induced by the scheme.
pub fn entropy_residual(store: &SolutionStore, k_values: &[f64]) -> Result<Vec<EntropyStep>> {
    let cfg = store.config().ok_or_else(|| Error::Precondition("entropy audit needs a solver run".into()))?;
    let kernel = store.kernel().ok_or_else(|| Error::Precondition("store has no kernel".into()))?;
    let grid = *store.grid();
    let n = grid.len();
    let dx = grid.dx();
    let eps = cfg.viscosity_eps;
    let mut stepper = Stepper::new(&grid, kernel, cfg)?;
    let taps: Vec<f64> = kernel.weights().iter().map(|w| w * dx).collect();
    let m = kernel.half_width();
    // mass of the kernel falling outside the domain, seen from cell i
    let deficit: Vec<f64> = (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .filter(|(idx, _)| {
                    let src = i as isize - (*idx as isize - m as isize);
                    src < 0 || src >= n as isize
                })
                .map(|(_, t)| *t)
                .sum()
        })
        .collect();

    let mut u = store.initial().values().to_vec();
    let mut next = vec![0.0; n];
    let mut conv_u = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut conv_eta = vec![0.0; n];
    let mut out = Vec::with_capacity(store.ledger().len());
    let flux = |l: f64, r: f64| numerical_flux(l, r, cfg);
    let ghost = |v: &[f64], i: isize| if i < 0 || i >= n as isize { 0.0 } else { v[i as usize] };

    for row in store.ledger().iter().skip(1) {
        let dt = row.dt;
        stepper.convolve(&u, &mut conv_u);
        stepper.advance(&u, dt, &mut next);
        let mut worst = f64::NEG_INFINITY;
        let mut worst_cr = f64::NEG_INFINITY;
        for &k in k_values {
            for i in 0..n {
                eta[i] = (u[i] - k).max(0.0);
            }
            stepper.convolve(&eta, &mut conv_eta);
            let v = |i: isize| {
                if i < 0 || i >= n as isize {
                    0.0
                } else {
                    u[i as usize].max(k)
                }
            };
            let kt = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { k };
            let g = |face: isize| flux(v(face - 1), v(face)) - flux(kt(face - 1), kt(face));
            let fk = |face: isize| flux(kt(face - 1), kt(face));
            for i in 0..n {
                let ii = i as isize;
                let d_g = g(ii + 1) - g(ii);
                let lap_eta = ghost(&eta, ii + 1) - 2.0 * eta[i] + ghost(&eta, ii - 1);
                let lap_k = kt(ii + 1) - 2.0 * k + kt(ii - 1);
                let b = -dt * k * deficit[i] - dt / dx * (fk(ii + 1) - fk(ii)) + dt * eps * lap_k / (dx * dx);
                let new_eta = (next[i] - k).max(0.0);
                let base = new_eta - eta[i] + dt / dx * d_g;
                let r = base - dt * (conv_eta[i] - eta[i]) - dt * eps * lap_eta / (dx * dx) - b.max(0.0);
                worst = worst.max(r);
                let slope = if u[i] > k { 1.0 } else { 0.0 };
                let lap_u = ghost(&u, ii + 1) - 2.0 * u[i] + ghost(&u, ii - 1);
                let r_cr = base + dt * slope * (u[i] - conv_u[i]) - dt * eps * slope * lap_u / (dx * dx);
                worst_cr = worst_cr.max(r_cr);
            }
        }
        out.push(EntropyStep { t: row.t, worst, worst_chain_rule: worst_cr });
        core::mem::swap(&mut u, &mut next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityRow {
    pub eps: f64,
    /// `|u_eps(T) - u_0(T)|_1`.
    pub distance: f64,
}

/// Runs `cfg` once per viscosity in `eps_list` (decreasing, `>= 0`) and
/// once with `eps = 0`, all with the same fixed step so that only the
/// viscosity differs.
pub fn vanishing_viscosity_compare(
    phi: &Field,
    kernel: &DiscreteKernel,
    cfg: &SolverConfig,
    eps_list: &[f64],
) -> Result<Vec<ViscosityRow>> {
    if eps_list.is_empty() {
        return Err(Error::invalid("empty viscosity list"));
    }
    if eps_list.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
        return Err(Error::invalid("viscosities must be finite and nonnegative"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("viscosities must be strictly decreasing"));
    }
    let eps_max = eps_list[0];
    let mut probe = cfg.clone();
    probe.viscosity_eps = eps_max;
    let mut dt = stable_dt(phi, kernel, &probe);
    if let Some(cap) = cfg.dt_max {
        dt = dt.min(cap);
    }
    let solve = |eps: f64| -> Result<Field> {
        let mut c = cfg.clone();
        c.viscosity_eps = eps;
        c.dt_max = Some(dt);
        c.snapshot_times.clear();
        Ok(run(phi, kernel, &c)?.final_field().clone())
    };
    let reference = solve(0.0)?;
    eps_list
        .iter()
        .map(|&eps| {
            let distance = if eps == 0.0 { 0.0 } else { solve(eps)?.difference(&reference)?.lp_norm(1.0)? };
            Ok(ViscosityRow { eps, distance })
        })
        .collect()
}
