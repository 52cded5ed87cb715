use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::DiscreteKernel;

use super::SolverConfig;

/// One accepted step. The first row (`t = 0`, `dt = 0`) records the
/// initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub l2_norm_sq: f64,
    /// `dt (Q + D_flux + D_visc)` at the state before the step.
    pub dissipation: f64,
    /// Mass lost through the boundary during the step.
    pub leak: f64,
}

/// Snapshots of a run (or of an analytic solution) plus the step ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionStore {
    config: Option<SolverConfig>,
    kernel: Option<DiscreteKernel>,
    times: Vec<f64>,
    snapshots: Vec<Field>,
    ledger: Vec<LedgerRow>,
}

impl SolutionStore {
    pub(crate) fn start(config: SolverConfig, kernel: DiscreteKernel, phi: Field) -> Self {
        let row =
            LedgerRow { t: 0.0, dt: 0.0, mass: phi.mass(), l2_norm_sq: phi.l2_norm_sq(), dissipation: 0.0, leak: 0.0 };
        SolutionStore {
            config: Some(config),
            kernel: Some(kernel),
            times: alloc::vec![0.0],
            snapshots: alloc::vec![phi],
            ledger: alloc::vec![row],
        }
    }

    pub(crate) fn push_row(&mut self, row: LedgerRow) {
        self.ledger.push(row);
    }

    pub(crate) fn push_snapshot(&mut self, t: f64, f: Field) {
        if self.times.last() == Some(&t) {
            return;
        }
        self.times.push(t);
        self.snapshots.push(f);
    }

    /// A store without a solver run behind it (e.g. samples of a closed-form
    /// solution). The ledger holds one row per snapshot with zero dissipation
    /// and leak.
    pub fn from_snapshots(times: Vec<f64>, snapshots: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != snapshots.len() {
            return Err(Error::invalid(format!("{} times for {} snapshots", times.len(), snapshots.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid("snapshot times must be finite and strictly increasing"));
        }
        let g = *snapshots[0].grid();
        if snapshots.iter().any(|f| !f.grid().matches(&g)) {
            return Err(Error::GridMismatch("snapshots live on different grids".into()));
        }
        let mut prev = times[0];
        let ledger = times
            .iter()
            .zip(&snapshots)
            .map(|(t, f)| {
                let row = LedgerRow {
                    t: *t,
                    dt: t - prev,
                    mass: f.mass(),
                    l2_norm_sq: f.l2_norm_sq(),
                    dissipation: 0.0,
                    leak: 0.0,
                };
                prev = *t;
                row
            })
            .collect();
        Ok(SolutionStore { config: None, kernel: None, times, snapshots, ledger })
    }

    pub fn config(&self) -> Option<&SolverConfig> {
        self.config.as_ref()
    }

    pub fn kernel(&self) -> Option<&DiscreteKernel> {
        self.kernel.as_ref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn ledger(&self) -> &[LedgerRow] {
        &self.ledger
    }

    pub fn grid(&self) -> &Grid {
        self.snapshots[0].grid()
    }

    pub fn initial(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn final_field(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Snapshot stored at exactly `t` (to `1e-12` relative), if any.
    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|s| (s - t).abs() <= tol).map(|i| &self.snapshots[i])
    }

    /// `u(t)` by linear interpolation between the bracketing snapshots.
    pub fn field_at(&self, t: f64) -> Result<Field> {
        if let Some(f) = self.snapshot_at(t) {
            return Ok(f.clone());
        }
        let (t0, t1) = (self.first_time(), self.final_time());
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfRange { what: "t", value: t, range: format!("[{t0}, {t1}]") });
        }
        let i = self.times.partition_point(|s| *s <= t);
        let (ta, tb) = (self.times[i - 1], self.times[i]);
        let theta = (t - ta) / (tb - ta);
        Ok(self.snapshots[i - 1].lerp(&self.snapshots[i], theta))
    }

    /// Total boundary leak accumulated up to time `t`.
    pub fn cumulative_leak_at(&self, t: f64) -> f64 {
        let tol = 1e-12 * t.abs().max(1.0);
        self.ledger.iter().take_while(|r| r.t <= t + tol).map(|r| r.leak).sum()
    }
}
