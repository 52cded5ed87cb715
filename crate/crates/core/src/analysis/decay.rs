use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::solver::SolutionStore;

/// Least-squares fit of `log |u(t)|_p = slope log t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub p: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits the decay exponent of the `L^p` norm over the snapshots with
/// `t_lo <= t <= t_hi`.
pub fn decay_exponent(store: &SolutionStore, p: f64, window: (f64, f64)) -> Result<DecayFit> {
    let (t_lo, t_hi) = window;
    if !(t_lo >= 1.0 && t_hi > t_lo) {
        return Err(Error::invalid(format!("decay window ({t_lo}, {t_hi}) must satisfy 1 <= t_lo < t_hi")));
    }
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (t, f) in store.times().iter().zip(store.snapshots()) {
        if *t >= t_lo && *t <= t_hi {
            let norm = f.lp_norm(p)?;
            if !(norm > 0.0) {
                return Err(Error::Degenerate(format!("zero L^{p} norm at t = {t}")));
            }
            pts.push((libm::log(*t), libm::log(norm)));
        }
    }
    if pts.len() < 8 {
        return Err(Error::Precondition(format!("{} snapshots in [{t_lo}, {t_hi}], at least 8 needed", pts.len())));
    }
    let (slope, intercept, r_squared) = linear_fit(&pts);
    Ok(DecayFit { p, t_lo, t_hi, slope, intercept, r_squared, points: pts.len() })
}

pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Smallest `C` with
/// `|u(t)|_2 <= C (|phi|_2 (t+1)^{-1/2} + |phi|_1 (t+1)^{-1/4})`
/// over every ledger row.
pub fn fourier_splitting_bound(store: &SolutionStore, phi_norms: (f64, f64)) -> f64 {
    let (l1, l2) = phi_norms;
    store
        .ledger()
        .iter()
        .map(|row| {
            let norm = libm::sqrt(row.l2_norm_sq.max(0.0));
            let s = row.t + 1.0;
            let bound = l2 / libm::sqrt(s) + l1 / libm::sqrt(libm::sqrt(s));
            if norm == 0.0 {
                0.0
            } else if bound > 0.0 {
                norm / bound
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}
