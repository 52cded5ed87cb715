use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::solver::SolutionStore;

/// Fitted constants of the tail estimate
/// `int_{|x|>2R} u_lambda(t) <= int_{|x|>R} phi + C (t/R^2 + sqrt(t)/R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    /// `(R, C_R)` with `C_R` the smallest constant for that radius.
    pub per_radius: Vec<(f64, f64)>,
    /// Largest `C_R`.
    pub constant: f64,
    /// `max C_R / C_R'` over pairs with `R > R'`; at most 1 when the
    /// constant does not grow with the radius.
    pub growth: f64,
    /// `max C_R / min C_R`.
    pub spread: f64,
}

/// Measures the tail estimate on a run. The left side is computed on the
/// unscaled solution as `int_{|y| > 2 lambda R} u(lambda^2 t, y) dy` plus
/// the mass that has left the truncated domain by then.
pub fn tail_bound_check(
    store: &SolutionStore,
    phi: &Field,
    r_list: &[f64],
    t_list: &[f64],
    lambda_list: &[f64],
) -> Result<TailFit> {
    if r_list.is_empty() || t_list.is_empty() || lambda_list.is_empty() {
        return Err(Error::invalid("empty R, t or lambda list"));
    }
    if let Some(l) = lambda_list.iter().find(|l| !(**l >= 1.0)) {
        return Err(Error::range("lambda", *l, "[1, inf)"));
    }
    if let Some(t) = t_list.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::range("t", *t, "(0, inf)"));
    }
    let hw = store.grid().half_width();
    let mut per_radius = Vec::with_capacity(r_list.len());
    for &r in r_list {
        if !(r > 0.0 && 2.0 * r < hw) {
            return Err(Error::OutOfRange { what: "R", value: r, range: format!("(0, {})", 0.5 * hw) });
        }
        let phi_tail = phi.tail_mass_unchecked(r);
        let mut c = 0.0f64;
        for &t in t_list {
            for &l in lambda_list {
                let s = l * l * t;
                let u = store.field_at(s)?;
                let outer = 2.0 * l * r;
                let inside = if outer < hw { u.tail_mass_unchecked(outer) } else { 0.0 };
                let lhs = inside + store.cumulative_leak_at(s);
                let denom = t / (r * r) + libm::sqrt(t) / r;
                c = c.max((lhs - phi_tail).max(0.0) / denom);
            }
        }
        per_radius.push((r, c));
    }
    let constant = per_radius.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut sorted = per_radius.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut growth = 1.0f64;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (lo, hi) = (sorted[i].1, sorted[j].1);
            let g = if hi == 0.0 {
                1.0
            } else if lo == 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            };
            growth = growth.max(g);
        }
    }
    let min = per_radius.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let spread = if constant == 0.0 {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        constant / min
    };
    Ok(TailFit { per_radius, constant, growth, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::{DiscreteKernel, KernelSpec};
    use crate::solver::{run, SolverConfig};
    use alloc::vec;

    #[test]
    fn compact_data_short_time() {
        let g = Grid::symmetric(40.0, 800).unwrap();
        let phi = Field::from_fn(g, |x| if x.abs() < 1.0 { 0.5 } else { 0.0 }).unwrap();
        let k = DiscreteKernel::discretize(&KernelSpec::Exponential, g.dx(), 1e-12).unwrap();
        let mut cfg = SolverConfig::new(2.0, 0.01);
        cfg.snapshot_times = vec![0.001, 0.005];
        let s = run(&phi, &k, &cfg).unwrap();
        let fit = tail_bound_check(&s, &phi, &[5.0, 10.0], &[0.001, 0.01], &[1.0]).unwrap();
        assert!(fit.constant.is_finite() && fit.constant >= 0.0);
        // lambda = 1 is the plain tail of u
        let fit1 = tail_bound_check(&s, &phi, &[5.0], &[0.01], &[1.0]).unwrap();
        let u = s.field_at(0.01).unwrap();
        let direct = u.tail_mass(10.0).unwrap() + s.cumulative_leak_at(0.01);
        let denom = 0.01 / 25.0 + 0.1 / 5.0;
        assert!((fit1.constant - direct.max(0.0) / denom).abs() <= 1e-12 * fit1.constant.max(1e-300));
        assert!(tail_bound_check(&s, &phi, &[30.0], &[0.01], &[1.0]).is_err());
        assert!(tail_bound_check(&s, &phi, &[5.0], &[0.01], &[0.5]).is_err());
    }
}
