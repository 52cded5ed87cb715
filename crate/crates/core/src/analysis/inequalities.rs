use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{next_pow2, Fft};
use crate::grid::{Field, Grid};
use crate::kernel::{DiscreteKernel, KernelSpec};

use super::random::{random_bump, random_field, trial_rng};

const KERNEL_TAIL_TOL: f64 = 1e-12;
const RELATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// `lambda^2 Q_lambda(phi) <= (int rho z^2) |phi'|_2^2`.
    GradientBound,
    /// `|u|_2^2 <= eps n^2 Q_n(u) + (2/eps) |u|_{H^-1}^2` above the
    /// frequency-gap threshold.
    Balance,
    /// Commuting a Lipschitz cutoff through the quadratic form.
    Localized,
}

impl Lemma {
    pub fn name(&self) -> &'static str {
        match self {
            Lemma::GradientBound => "gradient_bound",
            Lemma::Balance => "balance",
            Lemma::Localized => "localized",
        }
    }
}

/// Both sides of one instance of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub lhs: f64,
    pub rhs: f64,
}

impl TrialOutcome {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Margin below `-1e-12 |rhs|`.
    pub fn violates(&self) -> bool {
        !(self.margin() >= -RELATIVE_SLACK * self.rhs.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IneqReport {
    pub lemma: Lemma,
    pub trials: usize,
    /// Minimum of `rhs - lhs` over the trials.
    pub worst_margin: f64,
    /// Minimum of `(rhs - lhs) / |rhs|` over trials with `rhs != 0`.
    pub worst_relative_margin: f64,
    pub violations: usize,
    pub seed: Option<u64>,
}

impl IneqReport {
    pub fn from_outcomes(lemma: Lemma, seed: Option<u64>, outcomes: impl IntoIterator<Item = TrialOutcome>) -> Self {
        let mut r = IneqReport {
            lemma,
            trials: 0,
            worst_margin: f64::INFINITY,
            worst_relative_margin: f64::INFINITY,
            violations: 0,
            seed,
        };
        for o in outcomes {
            r.trials += 1;
            r.worst_margin = r.worst_margin.min(o.margin());
            if o.rhs != 0.0 {
                r.worst_relative_margin = r.worst_relative_margin.min(o.margin() / o.rhs.abs());
            }
            if o.violates() {
                r.violations += 1;
            }
        }
        r
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn check_spacing(k: &DiscreteKernel, g: &Grid) -> Result<()> {
    if (k.dx() - g.dx()).abs() > 1e-12 * g.dx() {
        return Err(Error::SpacingMismatch { left: k.dx(), right: g.dx() });
    }
    Ok(())
}

/// `lambda^2 sum sum J_lambda(x_i - x_k) (f_i - f_k)^2 dx^2` with `J_lambda`
/// re-discretized on the field's lattice.
pub fn quadratic_form(f: &Field, k: &DiscreteKernel, lambda: f64) -> Result<f64> {
    check_spacing(k, f.grid())?;
    if lambda == 1.0 {
        return Ok(k.quadratic_form(f.values()));
    }
    let kl = k.dilated(lambda)?;
    Ok(lambda * lambda * kl.quadratic_form(f.values()))
}

/// `sum_{k=0}^{n} ((f_k - f_{k-1}) / dx)^2 dx` with zero ghost cells.
fn gradient_sq(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    let mut s = 0.0;
    for k in 0..=n {
        let a = if k < n { f[k] } else { 0.0 };
        let b = if k > 0 { f[k - 1] } else { 0.0 };
        let d = (a - b) / dx;
        s += d * d;
    }
    s * dx
}

fn gradient_outcome(phi: &Field, rho_lambda: &DiscreteKernel, lambda: f64) -> TrialOutcome {
    let l2 = lambda * lambda;
    let lhs = l2 * rho_lambda.quadratic_form(phi.values());
    let moment = l2 * rho_lambda.discrete_moment2();
    let rhs = moment * gradient_sq(phi.values(), phi.grid().dx());
    TrialOutcome { lhs, rhs }
}

/// `lambda^3 int int rho(lambda (x - y)) (phi(x) - phi(y))^2 <=
/// (int rho z^2) |phi'|_2^2` with one-sided differences for `phi'` and the
/// lattice moment of the dilated kernel for `int rho z^2`. In this form
/// the discrete statement follows from Cauchy-Schwarz exactly, whatever
/// the roughness of `phi`.
pub fn check_gradient_bound(phi: &Field, rho: &DiscreteKernel, lambda: f64) -> Result<IneqReport> {
    check_spacing(rho, phi.grid())?;
    let rl = rho.dilated(lambda)?;
    Ok(IneqReport::from_outcomes(Lemma::GradientBound, None, [gradient_outcome(phi, &rl, lambda)]))
}

fn hminus1_padded(u: &[f64], dx: f64, size: usize) -> f64 {
    let plan = Fft::new(size);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (b, v) in buf.iter_mut().zip(u) {
        *b = Complex64::new(*v, 0.0);
    }
    plan.forward(&mut buf);
    let mut s = 0.0;
    for (k, c) in buf.iter().enumerate() {
        let kk = if k <= size / 2 { k as f64 } else { k as f64 - size as f64 };
        let xi = 2.0 * PI * kk / (size as f64 * dx);
        s += c.norm_sqr() / (1.0 + xi * xi);
    }
    s * dx / size as f64
}

/// `|u|_{H^-1}^2 = sum_k |U_k|^2 / (1 + xi_k^2) dx / N` for the DFT of the
/// zero-extended field padded to `N >= 2n`.
pub fn hminus1_norm_sq(u: &Field) -> f64 {
    let n = u.grid().len();
    hminus1_padded(u.values(), u.grid().dx(), next_pow2(2 * n))
}

/// Smallest `n` with `n >= (delta eps)^{-1/2}`.
pub fn balance_threshold(rho: &KernelSpec, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::range("epsilon", eps, "(0, 1)"));
    }
    let fc = rho.fourier_constants()?;
    Ok(libm::ceil(1.0 / libm::sqrt(fc.delta * eps)) as usize)
}

fn balance_outcome(u: &Field, rho_n: &DiscreteKernel, n: usize, eps: f64) -> TrialOutcome {
    let len = u.grid().len();
    let size = next_pow2((2 * len).max(len + 2 * rho_n.half_width()));
    let nn = n as f64;
    let q = nn * nn * rho_n.quadratic_form(u.values());
    let h = hminus1_padded(u.values(), u.grid().dx(), size);
    TrialOutcome { lhs: u.l2_norm_sq(), rhs: eps * q + 2.0 / eps * h }
}

/// Checks `|u|_2^2 <= eps n^2 Q_n(u) + (2/eps) |u|_{H^-1}^2` with
/// `rho_n(x) = n rho(n x)`; `n` must reach [`balance_threshold`].
pub fn check_balance(u: &Field, rho: &KernelSpec, eps: f64, n: usize) -> Result<IneqReport> {
    let threshold = balance_threshold(rho, eps)?;
    if n < threshold {
        return Err(Error::Precondition(format!("n = {n} is below the threshold {threshold} for epsilon = {eps}")));
    }
    let rho_n = DiscreteKernel::discretize_scaled(rho, n as f64, u.grid().dx(), KERNEL_TAIL_TOL)?;
    Ok(IneqReport::from_outcomes(Lemma::Balance, None, [balance_outcome(u, &rho_n, n, eps)]))
}

fn lipschitz(chi: &[f64], dx: f64) -> f64 {
    let n = chi.len();
    (0..=n)
        .map(|k| {
            let a = if k < n { chi[k] } else { 0.0 };
            let b = if k > 0 { chi[k - 1] } else { 0.0 };
            (a - b).abs() / dx
        })
        .fold(0.0, f64::max)
}

fn localized_outcome(u: &Field, chi: &Field, rho_n: &DiscreteKernel, n: usize) -> TrialOutcome {
    let nn = (n * n) as f64;
    let dx = u.grid().dx();
    let prod: Vec<f64> = u.values().iter().zip(chi.values()).map(|(a, b)| a * b).collect();
    let lhs = nn * rho_n.quadratic_form(&prod);
    let sup = chi.max_abs();
    let w1 = sup.max(lipschitz(chi.values(), dx));
    let c1 = 2.0 * sup * sup;
    let c2 = 2.0 * w1 * w1;
    let moment = nn * rho_n.discrete_moment2();
    let rhs = c1 * nn * rho_n.quadratic_form(u.values()) + c2 * moment * u.l2_norm_sq();
    TrialOutcome { lhs, rhs }
}

/// Checks
/// `n^2 Q_n(chi u) <= 2|chi|_inf^2 n^2 Q_n(u) + 2|chi|_{W1,inf}^2 (int rho z^2) |u|_2^2`
/// with the discrete Lipschitz constant of the zero-extended cutoff.
pub fn check_localized(u: &Field, chi: &Field, rho: &KernelSpec, n: usize) -> Result<IneqReport> {
    if !u.grid().matches(chi.grid()) {
        return Err(Error::GridMismatch("field and cutoff on different grids".into()));
    }
    if n == 0 {
        return Err(Error::range("n", 0.0, "[1, inf)"));
    }
    let rho_n = DiscreteKernel::discretize_scaled(rho, n as f64, u.grid().dx(), KERNEL_TAIL_TOL)?;
    Ok(IneqReport::from_outcomes(Lemma::Localized, None, [localized_outcome(u, chi, &rho_n, n)]))
}

/// Randomized audit of [`check_gradient_bound`]; trial `i` uses
/// `lambdas[i % len]`.
#[derive(Debug, Clone)]
pub struct GradientAudit {
    grid: Grid,
    kernels: Vec<(f64, DiscreteKernel)>,
}

impl GradientAudit {
    pub fn new(rho: &KernelSpec, grid: &Grid, lambdas: &[f64]) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("empty lambda list"));
        }
        let kernels = lambdas
            .iter()
            .map(|&l| Ok((l, DiscreteKernel::discretize_scaled(rho, l, grid.dx(), KERNEL_TAIL_TOL)?)))
            .collect::<Result<_>>()?;
        Ok(GradientAudit { grid: *grid, kernels })
    }

    pub fn trial(&self, seed: u64, i: usize) -> TrialOutcome {
        let mut rng = trial_rng(seed, i as u64);
        let phi = random_field(&mut rng, &self.grid);
        let (l, k) = &self.kernels[i % self.kernels.len()];
        gradient_outcome(&phi, k, *l)
    }
}

/// Randomized audit of [`check_balance`]; trial `i` cycles through the
/// epsilons and alternates `n = threshold` and `n = 4 threshold`.
#[derive(Debug, Clone)]
pub struct BalanceAudit {
    grid: Grid,
    cases: Vec<(f64, usize, DiscreteKernel)>,
}

impl BalanceAudit {
    pub fn new(rho: &KernelSpec, grid: &Grid, epsilons: &[f64]) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::invalid("empty epsilon list"));
        }
        let delta = rho.fourier_constants()?.delta;
        let mut cases = Vec::new();
        for &eps in epsilons {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::range("epsilon", eps, "(0, 1)"));
            }
            let t = libm::ceil(1.0 / libm::sqrt(delta * eps)) as usize;
            for n in [t, 4 * t] {
                let k = DiscreteKernel::discretize_scaled(rho, n as f64, grid.dx(), KERNEL_TAIL_TOL)?;
                cases.push((eps, n, k));
            }
        }
        Ok(BalanceAudit { grid: *grid, cases })
    }

    pub fn cases(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.cases.iter().map(|(e, n, _)| (*e, *n))
    }

    pub fn trial(&self, seed: u64, i: usize) -> TrialOutcome {
        let mut rng = trial_rng(seed, i as u64);
        let u = random_field(&mut rng, &self.grid);
        let (eps, n, k) = &self.cases[i % self.cases.len()];
        balance_outcome(&u, k, *n, *eps)
    }
}

/// Randomized audit of [`check_localized`] with random smooth cutoffs;
/// trial `i` uses `ns[i % len]`.
#[derive(Debug, Clone)]
pub struct LocalizedAudit {
    grid: Grid,
    kernels: Vec<(usize, DiscreteKernel)>,
}

impl LocalizedAudit {
    pub fn new(rho: &KernelSpec, grid: &Grid, ns: &[usize]) -> Result<Self> {
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::invalid("n list must be nonempty and positive"));
        }
        let kernels = ns
            .iter()
            .map(|&n| Ok((n, DiscreteKernel::discretize_scaled(rho, n as f64, grid.dx(), KERNEL_TAIL_TOL)?)))
            .collect::<Result<_>>()?;
        Ok(LocalizedAudit { grid: *grid, kernels })
    }

    pub fn trial(&self, seed: u64, i: usize) -> TrialOutcome {
        let mut rng = trial_rng(seed, i as u64);
        let u = random_field(&mut rng, &self.grid);
        let chi = random_bump(&mut rng, &self.grid);
        let (n, k) = &self.kernels[i % self.kernels.len()];
        localized_outcome(&u, &chi, k, *n)
    }
}

pub fn audit_gradient_bound(
    rho: &KernelSpec,
    grid: &Grid,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<IneqReport> {
    let a = GradientAudit::new(rho, grid, lambdas)?;
    Ok(IneqReport::from_outcomes(Lemma::GradientBound, Some(seed), (0..trials).map(|i| a.trial(seed, i))))
}

pub fn audit_balance(rho: &KernelSpec, grid: &Grid, epsilons: &[f64], trials: usize, seed: u64) -> Result<IneqReport> {
    let a = BalanceAudit::new(rho, grid, epsilons)?;
    Ok(IneqReport::from_outcomes(Lemma::Balance, Some(seed), (0..trials).map(|i| a.trial(seed, i))))
}

pub fn audit_localized(rho: &KernelSpec, grid: &Grid, ns: &[usize], trials: usize, seed: u64) -> Result<IneqReport> {
    let a = LocalizedAudit::new(rho, grid, ns)?;
    Ok(IneqReport::from_outcomes(Lemma::Localized, Some(seed), (0..trials).map(|i| a.trial(seed, i))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> KernelSpec {
        KernelSpec::Bump { halfwidth: 3.0 }
    }

    fn grid() -> Grid {
        Grid::symmetric(10.0, 512).unwrap()
    }

    #[test]
    fn quadratic_form_basics() {
        let g = grid();
        let k = DiscreteKernel::discretize(&KernelSpec::Gaussian { sigma: 0.5 }, g.dx(), 1e-12).unwrap();
        // constant interior patch contributes nothing; the zero field gives 0
        assert_eq!(quadratic_form(&Field::zeros(g), &k, 2.0).unwrap(), 0.0);
        let f = Field::from_fn(g, |x| libm::exp(-x * x) * libm::cos(3.0 * x)).unwrap();
        let q = quadratic_form(&f, &k, 1.5).unwrap();
        let q3 = quadratic_form(&f.scaled(3.0), &k, 1.5).unwrap();
        assert!((q3 - 9.0 * q).abs() <= 1e-13 * q3);
        // direct double-sum oracle
        let kl = k.dilated(1.5).unwrap();
        let m = kl.half_width() as isize;
        let n = g.len() as isize;
        let v = |i: isize| if i < 0 || i >= n { 0.0 } else { f.values()[i as usize] };
        let mut oracle = 0.0;
        for i in -m..n + m {
            for j in -m..=m {
                let d = v(i) - v(i - j);
                oracle += kl.weight(j) * g.dx() * d * d * g.dx();
            }
        }
        oracle *= 2.25;
        assert!((oracle - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn gradient_bound_examples() {
        let g = grid();
        let rho = DiscreteKernel::discretize(&bump(), g.dx(), 1e-12).unwrap();
        let zero = check_gradient_bound(&Field::zeros(g), &rho, 2.0).unwrap();
        assert_eq!(zero.worst_margin, 0.0);
        assert_eq!(zero.violations, 0);
        let mut v = vec![0.0; g.len()];
        v[200] = 5.0;
        let spike = Field::new(g, v).unwrap();
        for l in [0.5, 1.0, 2.0, 8.0] {
            assert!(check_gradient_bound(&spike, &rho, l).unwrap().passed());
        }
        let a = audit_gradient_bound(&bump(), &g, &[0.5, 1.0, 2.0, 8.0], 200, 7).unwrap();
        assert_eq!(a.violations, 0, "{a:?}");
        assert_eq!(a.trials, 200);
    }

    #[test]
    fn checkerboard_has_zero_centered_gradient() {
        // centered differences miss the oscillation entirely, so a bound
        // built on them fails while the one-sided version holds
        let g = grid();
        let rho = DiscreteKernel::discretize(&bump(), g.dx(), 1e-12).unwrap();
        let f = Field::from_fn(g, |x| {
            let i = libm::round((x - g.x_min()) / g.dx() - 0.5) as i64;
            if x.abs() < 3.0 {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                0.0
            }
        })
        .unwrap();
        let v = f.values();
        let centered: f64 =
            (1..v.len() - 1).filter(|i| g.center(*i).abs() < 2.5).map(|i| (v[i + 1] - v[i - 1]).abs()).sum();
        assert_eq!(centered, 0.0);
        assert!(check_gradient_bound(&f, &rho, 1.0).unwrap().passed());
    }

    #[test]
    fn balance_examples() {
        let g = grid();
        let t = balance_threshold(&bump(), 0.5).unwrap();
        assert!(
            matches!(check_balance(&Field::zeros(g), &bump(), 0.5, t.saturating_sub(1)), Err(Error::Precondition(_)))
                || t <= 1
        );
        let z = check_balance(&Field::zeros(g), &bump(), 0.5, t).unwrap();
        assert_eq!(z.worst_margin, 0.0);
        let slow = Field::from_fn(g, |x| libm::sin(0.3 * x) * libm::exp(-0.02 * x * x)).unwrap();
        let r = check_balance(&slow, &bump(), 0.5, t).unwrap();
        let h = 4.0 * hminus1_norm_sq(&slow);
        assert!(r.passed());
        assert!(h > slow.l2_norm_sq(), "H^-1 term alone dominates");
        let a = audit_balance(&bump(), &g, &[0.1, 0.5, 0.9], 120, 11).unwrap();
        assert_eq!(a.violations, 0, "{a:?}");
    }

    #[test]
    fn hminus1_of_smooth_field() {
        // for a wide Gaussian the weight 1/(1+xi^2) is ~1 on the support
        let g = Grid::symmetric(200.0, 4096).unwrap();
        let f = Field::from_fn(g, |x| libm::exp(-x * x / 800.0)).unwrap();
        let h = hminus1_norm_sq(&f);
        assert!(h < f.l2_norm_sq() && h > 0.99 * f.l2_norm_sq());
    }

    #[test]
    fn localized_examples() {
        let g = grid();
        let u = Field::from_fn(g, |x| libm::exp(-x * x)).unwrap();
        let one = Field::from_fn(g, |_| 1.0).unwrap();
        assert!(check_localized(&u, &one, &bump(), 2).unwrap().passed());
        let z = check_localized(&Field::zeros(g), &one, &bump(), 2).unwrap();
        assert_eq!(z.worst_margin, 0.0);
        let a = audit_localized(&bump(), &g, &[1, 2, 4, 8], 120, 3).unwrap();
        assert_eq!(a.violations, 0, "{a:?}");
    }

    #[test]
    fn audits_are_reproducible() {
        let g = grid();
        let a = audit_localized(&bump(), &g, &[1, 2], 10, 99).unwrap();
        let b = audit_localized(&bump(), &g, &[1, 2], 10, 99).unwrap();
        assert_eq!(a, b);
        let c = audit_localized(&bump(), &g, &[1, 2], 10, 100).unwrap();
        assert_ne!(a.worst_margin, c.worst_margin);
    }
}
