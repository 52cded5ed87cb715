//! Self-similar limit profiles with initial datum `M delta_0`.
//!
//! `q > 2`: the heat kernel of `w_t = A w_xx`.
//! `q = 2`: the diffusion wave of `w_t + b (w^2)_x = A w_xx`, obtained by
//! the Hopf-Cole substitution `w = -(A/b) (log theta)_x` with `theta` the
//! heat evolution of a step. With `beta = b M / A` and
//! `xi = x / sqrt(4 A t)`,
//!
//! ```text
//! w(t, x) = (A/b) exp(-xi^2) / ( sqrt(4 pi A t) (1/(e^beta - 1) + erfc(xi)/2) ).
//! ```

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatProfile {
    mass: f64,
    diffusivity: f64,
}

impl HeatProfile {
    pub fn new(mass: f64, diffusivity: f64) -> Result<Self> {
        check_params(mass, diffusivity)?;
        Ok(HeatProfile { mass, diffusivity })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.eval_unchecked(t, x))
    }

    fn eval_unchecked(&self, t: f64, x: f64) -> f64 {
        let s = 4.0 * self.diffusivity * t;
        self.mass * libm::exp(-x * x / s) / libm::sqrt(PI * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersProfile {
    mass: f64,
    diffusivity: f64,
    coupling: f64,
}

impl BurgersProfile {
    /// Profile of `w_t + (w^2)_x = A w_xx`.
    pub fn new(mass: f64, diffusivity: f64) -> Result<Self> {
        Self::with_coupling(mass, diffusivity, 1.0)
    }

    /// Profile of `w_t + b (w^2)_x = A w_xx`.
    pub fn with_coupling(mass: f64, diffusivity: f64, coupling: f64) -> Result<Self> {
        check_params(mass, diffusivity)?;
        if mass < 0.0 {
            return Err(Error::range("M", mass, "[0, inf)"));
        }
        if !coupling.is_finite() || coupling == 0.0 {
            return Err(Error::range("coupling", coupling, "finite and nonzero"));
        }
        Ok(BurgersProfile { mass, diffusivity, coupling })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// `b M / A`.
    pub fn beta(&self) -> f64 {
        self.coupling * self.mass / self.diffusivity
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.eval_unchecked(t, x))
    }

    fn eval_unchecked(&self, t: f64, x: f64) -> f64 {
        if self.mass == 0.0 {
            return 0.0;
        }
        let a = self.diffusivity;
        let s = 4.0 * a * t;
        let xi = x / libm::sqrt(s);
        let norm = libm::sqrt(PI * s);
        let beta = self.beta();
        let em1 = libm::expm1(beta);
        if beta.abs() < 1.0 {
            let half_erfc = 0.5 * libm::erfc(xi);
            return self.mass * (em1 / beta) * libm::exp(-xi * xi) / (norm * (1.0 + em1 * half_erfc));
        }
        let r = 1.0 / em1;
        if r < 0.0 {
            return (a / self.coupling) * libm::exp(-xi * xi) / (norm * (r + 0.5 * libm::erfc(xi)));
        }
        // multiply through by exp(xi^2) so neither factor underflows
        let scaled_r = libm::exp(xi * xi + libm::log(r));
        (a / self.coupling) / (norm * (scaled_r + 0.5 * erfcx(xi)))
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 5.0 {
        return libm::exp(x * x) * libm::erfc(x);
    }
    // continued fraction, modified Lentz
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let ak = 0.5 * k as f64;
        d = x + ak * d;
        d = if d.abs() < tiny { tiny } else { d };
        c = x + ak / c;
        c = if c.abs() < tiny { tiny } else { c };
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (libm::sqrt(PI) * f)
}

fn check_params(mass: f64, diffusivity: f64) -> Result<()> {
    if !mass.is_finite() {
        return Err(Error::range("M", mass, "finite"));
    }
    if !(diffusivity > 0.0) || !diffusivity.is_finite() {
        return Err(Error::range("A", diffusivity, "(0, inf)"));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::range("t", t, "(0, inf)"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Heat(HeatProfile),
    Burgers(BurgersProfile),
}

impl Profile {
    /// The limit selected by the exponent: Burgers (coupling `a`) for
    /// `q = 2`, heat for `q > 2`.
    pub fn limit_for(q: f64, a: f64, mass: f64, diffusivity: f64) -> Result<Self> {
        if !(q >= 2.0) {
            return Err(Error::range("q", q, "[2, inf)"));
        }
        if q == 2.0 && a != 0.0 {
            Ok(Profile::Burgers(BurgersProfile::with_coupling(mass, diffusivity, a)?))
        } else {
            Ok(Profile::Heat(HeatProfile::new(mass, diffusivity)?))
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Profile::Heat(p) => p.mass,
            Profile::Burgers(p) => p.mass,
        }
    }

    pub fn diffusivity(&self) -> f64 {
        match self {
            Profile::Heat(p) => p.diffusivity,
            Profile::Burgers(p) => p.diffusivity,
        }
    }

    /// Coefficient of `(w^2)_x` (zero for the heat profile).
    pub fn coupling(&self) -> f64 {
        match self {
            Profile::Heat(_) => 0.0,
            Profile::Burgers(p) => p.coupling,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.eval_unchecked(t, x))
    }

    fn eval_unchecked(&self, t: f64, x: f64) -> f64 {
        match self {
            Profile::Heat(p) => p.eval_unchecked(t, x),
            Profile::Burgers(p) => p.eval_unchecked(t, x),
        }
    }

    /// Point samples at the cell centers of `grid`.
    pub fn sample(&self, grid: &Grid, t: f64) -> Result<Field> {
        check_time(t)?;
        Field::from_fn(*grid, |x| self.eval_unchecked(t, x))
    }
}

/// `sup_x |w_t - A w_xx + b (w^2)_x|` over the centers of `grid`, with all
/// derivatives by second-order centered differences of step `h`.
pub fn profile_residual(profile: &Profile, t: f64, grid: &Grid, h: f64) -> Result<f64> {
    check_time(t)?;
    if !(h > 0.0 && h < t) {
        return Err(Error::range("h", h, "(0, t)"));
    }
    let a = profile.diffusivity();
    let b = profile.coupling();
    let w = |t: f64, x: f64| profile.eval_unchecked(t, x);
    let worst = grid.centers().fold(0.0f64, |acc, x| {
        let wt = (w(t + h, x) - w(t - h, x)) / (2.0 * h);
        let wxx = (w(t, x + h) - 2.0 * w(t, x) + w(t, x - h)) / (h * h);
        let (wp, wm) = (w(t, x + h), w(t, x - h));
        let conv = (wp * wp - wm * wm) / (2.0 * h);
        acc.max((wt - a * wxx + b * conv).abs())
    });
    Ok(worst)
}

/// `sup_x |lambda w(lambda^2 t, lambda x) - w(t, x)|` over the centers of
/// `grid`; zero for an exactly self-similar profile.
pub fn self_similarity_check(profile: &Profile, t: f64, lambda: f64, grid: &Grid) -> Result<f64> {
    check_time(t)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::range("lambda", lambda, "(0, inf)"));
    }
    let devs: Vec<f64> = grid
        .centers()
        .map(|x| {
            (lambda * profile.eval_unchecked(lambda * lambda * t, lambda * x) - profile.eval_unchecked(t, x)).abs()
        })
        .collect();
    Ok(devs.into_iter().fold(0.0, f64::max))
}
