//! Convolution kernels: continuous families, discretization and `J * u`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{next_pow2, Fft};
use crate::grid::Field;
use crate::quadrature::{compensated_sum, golden_min, simpson};

/// `int_{-1}^{1} exp(-1/(1-s^2)) ds`
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_4;
/// Second moment of the unit bump `exp(-1/(1-s^2)) / BUMP_MASS`.
pub const BUMP_SECOND_MOMENT: f64 = 0.158_113_636_263_798_23;

const BUMP_NODES: usize = 2048;

/// A tabulated even kernel: `values[j] = J(j dz)` for `j >= 0`, linearly
/// interpolated in between and falling linearly to zero over one spacing
/// past the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    dz: f64,
    values: Vec<f64>,
}

impl TabulatedKernel {
    /// Builds a kernel from `(z, J(z))` samples on a uniform lattice that
    /// contains `z = 0`. Values at `z` and `-z` are averaged, and the result
    /// is renormalized to unit mass.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::invalid("a tabulated kernel needs at least two samples"));
        }
        if let Some((z, j)) = samples.iter().find(|(z, j)| !z.is_finite() || !j.is_finite()) {
            return Err(Error::invalid(format!("non-finite kernel sample ({z}, {j})")));
        }
        if let Some((z, j)) = samples.iter().find(|(_, j)| *j < 0.0) {
            return Err(Error::invalid(format!("negative kernel value {j} at z = {z}")));
        }
        let mut zs: Vec<f64> = samples.iter().map(|(z, _)| z.abs()).filter(|z| *z > 0.0).collect();
        zs.sort_by(|a, b| a.total_cmp(b));
        let dz = zs
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 1e-12)
            .fold(zs.first().copied().unwrap_or(f64::INFINITY), f64::min);
        if !dz.is_finite() || dz <= 0.0 {
            return Err(Error::invalid("cannot infer the tabulation spacing"));
        }
        let max_j = samples.iter().map(|(z, _)| libm::round(z.abs() / dz) as usize).max().unwrap_or(0);
        let mut sum = vec![0.0; max_j + 1];
        let mut count = vec![0u32; max_j + 1];
        for &(z, j) in samples {
            let k = libm::round(z.abs() / dz);
            if (z.abs() - k * dz).abs() > 1e-6 * dz {
                return Err(Error::invalid(format!("sample z = {z} is off the uniform lattice")));
            }
            sum[k as usize] += j;
            count[k as usize] += 1;
        }
        if count[0] == 0 {
            return Err(Error::invalid("tabulated kernel must include z = 0"));
        }
        if let Some(k) = count.iter().position(|c| *c == 0) {
            return Err(Error::invalid(format!("missing kernel sample at z = {}", k as f64 * dz)));
        }
        let mut values: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
        let mass = dz * (values[0] + 2.0 * values[1..].iter().sum::<f64>());
        if !(mass > 0.0) {
            return Err(Error::invalid("tabulated kernel has zero mass"));
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(TabulatedKernel { dz, values })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, z: f64) -> f64 {
        let s = z.abs() / self.dz;
        let i = s as usize;
        let at = |k: usize| self.values.get(k).copied().unwrap_or(0.0);
        if i >= self.values.len() {
            return 0.0;
        }
        let th = s - i as f64;
        (1.0 - th) * at(i) + th * at(i + 1)
    }

    fn support(&self) -> f64 {
        self.values.len() as f64 * self.dz
    }
}

/// Continuous kernel families. Every member is nonnegative, even and of
/// unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `J(z) = exp(-|z|) / 2`.
    Exponential,
    Gaussian {
        sigma: f64,
    },
    /// Uniform density on `[-halfwidth, halfwidth]`.
    Box {
        halfwidth: f64,
    },
    /// Normalized `exp(-1/(1-(z/h)^2))` on `(-h, h)`.
    Bump {
        halfwidth: f64,
    },
    Tabulated(TabulatedKernel),
}

/// Constants with `J^(xi) <= 1 - c xi^2` for `|xi| <= radius` and
/// `J^(xi) <= 1 - delta` for `|xi| >= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierConstants {
    pub c: f64,
    pub radius: f64,
    pub delta: f64,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::range("sigma", *sigma, "(0, inf)"))
            }
            KernelSpec::Box { halfwidth } | KernelSpec::Bump { halfwidth }
                if !(*halfwidth > 0.0 && halfwidth.is_finite()) =>
            {
                Err(Error::range("halfwidth", *halfwidth, "(0, inf)"))
            }
            _ => Ok(()),
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        match self {
            KernelSpec::Exponential => 0.5 * libm::exp(-z.abs()),
            KernelSpec::Gaussian { sigma } => {
                let s = z / sigma;
                libm::exp(-0.5 * s * s) / (sigma * libm::sqrt(2.0 * core::f64::consts::PI))
            }
            KernelSpec::Box { halfwidth } => {
                if z.abs() <= *halfwidth {
                    0.5 / halfwidth
                } else {
                    0.0
                }
            }
            KernelSpec::Bump { halfwidth } => {
                let s = z / halfwidth;
                if s.abs() < 1.0 {
                    libm::exp(-1.0 / (1.0 - s * s)) / (halfwidth * BUMP_MASS)
                } else {
                    0.0
                }
            }
            KernelSpec::Tabulated(t) => t.eval(z),
        }
    }

    /// `A = (1/2) int z^2 J(z) dz`.
    pub fn second_moment(&self) -> Result<f64> {
        self.validate()?;
        let a = match self {
            KernelSpec::Exponential => 1.0,
            KernelSpec::Gaussian { sigma } => 0.5 * sigma * sigma,
            KernelSpec::Box { halfwidth } => halfwidth * halfwidth / 6.0,
            KernelSpec::Bump { halfwidth } => 0.5 * halfwidth * halfwidth * BUMP_SECOND_MOMENT,
            KernelSpec::Tabulated(t) => {
                // exact for the piecewise-linear interpolant: each hat
                // function at z_j contributes dz (z_j^2 + dz^2/6)
                let dz = t.dz;
                let m2: f64 = t
                    .values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let z = j as f64 * dz;
                        let w = if j == 0 { 1.0 } else { 2.0 };
                        w * v * dz * (z * z + dz * dz / 6.0)
                    })
                    .sum();
                0.5 * m2
            }
        };
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::KernelAssumption(format!("second moment is not finite and positive ({a})")));
        }
        Ok(a)
    }

    /// `int_{|z| > r} J(z) dz`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self {
            KernelSpec::Exponential => libm::exp(-r),
            KernelSpec::Gaussian { sigma } => libm::erfc(r / (sigma * core::f64::consts::SQRT_2)),
            KernelSpec::Box { halfwidth } => (1.0 - r / halfwidth).max(0.0),
            KernelSpec::Bump { halfwidth } => {
                if r >= *halfwidth {
                    0.0
                } else {
                    2.0 * simpson(|z| self.density(z), r, *halfwidth, 4096)
                }
            }
            KernelSpec::Tabulated(t) => {
                let sup = t.support();
                if r >= sup {
                    0.0
                } else {
                    2.0 * simpson(|z| t.eval(z), r, sup, 8 * t.values.len().max(64))
                }
            }
        }
    }

    /// Radius beyond which the omitted mass is below `tol` (the support for
    /// compactly supported families).
    pub fn support_radius(&self, tol: f64) -> f64 {
        match self {
            KernelSpec::Exponential => libm::log(1.0 / tol),
            KernelSpec::Gaussian { sigma } => {
                let (mut lo, mut hi) = (0.0, 40.0 * sigma);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail_mass(mid) < tol {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            KernelSpec::Box { halfwidth } | KernelSpec::Bump { halfwidth } => *halfwidth,
            KernelSpec::Tabulated(t) => t.support(),
        }
    }

    fn is_compact(&self) -> bool {
        !matches!(self, KernelSpec::Exponential | KernelSpec::Gaussian { .. })
    }

    /// `1 - J^(xi)`, evaluated without cancellation for small `xi`.
    pub fn one_minus_ft(&self, xi: f64) -> f64 {
        match self {
            KernelSpec::Exponential => xi * xi / (1.0 + xi * xi),
            KernelSpec::Gaussian { sigma } => -libm::expm1(-0.5 * sigma * sigma * xi * xi),
            KernelSpec::Box { halfwidth } => one_minus_sinc(halfwidth * xi),
            KernelSpec::Bump { halfwidth } => BumpTransform::new(*halfwidth).one_minus_ft(xi),
            KernelSpec::Tabulated(t) => {
                let dz = t.dz;
                // J^ = sinc^2(xi dz / 2) * D with D = 1 - E
                let e: f64 = t.values[1..]
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        let s = libm::sin(0.5 * xi * (k + 1) as f64 * dz);
                        4.0 * v * dz * s * s
                    })
                    .sum();
                let y = 0.5 * xi * dz;
                let one_minus_s = one_minus_sinc_sq(y);
                let s = 1.0 - one_minus_s;
                one_minus_s + s * e
            }
        }
    }

    pub fn fourier_transform(&self, xi: f64) -> f64 {
        1.0 - self.one_minus_ft(xi)
    }

    /// Numerically determined Fourier-splitting constants.
    ///
    /// Starts from `c = 0.6 A` and shrinks `c` until a radius with a strictly
    /// positive gap `delta` exists. `radius` is the largest scanned
    /// frequency up to which the quadratic bound holds, and `delta` is the
    /// minimum of `1 - J^` beyond it.
    pub fn fourier_constants(&self) -> Result<FourierConstants> {
        let a = self.second_moment()?;
        let width = libm::sqrt(2.0 * a);
        let h = 0.02 / width;
        let kmax = 3000usize;
        let eval: alloc::boxed::Box<dyn Fn(f64) -> f64> = match self {
            KernelSpec::Bump { halfwidth } => {
                let bt = BumpTransform::new(*halfwidth);
                alloc::boxed::Box::new(move |xi| bt.one_minus_ft(xi))
            }
            _ => alloc::boxed::Box::new(|xi| self.one_minus_ft(xi)),
        };
        let g: Vec<f64> = (0..=kmax).map(|k| eval(k as f64 * h)).collect();
        let mut c = 0.6 * a;
        for _ in 0..60 {
            let first_bad = (1..=kmax).find(|&k| {
                let xi = k as f64 * h;
                g[k] < c * xi * xi
            });
            let kr = match first_bad {
                Some(k) if k >= 2 => k - 1,
                Some(_) => {
                    c *= 0.8;
                    continue;
                }
                None => kmax,
            };
            let radius = kr as f64 * h;
            let (kmin, gmin) =
                (kr..=kmax).map(|k| (k, g[k])).fold((kr, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            let lo = if kmin > kr { (kmin - 1) as f64 * h } else { radius };
            let hi = (kmin + 1).min(kmax) as f64 * h;
            let refined = if hi > lo { golden_min(&eval, lo, hi, 60).1 } else { gmin };
            let delta = gmin.min(refined);
            if !(delta > 1e-12) {
                c *= 0.8;
                continue;
            }
            // Riemann-Lebesgue: the gap must not be attained at the end of
            // the scanned window, otherwise J^ is not decaying there.
            let tail_start = kmax - kmax / 10;
            if kmin >= tail_start && kr < tail_start {
                return Err(Error::KernelAssumption(
                    "Fourier transform does not decay within the scanned window".into(),
                ));
            }
            return Ok(FourierConstants { c, radius, delta });
        }
        Err(Error::KernelAssumption("no admissible Fourier-splitting constants found".into()))
    }
}

impl FourierConstants {
    /// Largest violation of either bound over `samples` uniformly spaced
    /// frequencies in `[0, xi_max]`; nonpositive means both bounds hold.
    pub fn max_violation(&self, spec: &KernelSpec, xi_max: f64, samples: usize) -> f64 {
        let bt = match spec {
            KernelSpec::Bump { halfwidth } => Some(BumpTransform::new(*halfwidth)),
            _ => None,
        };
        let mut worst = f64::NEG_INFINITY;
        for k in 0..=samples {
            let xi = xi_max * k as f64 / samples as f64;
            let g = match &bt {
                Some(b) => b.one_minus_ft(xi),
                None => spec.one_minus_ft(xi),
            };
            let need = if xi <= self.radius { self.c * xi * xi } else { self.delta };
            worst = worst.max(need - g);
        }
        worst
    }
}

fn one_minus_sinc(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        let y2 = y * y;
        y2 / 6.0 - y2 * y2 / 120.0 + y2 * y2 * y2 / 5040.0
    } else {
        1.0 - libm::sin(y) / y
    }
}

fn one_minus_sinc_sq(y: f64) -> f64 {
    let s = one_minus_sinc(y);
    // 1 - (1 - s)^2
    s * (2.0 - s)
}

/// Quadrature for the bump transform on a fixed node set.
struct BumpTransform {
    nodes: Vec<(f64, f64)>,
}

impl BumpTransform {
    fn new(halfwidth: f64) -> Self {
        let spec = KernelSpec::Bump { halfwidth };
        let dz = 2.0 * halfwidth / BUMP_NODES as f64;
        let nodes = (1..BUMP_NODES)
            .map(|k| {
                let z = -halfwidth + k as f64 * dz;
                (z, spec.density(z) * dz)
            })
            .collect();
        BumpTransform { nodes }
    }

    fn one_minus_ft(&self, xi: f64) -> f64 {
        self.nodes
            .iter()
            .map(|(z, w)| {
                let s = libm::sin(0.5 * xi * z);
                2.0 * w * s * s
            })
            .sum()
    }
}

/// A kernel `J_s(z) = s J(s z)` sampled on the lattice `j dx`, truncated and
/// renormalized so that `sum_j w_j dx = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    spec: KernelSpec,
    scale: f64,
    dx: f64,
    tail_tol: f64,
    weights: Vec<f64>,
    second_moment_a: f64,
}

impl DiscreteKernel {
    pub fn discretize(spec: &KernelSpec, dx: f64, tail_tol: f64) -> Result<Self> {
        Self::discretize_scaled(spec, 1.0, dx, tail_tol)
    }

    /// Discretizes the dilated kernel `J_scale(z) = scale J(scale z)`.
    pub fn discretize_scaled(spec: &KernelSpec, scale: f64, dx: f64, tail_tol: f64) -> Result<Self> {
        spec.validate()?;
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::range("dx", dx, "(0, inf)"));
        }
        if !(tail_tol > 0.0 && tail_tol <= 1e-3) {
            return Err(Error::range("tail_tol", tail_tol, "(0, 1e-3]"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::range("scale", scale, "(0, inf)"));
        }
        let radius = spec.support_radius(tail_tol) / scale;
        let m =
            if spec.is_compact() { libm::floor(radius / dx + 1e-9) as usize } else { libm::ceil(radius / dx) as usize };
        if m == 0 {
            return Err(Error::invalid(format!("dx = {dx} does not resolve the kernel (support radius {radius})")));
        }
        let mut weights: Vec<f64> = (0..=2 * m)
            .map(|i| {
                let z = (i as f64 - m as f64) * dx;
                scale * spec.density(scale * z)
            })
            .collect();
        // mirror so the weights are exactly symmetric
        for j in 1..=m {
            let avg = 0.5 * (weights[m + j] + weights[m - j]);
            weights[m + j] = avg;
            weights[m - j] = avg;
        }
        let total = compensated_sum(&weights) * dx;
        if !(total > 0.0) {
            return Err(Error::invalid("discretized kernel has zero mass"));
        }
        for w in &mut weights {
            *w /= total;
        }
        // push the last rounding error into the central weight
        weights[m] += (1.0 - compensated_sum(&weights) * dx) / dx;
        let a = spec.second_moment()? / (scale * scale);
        Ok(DiscreteKernel { spec: spec.clone(), scale, dx, tail_tol, weights, second_moment_a: a })
    }

    /// Re-discretizes `J_{scale * lambda}` on the same lattice.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        Self::discretize_scaled(&self.spec, self.scale * lambda, self.dx, self.tail_tol)
    }

    /// The same kernel re-sampled on a different lattice.
    pub fn resampled(&self, dx: f64) -> Result<Self> {
        Self::discretize_scaled(&self.spec, self.scale, dx, self.tail_tol)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Number of nonzero offsets on each side.
    pub fn half_width(&self) -> usize {
        self.weights.len() / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `j`, zero outside the stencil.
    pub fn weight(&self, j: isize) -> f64 {
        let m = self.half_width() as isize;
        if j.abs() > m {
            0.0
        } else {
            self.weights[(j + m) as usize]
        }
    }

    /// `A` of the continuous kernel this was sampled from.
    pub fn second_moment_a(&self) -> f64 {
        self.second_moment_a
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(&self.weights) * self.dx
    }

    /// `sum_i sum_j w_j dx (u_i - u_{i-j})^2 dx` with `u` zero-extended,
    /// the discrete form of `int int J(x - y) (u(x) - u(y))^2 dx dy`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let taps: Vec<f64> = self.weights.iter().map(|w| w * self.dx).collect();
        quadratic_form_taps(&taps, u, self.dx)
    }

    /// `sum_j w_j (j dx)^2 dx`, the discrete analogue of `int z^2 J`.
    pub fn discrete_moment2(&self) -> f64 {
        let m = self.half_width() as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let z = (i as f64 - m) * self.dx;
                w * z * z
            })
            .sum::<f64>()
            * self.dx
    }
}

pub(crate) fn quadratic_form_taps(taps: &[f64], u: &[f64], dx: f64) -> f64 {
    let m = taps.len() / 2;
    let n = u.len();
    let mut total = 0.0;
    for j in 1..=m {
        // i ranges over [0, n + j); u is zero outside [0, n)
        let mut s = 0.0;
        for i in 0..n + j {
            let a = if i < n { u[i] } else { 0.0 };
            let b = if i >= j && i - j < n { u[i - j] } else { 0.0 };
            let d = a - b;
            s += d * d;
        }
        total += taps[m + j] * s;
    }
    2.0 * total * dx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionPath {
    #[default]
    Fft,
    Direct,
}

/// Zero-padded linear convolution against a fixed kernel for fields of a
/// fixed length. The FFT path caches the kernel spectrum.
#[derive(Debug, Clone)]
pub struct Convolver {
    n: usize,
    m: usize,
    taps: Vec<f64>,
    fft: Option<(Fft, Vec<Complex64>)>,
}

impl Convolver {
    pub fn new(kernel: &DiscreteKernel, n: usize, path: ConvolutionPath) -> Self {
        let m = kernel.half_width();
        let taps: Vec<f64> = kernel.weights.iter().map(|w| w * kernel.dx).collect();
        let fft = match path {
            ConvolutionPath::Direct => None,
            ConvolutionPath::Fft => {
                let size = next_pow2(n + 2 * m);
                let plan = Fft::new(size);
                let mut spec = vec![Complex64::new(0.0, 0.0); size];
                for (i, t) in taps.iter().enumerate() {
                    spec[i] = Complex64::new(*t, 0.0);
                }
                plan.forward(&mut spec);
                Some((plan, spec))
            }
        };
        Convolver { n, m, taps, fft }
    }

    pub fn path(&self) -> ConvolutionPath {
        if self.fft.is_some() {
            ConvolutionPath::Fft
        } else {
            ConvolutionPath::Direct
        }
    }

    /// `out_i = sum_j w_j f_{i-j} dx` with `f` zero outside `[0, n)`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n);
        assert_eq!(out.len(), self.n);
        match &self.fft {
            None => direct_convolution(&self.taps, self.m, f, out),
            Some((plan, spec)) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
                for (b, v) in buf.iter_mut().zip(f) {
                    *b = Complex64::new(*v, 0.0);
                }
                plan.forward(&mut buf);
                for (b, s) in buf.iter_mut().zip(spec) {
                    *b *= s;
                }
                plan.inverse(&mut buf);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = buf[i + self.m].re;
                }
            }
        }
    }
}

fn direct_convolution(taps: &[f64], m: usize, f: &[f64], out: &mut [f64]) {
    let n = f.len() as isize;
    let m = m as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let lo = (-m).max(i - n + 1);
        let hi = m.min(i);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += taps[(j + m) as usize] * f[(i - j) as usize];
        }
        *o = acc;
    }
}

/// `J * f` on the grid of `f`.
pub fn convolve(kernel: &DiscreteKernel, f: &Field, path: ConvolutionPath) -> Result<Field> {
    let dx = f.grid().dx();
    if (kernel.dx - dx).abs() > 1e-12 * dx {
        return Err(Error::SpacingMismatch { left: kernel.dx, right: dx });
    }
    let conv = Convolver::new(kernel, f.grid().len(), path);
    let mut out = vec![0.0; f.grid().len()];
    conv.apply(f.values(), &mut out);
    Ok(Field::from_parts(*f.grid(), out, f.is_nonneg()))
}
