//! Declarative experiment specs in TOML.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nlcd_core::{ConvolutionPath, Field, Grid, KernelSpec, Scheme, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{io_err, NlcdError, Result};
use crate::io::read_field_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Decay,
    Convergence,
    Rescaling,
    Inequalities,
    Oracle,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Decay => "decay",
            Study::Convergence => "convergence",
            Study::Rescaling => "rescaling",
            Study::Inequalities => "inequalities",
            Study::Oracle => "oracle",
        }
    }

    pub fn needs_solver(&self) -> bool {
        matches!(self, Study::Decay | Study::Convergence | Study::Rescaling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    Gaussian,
    Box,
    Bump,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Gaussian,
    Box,
    TwoBump,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    EngquistOsher,
    Godunov,
    UpwindPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionName {
    Fft,
    Direct,
}

fn sp<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}
fn default_half_width() -> Spanned<f64> {
    sp(200.0)
}
fn default_cells() -> Spanned<usize> {
    sp(2048)
}
fn default_family() -> Spanned<KernelFamily> {
    sp(KernelFamily::Exponential)
}
fn default_tail_tol() -> Spanned<f64> {
    sp(1e-12)
}
fn default_initial_kind() -> Spanned<InitialKind> {
    sp(InitialKind::Gaussian)
}
fn default_a() -> Spanned<f64> {
    sp(1.0)
}
fn default_cfl() -> Spanned<f64> {
    sp(0.45)
}
fn default_scheme() -> SchemeName {
    SchemeName::EngquistOsher
}
fn default_eps() -> Spanned<f64> {
    sp(0.0)
}
fn default_convolution() -> ConvolutionName {
    ConvolutionName::Fft
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_trials() -> Spanned<usize> {
    sp(1000)
}
fn default_rho_halfwidth() -> Spanned<f64> {
    sp(3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_half_width")]
    pub half_width: Spanned<f64>,
    #[serde(default = "default_cells")]
    pub cells: Spanned<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { half_width: default_half_width(), cells: default_cells() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_family")]
    pub family: Spanned<KernelFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfwidth: Option<Spanned<f64>>,
    /// `z,J` samples for the tabulated family, relative to the spec file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Spanned<PathBuf>>,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: Spanned<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            family: default_family(),
            sigma: None,
            halfwidth: None,
            path: None,
            tail_tol: default_tail_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_initial_kind")]
    pub kind: Spanned<InitialKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<Spanned<f64>>,
    /// Standard deviation of a Gaussian, full width of a box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Spanned<PathBuf>>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: default_initial_kind(),
            mass: None,
            width: None,
            center: None,
            masses: None,
            centers: None,
            widths: None,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Spanned<f64>>,
    #[serde(default = "default_a")]
    pub a: Spanned<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: Spanned<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "default_eps")]
    pub viscosity_eps: Spanned<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Spanned<Vec<f64>>>,
    #[serde(default = "default_convolution")]
    pub convolution: ConvolutionName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<Spanned<f64>>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            q: None,
            a: default_a(),
            cfl: default_cfl(),
            scheme: default_scheme(),
            viscosity_eps: default_eps(),
            t_end: None,
            snapshot_times: None,
            convolution: default_convolution(),
            dt_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Norm indices for decay fits and profile distances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Spanned<Vec<f64>>>,
    /// Decay fit window `[t_lo, t_hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Spanned<Vec<f64>>>,
    /// Times at which profile distances are measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Spanned<Vec<f64>>>,
    /// Scaling parameters of the rescaled distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Spanned<Vec<f64>>>,
    /// Radii, times and scalings of the tail estimate; all three or none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_times: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_lambdas: Option<Spanned<Vec<f64>>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: Spanned<usize>,
    /// Half-width of the bump used as `rho` in the inequality audits.
    #[serde(default = "default_rho_halfwidth")]
    pub rho_halfwidth: Spanned<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_lambdas: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Spanned<Vec<usize>>>,
    /// Field sizes for the FFT-vs-direct oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Spanned<Vec<usize>>>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            p: None,
            window: None,
            times: None,
            lambdas: None,
            radii: None,
            tail_times: None,
            tail_lambdas: None,
            seed: default_seed(),
            trials: default_trials(),
            rho_halfwidth: default_rho_halfwidth(),
            gradient_lambdas: None,
            epsilons: None,
            ns: None,
            sizes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub study: Study,
    /// Relative paths resolve against the spec file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_snapshots: bool,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    source: PathBuf,
}

/// Tail-estimate parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TailParams {
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |i| offset - i - 1) + 1;
    (line, col)
}

struct Checker<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Checker<'_> {
    fn fail(&self, span: Range<usize>, message: impl Into<String>) -> NlcdError {
        let (line, column) = line_col(self.text, span.start);
        NlcdError::Spec { path: self.path.to_path_buf(), line, column, message: message.into() }
    }

    /// Span of a `[name]` header, or of the whole file when absent.
    fn section(&self, name: &str) -> Range<usize> {
        let header = format!("[{name}]");
        let at = self
            .text
            .match_indices(&header)
            .map(|(i, _)| i)
            .find(|i| *i == 0 || self.text[..*i].ends_with('\n'))
            .unwrap_or(0);
        at..at + header.len()
    }

    fn ensure(&self, ok: bool, span: Range<usize>, message: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(span, message()))
        }
    }

    fn positive(&self, v: &Spanned<f64>, name: &str) -> Result<()> {
        let x = *v.get_ref();
        self.ensure(x > 0.0 && x.is_finite(), v.span(), || format!("{name} must be positive and finite, got {x}"))
    }

    fn positive_list(&self, v: &Spanned<Vec<f64>>, name: &str) -> Result<()> {
        let bad = v.get_ref().iter().find(|x| !(**x > 0.0 && x.is_finite()));
        self.ensure(bad.is_none(), v.span(), || format!("{name} entries must be positive, got {}", bad.unwrap()))
    }
}

const LOG_SNAPSHOTS: usize = 48;

fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - e);
    (x * scale).round() / scale
}

/// Log-spaced default snapshot times on `[min(1, t_end / 100), t_end]`.
fn default_snapshots(t_end: f64) -> Vec<f64> {
    let lo = (t_end / 100.0).min(1.0);
    (0..LOG_SNAPSHOTS)
        .map(|i| {
            let s = i as f64 / (LOG_SNAPSHOTS - 1) as f64;
            round_sig(lo * (t_end / lo).powf(s), 4)
        })
        .filter(|t| *t > 0.0 && *t <= t_end)
        .collect()
}

fn contains_time(list: &[f64], t: f64) -> bool {
    list.iter().any(|s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
}

impl ExperimentSpec {
    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn grid(&self) -> Grid {
        Grid::symmetric(*self.grid.half_width.get_ref(), *self.grid.cells.get_ref()).expect("validated at load time")
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let k = &self.kernel;
        Ok(match k.family.get_ref() {
            KernelFamily::Exponential => KernelSpec::Exponential,
            KernelFamily::Gaussian => KernelSpec::Gaussian { sigma: k.sigma.as_ref().map_or(1.0, |v| *v.get_ref()) },
            KernelFamily::Box => KernelSpec::Box { halfwidth: k.halfwidth.as_ref().map_or(1.0, |v| *v.get_ref()) },
            KernelFamily::Bump => KernelSpec::Bump { halfwidth: k.halfwidth.as_ref().map_or(1.0, |v| *v.get_ref()) },
            KernelFamily::Tabulated => {
                let p = k.path.as_ref().expect("validated at load time");
                crate::io::read_kernel_csv(&self.resolve(p.get_ref()))?
            }
        })
    }

    pub fn tail_tol(&self) -> f64 {
        *self.kernel.tail_tol.get_ref()
    }

    pub fn rho_spec(&self) -> KernelSpec {
        KernelSpec::Bump { halfwidth: *self.analysis.rho_halfwidth.get_ref() }
    }

    pub fn initial_datum(&self) -> Result<Field> {
        let g = self.grid();
        let s = &self.initial;
        let get = |v: &Option<Spanned<f64>>, d: f64| v.as_ref().map_or(d, |x| *x.get_ref());
        let gauss = |m: f64, c: f64, w: f64, x: f64| {
            m / (w * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * ((x - c) / w).powi(2)).exp()
        };
        let f = match s.kind.get_ref() {
            InitialKind::Gaussian => {
                let (m, w, c) = (get(&s.mass, 1.0), get(&s.width, 1.0), get(&s.center, 0.0));
                Field::from_fn(g, |x| gauss(m, c, w, x))?
            }
            InitialKind::Box => {
                let (m, w, c) = (get(&s.mass, 1.0), get(&s.width, 2.0), get(&s.center, 0.0));
                Field::from_fn(g, |x| if (x - c).abs() < 0.5 * w { m / w } else { 0.0 })?
            }
            InitialKind::TwoBump => {
                let ms = s.masses.as_ref().expect("validated").get_ref().clone();
                let cs = s.centers.as_ref().expect("validated").get_ref().clone();
                let ws = s.widths.as_ref().expect("validated").get_ref().clone();
                Field::from_fn(g, |x| (0..2).map(|i| gauss(ms[i], cs[i], ws[i], x)).sum())?
            }
            InitialKind::Csv => {
                let p = s.path.as_ref().expect("validated");
                let f = read_field_csv(&self.resolve(p.get_ref()))?;
                if !f.grid().matches(&g) {
                    return Err(NlcdError::Other(format!(
                        "{}: field grid does not match [grid] (half_width {}, cells {})",
                        p.get_ref().display(),
                        g.half_width(),
                        g.len()
                    )));
                }
                f
            }
        };
        Ok(f)
    }

    pub fn t_end(&self) -> f64 {
        self.solver.t_end.as_ref().map_or(1.0, |v| *v.get_ref())
    }

    pub fn q(&self) -> f64 {
        self.solver.q.as_ref().map_or(2.0, |v| *v.get_ref())
    }

    /// Times referenced by the analysis section.
    fn referenced_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self.study {
            Study::Convergence => out.extend(self.distance_times()),
            Study::Rescaling => {
                out.extend(self.lambdas().iter().map(|l| l * l));
                if let Some(tp) = self.tail_params() {
                    for t in &tp.times {
                        out.extend(tp.lambdas.iter().map(|l| l * l * t));
                    }
                }
            }
            _ => {}
        }
        out
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut ts = match &self.solver.snapshot_times {
            Some(v) => v.get_ref().clone(),
            None => {
                let mut v = default_snapshots(self.t_end());
                v.extend(self.referenced_times());
                v
            }
        };
        ts.retain(|t| *t > 0.0 && *t <= self.t_end());
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        ts
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut c = SolverConfig::new(self.q(), self.t_end());
        c.a = *s.a.get_ref();
        c.cfl = *s.cfl.get_ref();
        c.scheme = match s.scheme {
            SchemeName::EngquistOsher => Scheme::EngquistOsher,
            SchemeName::Godunov => Scheme::Godunov,
            SchemeName::UpwindPositive => Scheme::UpwindPositive,
        };
        c.viscosity_eps = *s.viscosity_eps.get_ref();
        c.convolution = match s.convolution {
            ConvolutionName::Fft => ConvolutionPath::Fft,
            ConvolutionName::Direct => ConvolutionPath::Direct,
        };
        c.dt_max = s.dt_max.as_ref().map(|v| *v.get_ref());
        c.snapshot_times = self.snapshot_times();
        c
    }

    pub fn p_list(&self) -> Vec<f64> {
        self.analysis.p.as_ref().map_or_else(|| vec![1.0, 2.0], |v| v.get_ref().clone())
    }

    pub fn window(&self) -> (f64, f64) {
        match &self.analysis.window {
            Some(w) => (w.get_ref()[0], w.get_ref()[1]),
            None => ((self.t_end() / 10.0).max(1.0), self.t_end()),
        }
    }

    pub fn distance_times(&self) -> Vec<f64> {
        self.analysis.times.as_ref().map_or_else(|| vec![self.t_end() / 16.0, self.t_end()], |v| v.get_ref().clone())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.analysis.lambdas.as_ref().map_or_else(
            || [1.0, 2.0, 4.0, 8.0, 16.0].into_iter().filter(|l| l * l <= self.t_end()).collect(),
            |v| v.get_ref().clone(),
        )
    }

    pub fn tail_params(&self) -> Option<TailParams> {
        let a = &self.analysis;
        match (&a.radii, &a.tail_times, &a.tail_lambdas) {
            (Some(r), Some(t), Some(l)) => Some(TailParams {
                radii: r.get_ref().clone(),
                times: t.get_ref().clone(),
                lambdas: l.get_ref().clone(),
            }),
            _ => None,
        }
    }

    pub fn trials(&self) -> usize {
        *self.analysis.trials.get_ref()
    }

    pub fn gradient_lambdas(&self) -> Vec<f64> {
        self.analysis.gradient_lambdas.as_ref().map_or_else(|| vec![0.5, 1.0, 2.0, 8.0], |v| v.get_ref().clone())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.analysis.epsilons.as_ref().map_or_else(|| vec![0.1, 0.5, 0.9], |v| v.get_ref().clone())
    }

    pub fn ns(&self) -> Vec<usize> {
        self.analysis.ns.as_ref().map_or_else(|| vec![1, 2, 4, 8], |v| v.get_ref().clone())
    }

    pub fn oracle_sizes(&self) -> Vec<usize> {
        self.analysis.sizes.as_ref().map_or_else(|| vec![64, 128, 256, 512], |v| v.get_ref().clone())
    }

    /// TOML re-serialization of the spec with defaults filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes to TOML")
    }

    /// SHA-256 of the canonical JSON form (keys sorted, defaults filled).
    /// Whitespace, comments, key order and omitted defaults do not change
    /// it.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes to JSON");
        let canonical = serde_json::to_string(&value).expect("JSON value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn validate(&self, ck: &Checker) -> Result<()> {
        let hw = &self.grid.half_width;
        ck.positive(hw, "grid.half_width")?;
        let cells = *self.grid.cells.get_ref();
        ck.ensure(cells >= 8, self.grid.cells.span(), || format!("grid.cells must be at least 8, got {cells}"))?;

        let k = &self.kernel;
        let tol = *k.tail_tol.get_ref();
        ck.ensure(tol > 0.0 && tol <= 1e-3, k.tail_tol.span(), || {
            format!("kernel.tail_tol must lie in (0, 1e-3], got {tol}")
        })?;
        let fam = *k.family.get_ref();
        let needs = |present: bool, what: &str| {
            ck.ensure(present, k.family.span(), || format!("kernel family {fam:?} requires `{what}`"))
        };
        let forbid = |present: bool, what: &str| {
            ck.ensure(!present, k.family.span(), || format!("`{what}` is not a parameter of kernel family {fam:?}"))
        };
        match fam {
            KernelFamily::Exponential => {
                forbid(k.sigma.is_some(), "sigma")?;
                forbid(k.halfwidth.is_some(), "halfwidth")?;
                forbid(k.path.is_some(), "path")?;
            }
            KernelFamily::Gaussian => {
                forbid(k.halfwidth.is_some(), "halfwidth")?;
                forbid(k.path.is_some(), "path")?;
                if let Some(s) = &k.sigma {
                    ck.positive(s, "kernel.sigma")?;
                }
            }
            KernelFamily::Box | KernelFamily::Bump => {
                forbid(k.sigma.is_some(), "sigma")?;
                forbid(k.path.is_some(), "path")?;
                if let Some(h) = &k.halfwidth {
                    ck.positive(h, "kernel.halfwidth")?;
                }
            }
            KernelFamily::Tabulated => {
                forbid(k.sigma.is_some(), "sigma")?;
                forbid(k.halfwidth.is_some(), "halfwidth")?;
                needs(k.path.is_some(), "path")?;
            }
        }

        self.validate_initial(ck)?;

        if self.study.needs_solver() {
            self.validate_solver(ck)?;
            self.validate_times(ck)?;
        }
        self.validate_analysis(ck)
    }

    fn validate_initial(&self, ck: &Checker) -> Result<()> {
        let s = &self.initial;
        let kind = *s.kind.get_ref();
        let forbid = |present: bool, what: &str| {
            ck.ensure(!present, s.kind.span(), || format!("`{what}` is not a parameter of initial kind {kind:?}"))
        };
        let single = s.mass.is_some() || s.width.is_some() || s.center.is_some();
        let pair = s.masses.is_some() || s.centers.is_some() || s.widths.is_some();
        match kind {
            InitialKind::Gaussian | InitialKind::Box => {
                forbid(pair, "masses/centers/widths")?;
                forbid(s.path.is_some(), "path")?;
                if let Some(m) = &s.mass {
                    let x = *m.get_ref();
                    ck.ensure(x >= 0.0 && x.is_finite(), m.span(), || {
                        format!("initial.mass must be nonnegative and finite, got {x}")
                    })?;
                }
                if let Some(w) = &s.width {
                    ck.positive(w, "initial.width")?;
                }
            }
            InitialKind::TwoBump => {
                forbid(single, "mass/width/center")?;
                forbid(s.path.is_some(), "path")?;
                for (v, name) in [(&s.masses, "masses"), (&s.centers, "centers"), (&s.widths, "widths")] {
                    let v = v.as_ref().ok_or_else(|| ck.fail(s.kind.span(), format!("two_bump requires `{name}`")))?;
                    ck.ensure(v.get_ref().len() == 2, v.span(), || format!("initial.{name} must have two entries"))?;
                }
                let m = s.masses.as_ref().unwrap();
                ck.ensure(m.get_ref().iter().all(|x| *x >= 0.0 && x.is_finite()), m.span(), || {
                    "initial.masses must be nonnegative".into()
                })?;
                ck.positive_list(s.widths.as_ref().unwrap(), "initial.widths")?;
            }
            InitialKind::Csv => {
                forbid(single || pair, "mass/width/center")?;
                ck.ensure(s.path.is_some(), s.kind.span(), || "initial kind csv requires `path`".into())?;
            }
        }
        Ok(())
    }

    fn validate_solver(&self, ck: &Checker) -> Result<()> {
        let s = &self.solver;
        let at = ck.section("solver");
        let missing =
            |what: &str| ck.fail(at.clone(), format!("solver.{what} is required for the {} study", self.study.name()));
        let q = s.q.as_ref().ok_or_else(|| missing("q"))?;
        let qv = *q.get_ref();
        ck.ensure(qv >= 2.0 && qv.is_finite(), q.span(), || format!("solver.q must be at least 2, got {qv}"))?;
        let a = *s.a.get_ref();
        ck.ensure(a.is_finite(), s.a.span(), || format!("solver.a must be finite, got {a}"))?;
        let cfl = *s.cfl.get_ref();
        ck.ensure(cfl > 0.0 && cfl <= 1.0, s.cfl.span(), || format!("solver.cfl must lie in (0, 1], got {cfl}"))?;
        let eps = *s.viscosity_eps.get_ref();
        ck.ensure(eps >= 0.0 && eps.is_finite(), s.viscosity_eps.span(), || {
            format!("solver.viscosity_eps must be nonnegative, got {eps}")
        })?;
        if s.scheme == SchemeName::UpwindPositive {
            ck.ensure(a >= 0.0, s.a.span(), || "upwind_positive requires a >= 0".into())?;
        }
        let t_end = s.t_end.as_ref().ok_or_else(|| missing("t_end"))?;
        ck.positive(t_end, "solver.t_end")?;
        if let Some(d) = &s.dt_max {
            ck.positive(d, "solver.dt_max")?;
        }
        if let Some(ts) = &s.snapshot_times {
            let v = ts.get_ref();
            if let Some(w) = v.windows(2).find(|w| !(w[1] > w[0])) {
                return Err(ck.fail(
                    ts.span(),
                    format!("solver.snapshot_times must be strictly increasing ({} then {})", w[0], w[1]),
                ));
            }
            let te = *t_end.get_ref();
            if let Some(t) = v.iter().find(|t| !(**t > 0.0 && **t <= te)) {
                return Err(ck.fail(ts.span(), format!("snapshot time {t} lies outside (0, t_end = {te}]")));
            }
        }
        Ok(())
    }

    fn validate_times(&self, ck: &Checker) -> Result<()> {
        let t_end = self.t_end();
        let snaps = self.snapshot_times();
        let explicit = self.solver.snapshot_times.is_some();
        let a = &self.analysis;
        let check_refs = |span: Range<usize>, name: &str, times: &[f64]| -> Result<()> {
            for &t in times {
                ck.ensure(t > 0.0 && t <= t_end, span.clone(), || {
                    format!("{name} references t = {t}, outside the simulated range (0, {t_end}]")
                })?;
                if explicit {
                    ck.ensure(contains_time(&snaps, t), span.clone(), || {
                        format!("{name} references t = {t}, which is not among solver.snapshot_times")
                    })?;
                }
            }
            Ok(())
        };
        match self.study {
            Study::Decay => {
                let span = a.window.as_ref().map_or(0..0, |w| w.span());
                if let Some(w) = &a.window {
                    ck.ensure(w.get_ref().len() == 2, w.span(), || "analysis.window must be [t_lo, t_hi]".into())?;
                }
                let (lo, hi) = self.window();
                ck.ensure(lo >= 1.0 && hi > lo, span.clone(), || {
                    format!("analysis.window [{lo}, {hi}] must satisfy 1 <= t_lo < t_hi")
                })?;
                ck.ensure(hi <= t_end, span.clone(), || {
                    format!("analysis.window ends at {hi}, beyond t_end = {t_end}")
                })?;
                let inside = snaps.iter().filter(|t| **t >= lo && **t <= hi).count();
                ck.ensure(inside >= 8, span, || {
                    format!("analysis.window [{lo}, {hi}] covers {inside} snapshots, at least 8 needed")
                })?;
                if let Some(p) = &a.p {
                    ck.ensure(p.get_ref().iter().all(|x| *x >= 1.0), p.span(), || {
                        "analysis.p entries must be >= 1".into()
                    })?;
                }
            }
            Study::Convergence => {
                let span = a.times.as_ref().map_or(0..0, |v| v.span());
                let times = self.distance_times();
                check_refs(span.clone(), "analysis.times", &times)?;
                if let Some(p) = &a.p {
                    ck.ensure(p.get_ref().iter().all(|x| *x >= 1.0), p.span(), || {
                        "analysis.p entries must be >= 1".into()
                    })?;
                }
            }
            Study::Rescaling => {
                let span = a.lambdas.as_ref().map_or(0..0, |v| v.span());
                let ls = self.lambdas();
                ck.ensure(ls.iter().all(|l| *l > 0.0), span.clone(), || "analysis.lambdas must be positive".into())?;
                let squares: Vec<f64> = ls.iter().map(|l| l * l).collect();
                check_refs(span, "analysis.lambdas", &squares)?;
                let present = [a.radii.is_some(), a.tail_times.is_some(), a.tail_lambdas.is_some()];
                if present.iter().any(|p| *p) && !present.iter().all(|p| *p) {
                    return Err(
                        ck.fail(ck.section("analysis"), "analysis.radii, tail_times and tail_lambdas go together")
                    );
                }
                if let Some(tp) = self.tail_params() {
                    let rs = a.radii.as_ref().unwrap();
                    let hw = *self.grid.half_width.get_ref();
                    ck.ensure(tp.radii.iter().all(|r| *r > 0.0 && 2.0 * r < hw), rs.span(), || {
                        format!("analysis.radii must lie in (0, {})", 0.5 * hw)
                    })?;
                    let tl = a.tail_lambdas.as_ref().unwrap();
                    ck.ensure(tp.lambdas.iter().all(|l| *l >= 1.0), tl.span(), || {
                        "analysis.tail_lambdas must be >= 1".into()
                    })?;
                    let tt = a.tail_times.as_ref().unwrap();
                    ck.positive_list(tt, "analysis.tail_times")?;
                    let mut scaled = Vec::new();
                    for t in &tp.times {
                        scaled.extend(tp.lambdas.iter().map(|l| l * l * t));
                    }
                    check_refs(tt.span(), "analysis.tail_times", &scaled)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_analysis(&self, ck: &Checker) -> Result<()> {
        let a = &self.analysis;
        match self.study {
            Study::Inequalities => {
                let t = *a.trials.get_ref();
                ck.ensure(t >= 1, a.trials.span(), || "analysis.trials must be at least 1".into())?;
                ck.positive(&a.rho_halfwidth, "analysis.rho_halfwidth")?;
                if let Some(l) = &a.gradient_lambdas {
                    ck.positive_list(l, "analysis.gradient_lambdas")?;
                }
                if let Some(e) = &a.epsilons {
                    ck.ensure(e.get_ref().iter().all(|x| *x > 0.0 && *x < 1.0), e.span(), || {
                        "analysis.epsilons must lie in (0, 1)".into()
                    })?;
                }
                if let Some(n) = &a.ns {
                    ck.ensure(n.get_ref().iter().all(|x| *x >= 1), n.span(), || "analysis.ns must be positive".into())?;
                }
            }
            Study::Oracle => {
                if let Some(s) = &a.sizes {
                    ck.ensure(s.get_ref().iter().all(|x| *x >= 8), s.span(), || {
                        "analysis.sizes entries must be at least 8".into()
                    })?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses and validates a spec held in memory. `path` is used for error
/// messages and to resolve relative paths.
pub fn parse_spec(text: &str, path: &Path) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        NlcdError::Spec { path: path.to_path_buf(), line, column, message: e.message().to_string() }
    })?;
    spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    spec.source = path.to_path_buf();
    spec.validate(&Checker { text, path })?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_spec(&text, path)
}
