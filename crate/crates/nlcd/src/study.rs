//! Study execution: one solver run (when the study needs it) followed by
//! the analyses of the spec, with every table written through the
//! manifest.

use std::time::Instant;

use nlcd_core::analysis::{
    decay_exponent, fourier_splitting_bound, random_field, renormalized_distance, rescaled_l1_distance,
    tail_bound_check, trial_rng, BalanceAudit, GradientAudit, IneqReport, Lemma, LocalizedAudit, TrialOutcome,
};
use nlcd_core::kernel::convolve;
use nlcd_core::solver::run;
use nlcd_core::{
    BurgersProfile, ConvolutionPath, DiscreteKernel, Error as CoreError, Field, Grid, HeatProfile, Profile,
    SolutionStore,
};
use rayon::prelude::*;

use crate::error::{NlcdError, Result};
use crate::io::{field_table, fmt_float, ledger_table, snapshot_file_name, Table};
use crate::manifest::{Criterion, RunManifest};
use crate::plot::emit_plot_data;
use crate::spec::{ExperimentSpec, Study};

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "NLCD_THREADS";

pub const MASS_DRIFT_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-14;
pub const ORACLE_TOL: f64 = 1e-12;
pub const TAIL_GROWTH_MAX: f64 = 4.0;

/// Admissible deviation of a fitted decay slope from `-(1 - 1/p)/2`.
pub fn slope_tolerance(p: f64) -> f64 {
    if p == 1.0 {
        0.01
    } else {
        0.06
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| NlcdError::Other(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(NlcdError::Other(format!("{THREADS_VAR} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| NlcdError::Other(e.to_string()))
}

/// Runs the study described by `spec`, writes its outputs, plot series
/// and `manifest.json` under the spec's output directory.
pub fn execute(spec: &ExperimentSpec) -> Result<RunManifest> {
    execute_as(spec, spec.study)
}

/// Like [`execute`] with the study replaced by `study`.
pub fn execute_as(spec: &ExperimentSpec, study: Study) -> Result<RunManifest> {
    let start = Instant::now();
    let mut m = RunManifest {
        study: study.name().to_string(),
        spec_hash: spec.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: 0.0,
        output_dir: spec.output_path(),
        files: Vec::new(),
        criteria: Vec::new(),
        notes: Vec::new(),
    };
    m.emit("spec.toml", &spec.to_toml())?;
    let pool = thread_pool()?;
    pool.install(|| match study {
        Study::Decay | Study::Convergence | Study::Rescaling => solver_study(spec, study, &mut m),
        Study::Inequalities => inequality_study(spec, &mut m),
        Study::Oracle => oracle_study(spec, &mut m),
    })?;
    if emit_plot_data(&mut m)? == 0 {
        m.notes.push("no plot series written".into());
    }
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write()?;
    Ok(m)
}

fn solver_study(spec: &ExperimentSpec, study: Study, m: &mut RunManifest) -> Result<()> {
    let grid = spec.grid();
    let kernel = DiscreteKernel::discretize(&spec.kernel_spec()?, grid.dx(), spec.tail_tol())?;
    let phi = spec.initial_datum()?;
    let cfg = spec.solver_config();
    let store = match run(&phi, &kernel, &cfg) {
        Ok(s) => {
            m.criteria.push(Criterion::check("solver", true, format!("reached t = {}", s.final_time())));
            s
        }
        Err(CoreError::Diverged { t, last_good }) => {
            m.criteria.push(Criterion::check(
                "solver",
                false,
                format!("non-finite state at t = {t:.6e}; outputs up to t = {:.6e} retained", last_good.final_time()),
            ));
            m.notes.push(format!("{} analysis skipped after the solver abort", study.name()));
            write_store(spec, m, &last_good)?;
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    write_store(spec, m, &store)?;
    conservation_checks(&store, &phi, m);
    match study {
        Study::Decay => decay_analysis(spec, &store, &phi, m),
        Study::Convergence => convergence_analysis(spec, &store, &kernel, m),
        Study::Rescaling => rescaling_analysis(spec, &store, &kernel, &phi, m),
        _ => unreachable!("not a solver study"),
    }
}

fn write_store(spec: &ExperimentSpec, m: &mut RunManifest, store: &SolutionStore) -> Result<()> {
    m.emit("ledger.csv", &ledger_table(store.ledger()).to_csv())?;
    if spec.write_snapshots {
        for (t, f) in store.times().iter().zip(store.snapshots()) {
            let name = format!("snapshots/{}", snapshot_file_name(*t));
            m.emit(&name, &field_table(f).to_csv())?;
        }
    }
    Ok(())
}

fn conservation_checks(store: &SolutionStore, phi: &Field, m: &mut RunManifest) {
    let m0 = phi.mass();
    let t = store.final_time();
    let drift = store.final_field().mass() + store.cumulative_leak_at(t) - m0;
    let tol = MASS_DRIFT_TOL * phi.lp_norm(1.0).unwrap_or(0.0).max(1.0);
    m.criteria.push(Criterion::check(
        "mass_balance",
        drift.abs() <= tol,
        format!("mass drift after leak {drift:.3e} (tolerance {tol:.1e})"),
    ));
    if phi.min() >= 0.0 {
        let min = store.snapshots().iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
        m.criteria.push(Criterion::check(
            "positivity",
            min >= -POSITIVITY_TOL,
            format!("smallest stored value {min:.3e}"),
        ));
    } else {
        m.criteria.push(Criterion::skipped("positivity", "initial datum changes sign"));
    }
}

fn decay_analysis(spec: &ExperimentSpec, store: &SolutionStore, phi: &Field, m: &mut RunManifest) -> Result<()> {
    let window = spec.window();
    let ps = spec.p_list();
    let mut norms = Table::new(&["t", "p", "norm"]);
    for (t, f) in store.times().iter().zip(store.snapshots()) {
        if *t <= 0.0 {
            continue;
        }
        for &p in &ps {
            norms.push_floats(&[*t, p, f.lp_norm(p)?]);
        }
    }
    let mut fits = Table::new(&["p", "t_lo", "t_hi", "slope", "intercept", "r_squared", "points", "expected"]);
    for &p in &ps {
        let expected = -0.5 * (1.0 - 1.0 / p);
        let name = format!("decay_slope_p{p}");
        match decay_exponent(store, p, window) {
            Ok(fit) => {
                fits.push(vec![
                    fmt_float(p),
                    fmt_float(fit.t_lo),
                    fmt_float(fit.t_hi),
                    fmt_float(fit.slope),
                    fmt_float(fit.intercept),
                    fmt_float(fit.r_squared),
                    fit.points.to_string(),
                    fmt_float(expected),
                ]);
                let tol = slope_tolerance(p);
                m.criteria.push(Criterion::check(
                    name,
                    (fit.slope - expected).abs() <= tol,
                    format!("slope {:.6} vs {expected:.6} +- {tol}", fit.slope),
                ));
            }
            Err(CoreError::Degenerate(msg)) => {
                m.criteria.push(Criterion::skipped(name, msg.clone()));
                m.notes.push(format!("decay fit for p = {p} skipped: {msg}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    m.emit("norms.csv", &norms.to_csv())?;
    m.emit("decay_fits.csv", &fits.to_csv())?;
    let (l1, l2) = (phi.lp_norm(1.0)?, phi.lp_norm(2.0)?);
    let c = fourier_splitting_bound(store, (l1, l2));
    let mut t = Table::new(&["constant", "phi_l1", "phi_l2"]);
    t.push_floats(&[c, l1, l2]);
    m.emit("fourier_splitting.csv", &t.to_csv())?;
    m.criteria.push(Criterion::check("fourier_splitting", c.is_finite(), format!("C = {c:.6}")));
    Ok(())
}

/// The limit profile for the run and the competitors it is compared with.
pub fn candidate_profiles(q: f64, a: f64, mass: f64, diffusivity: f64) -> Result<Vec<(&'static str, Profile)>> {
    let limit = Profile::limit_for(q, a, mass, diffusivity)?;
    let mut out = vec![("limit", limit)];
    if let Profile::Burgers(_) = limit {
        out.push(("heat", Profile::Heat(HeatProfile::new(mass, diffusivity)?)));
        out.push(("burgers_half", Profile::Burgers(BurgersProfile::with_coupling(mass, diffusivity, 0.5 * a)?)));
    } else if a != 0.0 && mass >= 0.0 {
        out.push(("burgers", Profile::Burgers(BurgersProfile::with_coupling(mass, diffusivity, a)?)));
    }
    Ok(out)
}

fn convergence_analysis(
    spec: &ExperimentSpec,
    store: &SolutionStore,
    kernel: &DiscreteKernel,
    m: &mut RunManifest,
) -> Result<()> {
    let mass = store.initial().mass();
    let cfg = spec.solver_config();
    let times = spec.distance_times();
    let ps = spec.p_list();
    if mass <= 0.0 {
        m.criteria.push(Criterion::skipped("profile_trend", format!("mass {mass} is not positive")));
        m.emit("distances.csv", &Table::new(&["t", "p", "profile", "distance"]).to_csv())?;
        return Ok(());
    }
    let profiles = candidate_profiles(cfg.q, cfg.a, mass, kernel.second_moment_a())?;
    let mut table = Table::new(&["t", "p", "profile", "distance"]);
    let mut d = |name: &str, p: f64, t: f64| -> Result<f64> {
        let prof = profiles.iter().find(|(n, _)| *n == name).map(|x| x.1).expect("known profile");
        let v = renormalized_distance(store, &prof, p, t)?;
        table.push(vec![fmt_float(t), fmt_float(p), name.to_string(), fmt_float(v)]);
        Ok(v)
    };
    let mut results = Vec::new();
    for &p in &ps {
        for &t in &times {
            for (name, _) in &profiles {
                results.push((p, t, *name, d(name, p, t)?));
            }
        }
    }
    m.emit("distances.csv", &table.to_csv())?;
    let get = |p: f64, t: f64, name: &str| {
        results.iter().find(|r| r.0 == p && r.1 == t && r.2 == name).map(|r| r.3).expect("computed above")
    };
    if times.len() >= 2 {
        let (t0, t1) = (times[0], times[times.len() - 1]);
        for &p in &ps {
            let (d0, d1) = (get(p, t0, "limit"), get(p, t1, "limit"));
            m.criteria.push(Criterion::check(
                format!("profile_trend_p{p}"),
                d1 < d0,
                format!("distance to the limit profile {d0:.6e} at t = {t0}, {d1:.6e} at t = {t1}"),
            ));
        }
        if let Some(&p) = ps.first() {
            for (name, _) in profiles.iter().skip(1) {
                let (dl, dc) = (get(p, t1, "limit"), get(p, t1, name));
                m.criteria.push(Criterion::check(
                    format!("closer_than_{name}"),
                    dl < dc,
                    format!("at t = {t1}, p = {p}: limit {dl:.6e}, {name} {dc:.6e}"),
                ));
            }
        }
    } else {
        m.notes.push("a single distance time: no trend criterion".into());
    }
    Ok(())
}

/// Target grid for `u_lambda(1, .)`: ten diffusion lengths of the limit
/// at `t = 1`, 4000 cells.
pub fn rescaling_target(diffusivity: f64) -> Grid {
    let hw = 10.0 * (4.0 * diffusivity).sqrt();
    Grid::symmetric(hw, 4000).expect("positive width")
}

fn rescaling_analysis(
    spec: &ExperimentSpec,
    store: &SolutionStore,
    kernel: &DiscreteKernel,
    phi: &Field,
    m: &mut RunManifest,
) -> Result<()> {
    let mass = store.initial().mass();
    let cfg = spec.solver_config();
    let a_diff = kernel.second_moment_a();
    let mut lambdas = spec.lambdas();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    let mut table = Table::new(&["lambda", "distance"]);
    if mass > 0.0 {
        let prof = Profile::limit_for(cfg.q, cfg.a, mass, a_diff)?;
        let target = rescaling_target(a_diff);
        let mut ds = Vec::new();
        for &l in &lambdas {
            let d = rescaled_l1_distance(store, l, &prof, &target)?;
            table.push_floats(&[l, d]);
            ds.push(d);
        }
        if ds.len() >= 2 {
            let ok = ds.windows(2).all(|w| w[1] < w[0]);
            let list: Vec<String> = ds.iter().map(|d| format!("{d:.4e}")).collect();
            m.criteria.push(Criterion::check(
                "rescaled_distance_decreasing",
                ok,
                format!("distances along lambda: {}", list.join(", ")),
            ));
        }
    } else {
        m.criteria.push(Criterion::skipped("rescaled_distance_decreasing", format!("mass {mass} is not positive")));
    }
    m.emit("rescaled.csv", &table.to_csv())?;
    if let Some(tp) = spec.tail_params() {
        let fit = tail_bound_check(store, phi, &tp.radii, &tp.times, &tp.lambdas)?;
        let mut t = Table::new(&["radius", "constant"]);
        for (r, c) in &fit.per_radius {
            t.push_floats(&[*r, *c]);
        }
        m.emit("tail.csv", &t.to_csv())?;
        let mut s = Table::new(&["constant", "growth", "spread"]);
        s.push_floats(&[fit.constant, fit.growth, fit.spread]);
        m.emit("tail_summary.csv", &s.to_csv())?;
        m.criteria.push(Criterion::check(
            "tail_bound",
            fit.constant.is_finite() && fit.growth <= TAIL_GROWTH_MAX,
            format!("C = {:.4e}, growth across radii {:.3}, spread {:.3e}", fit.constant, fit.growth, fit.spread),
        ));
    }
    Ok(())
}

fn report(lemma: Lemma, seed: u64, trials: usize, f: impl Fn(usize) -> TrialOutcome + Sync + Send) -> IneqReport {
    let outcomes: Vec<TrialOutcome> = (0..trials).into_par_iter().map(f).collect();
    IneqReport::from_outcomes(lemma, Some(seed), outcomes)
}

/// Runs the three randomized inequality audits with trials spread over the
/// current thread pool. Results do not depend on the thread count.
pub fn inequality_reports(spec: &ExperimentSpec) -> Result<Vec<IneqReport>> {
    let grid = spec.grid();
    let rho = spec.rho_spec();
    let seed = spec.analysis.seed;
    let trials = spec.trials();
    let g = GradientAudit::new(&rho, &grid, &spec.gradient_lambdas())?;
    let b = BalanceAudit::new(&rho, &grid, &spec.epsilons())?;
    let l = LocalizedAudit::new(&rho, &grid, &spec.ns())?;
    Ok(vec![
        report(Lemma::GradientBound, seed, trials, |i| g.trial(seed, i)),
        report(Lemma::Balance, seed, trials, |i| b.trial(seed, i)),
        report(Lemma::Localized, seed, trials, |i| l.trial(seed, i)),
    ])
}

pub fn inequality_table(reports: &[IneqReport]) -> Table {
    let mut t = Table::new(&["lemma", "trials", "worst_margin", "worst_relative_margin", "violations", "seed"]);
    for r in reports {
        t.push(vec![
            r.lemma.name().to_string(),
            r.trials.to_string(),
            fmt_float(r.worst_margin),
            fmt_float(r.worst_relative_margin),
            r.violations.to_string(),
            r.seed.map_or_else(String::new, |s| s.to_string()),
        ]);
    }
    t
}

fn inequality_study(spec: &ExperimentSpec, m: &mut RunManifest) -> Result<()> {
    let reports = inequality_reports(spec)?;
    m.emit("inequalities.csv", &inequality_table(&reports).to_csv())?;
    for r in &reports {
        m.criteria.push(Criterion::check(
            format!("inequality_{}", r.lemma.name()),
            r.passed(),
            format!(
                "{} trials, {} violations, worst relative margin {:.3e}, seed {}",
                r.trials, r.violations, r.worst_relative_margin, spec.analysis.seed
            ),
        ));
    }
    Ok(())
}

/// Largest `max_i |fft_i - direct_i| / max_i |direct_i|` over `trials`
/// random fields of `n` cells of spacing 0.1.
pub fn fft_direct_deviation(spec: &ExperimentSpec, n: usize, trials: usize, seed: u64) -> Result<f64> {
    let grid = Grid::new(-0.05 * n as f64, 0.1, n)?;
    let kernel = DiscreteKernel::discretize(&spec.kernel_spec()?, grid.dx(), spec.tail_tol())?;
    let devs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let f = random_field(&mut trial_rng(seed ^ n as u64, i as u64), &grid);
            let fast = convolve(&kernel, &f, ConvolutionPath::Fft)?;
            let slow = convolve(&kernel, &f, ConvolutionPath::Direct)?;
            let scale = slow.max_abs();
            let diff = fast.difference(&slow)?.max_abs();
            Ok(if scale > 0.0 { diff / scale } else { diff })
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

fn oracle_study(spec: &ExperimentSpec, m: &mut RunManifest) -> Result<()> {
    let seed = spec.analysis.seed;
    let trials = spec.trials();
    let mut t = Table::new(&["n", "trials", "max_relative_deviation"]);
    for n in spec.oracle_sizes() {
        let dev = fft_direct_deviation(spec, n, trials, seed)?;
        t.push(vec![n.to_string(), trials.to_string(), fmt_float(dev)]);
        m.criteria.push(Criterion::check(
            format!("fft_vs_direct_n{n}"),
            dev <= ORACLE_TOL,
            format!("max relative deviation {dev:.3e} over {trials} fields"),
        ));
    }
    m.emit("oracle.csv", &t.to_csv())?;
    Ok(())
}
