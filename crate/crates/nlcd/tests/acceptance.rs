//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nlcd::core::analysis::{
    audit_balance, audit_gradient_bound, audit_localized, decay_exponent, fourier_splitting_bound, random_field,
    renormalized_distance, rescaled_l1_distance, tail_bound_check, trial_rng,
};
use nlcd::core::kernel::convolve;
use nlcd::core::profiles::{profile_residual, self_similarity_check};
use nlcd::core::solver::{energy_ledger_check, entropy_residual, run, stable_dt, step, vanishing_viscosity_compare};
use nlcd::core::{
    BurgersProfile, ConvolutionPath, DiscreteKernel, Field, Grid, HeatProfile, KernelSpec, Profile, SolutionStore,
    SolverConfig,
};
use nlcd::study::rescaling_target;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn gaussian(g: Grid, mass: f64) -> Field {
    let c = mass / (2.0 * std::f64::consts::PI).sqrt();
    Field::from_fn(g, |x| c * (-0.5 * x * x).exp()).unwrap()
}

fn exp_kernel(g: &Grid) -> DiscreteKernel {
    DiscreteKernel::discretize(&KernelSpec::Exponential, g.dx(), 1e-12).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

/// Long runs on `[-200, 200]` with snapshots every 10 time units plus the
/// times the distance and rescaling checks read.
struct LongRuns {
    q3: SolutionStore,
    q2_mass2: SolutionStore,
    q2: SolutionStore,
    q2_coarse: SolutionStore,
    q3_coarse: SolutionStore,
    secs: [f64; 5],
}

fn long_run(q: f64, mass: f64, cells: usize) -> (SolutionStore, f64) {
    let g = Grid::symmetric(200.0, cells).unwrap();
    let k = exp_kernel(&g);
    let mut cfg = SolverConfig::new(q, 500.0);
    let mut times: Vec<f64> = (1..=50).map(|i| 10.0 * i as f64).collect();
    times.extend([1.0, 4.0, 16.0, 25.0, 64.0, 256.0]);
    times.sort_by(f64::total_cmp);
    times.dedup();
    cfg.snapshot_times = times;
    let (s, d) = timed(|| run(&gaussian(g, mass), &k, &cfg).unwrap());
    (s, d.as_secs_f64())
}

impl LongRuns {
    fn new() -> Self {
        let (q3, a) = long_run(3.0, 1.0, 2048);
        let (q2_mass2, b) = long_run(2.0, 2.0, 2048);
        let (q2, c) = long_run(2.0, 1.0, 2048);
        let (q2_coarse, d) = long_run(2.0, 1.0, 1024);
        let (q3_coarse, e) = long_run(3.0, 1.0, 1024);
        LongRuns { q3, q2_mass2, q2, q2_coarse, q3_coarse, secs: [a, b, c, d, e] }
    }
}

fn conservation() -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for q in [2.0, 3.0] {
        let g = Grid::symmetric(200.0, 2048).unwrap();
        let k = exp_kernel(&g);
        let phi = gaussian(g, 1.0);
        let mut cfg = SolverConfig::new(q, 100.0);
        cfg.snapshot_times = (1..=20).map(|i| 5.0 * i as f64).collect();
        let (s, d) = timed(|| run(&phi, &k, &cfg).unwrap());
        let mut drift = 0.0f64;
        for row in s.ledger() {
            let leak = s.cumulative_leak_at(row.t);
            drift = drift.max((row.mass + leak - phi.mass()).abs());
        }
        let min = s.snapshots().iter().map(|f| f.min()).fold(f64::INFINITY, f64::min);
        ok &= drift <= 1e-9 && min >= -1e-14 && d.as_secs() <= 120;
        parts.push(format!("q={q}: drift {drift:.2e}, min {min:.2e}, {:.1}s", d.as_secs_f64()));
    }
    outcome(ok, parts.join("; "))
}

fn direct_sum(k: &DiscreteKernel, f: &[f64]) -> Vec<f64> {
    let n = f.len() as isize;
    let m = k.half_width() as isize;
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in -m..=m {
                let src = i - j;
                if (0..n).contains(&src) {
                    s += k.weight(j) * f[src as usize] * k.dx();
                }
            }
            s
        })
        .collect()
}

fn naive_step(u: &[f64], k: &DiscreteKernel, q: f64, a: f64, dx: f64, dt: f64) -> Vec<f64> {
    let n = u.len() as isize;
    let at = |i: isize| if (0..n).contains(&i) { u[i as usize] } else { 0.0 };
    let conv = direct_sum(k, u);
    // f = a|u|^{q-1}u is nondecreasing for a >= 0, so the monotone flux
    // takes the upwind (left) state
    let f = |v: f64| a * v.abs().powf(q - 1.0) * v;
    (0..n).map(|i| at(i) + dt * (conv[i as usize] - at(i)) - dt / dx * (f(at(i)) - f(at(i - 1)))).collect()
}

fn convolution_oracle() -> Outcome {
    let kernels = [KernelSpec::Exponential, KernelSpec::Gaussian { sigma: 1.0 }, KernelSpec::Box { halfwidth: 1.5 }];
    let sizes = [16usize, 64, 100, 255, 256, 512];
    let (mut worst_lib, mut worst_sum) = (0.0f64, 0.0f64);
    for trial in 0..100u64 {
        let n = sizes[trial as usize % sizes.len()];
        let g = Grid::new(-0.05 * n as f64, 0.1, n).unwrap();
        let k = DiscreteKernel::discretize(&kernels[trial as usize % 3], g.dx(), 1e-12).unwrap();
        let f = random_field(&mut trial_rng(2024, trial), &g);
        let fast = convolve(&k, &f, ConvolutionPath::Fft).unwrap();
        let slow = convolve(&k, &f, ConvolutionPath::Direct).unwrap();
        let naive = direct_sum(&k, f.values());
        let scale = naive.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for ((a, b), c) in fast.values().iter().zip(slow.values()).zip(&naive) {
            worst_lib = worst_lib.max((a - b).abs() / scale);
            worst_sum = worst_sum.max((a - c).abs() / scale);
        }
    }
    let g = Grid::symmetric(20.0, 400).unwrap();
    let k = exp_kernel(&g);
    let mut worst_step = 0.0f64;
    for q in [2.0, 3.0] {
        let phi = gaussian(g, 3.0);
        let cfg = SolverConfig::new(q, 1.0);
        let dt = 0.9 * stable_dt(&phi, &k, &cfg);
        let got = step(&phi, &k, &cfg, dt).unwrap();
        let want = naive_step(phi.values(), &k, q, 1.0, g.dx(), dt);
        for (a, b) in got.values().iter().zip(&want) {
            worst_step = worst_step.max((a - b).abs() / phi.max_abs());
        }
    }
    outcome(
        worst_lib <= 1e-12 && worst_sum <= 1e-12 && worst_step <= 1e-12,
        format!("fft vs direct {worst_lib:.2e}, fft vs loop {worst_sum:.2e}, step vs loop {worst_step:.2e}"),
    )
}

fn decay_rates(r: &LongRuns) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for (q, s, secs) in [(2.0, &r.q2, r.secs[2]), (3.0, &r.q3, r.secs[0])] {
        let s2 = decay_exponent(s, 2.0, (50.0, 500.0)).unwrap().slope;
        let s1 = decay_exponent(s, 1.0, (50.0, 500.0)).unwrap().slope;
        ok &= (-0.31..=-0.19).contains(&s2) && (-0.01..=0.01).contains(&s1) && secs <= 600.0;
        parts.push(format!("q={q}: p=2 slope {s2:.4}, p=1 slope {s1:.1e}, {secs:.1}s"));
    }
    outcome(ok, parts.join("; "))
}

fn fourier_splitting(r: &LongRuns) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for (q, fine, coarse) in [(2.0, &r.q2, &r.q2_coarse), (3.0, &r.q3, &r.q3_coarse)] {
        let c = |s: &SolutionStore| {
            let phi = s.initial();
            fourier_splitting_bound(s, (phi.lp_norm(1.0).unwrap(), phi.lp_norm(2.0).unwrap()))
        };
        let (cf, cc) = (c(fine), c(coarse));
        let ratio = cf.max(cc) / cf.min(cc);
        ok &= cf.is_finite() && cc.is_finite() && cf > 0.0 && ratio <= 2.0;
        parts.push(format!("q={q}: C {cc:.4} (n=1024) vs {cf:.4} (n=2048), ratio {ratio:.3}"));
    }
    outcome(ok, parts.join("; "))
}

fn profile_convergence(r: &LongRuns) -> Outcome {
    let a = exp_kernel(r.q3.grid()).second_moment_a();
    let heat1 = Profile::Heat(HeatProfile::new(1.0, a).unwrap());
    let d = |s: &SolutionStore, p: &Profile, t: f64| renormalized_distance(s, p, 1.0, t).unwrap();
    let (h25, h400) = (d(&r.q3, &heat1, 25.0), d(&r.q3, &heat1, 400.0));
    let burgers = Profile::Burgers(BurgersProfile::with_coupling(2.0, a, 1.0).unwrap());
    let half = Profile::Burgers(BurgersProfile::with_coupling(2.0, a, 0.5).unwrap());
    let heat2 = Profile::Heat(HeatProfile::new(2.0, a).unwrap());
    let (b25, b400) = (d(&r.q2_mass2, &burgers, 25.0), d(&r.q2_mass2, &burgers, 400.0));
    let (heat_400, half_400) = (d(&r.q2_mass2, &heat2, 400.0), d(&r.q2_mass2, &half, 400.0));
    let secs = r.secs[0] + r.secs[1];
    outcome(
        h400 < 0.5 * h25 && b400 < 0.5 * b25 && b400 < heat_400 && secs <= 900.0,
        format!(
            "q=3 heat {h25:.4} -> {h400:.4}; q=2 M=2 Burgers (w^2) {b25:.4} -> {b400:.4}, heat {heat_400:.4}, \
             Burgers (w^2/2) {half_400:.4} at t=400"
        ),
    )
}

fn rescaling(r: &LongRuns) -> Outcome {
    let a = exp_kernel(r.q3.grid()).second_moment_a();
    let prof = Profile::Heat(HeatProfile::new(1.0, a).unwrap());
    let target = rescaling_target(a);
    let ds: Vec<f64> =
        [2.0, 4.0, 8.0, 16.0].iter().map(|l| rescaled_l1_distance(&r.q3, *l, &prof, &target).unwrap()).collect();
    let ok = ds.windows(2).all(|w| w[1] < w[0]);
    outcome(ok, format!("lambda 2, 4, 8, 16: {}", ds.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")))
}

fn energy_identity() -> Outcome {
    let g = Grid::symmetric(50.0, 1000).unwrap();
    let k = exp_kernel(&g);
    let phi = gaussian(g, 1.0);
    let mut ok = true;
    let mut parts = vec![];
    for (q, a) in [(2.0, 0.0), (2.0, 1.0)] {
        let res: Vec<f64> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|dt| {
                let mut cfg = SolverConfig::new(q, 5.0);
                cfg.a = a;
                cfg.dt_max = Some(*dt);
                cfg.snapshot_times = vec![1.0, 5.0];
                let s = run(&phi, &k, &cfg).unwrap();
                energy_ledger_check(&s).unwrap().iter().map(|e| e.residual.abs()).sum()
            })
            .collect();
        let ratios = [res[0] / res[1], res[1] / res[2]];
        ok &= ratios.iter().all(|x| (1.6..=2.4).contains(x));
        parts.push(format!("a={a}: ratios {:.3}, {:.3}", ratios[0], ratios[1]));
    }
    outcome(ok, parts.join("; "))
}

fn entropy() -> Outcome {
    let g = Grid::symmetric(20.0, 400).unwrap();
    let k = exp_kernel(&g);
    let phi = Field::from_fn(g, |x| if (-5.0..0.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
    let cfg = SolverConfig::new(2.0, 5.0);
    let s = run(&phi, &k, &cfg).unwrap();
    let umax = s.snapshots().iter().map(|f| f.max()).fold(0.0, f64::max);
    let ks: Vec<f64> = (0..).map(|i| 0.1 * i as f64).take_while(|k| *k <= umax + 1e-12).collect();
    let rows = entropy_residual(&s, &ks).unwrap();
    // nonpositive residuals certify the inequality
    let worst = rows.iter().map(|r| r.worst).fold(f64::NEG_INFINITY, f64::max);
    outcome(worst <= 1e-10, format!("{} steps x {} levels, worst violation {worst:.2e}", rows.len(), ks.len()))
}

fn inequality_audits() -> Outcome {
    let g = Grid::symmetric(10.0, 512).unwrap();
    let rho = KernelSpec::Bump { halfwidth: 3.0 };
    let seed = 7;
    let (reports, d) = timed(|| {
        vec![
            audit_gradient_bound(&rho, &g, &[0.5, 1.0, 2.0, 8.0], 1000, seed).unwrap(),
            audit_balance(&rho, &g, &[0.1, 0.5, 0.9], 1000, seed).unwrap(),
            audit_localized(&rho, &g, &[1, 2, 4, 8], 1000, seed).unwrap(),
        ]
    });
    let ok =
        reports.iter().all(|r| r.trials >= 1000 && r.violations == 0 && r.seed == Some(seed)) && d.as_secs() <= 120;
    let parts: Vec<String> =
        reports.iter().map(|r| format!("{} {} trials {} violations", r.lemma.name(), r.trials, r.violations)).collect();
    outcome(ok, format!("{}; seed {seed}; {:.2}s", parts.join(", "), d.as_secs_f64()))
}

fn tail_bound() -> Outcome {
    let g = Grid::symmetric(400.0, 4096).unwrap();
    let k = exp_kernel(&g);
    let phi = gaussian(g, 1.0);
    let mut cfg = SolverConfig::new(2.0, 1600.0);
    cfg.snapshot_times = vec![1.0, 2.0, 4.0, 10.0, 16.0, 40.0, 100.0, 160.0, 400.0];
    let s = run(&phi, &k, &cfg).unwrap();
    let fit = tail_bound_check(&s, &phi, &[10.0, 20.0, 40.0], &[1.0, 10.0, 100.0], &[1.0, 2.0, 4.0]).unwrap();
    let per: Vec<String> = fit.per_radius.iter().map(|(r, c)| format!("C_{r}={c:.3e}")).collect();
    outcome(
        fit.constant.is_finite() && fit.growth <= 4.0,
        format!("{}; growth {:.3} (max/min spread {:.2e})", per.join(", "), fit.growth, fit.spread),
    )
}

fn profile_consistency() -> Outcome {
    let g = Grid::symmetric(4.0, 41).unwrap();
    let mut ok = true;
    let mut parts = vec![];
    for (name, p) in [
        ("heat", Profile::Heat(HeatProfile::new(1.0, 1.0).unwrap())),
        ("burgers", Profile::Burgers(BurgersProfile::new(1.0, 1.0).unwrap())),
        ("burgers M=3", Profile::Burgers(BurgersProfile::new(3.0, 0.5).unwrap())),
    ] {
        let r1 = profile_residual(&p, 1.0, &g, 0.02).unwrap();
        let r2 = profile_residual(&p, 1.0, &g, 0.01).unwrap();
        let ss = [(0.5, 2.0), (1.0, 3.0), (2.0, 0.25)]
            .iter()
            .map(|(t, l)| self_similarity_check(&p, *t, *l, &g).unwrap())
            .fold(0.0, f64::max);
        ok &= (3.2..=4.8).contains(&(r1 / r2)) && ss <= 1e-12;
        parts.push(format!("{name}: residual ratio {:.3}, self-similarity {ss:.1e}", r1 / r2));
    }
    let wide = Grid::symmetric(80.0, 160_000).unwrap();
    let mut worst_mass = 0.0f64;
    for (m, a) in [(0.5, 1.0), (1.0, 1.0), (2.0, 0.5), (5.0, 2.0)] {
        let p = Profile::Burgers(BurgersProfile::new(m, a).unwrap());
        for t in [0.5, 1.0, 4.0] {
            worst_mass = worst_mass.max((p.sample(&wide, t).unwrap().mass() - m).abs());
        }
    }
    ok &= worst_mass <= 1e-8;
    parts.push(format!("Burgers mass error {worst_mass:.1e}"));
    outcome(ok, parts.join("; "))
}

fn vanishing_viscosity() -> Outcome {
    let g = Grid::symmetric(20.0, 800).unwrap();
    let k = exp_kernel(&g);
    let phi = gaussian(g, 1.0);
    let cfg = SolverConfig::new(2.0, 1.0);
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let rows = vanishing_viscosity_compare(&phi, &k, &cfg, &eps).unwrap();
    let ds: Vec<f64> = eps.iter().map(|e| rows.iter().find(|r| r.eps == *e).unwrap().distance).collect();
    let monotone = ds.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = ds.windows(2).map(|w| w[0] / w[1]).collect();
    let linear = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    outcome(
        monotone && linear,
        format!(
            "distances {}; halving ratios {}",
            ds.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let (o, d) = timed(f);
        let tag = if o.ok { "PASS" } else { "FAIL" };
        println!("criterion {n} {name}: {tag} {} [{:.1}s]", o.detail, d.as_secs_f64());
        if !o.ok {
            failed += 1;
        }
    };
    report(1, "conservation_positivity", &conservation);
    report(2, "convolution_oracle", &convolution_oracle);
    let (runs, d) = timed(LongRuns::new);
    println!("(long runs for criteria 3-6 took {:.1}s)", d.as_secs_f64());
    report(3, "decay_rates", &|| decay_rates(&runs));
    report(4, "fourier_splitting", &|| fourier_splitting(&runs));
    report(5, "profile_convergence", &|| profile_convergence(&runs));
    report(6, "rescaling", &|| rescaling(&runs));
    report(7, "energy_identity", &energy_identity);
    report(8, "entropy", &entropy);
    report(9, "inequality_audits", &inequality_audits);
    report(10, "tail_bound", &tail_bound);
    report(11, "profile_consistency", &profile_consistency);
    report(12, "vanishing_viscosity", &vanishing_viscosity);
    if failed == 0 {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
