use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nlcd::io::read_table;
use nlcd::manifest::{sha256_hex, MANIFEST_FILE};
use nlcd::{execute, load_spec, RunManifest, Status};

fn run_in(dir: &Path, text: &str) -> RunManifest {
    let p = dir.join("spec.toml");
    fs::write(&p, text).unwrap();
    let spec = load_spec(&p).unwrap();
    execute(&spec).unwrap()
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let t = read_table(path).unwrap();
    let i = t.column_index(name).unwrap();
    t.rows().iter().map(|r| r[i].parse().unwrap()).collect()
}

const SMALL_DECAY: &str = r#"
study = "decay"
output_dir = "out"
[grid]
half_width = 40.0
cells = 400
[initial]
kind = "gaussian"
mass = 1.0
[solver]
q = 3.0
t_end = 40.0
[analysis]
p = [1.0, 2.0, 3.0]
window = [4.0, 40.0]
"#;

#[test]
fn zero_datum_gives_zero_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_in(dir.path(), &SMALL_DECAY.replace("mass = 1.0", "mass = 0.0"));
    assert!(m.passed(), "{:?}", m.criteria);
    for name in ["decay_slope_p1", "decay_slope_p2", "decay_slope_p3"] {
        let c = m.criteria.iter().find(|c| c.name == name).unwrap();
        assert_eq!(c.status, Status::Skipped);
    }
    let snaps: Vec<_> = m.files.iter().filter(|f| f.path.starts_with("snapshots/")).collect();
    assert!(snaps.len() > 8);
    for f in snaps {
        let u = column(&m.output_dir.join(&f.path), "u");
        assert!(u.iter().all(|v| *v == 0.0), "{}", f.path);
    }
    let norms = column(&m.output_dir.join("norms.csv"), "norm");
    assert!(norms.iter().all(|v| *v == 0.0));
    let ledger = m.output_dir.join("ledger.csv");
    assert!(column(&ledger, "mass").iter().all(|v| *v == 0.0));
    assert!(column(&ledger, "l2sq").iter().all(|v| *v == 0.0));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_in(a.path(), SMALL_DECAY);
    let mb = run_in(b.path(), SMALL_DECAY);
    assert_eq!(ma.spec_hash, mb.spec_hash);
    assert_eq!(ma.files, mb.files);
    let mut fa = files_under(&ma.output_dir);
    let mut fb = files_under(&mb.output_dir);
    fa.remove(MANIFEST_FILE);
    fb.remove(MANIFEST_FILE);
    assert_eq!(fa, fb);
}

#[test]
fn manifest_lists_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_in(dir.path(), SMALL_DECAY);
    assert!(m.passed(), "{:?}", m.criteria);
    let on_disk = files_under(&m.output_dir);
    assert_eq!(on_disk.len(), m.files.len() + 1);
    for (rel, bytes) in &on_disk {
        if rel == MANIFEST_FILE {
            continue;
        }
        let e = m.file(rel).unwrap_or_else(|| panic!("{rel} missing from the inventory"));
        assert_eq!(e.bytes, bytes.len() as u64);
        assert_eq!(e.sha256, sha256_hex(bytes));
    }
    let back = RunManifest::read(&m.output_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(back, m);
    // the copied spec reproduces the hash
    let copy = load_spec(&m.output_dir.join("spec.toml")).unwrap();
    assert_eq!(copy.hash(), m.spec_hash);
}

#[test]
fn decay_study_plots_one_series_per_p() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_in(dir.path(), SMALL_DECAY);
    let plots: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).filter(|p| p.starts_with("plot/")).collect();
    assert_eq!(plots, ["plot/decay_p1.csv", "plot/decay_p2.csv", "plot/decay_p3.csv"]);
    let t = read_table(&m.output_dir.join("plot/decay_p2.csv")).unwrap();
    assert_eq!(t.header(), ["log_t", "log_norm"]);
    let lt = column(&m.output_dir.join("plot/decay_p2.csv"), "log_t");
    assert!(lt.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn empty_selection_writes_no_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_in(dir.path(), &SMALL_DECAY.replace("p = [1.0, 2.0, 3.0]", "p = []"));
    assert!(m.files.iter().all(|f| !f.path.starts_with("plot/")));
    assert!(!m.output_dir.join("plot").exists());
    assert!(m.notes.iter().any(|n| n.contains("no plot series")));
}

#[test]
fn rescaling_study_plots_one_series_over_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
study = "rescaling"
output_dir = "out"
write_snapshots = false
[grid]
half_width = 100.0
cells = 1000
[solver]
q = 3.0
t_end = 64.0
[analysis]
lambdas = [1.0, 2.0, 4.0, 8.0]
"#;
    let m = run_in(dir.path(), text);
    assert!(m.passed(), "{:?}", m.criteria);
    let plots: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).filter(|p| p.starts_with("plot/")).collect();
    assert_eq!(plots, ["plot/rescaling.csv"]);
    let l = column(&m.output_dir.join("plot/rescaling.csv"), "lambda");
    assert_eq!(l, [1.0, 2.0, 4.0, 8.0]);
    let d = column(&m.output_dir.join("plot/rescaling.csv"), "distance");
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn convergence_study_compares_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
study = "convergence"
output_dir = "out"
write_snapshots = false
[grid]
half_width = 100.0
cells = 1000
[initial]
kind = "gaussian"
mass = 2.0
[solver]
q = 2.0
t_end = 100.0
[analysis]
p = [1.0, 2.0]
times = [10.0, 100.0]
"#;
    let m = run_in(dir.path(), text);
    assert!(m.passed(), "{:?}", m.criteria);
    for name in ["profile_trend_p1", "profile_trend_p2", "closer_than_heat", "closer_than_burgers_half"] {
        assert!(m.criteria.iter().any(|c| c.name == name && c.status == Status::Pass), "{name}");
    }
    assert!(m.file("plot/convergence_limit_p1.csv").is_some());
    assert!(m.file("plot/convergence_heat_p2.csv").is_some());
}

#[test]
fn oracle_study_deviations_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let text = "study = \"oracle\"\noutput_dir = \"out\"\n[kernel]\nfamily = \"box\"\nhalfwidth = 2.0\n[analysis]\ntrials = 5\nsizes = [32, 100, 256]\n";
    let m = run_in(dir.path(), text);
    assert!(m.passed(), "{:?}", m.criteria);
    let p = m.output_dir.join("oracle.csv");
    assert_eq!(column(&p, "n"), [32.0, 100.0, 256.0]);
    assert!(column(&p, "max_relative_deviation").iter().all(|d| *d <= 1e-12));
}

#[test]
fn inequality_study_reports_each_audit() {
    let dir = tempfile::tempdir().unwrap();
    let text = "study = \"inequalities\"\noutput_dir = \"out\"\n[grid]\nhalf_width = 10.0\ncells = 256\n[analysis]\nseed = 11\ntrials = 50\n";
    let m = run_in(dir.path(), text);
    assert!(m.passed(), "{:?}", m.criteria);
    let t = read_table(&m.output_dir.join("inequalities.csv")).unwrap();
    assert_eq!(t.rows().len(), 3);
    let v = column(&m.output_dir.join("inequalities.csv"), "violations");
    assert!(v.iter().all(|x| *x == 0.0));
    assert!(column(&m.output_dir.join("inequalities.csv"), "trials").iter().all(|x| *x == 50.0));
}

#[test]
fn solver_abort_keeps_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,u\n");
    for i in 0..200 {
        let x = -9.95 + 0.1 * i as f64;
        csv += &format!("{x},{}\n", if x.abs() < 1.0 { 1e120 } else { 0.0 });
    }
    fs::write(dir.path().join("init.csv"), csv).unwrap();
    let text = "study = \"decay\"\noutput_dir = \"out\"\n[grid]\nhalf_width = 10.0\ncells = 200\n[initial]\nkind = \"csv\"\npath = \"init.csv\"\n[solver]\nq = 3.0\nt_end = 20.0\n[analysis]\nwindow = [2.0, 20.0]\n";
    let m = run_in(dir.path(), text);
    assert!(!m.passed());
    let c = m.criteria.iter().find(|c| c.name == "solver").unwrap();
    assert_eq!(c.status, Status::Fail);
    assert!(c.detail.contains("non-finite"));
    assert!(m.file("ledger.csv").is_some());
    assert!(m.files.iter().any(|f| f.path.starts_with("snapshots/")));
    assert!(m.output_dir.join(MANIFEST_FILE).exists());
}
