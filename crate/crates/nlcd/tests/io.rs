use nlcd::core::kernel::TabulatedKernel;
use nlcd::core::{Field, Grid, KernelSpec};
use nlcd::io::{fmt_float, read_field_csv, read_kernel_csv, read_table, write_field_csv, write_kernel_csv, Table};
use nlcd::NlcdError;
use proptest::prelude::*;

#[test]
fn field_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::symmetric(7.3, 97).unwrap();
    let f = Field::from_fn(grid, |x| (-x * x).exp() * (1.0 + 0.3 * (5.0 * x).sin()) / 3.0).unwrap();
    let p = dir.path().join("f.csv");
    write_field_csv(&p, &f).unwrap();
    let g = read_field_csv(&p).unwrap();
    assert_eq!(g.values(), f.values());
    assert_eq!(g.grid().len(), f.grid().len());
    assert!((g.grid().dx() - f.grid().dx()).abs() < 1e-12);
    assert!((g.grid().x_min() - f.grid().x_min()).abs() < 1e-12);
}

#[test]
fn kernel_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<(f64, f64)> = (0..=40).map(|i| (0.1 * i as f64, (-0.1 * i as f64).exp())).collect();
    let k = TabulatedKernel::from_samples(&samples).unwrap();
    let p = dir.path().join("k.csv");
    write_kernel_csv(&p, &k).unwrap();
    match read_kernel_csv(&p).unwrap() {
        KernelSpec::Tabulated(back) => {
            assert!((back.dz() - k.dz()).abs() < 1e-15);
            for (a, b) in back.values().iter().zip(k.values()) {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
            }
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "x,u\n0.5,1.0\n1.5,oops\n2.5,0.0\n").unwrap();
    match read_field_csv(&p) {
        Err(NlcdError::Csv { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("oops"));
        }
        other => panic!("expected a csv error, got {other:?}"),
    }
    std::fs::write(&p, "x,u\n0.5,1.0\n1.5,1.0\n2.5,1.0\n3.6,1.0\n4.5,0.0\n").unwrap();
    assert!(matches!(read_field_csv(&p), Err(NlcdError::Csv { line: 5, .. })));
    std::fs::write(&p, "x,v\n0.5,1.0\n1.5,1.0\n").unwrap();
    assert!(matches!(read_field_csv(&p), Err(NlcdError::Csv { line: 1, .. })));
}

#[test]
fn table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new(&["name", "value"]);
    t.push(vec!["a,b".into(), fmt_float(0.1)]);
    t.push(vec!["c".into(), fmt_float(-2.5e-300)]);
    let p = dir.path().join("t.csv");
    std::fs::write(&p, t.to_csv()).unwrap();
    assert_eq!(read_table(&p).unwrap(), t);
}

proptest! {
    #[test]
    fn float_format_round_trips(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let s = fmt_float(v);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        // 17 significant digits
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
        prop_assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }
}
