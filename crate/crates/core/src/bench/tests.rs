use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_6};

use super::*;
use crate::greedy::greedy_rank_r;
use crate::tensor::write_dt1;
use crate::testutil::rank_one_tensor;

#[test]
fn gaussian_is_seeded() {
    let a = gen_gaussian(&[4, 5, 6], 1).unwrap();
    assert_eq!(a, gen_gaussian(&[4, 5, 6], 1).unwrap());
    assert_ne!(a, gen_gaussian(&[4, 5, 6], 2).unwrap());
}

#[test]
fn gaussian_moments() {
    let a = gen_gaussian(&[100, 100, 100], 3).unwrap();
    let n = a.len() as f64;
    let mean = a.data().iter().sum::<f64>() / n;
    let var = a
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    assert!(mean.abs() < 4.0 / n.sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 0.01, "{var}");
}

#[test]
fn gaussian_norm_concentrates() {
    for seed in 0..5 {
        let s = gen_gaussian(&[10, 10, 10], seed)
            .unwrap()
            .frobenius_norm()
            .powi(2);
        assert!((s - 1000.0).abs() <= 4.0 * 2000f64.sqrt(), "{s}");
    }
}

#[test]
fn exp_entries() {
    let a = gen_exp(&[3, 4, 2]).unwrap();
    assert!((a.get(&[0, 0, 0]) - 2.0 / E).abs() < 1e-15);
    let expected = (-2f64).exp() - 2.0 * (-3f64).exp() + 3.0 * (-1f64).exp();
    assert!((a.get(&[1, 2, 0]) - expected).abs() < 1e-15);
}

#[test]
fn arcsin_entries() {
    let a = gen_arcsin(&[5; 4]).unwrap();
    // i₂ = 1 < 2
    assert_eq!(a.get(&[3, 0, 4, 4]), 0.0);
    assert_eq!(a.get(&[0, 1, 1, 4]), 0.0);
    // iⱼ = j: the signs alternate and cancel
    assert!(a.get(&[0, 1, 2, 3]).abs() < 1e-15);
    let expected = FRAC_PI_6 + FRAC_PI_2 - FRAC_PI_2 + FRAC_PI_2;
    assert!((a.get(&[1, 1, 2, 3]) - expected).abs() < 1e-15);
    let full = gen_arcsin(&[20; 4]).unwrap();
    assert!(full.data().iter().all(|v| v.is_finite()));
}

#[test]
fn arcsin_exponent_grouping_vanishes_in_even_order() {
    let a = gen_arcsin_with(&[8; 4], ArcsinGrouping::SignOfProduct).unwrap();
    assert!(a.data().iter().all(|v| v.abs() < 1e-15));
    let b = gen_arcsin_with(&[6; 3], ArcsinGrouping::SignOfProduct).unwrap();
    assert!((b.get(&[0, 1, 2]) + FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn tan_entries() {
    let a = gen_tan(&[3; 5]).unwrap();
    assert!((a.get(&[0; 5]) - (47.0f64 / 60.0).tan()).abs() < 1e-15);
    let expected = (3.0f64 - 1.0 / 2.0 + 2.0 / 3.0 - 1.0 / 4.0 + 1.0 / 5.0).tan();
    assert!((a.get(&[2, 0, 1, 0, 0]) - expected).abs() < 1e-14);
}

#[test]
fn generator_names() {
    for name in ["gaussian", "exp", "arcsin", "tan"] {
        assert_eq!(name.parse::<Generator>().unwrap().name(), name);
    }
    assert_eq!(
        "file:/tmp/x.dt1".parse::<Generator>().unwrap(),
        Generator::File("/tmp/x.dt1".into())
    );
    assert!("sin".parse::<Generator>().is_err());
    assert_eq!(Generator::Arcsin.default_dims(), Some(vec![20; 4]));
}

#[test]
fn file_generator_checks_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.dt1");
    let (a, _) = rank_one_tensor(2.0, &[3, 4, 2], 4);
    write_dt1(&path, &a).unwrap();
    let g = Generator::File(path);
    assert_eq!(g.generate(&[], 0).unwrap(), a);
    assert_eq!(g.generate(&[3, 4, 2], 0).unwrap(), a);
    assert!(matches!(
        g.generate(&[3, 4], 0),
        Err(Error::ShapeMismatch(_))
    ));
}

fn small_spec(seeds: usize) -> ExperimentSpec {
    ExperimentSpec {
        dims: vec![8, 7, 6],
        seeds,
        algorithms: vec![Algorithm::Hoscf, Algorithm::Hopm],
        ..ExperimentSpec::new(Generator::Exp)
    }
}

fn csv_of(rows: &[ExperimentRow]) -> String {
    let mut buf = Vec::new();
    write_experiment_csv(&mut buf, rows).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn deterministic_csv_is_byte_identical() {
    let spec = small_spec(4);
    let first = csv_of(&run_experiment(&spec).unwrap());
    let second = csv_of(&run_experiment(&spec).unwrap());
    assert_eq!(first, second);
    let parallel = csv_of(&run_experiment(&ExperimentSpec { jobs: 3, ..spec }).unwrap());
    assert_eq!(first, parallel);
    let mut lines = first.lines();
    assert_eq!(lines.next().unwrap(), EXPERIMENT_HEADER.join(","));
    let row = lines.next().unwrap();
    assert!(row.starts_with("exp,8x7x6,hoscf,0,"), "{row}");
    assert!(row.ends_with("true,,,"), "{row}");
    assert_eq!(first.lines().count(), 9);
}

#[test]
fn timings_present_without_determinism() {
    let mut spec = small_spec(1);
    spec.opts.determinism = false;
    let rows = run_experiment(&spec).unwrap();
    for r in &rows {
        assert!(r.wall_s.unwrap() > 0.0);
        assert!(r.phase_j_s.is_some() && r.phase_eig_s.is_some());
    }
    let text = csv_of(&rows);
    assert!(!text.lines().nth(1).unwrap().ends_with(",,"));
}

#[test]
fn single_seed_has_zero_spread() {
    let rows = run_experiment(&small_spec(1)).unwrap();
    for s in summarize(&rows) {
        assert_eq!(s.runs, 1);
        assert_eq!((s.lambda.1, s.rho.1, s.iters.1), (0.0, 0.0, 0.0));
        assert!(s.wall_s.is_none());
    }
}

#[test]
fn rank_one_file_has_unit_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r1.dt1");
    let (a, _) = rank_one_tensor(5.0, &[4, 3, 5], 5);
    write_dt1(&path, &a).unwrap();
    let spec = ExperimentSpec {
        seeds: 3,
        algorithms: Algorithm::ALL.to_vec(),
        ..ExperimentSpec::new(Generator::File(path))
    };
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 18);
    for r in rows {
        assert!((r.rho - 1.0).abs() < 1e-12, "{:?}", r);
        assert_eq!(r.generator, "file");
    }
}

#[test]
fn experiment_rejects_empty_specs() {
    let spec = ExperimentSpec {
        seeds: 0,
        ..small_spec(1)
    };
    assert!(run_experiment(&spec).is_err());
    let spec = ExperimentSpec {
        algorithms: vec![],
        ..small_spec(1)
    };
    assert!(run_experiment(&spec).is_err());
}

#[test]
fn statistics() {
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
}

#[test]
fn seconds_have_three_significant_digits() {
    assert_eq!(format_seconds(0.00123456), "0.00123");
    assert_eq!(format_seconds(12.345), "12.3");
    assert_eq!(format_seconds(0.5), "0.500");
    assert_eq!(format_seconds(1234.7), "1235");
    assert_eq!(format_seconds(0.0), "0");
}

#[test]
fn summary_rows() {
    let rows = run_experiment(&small_spec(3)).unwrap();
    let summary = summarize(&rows);
    assert_eq!(
        summary.iter().map(|s| s.algo).collect::<Vec<_>>(),
        vec![Algorithm::Hoscf, Algorithm::Hopm]
    );
    for s in &summary {
        assert_eq!((s.runs, s.converged), (3, 3));
        assert!(s.rho.0 > 0.0 && s.rho.0 <= 1.0);
    }
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &summary).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn scaling_agrees_with_serial() {
    let spec = ScalingSpec {
        generator: Generator::Gaussian,
        dims: vec![8; 5],
        threads: vec![1, 2, 3],
        opts: SolveOptions {
            max_iters: 4,
            ..Default::default()
        },
    };
    let rows = run_scaling(&spec).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.threads).collect::<Vec<_>>(),
        vec![1, 2, 3]
    );
    for r in &rows {
        assert!(r.lambda_diff <= 1e-9);
        assert!(r.j_max_diff <= 1e-9);
        assert!(r.j_fraction > 0.0 && r.j_fraction <= 1.0);
        assert_eq!(r.iterations, rows[0].iterations);
    }
    let mut buf = Vec::new();
    write_scaling_csv(&mut buf, &rows).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap().lines().next().unwrap(),
        SCALING_HEADER.join(",")
    );
    assert!(run_scaling(&ScalingSpec {
        threads: vec![],
        ..spec
    })
    .is_err());
}

#[test]
fn greedy_csv() {
    let a = gen_gaussian(&[5, 5, 5], 6).unwrap();
    let g = greedy_rank_r(&a, 3, Algorithm::Hoscf, &SolveOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_greedy_csv(&mut buf, &g).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], GREEDY_HEADER.join(","));
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("3,"));
}
