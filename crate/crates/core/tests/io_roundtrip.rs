mod common;

use std::fs;

use common::*;
use ctrlscore::gramian::node_gramians;
use ctrlscore::io::{
    laplacian_dynamics, load_connectivity, load_task_spec, parse_connectivity, ConnectivityMatrix, CovarianceSpec,
    IndexBase, LaplacianConvention, MatrixFormat, TaskFile,
};
use ctrlscore::report::{
    fmt_f64, read_score_report_json, read_scores_csv, render_report, write_report, Report, ReportFormat, ScoreTable,
};
use ctrlscore::solver::{solve, SolverOptions};
use ctrlscore::task::TaskMode;
use ctrlscore::ErrorCategory;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_connectivity(seed: u64, n: usize, density: f64) -> ConnectivityMatrix {
    let mut r = rng(seed);
    let c = DMatrix::from_fn(n, n, |i, j| {
        if i != j && r.random::<f64>() < density {
            r.random_range(0.0..3.0)
        } else {
            0.0
        }
    });
    ConnectivityMatrix::new(c, None).unwrap()
}

#[test]
fn score_report_json_round_trips_exactly() {
    let mut r = rng(80);
    let a = random_dynamics(&mut r, 5, 1.0);
    let gs = node_gramians(&a, 1.0).unwrap();
    let m = random_pd_weight(&mut r, 5, 0.1);
    let opts = SolverOptions {
        trace: true,
        ..SolverOptions::default()
    };
    let report = solve(&gs, &m, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/report.json");
    write_report(
        &Report::Score {
            report: &report,
            labels: None,
        },
        &path,
        ReportFormat::Json,
    )
    .unwrap();
    let back = read_score_report_json(&path).unwrap();
    assert_eq!(back, report);
    for (x, y) in back.score.as_slice().iter().zip(report.score.as_slice()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn score_csv_round_trips_exactly() {
    let mut r = rng(81);
    let a = random_dynamics(&mut r, 6, 1.0);
    let gs = node_gramians(&a, 1.0).unwrap();
    let report = solve(&gs, &random_pd_weight(&mut r, 6, 0.1), &SolverOptions::default()).unwrap();
    let labels: Vec<String> = (0..6).map(|i| format!("roi, {i}")).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    write_report(
        &Report::Score {
            report: &report,
            labels: Some(&labels),
        },
        &path,
        ReportFormat::Csv,
    )
    .unwrap();
    let back = read_scores_csv(&path).unwrap();
    assert_eq!(back.labels, labels);
    assert_eq!(back.scores, report.score.as_slice());
}

#[test]
fn rendering_is_deterministic() {
    let mut r = rng(82);
    let a = random_dynamics(&mut r, 4, 1.0);
    let gs = node_gramians(&a, 1.0).unwrap();
    let report = solve(&gs, &random_pd_weight(&mut r, 4, 0.1), &SolverOptions::default()).unwrap();
    for fmt in [ReportFormat::Json, ReportFormat::Csv] {
        let rep = Report::Score {
            report: &report,
            labels: None,
        };
        assert_eq!(render_report(&rep, fmt).unwrap(), render_report(&rep, fmt).unwrap());
    }
}

#[test]
fn task_file_round_trips_through_json() {
    let file = TaskFile {
        n: 90,
        horizon: 100.0,
        mode: "deterministic_target".into(),
        index_base: Some(IndexBase::One),
        mu0_indices: Some(vec![23, 24, 35, 36, 65, 66]),
        mu0_value: None,
        xt_indices: Some(vec![22, 41, 42, 79, 80]),
        xt_value: Some(1.0),
        sigma0: Some(CovarianceSpec::Isotropic { scale: 0.01 }),
        scale: None,
        mu0_path: None,
        sigma0_path: None,
        mut_path: None,
        sigmat_path: None,
        cross_cov_path: None,
        m_path: None,
    };
    let json = serde_json::to_string_pretty(&file).unwrap();
    assert!(json.contains("\"T\""));
    assert!(json.contains("\"xT_indices\""));
    let back = TaskFile::parse(&json).unwrap();
    assert_eq!(back, file);
    let spec = back.resolve(std::path::Path::new(".")).unwrap();
    match spec.mode() {
        TaskMode::DeterministicTarget { mu0, x_t, sigma0 } => {
            assert_eq!(mu0.sum(), 6.0);
            assert_eq!(mu0[22], 1.0);
            assert_eq!(x_t[21], 1.0);
            assert_eq!(x_t[79], 1.0);
            assert_eq!(sigma0[(5, 5)], 0.01);
        }
        other => panic!("unexpected mode {other:?}"),
    }
}

#[test]
fn task_file_loads_dense_paths_relative_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.csv"), "2,1\n1,3\n").unwrap();
    fs::write(
        dir.path().join("task.json"),
        r#"{"n": 2, "T": 1.5, "mode": "explicit_M", "M_path": "m.csv"}"#,
    )
    .unwrap();
    let spec = load_task_spec(&dir.path().join("task.json")).unwrap();
    assert_eq!(spec.horizon(), 1.5);
    match spec.mode() {
        TaskMode::ExplicitM { m } => assert_eq!(m, &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])),
        other => panic!("unexpected mode {other:?}"),
    }
}

#[test]
fn task_file_errors_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"n": 2, "T": 1, "mode": "isotropic"}"#,
        r#"{"n": 2, "T": 1, "mode": "isotropic", "scale": 1, "M_path": "x"}"#,
        r#"{"n": 2, "T": 1, "mode": "unknown"}"#,
        r#"{"n": 2, "T": 1, "mode": "isotropic", "scale": 1, "bogus": 3}"#,
        r#"{"n": 2, "T": 0, "mode": "isotropic", "scale": 1}"#,
        r#"{"n": 2, "T": 1, "mode": "deterministic_target", "mu0_indices": [3], "xT_indices": [1], "sigma0": {"type": "isotropic", "scale": 1}}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = dir.path().join(format!("t{i}.json"));
        fs::write(&path, text).unwrap();
        let err = load_task_spec(&path).unwrap_err();
        assert_eq!(err.category(), ErrorCategory::Schema, "case {i}: {err}");
    }
    let missing = load_task_spec(&dir.path().join("absent.json")).unwrap_err();
    assert_eq!(missing.category(), ErrorCategory::Io);
}

#[test]
fn connectivity_loads_from_disk_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    let tsv = dir.path().join("c.tsv");
    fs::write(&csv, "a,b,c\n0,1,2\n1,0,0.5\n2,0.5,0\n").unwrap();
    fs::write(&tsv, "0\t1\t2\n1\t0\t0.5\n2\t0.5\t0\n").unwrap();
    let c1 = load_connectivity(&csv, MatrixFormat::from_path(&csv)).unwrap();
    let c2 = load_connectivity(&tsv, MatrixFormat::from_path(&tsv)).unwrap();
    assert_eq!(c1.entries(), c2.entries());
    assert_eq!(c1.labels().unwrap(), ["a", "b", "c"]);
    assert!(c2.labels().is_none());
}

#[test]
fn malformed_connectivity_is_a_parse_error() {
    for text in ["0,1\n1\n", "0,x\n1,0\n", "0,-1\n1,0\n", "0,1,2\n1,0,2\n"] {
        let err = parse_connectivity(text, MatrixFormat::CsvDense, "mem").unwrap_err();
        assert!(
            matches!(err.category(), ErrorCategory::Io | ErrorCategory::Schema),
            "{text:?}: {err}"
        );
    }
}

#[test]
fn score_table_round_trips() {
    let table = ScoreTable {
        subjects: vec!["s01".into(), "s02".into()],
        nodes: vec!["1".into(), "2".into(), "3".into()],
        values: vec![vec![0.1, 0.2, 0.7], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
    };
    let back = ScoreTable::parse(&table.to_csv(), "mem").unwrap();
    assert_eq!(back, table);
}

proptest! {
    #[test]
    fn fmt_f64_parses_back_to_same_bits(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let s = fmt_f64(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn negative_laplacian_has_zero_row_sums_and_stable_spectrum(seed in 0u64..10_000, n in 2usize..12, density in 0.1f64..1.0) {
        let c = random_connectivity(seed, n, density);
        for conv in [LaplacianConvention::Out, LaplacianConvention::In] {
            let a = laplacian_dynamics(&c, conv);
            let row_sums = a.entries() * DVector::from_element(n, 1.0);
            prop_assert!(row_sums.amax() <= 1e-12 * c.entries().amax().max(1.0) * n as f64);
            for z in a.entries().complex_eigenvalues().iter() {
                prop_assert!(z.re <= 1e-9 * c.entries().amax().max(1.0) * n as f64);
            }
        }
    }
}
