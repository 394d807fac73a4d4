use qgeo::algebra::matrix_to_elem;
use qgeo::cli::{main_with, parse_csv, run, series_to_csv, RunConfig, Summary};
use qgeo::flows::{integrate, oracles, GeodesicFlow, StepConfig};
use qgeo::linalg;
use qgeo::models::{build_m2, m2_model_spec, m2_real_field};
use qgeo::{C64, I};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["qgeo"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn cfg(scenario: &str) -> RunConfig {
    RunConfig {
        scenario: Some(scenario.into()),
        ..Default::default()
    }
}

#[test]
fn runs_are_byte_identical() {
    let args = [
        "run", "fuzzy-n2", "--seed", "11", "--tmax", "0.5", "--dt", "0.01", "--csv", "-",
    ];
    let (c1, a, _) = call(&args);
    let (c2, b, _) = call(&args);
    assert_eq!((c1, c2), (0, 0));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn csv_round_trips_exactly() {
    let model = build_m2(I).unwrap();
    let (xs, _) = oracles::m2_shm(1.0, 0.0, 1.0, 1.0, 0.0);
    let flow = GeodesicFlow::new(&model);
    let y0 = flow.initial(&m2_real_field(&xs), &matrix_to_elem(&linalg::identity(2)));
    let out = integrate(&flow, y0, StepConfig::new(0.01, 0.3)).unwrap();
    let s = &out.series;
    let (header, rows) = parse_csv(&series_to_csv(s)).unwrap();
    assert_eq!(
        header.len(),
        1 + 2 * (s.columns.len() + s.monitor_names.len())
    );
    assert_eq!(header[0], "t");
    assert_eq!(rows.len(), s.t.len());
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], s.t[k]);
        for (j, z) in s.states[k].iter().enumerate() {
            assert_eq!(row[1 + 2 * j], z.re);
            assert_eq!(row[2 + 2 * j], z.im);
        }
        let off = 1 + 2 * s.columns.len();
        for (j, m) in s.monitors[k].iter().enumerate() {
            assert_eq!(row[off + 2 * j], *m);
            assert_eq!(row[off + 2 * j + 1], 0.0);
        }
    }
}

#[test]
fn summary_reports_drift_and_oracle() {
    let r = run(&RunConfig {
        t_max: Some(1.0),
        ..cfg("m2-geodesic")
    })
    .unwrap();
    let s = &r.summary;
    assert_eq!(r.exit_code, 0);
    assert!(s.pass);
    assert_eq!(s.scenario, "m2-geodesic");
    assert_eq!(s.steps, 1000);
    assert!((s.t_end - 1.0).abs() < 1e-12);
    assert!(s.oracle_max_deviation.unwrap() < 1e-8);
    assert!(s.monitor_max_drift.contains_key("sum_abs2"));
    assert!(s.aborted.is_none());
    let js = serde_json::to_string(s).unwrap();
    let back: Summary = serde_json::from_str(&js).unwrap();
    assert_eq!(&back, s);
}

#[test]
fn summary_is_written_to_file_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let (code, out, _) = call(&[
        "run",
        "fuzzy-const",
        "--tmax",
        "0.5",
        "--summary",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let from_file: Summary =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let from_out: Summary = serde_json::from_str(&out).unwrap();
    assert_eq!(from_file, from_out);
    assert!(from_file.oracle_max_deviation.unwrap() < 1e-8);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"scenario": "m2-geodesic", "dt": 0.01, "t_max": 0.2, "alpha": 2.0}"#,
    )
    .unwrap();
    let (code, out, _) = call(&["run", "--config", path.to_str().unwrap(), "--tmax", "0.1"]);
    assert_eq!(code, 0);
    let s: Summary = serde_json::from_str(&out).unwrap();
    assert_eq!(s.scenario, "m2-geodesic");
    assert_eq!(s.dt, 0.01);
    assert!((s.t_end - 0.1).abs() < 1e-12);
    assert_eq!(s.steps, 10);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"scenario": "m2-geodesic", "bogus": 1}"#).unwrap();
    let (code, _, err) = call(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!err.is_empty());
}

#[test]
fn custom_model_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let spec = m2_model_spec(I, [1.0, 0.0, 1.0, 1.0]).unwrap();
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let csv = dir.path().join("custom.csv");
    let (code, _, err) = call(&[
        "run",
        "custom-json",
        "--model",
        path.to_str().unwrap(),
        "--tmax",
        "0.5",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (_, rows) = parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    let last = rows.last().unwrap();
    assert!((last[0] - 0.5).abs() < 1e-12);
    // the state columns hold X then e; X against the closed form
    let (xs, _) = oracles::m2_shm(1.0, 0.0, 1.0, 1.0, 0.5);
    let want: Vec<C64> = xs.transpose().iter().copied().collect();
    for (j, w) in want.iter().enumerate() {
        assert!((last[1 + 2 * j] - w.re).abs() < 1e-9);
        assert!((last[2 + 2 * j] - w.im).abs() < 1e-9);
    }
}

#[test]
fn figure_presets_resolve() {
    for (alias, base) in [
        ("figure1", "m2-geodesic"),
        ("figure2", "fuzzy-const"),
        ("figure3", "fuzzy-n2"),
    ] {
        let a = run(&RunConfig {
            t_max: Some(0.2),
            ..cfg(alias)
        })
        .unwrap();
        let b = run(&RunConfig {
            t_max: Some(0.2),
            ..cfg(base)
        })
        .unwrap();
        assert_eq!(a.exit_code, 0, "{alias}");
        assert_eq!(a.csv, b.csv, "{alias}");
    }
}

#[test]
fn blowup_exits_numerical() {
    let (code, out, _) = call(&[
        "run",
        "m2-geodesic",
        "--alpha",
        "1e100",
        "--dt",
        "0.1",
        "--tmax",
        "5",
    ]);
    assert_eq!(code, 3);
    let s: Summary = serde_json::from_str(&out).unwrap();
    assert!(!s.pass);
    assert!(s.aborted.is_some());
    assert!(s.t_end < 5.0);
}

#[test]
fn bad_inputs_are_usage_errors() {
    assert_eq!(call(&["run", "m2-geodesic", "--dt", "-1"]).0, 2);
    assert_eq!(call(&["run", "m2-geodesic", "--dt", "0"]).0, 2);
    assert_eq!(call(&["run", "m2-geodesic", "--rho", "2"]).0, 2);
    assert_eq!(call(&["run", "fuzzy-n2", "--metric", "1,-1"]).0, 2);
    assert_eq!(call(&["run", "custom-json"]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["--help"]).0, 0);
}

#[test]
fn tight_tolerance_fails_run() {
    let (code, out, _) = call(&[
        "run",
        "m2-geodesic",
        "--tmax",
        "0.5",
        "--tol",
        "oracle=1e-30",
    ]);
    assert_eq!(code, 1);
    let s: Summary = serde_json::from_str(&out).unwrap();
    assert!(!s.pass);
    assert_eq!(s.oracle_bound, 1e-30);
}

#[test]
fn check_suites_pass() {
    for suite in ["algebra", "geometry", "oracle", "all"] {
        let (code, out, err) = call(&["check", suite, "--points", "20", "--samples", "10"]);
        assert_eq!(code, 0, "{suite}: {err}");
        assert!(!out.is_empty());
    }
}

#[test]
fn oracle_command_reports_and_gates() {
    let (code, out, _) = call(&[
        "oracle",
        "--manifold",
        "flat3",
        "--field",
        "linear",
        "--identity",
        "speed",
        "--points",
        "10",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("max residual"));
    let (code, _, _) = call(&[
        "oracle",
        "--identity",
        "div",
        "--points",
        "10",
        "--h",
        "0.1",
        "--no-richardson",
        "--tol",
        "1e-12",
    ]);
    assert_eq!(code, 1);
}
