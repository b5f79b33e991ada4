use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use waci_core::metrics::spearman;

fn waci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn toy_panel() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy_panel.csv")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap()
}

#[test]
fn synth_tables_have_expected_layout_and_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        let out = waci(&[
            "synth",
            "--n-runs",
            "2",
            "--length",
            "1500",
            "--warmup",
            "300",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let t = read_csv(&a.path().join("table1.csv"));
    assert_eq!(
        t[0],
        [
            "method",
            "coverage",
            "coverage_std",
            "mean_length",
            "mean_length_std",
            "winkler",
            "winkler_std",
            "pearson",
            "pearson_std",
            "ils_0.10",
            "ils_0.10_std",
            "mcd_5",
            "mcd_5_std"
        ]
    );
    let labels: Vec<&str> = t[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["Initial", "ACI", "WACI"]);
    assert_eq!(t[1][column(&t, "ils_0.10")], "--");
    for f in [
        "table1.csv",
        "table2.csv",
        "table3.csv",
        "traces/run_000.csv",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn paper_style_and_json_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let out = waci(&[
        "synth",
        "--n-runs",
        "2",
        "--length",
        "1200",
        "--warmup",
        "300",
        "--trace-runs",
        "0",
        "--paper-style",
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = std::fs::read_to_string(dir.path().join("table3.csv")).unwrap();
    assert!(
        t.lines().next().unwrap() == "method,coverage,mean_length,winkler,pearson,ils_0.10,mcd_5"
    );
    assert!(t.lines().nth(1).unwrap().contains(" ("));
    let js = std::fs::read_to_string(dir.path().join("table3.json")).unwrap();
    assert!(js.trim_start().starts_with('[') && js.contains("\"method\""));
    assert!(!dir.path().join("traces").exists());
}

#[test]
fn epf_on_toy_panel_emits_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = waci(&[
        "epf",
        "--input",
        toy_panel().to_str().unwrap(),
        "--alpha",
        "0.2",
        "--bootstrap-samples",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = read_csv(&dir.path().join("epf_alpha_0.20.csv"));
    assert_eq!(t.len(), 10);
    let ils = column(&t, "ils_0.10");
    for row in &t[1..] {
        let conformalized = row[0].contains('(');
        assert_eq!(row[ils] == "--", !conformalized, "{row:?}");
        for (i, cell) in row.iter().enumerate().skip(1) {
            if cell != "--" {
                assert!(
                    cell.parse::<f64>().unwrap().is_finite(),
                    "column {i} of {row:?}"
                );
            }
        }
    }
    assert!(dir.path().join("traces/hqr_waci_alpha_0.20.csv").is_file());
}

#[test]
fn short_panel_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    let text = std::fs::read_to_string(toy_panel()).unwrap();
    std::fs::write(
        &short,
        text.lines().take(200).collect::<Vec<_>>().join("\n"),
    )
    .unwrap();
    let out = waci(&[
        "epf",
        "--input",
        short.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("rows required, 199 available"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "timestamp,y,f1\n2024-01-01T00:00:00,1,2\n2024-01-01T01:00:00,x,2\n",
    )
    .unwrap();
    let out = waci(&[
        "coef-trace",
        "--input",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(waci(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(waci(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = waci(&[
        "coef-trace",
        "--input",
        toy_panel().to_str().unwrap(),
        "--model",
        "QRA",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = waci(&[
        "synth",
        "--alpha",
        "1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(waci(&["--help"]).status.success());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "n_runs = 1\nlength = 1200\nwarmup = 300\ntrace_runs = 0\nseed = 3\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = waci(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--n-runs",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    // two runs, so standard deviations are reported
    let t = read_csv(&out_dir.join("table3.csv"));
    assert!(t[0].contains(&"coverage_std".to_string()));

    std::fs::write(&cfg, "n_runs = 1\nunknown_key = 2\n").unwrap();
    let out = waci(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn coef_trace_rows_per_window_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = waci(&[
        "coef-trace",
        "--input",
        toy_panel().to_str().unwrap(),
        "--window-days",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = read_csv(&dir.path().join("coef_trace.csv"));
    assert_eq!(t[0], ["date", "alpha", "lower", "upper", "degenerate"]);
    let body = &t[1..];
    assert_eq!(body.len() % 2, 0);
    assert_eq!(body[0][0], body[1][0]);
    assert_eq!((body[0][1].as_str(), body[1][1].as_str()), ("0.2", "0.1"));
}

#[test]
fn sigma_sweep_cardinality_and_aci_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = waci(&[
        "sigma-sweep",
        "--input",
        toy_panel().to_str().unwrap(),
        "--sigma-min",
        "0.1",
        "--sigma-max",
        "1.0",
        "--sigma-step",
        "0.1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = read_csv(&dir.path().join("sigma_sweep.csv"));
    assert_eq!(
        t[0],
        ["sigma", "coverage", "mean_length", "ils", "mcd", "pearson"]
    );
    assert_eq!(t.len(), 12);
    assert_eq!(t[11][0], "inf");
}

fn synthetic_sweep(dir: &Path, min: &str, max: &str, step: &str) -> Vec<Vec<f64>> {
    let out = waci(&[
        "sigma-sweep",
        "--synthetic",
        "--length",
        "4000",
        "--sigma-min",
        min,
        "--sigma-max",
        max,
        "--sigma-step",
        step,
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    read_csv(&dir.join("sigma_sweep.csv"))[1..]
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| {
                    if c == "inf" {
                        f64::INFINITY
                    } else {
                        c.parse().unwrap()
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn synthetic_sweep_pearson_rises_with_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let rows = synthetic_sweep(dir.path(), "1", "200", "10");
    let finite: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0].is_finite()).collect();
    let sigma: Vec<f64> = finite.iter().map(|r| r[0]).collect();
    let pearson: Vec<f64> = finite.iter().map(|r| r[5]).collect();
    let rho = spearman(&sigma, &pearson).value;
    assert!(rho > 0.6, "{rho}");
}

#[test]
fn huge_sigma_converges_to_aci() {
    let dir = tempfile::tempdir().unwrap();
    let rows = synthetic_sweep(dir.path(), "1000000", "1000000", "1");
    assert_eq!(rows.len(), 2);
    for (k, (waci, aci)) in rows[0].iter().zip(&rows[1]).enumerate().skip(1) {
        assert!((waci - aci).abs() < 1e-3, "column {k}: {waci} vs {aci}");
    }
}
