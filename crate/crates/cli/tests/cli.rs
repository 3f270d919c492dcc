use std::process::{Command, Output};

use indc_imex::harness::CSV_COLUMNS;
use indc_imex::tableau::parse_tableau;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indc-imex")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("indc-imex-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn assemble_prints_a_parsable_tableau() {
    let o = cli(&["tableau", "assemble", "--base", "imex1-ars", "--nodes", "2", "--corrections", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# implicit_invertible true"));
    let t = parse_tableau(&text).unwrap();
    assert_eq!(t.stages(), 5);
    assert_eq!(t.implicit.a[3], vec![0.0, 0.25, -0.25, 0.5, 0.0]);
}

#[test]
fn assemble_reports_singular_non_gsa_case() {
    let o = cli(&[
        "tableau", "assemble", "--base", "imex1-ngsa", "--nodes", "2", "--corrections", "1", "--format", "decimal",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("# implicit_invertible false"));
}

#[test]
fn tableau_list_and_show() {
    let o = cli(&["tableau", "list"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = cli(&["tableau", "show", "IMEX3-ARS"]);
    assert!(o.status.success());
    assert_eq!(parse_tableau(&stdout(&o)).unwrap().name, "IMEX3-ARS");
}

#[test]
fn quadrature_prints_exact_matrices() {
    let o = cli(&["quadrature", "--nodes", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "S_sub\n3/2 -1/2\n1/2 1/2\nS_cum\n3/4 -1/4\n1 0\n");
}

#[test]
fn run_reports_error_and_work() {
    let o = cli(&[
        "run", "--problem", "vdp", "--eps", "1e-6", "--scheme", "imex1-ars", "--nodes", "3", "--corrections", "2",
        "--dt", "0.05", "--tfinal", "0.5",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("scheme InDC-IMEX1-GSA-ARS-3-2"));
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("error "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err > 0.0 && err < 1e-3);
}

#[test]
fn study_from_config_writes_csv_and_json() {
    let dir = temp_dir("config");
    let config = dir.join("study.json");
    std::fs::write(
        &config,
        r#"{"name": "c", "problem": {"kind": "vdp"},
            "scheme": {"base": "IMEX1-GSA-ARS", "nodes": 2, "corrections": 1},
            "dts": [0.1, 0.05, 0.025], "eps": [1.0, 0.01, 1e-6], "t_final": 0.2,
            "norm": null, "reference": "auto", "component": null}"#,
    )
    .unwrap();
    let csv = dir.join("out.csv");
    let o = cli(&["study", "--config", config.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 9);

    let o = cli(&["study", "--config", config.to_str().unwrap(), "--format", "json", "--eps", "0.5"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["cells"].as_array().unwrap().len(), 3);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn failed_cells_exit_with_code_two() {
    let o = cli(&[
        "run", "--problem", "nonlinear_relaxation", "--eps", "1", "--scheme", "imex2-ars", "--nodes", "2",
        "--corrections", "1", "--dt", "0.0125", "--tfinal", "0.1", "--cells", "50",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("failure"));
}

#[test]
fn bad_arguments_fail() {
    assert_eq!(cli(&["study", "--preset", "fig9"]).status.code(), Some(1));
    let o = cli(&[
        "run", "--problem", "vdp", "--eps", "1", "--scheme", "nope", "--dt", "0.1", "--tfinal", "0.2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!cli(&["study"]).status.success());
}
