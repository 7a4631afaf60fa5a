use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dssa_cli::RunReport;

fn circuit(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../circuits")
        .join(name)
}

fn dssa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dssa"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn quick_run(dir: &Path, seed: &str) -> Output {
    dssa(&[
        "run",
        circuit("one_pole.net").to_str().unwrap(),
        "--seed",
        seed,
        "--iters",
        "60",
        "--train",
        "20",
        "--test",
        "10",
        "-o",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn exact_reports_term_counts() {
    let o = dssa(&["exact", circuit("nmam.net").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("terms: numerator 5, denominator 35, total 40"),
        "{text}"
    );
    assert!(
        text.contains("nodes 4, parameters 11, exact terms 40"),
        "{text}"
    );

    let o = dssa(&["exact", circuit("one_pole.net").to_str().unwrap()]);
    assert!(stdout(&o).contains("total 3"));
}

#[test]
fn exact_refuses_large_circuits() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = String::from("G gm1 1 0 in 0 1m\n");
    for i in 1..=13 {
        net.push_str(&format!("R r{i} {i} {} 1k\nC c{i} {i} 0 1p\n", i + 1));
    }
    net.push_str(".input in\n.output 14\n");
    let path = dir.path().join("big.net");
    fs::write(&path, net).unwrap();
    let o = dssa(&["exact", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("oracle not applicable"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_netlist_is_an_error() {
    let o = dssa(&["run", "/nonexistent/circuit.net"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("reading netlist"), "{}", stderr(&o));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = quick_run(dir.path(), "4");
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", stderr(&o));
    assert!(stdout(&o).contains("H(s) = "));

    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(report.config.seed, 4);
    assert_eq!(report.config.ga.iterations, 60);
    assert_eq!((report.config.train, report.config.test), (20, 10));
    assert_eq!(report.circuit.parameters, vec!["gm1", "g_r1", "c1"]);
    assert_eq!(code == 0, report.train_feasible);

    let errors = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let mut lines = errors.lines();
    assert_eq!(
        lines.next(),
        Some("point,dc_error_db,max_root_error_pct,feasible")
    );
    assert_eq!(lines.count(), 10);

    let response = fs::read_to_string(dir.path().join("response.csv")).unwrap();
    assert!(response.starts_with(
        "freq_hz,exact_mag_db,exact_phase_deg,simplified_mag_db,simplified_phase_deg\n"
    ));
    assert_eq!(response.lines().count(), 1 + 7);
}

#[test]
fn identical_seeds_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    quick_run(dir.path(), "9");
    let first = fs::read_to_string(dir.path().join("result.json")).unwrap();
    quick_run(dir.path(), "9");
    let second = fs::read_to_string(dir.path().join("result.json")).unwrap();
    assert!(
        first == second,
        "result.json differs between identical runs"
    );
}

#[test]
fn eval_reproduces_own_test_metrics() {
    let dir = tempfile::tempdir().unwrap();
    quick_run(dir.path(), "7");
    let result = dir.path().join("result.json");
    let report: RunReport = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    let o = dssa(&[
        "eval",
        circuit("one_pole.net").to_str().unwrap(),
        result.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let t = &report.test;
    let want = format!(
        "dc-gain error    avg {:.4} dB, max {:.4} dB",
        t.avg_dc_error_db, t.max_dc_error_db
    );
    assert!(text.contains(&want), "{text}\nwanted {want}");
    let want = format!(
        "pole/zero error  avg {:.3} %, max {:.3} %",
        t.avg_root_error_pct, t.max_root_error_pct
    );
    assert!(text.contains(&want), "{text}\nwanted {want}");
}

#[test]
fn eval_rejects_foreign_parameters() {
    let dir = tempfile::tempdir().unwrap();
    quick_run(dir.path(), "2");
    let result = dir.path().join("result.json");
    let text = fs::read_to_string(&result)
        .unwrap()
        .replace("\"gm1\"", "\"gm7\"");
    fs::write(&result, text).unwrap();
    let o = dssa(&[
        "eval",
        circuit("one_pole.net").to_str().unwrap(),
        result.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("do not match"), "{}", stderr(&o));
}

#[test]
fn sample_prints_csv() {
    let o = dssa(&[
        "sample",
        circuit("one_pole.net").to_str().unwrap(),
        "-n",
        "5",
        "--seed",
        "3",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,gm1,g_r1,c1,dc_db,poles,zeros");
    assert_eq!(lines.len(), 6);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 7);
    assert!(
        fields[5].ends_with("+0j") || fields[5].ends_with("-0j"),
        "{}",
        fields[5]
    );
    assert_eq!(fields[6], "");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "population = 12\niterations = 5\ntrain = 8\ntest = 4\nseed = 11\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = dssa(&[
        "run",
        circuit("one_pole.net").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--iters",
        "3",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(report.config.ga.population, 12);
    assert_eq!(report.config.ga.iterations, 3);
    assert_eq!(report.config.seed, 11);

    fs::write(&cfg, "populashun = 12\n").unwrap();
    let o = dssa(&[
        "run",
        circuit("one_pole.net").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));
}
