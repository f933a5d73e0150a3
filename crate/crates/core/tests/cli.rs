use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qlattice::experiments::{aggregate, parse_records, table_for, ExperimentKind};

fn qlattice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlattice"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = qlattice(args);
    assert!(
        out.status.success(),
        "qlattice {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn coeffs_table() {
    let csv = stdout(&["coeffs", "-n", "3"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,i,k,a_k,b_k,res_norm,res_orth_max"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // levels 0 and 1 of N = 3
    assert_eq!(rows.len(), 1 + 2);
    let a_k: Vec<f64> = rows[1..].iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(rows[1][3], "-0.333333333333");
    assert_eq!(rows[2][3], "0.666666666667");
    assert!((a_k[0] + 1.0 / 3.0).abs() < 1e-11);
    for r in &rows {
        assert!(r[5].parse::<f64>().unwrap() < 1e-10);
        assert!(r[6].parse::<f64>().unwrap() < 1e-10);
    }
    assert!(!csv.contains('\r'));
}

#[test]
fn coeffs_sign_report_goes_to_stderr() {
    let out = qlattice(&["coeffs", "-n", "6", "--signs"]);
    assert!(out.status.success());
    let log = String::from_utf8(out.stderr).unwrap();
    assert_eq!(log.lines().filter(|l| l.contains("a_alternates=")).count(), 3);
}

#[test]
fn simulate_problem_file() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("fixture.txt");
    fs::write(&problem, "# three items, pairs are solutions\nN=3 L=2\n{3}\n").unwrap();
    let csv = stdout(&["simulate", path_str(&problem), "--policy", "inversion"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,L,start,policy,try,p_soln,trials,n_soln");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "3,2,0,inversion,1,0.925925925926,1.08,1");

    let csv = stdout(&[
        "simulate",
        path_str(&problem),
        "--policy",
        "random",
        "--tries",
        "4",
        "--seed",
        "3",
    ]);
    assert_eq!(csv.lines().count(), 5);

    fs::write(&problem, "N=3 L=2\n{4}\n").unwrap();
    let out = qlattice(&["simulate", path_str(&problem)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = [
        "sweep-beta",
        "-n",
        "8",
        "--beta",
        "1,2",
        "--instances",
        "12",
        "--policy",
        "random",
        "--tries",
        "3",
        "--seed",
        "9",
    ];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    let mut other = args;
    other[12] = "10";
    assert_ne!(stdout(&other), a);
}

#[test]
fn raw_records_reaggregate_to_the_same_table() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, kind, extra) in [
        (
            "sweep-beta",
            ExperimentKind::SweepBeta,
            vec!["-n", "8,10", "--beta", "1:2:0.5"],
        ),
        (
            "sat-sweep",
            ExperimentKind::SatSweep,
            vec!["-n", "5", "--ratio", "2,4.2"],
        ),
        (
            "backtrack",
            ExperimentKind::BacktrackSweep,
            vec!["-n", "10", "--beta", "0:3:1"],
        ),
    ] {
        let out = dir.path().join(format!("{cmd}.csv"));
        let raw = dir.path().join(format!("{cmd}.raw"));
        let mut args = vec![
            cmd,
            "--instances",
            "15",
            "--seed",
            "4",
            "--out",
            path_str(&out),
            "--raw",
            path_str(&raw),
        ];
        args.extend(extra);
        assert!(stdout(&args).is_empty());
        let csv = fs::read_to_string(&out).unwrap();
        let records = parse_records(&fs::read_to_string(&raw).unwrap()).unwrap();
        let rebuilt = table_for(kind, &aggregate(&records));
        assert_eq!(rebuilt.to_csv(), csv, "{cmd}");
        let kind_name = kind.to_string();
        let again = stdout(&["aggregate", path_str(&raw), "--kind", &kind_name]);
        assert_eq!(again, csv, "{cmd}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "# small sweep\nn = 8\nbeta = 0.5, 1\ninstances = 5\nseed = 11\n").unwrap();
    let from_file = stdout(&["sweep-beta", "--config", path_str(&cfg)]);
    assert_eq!(from_file.lines().count(), 3);
    assert!(from_file.lines().skip(1).all(|l| l.starts_with("8,4,")));
    let overridden = stdout(&["sweep-beta", "--config", path_str(&cfg), "--instances", "7"]);
    assert!(overridden.lines().skip(1).all(|l| l.split(',').nth(4) == Some("7")));
    let flags_only = stdout(&[
        "sweep-beta",
        "-n",
        "8",
        "--beta",
        "0.5,1",
        "--instances",
        "5",
        "--seed",
        "11",
    ]);
    assert_eq!(flags_only, from_file);
}

#[test]
fn infeasible_config_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let result = qlattice(&["sweep-beta", "-n", "10", "--beta", "7", "--out", path_str(&out)]);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("exceeds"));
    assert!(!out.exists());
    let skipped = qlattice(&[
        "sweep-beta",
        "-n",
        "10",
        "--beta",
        "3,7",
        "--instances",
        "3",
        "--skip-infeasible",
    ]);
    assert!(skipped.status.success());
    assert!(String::from_utf8_lossy(&skipped.stderr).contains("skipped"));
    assert_eq!(String::from_utf8_lossy(&skipped.stdout).lines().count(), 2);
    assert!(!qlattice(&["sweep-beta", "--tries", "0"]).status.success());
}

#[test]
fn svg_chart_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("scaling.svg");
    stdout(&[
        "scaling",
        "-n",
        "8,10",
        "--beta",
        "1,2",
        "--instances",
        "4",
        "--enhancement",
        "--svg",
        path_str(&svg),
    ]);
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 2);
}

#[test]
fn theory_tables() {
    let csv = stdout(&["theory", "-b", "2,3"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "b,h_inv_b,beta_crit,beta_poly");
    assert!(lines[1].starts_with("2,0.69314718056,2.40942083965,0"));
    let rho = stdout(&["theory", "--rho-n", "10", "--m", "0,35"]);
    let lines: Vec<&str> = rho.lines().collect();
    assert_eq!(lines[0], "N,L,m,rho_L,expected_solutions");
    assert_eq!(lines[1], "10,5,0,1,252");
    assert!(!qlattice(&["theory", "--rho-n", "10", "--m", "36"]).status.success());
}
