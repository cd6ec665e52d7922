use std::path::Path;
use std::process::{Command, Output};

fn heatkkt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatkkt")).args(args).output().expect("spawn heatkkt")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn solve_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = dir.join("record.json");
    let mut all = vec!["solve", "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = heatkkt(&all);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn solve_writes_converged_record() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("snap.json");
    let rec = solve_json(dir.path(), &["--nt", "10", "--nd", "2", "--nx", "6", "--ny", "6", "--snapshot", snap.to_str().unwrap()]);
    assert_eq!(rec["converged"], true);
    assert!(rec["true_final_relres"].as_f64().unwrap() <= 1e-6);
    assert_eq!(rec["precond"], "two-level");
    assert_eq!(rec["gmres"]["restart"], serde_json::Value::Null);
    let snap: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(snap).unwrap()).unwrap();
    assert_eq!(snap["u"].as_array().unwrap().len(), 10 * 25);
}

#[test]
fn true_schur_needs_at_most_three_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let rec = solve_json(dir.path(), &["--nt", "4", "--nd", "1", "--nx", "3", "--ny", "3", "--precond", "true-schur"]);
    assert!(rec["iterations"].as_u64().unwrap() <= 3);
}

#[test]
fn unpreconditioned_takes_longer_than_two_level() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--nt", "4", "--nd", "2", "--nx", "4", "--ny", "4"];
    let mut none_args = common.to_vec();
    none_args.extend(["--precond", "none"]);
    let none = solve_json(dir.path(), &none_args);
    let two = solve_json(dir.path(), &common);
    assert_eq!(none["converged"], true);
    assert!(none["iterations"].as_u64() > two["iterations"].as_u64());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"nt": 6, "nd": 3, "nx": 4, "ny": 4, "omega": 0.01, "precond": "one-level"}"#).unwrap();
    let rec = solve_json(dir.path(), &["--config", cfg.to_str().unwrap(), "--omega", "0.1"]);
    assert_eq!(rec["nt"], 6);
    assert_eq!(rec["precond"], "one-level");
    assert_eq!(rec["omega"], 0.1);
}

#[test]
fn configuration_errors_exit_one() {
    for args in [
        vec!["solve", "--precond", "bogus"],
        vec!["solve", "--nt", "10", "--nd", "3"],
        vec!["solve", "--nt", "10", "--steps-per-subdomain", "3"],
        vec!["solve", "--omega", "-1"],
        vec!["weak-scaling", "--nt-list", "4"],
        vec!["chart", "/nonexistent/in.csv", "/tmp/out.svg"],
    ] {
        let o = heatkkt(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn iteration_cap_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let rec = solve_json(dir.path(), &["--nt", "8", "--nd", "4", "--nx", "4", "--ny", "4", "--precond", "none", "--max-iters", "2"]);
    assert_eq!(rec["converged"], false);
    assert_eq!(rec["iterations"], 2);
}

#[test]
fn weak_scaling_rows_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("weak.csv");
    let o = heatkkt(&[
        "weak-scaling",
        "--steps-per-subdomain",
        "4",
        "--nt-list",
        "4,6,8",
        "--omega-list",
        "0.01,0.001",
        "--nx",
        "4",
        "--ny",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("skipped"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "nt,nd,steps_per_subdomain,omega,precond,coarse_variant,two_level_form,jhat_sign,iters,converged,final_relres,objective,setup_s,solve_s");
    // 2 nt values x 2 omegas x 2 preconditioners
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines[1].starts_with("4,1,4,0.01,one-level,"));
    assert!(lines[8].starts_with("8,2,4,0.001,two-level,"));

    let svg = dir.path().join("weak.svg");
    let o = heatkkt(&["chart", csv.to_str().unwrap(), svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(std::fs::read_to_string(svg).unwrap().contains("<polyline"));
}

#[test]
fn omega_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("omega.csv");
    let o = heatkkt(&[
        "omega-sweep",
        "--nt",
        "8",
        "--nd",
        "2",
        "--nx",
        "4",
        "--ny",
        "4",
        "--omega-list",
        "0.01,0.0001",
        "--precond-list",
        "two-level",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains(",two-level,") && l.contains(",true,")));
}

#[test]
fn chart_matches_golden_file() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("chart.svg");
    let o = heatkkt(&["chart", fixtures.join("weak_scaling.csv").to_str().unwrap(), svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = std::fs::read_to_string(svg).unwrap();
    let want = std::fs::read_to_string(fixtures.join("weak_scaling.svg")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    let header = "nt,nd,steps_per_subdomain,omega,precond,coarse_variant,two_level_form,jhat_sign,iters,converged,final_relres,objective,setup_s,solve_s";
    std::fs::write(&csv, format!("{header}\n100,5,20,0.01,one-level,per-dof,multiplicative,minus,22,true,0,0,0,0\n100,5,20,0.01,two-level,per-dof\n")).unwrap();
    let o = heatkkt(&["chart", csv.to_str().unwrap(), dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
