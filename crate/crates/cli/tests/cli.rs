use std::path::PathBuf;
use std::process::{Command, Output};

const HEADER: &str = "case,solver,K,N,T,unknowns,multipliers,steps,converged,final_residual,objective,\
assembly_s,factorization_s,solve_s,factor_flops,solve_flops,kkt_stationarity_x,kkt_stationarity_u,kkt_primal,\
kappa_delta,kappa_preconditioned,rho_inner,rho_outer";

fn gridlq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridlq")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Data rows as maps from column name to field.
fn rows(csv: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn field<'a>(row: &'a [(String, String)], name: &str) -> &'a str {
    &row.iter().find(|(k, _)| k == name).unwrap().1
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gridlq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn small_pcgm_run_gives_one_converged_row() {
    let o = gridlq(&["run", "--case", "case1", "--size", "3", "--solver", "pcgm", "--L", "2", "--S", "2", "--tol", "1e-9"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), HEADER);
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    assert_eq!(field(&r[0], "converged"), "true");
    assert_eq!(field(&r[0], "multipliers"), "144");
    for (k, v) in &r[0] {
        if !matches!(k.as_str(), "case" | "solver" | "converged") {
            assert!(v.parse::<f64>().unwrap().is_finite(), "{k}={v}");
        }
    }
    let kappa: f64 = field(&r[0], "kappa_delta").parse().unwrap();
    let kappa_pre: f64 = field(&r[0], "kappa_preconditioned").parse().unwrap();
    assert!(kappa_pre < kappa);
}

#[test]
fn nbjm_sweep_rows_grow() {
    let o = gridlq(&["run", "--case", "case2", "--sweep", "2,3,4", "--solver", "nbjm"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 3);
    let unknowns: Vec<usize> = r.iter().map(|row| field(row, "unknowns").parse().unwrap()).collect();
    assert!(unknowns.windows(2).all(|w| w[0] < w[1]));
    assert!(r.iter().all(|row| field(row, "converged") == "true"));
}

#[test]
fn exit_codes() {
    assert_eq!(gridlq(&["run", "--solver", "dense", "--size", "50"]).status.code(), Some(4));
    assert_eq!(gridlq(&["run", "--size", "3", "--max-steps", "2"]).status.code(), Some(3));
    assert_eq!(gridlq(&["run", "--size", "2", "--L", "3"]).status.code(), Some(2));
    assert_eq!(gridlq(&["run", "--sweep", "2,x"]).status.code(), Some(2));
}

#[test]
fn non_converged_row_is_still_written() {
    let o = gridlq(&["run", "--size", "3", "--max-steps", "2", "--no-diagnostics"]);
    let r = rows(&stdout(&o));
    assert_eq!(field(&r[0], "converged"), "false");
    assert_eq!(field(&r[0], "steps"), "2");
    assert_eq!(field(&r[0], "kappa_delta"), "");
}

#[test]
fn invalid_problem_file_is_a_validation_failure() {
    let path = scratch("bad.json");
    let o = gridlq(&["generate", "--case", "case1", "--size", "2"]);
    let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["subsystems"][0][0]["n"] = 3.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let o = gridlq(&["run", "--case", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generated_file_solves_like_the_generator() {
    let path = scratch("case2.json");
    let g = gridlq(&["generate", "--case", "case2", "--size", "3", "--output", path.to_str().unwrap()]);
    assert!(g.status.success());
    let from_file = gridlq(&["run", "--case", path.to_str().unwrap(), "--omit-timings"]);
    let direct = gridlq(&["run", "--case", "case2", "--size", "3", "--omit-timings"]);
    let (a, b) = (rows(&stdout(&from_file)), rows(&stdout(&direct)));
    assert_eq!(field(&a[0], "objective"), field(&b[0], "objective"));
    assert_eq!(field(&a[0], "case"), "file");
}

#[test]
fn compare_against_dense_and_nbjm() {
    let o = gridlq(&["compare", "--case", "case1", "--size", "3", "--solver", "pcgm", "--against", "dense"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    assert!(field(&r[0], "objective_rel_diff").parse::<f64>().unwrap() <= 1e-6);

    let o = gridlq(&["compare", "--case", "case2", "--size", "5", "--solver", "pcgm", "--against", "nbjm"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    let (a, b): (usize, usize) = (field(&r[0], "steps_a").parse().unwrap(), field(&r[0], "steps_b").parse().unwrap());
    assert!(a < b, "pcgm {a} vs nbjm {b}");

    let o = gridlq(&["compare", "--size", "3", "--solver", "pcgm", "--against", "pcgm", "--omit-timings"]);
    let r = rows(&stdout(&o));
    assert_eq!(field(&r[0], "steps_diff"), "0");
    assert_eq!(field(&r[0], "objective_rel_diff"), "0.0");
}

#[test]
fn json_report_carries_history() {
    let o = gridlq(&["run", "--size", "2", "--format", "json", "--omit-timings"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rec = &v[0];
    let steps = rec["steps"].as_u64().unwrap() as usize;
    assert_eq!(rec["report"]["residual_inf_history"].as_array().unwrap().len(), steps + 1);
    assert_eq!(rec["report"]["wall_time_s"].as_f64(), Some(0.0));
    assert_eq!(rec["K"].as_u64(), Some(2));
}

#[test]
fn threads_do_not_change_output() {
    let base = ["run", "--case", "case1", "--sweep", "3,4", "--seed", "5", "--omit-timings"];
    let one = gridlq(&[&base[..], &["--threads", "1"]].concat());
    let three = gridlq(&[&base[..], &["--threads", "3"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, three.stdout);
}
