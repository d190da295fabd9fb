use std::fs;
use std::process::{Command, Output};

fn dcbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcbo"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_prints_summary_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trials.csv");
    let o = dcbo(&[
        "run",
        "--objective",
        "sphere",
        "--dim",
        "3",
        "--agents",
        "10",
        "--trials",
        "4",
        "--seed",
        "1",
        "--max-iter",
        "200",
        "--traces",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["trials"], 4);
    assert_eq!(summary["objective"], "sphere");
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("trial_id,seed,final_f,f_minus_min,iterations,termination,wall_ms"));
    assert!(dir.path().join("trials.summary.json").exists());
    assert!(dir.path().join("trials.traces.csv").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "algorithm = \"pso\"\nobjective = \"ackley\"\ndim = 4\nagents = 12\ntrials = 2\nmax_iter = 100\n",
    )
    .unwrap();
    let o = dcbo(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "3",
        "--format",
        "json",
        "--output",
        dir.path().join("o.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(written["config"]["algorithm"], "pso");
    assert_eq!(written["records"].as_array().unwrap().len(), 3);
    assert_eq!(written["stats"]["algorithm"], "pso");
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(dcbo(&["run", "--objective", "nope"]).status.code(), Some(1));
    assert_eq!(
        dcbo(&["run", "--params", "1.5,1,0.4,0.7"]).status.code(),
        Some(1)
    );
    assert_eq!(dcbo(&["run", "--params", "0.5,1"]).status.code(), Some(1));
    assert_eq!(dcbo(&["run", "--trials", "0"]).status.code(), Some(1));
    assert_eq!(dcbo(&["run", "--unknown-flag"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "dim = 3\nnot_a_key = true\n").unwrap();
    let o = dcbo(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let o = dcbo(&[
        "run",
        "--dim",
        "2",
        "--agents",
        "5",
        "--max-iter",
        "10",
        "--output",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_params_reports_conditions() {
    let o = dcbo(&[
        "check-params",
        "--params",
        "0.5,1,0.5,0.2",
        "--samples",
        "20000",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["b1b_holds"], true);
    assert_eq!(v["prop34_ok"], true);
    assert_eq!(v["b1a_holds"], "proven-true");
}

#[test]
fn sweep_prints_one_row_per_pair() {
    let o = dcbo(&[
        "sweep",
        "--objectives",
        "sphere,ackley",
        "--dims",
        "2,4",
        "--algorithms",
        "dcbo,pso",
        "--agents",
        "10",
        "--trials",
        "2",
        "--max-iter",
        "100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 2 * 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("dcbo vs pso"));
}

#[test]
fn restart_demo_emits_rounds() {
    let o = dcbo(&[
        "restart-demo",
        "--dim",
        "5",
        "--agents",
        "10",
        "--rounds",
        "4",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "round,iterations,p_path_length,final_fp");
    assert_eq!(lines.len(), 5);
    let finals: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(finals.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn portfolio_from_prices() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    fs::write(
        &prices,
        "a,b,c\n10,20,30\n11,19,31\n12,21,30\n11.5,22,32\n12.5,21,33\n",
    )
    .unwrap();
    let o = dcbo(&[
        "portfolio",
        "--prices",
        prices.to_str().unwrap(),
        "--agents",
        "20",
        "--max-iter",
        "500",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("method,beta,value,iterations,weights"));
    assert_eq!(text.lines().count(), 1 + 1 + 4 + 1);
    fs::write(&prices, "a\n1\n-1\n").unwrap();
    assert_eq!(
        dcbo(&["portfolio", "--prices", prices.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn compsense_table() {
    let o = dcbo(&[
        "compsense",
        "--trials",
        "2",
        "--agents",
        "50",
        "--max-iter",
        "200",
        "--radii",
        "4,8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
}
