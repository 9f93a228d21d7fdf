use std::path::PathBuf;
use std::process::{Command, Output};

use qleak::baseline::{pair_requirement, Backend, BaselineTable};
use qleak::stats::PowerSpec;

fn qleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qleak"))
        .args(args)
        .env_remove("QLEAK_SEED")
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

#[test]
fn power_examples() {
    let o = qleak(&["power", "--mu1", "0.168084145", "--mu2", "0.163739443", "--variance", "0.003"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!((value(&out, "t-exact") - 2495.77).abs() < 0.01);
    assert!(value(&out, "normal-approx") < value(&out, "t-exact"));

    let o = qleak(&["power", "--d", "0.281857"]);
    assert!((value(&stdout(&o), "t-exact") - 198.56).abs() < 0.01);

    let o = qleak(&["power", "--d", "1"]);
    assert_eq!(value(&stdout(&o), "lehr"), 16.0);
}

#[test]
fn power_monte_carlo_check() {
    let o = qleak(&["power", "--d", "0.5", "--mc-check", "--seed", "4"]);
    assert!(o.status.success());
    let p = value(&stdout(&o), "mc-power");
    assert!((p - 0.8).abs() < 0.03, "{p}");
}

#[test]
fn power_rejects_non_positive_effect() {
    let o = qleak(&["power", "--d", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn reproduce_table_exit_code_follows_tolerance_column() {
    for backend in ["sim", "qc"] {
        let o = qleak(&["reproduce-table", "--backend", backend]);
        let out = stdout(&o);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 27);
        assert!(lines[0].starts_with("name,backend,nearest,printed_n,recomputed_n"));
        let any_out = lines[1..].iter().any(|l| l.ends_with(",false"));
        assert_eq!(o.status.code(), Some(if any_out { 1 } else { 0 }), "{backend}");
    }
}

#[test]
fn reproduce_table_accepts_a_consistent_table() {
    let base = BaselineTable::bundled();
    let spec = PowerSpec::default();
    let mut table = BaselineTable::new(base.entries[..3].to_vec()).unwrap();
    // Printed values recomputed from each row's nearest neighbour.
    for b in Backend::ALL {
        for i in 0..table.len() {
            let j = (0..table.len())
                .filter(|&j| j != i)
                .min_by(|&x, &y| {
                    let d = |k: usize| (table.entries[k].latency(b) - table.entries[i].latency(b)).abs();
                    d(x).total_cmp(&d(y))
                })
                .unwrap();
            let n = pair_requirement(&table.model(i, b), &table.model(j, b), &spec)
                .unwrap()
                .samples();
            table.entries[i].set_required(b, n);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    table.save(&path).unwrap();
    let o = qleak(&["reproduce-table", "--table", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
}

#[test]
fn reproduce_table_rejects_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, "name,sim_latency_s,qc_latency_s,sim_required,qc_required\n").unwrap();
    let o = qleak(&["reproduce-table", "--table", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn uc_attack_labels_the_victim() {
    let o = qleak(&["attack", "--scenario", &scenario("uc_ghz_sim.toml"), "--attack", "uc"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "UC");
    assert_eq!(row[1], "GHZ");
    assert_eq!(row[3], "2496");
}

#[test]
fn qp_attack_writes_dom_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = qleak(&[
        "attack",
        "--scenario",
        &scenario("qp_grover.toml"),
        "--attack",
        "qp",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("QP,hardware,identified"));
    let dom = std::fs::read_to_string(dir.path().join("dom_simulator.csv")).unwrap();
    let first = dom
        .lines()
        .skip(1)
        .find(|l| l.ends_with(",true"))
        .map(|l| l.split(',').next().unwrap().parse::<usize>().unwrap())
        .unwrap();
    assert!(first <= 10);
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn co_attack_exports_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let o = qleak(&[
        "attack",
        "--scenario",
        &scenario("co_grover.toml"),
        "--attack",
        "co",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("CO,iter=2,"));
    let long = std::fs::read_to_string(dir.path().join("co_long.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 24 * 24);
}

#[test]
fn null_attacks_are_indistinguishable() {
    for attack in ["qm", "ca"] {
        let o = qleak(&["attack", "--scenario", &scenario("qm_null.toml"), "--attack", attack]);
        assert!(o.status.success());
        assert!(stdout(&o).contains(",indistinguishable,indistinguishable,700,"), "{}", stdout(&o));
    }
}

#[test]
fn bad_scenario_path_is_an_input_error() {
    let o = qleak(&["attack", "--scenario", "/no/such/file.toml", "--attack", "uc"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/file.toml"));
}

#[test]
fn unknown_attack_is_a_usage_error() {
    let o = qleak(&["attack", "--scenario", &scenario("qp_grover.toml"), "--attack", "xx"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_seedable() {
    let path = scenario("qp_grover.toml");
    let a = qleak(&["simulate", "--scenario", &path]);
    let b = qleak(&["simulate", "--scenario", &path, "--jobs", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let seeded = qleak(&["simulate", "--scenario", &path, "--seed", "99"]);
    assert_ne!(a.stdout, seeded.stdout);
    let from_env = Command::new(env!("CARGO_BIN_EXE_qleak"))
        .args(["simulate", "--scenario", &path])
        .env("QLEAK_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, seeded.stdout);
}

#[test]
fn matrix_long_form() {
    let o = qleak(&["matrix", "--grover"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 24 * 24);
    assert!(out.starts_with("i,j,ovl,required_n\n1,1,1,\n"));
    let o = qleak(&["matrix", "--backend", "qc"]);
    assert_eq!(stdout(&o).lines().count(), 1 + 26 * 26);
}

#[test]
fn mitigate_reports_each_defense() {
    let o = qleak(&["mitigate", "--scenario", &scenario("mitigate_ghz_hw.toml"), "--attack", "uc", "--runs", "50"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5);
    let noise: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert!(noise[1].starts_with("timer-noise"));
    let ratio: f64 = noise[4].parse().unwrap();
    assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
}
