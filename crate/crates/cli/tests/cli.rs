use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcs-qkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn default_sweep_orders_cutoffs_by_range() {
    let o = run(&["sweep"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().next(),
        Some("r_total,attenuation_db,mu_opt,p_est_opt,n_ph_bar,key_length,rate")
    );
    let rows = rows(&text);
    assert!(
        rows.windows(2).all(|w| (w[0][0], w[0][1]) < (w[1][0], w[1][1])),
        "rows out of order"
    );

    let cutoff = |r: f64| {
        rows.iter()
            .filter(|x| x[0] == r && x[6] > 0.0)
            .map(|x| x[1])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let cuts: Vec<f64> = [0.0, 10.0, 100.0, 500.0].map(cutoff).into();
    assert!(cuts.windows(2).all(|w| w[1] <= w[0]), "{cuts:?}");
    assert!(cuts[3] >= 0.0);
    assert!(rows.iter().any(|x| x[0] == 100.0 && x[1] == 30.0 && x[6] > 0.0));

    // Each curve ends with its first zero after a positive rate.
    for r in [0.0, 10.0, 100.0, 500.0] {
        let curve: Vec<_> = rows.iter().filter(|x| x[0] == r).collect();
        let zeros_after = curve.iter().skip_while(|x| x[6] == 0.0).filter(|x| x[6] == 0.0).count();
        assert!(zeros_after <= 1);
    }
}

#[test]
fn empty_range_list_prints_nothing() {
    let f = config("[sweep]\nrange_list = []\n");
    let o = run(&["sweep", "--config", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn wide_step_gives_one_attenuation() {
    let f =
        config("[sweep]\nattenuation_start = 4\nattenuation_stop = 10\nattenuation_step = 50\nrange_list = [0, 10]\n");
    let o = run(&["sweep", "--config", f.path().to_str().unwrap()]);
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|x| x[1] == 4.0));
}

#[test]
fn point_at_thirty_db_has_key_and_optimum_dominates() {
    let opt: Value = serde_json::from_str(&stdout(&run(&[
        "point",
        "--r-total",
        "100",
        "--attenuation-db",
        "30",
        "--optimize",
    ])))
    .unwrap();
    let rate = opt["rate"].as_f64().unwrap();
    assert!(rate > 0.0);
    for key in [
        "budget",
        "phase_error",
        "n_ph_bar",
        "leak_ec",
        "key_length",
        "thresholds",
        "expected",
    ] {
        assert!(!opt[key].is_null(), "{key} missing");
    }
    let f = config("[protocol]\nmu = 1e-6\np_est = 0.2\n");
    let fixed: Value = serde_json::from_str(&stdout(&run(&[
        "point",
        "--config",
        f.path().to_str().unwrap(),
        "--r-total",
        "100",
        "--attenuation-db",
        "30",
    ])))
    .unwrap();
    assert!(rate >= fixed["rate"].as_f64().unwrap());
}

#[test]
fn zero_intensity_point_has_zero_rate() {
    let f = config("[protocol]\nmu = 0\n");
    let o = run(&["point", "--config", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rate"].as_f64(), Some(0.0));
}

#[test]
fn simulate_is_deterministic_and_near_expectation() {
    let f = config("[protocol]\nmu = 0.1\np_est = 0.1\n[sim]\nn_rounds = 1e6\n");
    let args = [
        "simulate",
        "--config",
        f.path().to_str().unwrap(),
        "--attenuation-db",
        "10",
        "--seed",
        "11",
    ];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 1);
    let v: Value = serde_json::from_str(&text).unwrap();
    for z in ["z_n_sig", "z_n_est", "z_n_est_bit"] {
        assert!(v[z].as_f64().unwrap().abs() <= 5.0, "{z} = {}", v[z]);
    }
}

#[test]
fn simulate_abort_is_not_a_failure() {
    let f = config("[protocol]\nmu = 0\n[channel]\ndark = 0\n");
    let o = run(&["simulate", "--config", f.path().to_str().unwrap()]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["aborted"], Value::Bool(true));
    assert_eq!(v["n_sig"], 0);
}

#[test]
fn coverage_default_suite_passes() {
    let o = run(&["coverage"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(
        text.lines().next(),
        Some("bound,sequence,n,epsilon,trials,violation_fraction,tolerance,pass")
    );
    assert_eq!(text.lines().count(), 1 + 9 * 2);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",pass")), "{text}");
}

#[test]
fn coverage_at_trivial_epsilon_has_no_violations() {
    let f = config("[coverage]\neps = [1.0]\nn = [500]\ntrials = 200\n");
    let text = stdout(&run(&["coverage", "--config", f.path().to_str().unwrap()]));
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(5), Some("0"), "{line}");
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    let f = config("[coverage]\ntrials = 0\n");
    assert_eq!(
        run(&["coverage", "--config", f.path().to_str().unwrap()]).status.code(),
        Some(2)
    );

    let bad = config("[protocol]\nmu = 0.1\n\n[channel]\ne_mis = nope\n");
    let o = run(&["point", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));

    let unknown = config("[protocol]\nmew = 0.1\n");
    assert_eq!(
        run(&["point", "--config", unknown.path().to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let invalid = config("[protocol]\np_est = 1.5\n");
    assert_eq!(
        run(&["point", "--config", invalid.path().to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    assert_eq!(run(&["point", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("point.json");
    let o = run(&["point", "--output", path.to_str().unwrap()]);
    assert!(o.status.success() && o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["rate"].is_number());
}

#[test]
fn flags_override_file_values() {
    let f = config("[protocol]\nr1 = 7\nr2 = 3\n[channel]\nattenuation_db = 40\n");
    let v: Value = serde_json::from_str(&stdout(&run(&[
        "point",
        "--config",
        f.path().to_str().unwrap(),
        "--r-total",
        "2",
        "--attenuation-db",
        "5",
    ])))
    .unwrap();
    assert_eq!((v["r1"].as_u64(), v["r2"].as_u64()), (Some(2), Some(0)));
    assert_eq!(v["attenuation_db"].as_f64(), Some(5.0));
}

#[test]
fn floats_have_at_most_twelve_significant_digits() {
    let text = stdout(&run(&["sweep", "--r-total", "10"]));
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = field.split('e').next().unwrap();
        let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
        assert!(digits.trim_start_matches('0').len() <= 12, "{field}");
        assert!(!field.contains(' '));
    }
}
