use std::process::{Command, Output};

use serde_json::Value;

fn riglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riglab"))
        .args(args)
        .env_remove("RIGLAB_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

/// Numbers are emitted either as JSON numbers or as exact decimal strings.
fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.as_str().unwrap().parse().unwrap())
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn strs(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect()
}

const DOUBLE_EXP: &[&str] = &["--family", "superlinear", "--start", "2", "--rule", "power:2"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn seq_squares() {
    let o = riglab(&["seq", "--family", "poly", "--coeffs", "0,0,1", "--count", "5"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(strs(&v["result"]["prefix"]), ["1", "4", "9", "16", "25"]);
    assert_eq!(v["tool"], "riglab");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["sequence"]["family"], "poly");
    assert_eq!(v["config"]["prefix"]["count"], 5);
}

#[test]
fn seq_block_family() {
    let o = riglab(&["seq", "--family", "blocks", "--schedule", "1,3,9", "--count", "40"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let p = strs(&v["result"]["prefix"]);
    assert_eq!(p.len(), 40);
    assert_eq!(&p[..10], ["2", "3", "4", "6", "8", "12", "16", "24", "32", "48"]);
    let n: Vec<num_bigint::BigUint> = p.iter().map(|s| s.parse().unwrap()).collect();
    assert!(n.windows(2).all(|w| w[0] < w[1]));
    let legacy = riglab(&["seq", "--family", "ex77", "--schedule", "1,3,9", "--count", "40"]);
    assert_eq!(json(&legacy)["result"], v["result"]);
}

#[test]
fn malformed_spec_is_input_error() {
    let o = riglab(&["seq", "--spec", r#"{"family":"nope","params":{}}"#]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["error"]["kind"], "InvalidSpec");
    let o = riglab(&["seq", "--family", "poly", "--coeffs", "x", "--count", "3"]);
    assert_eq!(code(&o), 2);
    let o = riglab(&["seq", "--count", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn seq_csv_trace() {
    let o = riglab(&["--csv", "seq", "--terms", "3,5,7"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "k,n\n0,3\n1,5\n2,7\n");
}

#[test]
fn jamison_integers_near_sqrt3() {
    let o = riglab(&["jamison", "--family", "poly", "--coeffs", "1,1", "--start-k", "0", "--count", "64"]);
    assert_eq!(code(&o), 0);
    let e = json(&o)["result"]["estimate"].as_f64().unwrap();
    assert!((1.70..=1.74).contains(&e), "{e}");
}

#[test]
fn jamison_double_exponential_small() {
    let o = riglab(&with(&["jamison"], &with(DOUBLE_EXP, &["--count", "12", "--target", "0.05"])));
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert!(v["result"]["estimate"].as_f64().unwrap() <= 0.05);
    assert_eq!(v["verdict"], true);
}

#[test]
fn jamison_empty_prefix() {
    let o = riglab(&["jamison", "--terms", ""]);
    assert_eq!(code(&o), 2);
}

#[test]
fn jamison_false_verdict_exits_one() {
    let o = riglab(&["jamison", "--family", "poly", "--coeffs", "1,1", "--start-k", "0", "--count", "16", "--target", "0.5"]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["verdict"], false);
}

#[test]
fn certify_dyadic_chain() {
    let o = riglab(&["certify", "--family", "chain", "--start", "2", "--multipliers", "2", "--count", "30", "--depth", "40"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 30);
    assert_eq!(v["result"]["failures"], 0);
}

#[test]
fn certify_block_family() {
    let o = riglab(&["certify", "--family", "blocks", "--schedule", "1,3,9", "--count", "40", "--measure", "blocks"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["verdict"], true);
}

#[test]
fn certify_prefix_off_chain() {
    let o = riglab(&["certify", "--terms", "3,9", "--depth", "10"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn operator_acceptance_run() {
    let args = with(
        &["operator"],
        &with(DOUBLE_EXP, &["--count", "15", "--delta", "0.1", "--levels", "12", "--supply", "chain_digits:18"]),
    );
    let o = riglab(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let rows = v["result"]["rigidity"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 15);
    for r in rows {
        assert!(num(&r["norm_estimate"]) <= 1.1);
    }
    assert_eq!(v["result"]["spectral"]["verdict"], true);
    assert_eq!(v["result"]["model"]["L"], 12);
}

#[test]
fn operator_loose_delta() {
    let o = riglab(&with(
        &["operator"],
        &with(DOUBLE_EXP, &["--count", "4", "--delta", "2", "--levels", "3", "--supply", "points:1/3,1/4294967296,1/18446744073709551616"]),
    ));
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let halvings: u64 = v["result"]["model"]["schedule"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["halvings"].as_u64().unwrap())
        .sum();
    assert_eq!(halvings, 1);
    assert!(v["result"]["spectral"].is_null());
}

#[test]
fn operator_supply_exhausted() {
    let o = riglab(&["operator", "--family", "poly", "--coeffs", "1,1", "--count", "64", "--levels", "12", "--supply", "grid:128:127"]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["error"]["kind"], "SupplyExhausted");
}

#[test]
fn cf_examples() {
    let o = riglab(&["cf", "--alpha", "rational:355/113"]);
    assert_eq!(code(&o), 0);
    assert_eq!(strs(&json(&o)["result"]["expansion"]["a"]), ["3", "7", "16"]);
    let o = riglab(&["cf", "--alpha", "surd:0,2,1", "--depth", "8"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(strs(&v["result"]["expansion"]["a"])[..4], ["1", "2", "2", "2"]);
    assert_eq!(v["result"]["approximation"].as_array().unwrap().len(), 8);
    let o = riglab(&["cf", "--alpha", "liouville:3,3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["pattern_match"], true);
    let o = riglab(&["cf", "--alpha", "random:256", "--depth", "20"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["approximation"].as_array().unwrap().len(), 20);
    let o = riglab(&["cf", "--alpha", "liouville:1,3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn weyl_examples() {
    let o = riglab(&["weyl", "--family", "poly", "--coeffs", "0,0,1", "--count", "10000", "--theta", "sqrt:2", "--below", "0.1"]);
    assert_eq!(code(&o), 0);
    let o = riglab(&["weyl", "--family", "poly", "--coeffs", "0,1", "--count", "100", "--theta", "1/2"]);
    let avg = num(&json(&o)["result"]["average"]);
    assert!(avg < 1e-12);
    let o = riglab(&["weyl", "--family", "primes", "--count", "2000", "--samples", "64", "--below", "0.5"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["histogram"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum::<u64>(), 64);
}

#[test]
fn cantor_examples() {
    let o = riglab(&with(&["cantor"], &with(DOUBLE_EXP, &["--count", "11", "--depth", "6"])));
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["leaf_count"], 256);
    let o = riglab(&["cantor", "--family", "chain", "--start", "1", "--multipliers", "2,4,8,16,32,64,128,256,512", "--count", "10", "--kind", "digits", "--depth", "9"]);
    assert_eq!(code(&o), 0);
    let o = riglab(&with(&["cantor"], &with(DOUBLE_EXP, &["--count", "15", "--kind", "tree", "--depth", "4"])));
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["result"]["injective"], true);
    let o = riglab(&["cantor", "--family", "poly", "--coeffs", "1,1", "--count", "20", "--depth", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulate_reports_rows() {
    let o = riglab(&["simulate", "--family", "chain", "--start", "1", "--multipliers", "2", "--count", "13", "--trials", "2000", "--seed", "3"]);
    assert!(matches!(code(&o), 0 | 1));
    let v = json(&o);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 13);
    assert_eq!(v["config"]["seed"], 3);
    let o = riglab(&["simulate", "--family", "chain", "--start", "1", "--multipliers", "2", "--count", "4", "--trials", "10"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let args = ["simulate", "--family", "chain", "--start", "1", "--multipliers", "2", "--count", "8", "--trials", "500", "--seed", "11"];
    let a = riglab(&args);
    let b = riglab(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut t = vec!["--threads", "1"];
    t.extend(args);
    let c = riglab(&t);
    assert_eq!(a.stdout, c.stdout);
    let j = ["jamison", "--family", "poly", "--coeffs", "1,1", "--count", "32"];
    assert_eq!(riglab(&j).stdout, riglab(&j).stdout);
}

#[test]
fn precision_from_environment() {
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_riglab"));
        c.args(["cantor", "--family", "superlinear", "--count", "8", "--depth", "2"]);
        match env {
            Some(v) => c.env("RIGLAB_PRECISION_BITS", v),
            None => c.env_remove("RIGLAB_PRECISION_BITS"),
        };
        c.output().unwrap()
    };
    assert_eq!(json(&run(None))["config"]["tree"]["bits"], 128);
    assert_eq!(json(&run(Some("256")))["config"]["tree"]["bits"], 256);
    assert_eq!(code(&run(Some("abc"))), 2);
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("riglab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("seq.json");
    let o = riglab(&["seq", "--terms", "1,2", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(strs(&v["result"]["prefix"]), ["1", "2"]);
    std::fs::remove_dir_all(&dir).unwrap();
}
