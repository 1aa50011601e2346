use std::process::{Command, Output};

use mrd_cli::output::{parse_csv, parse_json, Row};

fn mrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrd"))
        .args(args)
        .env("MRD_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn rows(args: &[&str]) -> Vec<Row> {
    let out = mrd(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    parse_csv(&String::from_utf8(out.stdout).unwrap()).unwrap()
}

#[test]
fn phi_vs_perp_sandwich_in_bits() {
    let r = rows(&["divergence", "--rho", "phi", "--sigma", "phi-perp", "--d", "2", "--alpha", "2", "--class", "ppt"]);
    assert_eq!(r.len(), 2);
    let (lo, up) = (&r[0], &r[1]);
    assert_eq!((lo.kind.as_str(), up.kind.as_str()), ("lower", "upper"));
    for x in [lo, up] {
        assert!((x.value_display - 3f64.log2()).abs() < 1e-3, "{x:?}");
    }
    assert!(lo.value_nats <= up.value_nats + 1e-9);
}

#[test]
fn identical_states_give_zero() {
    for r in rows(&["divergence", "--rho", "iso:0.5", "--sigma", "iso:0.5", "--alpha", "0.5,1,2,inf"]) {
        assert!(r.value_nats.abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn closedform_one_bit() {
    let r = rows(&["divergence", "--rho", "iso:1", "--sigma", "iso:0.25", "--d", "2", "--mode", "closedform"]);
    assert!((r[0].value_display - 1.0).abs() < 1e-12);
    assert_eq!(r[0].status, "closedform");
}

#[test]
fn log_base_scales_display_only() {
    let args = |b: &'static str| ["--log-base", b, "divergence", "--rho", "phi", "--sigma", "iso:0.25", "--mode", "closedform"];
    let (two, e, ten) = (rows(&args("2")), rows(&args("e")), rows(&args("10")));
    assert_eq!(two[0].value_nats, e[0].value_nats);
    assert_eq!(e[0].value_display, e[0].value_nats);
    assert!((two[0].value_display - e[0].value_nats / std::f64::consts::LN_2).abs() < 1e-15);
    assert!((ten[0].value_display - e[0].value_nats / std::f64::consts::LN_10).abs() < 1e-15);
}

#[test]
fn json_mirrors_csv() {
    let args = ["divergence", "--rho", "iso:0.9", "--sigma", "iso:0.2", "--alpha", "0.5,inf", "--mode", "closedform"];
    let csv = rows(&args);
    let mut jargs = vec!["--format", "json"];
    jargs.extend(args);
    let out = mrd(&jargs);
    assert!(out.status.success());
    let json = parse_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(csv, json);
}

#[test]
fn sweep_is_deterministic_and_sorted() {
    let args = ["sweep", "--family", "iso", "--d", "3,2", "--p", "0:1:0.25", "--q", "0.5,0.1", "--alpha", "inf,0.5"];
    let a = mrd(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_mrd")).args(args).env("MRD_THREADS", "3").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let r = parse_csv(&String::from_utf8(a.stdout).unwrap()).unwrap();
    assert_eq!(r.len(), 2 * 5 * 2 * 2);
    let mut sorted = r.clone();
    Row::sort(&mut sorted);
    assert_eq!(r, sorted);
    assert_eq!(r[0].d, 2);
}

#[test]
fn maxdiv_with_certificate() {
    let r = rows(&["maxdiv", "--rho", "phi", "--sigma", "phi-perp", "--d", "3", "--certify", "phi-perp"]);
    let find = |k: &str, c: &str| r.iter().find(|x| x.kind == k && x.class == c).unwrap().clone();
    let target = 4f64.ln();
    assert!((find("lower", "PPT").value_nats - target).abs() < 1e-3);
    assert!((find("upper", "PPT").value_nats - target).abs() < 1e-3);
    assert!(find("gap", "PPT").value_nats >= -1e-9);
    assert_eq!(find("exact", "ALL").value_nats, f64::INFINITY);
    let c = find("certificate", "PPT");
    assert_eq!(c.status, "PASS");
    assert!((c.value_nats - target).abs() < 1e-12);
}

#[test]
fn certify_prints_checked_json() {
    let out = mrd(&["certify", "--family", "iso", "--p", "0.9", "--q", "0.25", "--d", "2", "--n", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["check"]["result"], "PASS");
    let lambda = v["lambda"].as_f64().unwrap();
    assert!((lambda - (2.8f64 / 1.5).powi(2)).abs() < 1e-12);
}

#[test]
fn exponent_presets() {
    let r = rows(&["--log-base", "e", "exponent", "--kind", "stein", "--preset", "phi-iso", "--d", "3", "--q", "0.1"]);
    assert!((r[0].value_nats - (4.0f64 / 1.3).ln()).abs() < 1e-12);
    assert_eq!(r[0].status, "exact");
    let r = rows(&["--log-base", "e", "exponent", "--kind", "sc", "--preset", "phi-perp", "--d", "2", "--r", "2"]);
    assert!((r[0].value_nats - (2.0 - 3f64.ln())).abs() < 1e-12);
    let r = rows(&["exponent", "--kind", "stein", "--preset", "anti-werner", "--d", "2", "--q", "0.5"]);
    assert!(r[0].status.starts_with("invalid"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["divergence", "--rho", "iso:2", "--sigma", "phi"],
        vec!["divergence", "--rho", "nope", "--sigma", "phi"],
        vec!["divergence", "--rho", "phi", "--sigma", "phi", "--alpha", "-1"],
        vec!["--log-base", "3", "divergence", "--rho", "phi", "--sigma", "phi"],
        vec!["sweep", "--family", "iso", "--p", "1:0:0.1", "--q", "0"],
        vec!["certify", "--family", "werner", "--p", "0.1"],
        vec!["frobnicate"],
    ] {
        let out = mrd(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn domain_errors_exit_3() {
    for args in [
        vec!["divergence", "--rho", "phi", "--sigma", "sym", "--mode", "closedform"],
        vec!["divergence", "--rho", "phi", "--sigma", "phi-perp", "--d", "1"],
        vec!["certify", "--family", "werner", "--p", "0", "--q", "0.5", "--d", "2"],
        vec!["divergence", "--rho", "iso:0.5", "--sigma", "iso:0.2", "--mode", "closedform", "--class", "P-LO"],
    ] {
        let out = mrd(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_mrd"))
        .args(["sweep", "--family", "iso", "--p", "0.5", "--q", "0.5"])
        .env("MRD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn raw_state_file() {
    let dir = std::env::temp_dir().join(format!("mrd-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("rho.json");
    let diag = |i: usize, j: usize| if i == j { 0.25 } else { 0.0 };
    let re: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| diag(i, j)).collect()).collect();
    let text = serde_json::json!({ "dims": [2, 2], "b_indices": [1], "re": re }).to_string();
    std::fs::write(&path, text).unwrap();
    let spec = format!("raw:{}", path.display());
    let r = rows(&["divergence", "--rho", &spec, "--sigma", "iso:0.25", "--alpha", "2", "--class", "all"]);
    assert_eq!(r.len(), 1);
    assert!(r[0].value_nats.abs() < 1e-9, "{:?}", r[0]);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn reproduce_reports_failures_with_exit_1() {
    let ok = mrd(&["reproduce", "--criteria", "7"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("criterion 7: PASS"));
    let bad = mrd(&["reproduce", "--criteria", "42"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn solver_config_file() {
    let dir = std::env::temp_dir().join(format!("mrd-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.json");
    std::fs::write(&good, r#"{"delta": 1e-9, "restarts": 4, "seed": 7}"#).unwrap();
    let good = good.display().to_string();
    let r = rows(&["divergence", "--rho", "phi", "--sigma", "iso:0.1", "--alpha", "2", "--solver-config", &good]);
    let target = (3.0f64 / 1.2).log2();
    assert!(r.iter().all(|x| (x.value_display - target).abs() < 1e-3), "{r:?}");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"delta": 0.5}"#).unwrap();
    let out = mrd(&["divergence", "--rho", "phi", "--sigma", "phi", "--solver-config", &bad.display().to_string()]);
    assert_eq!(out.status.code(), Some(3));
    let out = mrd(&["divergence", "--rho", "phi", "--sigma", "phi", "--solver-config", &good, "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(dir).ok();
}
