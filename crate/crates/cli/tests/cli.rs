use std::process::Command;

use cuspidal::fixtures::{bundled, eta_product};
use cuspidal::qseries::{FracQExp, QExpJson};
use cuspidal_cli::*;
use serde_json::{json, Value};

fn fixture(id: &str) -> FormDescriptor {
    FormDescriptor::Fixture { id: id.into() }
}

fn opts() -> Options {
    Options::new(19)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cuspidal"));
    c.arg("--no-cache");
    c
}

fn method_of(out: &Output) -> String {
    out.json["result"]["method"].as_str().unwrap().to_string()
}

#[test]
fn theta_at_all_cusps() {
    let out = cmd_expand(&fixture("theta"), None, &Options { length: 6, ..opts() }).unwrap();
    let cusps = out.json["cusps"].as_object().unwrap();
    assert_eq!(cusps.keys().collect::<Vec<_>>(), vec!["0/1", "1/2", "oo"]);
    assert_eq!(cusps["1/2"]["expansion"]["alpha"], "1/4");
    assert_eq!(cusps["1/2"]["width"], 1);
    assert_eq!(cusps["0/1"]["width"], 4);
    assert_eq!(out.manifest.truncation_lengths, vec![6, 6, 6]);
}

#[test]
fn single_cusp_by_equivalent_label() {
    // 3/2 is Gamma0(4)-equivalent to 1/2
    let out = cmd_expand(&fixture("theta"), Some("3/2"), &Options { length: 4, ..opts() }).unwrap();
    let cusps = out.json["cusps"].as_object().unwrap();
    assert_eq!(cusps.keys().collect::<Vec<_>>(), vec!["1/2"]);
}

fn coeffs_of(v: &Value) -> FracQExp {
    let j: QExpJson = serde_json::from_value(v.clone()).unwrap();
    FracQExp::from_json(&j).unwrap()
}

#[test]
fn e4_echoes_its_expansion() {
    let out = cmd_expand(&fixture("e4"), None, &Options { length: 10, ..opts() }).unwrap();
    let e = coeffs_of(&out.json["cusps"]["oo"]["expansion"]);
    let want = bundled("e4").unwrap().integers();
    for (n, (c, w)) in e.coeffs.iter().zip(&want).take(10).enumerate() {
        let (got, w) = (c.to_c64(), w.to_f64());
        assert!((got.re - w).abs() <= 1e-20 * w.abs().max(1.0), "n={n}");
        assert!(got.im.abs() < 1e-20);
    }
}

#[test]
fn delta_fifty_coefficients() {
    let out = cmd_expand(&fixture("delta"), Some("oo"), &Options { length: 50, ..opts() }).unwrap();
    let e = coeffs_of(&out.json["cusps"]["oo"]["expansion"]);
    assert_eq!(e.coeffs.len(), 50);
    for (n, z) in eta_product(&[(1, 24)], 50).iter().enumerate() {
        let w = z.to_f64();
        assert!((e.coeffs[n].to_c64().re - w).abs() <= 1e-20 * w.abs().max(1.0), "n={n}");
    }
}

#[test]
fn expansion_json_round_trips_bit_exactly() {
    let out = cmd_expand(&fixture("11a"), None, &Options { length: 8, ..opts() }).unwrap();
    for (_, c) in out.json["cusps"].as_object().unwrap() {
        let j: QExpJson = serde_json::from_value(c["expansion"].clone()).unwrap();
        let back = FracQExp::from_json(&j).unwrap();
        assert_eq!(back.to_json(), j);
        assert_eq!(serde_json::to_value(back.to_json()).unwrap(), c["expansion"]);
    }
}

#[test]
fn auto_selects_by_weight() {
    let d = cmd_petersson(&fixture("delta"), &fixture("delta"), &opts()).unwrap();
    assert_eq!(method_of(&d), "haberland-cuspidal");
    assert_eq!(d.manifest.method.as_deref(), Some("haberland-cuspidal"));
    let v: f64 = d.json["result"]["re"].as_str().unwrap().parse().unwrap();
    assert!((v / 1.035_362_056_804_321e-6 - 1.0).abs() < 1e-15);
    let t = cmd_petersson(&fixture("theta"), &fixture("theta"), &opts()).unwrap();
    assert_eq!(method_of(&t), "nelson-collins");
    // a cusp form against an Eisenstein series is not cuspidal on both sides
    let e = FormDescriptor::Eisenstein { chi1: (1, 1), chi2: (1, 1), k: 12, e: 1 };
    let g = cmd_petersson(&fixture("delta"), &e, &opts()).unwrap();
    assert_eq!(method_of(&g), "haberland-general");
    let v: f64 = g.json["result"]["re"].as_str().unwrap().parse().unwrap();
    assert!(v.abs() < 1e-15);
}

#[test]
fn haberland_rejects_half_integral_weight() {
    let err = cmd_petersson(&fixture("theta"), &fixture("theta"), &Options { method: "haberland".into(), ..opts() }).err().unwrap();
    assert!(matches!(err, CliError::NotApplicable(_)));
    assert!(err.to_string().contains("method not applicable"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn methods_agree_through_the_cli() {
    let mut vals = Vec::new();
    for m in ["haberland", "nelson", "oracle"] {
        let r = cmd_petersson(&fixture("11a"), &fixture("11a"), &Options { method: m.into(), ..opts() }).unwrap();
        vals.push(r.json["result"]["re"].as_str().unwrap().parse::<f64>().unwrap());
    }
    assert!((vals[0] / vals[1] - 1.0).abs() < 1e-15);
    assert!((vals[0] / vals[2] - 1.0).abs() < 1e-6);
}

#[test]
fn cached_and_cold_runs_agree_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let o = Options { cache: Cache::new(Some(dir.path().to_path_buf())), length: 12, ..opts() };
    let f = fixture("11a");
    let cold = cmd_petersson(&f, &f, &o).unwrap();
    assert!(cold.manifest.cache.iter().all(|c| !c.hit));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let warm = cmd_petersson(&f, &f, &o).unwrap();
    assert!(warm.manifest.cache.iter().all(|c| c.hit));
    assert_eq!(cold.json, warm.json);
    let ec = cmd_expand(&f, None, &o).unwrap();
    assert!(ec.manifest.cache[0].hit);
    let uncached = cmd_expand(&f, None, &Options { cache: Cache::disabled(), ..o.clone() }).unwrap();
    assert_eq!(ec.json, uncached.json);
}

#[test]
fn reproducible_across_thread_counts() {
    let f = fixture("11a");
    let one = cmd_petersson(&f, &f, &Options { jobs: 1, method: "nelson".into(), ..opts() }).unwrap();
    let again = cmd_petersson(&f, &f, &Options { jobs: 1, method: "nelson".into(), ..opts() }).unwrap();
    let many = cmd_petersson(&f, &f, &Options { jobs: 4, method: "nelson".into(), ..opts() }).unwrap();
    assert_eq!(one.json, again.json);
    assert_eq!(one.manifest.inputs_hash, again.manifest.inputs_hash);
    // jobs is not an input: the hash and, with ordered reductions, the values match
    assert_eq!(one.manifest.inputs_hash, many.manifest.inputs_hash);
    assert_eq!(one.json, many.json);
}

#[test]
fn descriptor_shapes() {
    let s = FormDescriptor::parse_arg(r#"{"level": 1, "weight": 12, "character": [1, 1], "coeffs": ["0", 1, ["-24", "0"]]}"#).unwrap();
    assert!(matches!(s, FormDescriptor::Stream { .. }));
    assert!(matches!(FormDescriptor::parse_arg(r#"{"chi1": [1, 1], "chi2": [4, 3], "k": 1, "e": 1}"#).unwrap(), FormDescriptor::Eisenstein { .. }));
    assert!(matches!(FormDescriptor::parse_arg(r#"{"t": 3}"#).unwrap(), FormDescriptor::ThetaPower { t: 3 }));
    assert!(matches!(FormDescriptor::parse_arg("delta").unwrap(), FormDescriptor::Fixture { .. }));
    assert!(FormDescriptor::parse_arg(r#"{"t": 3, "extra": 1}"#).is_err());
    assert_ne!(fixture("delta").hash(), fixture("11a").hash());
}

#[test]
fn coefficient_stream_matches_fixture() {
    let c: Vec<Value> = eta_product(&[(1, 24)], 50).iter().map(|z| json!(z.to_string())).collect();
    let s = FormDescriptor::Stream { level: 1, weight: json!("12"), character: (1, 1), coeffs: c };
    let a = cmd_petersson(&s, &s, &opts()).unwrap();
    let b = cmd_petersson(&fixture("delta"), &fixture("delta"), &opts()).unwrap();
    assert_eq!(a.json["result"], b.json["result"]);
}

#[test]
fn theta_powers_and_levels() {
    let t3 = FormDescriptor::ThetaPower { t: 3 };
    let out = cmd_expand(&t3, None, &Options { length: 5, level: Some(8), ..opts() }).unwrap();
    assert_eq!(out.json["level"], 8);
    assert_eq!(out.json["weight"], "3/2");
    assert_eq!(out.json["cusps"].as_object().unwrap().len(), 4);
    let e = coeffs_of(&out.json["cusps"]["oo"]["expansion"]);
    // r_3(n): 1, 6, 12, 8, 6
    for (n, w) in [1.0, 6.0, 12.0, 8.0, 6.0].iter().enumerate() {
        assert!((e.coeffs[n].to_c64().re - w).abs() < 1e-20);
    }
    let err = cmd_expand(&t3, None, &Options { level: Some(6), ..opts() }).err().unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn precondition_failures() {
    let bad_parity = FormDescriptor::Stream { level: 1, weight: json!(3), character: (1, 1), coeffs: vec![json!(1)] };
    assert_eq!(cmd_expand(&bad_parity, None, &opts()).err().unwrap().exit_code(), 2);
    let short = FormDescriptor::Stream { level: 11, weight: json!(2), character: (1, 1), coeffs: vec![json!(0), json!(1), json!(-2)] };
    assert_eq!(cmd_expand(&short, None, &opts()).err().unwrap().exit_code(), 2);
    let e4 = fixture("e4");
    assert_eq!(cmd_petersson(&e4, &e4, &opts()).err().unwrap().exit_code(), 2);
    assert_eq!(cmd_petersson(&fixture("delta"), &fixture("e4"), &opts()).err().unwrap().exit_code(), 2);
}

#[test]
fn binary_exit_codes_and_streams() {
    let ok = bin().args(["petersson", "delta", "--jobs", "1"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["result"]["method"], "haberland-cuspidal");
    let nope = bin().args(["petersson", "theta", "--method", "haberland"]).output().unwrap();
    assert_eq!(nope.status.code(), Some(2));
    assert!(nope.stdout.is_empty());
    assert!(String::from_utf8_lossy(&nope.stderr).contains("method not applicable"));
    let unknown = bin().args(["expand", "nonsense"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let flag = bin().args(["expand", "delta", "--bogus"]).output().unwrap();
    assert_eq!(flag.status.code(), Some(2));
}

#[test]
fn binary_cache_dir_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let manifest = dir.path().join("m.json");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_cuspidal"))
            .env("CUSPIDAL_CACHE_DIR", &cache)
            .args(["expand", "11a", "--length", "5", "--manifest-out"])
            .arg(&manifest)
            .output()
            .unwrap()
    };
    let first = run();
    assert_eq!(first.status.code(), Some(0));
    let m1: RunManifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert!(!m1.cache[0].hit);
    assert_eq!(m1.command, "expand");
    assert_eq!(m1.precision_bits, 96);
    assert_eq!(m1.truncation_lengths, vec![5, 5]);
    let second = run();
    let m2: RunManifest = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert!(m2.cache[0].hit);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(m1.inputs_hash, m2.inputs_hash);
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
}
