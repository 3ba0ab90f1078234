use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const M1: &str = r#"{"agents":["a1","a2"],"items":["i1","i2"],
    "valuations":{"a1":{"i1":"3","i2":"1"},"a2":{"i1":"2","i2":"2"}}}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_envy-pricing"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn welfare_report_over_every_branch() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "m1.json", M1);
    let out = dir.path().join("report.json");
    let r = bin(&["run", "--input", s(&input), "--scheme", "welfare-expost", "--order", "all", "--tie", "all", "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report = json(&out);
    assert_eq!(report["welfare_values"], serde_json::json!(["5"]));
    assert_eq!(report["all_pass"]["expost"], Value::Bool(true));
    assert_eq!(report["branches"], 2);
}

#[test]
fn every_scheme_output_passes_its_notion() {
    let dir = TempDir::new().unwrap();
    let gen = dir.path().join("r.json");
    assert_eq!(code(&bin(&["gen", "--family", "random", "--n", "4", "--seed", "11", "--output", s(&gen)])), 0);
    for (scheme, notion, extra) in [
        ("welfare-expost", "expost", vec!["--order", "seed:2", "--tie", "seed:5"]),
        ("welfare-exante", "exante", vec!["--tie", "seed:1"]),
        ("revenue-expost", "expost", vec![]),
        ("revenue-exante", "exante", vec![]),
        ("revenue-weak", "weak", vec!["--order", "seed:9"]),
    ] {
        let trace = dir.path().join(format!("{scheme}.json"));
        let mut args = vec!["run", "--input", s(&gen), "--scheme", scheme, "--output", s(&trace)];
        args.extend(extra);
        let r = bin(&args);
        assert_eq!(code(&r), 0, "{scheme}: {}", String::from_utf8_lossy(&r.stderr));
        let v = bin(&["verify", "--trace", s(&trace), "--notion", notion]);
        assert_eq!(code(&v), 0, "{scheme} fails {notion}: {}", String::from_utf8_lossy(&v.stdout));
    }
}

#[test]
fn identical_flags_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        assert_eq!(code(&bin(&["gen", "--family", "random", "--n", "3", "--seed", "7", "--output", s(p)])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (ta, tb) = (dir.path().join("ta.json"), dir.path().join("tb.json"));
    for t in [&ta, &tb] {
        let r = bin(&["run", "--input", s(&a), "--scheme", "welfare-exante", "--order", "seed:4", "--tie", "seed:4", "--output", s(t)]);
        assert_eq!(code(&r), 0);
    }
    assert_eq!(fs::read(&ta).unwrap(), fs::read(&tb).unwrap());
}

#[test]
fn revenue_weak_needs_an_order() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "m1.json", M1);
    let r = bin(&["run", "--input", s(&input), "--scheme", "revenue-weak", "--output", s(&dir.path().join("t.json"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("order"));
}

#[test]
fn oversized_delta_is_rejected_with_its_bound() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "m1.json", M1);
    let r = bin(&["run", "--input", s(&input), "--scheme", "revenue-exante", "--delta", "3/2", "--output", s(&dir.path().join("t.json"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("below 1"));
}

#[test]
fn discount_lowers_every_sale() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "m1.json", M1);
    let out = dir.path().join("t.json");
    let r = bin(&["run", "--input", s(&input), "--scheme", "revenue-expost", "--discount", "1/10", "--output", s(&out)]);
    assert_eq!(code(&r), 0);
    let t = json(&out);
    assert_eq!(t["steps"][0]["offers"]["i1"], "29/10");
    assert_eq!(code(&bin(&["verify", "--trace", s(&out), "--notion", "expost"])), 0);
    let r = bin(&["run", "--input", s(&input), "--scheme", "revenue-expost", "--discount", "-1", "--output", s(&out)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn bad_flags_exit_two() {
    assert_eq!(code(&bin(&["run", "--scheme", "nope"])), 2);
    assert_eq!(code(&bin(&["gen", "--family", "harmonic"])), 2);
    assert_eq!(code(&bin(&["gen", "--family", "vertex-cover", "--graph", "k5"])), 2);
}

#[test]
fn verify_reports_a_witness() {
    let dir = TempDir::new().unwrap();
    let trace = write(
        &dir,
        "bad.json",
        &format!(
            r#"{{"market":{M1},"steps":[
                {{"agent":"a1","available":["i1","i2"],"offers":{{"i1":"3","i2":"1"}},"purchase":"i1"}},
                {{"agent":"a2","available":["i2"],"offers":{{"i2":"1/2"}},"purchase":"i2"}}]}}"#
        ),
    );
    let r = bin(&["verify", "--trace", s(&trace), "--notion", "exante"]);
    assert_eq!(code(&r), 1);
    let w: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(w["agent"], "a1");
    assert_eq!(w["gap"], "1/2");
    assert_eq!(code(&bin(&["verify", "--trace", s(&trace), "--notion", "weak"])), 0);
    let broken = write(&dir, "broken.json", r#"{"market":{},"steps":[]}"#);
    assert_eq!(code(&bin(&["verify", "--trace", s(&broken), "--notion", "weak"])), 2);
}

#[test]
fn constant_price_trace_is_strongly_envy_free() {
    let dir = TempDir::new().unwrap();
    let trace = write(
        &dir,
        "flat.json",
        &format!(
            r#"{{"market":{M1},"steps":[
                {{"agent":"a1","available":["i1","i2"],"offers":{{"i1":"2","i2":"1"}},"purchase":"i1"}},
                {{"agent":"a2","available":["i2"],"offers":{{"i2":"1"}},"purchase":"i2"}}]}}"#
        ),
    );
    assert_eq!(code(&bin(&["verify", "--trace", s(&trace), "--notion", "weak"])), 0);
    assert_eq!(code(&bin(&["verify", "--trace", s(&trace), "--notion", "strong"])), 0);
}

#[test]
fn gen_families() {
    let dir = TempDir::new().unwrap();
    let h = dir.path().join("h.json");
    assert_eq!(code(&bin(&["gen", "--family", "harmonic", "--n", "3", "--output", s(&h)])), 0);
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/harmonic3.json");
    assert_eq!(fs::read_to_string(&h).unwrap().trim_end(), fs::read_to_string(fixture).unwrap());
    let c = bin(&["gen", "--family", "cyclic3"]);
    let v: Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(v["valuations"]["a3"], serde_json::json!({"i1": "1", "i3": "1"}));
    let k = bin(&["gen", "--family", "vertex-cover", "--graph", "k4"]);
    let v: Value = serde_json::from_slice(&k.stdout).unwrap();
    assert_eq!(v["order"][0], "e0-1");
    assert_eq!(v["items"].as_array().unwrap().len(), 16);
}

#[test]
fn oracles() {
    let dir = TempDir::new().unwrap();
    let h = dir.path().join("h.json");
    bin(&["gen", "--family", "harmonic", "--n", "4", "--output", s(&h)]);
    let r: Value = serde_json::from_slice(&bin(&["oracle", "--input", s(&h), "--oracle", "static-ef-revenue"]).stdout).unwrap();
    assert_eq!(r["revenue"], "1");

    let c = dir.path().join("c.json");
    bin(&["gen", "--family", "cyclic3", "--output", s(&c)]);
    let r: Value = serde_json::from_slice(&bin(&["oracle", "--input", s(&c), "--oracle", "max-matchings"]).stdout).unwrap();
    assert_eq!(r["count"], 2);

    let m1 = write(&dir, "m1.json", M1);
    let r: Value = serde_json::from_slice(&bin(&["oracle", "--input", s(&m1), "--oracle", "adversary"]).stdout).unwrap();
    assert_eq!(r["all_pass"]["expost"], Value::Bool(true));

    let k4 = dir.path().join("k4.json");
    bin(&["gen", "--family", "vertex-cover", "--graph", "k4", "--output", s(&k4)]);
    let r: Value = serde_json::from_slice(&bin(&["oracle", "--input", s(&k4), "--oracle", "expost-revenue-grid"]).stdout).unwrap();
    assert_eq!(r["revenue"], "11");

    let big = dir.path().join("big.json");
    bin(&["gen", "--family", "random", "--n", "8", "--output", s(&big)]);
    assert_eq!(code(&bin(&["oracle", "--input", s(&big), "--oracle", "adversary"])), 4);
}
