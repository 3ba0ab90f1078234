//! Generated instances compared against checked-in files.
//!
//! Set `UPDATE_FIXTURES=1` to rewrite the files from the current generators.

use std::path::PathBuf;

use envy_pricing::choice::Policy;
use envy_pricing::envy::{verify_envy_free, EnvyNotion, Timing};
use envy_pricing::lab::generators::{gen_cyclic_triple, gen_harmonic, gen_random, gen_vertex_cover_market, Graph};
use envy_pricing::market::{instance_to_json, load_instance, load_market};
use envy_pricing::rational::{int, ratio};
use envy_pricing::trace::Trace;
use envy_pricing::welfare::run_welfare_scheme;

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    if std::env::var_os("UPDATE_FIXTURES").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted");
}

#[test]
fn random_3x3_seed_1() {
    let m = gen_random(3, 3, 5, 1);
    check("random_3x3_max5_seed1.json", &instance_to_json(&m, None));
}

#[test]
fn harmonic_3() {
    let json = instance_to_json(&gen_harmonic(3), None);
    check("harmonic3.json", &json);
    let m = load_market(&json).unwrap();
    assert_eq!(m.value(2, 2), &ratio(1, 3));
    assert_eq!(m.value(2, 1), &int(0));
}

#[test]
fn cyclic3_instance() {
    check("cyclic3.json", &instance_to_json(&gen_cyclic_triple(), None));
}

#[test]
fn k4_instance_carries_edge_first_order() {
    let vc = gen_vertex_cover_market(&Graph::complete(4)).unwrap();
    let json = instance_to_json(&vc.market, Some(&vc.edge_first));
    check("k4_edge_first.json", &json);
    assert_eq!(load_instance(&json).unwrap().order, Some(vc.edge_first));
}

#[test]
fn m1_welfare_ex_post_trace() {
    let m1 = load_market(
        r#"{"agents":["a1","a2"],"items":["i1","i2"],
            "valuations":{"a1":{"i1":"3","i2":"1"},"a2":{"i1":"2","i2":"2"}}}"#,
    )
    .unwrap();
    let t = run_welfare_scheme(&m1, Timing::ExPost, &mut Policy::lexicographic()).unwrap();
    let json = t.to_json();
    check("m1_welfare_expost_trace.json", &json);
    assert_eq!(Trace::from_json(&json).unwrap(), t);
    assert!(verify_envy_free(&t, EnvyNotion::ExPost).unwrap().is_none());
}
