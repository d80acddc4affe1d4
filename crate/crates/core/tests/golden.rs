//! Snapshot tests for orderings that seeds and reports depend on.
//!
//! Set `GOLDEN_BLESS=1` to rewrite the files after an intentional change.

use std::path::PathBuf;

use designforge::design::{build_design, DESK_PLAN};
use designforge::gates::{base_set, Circuit};
use designforge::linalg::GroupTag;
use designforge::schur_weyl::{enumerate_matchings, Matching};
use designforge::Caps;

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("GOLDEN_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} changed; rerun with GOLDEN_BLESS=1 if intended");
}

fn matching_line(m: &Matching) -> String {
    m.pairs.iter().map(|(a, b)| format!("({a},{b})")).collect()
}

#[test]
fn base_set_order() {
    for (group, file) in [(GroupTag::SO, "base_set_so.txt"), (GroupTag::SU, "base_set_su.txt")] {
        let set = base_set(group, true).unwrap();
        let text: String = set.elements.iter().map(|e| serde_json::to_string(&e.gate).unwrap() + "\n").collect();
        check(file, &text);
    }
}

#[test]
fn matching_order() {
    let caps = Caps::default();
    let mut text = String::new();
    for k in 1..=3 {
        for bipartite in [false, true] {
            for m in enumerate_matchings(k, bipartite, &caps).unwrap() {
                text.push_str(&format!("k={k} {} {}\n", if bipartite { "bip" } else { "all" }, matching_line(&m)));
            }
        }
    }
    check("matchings.txt", &text);
}

#[test]
fn matching_order_small_cases_by_hand() {
    let caps = Caps::default();
    let all: Vec<String> = enumerate_matchings(2, false, &caps).unwrap().iter().map(matching_line).collect();
    assert_eq!(all, ["(0,1)(2,3)", "(0,2)(1,3)", "(0,3)(1,2)"]);
    let bip: Vec<String> = enumerate_matchings(2, true, &caps).unwrap().iter().map(matching_line).collect();
    assert_eq!(bip, ["(0,2)(1,3)", "(0,3)(1,2)"]);
}

#[test]
fn sampled_circuits() {
    let caps = Caps::default();
    let mut text = String::new();
    let so = build_design(GroupTag::SO, 4, 1, 0.1, None, &DESK_PLAN, &caps).unwrap();
    for seed in [0u64, 7, 1000, 65535] {
        let c = so.sample_circuit(so.seed(seed).unwrap()).unwrap();
        text.push_str(&c.to_json());
        text.push('\n');
    }
    let su = build_design(GroupTag::SU, 5, 2, 0.1, None, &DESK_PLAN[..1], &caps).unwrap();
    for seed in [3u64, 1234] {
        text.push_str(&su.sample_circuit(su.seed(seed).unwrap()).unwrap().to_json());
        text.push('\n');
    }
    let o = build_design(GroupTag::O, 4, 1, 0.1, None, &DESK_PLAN[..1], &caps).unwrap();
    let lifted = o.count() as u64 + 5;
    text.push_str(&o.sample_circuit(o.seed(lifted).unwrap()).unwrap().to_json());
    text.push('\n');
    check("circuits.jsonl", &text);
    for line in text.lines() {
        assert_eq!(Circuit::from_json(line).unwrap().to_json(), line);
    }
}
