//! Runs every lemma suite tag and prints its JSON report; each tag must pass
//! all of its cases (one trivial, at least two derived).

use mpuforge_core::suite::{run_lemma_suite, LemmaTag};

fn run(tag: LemmaTag) {
    let report = run_lemma_suite(tag);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    assert!(report.cases.len() >= 3, "{tag:?}: need at least 3 cases");
    for case in &report.cases {
        assert!(
            case.passed,
            "{tag:?} case '{}' failed: observed {} > tol {} ({})",
            case.descriptor,
            case.observed,
            case.tolerance,
            case.counterexample.as_deref().unwrap_or("")
        );
    }
    assert!(report.passed);
}

#[test]
fn lemma_s1_local_isometries() {
    run(LemmaTag::S1);
}

#[test]
fn lemma_s2_lcu() {
    run(LemmaTag::S2);
}

#[test]
fn lemma_s3_reflections() {
    run(LemmaTag::S3);
}

#[test]
fn lemma_s4_amplification() {
    run(LemmaTag::S4);
}

#[test]
fn lemma_s5_merging_depth() {
    run(LemmaTag::S5);
}

#[test]
fn lemma_s6_uniform_isometries() {
    run(LemmaTag::S6);
}

#[test]
fn suite_thm1_uniform_exactness() {
    run(LemmaTag::Thm1);
}

#[test]
fn suite_thm1prime_depth_scaling() {
    run(LemmaTag::Thm1Prime);
}

#[test]
fn suite_thm2_nonuniform_exactness() {
    run(LemmaTag::Thm2);
}

#[test]
fn deterministic_replay() {
    // identical seeds give identical observations
    let a = run_lemma_suite(LemmaTag::Thm2);
    let b = run_lemma_suite(LemmaTag::Thm2);
    for (x, y) in a.cases.iter().zip(&b.cases) {
        assert_eq!(x.observed.to_bits(), y.observed.to_bits());
    }
}
