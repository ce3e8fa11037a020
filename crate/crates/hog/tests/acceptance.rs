//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! 1. Golden step-1 image of g1 (and the unreachable rule under --no-prune).
//! 2. Golden step-2 image of g3.
//! 3. Pipeline language preservation on g1 and 500 random word grammars.
//! 4. Converse language preservation on g2 and 100 random tree grammars,
//!    plus the exact golden converse of g2.
//! 5. Order bounds of step 1 and of the converse construction.
//! 6. Closed-form word slice of g1 at length 12.
//! 7. Typing preservation of every emitted rule.
//! 8. Property suite: see tests/props.rs.

use hog::converse::{order_bound_check, tree_to_word, words_with_e};
use hog::ext::{desugar, parse_ext_grammar, validate_ext, ExtGrammar, ExtRule};
use hog::grammar::{is_word_grammar, validate, Grammar};
use hog::preprocess::normalize_order0_args;
use hog::semantics::{word_language_slice, EnumLimits, Word};
use hog::step1::{transform_grammar1, Step1Options};
use hog::step2::{transform_grammar2, Step2Options};
use hog::verify::{
    compare_word_slices, fixtures, pipeline, random_grammar, LangKind, OracleParams, Profile,
    Verdict,
};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_cli(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_hog"))
        .args(args)
        .output()
        .expect("spawn hog");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

fn same_ext_grammar(a: &ExtGrammar, b: &ExtGrammar) -> bool {
    let ra: BTreeSet<&ExtRule> = a.rules().iter().collect();
    let rb: BTreeSet<&ExtRule> = b.rules().iter().collect();
    a.terminals == b.terminals
        && a.nonterminals == b.nonterminals
        && a.start == b.start
        && ra == rb
}

#[test]
fn criterion_1_golden_step1_of_g1() {
    let t0 = Instant::now();
    let (stdout, stderr, code) = run_cli(&[
        "transform",
        fixture_path("g1.hog").to_str().unwrap(),
        "--stage",
        "step1",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let got = parse_ext_grammar(&stdout).expect("step1 output re-parses");
    let expect = parse_ext_grammar(include_str!("../fixtures/step1_g1.hog")).unwrap();
    assert!(same_ext_grammar(&got, &expect), "step1 output:\n{stdout}");
    assert_eq!(got.rules().len(), 7);

    let (stdout, stderr, code) = run_cli(&[
        "transform",
        fixture_path("g1.hog").to_str().unwrap(),
        "--stage",
        "step1",
        "--no-prune",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let unpruned = parse_ext_grammar(&stdout).expect("unpruned output re-parses");
    let unreachable = unpruned
        .rules()
        .iter()
        .find(|r| r.lhs == "F'{(top->o)^(o->o)->o}")
        .expect("the unreachable rule appears under --no-prune");
    assert_eq!(
        unreachable.params,
        vec!["f'{top->o}".to_string(), "f'{o->o}".to_string()]
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 5, "{elapsed:?}");
    println!("ACCEPTANCE 1 (golden step-1 image of g1): PASS ({elapsed:?})");
}

#[test]
fn criterion_2_golden_step2_of_g3() {
    let t0 = Instant::now();
    let (stdout, stderr, code) = run_cli(&[
        "transform",
        fixture_path("g3.hog").to_str().unwrap(),
        "--stage",
        "step2",
    ]);
    assert_eq!(code, 0, "{stderr}");
    let got = parse_ext_grammar(&stdout).expect("step2 output re-parses");
    let expect = parse_ext_grammar(include_str!("../fixtures/step2_g3.hog")).unwrap();
    assert!(same_ext_grammar(&got, &expect), "step2 output:\n{stdout}");
    assert_eq!(got.rules().len(), 9);
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 5, "{elapsed:?}");
    println!("ACCEPTANCE 2 (golden step-2 image of g3): PASS ({elapsed:?})");
}

#[test]
fn criterion_3_pipeline_language_preservation() {
    let t0 = Instant::now();
    let params = OracleParams::default();
    assert_eq!(params.max_len, 6);

    let report = compare_word_slices(
        &fixtures::g1(),
        LangKind::Word,
        &pipeline(&fixtures::g1()).unwrap().output,
        LangKind::LeafEpsilon,
        &params,
    );
    assert_eq!(report.verdict, Verdict::Pass, "g1: {report}");

    let profile = Profile::word_default();
    let n = 500u64;
    let mut failures = Vec::new();
    let mut inconclusive = 0usize;
    for seed in 0..n {
        let g = random_grammar(seed, &profile);
        let run = pipeline(&g).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let report =
            compare_word_slices(&g, LangKind::Word, &run.output, LangKind::LeafEpsilon, &params);
        match report.verdict {
            Verdict::Pass => {}
            Verdict::Fail => failures.push((seed, report)),
            Verdict::Inconclusive => inconclusive += 1,
        }
    }
    assert!(
        failures.is_empty(),
        "{} failures, first: seed {} {}",
        failures.len(),
        failures[0].0,
        failures[0].1
    );
    let rate = inconclusive as f64 / n as f64;
    assert!(rate < 0.05, "inconclusive rate {rate}");
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 600, "{elapsed:?}");
    println!(
        "ACCEPTANCE 3 (pipeline on g1 + {n} random word grammars): PASS \
         (0 failures, {inconclusive} inconclusive, {elapsed:?})"
    );
}

#[test]
fn criterion_4_converse_language_preservation() {
    let t0 = Instant::now();
    let params = OracleParams::default();

    // exact golden image of g2
    let conv = tree_to_word(&fixtures::g2()).unwrap();
    assert_eq!(conv, fixtures::converse_g2());
    let report = compare_word_slices(
        &conv,
        LangKind::Word,
        &fixtures::g2(),
        LangKind::LeafEpsilon,
        &params,
    );
    assert_eq!(report.verdict, Verdict::Pass, "g2: {report}");

    let profile = Profile::tree_default();
    let n = 100u64;
    let mut failures = Vec::new();
    for seed in 0..n {
        let g = random_grammar(seed, &profile);
        assert!(
            words_with_e(&g, 10, EnumLimits::default()).is_empty(),
            "seed {seed}: slice not e-free"
        );
        let w = tree_to_word(&g).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        let report = compare_word_slices(&w, LangKind::Word, &g, LangKind::LeafEpsilon, &params);
        if report.verdict == Verdict::Fail {
            failures.push((seed, report));
        }
    }
    assert!(
        failures.is_empty(),
        "{} failures, first: seed {} {}",
        failures.len(),
        failures[0].0,
        failures[0].1
    );
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 300, "{elapsed:?}");
    println!(
        "ACCEPTANCE 4 (converse on g2 + {n} random tree grammars): PASS ({elapsed:?})"
    );
}

#[test]
fn criterion_5_order_bounds() {
    let t0 = Instant::now();

    // step 1 lowers the order of every order-2 input by at least one
    let mut checked = 0usize;
    let mut order2_inputs: Vec<Grammar> = vec![fixtures::g1()];
    let profile = Profile::word_default();
    for seed in 0..100u64 {
        let g = random_grammar(seed, &profile);
        if g.order() == 2 {
            order2_inputs.push(g);
        }
    }
    for g in &order2_inputs {
        let pre = normalize_order0_args(g).unwrap();
        let out = transform_grammar1(&pre, &Step1Options::default()).unwrap();
        assert!(
            out.grammar.order() < g.order(),
            "order {} -> {}",
            g.order(),
            out.grammar.order()
        );
        checked += 1;
    }
    assert!(checked > 50);

    // converse raises the order by at most one, and order-0 inputs give
    // exactly order 1
    let conv = tree_to_word(&fixtures::g2()).unwrap();
    assert!(order_bound_check(&fixtures::g2(), &conv));
    assert_eq!(conv.order(), 2);
    let mut order0_seen = 0usize;
    for seed in 0..100u64 {
        let g = random_grammar(seed, &Profile::tree_default());
        let w = tree_to_word(&g).unwrap();
        assert!(order_bound_check(&g, &w), "seed {seed}");
        if g.order() == 0 {
            assert_eq!(w.order(), 1, "seed {seed}");
            order0_seen += 1;
        }
    }
    assert!(order0_seen > 0, "no order-0 tree grammars among the seeds");
    let elapsed = t0.elapsed();
    println!(
        "ACCEPTANCE 5 (order bounds on {checked} order-2 inputs and 100 converses): PASS ({elapsed:?})"
    );
}

#[test]
fn criterion_6_closed_form_word_slice() {
    let t0 = Instant::now();
    // independent generator: { ww | w in {a,b}+, |w| <= 6 }
    let mut expect: BTreeSet<Word> = BTreeSet::new();
    for k in 1..=6usize {
        for idx in 0..(1usize << k) {
            let w: Vec<String> = (0..k)
                .map(|i| {
                    if idx & (1 << i) != 0 {
                        "b".to_string()
                    } else {
                        "a".to_string()
                    }
                })
                .collect();
            let mut ww = w.clone();
            ww.extend(w);
            expect.insert(Word(ww));
        }
    }
    assert_eq!(expect.len(), 126);

    let limits = EnumLimits {
        max_term_nodes: 10_000,
        max_states: 4_000_000,
    };
    let slice = word_language_slice(&fixtures::g1(), 18, 12, limits).unwrap();
    assert!(!slice.truncated);
    assert_eq!(slice.words, expect);
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs() < 30, "{elapsed:?}");
    println!("ACCEPTANCE 6 (W(g1) slice at length 12 = 126 closed-form words): PASS ({elapsed:?})");
}

#[test]
fn criterion_7_typing_preservation() {
    let t0 = Instant::now();
    let mut rules_checked = 0usize;

    let mut check_ext = |g: &ExtGrammar, what: &str| {
        let report = validate_ext(g);
        assert!(report.is_valid(), "{what}: {report}");
        rules_checked += g.rules().len();
        let plain = desugar(g);
        let report = validate(&plain);
        assert!(report.is_valid(), "{what} desugared: {report}");
    };

    // fixtures through both transformations
    let g1_step1 = transform_grammar1(&fixtures::g1(), &Step1Options::default()).unwrap();
    check_ext(&g1_step1.grammar, "step1(g1)");
    let g1_unpruned = transform_grammar1(
        &fixtures::g1(),
        &Step1Options {
            prune: false,
            ..Default::default()
        },
    )
    .unwrap();
    check_ext(&g1_unpruned.grammar, "step1(g1) unpruned");
    let g3_step2 = transform_grammar2(&fixtures::g3(), &Step2Options::default()).unwrap();
    check_ext(&g3_step2, "step2(g3)");

    // random runs through the whole pipeline, stage by stage
    let profile = Profile::word_default();
    for seed in 0..100u64 {
        let g = random_grammar(seed, &profile);
        let pre = normalize_order0_args(&g).unwrap();
        assert!(validate(&pre).is_valid(), "seed {seed} pre");
        let s1 = transform_grammar1(&pre, &Step1Options::default()).unwrap();
        check_ext(&s1.grammar, &format!("seed {seed} step1"));
        let plain = desugar(&s1.grammar);
        let sat = hog::preprocess::saturate_br(&plain);
        let s2 = transform_grammar2(&sat, &Step2Options::default()).unwrap();
        check_ext(&s2, &format!("seed {seed} step2"));
    }
    let elapsed = t0.elapsed();
    println!(
        "ACCEPTANCE 7 (typing preservation, {rules_checked} emitted rules): PASS ({elapsed:?})"
    );
}

// Extra coverage beyond the numbered criteria: the composed round trip and
// the oracle's budget-adequacy regression.

#[test]
fn round_trip_g2_through_converse_and_pipeline() {
    let conv = tree_to_word(&fixtures::g2()).unwrap();
    assert!(is_word_grammar(&conv));
    let back = pipeline(&conv).unwrap().output;
    let report = compare_word_slices(
        &back,
        LangKind::LeafEpsilon,
        &fixtures::g2(),
        LangKind::LeafEpsilon,
        &OracleParams::default(),
    );
    assert_eq!(report.verdict, Verdict::Pass, "{report}");
}

#[test]
fn doubling_budget_hi_never_flips_pass_to_fail() {
    let params = OracleParams::default();
    let doubled = OracleParams {
        budget_hi: params.budget_hi * 2,
        ..params
    };
    let cases: Vec<(Grammar, LangKind, Grammar, LangKind)> = vec![
        (
            fixtures::g1(),
            LangKind::Word,
            fixtures::g2(),
            LangKind::LeafEpsilon,
        ),
        (
            fixtures::g1(),
            LangKind::Word,
            pipeline(&fixtures::g1()).unwrap().output,
            LangKind::LeafEpsilon,
        ),
        (
            fixtures::s_e(),
            LangKind::Word,
            pipeline(&fixtures::s_e()).unwrap().output,
            LangKind::LeafEpsilon,
        ),
    ];
    for (ga, ka, gb, kb) in cases {
        let r1 = compare_word_slices(&ga, ka, &gb, kb, &params);
        let r2 = compare_word_slices(&ga, ka, &gb, kb, &doubled);
        if r1.verdict == Verdict::Pass {
            assert_eq!(r2.verdict, Verdict::Pass, "{r2}");
        }
    }
}
