use std::collections::BTreeSet;

use lob_core::validate::validate_bundle;
use lob_core::{Production, Value};
use lob_dsl::generate::{productions_used, random_bundle, vocabulary_table, GenConfig};
use lob_dsl::{format_source, parse, parse_document, print_bundle, serialize, SourceText};
use proptest::prelude::*;

fn golden() -> SourceText {
    SourceText::new("records.lob", include_str!("data/records.lob"))
}

#[test]
fn golden_file_parses_and_validates() {
    let b = parse_document(&golden(), &vocabulary_table()).unwrap();
    assert_eq!(b.operators.len(), 2);
    assert_eq!(b.webs[0].layouts.len(), 2);
    assert_eq!(b.controls.len(), 2);
    assert_eq!(b.annotations.len(), 2);
    assert_eq!(b.states[0].entries["scores"].as_list().map(<[Value]>::len), Some(3));
}

#[test]
fn golden_file_is_stable_under_formatting() {
    let once = format_source(&golden()).unwrap();
    let twice = format_source(&SourceText::new("x", once.clone())).unwrap();
    assert_eq!(once, twice);
    assert!(!once.contains('#'), "comments are dropped");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_bundles_round_trip(seed in any::<u64>()) {
        let table = vocabulary_table();
        let bundle = random_bundle(seed, GenConfig::default());
        let report = validate_bundle(&bundle, &table);
        prop_assert!(report.is_empty(), "generator produced an invalid bundle:\n{report}");
        let text = serialize(&bundle, &table).unwrap();
        let back = parse_document(&text, &table);
        prop_assert!(back.is_ok(), "{:?}\n{}", back.err(), text.text);
        prop_assert_eq!(back.unwrap(), bundle);
    }

    #[test]
    fn printing_is_idempotent(seed in any::<u64>()) {
        let first = print_bundle(&random_bundle(seed, GenConfig::default()));
        let second = print_bundle(&parse(&first).bundle);
        prop_assert_eq!(first, second);
    }

    #[test]
    fn parsing_is_total_over_arbitrary_text(src in "\\PC{0,200}") {
        let _ = parse(&src);
    }

    #[test]
    fn parsing_is_total_over_mutated_sources(seed in any::<u64>(), cut in any::<prop::sample::Index>(), junk in "[(){}\\[\\]\"=,.*?/:# a-z0-9\\n-]{0,12}") {
        let text = print_bundle(&random_bundle(seed, GenConfig::default()));
        let mut at = cut.index(text.len() + 1);
        while !text.is_char_boundary(at) {
            at -= 1;
        }
        let mutated = format!("{}{}{}", &text[..at], junk, &text[at..]);
        let parsed = parse(&mutated);
        for d in &parsed.diagnostics {
            prop_assert!(d.line >= 1 && d.column >= 1);
        }
    }
}

#[test]
fn generator_covers_every_production() {
    let mut seen = BTreeSet::new();
    for seed in 0..200 {
        seen.extend(productions_used(&random_bundle(seed, GenConfig::default())));
    }
    let missing: Vec<_> = Production::ALL.iter().filter(|p| !seen.contains(p)).collect();
    assert!(missing.is_empty(), "never generated: {missing:?}");
}

#[test]
fn invalid_utf8_is_a_diagnostic() {
    let err = lob_dsl::parse_bytes("bad", b"operand x = 1\n\xff", &vocabulary_table()).unwrap_err();
    assert_eq!((err[0].line, err[0].column), (2, 1));
}
