//! One rejected source per production; each must produce a diagnostic naming it.

use lob_core::Production;
use lob_dsl::generate::vocabulary_table;
use lob_dsl::{parse_document, Diagnostic, SourceText};

fn rejects(src: &str) -> Vec<Diagnostic> {
    parse_document(&SourceText::new("t.lob", src), &vocabulary_table()).expect_err("source should be rejected")
}

fn assert_names(src: &str, production: Production) {
    let diags = rejects(src);
    assert!(diags.iter().any(|d| d.production == production), "expected a {production} diagnostic for:\n{src}\ngot: {diags:#?}");
}

const RULE: &str = "rule r\n  when\n  then\n    put(a, 1)\nend\n";

#[test]
fn web_structure() {
    assert_names("web w\nend\n", Production::WebStructure);
}

#[test]
fn layout_structure() {
    assert_names("web w\n  layout l\n  end\nend\n", Production::LayoutStructure);
}

#[test]
fn topological_object() {
    assert_names("web w\n  layout l\n    \"x\" at (1.0, )\n  end\nend\n", Production::TopologicalObject);
}

#[test]
fn operand_construct() {
    assert_names("operand n = add(x, 1)\n", Production::OperandConstruct);
}

#[test]
fn operator_construct() {
    assert_names("operator f(a: integer) does\nend\n", Production::OperatorConstruct);
}

#[test]
fn annotation() {
    assert_names("annotation a by \"x\" at \"yesterday\"\n  note 1\n  target ref(annotation b)\nend\n", Production::Annotation);
}

#[test]
fn target_ref() {
    assert_names("annotation a by \"x\" at \"2026-01-01T00:00:00Z\"\n  note 1\n  target nope(annotation b)\nend\n", Production::TargetRef);
}

#[test]
fn constant() {
    assert_names("operand n = [1, ]\n", Production::Constant);
}

#[test]
fn target() {
    assert_names("annotation a by \"x\" at \"2026-01-01T00:00:00Z\"\n  note 1\n  target ref(widget b)\nend\n", Production::Target);
}

#[test]
fn style() {
    assert_names("annotation a by \"x\" at \"2026-01-01T00:00:00Z\"\n  style glitter\n  target ref(annotation b)\nend\n", Production::Style);
}

#[test]
fn control_structure() {
    assert_names(&format!("connector or\n{RULE}{RULE}end\n"), Production::ControlStructure);
}

#[test]
fn connector() {
    assert_names("connector nand\nend\n", Production::Connector);
}

#[test]
fn rewriting_rule() {
    assert_names("rule r\n  when\nend\n", Production::RewritingRule);
}

#[test]
fn condition() {
    assert_names("rule r\n  when\n    put(a, 1)\n  then\n    put(a, 2)\nend\n", Production::Condition);
}

#[test]
fn action() {
    assert_names("rule r\n  when\n  then\n    not(a)\nend\n", Production::Action);
}

#[test]
fn state() {
    assert_names("state s\n  x = 1\n  x = 2\nend\n", Production::State);
}

#[test]
fn diagnostics_point_at_the_offending_item() {
    let diags = rejects("operand ok = 1\n\nweb w\nend\n");
    assert_eq!((diags[0].line, diags[0].column), (3, 1));
}

#[test]
fn every_error_is_reported_after_recovery() {
    let diags = rejects("operand a = add(x, 1)\noperand b = [1, ]\nweb w\n  layout l\n    ??\n  end\nend\n");
    let lines: Vec<_> = diags.iter().map(|d| d.line).collect();
    assert_eq!(lines, [1, 2, 5]);
}
