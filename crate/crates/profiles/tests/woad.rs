use std::collections::BTreeMap;
use std::sync::Arc;

use lob_core::{Coordinates, Ident, Selector, StateRef, TargetKind, TypeTag, Value};
use lob_dsl::{parse_document, print_bundle, SourceText};
use lob_engine::TraceEvent;
use lob_profiles::woad::{self, replay_history, DatomRegistry, Document, FillEvent, Template, WoadError};
use lob_profiles::TickClock;
use proptest::prelude::*;

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

fn at(x: f64, y: f64) -> Coordinates {
    Coordinates { x, y }
}

fn entry(scope: &str, name: &str) -> Selector {
    Selector::Entry(StateRef::scoped(id(scope), id(name)))
}

fn text(s: &str) -> Selector {
    Selector::Constant(Value::text(s))
}

const PERSON: &str = include_str!("../../../scenarios/person-name.lob");

/// The person form plus any extra mechanisms, as datoms, its template and mechanisms.
fn person(extra: &str) -> (Arc<DatomRegistry>, Template, Vec<lob_core::bundle::MechanismDecl>) {
    let src = SourceText::new("person", format!("{PERSON}\n{extra}"));
    let bundle = parse_document(&src, &lob_profiles::registry()).unwrap();
    let (datoms, mut templates, mechanisms) = woad::from_bundle(&bundle).unwrap();
    assert_eq!(templates.len(), 1);
    (Arc::new(datoms), templates.remove(0), mechanisms)
}

fn open(extra: &str) -> Document {
    let (datoms, template, mechanisms) = person(extra);
    Document::open(template, datoms, &mechanisms, Arc::new(TickClock::default())).unwrap()
}

fn firings_of<'a>(trace: &'a [TraceEvent], rule: &'a str) -> impl Iterator<Item = &'a lob_engine::Firing> + 'a {
    trace.iter().filter_map(move |e| match e {
        TraceEvent::Fired(f) if f.rule == rule => Some(f),
        _ => None,
    })
}

#[test]
fn composites_need_two_children_and_disjoint_leaves() {
    let mut d = DatomRegistry::new();
    d.define(id("a"), TypeTag::Text).unwrap();
    d.define(id("b"), TypeTag::Text).unwrap();
    assert!(matches!(d.define(id("a"), TypeTag::Integer), Err(WoadError::DuplicateDatom(_))));
    assert!(matches!(d.compose(id("one"), vec![id("a")]), Err(WoadError::TooFewChildren(_))));
    assert!(matches!(d.compose(id("twice"), vec![id("a"), id("a")]), Err(WoadError::SharedLeaf { .. })));
    assert!(matches!(d.compose(id("ghost"), vec![id("a"), id("zz")]), Err(WoadError::UnknownDatom(_))));
    d.compose(id("ab"), vec![id("a"), id("b")]).unwrap();
    assert_eq!(d.get("ab").unwrap().ty, TypeTag::Record);
    assert_eq!(d.leaves("ab").unwrap(), vec![id("a"), id("b")]);
}

#[test]
fn template_keeps_placements_unchanged() {
    let (datoms, ..) = person("");
    let t = Template::new(id("card"), vec![(id("person-name"), at(10.0, 20.0)), (id("birth-date"), at(10.0, 40.0))], &datoms).unwrap();
    assert_eq!(t.didgets.len(), 2);
    assert_eq!(t.placement("person-name"), Some(at(10.0, 20.0)));
    assert_eq!(t.placement("birth-date"), Some(at(10.0, 40.0)));
    assert_eq!(t.placement("status"), None);
    let odd = Template::new(id("odd"), vec![(id("status"), at(-3.25e7, 1e-9))], &datoms).unwrap();
    assert_eq!(odd.placement("status"), Some(at(-3.25e7, 1e-9)));
}

#[test]
fn template_errors() {
    let (datoms, ..) = person("");
    assert!(matches!(Template::new(id("t"), vec![], &datoms), Err(WoadError::EmptyTemplate(_))));
    let twice = vec![(id("status"), at(0.0, 0.0)), (id("status"), at(1.0, 1.0))];
    assert!(matches!(Template::new(id("t"), twice, &datoms), Err(WoadError::SharedLeaf { .. })));
    // A composite and one of its own leaves overlap too.
    let overlap = vec![(id("person-name"), at(0.0, 0.0)), (id("first-name"), at(1.0, 1.0))];
    assert!(matches!(Template::new(id("t"), overlap, &datoms), Err(WoadError::SharedLeaf { .. })));
    assert!(matches!(Template::new(id("t"), vec![(id("status"), at(f64::NAN, 0.0))], &datoms), Err(WoadError::NonFiniteCoordinates)));
    assert!(matches!(Template::new(id("t"), vec![(id("nope"), at(0.0, 0.0))], &datoms), Err(WoadError::UnknownDatom(_))));
}

#[test]
fn opening_localizes_every_didget() {
    let doc = open("");
    let layout = doc.state().scope("layout").unwrap();
    assert_eq!(layout.len(), 4);
    let rec = layout.get("person-name").unwrap().as_record().unwrap();
    assert_eq!(rec.get("x"), Some(&Value::Decimal(10.0)));
    assert_eq!(rec.get("y"), Some(&Value::Decimal(20.0)));
}

#[test]
fn fill_rejects_mismatch_and_unknown_didgets() {
    let mut d = DatomRegistry::new();
    d.define(id("age"), TypeTag::Integer).unwrap();
    d.define(id("weight"), TypeTag::Decimal).unwrap();
    let t = Template::new(id("card"), vec![(id("age"), at(0.0, 0.0)), (id("weight"), at(0.0, 10.0))], &d).unwrap();
    let mut doc = Document::open(t, Arc::new(d), &[], Arc::new(TickClock::default())).unwrap();
    let err = doc.fill("age", Value::text("forty"), "ada").unwrap_err();
    assert!(matches!(err, WoadError::TypeMismatch { expected: TypeTag::Integer, found: TypeTag::Text, .. }), "{err}");
    assert!(matches!(doc.fill("height", Value::Integer(1), "ada"), Err(WoadError::UnknownDidget { .. })));
    assert!(doc.history().is_empty());
    // Integers widen into decimal areas.
    doc.fill("weight", Value::Integer(70), "ada").unwrap();
    assert_eq!(doc.value("weight"), Some(Value::Decimal(70.0)));
}

#[test]
fn fill_into_composite_leaves_only() {
    let mut doc = open("");
    assert!(matches!(doc.fill("person-name", Value::text("Ada Lovelace"), "ada"), Err(WoadError::UnknownDidget { .. })));
    doc.fill("first-name", Value::text("Ada"), "ada").unwrap();
    doc.fill("family-name", Value::text("Lovelace"), "ada").unwrap();
    let expected = Value::Record(BTreeMap::from([(id("first-name"), Value::text("Ada")), (id("family-name"), Value::text("Lovelace"))]));
    assert_eq!(doc.value("person-name"), Some(expected));
}

/// Five fills; the provisional status fires the style rule once and leaves values alone.
fn five_fills(doc: &mut Document) {
    doc.fill("first-name", Value::text("Ada"), "ada").unwrap();
    doc.fill("family-name", Value::text("Lovelace"), "ada").unwrap();
    doc.fill("birth-date", Value::text("1815-12-10"), "bo").unwrap();
    doc.fill("status", Value::text("provisional"), "bo").unwrap();
    doc.fill("notes", Value::text("check the spelling"), "ada").unwrap();
}

#[test]
fn provisional_status_is_highlighted_once() {
    let mut doc = open("");
    five_fills(&mut doc);
    assert_eq!(doc.history().len(), 5);
    assert_eq!(replay_history(doc.history()), doc.values());
    assert_eq!(firings_of(doc.trace(), "flag-provisional").count(), 1);
    assert_eq!(doc.style("status"), vec!["highlight".to_string()]);
    assert_eq!(doc.values().get("status"), Some(&Value::text("provisional")));
    assert!(doc.style("notes").is_empty());
}

#[test]
fn non_provisional_status_fires_nothing() {
    let mut doc = open("");
    let out = doc.fill("status", Value::text("final"), "ada").unwrap();
    assert_eq!(out.firings().count(), 0);
    assert!(doc.styles().is_empty());
}

#[test]
fn identical_fills_give_identical_documents() {
    let (mut a, mut b) = (open(""), open(""));
    five_fills(&mut a);
    five_fills(&mut b);
    assert_eq!(a.history(), b.history());
    assert_eq!(a.trace(), b.trace());
    assert_eq!(a.styles(), b.styles());
    assert_eq!(a.snapshot(), b.snapshot());
}

#[test]
fn style_actions_never_touch_values() {
    let mut doc = open("");
    five_fills(&mut doc);
    let before = doc.values();
    doc.act("style", &[entry("doc", "status"), text("color(red)")], "ada").unwrap();
    doc.act("style", &[entry("doc", "notes"), text("strike")], "ada").unwrap();
    assert_eq!(doc.values(), before);
    assert_eq!(doc.style("status"), vec!["highlight".to_string(), "color(red)".to_string()]);
    assert!(doc.act("style", &[entry("doc", "notes"), text("blink")], "ada").is_err());
    assert_eq!(doc.values(), before);
}

#[test]
fn mechanism_writes_enter_history() {
    let mut doc = open(
        "mechanism defaults on person-form
  rule default-notes
    when
      is-in(doc.status, [\"provisional\"])
    then
      put(doc.notes, \"pending review\")
  end
end",
    );
    let out = doc.fill("status", Value::text("provisional"), "ada").unwrap();
    assert_eq!(out.events.len(), 2);
    assert_eq!(out.events[1].author, "mechanism/default-notes");
    assert_eq!(replay_history(doc.history()), doc.values());
}

#[test]
fn failed_mechanism_rolls_the_fill_back() {
    // The action writes text into an integer area, so the run fails after the fill.
    let mut d = DatomRegistry::new();
    d.define(id("code"), TypeTag::Text).unwrap();
    d.define(id("score"), TypeTag::Integer).unwrap();
    let t = Template::new(id("card"), vec![(id("code"), at(0.0, 0.0)), (id("score"), at(0.0, 10.0))], &d).unwrap();
    let src = "mechanism bad on card
  rule clobber
    when
      eq(doc.code, \"x\")
    then
      write(doc.score, \"high\")
  end
end";
    let parsed = lob_dsl::parse(src);
    assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
    let mut doc = Document::open(t, Arc::new(d), &parsed.bundle.mechanisms, Arc::new(TickClock::default())).unwrap();
    let before = doc.snapshot();
    assert!(doc.fill("code", Value::text("x"), "ada").is_err());
    assert_eq!(doc.snapshot(), before);
}

#[test]
fn mechanisms_must_read_their_own_template() {
    let (datoms, template, _) = person("");
    let foreign = lob_dsl::parse(
        "mechanism peek on person-form
  rule r
    when
      eq(app.other, 1)
    then
      style(doc.status, \"highlight\")
  end
end",
    );
    let err = Document::open(template.clone(), datoms.clone(), &foreign.bundle.mechanisms, Arc::new(TickClock::default())).unwrap_err();
    assert!(matches!(err, WoadError::ForeignRead { .. }), "{err}");
    let elsewhere = lob_dsl::parse(
        "mechanism m on other-form
  rule r
    when
    then
      style(doc.status, \"highlight\")
  end
end",
    );
    let err = Document::open(template, datoms, &elsewhere.bundle.mechanisms, Arc::new(TickClock::default())).unwrap_err();
    assert!(matches!(err, WoadError::WrongTemplate { .. }), "{err}");
}

#[test]
fn officialized_values_refuse_correction() {
    let mut doc = open("");
    doc.fill("status", Value::text("provisional"), "ada").unwrap();
    doc.act("correct", &[entry("doc", "status"), text("final")], "bo").unwrap();
    assert_eq!(doc.value("status"), Some(Value::text("final")));
    let corrections = doc.state().scope_values("corrections");
    assert_eq!(corrections.len(), 1);
    assert_eq!(corrections[0].as_record().unwrap().get("old"), Some(&Value::text("provisional")));

    doc.act("officialize", &[Selector::Scope(id("doc"))], "bo").unwrap();
    let err = doc.act("correct", &[entry("doc", "status"), text("draft")], "bo").unwrap_err();
    assert!(err.to_string().contains("officialized"), "{err}");
    assert_eq!(doc.value("status"), Some(Value::text("final")));
    // Officializing does not stop plain writes.
    doc.act("write", &[entry("doc", "notes"), text("ok")], "bo").unwrap();
}

#[test]
fn protected_values_refuse_writes_and_fills() {
    let mut doc = open("");
    doc.fill("notes", Value::text("first"), "ada").unwrap();
    doc.act("protect", &[entry("doc", "notes")], "ada").unwrap();
    assert!(matches!(doc.fill("notes", Value::text("second"), "bo"), Err(WoadError::Protected(_))));
    for (op, args) in [
        ("write", vec![entry("doc", "notes"), text("x")]),
        ("copy", vec![entry("doc", "status"), entry("doc", "notes")]),
        ("delete", vec![entry("doc", "notes")]),
    ] {
        assert!(doc.act(op, &args, "bo").is_err(), "{op}");
    }
    assert_eq!(doc.value("notes"), Some(Value::text("first")));
    // Other areas stay writable.
    doc.fill("status", Value::text("final"), "bo").unwrap();
}

#[test]
fn count_over_a_filled_composite() {
    let mut d = DatomRegistry::new();
    for leaf in ["street", "city", "zip", "country"] {
        d.define(id(leaf), TypeTag::Text).unwrap();
    }
    d.compose(id("address"), vec![id("street"), id("city"), id("zip"), id("country")]).unwrap();
    let t = Template::new(id("card"), vec![(id("address"), at(0.0, 0.0))], &d).unwrap();
    let mut doc = Document::open(t, Arc::new(d), &[], Arc::new(TickClock::default())).unwrap();
    doc.fill("street", Value::text("1 Main St"), "ada").unwrap();
    doc.fill("city", Value::text("Milan"), "ada").unwrap();
    assert_eq!(doc.count("address").unwrap(), 2);
    doc.fill("zip", Value::text("20100"), "ada").unwrap();
    doc.fill("country", Value::text("IT"), "ada").unwrap();
    doc.act("count", &[entry("doc", "address"), entry("tally", "address")], "ada").unwrap();
    assert_eq!(doc.state().lookup("tally", "address"), Some(&Value::Integer(4)));
    assert_eq!(doc.count("address").unwrap(), 4);
}

#[test]
fn save_retrieve_store_and_create() {
    let mut doc = open("");
    doc.fill("notes", Value::text("v1"), "ada").unwrap();
    doc.act("save", &[entry("doc", "notes")], "ada").unwrap();
    doc.fill("notes", Value::text("v2"), "ada").unwrap();
    doc.act("store", &[entry("doc", "notes")], "ada").unwrap();
    doc.act("retrieve", &[entry("doc", "notes")], "ada").unwrap();
    assert_eq!(doc.value("notes"), Some(Value::text("v1")));
    let archive = doc.state().scope_values("archive");
    assert_eq!(archive.len(), 1);
    assert_eq!(archive[0].as_record().unwrap().get("value"), Some(&Value::text("v2")));
    assert!(doc.act("create", &[entry("doc", "notes"), text("again")], "ada").is_err());
    doc.act("create", &[entry("doc", "status"), text("draft")], "ada").unwrap();
    doc.act("open-read", &[entry("doc", "status")], "ada").unwrap();
    assert_eq!(doc.state().lookup("read", "status"), Some(&Value::text("draft")));
    assert!(doc.act("write", &[entry("doc", "unknown-area"), text("x")], "ada").is_err());
    doc.act("select", &[entry("doc", "status"), entry("picked", "status")], "ada").unwrap();
    assert_eq!(doc.state().lookup("picked", "status"), Some(&Value::List(vec![Value::text("draft")])));
    assert_eq!(replay_history(doc.history()), doc.values());
}

#[test]
fn annotate_targets_one_didget() {
    let mut doc = open("");
    let note = doc.annotate("status", Value::text("double-check this"), "ada").unwrap();
    let a = doc.annotations().get(note.as_str()).unwrap();
    assert_eq!(a.targets.len(), 1);
    assert_eq!(a.targets[0].kind, TargetKind::TopologicalObject);
    assert_eq!(a.targets[0].path, vec!["person-form".to_string(), "status".to_string()]);
    assert_eq!(a.author, "ada");
    let reply = doc.reply(note.as_str(), Value::text("done"), "bo").unwrap();
    let r = doc.annotations().get(reply.as_str()).unwrap();
    assert_eq!(r.targets[0].annotation_id(), Some(note.as_str()));
    assert!(doc.annotate("nowhere", Value::text("x"), "ada").is_err());
    assert!(doc.values().is_empty());
}

#[test]
fn trace_only_operators_leave_markers() {
    let mut doc = open(
        "mechanism outbound on person-form
  rule send-final
    when
      is-in(doc.status, [\"final\"])
    then
      print(doc.status)
      transmit(doc.status)
  end
end",
    );
    doc.fill("status", Value::text("final"), "ada").unwrap();
    let fired: Vec<_> = firings_of(doc.trace(), "send-final").collect();
    assert_eq!(fired.len(), 1);
    assert_eq!(fired[0].markers, vec!["print doc.status".to_string(), "transmit doc.status".to_string()]);
    assert_eq!(doc.state().scope_values("markers").len(), 2);
    for op in ["attach", "cache"] {
        doc.act(op, &[entry("doc", "status")], "ada").unwrap();
    }
    assert_eq!(doc.state().scope_values("markers").len(), 4);
    assert_eq!(doc.values().len(), 1);
}

#[test]
fn every_suite_operator_is_registered() {
    let doc = open("");
    for op in woad::ACTIONAL_SUITE.iter().chain(woad::TRACE_ONLY.iter()) {
        let sig = lob_core::ConstructLookup::signature(doc.registry(), op).unwrap_or_else(|| panic!("{op}"));
        assert_eq!(sig.kind, lob_core::OperatorKind::Actional, "{op}");
    }
}

#[test]
fn bundle_round_trips_through_text() {
    let (datoms, template, mechanisms) = person("");
    let bundle = woad::to_bundle(&datoms, &template, &mechanisms).unwrap();
    let text = print_bundle(&bundle);
    let back = parse_document(&SourceText::new("rt", text), &lob_profiles::registry()).unwrap();
    assert_eq!(back, bundle);
    let (d2, t2, m2) = woad::from_bundle(&back).unwrap();
    assert_eq!(d2, *datoms);
    assert_eq!(t2, vec![template]);
    assert_eq!(m2, mechanisms);
}

#[test]
fn snapshot_restores_an_equivalent_document() {
    let (datoms, template, mechanisms) = person("");
    let mut doc = Document::open(template.clone(), datoms.clone(), &mechanisms, Arc::new(TickClock::default())).unwrap();
    five_fills(&mut doc);
    doc.annotate("notes", Value::text("why?"), "bo").unwrap();
    let json = serde_json::to_string(&doc.snapshot()).unwrap();
    let snap = serde_json::from_str(&json).unwrap();
    let mut back = Document::restore(snap, template, datoms, &mechanisms, Arc::new(TickClock::default())).unwrap();
    assert_eq!(back.snapshot(), doc.snapshot());
    // Refraction survives: re-filling the same status does not restyle.
    back.fill("status", Value::text("provisional"), "bo").unwrap();
    assert_eq!(firings_of(back.trace(), "flag-provisional").count(), 1);
}

#[test]
fn history_lines_round_trip() {
    let mut doc = open("");
    five_fills(&mut doc);
    doc.act("delete", &[entry("doc", "notes")], "ada").unwrap();
    for e in doc.history() {
        let line = e.to_line();
        assert_eq!(line.split('\t').count(), 5);
        assert_eq!(FillEvent::from_line(&line).unwrap(), *e);
    }
    assert_eq!(doc.history().last().unwrap().new, None);
    assert!(FillEvent::from_line("too\tfew").is_err());
}

/// Leaves grouped into nested composites: each group of at least two becomes one
/// composite, and the groups are then composed once more when there are two or more.
fn nest(d: &mut DatomRegistry, leaves: usize, group: usize) -> Ident {
    let names: Vec<Ident> = (0..leaves).map(|i| id(&format!("leaf-{i}"))).collect();
    for n in &names {
        d.define(n.clone(), TypeTag::Integer).unwrap();
    }
    let mut parts = Vec::new();
    for (g, chunk) in names.chunks(group).enumerate() {
        if chunk.len() >= 2 {
            let name = id(&format!("group-{g}"));
            d.compose(name.clone(), chunk.to_vec()).unwrap();
            parts.push(name);
        } else {
            parts.extend(chunk.iter().cloned());
        }
    }
    if parts.len() >= 2 {
        d.compose(id("top"), parts).unwrap();
        id("top")
    } else {
        parts.remove(0)
    }
}

proptest! {
    #[test]
    fn composites_contribute_exactly_their_leaves(leaves in 2usize..12, group in 2usize..5, filled in proptest::collection::vec(any::<bool>(), 12)) {
        let mut d = DatomRegistry::new();
        let top = nest(&mut d, leaves, group);
        let expected: Vec<Ident> = (0..leaves).map(|i| id(&format!("leaf-{i}"))).collect();
        prop_assert_eq!(d.leaves(top.as_str()).unwrap(), expected.clone());
        let t = Template::new(id("card"), vec![(top.clone(), at(0.0, 0.0))], &d).unwrap();
        prop_assert_eq!(t.leaves(&d).unwrap(), expected.clone());
        let mut doc = Document::open(t, Arc::new(d), &[], Arc::new(TickClock::default())).unwrap();
        let mut want = BTreeMap::new();
        for (i, leaf) in expected.iter().enumerate() {
            if filled[i] {
                doc.fill(leaf.as_str(), Value::Integer(i as i64), "ada").unwrap();
                want.insert(leaf.clone(), Value::Integer(i as i64));
            }
        }
        prop_assert_eq!(doc.count(top.as_str()).unwrap(), want.len());
        prop_assert_eq!(doc.values(), want.clone());
        prop_assert_eq!(replay_history(doc.history()), want);
    }

    #[test]
    fn replay_matches_values_for_any_fill_sequence(ops in proptest::collection::vec((0usize..4, 0i64..3, any::<bool>()), 1..25)) {
        let mut doc = open("");
        let areas = ["first-name", "birth-date", "status", "notes"];
        for (area, v, delete) in ops {
            if delete {
                let _ = doc.act("delete", &[entry("doc", areas[area])], "ada");
            } else {
                doc.fill(areas[area], Value::Text(format!("v{v}")), "ada").unwrap();
            }
        }
        prop_assert_eq!(replay_history(doc.history()), doc.values());
    }
}
