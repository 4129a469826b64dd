use std::collections::BTreeMap;

use lob_core::bundle::{ArcDecl, ComponentDecl, ComponentKind};
use lob_core::{Bundle, Ident, Value};
use lob_dsl::{parse_document, print_bundle, SourceText};
use lob_engine::Registry;
use lob_profiles::flow::{self, export_rows, FlowError, FlowRecord, Workspace, DATA, NEW_DATA};
use proptest::prelude::*;

fn id(s: &str) -> Ident {
    Ident::new(s).unwrap()
}

const PIPELINE: &str = include_str!("../../../scenarios/filter-pipeline.lob");

/// Predicates the tests wire in, defined in the textual syntax.
const PREDICATES: &str = "
operator even-key(r: record) -> boolean = eq(mod(field(r, \"key\"), 2), 0)
operator big-key(r: record) -> boolean = gt(field(r, \"key\"), 50)
operator small-list(xs: list) -> boolean = lt(size(xs), 3)
";

fn registry_with(src: &str) -> (Registry, Bundle) {
    let bundle = parse_document(&SourceText::new("test", src), &lob_profiles::registry()).unwrap();
    let mut r = flow::registry();
    r.register_bundle(&bundle).unwrap();
    (r, bundle)
}

fn load(src: &str) -> Workspace {
    let (r, bundle) = registry_with(src);
    Workspace::from_decl(&bundle.workspaces[0], &bundle.components, r).unwrap()
}

fn component(name: &str, kind: ComponentKind) -> ComponentDecl {
    ComponentDecl { id: id(name), kind, subscriptions: vec![], accepts: vec![], predicate: None, records: vec![], behavior: vec![] }
}

fn filter(name: &str, predicate: &str) -> ComponentDecl {
    ComponentDecl { predicate: Some(id(predicate)), ..component(name, ComponentKind::Filter) }
}

fn source(name: &str, records: Vec<Value>) -> ComponentDecl {
    ComponentDecl { records, ..component(name, ComponentKind::Source) }
}

fn row(key: i64) -> Value {
    Value::Record(BTreeMap::from([(id("key"), Value::Integer(key)), (id("name"), Value::Text(format!("item-{key}")))]))
}

fn key_of(v: &Value) -> i64 {
    v.as_record().unwrap()["key"].as_integer().unwrap()
}

fn parallel(from: &str, to: &str) -> ArcDecl {
    ArcDecl::Parallel { from: id(from), to: id(to) }
}

fn empty() -> Workspace {
    Workspace::new(id("w"), registry_with(PREDICATES).0)
}

#[test]
fn subscribing_twice_keeps_one_subscription() {
    let mut w = empty();
    w.add_component(component("table", ComponentKind::Viewer)).unwrap();
    w.subscribe("table", id(DATA)).unwrap();
    w.subscribe("table", id(DATA)).unwrap();
    assert_eq!(w.subscriptions().len(), 1);
    assert!(matches!(w.subscribe("ghost", id(DATA)), Err(FlowError::UnknownComponent(_))));
    assert!(matches!(w.publish("ghost", id(DATA), Value::List(vec![])), Err(FlowError::UnknownComponent(_))));
}

#[test]
fn unheard_events_are_dropped_and_recorded() {
    let mut w = empty();
    w.add_component(source("feed", vec![row(1)])).unwrap();
    let p = w.propagate();
    assert_eq!(p.records.len(), 2);
    assert!(matches!(p.records[1], FlowRecord::Dropped { seq: 1 }));
    assert_eq!(p.records[1].to_line(), "X\t1");
    assert!(w.data_view().is_empty());
}

#[test]
fn no_components_no_view() {
    let mut w = empty();
    let p = w.propagate();
    assert!(p.records.is_empty());
    assert!(w.data_view().is_empty());
}

#[test]
fn fan_out_reaches_every_subscriber() {
    let mut w = empty();
    w.add_component(source("feed", vec![row(1), row(2)])).unwrap();
    for v in ["t1", "t2", "t3"] {
        w.add_component(component(v, ComponentKind::Viewer)).unwrap();
        w.subscribe(v, id(DATA)).unwrap();
    }
    let p = w.propagate();
    assert_eq!(p.deliveries().count(), 3);
    assert_eq!(w.data_view().len(), 3);
    // Wiring and subscribing to the same viewer still delivers once.
    w.wire(parallel("feed", "t1")).unwrap();
    let p = w.propagate();
    let to_t1 = p.deliveries().filter(|(_, to)| *to == "t1").count();
    assert_eq!(to_t1, 1);
}

#[test]
fn five_records_through_an_even_filter() {
    let mut w = load(PIPELINE);
    let p = w.propagate();
    assert!(!p.capped);
    let shown = w.data_view()["table"].as_list().unwrap().to_vec();
    assert_eq!(shown.iter().map(key_of).collect::<Vec<_>>(), vec![2, 4]);
    assert_eq!(p.updates().len(), 1);
    let lines = export_rows(&w.data_view()["table"]);
    assert_eq!(lines, "{\"key\":2,\"name\":\"birch\"}\n{\"key\":4,\"name\":\"elm\"}\n");
    let trace: Vec<String> = p.records.iter().map(FlowRecord::to_line).collect();
    assert_eq!(trace[0].split('\t').take(3).collect::<Vec<_>>(), vec!["P", "1", "catalog"]);
    assert!(trace.contains(&"V\ttable\t2".to_string()));
}

/// The viewer shows what applying the predicate to the source directly gives.
fn pipeline(records: Vec<Value>) -> Workspace {
    let mut w = empty();
    w.add_component(source("feed", records)).unwrap();
    w.add_component(filter("pick", "even-key")).unwrap();
    w.add_component(component("table", ComponentKind::Viewer)).unwrap();
    w.wire(parallel("feed", "pick")).unwrap();
    w.wire(parallel("pick", "table")).unwrap();
    w
}

#[test]
fn hundred_records_match_direct_filtering() {
    let records: Vec<Value> = (0..100).map(|k| row((k * 37) % 101)).collect();
    let direct: Vec<Value> = records.iter().filter(|r| key_of(r) % 2 == 0).cloned().collect();
    let mut w = pipeline(records);
    w.propagate();
    assert_eq!(w.data_view()["table"], Value::List(direct));
}

#[test]
fn replacing_a_filter_reflows_once() {
    let records: Vec<Value> = (0..100).map(row).collect();
    let mut w = pipeline(records.clone());
    w.propagate();
    let p = w.replace_filter("pick", filter("pick-big", "big-key")).unwrap();
    assert_eq!(p.updates(), vec![&id("table")]);
    let sources_resent = p.published().filter(|e| e.emitter == "feed").count();
    assert_eq!(sources_resent, 1);
    let direct: Vec<Value> = records.iter().filter(|r| key_of(r) > 50).cloned().collect();
    assert_eq!(w.data_view()["table"], Value::List(direct));
    assert!(w.component("pick").is_none());
    assert!(w.arcs().contains(&parallel("feed", "pick-big")));
    assert!(matches!(w.replace_filter("feed", filter("x", "even-key")), Err(FlowError::NotAFilter(_))));
    assert!(matches!(w.replace_filter("pick-big", filter("y", "no-such-op")), Err(FlowError::NotAPredicate(_))));
    assert!(w.component("pick-big").is_some());
}

#[test]
fn parallel_split_updates_both_viewers() {
    let mut w = empty();
    w.add_component(source("feed", vec![row(1)])).unwrap();
    w.add_component(component("left", ComponentKind::Viewer)).unwrap();
    w.add_component(component("right", ComponentKind::Viewer)).unwrap();
    w.wire(parallel("feed", "left")).unwrap();
    w.wire(parallel("feed", "right")).unwrap();
    let p = w.propagate();
    assert_eq!(p.updates(), vec![&id("left"), &id("right")]);
}

#[test]
fn alternative_split_picks_exactly_one_branch() {
    let mut w = empty();
    w.add_component(component("short", ComponentKind::Viewer)).unwrap();
    w.add_component(component("long", ComponentKind::Viewer)).unwrap();
    w.add_component(source("feed", vec![])).unwrap();
    w.wire(ArcDecl::Alternative { from: id("feed"), selector: Some(id("small-list")), when_true: id("short"), when_false: id("long") }).unwrap();
    for n in 0..6 {
        let payload = Value::List((0..n).map(row).collect());
        let seq = w.publish("feed", id(DATA), payload).unwrap();
        let p = w.drain();
        let hits: Vec<&Ident> = p.deliveries().filter(|(s, _)| *s == seq).map(|(_, to)| to).collect();
        let expected = if n < 3 { "short" } else { "long" };
        assert_eq!(hits, vec![&id(expected)], "{n} rows");
    }
}

#[test]
fn wiring_is_checked_when_made() {
    let mut w = empty();
    w.add_component(source("feed", vec![])).unwrap();
    w.add_component(component("table", ComponentKind::Viewer)).unwrap();
    assert!(matches!(w.wire(parallel("table", "feed")), Err(FlowError::Silent(_))));
    assert!(matches!(w.wire(parallel("feed", "feed")), Err(FlowError::Incompatible { .. })));
    let no_selector = ArcDecl::Alternative { from: id("feed"), selector: None, when_true: id("table"), when_false: id("table") };
    assert!(matches!(w.wire(no_selector), Err(FlowError::MissingSelector(_))));
    assert!(matches!(w.add_component(component("f", ComponentKind::Filter)), Err(FlowError::NoPredicate(_))));
    assert!(matches!(w.add_component(filter("f", "field")), Err(FlowError::NotAPredicate(_))));
    assert!(matches!(w.add_component(component("table", ComponentKind::Viewer)), Err(FlowError::Duplicate(_))));
    assert!(w.arcs().is_empty());
}

#[test]
fn sequence_numbers_increase() {
    let mut w = pipeline((0..10).map(row).collect());
    let mut seqs: Vec<u64> = w.propagate().published().map(|e| e.seq).collect();
    seqs.extend(w.propagate().published().map(|e| e.seq));
    assert!(seqs.windows(2).all(|p| p[0] < p[1]), "{seqs:?}");
}

#[test]
fn component_rules_publish_events() {
    let src = format!(
        "{PREDICATES}
component feed kind source
  record {{key = 1}}
end
component counter kind filter
  predicate even-key
  rule announce
    when
      eq(event.kind, \"data\")
    then
      publish(\"new-data\", [{{key = 10}}])
  end
end
component table kind viewer
end
workspace w
  use feed
  use counter
  use table
  wire feed -> counter
  wire counter -> table
end
"
    );
    let mut w = load(&src);
    let p = w.propagate();
    // The filter's own output (nothing even) and then its rule's output reach the viewer.
    assert_eq!(p.updates().len(), 2);
    assert_eq!(w.data_view()["table"], Value::List(vec![Value::Record(BTreeMap::from([(id("key"), Value::Integer(10))]))]));
    assert_eq!(p.published().filter(|e| e.kind == NEW_DATA).count(), 2);
}

#[test]
fn cycles_stop_at_the_delivery_cap() {
    // Two filters feeding each other forever.
    let mut w = empty();
    w.add_component(source("feed", vec![row(2)])).unwrap();
    w.add_component(filter("a", "even-key")).unwrap();
    w.add_component(filter("b", "even-key")).unwrap();
    w.wire(parallel("feed", "a")).unwrap();
    w.wire(parallel("a", "b")).unwrap();
    w.wire(parallel("b", "a")).unwrap();
    let p = w.propagate();
    assert!(p.capped);
    assert_eq!(p.deliveries().count(), flow::DELIVERY_CAP);
}

#[test]
fn workspace_round_trips_through_text() {
    let w = load(PIPELINE);
    let (_, original) = registry_with(PIPELINE);
    let mut bundle = w.to_bundle();
    bundle.operators = original.operators.clone();
    let text = print_bundle(&bundle);
    let back = parse_document(&SourceText::new("rt", text), &lob_profiles::registry()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.workspaces, original.workspaces);
    assert_eq!(back.components, original.components);
    let mut again = load(&print_bundle(&back));
    let mut first = load(PIPELINE);
    assert_eq!(again.propagate(), first.propagate());
}

proptest! {
    #[test]
    fn pipelines_equal_direct_composition(keys in prop::collection::vec(0i64..200, 0..100), second in any::<bool>()) {
        let records: Vec<Value> = keys.iter().copied().map(row).collect();
        let mut w = pipeline(records.clone());
        let mut direct: Vec<Value> = records.into_iter().filter(|r| key_of(r) % 2 == 0).collect();
        if second {
            w.add_component(filter("pick-big", "big-key")).unwrap();
            w.add_component(component("big-table", ComponentKind::Viewer)).unwrap();
            w.wire(parallel("pick", "pick-big")).unwrap();
            w.wire(parallel("pick-big", "big-table")).unwrap();
        }
        let p = w.propagate();
        // Exactly once per (event, receiver).
        let mut seen = std::collections::BTreeSet::new();
        for (seq, to) in p.deliveries() {
            prop_assert!(seen.insert((seq, to.clone())));
        }
        prop_assert_eq!(&w.data_view()["table"], &Value::List(direct.clone()));
        if second {
            direct.retain(|r| key_of(r) > 50);
            prop_assert_eq!(&w.data_view()["big-table"], &Value::List(direct));
        }
    }
}

#[test]
fn snapshots_restore_between_propagations() {
    let mut w = pipeline((0..20).map(row).collect());
    w.propagate();
    let json = serde_json::to_string(&w.snapshot()).unwrap();
    let mut back = Workspace::restore(serde_json::from_str(&json).unwrap(), registry_with(PREDICATES).0).unwrap();
    assert_eq!(back.snapshot(), w.snapshot());
    let (p, q) = (w.replace_filter("pick", filter("pick-big", "big-key")).unwrap(), back.replace_filter("pick", filter("pick-big", "big-key")).unwrap());
    assert_eq!(p, q);
    assert_eq!(back.snapshot(), w.snapshot());
}
