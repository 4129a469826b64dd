//! Browser bindings: check, format and run a `.lob` source.
//!
//! Every export takes the source text and returns a JSON object `{ "ok": bool, "text": string }`
//! so the page needs no glue beyond `JSON.parse`.

use lob_core::bundle::{Bundle, StateDecl};
use lob_core::{Ident, State};
use lob_dsl::{format_source, parse_document, print_bundle, Diagnostic, SourceText};
use lob_engine::{Engine, EngineConfig, HaltReason, Refraction};
use serde_json::json;
use wasm_bindgen::prelude::*;

const NAME: &str = "editor";

fn reply(ok: bool, text: impl Into<String>) -> String {
    json!({ "ok": ok, "text": text.into() }).to_string()
}

fn listed(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| format!("{NAME}:{d}")).collect::<Vec<_>>().join("\n")
}

fn load(source: &str) -> Result<Bundle, String> {
    parse_document(&SourceText::new(NAME, source), &lob_profiles::registry()).map_err(|ds| listed(&ds))
}

/// Parses and validates against the full vocabulary.
#[wasm_bindgen]
pub fn check(source: &str) -> String {
    match load(source) {
        Ok(b) => reply(true, format!("ok ({} items)", b.item_count())),
        Err(e) => reply(false, e),
    }
}

/// Canonical form of the source. Comments are not kept.
#[wasm_bindgen]
pub fn format(source: &str) -> String {
    match format_source(&SourceText::new(NAME, source)) {
        Ok(text) => reply(true, text),
        Err(ds) => reply(false, listed(&ds)),
    }
}

/// Runs the rules over the declared state until quiescent or `max_iterations` steps,
/// returning the trace followed by the final state.
#[wasm_bindgen]
pub fn run(source: &str, max_iterations: usize) -> String {
    match execute(source, max_iterations) {
        Ok((quiescent, text)) => reply(quiescent, text),
        Err(e) => reply(false, e),
    }
}

fn execute(source: &str, max_iterations: usize) -> Result<(bool, String), String> {
    let b = load(source)?;
    let mut registry = lob_profiles::registry();
    registry.register_bundle(&Bundle { operators: b.operators.clone(), ..Bundle::default() }).map_err(|e| e.to_string())?;
    let scope = b.states.first().map(|s| s.scope.clone()).unwrap_or_else(|| Ident::new("app").expect("identifier"));
    let mut state = State::new(scope);
    for decl in &b.states {
        for (name, v) in &decl.entries {
            state.set(decl.scope.clone(), name.clone(), v.clone());
        }
    }
    let engine = Engine::with_config(&registry, EngineConfig { max_iterations });
    let report = engine.run(&mut state, &b.controls, &mut Refraction::default()).map_err(|e| e.to_string())?;
    let finals = state.scopes().map(|(scope, entries)| StateDecl { scope: scope.clone(), entries: entries.clone() }).collect();
    let text = format!("{}\n\n{}", lob_engine::write_trace(&report.trace).trim_end(), print_bundle(&Bundle { states: finals, ..Bundle::default() }));
    Ok((report.halt == HaltReason::Quiescent, text))
}
