//! Textual syntax for bricolage bundles (`.lob` files).
//!
//! [`parse_document`] turns source text into a validated [`Bundle`] or a list of located
//! diagnostics; [`serialize`] prints a bundle in canonical form. Printing then parsing a
//! valid bundle gives back an equal bundle.

pub mod diagnostic;
pub mod generate;
pub mod lexer;
pub mod parser;
pub mod printer;

use lob_core::lookup::Overlay;
use lob_core::validate::validate_bundle;
use lob_core::{Bundle, ConstructLookup, ValidationReport, Violation};

pub use diagnostic::{Diagnostic, Severity};
pub use parser::{parse, Parsed};
pub use printer::print_bundle;

/// Source text with the name it came from (a file path, or something like `<stdin>`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub origin: String,
    pub text: String,
}

impl SourceText {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        SourceText { origin: origin.into(), text: text.into() }
    }

    /// Decodes UTF-8. Invalid input gives a diagnostic at the first bad byte.
    pub fn from_bytes(origin: impl Into<String>, bytes: &[u8]) -> Result<Self, Diagnostic> {
        match std::str::from_utf8(bytes) {
            Ok(s) => Ok(SourceText::new(origin, s)),
            Err(e) => {
                let good = &bytes[..e.valid_up_to()];
                let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
                let last_line = good.rsplit(|&b| b == b'\n').next().unwrap_or_default();
                let column = String::from_utf8_lossy(last_line).chars().count() + 1;
                Err(Diagnostic::error("source is not valid UTF-8", line, column, lob_core::Production::Constant))
            }
        }
    }
}

/// Parses and validates. Syntax errors stop before validation; otherwise every violation
/// is reported, located at the start of the item that contains it.
pub fn parse_document(src: &SourceText, lookup: &dyn ConstructLookup) -> Result<Bundle, Vec<Diagnostic>> {
    let parsed = parse(&src.text);
    if parsed.diagnostics.iter().any(Diagnostic::is_error) {
        return Err(parsed.diagnostics);
    }
    let report = validate_bundle(&parsed.bundle, lookup);
    if report.is_empty() {
        Ok(parsed.bundle)
    } else {
        Err(report.violations.iter().map(|v| locate(v, &parsed.spans)).collect())
    }
}

/// Parses and validates raw bytes.
pub fn parse_bytes(origin: &str, bytes: &[u8], lookup: &dyn ConstructLookup) -> Result<Bundle, Vec<Diagnostic>> {
    let src = SourceText::from_bytes(origin, bytes).map_err(|d| vec![d])?;
    parse_document(&src, lookup)
}

fn locate(v: &Violation, spans: &parser::Spans) -> Diagnostic {
    let path = v.path.to_string();
    let (line, column) = spans
        .iter()
        .filter(|(key, ..)| path == *key || path.starts_with(&format!("{key}/")))
        .max_by_key(|(key, ..)| key.len())
        .map(|&(_, l, c)| (l, c))
        .unwrap_or((1, 1));
    Diagnostic::error(format!("{}: {}", v.path, v.message), line, column, v.production)
}

/// Validates, then prints canonically.
pub fn serialize(bundle: &Bundle, lookup: &dyn ConstructLookup) -> Result<SourceText, ValidationReport> {
    let report = validate_bundle(bundle, lookup);
    if !report.is_empty() {
        return Err(report);
    }
    Ok(SourceText::new("<serialized>", print_bundle(bundle)))
}

/// Reformats source text into canonical form. Comments are not kept.
pub fn format_source(src: &SourceText) -> Result<String, Vec<Diagnostic>> {
    let parsed = parse(&src.text);
    if parsed.diagnostics.iter().any(Diagnostic::is_error) {
        return Err(parsed.diagnostics);
    }
    Ok(print_bundle(&parsed.bundle))
}

/// A lookup view that also sees the bundle's own operators.
pub fn bundle_lookup<'a>(base: &'a dyn ConstructLookup, bundle: &'a Bundle) -> Overlay<'a> {
    Overlay::new(base).with_operators(&bundle.operators)
}
