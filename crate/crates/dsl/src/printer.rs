use std::fmt::Write;

use lob_core::bundle::{ArcDecl, ComponentDecl, EntityDecl, Pairs};
use lob_core::{
    Annotation, AnnotationBody, Bundle, ControlStructure, FactPattern, Operand, OperatorConstruct, OperatorKind, Param, RewritingRule, Selector, Style,
    TargetRef, Value, WebStructure,
};

const INDENT: &str = "  ";

/// Prints a bundle in canonical form. Items appear grouped by kind, in a fixed order;
/// blocks are indented two spaces per level.
pub fn print_bundle(b: &Bundle) -> String {
    let mut p = Printer::default();
    for op in &b.operators {
        p.operator(op);
    }
    for n in &b.operands {
        p.line(0, format!("operand {} = {}", n.name, operand(&n.operand, None)));
    }
    for w in &b.webs {
        p.web(w);
    }
    for c in &b.controls {
        p.control(c, 0);
    }
    for a in &b.annotations {
        p.annotation(a);
    }
    for m in &b.mechanisms {
        p.line(0, format!("mechanism {} on {}", m.name, m.template));
        for r in &m.rules {
            p.rule(r, 1);
        }
        p.line(0, "end");
    }
    for s in &b.states {
        p.line(0, format!("state {}", s.scope));
        for (name, v) in &s.entries {
            p.line(1, format!("{name} = {}", value(v)));
        }
        p.line(0, "end");
    }
    for e in &b.entities {
        p.entity(e);
    }
    for c in &b.communities {
        p.line(0, format!("community {}", c.name));
        for f in &c.facts {
            p.line(1, format!("fact {} by {}", pairs(&f.pairs), f.owner));
        }
        p.line(0, "end");
    }
    for c in &b.components {
        p.component(c);
    }
    for w in &b.workspaces {
        p.line(0, format!("workspace {}", w.name));
        for c in &w.components {
            p.line(1, format!("use {c}"));
        }
        for arc in &w.arcs {
            match arc {
                ArcDecl::Parallel { from, to } => p.line(1, format!("wire {from} -> {to}")),
                ArcDecl::Alternative { from, selector, when_true, when_false } => {
                    let by = selector.as_ref().map(|s| format!(" by {s}")).unwrap_or_default();
                    p.line(1, format!("branch {from}{by} -> {when_true}, {when_false}"))
                }
            }
        }
        p.line(0, "end");
    }
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
}

impl Printer {
    fn line(&mut self, depth: usize, text: impl AsRef<str>) {
        for _ in 0..depth {
            self.out.push_str(INDENT);
        }
        self.out.push_str(text.as_ref());
        self.out.push('\n');
    }

    fn operator(&mut self, op: &OperatorConstruct) {
        let params = params(&op.params);
        match (op.kind, op.result, op.body.as_slice()) {
            (OperatorKind::Functional, Some(result), [body]) => {
                self.line(0, format!("operator {}({params}) -> {result} = {}", op.name, operand(body, Some(&op.params))));
            }
            _ => {
                self.line(0, format!("operator {}({params}) does", op.name));
                for inv in &op.body {
                    self.line(1, operand(inv, Some(&op.params)));
                }
                self.line(0, "end");
            }
        }
    }

    fn web(&mut self, w: &WebStructure) {
        self.line(0, format!("web {}", w.name));
        for l in &w.layouts {
            self.line(1, format!("layout {}", l.name));
            for o in &l.objects {
                let at = o.coordinates.map(|c| format!(" at ({:?}, {:?})", c.x, c.y)).unwrap_or_default();
                self.line(2, format!("{}{at}", operand(&o.operand, None)));
            }
            self.line(1, "end");
        }
        for link in &w.links {
            self.line(1, format!("link {} -> {}", link.from, link.to));
        }
        self.line(0, "end");
    }

    fn control(&mut self, c: &ControlStructure, depth: usize) {
        match c {
            ControlStructure::Rule(r) => self.rule(r, depth),
            ControlStructure::Connector(conn) => {
                self.line(depth, format!("connector {}", conn.operator));
                for ch in &conn.children {
                    self.control(ch, depth + 1);
                }
                self.line(depth, "end");
            }
        }
    }

    fn rule(&mut self, r: &RewritingRule, depth: usize) {
        self.line(depth, format!("rule {}", r.name));
        self.line(depth + 1, "when");
        for c in &r.conditions {
            self.line(depth + 2, invocation(c.operator.as_str(), &c.args));
        }
        self.line(depth + 1, "then");
        for a in &r.actions {
            self.line(depth + 2, invocation(a.operator.as_str(), &a.args));
        }
        self.line(depth, "end");
    }

    fn annotation(&mut self, a: &Annotation) {
        let stamp = a.timestamp.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true);
        self.line(0, format!("annotation {} by {} at {}", a.id, quote(&a.author), quote(&stamp)));
        let body = match &a.body {
            AnnotationBody::Style(Style::Symbols(syms)) => {
                let mut s = String::from("style");
                for sym in syms {
                    let _ = write!(s, " {sym}");
                }
                s
            }
            AnnotationBody::Style(Style::Operator(op)) => format!("format {op}"),
            AnnotationBody::Constant(v) => format!("note {}", value(v)),
        };
        self.line(1, body);
        for t in &a.targets {
            self.line(1, format!("target {}", target_ref(t)));
        }
        self.line(0, "end");
    }

    fn entity(&mut self, e: &EntityDecl) {
        self.line(0, format!("entity {}", e.id));
        for m in &e.memberships {
            self.line(1, format!("member {m}"));
        }
        for f in &e.memory {
            self.line(1, format!("fact {}", pairs(f)));
        }
        for w in &e.wrapper {
            self.line(1, format!("expose {}({})", w.name, params(&w.params)));
        }
        for c in &e.behavior {
            self.control(c, 1);
        }
        self.line(0, "end");
    }

    fn component(&mut self, c: &ComponentDecl) {
        self.line(0, format!("component {} kind {}", c.id, c.kind.keyword()));
        for s in &c.subscriptions {
            self.line(1, format!("subscribe {s}"));
        }
        for s in &c.accepts {
            self.line(1, format!("accept {s}"));
        }
        if let Some(p) = &c.predicate {
            self.line(1, format!("predicate {p}"));
        }
        for r in &c.records {
            self.line(1, format!("record {}", value(r)));
        }
        for b in &c.behavior {
            self.control(b, 1);
        }
        self.line(0, "end");
    }
}

pub fn target_ref(t: &TargetRef) -> String {
    if t.path.is_empty() {
        format!("{}({})", t.selector, t.kind.keyword())
    } else {
        format!("{}({} {})", t.selector, t.kind.keyword(), t.path.join("/"))
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect::<Vec<_>>().join(", ")
}

/// Prints an operand. Inside an operator body a variable that matches a parameter is
/// printed bare.
pub fn operand(op: &Operand, params: Option<&[Param]>) -> String {
    match op {
        Operand::Constant(v) => value(v),
        Operand::Variable(v) => {
            if params.is_some_and(|ps| ps.iter().any(|p| p.name == v.name && p.ty == v.ty)) {
                v.name.to_string()
            } else {
                format!("{}: {}", v.name, v.ty)
            }
        }
        Operand::Application { operator, args } => {
            let args: Vec<_> = args.iter().map(|a| operand(a, params)).collect();
            format!("{operator}({})", args.join(", "))
        }
    }
}

pub fn invocation(op: &str, args: &[Selector]) -> String {
    let args: Vec<_> = args.iter().map(selector).collect();
    format!("{op}({})", args.join(", "))
}

pub fn selector(s: &Selector) -> String {
    match s {
        Selector::Entry(r) => r.to_string(),
        Selector::Scope(scope) => format!("{scope}.*"),
        Selector::Match { scope, pattern } => format!("{scope}[{}]", fact_pattern(pattern)),
        Selector::Constant(v) => value(v),
        Selector::Apply { operator, args } => invocation(operator.as_str(), args),
    }
}

fn fact_pattern(p: &FactPattern) -> String {
    p.0.iter()
        .map(|(k, v)| match v {
            Some(v) => format!("{k} = {}", value(v)),
            None => format!("{k} = ?"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn pairs(p: &Pairs) -> String {
    let fields: Vec<_> = p.iter().map(|(k, v)| format!("{k} = {}", value(v))).collect();
    format!("{{{}}}", fields.join(", "))
}

/// Literal syntax for a value. Decimals always carry a `.` or an exponent.
pub fn value(v: &Value) -> String {
    match v {
        Value::Boolean(b) => b.to_string(),
        Value::Integer(i) => i.to_string(),
        Value::Decimal(x) => format!("{x:?}"),
        Value::Text(s) => quote(s),
        Value::Media(m) => format!("media({}, {})", quote(&m.media), quote(&m.uri)),
        Value::List(items) => format!("[{}]", items.iter().map(value).collect::<Vec<_>>().join(", ")),
        Value::Record(fields) => pairs(fields),
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
