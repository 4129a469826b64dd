use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use lob_core::bundle::{
    ArcDecl, CommunityDecl, ComponentDecl, ComponentKind, EntityDecl, MechanismDecl, NamedOperand, Pairs, PostedFact, StateDecl, WorkspaceDecl, WrapperFn,
};
use lob_core::{
    Action, Annotation, AnnotationBody, Bundle, Condition, Connector, ControlStructure, ConventionalSymbol, Coordinates, FactPattern, Hyperlink, Ident,
    LayoutStructure, MediaRef, Operand, OperatorConstruct, OperatorKind, Param, Production, RewritingRule, Selector, StateRef, Style, TargetKind, TargetRef,
    TopologicalObject, TypeTag, TypedVariable, Value, WebStructure,
};

use crate::diagnostic::Diagnostic;
use crate::lexer::{lex, Tok, Token};

/// Words that start a top-level declaration.
pub const TOP_LEVEL: [&str; 12] =
    ["operator", "operand", "web", "rule", "connector", "annotation", "mechanism", "state", "entity", "community", "component", "workspace"];

/// Words with fixed meaning in expression or line-start position.
pub const RESERVED: [&str; 5] = ["true", "false", "media", "end", "then"];

const MAX_DEPTH: usize = 200;

/// Where each top-level item starts, keyed by the root of its validation path.
pub type Spans = Vec<(String, usize, usize)>;

pub struct Parsed {
    pub bundle: Bundle,
    pub diagnostics: Vec<Diagnostic>,
    pub spans: Spans,
}

/// Parses source text. Always returns a bundle holding every item that parsed; any
/// syntax errors are in `diagnostics`.
pub fn parse(src: &str) -> Parsed {
    let (toks, mut diagnostics) = lex(src);
    let mut p = Parser { toks, pos: 0, diags: Vec::new(), depth: 0, spans: Vec::new() };
    let bundle = p.bundle();
    diagnostics.append(&mut p.diags);
    diagnostics.sort_by_key(|d| (d.line, d.column));
    Parsed { bundle, diagnostics, spans: p.spans }
}

type PResult<T> = Result<T, ()>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    depth: usize,
    spans: Spans,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.cur().tok
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.cur().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn fail<T>(&mut self, production: Production, msg: impl Into<String>) -> PResult<T> {
        let t = self.cur();
        let (line, column) = (t.line, t.column);
        self.diags.push(Diagnostic::error(msg, line, column, production));
        Err(())
    }

    fn unexpected<T>(&mut self, production: Production, wanted: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.fail(production, format!("expected {wanted}, found {found}"))
    }

    fn expect(&mut self, tok: Tok, production: Production) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            self.unexpected(production, &tok.describe())
        }
    }

    fn keyword(&mut self, w: &str, production: Production) -> PResult<()> {
        if self.at_word(w) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(production, &format!("`{w}`"))
        }
    }

    fn ident(&mut self, production: Production) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) => match Ident::new(s.as_str()) {
                Ok(id) => {
                    self.bump();
                    Ok(id)
                }
                Err(_) => self.fail(production, format!("`{s}` is not a valid identifier")),
            },
            _ => self.unexpected(production, "an identifier"),
        }
    }

    fn string(&mut self, production: Production) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(production, "a string literal"),
        }
    }

    fn end_line(&mut self, production: Production) -> PResult<()> {
        match self.peek() {
            Tok::Newline => {
                self.skip_newlines();
                Ok(())
            }
            Tok::Eof => Ok(()),
            _ => self.unexpected(production, "end of line"),
        }
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    /// At `end` followed by end of line.
    fn at_end(&self) -> bool {
        self.at_word("end") && matches!(self.peek_at(1), Tok::Newline | Tok::Eof)
    }

    fn close_block(&mut self, production: Production) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            return self.fail(production, "block is missing its `end`");
        }
        self.keyword("end", production)?;
        self.end_line(production)
    }

    fn enter(&mut self, production: Production) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.fail(production, "nesting is too deep");
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Skips to the next line that starts a top-level declaration in column 1.
    fn recover(&mut self) {
        self.depth = 0;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Newline => {
                    self.bump();
                    let t = self.cur();
                    if t.column == 1 && matches!(&t.tok, Tok::Ident(s) if TOP_LEVEL.contains(&s.as_str())) {
                        return;
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn bundle(&mut self) -> Bundle {
        let mut b = Bundle::default();
        self.skip_newlines();
        while *self.peek() != Tok::Eof {
            let (line, col) = (self.cur().line, self.cur().column);
            let before = self.diags.len();
            if self.item(&mut b, line, col).is_err() || self.diags.len() > before {
                self.recover();
            }
            self.skip_newlines();
        }
        b
    }

    fn span(&mut self, key: String, line: usize, col: usize) {
        self.spans.push((key, line, col));
    }

    fn item(&mut self, b: &mut Bundle, line: usize, col: usize) -> PResult<()> {
        let Tok::Ident(word) = self.peek().clone() else {
            return self.unexpected(Production::ControlStructure, "a declaration");
        };
        match word.as_str() {
            "operator" => {
                let op = self.operator()?;
                self.span(format!("operator:{}", op.name), line, col);
                b.operators.push(op);
            }
            "operand" => {
                self.bump();
                let name = self.ident(Production::OperandConstruct)?;
                self.expect(Tok::Eq, Production::OperandConstruct)?;
                let operand = self.operand(None)?;
                self.end_line(Production::OperandConstruct)?;
                self.span(format!("operand:{name}"), line, col);
                b.operands.push(NamedOperand { name, operand });
            }
            "web" => {
                let w = self.web()?;
                self.span(format!("web:{}", w.name), line, col);
                b.webs.push(w);
            }
            "rule" | "connector" => {
                let c = self.control()?;
                self.span(format!("controls/child:{}", b.controls.len()), line, col);
                b.controls.push(c);
            }
            "annotation" => {
                let a = self.annotation()?;
                self.span(format!("annotation:{}", a.id), line, col);
                b.annotations.push(a);
            }
            "mechanism" => {
                let m = self.mechanism()?;
                self.span(format!("mechanism:{}", m.name), line, col);
                b.mechanisms.push(m);
            }
            "state" => {
                let s = self.state()?;
                self.span(format!("state:{}", s.scope), line, col);
                b.states.push(s);
            }
            "entity" => {
                let e = self.entity()?;
                self.span(format!("entity:{}", e.id), line, col);
                b.entities.push(e);
            }
            "community" => {
                let c = self.community()?;
                self.span(format!("community:{}", c.name), line, col);
                b.communities.push(c);
            }
            "component" => {
                let c = self.component()?;
                self.span(format!("component:{}", c.id), line, col);
                b.components.push(c);
            }
            "workspace" => {
                let w = self.workspace()?;
                self.span(format!("workspace:{}", w.name), line, col);
                b.workspaces.push(w);
            }
            other => return self.fail(Production::ControlStructure, format!("`{other}` does not start a declaration")),
        }
        Ok(())
    }

    // ---- operators and operands

    fn params(&mut self, production: Production) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen, production)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let name = self.ident(production)?;
                self.expect(Tok::Colon, production)?;
                let ty = self.type_tag(production)?;
                params.push(Param { name, ty });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, production)?;
        Ok(params)
    }

    fn type_tag(&mut self, production: Production) -> PResult<TypeTag> {
        match self.peek().clone() {
            Tok::Ident(s) => match TypeTag::from_keyword(&s) {
                Some(t) => {
                    self.bump();
                    Ok(t)
                }
                None => self.fail(production, format!("`{s}` is not a type")),
            },
            _ => self.unexpected(production, "a type"),
        }
    }

    fn operator(&mut self) -> PResult<OperatorConstruct> {
        const P: Production = Production::OperatorConstruct;
        self.keyword("operator", P)?;
        let name = self.ident(P)?;
        let params = self.params(P)?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let result = self.type_tag(P)?;
            self.expect(Tok::Eq, P)?;
            let body = self.operand(Some(&params))?;
            self.end_line(P)?;
            return Ok(OperatorConstruct { name, kind: OperatorKind::Functional, params, result: Some(result), body: vec![body] });
        }
        self.keyword("does", P)?;
        self.end_line(P)?;
        let mut body = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            body.push(self.operand(Some(&params))?);
            self.end_line(P)?;
        }
        self.close_block(P)?;
        Ok(OperatorConstruct { name, kind: OperatorKind::Actional, params, result: None, body })
    }

    /// `params` is set inside operator bodies, where bare names refer to parameters.
    fn operand(&mut self, params: Option<&[Param]>) -> PResult<Operand> {
        const P: Production = Production::OperandConstruct;
        if self.at_literal() {
            return Ok(Operand::Constant(self.value()?));
        }
        let (line, column) = (self.cur().line, self.cur().column);
        let name = self.ident(P)?;
        match self.peek() {
            Tok::LParen => {
                self.enter(P)?;
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.operand(params)?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, P)?;
                self.leave();
                Ok(Operand::Application { operator: name, args })
            }
            Tok::Colon => {
                self.bump();
                let ty = self.type_tag(P)?;
                Ok(Operand::Variable(TypedVariable::new(name, ty)))
            }
            _ => match params.and_then(|ps| ps.iter().find(|p| p.name == name)) {
                Some(p) => Ok(Operand::var(name, p.ty)),
                None => {
                    self.diags.push(Diagnostic::error(format!("variable `{name}` needs a type, as in `{name}: text`"), line, column, P));
                    Err(())
                }
            },
        }
    }

    fn at_literal(&self) -> bool {
        match self.peek() {
            Tok::Int(_) | Tok::Dec(_) | Tok::Str(_) | Tok::LBracket | Tok::LBrace => true,
            Tok::Ident(s) => s == "true" || s == "false" || (s == "media" && *self.peek_at(1) == Tok::LParen),
            _ => false,
        }
    }

    fn value(&mut self) -> PResult<Value> {
        const P: Production = Production::Constant;
        let v = match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Value::Integer(i)
            }
            Tok::Dec(x) => {
                self.bump();
                Value::Decimal(x)
            }
            Tok::Str(s) => {
                self.bump();
                Value::Text(s)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Value::Boolean(s == "true")
            }
            Tok::Ident(s) if s == "media" => {
                self.bump();
                self.expect(Tok::LParen, P)?;
                let media = self.string(P)?;
                self.expect(Tok::Comma, P)?;
                let uri = self.string(P)?;
                self.expect(Tok::RParen, P)?;
                Value::Media(MediaRef { media, uri })
            }
            Tok::LBracket => {
                self.enter(P)?;
                self.bump();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.value()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, P)?;
                self.leave();
                Value::List(items)
            }
            Tok::LBrace => {
                self.enter(P)?;
                let fields = self.pairs()?;
                self.leave();
                Value::Record(fields)
            }
            _ => return self.unexpected(P, "a constant"),
        };
        Ok(v)
    }

    /// `{name = value, ...}`
    fn pairs(&mut self) -> PResult<Pairs> {
        const P: Production = Production::Constant;
        self.expect(Tok::LBrace, P)?;
        let mut fields = BTreeMap::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let key = self.ident(P)?;
                self.expect(Tok::Eq, P)?;
                let v = self.value()?;
                if fields.insert(key.clone(), v).is_some() {
                    return self.fail(P, format!("field `{key}` appears twice"));
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace, P)?;
        Ok(fields)
    }

    fn number(&mut self, production: Production) -> PResult<f64> {
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(i as f64)
            }
            Tok::Dec(x) => {
                self.bump();
                Ok(x)
            }
            _ => self.unexpected(production, "a number"),
        }
    }

    // ---- web and layout structures

    fn web(&mut self) -> PResult<WebStructure> {
        const P: Production = Production::WebStructure;
        self.keyword("web", P)?;
        let name = self.ident(P)?;
        self.end_line(P)?;
        let mut layouts = Vec::new();
        let mut links = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            if self.at_word("layout") {
                layouts.push(self.layout()?);
            } else if self.at_word("link") {
                self.bump();
                let from = self.ident(P)?;
                self.expect(Tok::Arrow, P)?;
                let to = self.ident(P)?;
                self.end_line(P)?;
                links.push(Hyperlink { from, to });
            } else {
                return self.unexpected(P, "`layout`, `link` or `end`");
            }
        }
        self.close_block(P)?;
        Ok(WebStructure { name, layouts, links })
    }

    fn layout(&mut self) -> PResult<LayoutStructure> {
        const P: Production = Production::LayoutStructure;
        self.keyword("layout", P)?;
        let name = self.ident(P)?;
        self.end_line(P)?;
        let mut objects = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            let operand = self.operand(None)?;
            let coordinates = if self.at_word("at") {
                self.bump();
                self.expect(Tok::LParen, Production::TopologicalObject)?;
                let x = self.number(Production::TopologicalObject)?;
                self.expect(Tok::Comma, Production::TopologicalObject)?;
                let y = self.number(Production::TopologicalObject)?;
                self.expect(Tok::RParen, Production::TopologicalObject)?;
                Some(Coordinates { x, y })
            } else {
                None
            };
            self.end_line(Production::TopologicalObject)?;
            objects.push(TopologicalObject::new(operand, coordinates));
        }
        self.close_block(P)?;
        Ok(LayoutStructure { name, objects })
    }

    // ---- control structures

    fn control(&mut self) -> PResult<ControlStructure> {
        if self.at_word("rule") {
            Ok(ControlStructure::Rule(self.rule()?))
        } else if self.at_word("connector") {
            self.connector()
        } else {
            self.unexpected(Production::ControlStructure, "`rule` or `connector`")
        }
    }

    fn connector(&mut self) -> PResult<ControlStructure> {
        const P: Production = Production::Connector;
        self.enter(P)?;
        self.keyword("connector", P)?;
        let operator = self.ident(P)?;
        self.end_line(P)?;
        let mut children = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            children.push(self.control()?);
        }
        self.close_block(P)?;
        self.leave();
        Ok(ControlStructure::Connector(Connector { operator, children }))
    }

    fn rule(&mut self) -> PResult<RewritingRule> {
        const P: Production = Production::RewritingRule;
        self.keyword("rule", P)?;
        let name = self.ident(P)?;
        self.end_line(P)?;
        self.keyword("when", P)?;
        self.end_line(P)?;
        let mut conditions = Vec::new();
        while !(self.at_word("then") && matches!(self.peek_at(1), Tok::Newline)) {
            if *self.peek() == Tok::Eof || self.at_end() {
                return self.unexpected(P, "`then`");
            }
            let (operator, args) = self.invocation(Production::Condition)?;
            conditions.push(Condition { operator, args });
            self.end_line(Production::Condition)?;
        }
        self.bump();
        self.end_line(P)?;
        let mut actions = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            let (operator, args) = self.invocation(Production::Action)?;
            actions.push(Action { operator, args });
            self.end_line(Production::Action)?;
        }
        self.close_block(P)?;
        Ok(RewritingRule { name, conditions, actions })
    }

    fn invocation(&mut self, production: Production) -> PResult<(Ident, Vec<Selector>)> {
        let op = self.ident(production)?;
        let args = self.selector_args(production)?;
        Ok((op, args))
    }

    fn selector_args(&mut self, production: Production) -> PResult<Vec<Selector>> {
        self.expect(Tok::LParen, production)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.selector(production)?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, production)?;
        Ok(args)
    }

    fn selector(&mut self, production: Production) -> PResult<Selector> {
        if self.at_literal() {
            return Ok(Selector::Constant(self.value()?));
        }
        let name = self.ident(production)?;
        match self.peek() {
            Tok::LParen => {
                self.enter(production)?;
                let args = self.selector_args(production)?;
                self.leave();
                Ok(Selector::Apply { operator: name, args })
            }
            Tok::Dot => {
                self.bump();
                if *self.peek() == Tok::Star {
                    self.bump();
                    Ok(Selector::Scope(name))
                } else {
                    let entry = self.ident(production)?;
                    Ok(Selector::Entry(StateRef::scoped(name, entry)))
                }
            }
            Tok::LBracket => {
                self.bump();
                let mut pattern = FactPattern::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        let attr = self.ident(production)?;
                        self.expect(Tok::Eq, production)?;
                        let want = if *self.peek() == Tok::Question {
                            self.bump();
                            None
                        } else {
                            Some(self.value()?)
                        };
                        pattern.0.insert(attr, want);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, production)?;
                Ok(Selector::Match { scope: name, pattern })
            }
            _ => Ok(Selector::Entry(StateRef::local(name))),
        }
    }

    // ---- annotations

    fn annotation(&mut self) -> PResult<Annotation> {
        const P: Production = Production::Annotation;
        self.keyword("annotation", P)?;
        let id = self.ident(P)?;
        self.keyword("by", P)?;
        let author = self.string(P)?;
        self.keyword("at", P)?;
        let stamp = self.string(P)?;
        let timestamp = match DateTime::parse_from_rfc3339(&stamp) {
            Ok(t) => t.with_timezone(&Utc),
            Err(e) => return self.fail(P, format!("`{stamp}` is not an RFC 3339 timestamp: {e}")),
        };
        self.end_line(P)?;
        let body = if self.at_word("style") {
            self.bump();
            let mut symbols = Vec::new();
            while let Tok::Ident(_) = self.peek() {
                let name = self.ident(Production::Style)?;
                let arg = if *self.peek() == Tok::LParen {
                    self.bump();
                    let a = self.ident(Production::Style)?;
                    self.expect(Tok::RParen, Production::Style)?;
                    Some(a)
                } else {
                    None
                };
                symbols.push(ConventionalSymbol { name, arg });
            }
            AnnotationBody::Style(Style::Symbols(symbols))
        } else if self.at_word("format") {
            self.bump();
            AnnotationBody::Style(Style::Operator(self.ident(Production::Style)?))
        } else if self.at_word("note") {
            self.bump();
            AnnotationBody::Constant(self.value()?)
        } else {
            return self.unexpected(P, "`style`, `format` or `note`");
        };
        self.end_line(P)?;
        let mut targets = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            targets.push(self.target_ref()?);
            self.end_line(Production::TargetRef)?;
        }
        self.close_block(P)?;
        Ok(Annotation { id, body, targets, author, timestamp })
    }

    fn target_ref(&mut self) -> PResult<TargetRef> {
        const P: Production = Production::TargetRef;
        self.keyword("target", P)?;
        let selector = self.ident(P)?;
        self.expect(Tok::LParen, P)?;
        let kind = match self.peek().clone() {
            Tok::Ident(s) => match TargetKind::from_keyword(&s) {
                Some(k) => {
                    self.bump();
                    k
                }
                None => return self.fail(Production::Target, format!("`{s}` is not a target kind (control, object or annotation)")),
            },
            _ => return self.unexpected(Production::Target, "a target kind"),
        };
        let mut path = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                match self.peek() {
                    Tok::Ident(_) | Tok::Int(_) => path.push(self.bump().text),
                    _ => return self.unexpected(P, "a path segment"),
                }
                if *self.peek() == Tok::Slash {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, P)?;
        if let Some(bad) = path.iter().find(|s| !lob_core::annotation::is_valid_segment(s)) {
            return self.fail(P, format!("`{bad}` is not a path segment"));
        }
        Ok(TargetRef { selector, kind, path })
    }

    // ---- profile declarations

    fn mechanism(&mut self) -> PResult<MechanismDecl> {
        const P: Production = Production::RewritingRule;
        self.keyword("mechanism", P)?;
        let name = self.ident(P)?;
        self.keyword("on", P)?;
        let template = self.ident(P)?;
        self.end_line(P)?;
        let mut rules = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            rules.push(self.rule()?);
        }
        self.close_block(P)?;
        Ok(MechanismDecl { name, template, rules })
    }

    fn state(&mut self) -> PResult<StateDecl> {
        const P: Production = Production::State;
        self.keyword("state", P)?;
        let scope = self.ident(P)?;
        self.end_line(P)?;
        let mut entries = BTreeMap::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            let name = self.ident(P)?;
            self.expect(Tok::Eq, P)?;
            let v = self.value()?;
            self.end_line(P)?;
            if entries.insert(name.clone(), v).is_some() {
                return self.fail(P, format!("entry `{name}` appears twice"));
            }
        }
        self.close_block(P)?;
        Ok(StateDecl { scope, entries })
    }

    fn entity(&mut self) -> PResult<EntityDecl> {
        const P: Production = Production::OperandConstruct;
        self.keyword("entity", P)?;
        let id = self.ident(P)?;
        self.end_line(P)?;
        let mut e = EntityDecl { id, memberships: Vec::new(), memory: Vec::new(), wrapper: Vec::new(), behavior: Vec::new() };
        while !self.at_end() && *self.peek() != Tok::Eof {
            if self.at_word("rule") || self.at_word("connector") {
                e.behavior.push(self.control()?);
                continue;
            }
            if self.at_word("member") {
                self.bump();
                e.memberships.push(self.ident(P)?);
            } else if self.at_word("fact") {
                self.bump();
                e.memory.push(self.pairs()?);
            } else if self.at_word("expose") {
                self.bump();
                let name = self.ident(P)?;
                let params = self.params(P)?;
                e.wrapper.push(WrapperFn { name, params });
            } else {
                return self.unexpected(P, "`member`, `fact`, `expose`, `rule`, `connector` or `end`");
            }
            self.end_line(P)?;
        }
        self.close_block(P)?;
        Ok(e)
    }

    fn community(&mut self) -> PResult<CommunityDecl> {
        const P: Production = Production::OperandConstruct;
        self.keyword("community", P)?;
        let name = self.ident(P)?;
        self.end_line(P)?;
        let mut facts = Vec::new();
        while !self.at_end() && *self.peek() != Tok::Eof {
            self.keyword("fact", P)?;
            let pairs = self.pairs()?;
            self.keyword("by", P)?;
            let owner = self.ident(P)?;
            self.end_line(P)?;
            facts.push(PostedFact { owner, pairs });
        }
        self.close_block(P)?;
        Ok(CommunityDecl { name, facts })
    }

    fn component(&mut self) -> PResult<ComponentDecl> {
        const P: Production = Production::OperandConstruct;
        self.keyword("component", P)?;
        let id = self.ident(P)?;
        self.keyword("kind", P)?;
        let kind = match self.peek().clone() {
            Tok::Ident(s) => match ComponentKind::from_keyword(&s) {
                Some(k) => {
                    self.bump();
                    k
                }
                None => return self.fail(P, format!("`{s}` is not a component kind (source, filter, viewer or handler)")),
            },
            _ => return self.unexpected(P, "a component kind"),
        };
        self.end_line(P)?;
        let mut c = ComponentDecl { id, kind, subscriptions: Vec::new(), accepts: Vec::new(), predicate: None, records: Vec::new(), behavior: Vec::new() };
        while !self.at_end() && *self.peek() != Tok::Eof {
            if self.at_word("rule") || self.at_word("connector") {
                c.behavior.push(self.control()?);
                continue;
            }
            if self.at_word("subscribe") {
                self.bump();
                c.subscriptions.push(self.ident(P)?);
            } else if self.at_word("accept") {
                self.bump();
                c.accepts.push(self.ident(P)?);
            } else if self.at_word("predicate") {
                self.bump();
                if c.predicate.is_some() {
                    return self.fail(P, "component already has a predicate");
                }
                c.predicate = Some(self.ident(P)?);
            } else if self.at_word("record") {
                self.bump();
                c.records.push(self.value()?);
            } else {
                return self.unexpected(P, "`subscribe`, `accept`, `predicate`, `record`, `rule`, `connector` or `end`");
            }
            self.end_line(P)?;
        }
        self.close_block(P)?;
        Ok(c)
    }

    fn workspace(&mut self) -> PResult<WorkspaceDecl> {
        const P: Production = Production::WebStructure;
        self.keyword("workspace", P)?;
        let name = self.ident(P)?;
        self.end_line(P)?;
        let mut w = WorkspaceDecl { name, components: Vec::new(), arcs: Vec::new() };
        while !self.at_end() && *self.peek() != Tok::Eof {
            if self.at_word("use") {
                self.bump();
                w.components.push(self.ident(P)?);
            } else if self.at_word("wire") {
                self.bump();
                let from = self.ident(P)?;
                self.expect(Tok::Arrow, P)?;
                let to = self.ident(P)?;
                w.arcs.push(ArcDecl::Parallel { from, to });
            } else if self.at_word("branch") {
                self.bump();
                let from = self.ident(P)?;
                let selector = if self.at_word("by") {
                    self.bump();
                    Some(self.ident(P)?)
                } else {
                    None
                };
                self.expect(Tok::Arrow, P)?;
                let when_true = self.ident(P)?;
                self.expect(Tok::Comma, P)?;
                let when_false = self.ident(P)?;
                w.arcs.push(ArcDecl::Alternative { from, selector, when_true, when_false });
            } else {
                return self.unexpected(P, "`use`, `wire`, `branch` or `end`");
            }
            self.end_line(P)?;
        }
        self.close_block(P)?;
        Ok(w)
    }
}
