use crate::diagnostic::Diagnostic;
use lob_core::Production;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Dec(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eq,
    Dot,
    Star,
    Question,
    Slash,
    Arrow,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Dec(d) => format!("decimal {d:?}"),
            Tok::Str(_) => "string literal".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Star => "`*`".into(),
            Tok::Question => "`?`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// Source text of the token (numbers keep their spelling for path segments).
    pub text: String,
    pub line: usize,
    pub column: usize,
}

/// Splits source into tokens. Lexical errors become diagnostics; the offending
/// characters are skipped so lexing always reaches the end.
pub fn lex(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lx = Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1, out: Vec::new(), diags: Vec::new() };
    lx.run();
    (lx.out, lx.diags)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    out: Vec<Token>,
    diags: Vec<Diagnostic>,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, text: String, line: usize, column: usize) {
        self.out.push(Token { tok, text, line, column });
    }

    fn error(&mut self, line: usize, column: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(msg, line, column, Production::Constant));
    }

    fn run(&mut self) {
        while let Some(c) = self.peek() {
            let (line, col) = (self.line, self.col);
            match c {
                '\n' => {
                    self.bump();
                    self.push(Tok::Newline, "\n".into(), line, col);
                }
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                '"' => self.string(line, col),
                'a'..='z' => self.ident(line, col),
                '0'..='9' => self.number(line, col),
                '-' if self.peek2().is_some_and(|c| c.is_ascii_digit()) => self.number(line, col),
                '-' if self.peek2() == Some('>') => {
                    self.bump();
                    self.bump();
                    self.push(Tok::Arrow, "->".into(), line, col);
                }
                _ => {
                    self.bump();
                    let tok = match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        ':' => Tok::Colon,
                        '=' => Tok::Eq,
                        '.' => Tok::Dot,
                        '*' => Tok::Star,
                        '?' => Tok::Question,
                        '/' => Tok::Slash,
                        other => {
                            self.error(line, col, format!("unexpected character {other:?}"));
                            continue;
                        }
                    };
                    self.push(tok, c.to_string(), line, col);
                }
            }
        }
        let (line, col) = (self.line, self.col);
        self.push(Tok::Newline, String::new(), line, col);
        self.push(Tok::Eof, String::new(), line, col);
    }

    fn ident(&mut self, line: usize, col: usize) {
        let mut s = String::new();
        loop {
            match self.peek() {
                Some(c @ ('a'..='z' | '0'..='9')) => {
                    s.push(c);
                    self.bump();
                }
                Some('-') if self.peek2().is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit()) => {
                    s.push('-');
                    self.bump();
                }
                Some(c) if c.is_alphanumeric() || c == '_' => {
                    // Swallow the rest of the word so one bad identifier gives one diagnostic.
                    while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-') {
                        s.push(self.bump().unwrap_or_default());
                    }
                    self.error(line, col, format!("`{s}` is not a lowercase kebab-case identifier"));
                    return;
                }
                _ => break,
            }
        }
        self.push(Tok::Ident(s.clone()), s, line, col);
    }

    fn number(&mut self, line: usize, col: usize) {
        let mut s = String::new();
        if self.peek() == Some('-') {
            s.push('-');
            self.bump();
        }
        let digits = |lx: &mut Lexer, s: &mut String| {
            while let Some(c) = lx.peek().filter(char::is_ascii_digit) {
                s.push(c);
                lx.bump();
            }
        };
        digits(self, &mut s);
        let mut is_decimal = false;
        if self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit()) {
            is_decimal = true;
            s.push('.');
            self.bump();
            digits(self, &mut s);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = (self.pos, self.line, self.col);
            let mut exp = String::from("e");
            self.bump();
            if let Some(sign @ ('+' | '-')) = self.peek() {
                exp.push(sign);
                self.bump();
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits(self, &mut exp);
                s.push_str(&exp);
                is_decimal = true;
            } else {
                (self.pos, self.line, self.col) = save;
            }
        }
        if is_decimal {
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => self.push(Tok::Dec(x), s, line, col),
                _ => self.error(line, col, format!("decimal `{s}` is out of range")),
            }
        } else {
            match s.parse::<i64>() {
                Ok(i) => self.push(Tok::Int(i), s, line, col),
                Err(_) => self.error(line, col, format!("integer `{s}` is out of range")),
            }
        }
    }

    fn string(&mut self, line: usize, col: usize) {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    self.error(line, col, "unterminated string literal");
                    // Keep the newline token so line structure survives.
                    if self.chars.get(self.pos.wrapping_sub(1)) == Some(&'\n') {
                        self.push(Tok::Newline, "\n".into(), self.line - 1, 1);
                    }
                    return;
                }
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some('u') => match self.unicode_escape() {
                        Some(c) => s.push(c),
                        None => self.error(self.line, self.col, "malformed \\u{...} escape"),
                    },
                    other => self.error(self.line, self.col, format!("unknown escape \\{}", other.map(String::from).unwrap_or_default())),
                },
                Some(c) => s.push(c),
            }
        }
        self.push(Tok::Str(s.clone()), s, line, col);
    }

    fn unicode_escape(&mut self) -> Option<char> {
        if self.peek() != Some('{') {
            return None;
        }
        self.bump();
        let mut hex = String::new();
        while let Some(c) = self.peek().filter(char::is_ascii_hexdigit) {
            hex.push(c);
            self.bump();
            if hex.len() > 6 {
                return None;
            }
        }
        if self.bump() != Some('}') {
            return None;
        }
        u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32)
    }
}
