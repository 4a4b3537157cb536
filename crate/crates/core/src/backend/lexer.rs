//! Dialect-tolerant tokenizer for js-style and py-style source.
//!
//! Comments are dropped, string literals are decoded into literal parts and
//! interpolation holes, and everything else becomes identifiers, numbers or
//! punctuation. The lexer gives up only on input that cannot be tokenized
//! consistently (unterminated strings or comments, unbalanced brackets).

use crate::package::Dialect;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrPart {
    Lit(String),
    /// Interpolated expression, kept as source text.
    Hole(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrLit {
    pub parts: Vec<StrPart>,
    /// py-style `%`/`.format` placeholders are only meaningful in plain strings.
    pub plain: bool,
}

impl StrLit {
    pub fn literal_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                StrPart::Lit(s) => Some(s.as_str()),
                StrPart::Hole(_) => None,
            })
            .collect()
    }

    pub fn has_holes(&self) -> bool {
        self.parts.iter().any(|p| matches!(p, StrPart::Hole(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Num(String),
    Str(StrLit),
    Punct(&'static str),
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            TokKind::Ident(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(self.kind, TokKind::Punct(q) if q == p)
    }

    pub fn is_newline(&self) -> bool {
        matches!(self.kind, TokKind::Newline)
    }

    pub fn str_lit(&self) -> Option<&StrLit> {
        match &self.kind {
            TokKind::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

// longest first
const PUNCTS: &[&str] = &[
    ">>>=", "===", "!==", "**=", "...", "<<=", ">>=", ">>>", "//=", "?.", "??", "=>", "==", "!=", "<=", ">=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "++", "--", "**", "<<", ">>", "->", ":=", "//", "{", "}", "(", ")",
    "[", "]", ";", ",", ".", ":", "?", "=", "+", "-", "*", "/", "%", "<", ">", "!", "&", "|", "^", "~", "@", "#",
];

const JS_REGEX_AFTER_KEYWORDS: &[&str] = &["return", "typeof", "case", "in", "of", "new", "delete", "void", "throw", "else", "do", "yield", "await"];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    dialect: Dialect,
    tokens: Vec<Token>,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Tokenizes `src`. Newline tokens are emitted for every line break outside
/// strings and comments; consumers decide whether they are significant.
pub fn tokenize(src: &str, dialect: Dialect) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src,
        pos: 0,
        dialect,
        tokens: Vec::new(),
    };
    lx.run()?;
    check_brackets(&lx.tokens)?;
    Ok(lx.tokens)
}

fn check_brackets(tokens: &[Token]) -> Result<(), LexError> {
    let mut stack: Vec<(&str, usize)> = Vec::new();
    for t in tokens {
        if let TokKind::Punct(p) = t.kind {
            match p {
                "(" | "[" | "{" => stack.push((p, t.start)),
                ")" | "]" | "}" => {
                    let open = match p {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    match stack.pop() {
                        Some((o, _)) if o == open => {}
                        _ => {
                            return Err(LexError {
                                offset: t.start,
                                message: format!("unbalanced `{p}`"),
                            })
                        }
                    }
                }
                _ => {}
            }
        }
    }
    if let Some((p, offset)) = stack.pop() {
        return Err(LexError {
            offset,
            message: format!("unclosed `{p}`"),
        });
    }
    Ok(())
}

impl Lexer<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn push(&mut self, kind: TokKind, start: usize) {
        self.tokens.push(Token { kind, start, end: self.pos });
    }

    fn err(&self, offset: usize, message: &str) -> LexError {
        LexError {
            offset,
            message: message.to_string(),
        }
    }

    fn run(&mut self) -> Result<(), LexError> {
        if self.starts_with("#!") {
            self.skip_line();
        }
        while let Some(c) = self.peek() {
            let start = self.pos;
            if c == '\n' {
                self.pos += 1;
                self.push(TokKind::Newline, start);
            } else if c == '\\' && matches!(self.peek_at(1), Some('\n') | Some('\r')) {
                // explicit line continuation
                self.pos += 1;
                if self.starts_with("\r\n") {
                    self.pos += 2;
                } else {
                    self.pos += 1;
                }
            } else if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else if self.dialect == Dialect::JsStyle && self.starts_with("//") {
                self.skip_line();
            } else if self.dialect == Dialect::JsStyle && self.starts_with("/*") {
                match self.src[self.pos + 2..].find("*/") {
                    Some(i) => {
                        let end = self.pos + 2 + i + 2;
                        // keep line structure for statement splitting
                        if self.src[self.pos..end].contains('\n') {
                            self.pos = end;
                            self.push(TokKind::Newline, start);
                        } else {
                            self.pos = end;
                        }
                    }
                    None => return Err(self.err(start, "unterminated block comment")),
                }
            } else if self.dialect == Dialect::PyStyle && c == '#' {
                self.skip_line();
            } else if let Some(quote_len) = self.string_start() {
                let lit = self.lex_string(quote_len)?;
                self.push(TokKind::Str(lit), start);
            } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                self.lex_number();
                let text = self.src[start..self.pos].to_string();
                self.push(TokKind::Num(text), start);
            } else if is_ident_start(c) {
                while self.peek().is_some_and(is_ident_continue) {
                    self.pos += self.peek().unwrap().len_utf8();
                }
                let text = self.src[start..self.pos].to_string();
                self.push(TokKind::Ident(text), start);
            } else if c == '/' && self.dialect == Dialect::JsStyle && self.regex_allowed() {
                self.lex_regex()?;
                self.push(TokKind::Punct("/regex/"), start);
            } else if let Some(p) = PUNCTS.iter().find(|p| self.starts_with(p)) {
                self.pos += p.len();
                self.push(TokKind::Punct(p), start);
            } else {
                // stray character (e.g. a backslash); skip it
                self.pos += c.len_utf8();
            }
        }
        Ok(())
    }

    fn skip_line(&mut self) {
        match self.src[self.pos..].find('\n') {
            Some(i) => self.pos += i,
            None => self.pos = self.src.len(),
        }
    }

    fn lex_number(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn regex_allowed(&self) -> bool {
        match self.tokens.iter().rev().find(|t| !t.is_newline()) {
            None => true,
            Some(t) => match &t.kind {
                TokKind::Ident(s) => JS_REGEX_AFTER_KEYWORDS.contains(&s.as_str()),
                TokKind::Num(_) | TokKind::Str(_) => false,
                TokKind::Punct(p) => !matches!(*p, ")" | "]" | "}" | "++" | "--" | "/regex/"),
                TokKind::Newline => true,
            },
        }
    }

    fn lex_regex(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut in_class = false;
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err(start, "unterminated regular expression"));
            };
            match c {
                '\n' => return Err(self.err(start, "unterminated regular expression")),
                '\\' => {
                    self.pos += 1;
                    if let Some(n) = self.peek() {
                        self.pos += n.len_utf8();
                    }
                    continue;
                }
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => {
                    self.pos += 1;
                    break;
                }
                _ => {}
            }
            self.pos += c.len_utf8();
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        Ok(())
    }

    /// Returns the length of the prefix+opening quote if a string starts here.
    fn string_start(&self) -> Option<usize> {
        let rest = &self.src[self.pos..];
        let c = rest.chars().next()?;
        match self.dialect {
            Dialect::JsStyle => matches!(c, '\'' | '"' | '`').then_some(0),
            Dialect::PyStyle => {
                if matches!(c, '\'' | '"') {
                    return Some(0);
                }
                let prefix: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).take(3).collect();
                if prefix.is_empty() || prefix.len() > 2 {
                    return None;
                }
                let lower = prefix.to_ascii_lowercase();
                let valid = matches!(lower.as_str(), "r" | "b" | "u" | "f" | "rb" | "br" | "fr" | "rf");
                let next = rest[prefix.len()..].chars().next();
                (valid && matches!(next, Some('\'') | Some('"'))).then_some(prefix.len())
            }
        }
    }

    fn lex_string(&mut self, prefix_len: usize) -> Result<StrLit, LexError> {
        let start = self.pos;
        let prefix = self.src[self.pos..self.pos + prefix_len].to_ascii_lowercase();
        self.pos += prefix_len;
        let quote = self.peek().unwrap();
        let raw = prefix.contains('r');
        let interpolating_py = prefix.contains('f');
        let triple = self.dialect == Dialect::PyStyle && self.src[self.pos..].starts_with(&quote.to_string().repeat(3));
        let template = self.dialect == Dialect::JsStyle && quote == '`';
        let closer: String = if triple { quote.to_string().repeat(3) } else { quote.to_string() };
        self.pos += closer.len();

        let mut parts = Vec::new();
        let mut lit = String::new();
        loop {
            if self.pos >= self.src.len() {
                return Err(self.err(start, "unterminated string literal"));
            }
            if self.starts_with(&closer) {
                self.pos += closer.len();
                break;
            }
            let c = self.peek().unwrap();
            if c == '\n' && !triple && !template {
                return Err(self.err(start, "unterminated string literal"));
            }
            if c == '\\' && !raw {
                self.pos += 1;
                self.decode_escape(&mut lit);
                continue;
            }
            if c == '\\' && raw {
                // raw strings still cannot end on an escaped quote
                lit.push('\\');
                self.pos += 1;
                if let Some(n) = self.peek() {
                    lit.push(n);
                    self.pos += n.len_utf8();
                }
                continue;
            }
            let js_hole = self.dialect == Dialect::JsStyle && self.starts_with("${");
            let py_hole = interpolating_py && c == '{';
            if py_hole && self.starts_with("{{") {
                lit.push('{');
                self.pos += 2;
                continue;
            }
            if interpolating_py && self.starts_with("}}") {
                lit.push('}');
                self.pos += 2;
                continue;
            }
            if js_hole || py_hole {
                let open = self.pos;
                self.pos += if js_hole { 2 } else { 1 };
                let inner_start = self.pos;
                self.skip_balanced_expr(open)?;
                let mut expr = self.src[inner_start..self.pos - 1].trim().to_string();
                if py_hole {
                    expr = strip_format_spec(&expr);
                }
                if !lit.is_empty() {
                    parts.push(StrPart::Lit(std::mem::take(&mut lit)));
                }
                parts.push(StrPart::Hole(expr));
                continue;
            }
            lit.push(c);
            self.pos += c.len_utf8();
        }
        if !lit.is_empty() || parts.is_empty() {
            parts.push(StrPart::Lit(lit));
        }
        Ok(StrLit {
            parts,
            plain: !template && !interpolating_py,
        })
    }

    /// Skips an interpolated expression up to and including its closing `}`,
    /// honoring nested braces and nested string literals.
    fn skip_balanced_expr(&mut self, open: usize) -> Result<(), LexError> {
        let mut depth = 1usize;
        while let Some(c) = self.peek() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        return Ok(());
                    }
                }
                '\'' | '"' | '`' => {
                    let q = c;
                    self.pos += 1;
                    while let Some(n) = self.peek() {
                        self.pos += n.len_utf8();
                        if n == '\\' {
                            if let Some(e) = self.peek() {
                                self.pos += e.len_utf8();
                            }
                        } else if n == q {
                            break;
                        }
                    }
                    continue;
                }
                _ => {}
            }
            self.pos += c.len_utf8();
        }
        Err(self.err(open, "unterminated interpolation"))
    }

    fn decode_escape(&mut self, out: &mut String) {
        let Some(c) = self.peek() else { return };
        self.pos += c.len_utf8();
        match c {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => {}
            '0' => out.push('\0'),
            '\n' => {}
            '\r' => {
                if self.peek() == Some('\n') {
                    self.pos += 1;
                }
            }
            'x' => {
                let hex = &self.src[self.pos..self.src.len().min(self.pos + 2)];
                if let Some(ch) = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32) {
                    out.push(ch);
                    self.pos += 2;
                }
            }
            'u' => {
                if self.peek() == Some('{') {
                    if let Some(close) = self.src[self.pos..].find('}') {
                        let hex = &self.src[self.pos + 1..self.pos + close];
                        if let Some(ch) = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32) {
                            out.push(ch);
                        }
                        self.pos += close + 1;
                    }
                } else {
                    let end = self.src.len().min(self.pos + 4);
                    let hex = &self.src[self.pos..end];
                    if let Some(ch) = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32) {
                        out.push(ch);
                        self.pos = end;
                    }
                }
            }
            other => out.push(other),
        }
    }
}

/// Drops an f-string conversion (`!r`) or format spec (`:>10`) at top level.
fn strip_format_spec(expr: &str) -> String {
    let mut depth = 0i32;
    for (i, c) in expr.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '!' if depth == 0 && !expr[i + 1..].starts_with('=') => return expr[..i].trim().to_string(),
            ':' if depth == 0 => return expr[..i].trim().to_string(),
            _ => {}
        }
    }
    expr.to_string()
}
