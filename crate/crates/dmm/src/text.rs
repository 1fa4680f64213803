//! Three textual views of a V-value, each with a printer and a parser.
//!
//! * term list: one term per line, `(:foo ⤳ :bar ⤳ 7)`; the scalar
//!   component of the root is `(⤳ 3.5)`.
//! * prefix tree: one node per line, indented two spaces per level, with the
//!   node's leaf after `⤳`.
//! * nested-map literal: `{:number 3.5, :foo {:number 2, :bar 7}}`, where a
//!   child holding only a scalar is written as a bare number.
//!
//! Sample leaves print as `<"element", 1>`. The zero value prints as `{}` in
//! every view. Labels that are not plain keywords are written as JSON
//! strings. Parsers accept `~>` in place of `⤳`.

use std::fmt::Write as _;

use dmm_core::samples::{SampleLeaf, Sign};
use dmm_core::vvalue::{canonicalize, RawValue, NUMBER_KEY, SAMPLE_KEY};
use dmm_core::{Label, VValue};
use thiserror::Error;

pub const ARROW: &str = "⤳";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Terms,
    Tree,
    Literal,
}

impl View {
    pub const ALL: [View; 3] = [View::Terms, View::Tree, View::Literal];

    pub fn name(self) -> &'static str {
        match self {
            View::Terms => "terms",
            View::Tree => "tree",
            View::Literal => "literal",
        }
    }

    pub fn print(self, v: &VValue) -> String {
        match self {
            View::Terms => print_terms(v),
            View::Tree => print_tree(v),
            View::Literal => print_literal(v),
        }
    }

    pub fn parse(self, text: &str) -> Result<VValue, ParseError> {
        match self {
            View::Terms => parse_terms(text),
            View::Tree => parse_tree(text),
            View::Literal => parse_literal(text),
        }
    }
}

fn is_keyword(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || "_*!?=".contains(first))
        && chars.all(|c| c.is_ascii_alphanumeric() || "-_*+!?=./".contains(c))
}

fn write_label(out: &mut String, label: &str) {
    if is_keyword(label) {
        out.push(':');
        out.push_str(label);
    } else {
        out.push_str(&serde_json::to_string(label).expect("strings serialize"));
    }
}

fn write_sample(out: &mut String, s: &SampleLeaf) {
    let _ = write!(
        out,
        "<{}, {}>",
        serde_json::to_string(s.element()).expect("strings serialize"),
        s.sign().as_i8()
    );
}

pub fn print_terms(v: &VValue) -> String {
    if v.is_zero() {
        return "{}".into();
    }
    let mut lines = Vec::new();
    let mut path = Vec::new();
    collect_terms(v, &mut path, &mut lines);
    lines.join("\n")
}

fn collect_terms<'a>(v: &'a VValue, path: &mut Vec<&'a Label>, lines: &mut Vec<String>) {
    let prefix = |path: &[&Label]| {
        let mut s = String::from("(");
        for l in path {
            write_label(&mut s, l.as_str());
            s.push(' ');
            s.push_str(ARROW);
            s.push(' ');
        }
        if path.is_empty() {
            s.push_str(ARROW);
            s.push(' ');
        }
        s
    };
    if v.number() != 0.0 {
        lines.push(format!("{}{})", prefix(path), v.number()));
    }
    if let Some(s) = v.sample() {
        let mut line = prefix(path);
        write_sample(&mut line, s);
        line.push(')');
        lines.push(line);
    }
    for (l, child) in v.children() {
        path.push(l);
        collect_terms(child, path, lines);
        path.pop();
    }
}

pub fn print_tree(v: &VValue) -> String {
    if v.is_zero() {
        return "{}".into();
    }
    let mut lines = Vec::new();
    let mut root = String::new();
    write_leaves(&mut root, v);
    if !root.is_empty() {
        lines.push(root.trim_start().to_string());
    }
    tree_children(v, 0, &mut lines);
    lines.join("\n")
}

fn write_leaves(out: &mut String, v: &VValue) {
    if v.number() != 0.0 {
        let _ = write!(out, " {ARROW} {}", v.number());
    }
    if let Some(s) = v.sample() {
        let _ = write!(out, " {ARROW} ");
        write_sample(out, s);
    }
}

fn tree_children(v: &VValue, depth: usize, lines: &mut Vec<String>) {
    for (l, child) in v.children() {
        let mut line = "  ".repeat(depth);
        write_label(&mut line, l.as_str());
        write_leaves(&mut line, child);
        lines.push(line);
        tree_children(child, depth + 1, lines);
    }
}

pub fn print_literal(v: &VValue) -> String {
    let mut out = String::new();
    literal_map(&mut out, v);
    out
}

fn literal_map(out: &mut String, v: &VValue) {
    out.push('{');
    let mut first = true;
    let mut sep = |out: &mut String| {
        if !first {
            out.push_str(", ");
        }
        first = false;
    };
    if v.number() != 0.0 {
        sep(out);
        let _ = write!(out, ":{NUMBER_KEY} {}", v.number());
    }
    if let Some(s) = v.sample() {
        sep(out);
        let _ = write!(
            out,
            ":{SAMPLE_KEY} {{:element {}, :sign {}}}",
            serde_json::to_string(s.element()).expect("strings serialize"),
            s.sign().as_i8()
        );
    }
    for (l, child) in v.children() {
        sep(out);
        write_label(out, l.as_str());
        out.push(' ');
        if child.child_count() == 0 && child.sample().is_none() {
            let _ = write!(out, "{}", child.number());
        } else {
            literal_map(out, child);
        }
    }
    out.push('}');
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Open(char),
    Close(char),
    Arrow,
    Plus,
    Keyword(String),
    Str(String),
    Number(f64),
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Lexer { text, pos: 0, line }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            message: message.into(),
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        self.line += rest[..rest.len() - trimmed.len()].matches('\n').count();
        self.pos += rest.len() - trimmed.len();
        let Some(c) = trimmed.chars().next() else {
            return Ok(None);
        };
        let advance = |lexer: &mut Self, n: usize| lexer.pos += n;
        if trimmed.starts_with("~>") {
            advance(self, 2);
            return Ok(Some(Token::Arrow));
        }
        let tok = match c {
            '{' | '(' | '<' => {
                advance(self, 1);
                Token::Open(c)
            }
            '}' | ')' | '>' => {
                advance(self, 1);
                Token::Close(c)
            }
            '⤳' => {
                advance(self, c.len_utf8());
                Token::Arrow
            }
            '"' => {
                let mut escaped = false;
                let end = trimmed[1..]
                    .char_indices()
                    .find(|&(_, ch)| {
                        let stop = ch == '"' && !escaped;
                        escaped = ch == '\\' && !escaped;
                        stop
                    })
                    .map(|(i, _)| i + 2)
                    .ok_or_else(|| self.err("unterminated string"))?;
                let s: String =
                    serde_json::from_str(&trimmed[..end]).map_err(|e| self.err(format!("bad string: {e}")))?;
                advance(self, end);
                Token::Str(s)
            }
            _ => {
                let end = trimmed
                    .find(|ch: char| ch.is_whitespace() || ",{}()<>\"⤳".contains(ch))
                    .unwrap_or(trimmed.len());
                let atom = &trimmed[..end];
                advance(self, end);
                if atom == "+" {
                    Token::Plus
                } else if let Some(k) = atom.strip_prefix(':') {
                    Token::Keyword(k.to_string())
                } else {
                    let n: f64 = atom.parse().map_err(|_| self.err(format!("unexpected `{atom}`")))?;
                    if !n.is_finite() {
                        return Err(self.err(format!("non-finite number `{atom}`")));
                    }
                    Token::Number(n)
                }
            }
        };
        Ok(Some(tok))
    }

    fn tokens(mut self) -> Result<Vec<(usize, Token)>, ParseError> {
        let mut out = Vec::new();
        while let Some(t) = self.next_token()? {
            out.push((self.line, t));
        }
        Ok(out)
    }
}

/// Mutable prefix tree used while parsing.
#[derive(Default)]
struct Node {
    number: f64,
    sample: Option<SampleLeaf>,
    children: Vec<(String, Node)>,
}

impl Node {
    fn child(&mut self, label: &str) -> &mut Node {
        let i = match self.children.iter().position(|(l, _)| l == label) {
            Some(i) => i,
            None => {
                self.children.push((label.to_string(), Node::default()));
                self.children.len() - 1
            }
        };
        &mut self.children[i].1
    }

    fn at(&mut self, path: &[String]) -> &mut Node {
        path.iter().fold(self, |node, l| node.child(l))
    }

    fn set_sample(&mut self, s: SampleLeaf, line: usize) -> Result<(), ParseError> {
        if self.sample.replace(s).is_some() {
            return Err(ParseError {
                line,
                message: "two samples at one path".into(),
            });
        }
        Ok(())
    }

    fn to_raw(&self) -> RawValue {
        let mut entries = Vec::new();
        if self.number != 0.0 {
            entries.push((NUMBER_KEY.to_string(), RawValue::Number(self.number)));
        }
        if let Some(s) = &self.sample {
            entries.push((SAMPLE_KEY.to_string(), s.to_raw()));
        }
        for (l, c) in &self.children {
            entries.push((l.clone(), c.to_raw()));
        }
        RawValue::Map(entries)
    }
}

fn finish(raw: &RawValue, line: usize) -> Result<VValue, ParseError> {
    canonicalize(raw).map_err(|e| ParseError {
        line,
        message: e.to_string(),
    })
}

fn check_label(label: &str, line: usize) -> Result<String, ParseError> {
    Label::new(label).map(|_| label.to_string()).map_err(|e| ParseError {
        line,
        message: e.to_string(),
    })
}

struct Cursor {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map_or(1, |(l, _)| *l)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line(),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self
            .tokens
            .get(self.pos)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Token) -> Result<(), ParseError> {
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            self.pos -= 1;
            Err(self.err(format!("expected {want:?}, found {got:?}")))
        }
    }

    fn sample(&mut self) -> Result<SampleLeaf, ParseError> {
        let element = match self.next()? {
            Token::Str(s) => s,
            other => return Err(self.err(format!("expected sample element, found {other:?}"))),
        };
        let sign = self.sign()?;
        self.expect(Token::Close('>'))?;
        SampleLeaf::new(element, sign).map_err(|e| self.err(e.to_string()))
    }

    fn sign(&mut self) -> Result<Sign, ParseError> {
        match self.next()? {
            Token::Number(1.0) => Ok(Sign::Plus),
            Token::Number(-1.0) => Ok(Sign::Minus),
            other => Err(self.err(format!("expected sign 1 or -1, found {other:?}"))),
        }
    }

    fn label(&mut self) -> Result<Option<String>, ParseError> {
        let line = self.line();
        match self.peek() {
            Some(Token::Keyword(k)) | Some(Token::Str(k)) => {
                let k = k.clone();
                self.pos += 1;
                check_label(&k, line).map(Some)
            }
            _ => Ok(None),
        }
    }
}

fn is_zero_marker(text: &str) -> bool {
    text.trim() == "{}"
}

pub fn parse_terms(text: &str) -> Result<VValue, ParseError> {
    if is_zero_marker(text) {
        return Ok(VValue::zero());
    }
    let mut cur = Cursor {
        tokens: Lexer::new(text, 1).tokens()?,
        pos: 0,
    };
    let mut root = Node::default();
    while cur.peek().is_some() {
        if cur.peek() == Some(&Token::Plus) {
            cur.pos += 1;
            continue;
        }
        let line = cur.line();
        cur.expect(Token::Open('('))?;
        let mut path = Vec::new();
        loop {
            if let Some(l) = cur.label()? {
                path.push(l);
                cur.expect(Token::Arrow)?;
            } else {
                if path.is_empty() {
                    cur.expect(Token::Arrow)?;
                }
                break;
            }
        }
        match cur.next()? {
            Token::Number(n) => root.at(&path).number += n,
            Token::Open('<') => {
                let s = cur.sample()?;
                root.at(&path).set_sample(s, line)?;
            }
            other => return Err(cur.err(format!("expected a number or a sample, found {other:?}"))),
        }
        cur.expect(Token::Close(')'))?;
    }
    finish(&root.to_raw(), 1)
}

pub fn parse_tree(text: &str) -> Result<VValue, ParseError> {
    if is_zero_marker(text) {
        return Ok(VValue::zero());
    }
    let mut root = Node::default();
    let mut stack: Vec<String> = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let indent = raw_line.len() - raw_line.trim_start_matches(' ').len();
        let err = |message: String| ParseError { line, message };
        if indent % 2 != 0 {
            return Err(err("indentation must be a multiple of two spaces".into()));
        }
        let depth = indent / 2;
        let mut cur = Cursor {
            tokens: Lexer::new(raw_line, line).tokens()?,
            pos: 0,
        };
        let path: Vec<String> = match cur.label()? {
            Some(label) => {
                if depth > stack.len() {
                    return Err(err("indented deeper than its parent".into()));
                }
                stack.truncate(depth);
                stack.push(label);
                stack.clone()
            }
            None if depth == 0 => {
                stack.clear();
                Vec::new()
            }
            None => return Err(err("expected a label".into())),
        };
        let node = root.at(&path);
        while cur.peek().is_some() {
            cur.expect(Token::Arrow)?;
            match cur.next()? {
                Token::Number(n) => node.number += n,
                Token::Open('<') => {
                    let s = cur.sample()?;
                    node.set_sample(s, line)?;
                }
                other => return Err(err(format!("expected a number or a sample, found {other:?}"))),
            }
        }
    }
    finish(&root.to_raw(), 1)
}

pub fn parse_literal(text: &str) -> Result<VValue, ParseError> {
    let mut cur = Cursor {
        tokens: Lexer::new(text, 1).tokens()?,
        pos: 0,
    };
    let raw = literal_value(&mut cur)?;
    if cur.peek().is_some() {
        return Err(cur.err("trailing input"));
    }
    finish(&raw, 1)
}

fn literal_value(cur: &mut Cursor) -> Result<RawValue, ParseError> {
    match cur.next()? {
        Token::Number(n) => Ok(RawValue::Number(n)),
        Token::Open('{') => {
            let mut entries = Vec::new();
            loop {
                if cur.peek() == Some(&Token::Close('}')) {
                    cur.pos += 1;
                    return Ok(RawValue::Map(entries));
                }
                match cur.next()? {
                    Token::Keyword(k) if k == NUMBER_KEY => {
                        entries.push((k, literal_value(cur)?));
                    }
                    Token::Keyword(k) if k == SAMPLE_KEY => {
                        entries.push((k, literal_sample(cur)?));
                    }
                    Token::Keyword(k) | Token::Str(k) => {
                        let k = check_label(&k, cur.line())?;
                        entries.push((k, literal_value(cur)?));
                    }
                    other => return Err(cur.err(format!("expected a key, found {other:?}"))),
                }
            }
        }
        other => Err(cur.err(format!("expected a map or a number, found {other:?}"))),
    }
}

fn literal_sample(cur: &mut Cursor) -> Result<RawValue, ParseError> {
    cur.expect(Token::Open('{'))?;
    let mut element = None;
    let mut sign = None;
    while cur.peek() != Some(&Token::Close('}')) {
        match (cur.next()?, cur.next()?) {
            (Token::Keyword(k), Token::Str(s)) if k == "element" => element = Some(s),
            (Token::Keyword(k), Token::Number(n)) if k == "sign" => sign = Some(n),
            (k, _) => return Err(cur.err(format!("unexpected sample field {k:?}"))),
        }
    }
    cur.pos += 1;
    match (element, sign) {
        (Some(e), Some(s)) => Ok(RawValue::Map(vec![
            ("element".into(), RawValue::Text(e)),
            ("sign".into(), RawValue::Number(s)),
        ])),
        _ => Err(cur.err("sample needs :element and :sign")),
    }
}
