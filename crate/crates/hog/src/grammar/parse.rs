//! Parser for the grammar text format.
//!
//! The format is line-oriented with `#` comments:
//!
//! ```text
//! %terminal a 1
//! %nonterminal F (o -> o) -> o
//! %start S
//! F f = f (f e).
//! ```
//!
//! Arrows in sorts are right-associative, application in rule bodies is
//! left-associative, and every rule is terminated by `.`. Extended term sets
//! `{ t1 | t2 }` are accepted only under the `%extended` header, and names
//! with the reserved `$` prefix only under `%generated` (the printer emits
//! that header automatically for grammars containing generated symbols).

use super::{is_generated_name, Grammar, Rule, Sort, SymbolKind, Term};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate declaration of `{name}` at line {line}")]
    DuplicateDeclaration { name: String, line: usize },
    #[error("unknown symbol `{name}` at line {line}")]
    UnknownSymbol { name: String, line: usize },
    #[error("reserved generated name `{name}` at line {line} (missing %generated header)")]
    ReservedName { name: String, line: usize },
    #[error("extended term set at line {line} (missing %extended header)")]
    ExtendedSyntax { line: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept `$`-prefixed names even without the `%generated` header.
    pub allow_generated: bool,
    /// Accept term sets even without the `%extended` header.
    pub allow_extended: bool,
}

/// Raw (unresolved) term tree shared by the plain and extended parsers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum PTerm {
    Name(String, usize),
    App(Box<PTerm>, Box<PTerm>),
    /// `{ t1 | t2 | .. }`, with the source line for error reporting.
    Set(Vec<PTerm>, usize),
}

#[derive(Clone, Debug)]
pub(crate) struct RawRule {
    pub lhs: String,
    pub params: Vec<String>,
    pub body: PTerm,
}

#[derive(Clone, Debug)]
pub(crate) struct RawGrammar {
    pub extended: bool,
    pub terminals: BTreeMap<String, usize>,
    pub nonterminals: BTreeMap<String, Sort>,
    pub rules: Vec<RawRule>,
    pub start: String,
}

impl RawGrammar {
    pub(crate) fn kind_of(&self, name: &str) -> Option<SymbolKind> {
        if self.nonterminals.contains_key(name) {
            Some(SymbolKind::NonTerminal)
        } else if self.terminals.contains_key(name) {
            Some(SymbolKind::Terminal)
        } else {
            None
        }
    }
}

/// Parses an ordinary (non-extended) grammar.
pub fn parse_grammar(text: &str) -> Result<Grammar, ParseError> {
    parse_grammar_with(text, ParseOptions::default())
}

/// Parses an ordinary grammar with explicit lenience options.
pub fn parse_grammar_with(text: &str, opts: ParseOptions) -> Result<Grammar, ParseError> {
    let raw = parse_raw(text, opts)?;
    if raw.extended {
        return Err(ParseError::Syntax {
            line: 1,
            col: 1,
            msg: "%extended grammar given where an ordinary grammar was expected".to_string(),
        });
    }
    let mut rules = Vec::new();
    for r in &raw.rules {
        let body = resolve_plain(&raw, &r.params, &r.body)?;
        rules.push(Rule {
            lhs: r.lhs.clone(),
            params: r.params.clone(),
            body,
        });
    }
    Ok(Grammar::new(
        raw.terminals,
        raw.nonterminals,
        rules,
        raw.start,
    ))
}

fn resolve_plain(raw: &RawGrammar, params: &[String], t: &PTerm) -> Result<Term, ParseError> {
    match t {
        PTerm::Name(n, line) => resolve_name(raw, params, n, *line),
        PTerm::App(f, a) => Ok(Term::app(
            resolve_plain(raw, params, f)?,
            resolve_plain(raw, params, a)?,
        )),
        PTerm::Set(_, line) => Err(ParseError::ExtendedSyntax { line: *line }),
    }
}

pub(crate) fn resolve_name(
    raw: &RawGrammar,
    params: &[String],
    name: &str,
    line: usize,
) -> Result<Term, ParseError> {
    if params.iter().any(|p| p == name) {
        return Ok(Term::var(name));
    }
    match raw.kind_of(name) {
        Some(SymbolKind::NonTerminal) => Ok(Term::nt(name)),
        Some(SymbolKind::Terminal) => Ok(Term::tm(name)),
        _ => Err(ParseError::UnknownSymbol {
            name: name.to_string(),
            line,
        }),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Directive(String),
    Ident(String),
    Int(usize),
    LParen,
    RParen,
    Arrow,
    Equals,
    Dot,
    LBrace,
    RBrace,
    Pipe,
}

#[derive(Clone, Debug)]
struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '#' => {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '(' => {
                bump!();
                out.push(Lexed { tok: Tok::LParen, line: tl, col: tc });
            }
            ')' => {
                bump!();
                out.push(Lexed { tok: Tok::RParen, line: tl, col: tc });
            }
            '{' => {
                bump!();
                out.push(Lexed { tok: Tok::LBrace, line: tl, col: tc });
            }
            '}' => {
                bump!();
                out.push(Lexed { tok: Tok::RBrace, line: tl, col: tc });
            }
            '|' => {
                bump!();
                out.push(Lexed { tok: Tok::Pipe, line: tl, col: tc });
            }
            '=' => {
                bump!();
                out.push(Lexed { tok: Tok::Equals, line: tl, col: tc });
            }
            '.' => {
                bump!();
                out.push(Lexed { tok: Tok::Dot, line: tl, col: tc });
            }
            '-' => {
                bump!();
                if chars.peek() == Some(&'>') {
                    bump!();
                    out.push(Lexed { tok: Tok::Arrow, line: tl, col: tc });
                } else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "expected `->`".to_string(),
                    });
                }
            }
            '%' => {
                bump!();
                let mut word = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        word.push(c2);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push(Lexed { tok: Tok::Directive(word), line: tl, col: tc });
            }
            '0'..='9' => {
                let mut n = 0usize;
                while let Some(&c2) = chars.peek() {
                    if let Some(d) = c2.to_digit(10) {
                        n = n * 10 + d as usize;
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push(Lexed { tok: Tok::Int(n), line: tl, col: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let mut name = String::new();
                if c == '$' {
                    name.push(c);
                    bump!();
                }
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' {
                        name.push(c2);
                        bump!();
                    } else {
                        break;
                    }
                }
                if name.is_empty() || name == "$" {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        msg: "empty identifier".to_string(),
                    });
                }
                // Subscript suffixes `'{..}` attach to the identifier; the
                // braced text is kept verbatim as part of the name.
                loop {
                    let mut look = chars.clone();
                    if look.next() == Some('\'') && look.next() == Some('{') {
                        bump!();
                        bump!();
                        name.push('\'');
                        name.push('{');
                        let mut depth = 1usize;
                        loop {
                            match bump!() {
                                Some('{') => {
                                    depth += 1;
                                    name.push('{');
                                }
                                Some('}') => {
                                    depth -= 1;
                                    name.push('}');
                                    if depth == 0 {
                                        break;
                                    }
                                }
                                Some(c2) => name.push(c2),
                                None => {
                                    return Err(ParseError::Syntax {
                                        line: tl,
                                        col: tc,
                                        msg: "unterminated name subscript".to_string(),
                                    })
                                }
                            }
                        }
                    } else {
                        break;
                    }
                }
                out.push(Lexed { tok: Tok::Ident(name), line: tl, col: tc });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser proper

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Lexed> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Lexed> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|l| (l.line, l.col))
            .or_else(|| self.toks.last().map(|l| (l.line, l.col + 1)))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize), ParseError> {
        match self.next() {
            Some(Lexed { tok: Tok::Ident(n), line, .. }) => Ok((n, line)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected an identifier"))
            }
        }
    }

    fn parse_sort(&mut self) -> Result<Sort, ParseError> {
        let lhs = self.parse_sort_atom()?;
        if matches!(self.peek().map(|l| &l.tok), Some(Tok::Arrow)) {
            self.next();
            let rhs = self.parse_sort()?;
            Ok(Sort::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_sort_atom(&mut self) -> Result<Sort, ParseError> {
        match self.next() {
            Some(Lexed { tok: Tok::Ident(n), .. }) if n == "o" => Ok(Sort::Base),
            Some(Lexed { tok: Tok::LParen, .. }) => {
                let s = self.parse_sort()?;
                match self.next() {
                    Some(Lexed { tok: Tok::RParen, .. }) => Ok(s),
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        Err(self.err("expected `)` in sort"))
                    }
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a sort (`o` or parenthesized arrow)"))
            }
        }
    }

    fn parse_term(&mut self, extended: bool) -> Result<PTerm, ParseError> {
        let mut acc = self.parse_term_atom(extended)?;
        loop {
            match self.peek().map(|l| &l.tok) {
                Some(Tok::Ident(_)) | Some(Tok::LParen) | Some(Tok::LBrace) => {
                    let arg = self.parse_term_atom(extended)?;
                    acc = PTerm::App(Box::new(acc), Box::new(arg));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term_atom(&mut self, extended: bool) -> Result<PTerm, ParseError> {
        match self.next() {
            Some(Lexed { tok: Tok::Ident(n), line, .. }) => Ok(PTerm::Name(n, line)),
            Some(Lexed { tok: Tok::LParen, .. }) => {
                let t = self.parse_term(extended)?;
                match self.next() {
                    Some(Lexed { tok: Tok::RParen, .. }) => Ok(t),
                    _ => {
                        self.pos = self.pos.saturating_sub(1);
                        Err(self.err("expected `)`"))
                    }
                }
            }
            Some(Lexed { tok: Tok::LBrace, line, .. }) => {
                if !extended {
                    return Err(ParseError::ExtendedSyntax { line });
                }
                let mut elems = vec![self.parse_term(extended)?];
                loop {
                    match self.next() {
                        Some(Lexed { tok: Tok::Pipe, .. }) => {
                            elems.push(self.parse_term(extended)?)
                        }
                        Some(Lexed { tok: Tok::RBrace, .. }) => break,
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            return Err(self.err("expected `|` or `}` in term set"));
                        }
                    }
                }
                Ok(PTerm::Set(elems, line))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a term"))
            }
        }
    }
}

pub(crate) fn parse_raw(text: &str, opts: ParseOptions) -> Result<RawGrammar, ParseError> {
    let toks = lex(text)?;
    let extended = opts.allow_extended
        || toks
            .iter()
            .any(|l| matches!(&l.tok, Tok::Directive(d) if d == "extended"));
    let generated = opts.allow_generated
        || toks
            .iter()
            .any(|l| matches!(&l.tok, Tok::Directive(d) if d == "generated"));
    let saw_extended_header = toks
        .iter()
        .any(|l| matches!(&l.tok, Tok::Directive(d) if d == "extended"));

    let mut p = Parser { toks, pos: 0 };
    let mut terminals: BTreeMap<String, usize> = BTreeMap::new();
    let mut nonterminals: BTreeMap<String, Sort> = BTreeMap::new();
    let mut rules: Vec<RawRule> = Vec::new();
    let mut start: Option<String> = None;

    let check_name = |name: &str, line: usize| -> Result<(), ParseError> {
        if is_generated_name(name) && !generated {
            Err(ParseError::ReservedName {
                name: name.to_string(),
                line,
            })
        } else {
            Ok(())
        }
    };

    while let Some(l) = p.peek() {
        match &l.tok {
            Tok::Directive(d) => {
                let d = d.clone();
                p.next();
                match d.as_str() {
                    "extended" | "generated" => {}
                    "terminal" => {
                        let (name, line) = p.expect_ident()?;
                        check_name(&name, line)?;
                        let arity = match p.next() {
                            Some(Lexed { tok: Tok::Int(n), .. }) => n,
                            _ => {
                                p.pos = p.pos.saturating_sub(1);
                                return Err(p.err("expected a terminal arity"));
                            }
                        };
                        if terminals.contains_key(&name) || nonterminals.contains_key(&name) {
                            return Err(ParseError::DuplicateDeclaration { name, line });
                        }
                        terminals.insert(name, arity);
                    }
                    "nonterminal" => {
                        let (name, line) = p.expect_ident()?;
                        check_name(&name, line)?;
                        let sort = p.parse_sort()?;
                        if terminals.contains_key(&name) || nonterminals.contains_key(&name) {
                            return Err(ParseError::DuplicateDeclaration { name, line });
                        }
                        nonterminals.insert(name, sort);
                    }
                    "start" => {
                        let (name, _) = p.expect_ident()?;
                        if start.is_some() {
                            return Err(p.err("duplicate %start directive"));
                        }
                        start = Some(name);
                    }
                    other => return Err(p.err(format!("unknown directive `%{other}`"))),
                }
            }
            Tok::Ident(_) => {
                let (lhs, lhs_line) = p.expect_ident()?;
                check_name(&lhs, lhs_line)?;
                let mut params = Vec::new();
                loop {
                    match p.peek().map(|l| l.tok.clone()) {
                        Some(Tok::Ident(_)) => {
                            let (param, line) = p.expect_ident()?;
                            if params.contains(&param) {
                                return Err(ParseError::Syntax {
                                    line,
                                    col: 0,
                                    msg: format!("duplicate parameter `{param}`"),
                                });
                            }
                            if terminals.contains_key(&param) || nonterminals.contains_key(&param)
                            {
                                return Err(ParseError::Syntax {
                                    line,
                                    col: 0,
                                    msg: format!(
                                        "parameter `{param}` collides with a declared symbol"
                                    ),
                                });
                            }
                            params.push(param);
                        }
                        Some(Tok::Equals) => {
                            p.next();
                            break;
                        }
                        _ => return Err(p.err("expected a parameter or `=`")),
                    }
                }
                let body = p.parse_term(extended)?;
                match p.next() {
                    Some(Lexed { tok: Tok::Dot, .. }) => {}
                    _ => {
                        p.pos = p.pos.saturating_sub(1);
                        return Err(p.err("expected `.` to terminate the rule"));
                    }
                }
                if !nonterminals.contains_key(&lhs) {
                    return Err(ParseError::UnknownSymbol {
                        name: lhs,
                        line: lhs_line,
                    });
                }
                rules.push(RawRule {
                    lhs,
                    params,
                    body,
                });
            }
            _ => return Err(p.err("expected a directive or a rule")),
        }
    }

    let start = start.ok_or(ParseError::Syntax {
        line: 1,
        col: 1,
        msg: "missing %start directive".to_string(),
    })?;

    Ok(RawGrammar {
        extended: saw_extended_header,
        terminals,
        nonterminals,
        rules,
        start,
    })
}
