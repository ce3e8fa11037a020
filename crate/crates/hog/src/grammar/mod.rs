//! Higher-order grammars: sorts (simple types over the base `o`), applicative
//! terms, rewrite rules, and well-formedness checking.
//!
//! A grammar is a quadruple of a ranked terminal alphabet, a map from
//! non-terminals to sorts, a set of rewrite rules `A x1 .. xk = body`, and a
//! start symbol of base sort. Rule bodies are applicative terms that check at
//! base sort under the declared parameter sorts.

pub(crate) mod parse;
mod print;

pub use parse::{parse_grammar, parse_grammar_with, ParseError, ParseOptions};
pub use print::{print_grammar, print_sort, print_term};

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Reserved prefix for tool-generated symbols. Input files may use such
/// names only under the `%generated` header, so fresh names never collide
/// with hand-written ones.
pub const GENERATED_PREFIX: char = '$';

/// Name of the special nullary end-of-word terminal.
pub const E: &str = "e";
/// Name of the special binary tree constructor.
pub const BR: &str = "br";

/// A simple type (sort) over the base sort `o`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Base,
    Arrow(Box<Sort>, Box<Sort>),
}

impl Sort {
    pub fn arrow(domain: Sort, codomain: Sort) -> Sort {
        Sort::Arrow(Box::new(domain), Box::new(codomain))
    }

    /// Builds `s1 -> s2 -> .. -> codomain`.
    pub fn arrows(domains: impl IntoIterator<Item = Sort>, codomain: Sort) -> Sort {
        let ds: Vec<Sort> = domains.into_iter().collect();
        ds.into_iter()
            .rev()
            .fold(codomain, |acc, d| Sort::arrow(d, acc))
    }

    /// order(o) = 0, order(s1 -> s2) = max(order(s1)+1, order(s2)).
    pub fn order(&self) -> usize {
        match self {
            Sort::Base => 0,
            Sort::Arrow(d, c) => (d.order() + 1).max(c.order()),
        }
    }

    /// arity(o) = 0, arity(s1 -> s2) = 1 + arity(s2).
    pub fn arity(&self) -> usize {
        match self {
            Sort::Base => 0,
            Sort::Arrow(_, c) => 1 + c.arity(),
        }
    }

    /// The list of argument sorts, outermost first.
    pub fn domains(&self) -> Vec<&Sort> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Sort::Arrow(d, c) = cur {
            out.push(d.as_ref());
            cur = c;
        }
        out
    }

    /// The sort left after applying `n` arguments, if the arity allows it.
    pub fn peel(&self, n: usize) -> Option<&Sort> {
        let mut cur = self;
        for _ in 0..n {
            match cur {
                Sort::Arrow(_, c) => cur = c,
                Sort::Base => return None,
            }
        }
        Some(cur)
    }

    /// All sorts occurring in `self`, including itself.
    pub fn subsorts(&self) -> Vec<&Sort> {
        let mut out = vec![self];
        if let Sort::Arrow(d, c) = self {
            out.extend(d.subsorts());
            out.extend(c.subsorts());
        }
        out
    }
}

impl fmt::Debug for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_sort(self))
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_sort(self))
    }
}

/// What a name was declared as. Terminals, non-terminals and variables are
/// distinguished purely by declaration, never by spelling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Terminal,
    NonTerminal,
    Variable,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolKind::Terminal => write!(f, "terminal"),
            SymbolKind::NonTerminal => write!(f, "non-terminal"),
            SymbolKind::Variable => write!(f, "variable"),
        }
    }
}

/// True for names carrying the reserved generated-symbol prefix.
pub fn is_generated_name(name: &str) -> bool {
    name.starts_with(GENERATED_PREFIX)
}

/// An applicative term, possibly under a lambda prefix.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    NonTerminal(String),
    Terminal(String),
    App(Box<Term>, Box<Term>),
    Abs(String, Sort, Box<Term>),
}

impl Term {
    pub fn var(n: impl Into<String>) -> Term {
        Term::Var(n.into())
    }
    pub fn nt(n: impl Into<String>) -> Term {
        Term::NonTerminal(n.into())
    }
    pub fn tm(n: impl Into<String>) -> Term {
        Term::Terminal(n.into())
    }
    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App(Box::new(fun), Box::new(arg))
    }

    /// Applies `fun` to the arguments in order.
    pub fn apps(fun: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(fun, Term::app)
    }

    /// Splits an application spine into head and arguments.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Term::App(f, a) = cur {
            args.push(a.as_ref());
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn is_applicative(&self) -> bool {
        match self {
            Term::Abs(..) => false,
            Term::App(f, a) => f.is_applicative() && a.is_applicative(),
            _ => true,
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_term(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_term(self))
    }
}

/// One rewrite rule `lhs params = body.` The parameter count always equals
/// the arity of the non-terminal's sort; parameter sorts are read off it
/// positionally.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub lhs: String,
    pub params: Vec<String>,
    pub body: Term,
}

/// A higher-order grammar. Rules are kept grouped by non-terminal name
/// (sorted), preserving the relative order of rules for the same
/// non-terminal, so printing and structural equality are deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    pub terminals: BTreeMap<String, usize>,
    pub nonterminals: BTreeMap<String, Sort>,
    rules: Vec<Rule>,
    pub start: String,
}

impl Grammar {
    pub fn new(
        terminals: BTreeMap<String, usize>,
        nonterminals: BTreeMap<String, Sort>,
        rules: Vec<Rule>,
        start: impl Into<String>,
    ) -> Grammar {
        let mut g = Grammar {
            terminals,
            nonterminals,
            rules,
            start: start.into(),
        };
        g.normalize_rule_order();
        g
    }

    fn normalize_rule_order(&mut self) {
        self.rules.sort_by(|a, b| a.lhs.cmp(&b.lhs));
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_of<'a>(&'a self, nt: &'a str) -> impl Iterator<Item = &'a Rule> {
        self.rules.iter().filter(move |r| r.lhs == nt)
    }

    pub fn push_rule(&mut self, rule: Rule) {
        self.rules.push(rule);
        self.normalize_rule_order();
    }

    /// The largest order of the sorts of non-terminals.
    pub fn order(&self) -> usize {
        self.nonterminals
            .values()
            .map(Sort::order)
            .max()
            .unwrap_or(0)
    }

    /// The sort of a declared (terminal or non-terminal) symbol.
    pub fn symbol_sort(&self, name: &str) -> Option<Sort> {
        if let Some(s) = self.nonterminals.get(name) {
            return Some(s.clone());
        }
        self.terminals
            .get(name)
            .map(|&k| Sort::arrows(std::iter::repeat_n(Sort::Base, k), Sort::Base))
    }

    /// Parameter sorts of a rule, read off the non-terminal's declared sort.
    pub fn param_sorts(&self, rule: &Rule) -> Option<Vec<Sort>> {
        let nt_sort = self.nonterminals.get(&rule.lhs)?;
        let doms = nt_sort.domains();
        if doms.len() != rule.params.len() {
            return None;
        }
        Some(doms.into_iter().cloned().collect())
    }

    /// Picks a name not declared anywhere in the grammar, trying `base`
    /// first and then `base0`, `base1`, ...
    pub fn fresh_name(&self, base: &str) -> String {
        let taken = |n: &str| self.terminals.contains_key(n) || self.nonterminals.contains_key(n);
        if !taken(base) {
            return base.to_string();
        }
        let mut i = 0usize;
        loop {
            let cand = format!("{base}{i}");
            if !taken(&cand) {
                return cand;
            }
            i += 1;
        }
    }

    /// Parameter names for generated rules that do not collide with any
    /// declared symbol (parameters may not shadow declarations).
    pub fn pick_params(&self, wanted: &[&str]) -> Vec<String> {
        let taken = |n: &str| self.terminals.contains_key(n) || self.nonterminals.contains_key(n);
        wanted
            .iter()
            .map(|w| {
                if !taken(w) {
                    return (*w).to_string();
                }
                let mut i = 0usize;
                loop {
                    let cand = format!("${w}{i}");
                    if !taken(&cand) {
                        return cand;
                    }
                    i += 1;
                }
            })
            .collect()
    }
}

/// Errors raised by simple-sort checking.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SortError {
    #[error("unbound symbol `{name}`")]
    UnboundSymbol { name: String },
    #[error("sort mismatch at `{at}`: expected {expected}, found {found}")]
    SortMismatch {
        expected: String,
        found: String,
        at: String,
    },
    #[error("rule body of `{nonterminal}` has sort {found}, not o")]
    NonBaseRuleBody { nonterminal: String, found: String },
}

/// Computes the unique sort of `t` under the variable environment `env`,
/// consulting the grammar for terminals and non-terminals.
pub fn sort_check(g: &Grammar, env: &BTreeMap<String, Sort>, t: &Term) -> Result<Sort, SortError> {
    match t {
        Term::Var(x) => env
            .get(x)
            .cloned()
            .ok_or_else(|| SortError::UnboundSymbol { name: x.clone() }),
        Term::NonTerminal(a) | Term::Terminal(a) => {
            g.symbol_sort(a)
                .ok_or_else(|| SortError::UnboundSymbol { name: a.clone() })
        }
        Term::App(f, arg) => {
            let fs = sort_check(g, env, f)?;
            let as_ = sort_check(g, env, arg)?;
            match fs {
                Sort::Arrow(d, c) if *d == as_ => Ok(*c),
                Sort::Arrow(d, _) => Err(SortError::SortMismatch {
                    expected: print_sort(&d),
                    found: print_sort(&as_),
                    at: print_term(t),
                }),
                Sort::Base => Err(SortError::SortMismatch {
                    expected: "a function sort".to_string(),
                    found: print_sort(&fs),
                    at: print_term(t),
                }),
            }
        }
        Term::Abs(x, annot, body) => {
            let mut env2 = env.clone();
            env2.insert(x.clone(), annot.clone());
            let bs = sort_check(g, &env2, body)?;
            Ok(Sort::arrow(annot.clone(), bs))
        }
    }
}

/// One violation found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    StartUndeclared { name: String },
    StartNotBase { name: String, sort: Sort },
    UndeclaredRuleHead { name: String },
    ArityMismatch { nonterminal: String, expected: usize, found: usize },
    BodyError { nonterminal: String, error: SortError },
    ReservedArity { name: String, expected: usize, found: usize },
    ReservedKind { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartUndeclared { name } => {
                write!(f, "start symbol `{name}` is not a declared non-terminal")
            }
            Violation::StartNotBase { name, sort } => {
                write!(f, "start symbol `{name}` has sort {sort}, not o")
            }
            Violation::UndeclaredRuleHead { name } => {
                write!(f, "rule for undeclared non-terminal `{name}`")
            }
            Violation::ArityMismatch { nonterminal, expected, found } => write!(
                f,
                "rule for `{nonterminal}` has {found} parameters, its sort has arity {expected}"
            ),
            Violation::BodyError { nonterminal, error } => {
                write!(f, "rule for `{nonterminal}`: {error}")
            }
            Violation::ReservedArity { name, expected, found } => write!(
                f,
                "reserved terminal `{name}` must have arity {expected}, found {found}"
            ),
            Violation::ReservedKind { name } => {
                write!(f, "reserved name `{name}` declared as a non-terminal")
            }
        }
    }
}

/// Result of validating a grammar: all violations plus the grammar order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub order: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "valid, order {}", self.order)
        } else {
            writeln!(f, "invalid:")?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

/// Checks every grammar invariant and reports all violations. Also computes
/// the grammar order.
pub fn validate(g: &Grammar) -> ValidationReport {
    let mut violations = Vec::new();

    match g.nonterminals.get(&g.start) {
        None => violations.push(Violation::StartUndeclared {
            name: g.start.clone(),
        }),
        Some(s) if *s != Sort::Base => violations.push(Violation::StartNotBase {
            name: g.start.clone(),
            sort: s.clone(),
        }),
        _ => {}
    }

    if let Some(&k) = g.terminals.get(E) {
        if k != 0 {
            violations.push(Violation::ReservedArity {
                name: E.to_string(),
                expected: 0,
                found: k,
            });
        }
    }
    if let Some(&k) = g.terminals.get(BR) {
        if k != 2 {
            violations.push(Violation::ReservedArity {
                name: BR.to_string(),
                expected: 2,
                found: k,
            });
        }
    }
    for reserved in [E, BR] {
        if g.nonterminals.contains_key(reserved) {
            violations.push(Violation::ReservedKind {
                name: reserved.to_string(),
            });
        }
    }

    for rule in &g.rules {
        let Some(nt_sort) = g.nonterminals.get(&rule.lhs) else {
            violations.push(Violation::UndeclaredRuleHead {
                name: rule.lhs.clone(),
            });
            continue;
        };
        if nt_sort.arity() != rule.params.len() {
            violations.push(Violation::ArityMismatch {
                nonterminal: rule.lhs.clone(),
                expected: nt_sort.arity(),
                found: rule.params.len(),
            });
            continue;
        }
        let env: BTreeMap<String, Sort> = rule
            .params
            .iter()
            .cloned()
            .zip(nt_sort.domains().into_iter().cloned())
            .collect();
        match sort_check(g, &env, &rule.body) {
            Ok(Sort::Base) => {}
            Ok(other) => violations.push(Violation::BodyError {
                nonterminal: rule.lhs.clone(),
                error: SortError::NonBaseRuleBody {
                    nonterminal: rule.lhs.clone(),
                    found: print_sort(&other),
                },
            }),
            Err(e) => violations.push(Violation::BodyError {
                nonterminal: rule.lhs.clone(),
                error: e,
            }),
        }
    }

    ValidationReport {
        violations,
        order: g.order(),
    }
}

/// True iff every terminal other than `e` has arity 1 and `e`, if present,
/// has arity 0.
pub fn is_word_grammar(g: &Grammar) -> bool {
    g.terminals
        .iter()
        .all(|(name, &k)| if name == E { k == 0 } else { k == 1 })
}
