//! Extended terms: argument positions hold nonempty term sets, read as lazy
//! nondeterministic choice. Plain application is the singleton case.
//!
//! Desugaring replaces every non-singleton set by a fresh `$C` non-terminal
//! applied to the set's free variables, one rule per element, which turns an
//! extended grammar back into an ordinary one with the same language.

use crate::grammar::parse::{parse_raw, resolve_name, PTerm, RawGrammar};
use crate::grammar::{
    is_generated_name, print_sort, validate, Grammar, ParseError, ParseOptions, Rule,
    Sort, SortError, Term, ValidationReport,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write;
use thiserror::Error;

/// A nonempty set of extended terms in an argument position.
pub type ExtTermSet = BTreeSet<ExtTerm>;

/// An extended term. `App` carries a set in the argument position; a plain
/// application is an application to a singleton set.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtTerm {
    Var(String),
    NonTerminal(String),
    Terminal(String),
    App(Box<ExtTerm>, ExtTermSet),
    Abs(String, Box<ExtTerm>),
}

impl ExtTerm {
    pub fn var(n: impl Into<String>) -> ExtTerm {
        ExtTerm::Var(n.into())
    }
    pub fn nt(n: impl Into<String>) -> ExtTerm {
        ExtTerm::NonTerminal(n.into())
    }
    pub fn tm(n: impl Into<String>) -> ExtTerm {
        ExtTerm::Terminal(n.into())
    }

    /// Plain application: a singleton argument set.
    pub fn app(fun: ExtTerm, arg: ExtTerm) -> ExtTerm {
        ExtTerm::App(Box::new(fun), BTreeSet::from([arg]))
    }

    pub fn app_set(fun: ExtTerm, args: ExtTermSet) -> ExtTerm {
        assert!(!args.is_empty(), "extended term sets are nonempty");
        ExtTerm::App(Box::new(fun), args)
    }

    pub fn apps(fun: ExtTerm, args: impl IntoIterator<Item = ExtTerm>) -> ExtTerm {
        args.into_iter().fold(fun, ExtTerm::app)
    }

    pub fn spine(&self) -> (&ExtTerm, Vec<&ExtTermSet>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let ExtTerm::App(f, a) = cur {
            args.push(a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    /// Free variables in first-occurrence order (left to right, elements of
    /// a set visited in their canonical order).
    pub fn free_vars(&self) -> Vec<String> {
        fn go(t: &ExtTerm, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match t {
                ExtTerm::Var(x) => {
                    if !bound.iter().any(|b| b == x) && !out.iter().any(|o| o == x) {
                        out.push(x.clone());
                    }
                }
                ExtTerm::NonTerminal(_) | ExtTerm::Terminal(_) => {}
                ExtTerm::App(f, args) => {
                    go(f, bound, out);
                    for a in args {
                        go(a, bound, out);
                    }
                }
                ExtTerm::Abs(x, body) => {
                    bound.push(x.clone());
                    go(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Converts a plain term; every application becomes a singleton set.
    pub fn from_term(t: &Term) -> ExtTerm {
        match t {
            Term::Var(n) => ExtTerm::var(n.clone()),
            Term::NonTerminal(n) => ExtTerm::nt(n.clone()),
            Term::Terminal(n) => ExtTerm::tm(n.clone()),
            Term::App(f, a) => ExtTerm::app(ExtTerm::from_term(f), ExtTerm::from_term(a)),
            Term::Abs(x, _, b) => ExtTerm::Abs(x.clone(), Box::new(ExtTerm::from_term(b))),
        }
    }

    /// Converts back to a plain term when every set is a singleton.
    pub fn to_term(&self) -> Option<Term> {
        match self {
            ExtTerm::Var(n) => Some(Term::var(n.clone())),
            ExtTerm::NonTerminal(n) => Some(Term::nt(n.clone())),
            ExtTerm::Terminal(n) => Some(Term::tm(n.clone())),
            ExtTerm::App(f, args) => {
                if args.len() != 1 {
                    return None;
                }
                Some(Term::app(
                    f.to_term()?,
                    args.iter().next().unwrap().to_term()?,
                ))
            }
            ExtTerm::Abs(..) => None,
        }
    }
}

impl fmt::Debug for ExtTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_ext_term(self))
    }
}

impl fmt::Display for ExtTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print_ext_term(self))
    }
}

/// A rule with an extended body.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExtRule {
    pub lhs: String,
    pub params: Vec<String>,
    pub body: ExtTerm,
}

/// As [`Grammar`] but rule bodies are extended terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtGrammar {
    pub terminals: BTreeMap<String, usize>,
    pub nonterminals: BTreeMap<String, Sort>,
    rules: Vec<ExtRule>,
    pub start: String,
}

impl ExtGrammar {
    pub fn new(
        terminals: BTreeMap<String, usize>,
        nonterminals: BTreeMap<String, Sort>,
        rules: Vec<ExtRule>,
        start: impl Into<String>,
    ) -> ExtGrammar {
        let mut g = ExtGrammar {
            terminals,
            nonterminals,
            rules,
            start: start.into(),
        };
        g.rules.sort_by(|a, b| a.lhs.cmp(&b.lhs));
        g
    }

    pub fn rules(&self) -> &[ExtRule] {
        &self.rules
    }

    pub fn rules_of<'a>(&'a self, nt: &'a str) -> impl Iterator<Item = &'a ExtRule> {
        self.rules.iter().filter(move |r| r.lhs == nt)
    }

    pub fn order(&self) -> usize {
        self.nonterminals
            .values()
            .map(Sort::order)
            .max()
            .unwrap_or(0)
    }

    pub fn symbol_sort(&self, name: &str) -> Option<Sort> {
        if let Some(s) = self.nonterminals.get(name) {
            return Some(s.clone());
        }
        self.terminals
            .get(name)
            .map(|&k| Sort::arrows(std::iter::repeat_n(Sort::Base, k), Sort::Base))
    }

    pub fn from_grammar(g: &Grammar) -> ExtGrammar {
        ExtGrammar::new(
            g.terminals.clone(),
            g.nonterminals.clone(),
            g.rules()
                .iter()
                .map(|r| ExtRule {
                    lhs: r.lhs.clone(),
                    params: r.params.clone(),
                    body: ExtTerm::from_term(&r.body),
                })
                .collect(),
            g.start.clone(),
        )
    }

    /// Converts to an ordinary grammar when every set is a singleton.
    pub fn to_plain(&self) -> Option<Grammar> {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                Some(Rule {
                    lhs: r.lhs.clone(),
                    params: r.params.clone(),
                    body: r.body.to_term()?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Grammar::new(
            self.terminals.clone(),
            self.nonterminals.clone(),
            rules,
            self.start.clone(),
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExtError {
    #[error("substitution would capture variable `{var}` bound in the term")]
    CaptureDetected { var: String },
}

/// The set-valued substitution. Applies `subst` to `u`, yielding the set
/// given by the four defining clauses (constants map to singletons, a
/// variable maps to its image or stays, applications distribute over the
/// function side, sets take unions).
pub fn ext_substitute(
    subst: &BTreeMap<String, ExtTermSet>,
    u: &ExtTerm,
) -> Result<ExtTermSet, ExtError> {
    match u {
        ExtTerm::Terminal(_) | ExtTerm::NonTerminal(_) => Ok(BTreeSet::from([u.clone()])),
        ExtTerm::Var(x) => Ok(subst
            .get(x)
            .cloned()
            .unwrap_or_else(|| BTreeSet::from([u.clone()]))),
        ExtTerm::App(f, args) => {
            let funs = ext_substitute(subst, f)?;
            let mut arg_union = BTreeSet::new();
            for a in args {
                arg_union.extend(ext_substitute(subst, a)?);
            }
            Ok(funs
                .into_iter()
                .map(|v| ExtTerm::App(Box::new(v), arg_union.clone()))
                .collect())
        }
        ExtTerm::Abs(x, body) => {
            if subst.contains_key(x) {
                return Err(ExtError::CaptureDetected { var: x.clone() });
            }
            for set in subst.values() {
                for t in set {
                    if t.free_vars().iter().any(|v| v == x) {
                        return Err(ExtError::CaptureDetected { var: x.clone() });
                    }
                }
            }
            let bodies = ext_substitute(subst, body)?;
            Ok(bodies
                .into_iter()
                .map(|b| ExtTerm::Abs(x.clone(), Box::new(b)))
                .collect())
        }
    }
}

/// Sort checking for extended terms. Every element of a set must have the
/// same sort as the set itself.
pub fn ext_sort_check(
    g: &ExtGrammar,
    env: &BTreeMap<String, Sort>,
    u: &ExtTerm,
) -> Result<Sort, SortError> {
    match u {
        ExtTerm::Var(x) => env
            .get(x)
            .cloned()
            .ok_or_else(|| SortError::UnboundSymbol { name: x.clone() }),
        ExtTerm::NonTerminal(n) | ExtTerm::Terminal(n) => g
            .symbol_sort(n)
            .ok_or_else(|| SortError::UnboundSymbol { name: n.clone() }),
        ExtTerm::App(f, args) => {
            let fs = ext_sort_check(g, env, f)?;
            let mut arg_sort: Option<Sort> = None;
            for a in args {
                let s = ext_sort_check(g, env, a)?;
                match &arg_sort {
                    None => arg_sort = Some(s),
                    Some(prev) if *prev == s => {}
                    Some(prev) => {
                        return Err(SortError::SortMismatch {
                            expected: print_sort(prev),
                            found: print_sort(&s),
                            at: print_ext_term(u),
                        })
                    }
                }
            }
            let arg_sort = arg_sort.expect("sets are nonempty");
            match fs {
                Sort::Arrow(d, c) if *d == arg_sort => Ok(*c),
                Sort::Arrow(d, _) => Err(SortError::SortMismatch {
                    expected: print_sort(&d),
                    found: print_sort(&arg_sort),
                    at: print_ext_term(u),
                }),
                Sort::Base => Err(SortError::SortMismatch {
                    expected: "a function sort".to_string(),
                    found: print_sort(&fs),
                    at: print_ext_term(u),
                }),
            }
        }
        ExtTerm::Abs(..) => Err(SortError::SortMismatch {
            expected: "an applicative extended term".to_string(),
            found: "an abstraction".to_string(),
            at: print_ext_term(u),
        }),
    }
}

/// Validates an extended grammar: same invariants as for ordinary grammars,
/// with the extended typing rule for sets.
pub fn validate_ext(g: &ExtGrammar) -> ValidationReport {
    use crate::grammar::Violation;
    // reuse the plain checks for everything but rule bodies
    let skeleton = Grammar::new(
        g.terminals.clone(),
        g.nonterminals.clone(),
        vec![],
        g.start.clone(),
    );
    let mut report = validate(&skeleton);
    for rule in &g.rules {
        let Some(nt_sort) = g.nonterminals.get(&rule.lhs) else {
            report.violations.push(Violation::UndeclaredRuleHead {
                name: rule.lhs.clone(),
            });
            continue;
        };
        if nt_sort.arity() != rule.params.len() {
            report.violations.push(Violation::ArityMismatch {
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
        match ext_sort_check(g, &env, &rule.body) {
            Ok(Sort::Base) => {}
            Ok(other) => report.violations.push(Violation::BodyError {
                nonterminal: rule.lhs.clone(),
                error: SortError::NonBaseRuleBody {
                    nonterminal: rule.lhs.clone(),
                    found: print_sort(&other),
                },
            }),
            Err(e) => report.violations.push(Violation::BodyError {
                nonterminal: rule.lhs.clone(),
                error: e,
            }),
        }
    }
    report.order = g.order();
    report
}

/// Replaces every non-singleton term set by a fresh `$C` non-terminal,
/// bottom-up and innermost-first, producing an ordinary grammar with the
/// same language.
///
/// The fresh non-terminal takes the set's free variables in first textual
/// occurrence order; naming is `$C0`, `$C1`, .. in a left-to-right,
/// bottom-up traversal of rules (rules are already sorted by non-terminal).
pub fn desugar(eg: &ExtGrammar) -> Grammar {
    struct St<'a> {
        eg: &'a ExtGrammar,
        taken: BTreeSet<String>,
        counter: usize,
        new_nts: BTreeMap<String, Sort>,
        new_rules: Vec<Rule>,
    }

    impl St<'_> {
        fn fresh(&mut self) -> String {
            loop {
                let cand = format!("$C{}", self.counter);
                self.counter += 1;
                if !self.taken.contains(&cand) && !self.new_nts.contains_key(&cand) {
                    return cand;
                }
            }
        }

        fn go(&mut self, t: &ExtTerm, param_sorts: &BTreeMap<String, Sort>) -> Term {
            match t {
                ExtTerm::Var(n) => Term::var(n.clone()),
                ExtTerm::NonTerminal(n) => Term::nt(n.clone()),
                ExtTerm::Terminal(n) => Term::tm(n.clone()),
                ExtTerm::Abs(..) => unreachable!("rule bodies are applicative"),
                ExtTerm::App(f, args) => {
                    let fun = self.go(f, param_sorts);
                    let elems: Vec<Term> =
                        args.iter().map(|a| self.go(a, param_sorts)).collect();
                    if elems.len() == 1 {
                        return Term::app(fun, elems.into_iter().next().unwrap());
                    }
                    // free variables across the elements, first occurrence first
                    let mut vars: Vec<String> = Vec::new();
                    for e in &elems {
                        collect_vars(e, &mut vars);
                    }
                    let set_sort =
                        ext_sort_check(self.eg, param_sorts, args.iter().next().unwrap())
                            .expect("desugar precondition: grammar validates");
                    let nt_sort =
                        Sort::arrows(vars.iter().map(|v| param_sorts[v].clone()), set_sort);
                    let name = self.fresh();
                    self.new_nts.insert(name.clone(), nt_sort);
                    for e in elems {
                        self.new_rules.push(Rule {
                            lhs: name.clone(),
                            params: vars.clone(),
                            body: e,
                        });
                    }
                    Term::app(fun, Term::apps(Term::nt(name), vars.iter().map(Term::var)))
                }
            }
        }
    }

    fn collect_vars(t: &Term, out: &mut Vec<String>) {
        match t {
            Term::Var(x) => {
                if !out.iter().any(|v| v == x) {
                    out.push(x.clone());
                }
            }
            Term::App(f, a) => {
                collect_vars(f, out);
                collect_vars(a, out);
            }
            _ => {}
        }
    }

    let mut st = St {
        eg,
        taken: eg
            .terminals
            .keys()
            .chain(eg.nonterminals.keys())
            .cloned()
            .collect(),
        counter: 0,
        new_nts: BTreeMap::new(),
        new_rules: Vec::new(),
    };

    let mut rules: Vec<Rule> = Vec::new();
    for rule in eg.rules() {
        let nt_sort = &eg.nonterminals[&rule.lhs];
        let param_sorts: BTreeMap<String, Sort> = rule
            .params
            .iter()
            .cloned()
            .zip(nt_sort.domains().into_iter().cloned())
            .collect();
        let body = st.go(&rule.body, &param_sorts);
        rules.push(Rule {
            lhs: rule.lhs.clone(),
            params: rule.params.clone(),
            body,
        });
    }
    rules.extend(st.new_rules);

    let mut nonterminals = eg.nonterminals.clone();
    nonterminals.extend(st.new_nts);
    Grammar::new(eg.terminals.clone(), nonterminals, rules, eg.start.clone())
}

// ---------------------------------------------------------------------------
// Text format

/// Renders an extended term; sets print as `{t1 | t2}`, singletons as plain
/// arguments.
pub fn print_ext_term(t: &ExtTerm) -> String {
    let mut out = String::new();
    write_ext(&mut out, t, false);
    out
}

fn write_ext(out: &mut String, t: &ExtTerm, arg_position: bool) {
    match t {
        ExtTerm::Var(n) | ExtTerm::NonTerminal(n) | ExtTerm::Terminal(n) => out.push_str(n),
        ExtTerm::Abs(x, body) => {
            if arg_position {
                out.push('(');
            }
            let _ = write!(out, "\\{x}. ");
            write_ext(out, body, false);
            if arg_position {
                out.push(')');
            }
        }
        ExtTerm::App(f, args) => {
            if arg_position {
                out.push('(');
            }
            write_ext(out, f, false);
            out.push(' ');
            if args.len() == 1 {
                write_ext(out, args.iter().next().unwrap(), true);
            } else {
                out.push_str("{ ");
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" | ");
                    }
                    write_ext(out, a, false);
                }
                out.push_str(" }");
            }
            if arg_position {
                out.push(')');
            }
        }
    }
}

/// Prints an extended grammar; always emits the `%extended` header.
pub fn print_ext_grammar(g: &ExtGrammar) -> String {
    let mut out = String::new();
    out.push_str("%extended\n");
    let has_generated = g
        .terminals
        .keys()
        .chain(g.nonterminals.keys())
        .any(|n| is_generated_name(n));
    if has_generated {
        out.push_str("%generated\n");
    }
    for (name, arity) in &g.terminals {
        let _ = writeln!(out, "%terminal {name} {arity}");
    }
    for (name, sort) in &g.nonterminals {
        let _ = writeln!(out, "%nonterminal {name} {}", print_sort(sort));
    }
    let _ = writeln!(out, "%start {}", g.start);
    for rule in g.rules() {
        let _ = write!(out, "{}", rule.lhs);
        for p in &rule.params {
            let _ = write!(out, " {p}");
        }
        let _ = writeln!(out, " = {}.", print_ext_term(&rule.body));
    }
    out
}

/// Parses an `%extended` grammar file (plain files parse too; their rules
/// simply contain no sets).
pub fn parse_ext_grammar(text: &str) -> Result<ExtGrammar, ParseError> {
    parse_ext_grammar_with(text, ParseOptions::default())
}

pub fn parse_ext_grammar_with(text: &str, opts: ParseOptions) -> Result<ExtGrammar, ParseError> {
    let raw = parse_raw(text, opts)?;
    let mut rules = Vec::new();
    for r in &raw.rules {
        let body = resolve_ext(&raw, &r.params, &r.body)?;
        rules.push(ExtRule {
            lhs: r.lhs.clone(),
            params: r.params.clone(),
            body,
        });
    }
    Ok(ExtGrammar::new(
        raw.terminals,
        raw.nonterminals,
        rules,
        raw.start,
    ))
}

fn resolve_ext(raw: &RawGrammar, params: &[String], t: &PTerm) -> Result<ExtTerm, ParseError> {
    match t {
        PTerm::Name(n, line) => Ok(match resolve_name(raw, params, n, *line)? {
            Term::Var(v) => ExtTerm::Var(v),
            Term::NonTerminal(v) => ExtTerm::NonTerminal(v),
            Term::Terminal(v) => ExtTerm::Terminal(v),
            _ => unreachable!(),
        }),
        PTerm::App(f, a) => {
            let fun = resolve_ext(raw, params, f)?;
            match a.as_ref() {
                PTerm::Set(elems, _) => {
                    let set: ExtTermSet = elems
                        .iter()
                        .map(|e| resolve_ext(raw, params, e))
                        .collect::<Result<_, _>>()?;
                    Ok(ExtTerm::app_set(fun, set))
                }
                other => Ok(ExtTerm::app(fun, resolve_ext(raw, params, other)?)),
            }
        }
        PTerm::Set(_, line) => Err(ParseError::Syntax {
            line: *line,
            col: 0,
            msg: "a term set may only appear in an argument position".to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o() -> Sort {
        Sort::Base
    }

    fn tree_sig() -> ExtGrammar {
        ExtGrammar::new(
            [
                ("br".to_string(), 2),
                ("a".to_string(), 0),
                ("b".to_string(), 0),
                ("e".to_string(), 0),
            ]
            .into(),
            [("S".to_string(), o())].into(),
            vec![],
            "S",
        )
    }

    #[test]
    fn substitute_terminal_clause() {
        let subst: BTreeMap<String, ExtTermSet> =
            [("x".to_string(), BTreeSet::from([ExtTerm::tm("a")]))].into();
        let got = ext_substitute(&subst, &ExtTerm::tm("a")).unwrap();
        assert_eq!(got, BTreeSet::from([ExtTerm::tm("a")]));
    }

    #[test]
    fn substitute_application_clause() {
        // <{x -> {a,b}}>(f {x}) = { f {a,b} }
        let subst: BTreeMap<String, ExtTermSet> = [(
            "x".to_string(),
            BTreeSet::from([ExtTerm::tm("a"), ExtTerm::tm("b")]),
        )]
        .into();
        let t = ExtTerm::app(ExtTerm::var("f"), ExtTerm::var("x"));
        let got = ext_substitute(&subst, &t).unwrap();
        let expect = BTreeSet::from([ExtTerm::app_set(
            ExtTerm::var("f"),
            BTreeSet::from([ExtTerm::tm("a"), ExtTerm::tm("b")]),
        )]);
        assert_eq!(got, expect);
    }

    #[test]
    fn substitute_distributes_over_the_function_side() {
        // <{x -> {a,b}}>(x {y}) = { a {y}, b {y} }
        let subst: BTreeMap<String, ExtTermSet> = [(
            "x".to_string(),
            BTreeSet::from([ExtTerm::tm("a"), ExtTerm::tm("b")]),
        )]
        .into();
        let t = ExtTerm::app(ExtTerm::var("x"), ExtTerm::var("y"));
        let got = ext_substitute(&subst, &t).unwrap();
        let expect = BTreeSet::from([
            ExtTerm::app(ExtTerm::tm("a"), ExtTerm::var("y")),
            ExtTerm::app(ExtTerm::tm("b"), ExtTerm::var("y")),
        ]);
        assert_eq!(got, expect);
    }

    #[test]
    fn substitute_unbound_variable() {
        let got = ext_substitute(&BTreeMap::new(), &ExtTerm::var("x")).unwrap();
        assert_eq!(got, BTreeSet::from([ExtTerm::var("x")]));
    }

    #[test]
    fn ext_sort_check_set_of_trees() {
        let g = tree_sig();
        let t = ExtTerm::app_set(
            ExtTerm::tm("br"),
            BTreeSet::from([ExtTerm::tm("a"), ExtTerm::tm("b")]),
        );
        // br {a,b} : o -> o
        let got = ext_sort_check(&g, &BTreeMap::new(), &t).unwrap();
        assert_eq!(got, Sort::arrow(o(), o()));
    }

    #[test]
    fn ext_sort_check_mixed_sorts_rejected() {
        let g = ExtGrammar::new(
            [("a".to_string(), 0), ("g".to_string(), 1)].into(),
            [("S".to_string(), o())].into(),
            vec![],
            "S",
        );
        let t = ExtTerm::app_set(
            ExtTerm::var("f"),
            BTreeSet::from([ExtTerm::tm("a"), ExtTerm::tm("g")]),
        );
        let env: BTreeMap<String, Sort> = [("f".to_string(), Sort::arrow(o(), o()))].into();
        assert!(matches!(
            ext_sort_check(&g, &env, &t),
            Err(SortError::SortMismatch { .. })
        ));
    }

    #[test]
    fn ext_sort_check_example2_body() {
        // br a (br f e) : o under f:o
        let g = tree_sig();
        let env: BTreeMap<String, Sort> = [("f".to_string(), o())].into();
        let t = ExtTerm::apps(
            ExtTerm::tm("br"),
            [
                ExtTerm::tm("a"),
                ExtTerm::apps(ExtTerm::tm("br"), [ExtTerm::var("f"), ExtTerm::tm("e")]),
            ],
        );
        assert_eq!(ext_sort_check(&g, &env, &t).unwrap(), o());
    }

    #[test]
    fn capture_is_detected() {
        let subst: BTreeMap<String, ExtTermSet> =
            [("y".to_string(), BTreeSet::from([ExtTerm::var("x")]))].into();
        let t = ExtTerm::Abs(
            "x".to_string(),
            Box::new(ExtTerm::app(ExtTerm::var("f"), ExtTerm::var("y"))),
        );
        assert!(matches!(
            ext_substitute(&subst, &t),
            Err(ExtError::CaptureDetected { .. })
        ));
    }

    #[test]
    fn desugar_without_sets_is_identity_shaped() {
        let text = "\
%terminal a 1
%terminal e 0
%nonterminal S o
%start S
S = a e.
";
        let eg = parse_ext_grammar(text).unwrap();
        let g = desugar(&eg);
        assert_eq!(g.rules().len(), 1);
        assert_eq!(g.nonterminals.len(), 1);
    }

    #[test]
    fn desugar_introduces_fresh_nonterminal_per_set() {
        // F' f_e f_p = Fp {A1 f_e | A2 f_p}  ~>  C f_e f_p with two rules
        let text = "\
%extended
%terminal e 0
%nonterminal Fq o -> o -> o
%nonterminal Fp o -> o
%nonterminal A1 o -> o
%nonterminal A2 o -> o
%nonterminal S o
%start S
Fq x y = Fp { A1 x | A2 y }.
";
        let eg = parse_ext_grammar(text).unwrap();
        let g = desugar(&eg);
        assert!(g.nonterminals.contains_key("$C0"));
        assert_eq!(g.nonterminals["$C0"], Sort::arrows([o(), o()], o()));
        let c_rules: Vec<_> = g.rules_of("$C0").collect();
        assert_eq!(c_rules.len(), 2);
        assert_eq!(c_rules[0].params, vec!["x".to_string(), "y".to_string()]);
        let bodies: BTreeSet<String> =
            c_rules.iter().map(|r| r.body.to_string()).collect();
        assert_eq!(
            bodies,
            BTreeSet::from(["A1 x".to_string(), "A2 y".to_string()])
        );
        let fq = g.rules_of("Fq").next().unwrap();
        assert_eq!(fq.body.to_string(), "Fp ($C0 x y)");
        assert!(validate(&g).is_valid());
    }

    #[test]
    fn ext_round_trip() {
        let text = "\
%extended
%terminal e 0
%terminal a 0
%terminal br 2
%nonterminal S o
%nonterminal F o -> o
%start S
S = F { a | e }.
F x = br x x.
";
        let eg = parse_ext_grammar(text).unwrap();
        let printed = print_ext_grammar(&eg);
        let eg2 = parse_ext_grammar(&printed).unwrap();
        assert_eq!(eg, eg2);
    }
}
