//! The converse construction: from an order-n tree grammar to a word
//! grammar of order at most n+1 with the same language (word language
//! against Lε frontier language).
//!
//! Nullary terminals become unary, `e` becomes the identity non-terminal
//! `$E`, `br` becomes composition `$Br f g x = f (g x)`, every rule is
//! eta-expanded with one fresh order-0 parameter, and a fresh start rewrites
//! to the old start applied to `e`. For order-0 inputs, `br` occurrences
//! are folded into per-occurrence non-terminals `$A0, $A1, ..` instead, so
//! the result stays order 1.

use crate::grammar::{validate, Grammar, Rule, Sort, Term, ValidationReport, BR, E};
use crate::semantics::{le_epsilon_slice, EnumLimits, Word};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConverseError {
    #[error("grammar does not validate: {0}")]
    Invalid(ValidationReport),
    #[error("shape violation: {reason}")]
    ShapeViolation { reason: String },
}

/// `o` maps to `o -> o`; arrows map componentwise. Raises order by exactly
/// one.
fn floor_sort(s: &Sort) -> Sort {
    match s {
        Sort::Base => Sort::arrow(Sort::Base, Sort::Base),
        Sort::Arrow(d, c) => Sort::arrow(floor_sort(d), floor_sort(c)),
    }
}

fn check_shape(g: &Grammar) -> Result<(), ConverseError> {
    for (name, &arity) in &g.terminals {
        if name == BR {
            if arity != 2 {
                return Err(ConverseError::ShapeViolation {
                    reason: format!("terminal `br` has arity {arity}, expected 2"),
                });
            }
        } else if arity != 0 {
            return Err(ConverseError::ShapeViolation {
                reason: format!(
                    "terminal `{name}` has arity {arity}; all terminals except `br` must be nullary"
                ),
            });
        }
    }
    Ok(())
}

struct Names {
    start: String,
    e: String,
    br: String,
    param: String,
    used_e: bool,
    // order-0 variant: one non-terminal per distinct printed (s, t) pair
    fold_br: bool,
    br_folds: BTreeMap<String, (String, Rule)>,
    fold_counter: usize,
}

impl Names {
    fn fresh_fold(&mut self, taken: &BTreeSet<String>) -> String {
        loop {
            let cand = format!("$A{}", self.fold_counter);
            self.fold_counter += 1;
            if !taken.contains(&cand) {
                return cand;
            }
        }
    }
}

fn floor_term(t: &Term, names: &mut Names, taken: &BTreeSet<String>) -> Term {
    if names.fold_br {
        let (head, args) = t.spine();
        if matches!(head, Term::Terminal(n) if n == BR) {
            assert_eq!(args.len(), 2, "br is fully applied at order 0");
            let key = format!("{}|{}", args[0], args[1]);
            if let Some((name, _)) = names.br_folds.get(&key) {
                return Term::nt(name.clone());
            }
            let name = names.fresh_fold(taken);
            // reserve the name before recursing so numbering is outermost-first
            names.br_folds.insert(
                key.clone(),
                (
                    name.clone(),
                    Rule {
                        lhs: name.clone(),
                        params: vec![],
                        body: Term::tm(E),
                    },
                ),
            );
            let s = floor_term(args[0], names, taken);
            let t2 = floor_term(args[1], names, taken);
            let px = names.param.clone();
            let rule = Rule {
                lhs: name.clone(),
                params: vec![px.clone()],
                body: Term::app(s, Term::app(t2, Term::var(px))),
            };
            names.br_folds.insert(key, (name.clone(), rule));
            return Term::nt(name);
        }
    }
    match t {
        Term::Var(x) => Term::var(x.clone()),
        Term::NonTerminal(n) => Term::nt(n.clone()),
        Term::Terminal(n) if n == E => {
            names.used_e = true;
            Term::nt(names.e.clone())
        }
        Term::Terminal(n) if n == BR => Term::nt(names.br.clone()),
        Term::Terminal(n) => Term::tm(n.clone()),
        Term::App(f, a) => Term::app(
            floor_term(f, names, taken),
            floor_term(a, names, taken),
        ),
        Term::Abs(..) => unreachable!("rule bodies are applicative"),
    }
}

/// Builds the word grammar whose word language equals the Lε frontier
/// language of the tree grammar `g`.
pub fn tree_to_word(g: &Grammar) -> Result<Grammar, ConverseError> {
    let report = validate(g);
    if !report.is_valid() {
        return Err(ConverseError::Invalid(report));
    }
    check_shape(g)?;

    let order0 = g.order() == 0;
    let mut taken: BTreeSet<String> = g
        .terminals
        .keys()
        .chain(g.nonterminals.keys())
        .cloned()
        .collect();
    let mut names = Names {
        start: g.fresh_name("$S"),
        e: g.fresh_name("$E"),
        br: g.fresh_name("$Br"),
        param: g.pick_params(&["x"]).remove(0),
        used_e: false,
        fold_br: order0,
        br_folds: BTreeMap::new(),
        fold_counter: 0,
    };
    taken.extend([names.start.clone(), names.e.clone(), names.br.clone()]);

    let mut terminals: BTreeMap<String, usize> = g
        .terminals
        .iter()
        .filter(|(n, &k)| k == 0 && n.as_str() != E)
        .map(|(n, _)| (n.clone(), 1))
        .collect();
    terminals.insert(E.to_string(), 0);

    let oo = Sort::arrow(Sort::Base, Sort::Base);
    let mut rules: Vec<Rule> = Vec::new();
    for r in g.rules() {
        // eta-expand with one fresh order-0 parameter
        let param = pick_param_name(&r.params, &taken);
        let body = floor_term(&r.body, &mut names, &taken);
        let mut params = r.params.clone();
        params.push(param.clone());
        rules.push(Rule {
            lhs: r.lhs.clone(),
            params,
            body: Term::app(body, Term::var(param)),
        });
    }

    let mut nonterminals: BTreeMap<String, Sort> = g
        .nonterminals
        .iter()
        .map(|(n, s)| (n.clone(), floor_sort(s)))
        .collect();

    nonterminals.insert(names.start.clone(), Sort::Base);
    rules.push(Rule {
        lhs: names.start.clone(),
        params: vec![],
        body: Term::app(Term::nt(&g.start), Term::tm(E)),
    });

    let helper_params = g.pick_params(&["f", "g", "x"]);
    let (pf, pg, px) = (
        helper_params[0].clone(),
        helper_params[1].clone(),
        helper_params[2].clone(),
    );
    if order0 {
        for (name, rule) in names.br_folds.values() {
            nonterminals.insert(name.clone(), oo.clone());
            rules.push(rule.clone());
        }
        if names.used_e {
            nonterminals.insert(names.e.clone(), oo.clone());
            rules.push(Rule {
                lhs: names.e.clone(),
                params: vec![px],
                body: Term::var(helper_params[2].clone()),
            });
        }
    } else {
        nonterminals.insert(names.e.clone(), oo.clone());
        rules.push(Rule {
            lhs: names.e.clone(),
            params: vec![px.clone()],
            body: Term::var(px.clone()),
        });
        nonterminals.insert(
            names.br.clone(),
            Sort::arrows([oo.clone(), oo.clone()], oo.clone()),
        );
        rules.push(Rule {
            lhs: names.br.clone(),
            params: vec![pf.clone(), pg.clone(), px.clone()],
            body: Term::app(Term::var(pf), Term::app(Term::var(pg), Term::var(px))),
        });
    }

    Ok(Grammar::new(terminals, nonterminals, rules, names.start))
}

fn pick_param_name(params: &[String], taken: &BTreeSet<String>) -> String {
    if !params.iter().any(|p| p == "x") && !taken.contains("x") {
        return "x".to_string();
    }
    let mut i = 0usize;
    loop {
        let cand = format!("$x{i}");
        if !params.iter().any(|p| p == &cand) && !taken.contains(&cand) {
            return cand;
        }
        i += 1;
    }
}

/// Order bound of the construction: at most one more than the input, and
/// exactly order 1 for order-0 inputs.
pub fn order_bound_check(g_in: &Grammar, g_out: &Grammar) -> bool {
    let bound = g_out.order() <= g_in.order() + 1;
    if g_in.order() == 0 {
        bound && g_out.order() <= 1
    } else {
        bound
    }
}

/// Words in the bounded Lε slice of `g` that contain the letter `e`.
/// Nonempty means the construction's language-level precondition fails at
/// this budget, and the caller should warn.
pub fn words_with_e(g: &Grammar, budget: usize, limits: EnumLimits) -> BTreeSet<Word> {
    le_epsilon_slice(g, budget, limits)
        .words
        .into_iter()
        .filter(|w| w.0.iter().any(|l| l == E))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_grammar, parse_grammar_with, ParseOptions};

    const G2: &str = include_str!("../fixtures/g2.hog");
    const CONVERSE_G2: &str = include_str!("../fixtures/converse_g2.hog");

    #[test]
    fn golden_converse_of_g2() {
        let g = parse_grammar(G2).unwrap();
        let out = tree_to_word(&g).unwrap();
        let expect = parse_grammar_with(
            CONVERSE_G2,
            ParseOptions {
                allow_generated: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out, expect);
        assert!(validate(&out).is_valid());
        assert!(crate::grammar::is_word_grammar(&out));
    }

    #[test]
    fn converse_of_g2_has_order_2() {
        let g = parse_grammar(G2).unwrap();
        let out = tree_to_word(&g).unwrap();
        assert_eq!(g.order(), 1);
        assert_eq!(out.order(), 2);
        assert!(order_bound_check(&g, &out));
    }

    #[test]
    fn order0_input_uses_folded_br() {
        let text = "\
%terminal br 2
%terminal a 0
%terminal b 0
%nonterminal S o
%start S
S = br a b.
";
        let g = parse_grammar(text).unwrap();
        let out = tree_to_word(&g).unwrap();
        assert_eq!(out.order(), 1);
        assert!(order_bound_check(&g, &out));
        assert!(validate(&out).is_valid(), "{}", validate(&out));
        // S' = S e; S x = $A0 x; $A0 x = a (b x); no $E, no $Br
        assert!(out.nonterminals.contains_key("$A0"));
        assert!(!out.nonterminals.contains_key("$E"));
        assert!(!out.nonterminals.contains_key("$Br"));
        let s_rule = out.rules_of("S").next().unwrap();
        assert_eq!(
            s_rule.body,
            Term::app(Term::nt("$A0"), Term::var("x"))
        );
        let a0 = out.rules_of("$A0").next().unwrap();
        assert_eq!(
            a0.body,
            Term::app(Term::tm("a"), Term::app(Term::tm("b"), Term::var("x")))
        );
    }

    #[test]
    fn converse_of_e_only_grammar() {
        let g = parse_grammar(include_str!("../fixtures/s_e.hog")).unwrap();
        let out = tree_to_word(&g).unwrap();
        assert!(validate(&out).is_valid());
        assert_eq!(out.order(), 1);
        let s_rule = out.rules_of("S").next().unwrap();
        assert_eq!(s_rule.body, Term::app(Term::nt("$E"), Term::var("x")));
        // the word slice is {ε}
        use crate::semantics::{word_language_slice, EnumLimits, Word};
        let ws = word_language_slice(&out, 6, 4, EnumLimits::default()).unwrap();
        assert_eq!(ws.words, std::collections::BTreeSet::from([Word::empty()]));
    }

    #[test]
    fn e_containing_slices_are_flagged() {
        let g = parse_grammar(include_str!("../fixtures/g3.hog")).unwrap();
        // G3 frontiers contain e; the precondition check must notice
        let bad = words_with_e(&g, 4, EnumLimits::default());
        assert!(!bad.is_empty());
        let g2 = parse_grammar(G2).unwrap();
        assert!(words_with_e(&g2, 6, EnumLimits::default()).is_empty());
    }
}
