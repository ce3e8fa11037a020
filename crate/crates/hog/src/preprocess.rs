//! Normalization passes that establish the preconditions of the two
//! transformations: rewriting order-0 arguments in higher-order positions
//! (so that every sort `o -> s` in a non-terminal's sort has `order(s) <= 1`)
//! and making the binary constructor `br` fully applied.

use crate::grammar::{
    is_word_grammar, sort_check, validate, Grammar, Rule, Sort, Term, ValidationReport, BR,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PreprocessError {
    #[error("grammar does not validate: {0}")]
    Invalid(ValidationReport),
    #[error("not a word grammar")]
    NotAWordGrammar,
}

/// True iff for every sort occurring in some non-terminal's sort, a domain
/// of the form `o -> s` has `order(s) <= 1`.
pub fn assumption_holds(g: &Grammar) -> bool {
    g.nonterminals.values().all(|nt_sort| {
        nt_sort.subsorts().iter().all(|s| match s {
            Sort::Arrow(d, c) if **d == Sort::Base => c.order() <= 1,
            _ => true,
        })
    })
}

/// The sort image: `o -> s` with `order(s) > 1` becomes `(o -> o) -> ceil(s)`,
/// everything else is mapped structurally. Preserves order.
fn ceil_sort(s: &Sort) -> Sort {
    match s {
        Sort::Base => Sort::Base,
        Sort::Arrow(d, c) => {
            if **d == Sort::Base && c.order() > 1 {
                Sort::arrow(Sort::arrow(Sort::Base, Sort::Base), ceil_sort(c))
            } else {
                Sort::arrow(ceil_sort(d), ceil_sort(c))
            }
        }
    }
}

/// Rewrites a word grammar so that [`assumption_holds`] on the result, while
/// preserving the word language. Order-0 parameters in higher-order
/// positions are re-sorted to `o -> o`; their occurrences become `x e`;
/// order-0 arguments passed into such positions are wrapped with the fresh
/// constant combinator `$K x y = x`.
pub fn normalize_order0_args(g: &Grammar) -> Result<Grammar, PreprocessError> {
    let report = validate(g);
    if !report.is_valid() {
        return Err(PreprocessError::Invalid(report));
    }
    if !is_word_grammar(g) {
        return Err(PreprocessError::NotAWordGrammar);
    }

    let k_name = g.fresh_name("$K");
    let mut used_k = false;

    let mut new_rules: Vec<Rule> = Vec::new();
    for rule in g.rules() {
        let nt_sort = &g.nonterminals[&rule.lhs];
        let domains: Vec<Sort> = nt_sort.domains().into_iter().cloned().collect();
        // parameter i is re-sorted iff its sort is o and the suffix sort
        // after it has order > 1
        let mut rewritten: Vec<bool> = Vec::with_capacity(domains.len());
        for (i, d) in domains.iter().enumerate() {
            let suffix = Sort::arrows(domains[i + 1..].iter().cloned(), Sort::Base);
            rewritten.push(*d == Sort::Base && suffix.order() > 1);
        }
        let rewritten_vars: BTreeMap<&str, bool> = rule
            .params
            .iter()
            .map(String::as_str)
            .zip(rewritten.iter().copied())
            .collect();
        let src_env: BTreeMap<String, Sort> = rule
            .params
            .iter()
            .cloned()
            .zip(domains.iter().cloned())
            .collect();

        let body = ceil_term(g, &src_env, &rewritten_vars, &k_name, &mut used_k, &rule.body);
        new_rules.push(Rule {
            lhs: rule.lhs.clone(),
            params: rule.params.clone(),
            body,
        });
    }

    let mut nonterminals: BTreeMap<String, Sort> = g
        .nonterminals
        .iter()
        .map(|(n, s)| (n.clone(), ceil_sort(s)))
        .collect();
    if used_k {
        let ps = g.pick_params(&["x", "y"]);
        nonterminals.insert(
            k_name.clone(),
            Sort::arrows([Sort::Base, Sort::Base], Sort::Base),
        );
        new_rules.push(Rule {
            lhs: k_name,
            params: ps.clone(),
            body: Term::var(ps[0].clone()),
        });
    }

    Ok(Grammar::new(
        g.terminals.clone(),
        nonterminals,
        new_rules,
        g.start.clone(),
    ))
}

fn ceil_term(
    g: &Grammar,
    src_env: &BTreeMap<String, Sort>,
    rewritten: &BTreeMap<&str, bool>,
    k_name: &str,
    used_k: &mut bool,
    t: &Term,
) -> Term {
    match t {
        Term::Var(x) => {
            if rewritten.get(x.as_str()).copied().unwrap_or(false) {
                Term::app(Term::var(x.clone()), Term::tm(crate::grammar::E))
            } else {
                Term::var(x.clone())
            }
        }
        Term::NonTerminal(_) | Term::Terminal(_) => t.clone(),
        Term::App(t1, t2) => {
            let arg_sort = sort_check(g, src_env, t2).expect("validated grammar");
            let result_sort = sort_check(g, src_env, t).expect("validated grammar");
            let f = ceil_term(g, src_env, rewritten, k_name, used_k, t1);
            let a = ceil_term(g, src_env, rewritten, k_name, used_k, t2);
            if arg_sort == Sort::Base && result_sort.order() > 1 {
                *used_k = true;
                Term::app(f, Term::app(Term::nt(k_name), a))
            } else {
                Term::app(f, a)
            }
        }
        Term::Abs(..) => unreachable!("rule bodies are applicative"),
    }
}

/// Replaces every partial occurrence of the terminal `br` by a fresh
/// non-terminal `$Br` with the rule `$Br x y = br x y`. Fully applied
/// occurrences are left alone; `$Br` is added only when needed.
pub fn saturate_br(g: &Grammar) -> Grammar {
    let br_name = g.fresh_name("$Br");
    let mut used = false;

    fn fix(t: &Term, br_name: &str, used: &mut bool) -> Term {
        let (head, args) = t.spine();
        let new_args: Vec<Term> = args.iter().map(|a| fix(a, br_name, used)).collect();
        match head {
            Term::Terminal(n) if n == BR && args.len() != 2 => {
                *used = true;
                Term::apps(Term::nt(br_name), new_args)
            }
            _ => Term::apps(head.clone(), new_args),
        }
    }

    let new_rules: Vec<Rule> = g
        .rules()
        .iter()
        .map(|r| Rule {
            lhs: r.lhs.clone(),
            params: r.params.clone(),
            body: fix(&r.body, &br_name, &mut used),
        })
        .collect();

    let mut nonterminals = g.nonterminals.clone();
    let mut rules = new_rules;
    if used {
        let ps = g.pick_params(&["x", "y"]);
        nonterminals.insert(
            br_name.clone(),
            Sort::arrows([Sort::Base, Sort::Base], Sort::Base),
        );
        rules.push(Rule {
            lhs: br_name,
            params: ps.clone(),
            body: Term::apps(
                Term::tm(BR),
                [Term::var(ps[0].clone()), Term::var(ps[1].clone())],
            ),
        });
    }

    Grammar::new(g.terminals.clone(), nonterminals, rules, g.start.clone())
}
