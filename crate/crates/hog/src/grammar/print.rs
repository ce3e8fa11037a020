//! Deterministic textual output for sorts, terms, and grammars.
//!
//! `parse(print(g))` is structurally the identity on valid grammars.

use super::{is_generated_name, Grammar, Sort, Term};
use std::fmt::Write;

/// Renders a sort with right-associative arrows, e.g. `(o -> o) -> o`.
pub fn print_sort(s: &Sort) -> String {
    match s {
        Sort::Base => "o".to_string(),
        Sort::Arrow(d, c) => {
            let ds = match d.as_ref() {
                Sort::Base => "o".to_string(),
                arrow => format!("({})", print_sort(arrow)),
            };
            format!("{ds} -> {}", print_sort(c))
        }
    }
}

/// Renders a term with left-associative application, e.g. `f (f e)`.
pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, t, false);
    out
}

fn write_term(out: &mut String, t: &Term, arg_position: bool) {
    match t {
        Term::Var(n) | Term::NonTerminal(n) | Term::Terminal(n) => out.push_str(n),
        Term::App(f, a) => {
            if arg_position {
                out.push('(');
            }
            write_term(out, f, false);
            out.push(' ');
            write_term(out, a, true);
            if arg_position {
                out.push(')');
            }
        }
        Term::Abs(x, s, body) => {
            if arg_position {
                out.push('(');
            }
            let _ = write!(out, "\\{x}:{}. ", print_sort(s));
            write_term(out, body, false);
            if arg_position {
                out.push(')');
            }
        }
    }
}

/// Prints a grammar in the line-oriented text format: declarations first
/// (sorted by name), then rules grouped by non-terminal.
pub fn print_grammar(g: &Grammar) -> String {
    let mut out = String::new();
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
        let _ = writeln!(out, " = {}.", print_term(&rule.body));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_rendering() {
        let oo = Sort::arrow(Sort::Base, Sort::Base);
        assert_eq!(print_sort(&Sort::Base), "o");
        assert_eq!(print_sort(&oo), "o -> o");
        assert_eq!(print_sort(&Sort::arrow(oo.clone(), Sort::Base)), "(o -> o) -> o");
        assert_eq!(
            print_sort(&Sort::arrow(Sort::Base, oo)),
            "o -> o -> o"
        );
    }

    #[test]
    fn term_rendering() {
        let t = Term::app(
            Term::var("f"),
            Term::app(Term::var("f"), Term::tm("e")),
        );
        assert_eq!(print_term(&t), "f (f e)");
        let t2 = Term::apps(Term::tm("br"), [Term::tm("a"), Term::tm("e")]);
        assert_eq!(print_term(&t2), "br a e");
    }
}
