//! Step 2: eliminating redundant `e` leaves from a tree grammar.
//!
//! Terms are classified by intersection types over two base types: `ε` for
//! terms that only generate trees whose leaves are all `e`, and `+` for
//! terms generating a tree with some other leaf. A fully applied
//! `br t0 t1` maps to `br u0 u1`, to the `+` side alone, or to `e`,
//! depending on the argument types. Non-terminal derivability is the least
//! fixpoint of "some rule body transforms at this type": a non-terminal
//! replicated at `ε` must actually be able to produce an all-`e` tree, or
//! dropping its sibling would change the language.

use crate::ext::{ExtGrammar, ExtRule, ExtTerm, ExtTermSet};
use crate::grammar::{
    validate, Grammar, Rule, Sort, Term, ValidationReport, BR, E,
};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

/// A step-2 intersection type over the base types `ε` and `+`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ITy2 {
    Eps,
    Plus,
    Arrow(Vec<ITy2>, Box<ITy2>),
}

impl ITy2 {
    pub fn arrow(args: Vec<ITy2>, result: ITy2) -> ITy2 {
        debug_assert!(args.windows(2).all(|w| w[0] < w[1]));
        ITy2::Arrow(args, Box::new(result))
    }

    /// Subscript rendering: `e`, `p`, `^`, `->`, `top`.
    pub fn subscript(&self) -> String {
        match self {
            ITy2::Eps => "e".to_string(),
            ITy2::Plus => "p".to_string(),
            ITy2::Arrow(args, res) => {
                let lhs = if args.is_empty() {
                    "top".to_string()
                } else {
                    args.iter()
                        .map(|c| match c {
                            ITy2::Arrow(..) => format!("({})", c.subscript()),
                            base => base.subscript(),
                        })
                        .collect::<Vec<_>>()
                        .join("^")
                };
                format!("{lhs}->{}", res.subscript())
            }
        }
    }
}

impl fmt::Debug for ITy2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subscript())
    }
}

impl fmt::Display for ITy2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subscript())
    }
}

// Canonical order: ε < + < arrows, arrows by conjunct count then
// lexicographic then result.
impl Ord for ITy2 {
    fn cmp(&self, other: &Self) -> Ordering {
        use ITy2::*;
        match (self, other) {
            (Eps, Eps) | (Plus, Plus) => Ordering::Equal,
            (Eps, _) => Ordering::Less,
            (_, Eps) => Ordering::Greater,
            (Plus, _) => Ordering::Less,
            (_, Plus) => Ordering::Greater,
            (Arrow(a1, r1), Arrow(a2, r2)) => a1
                .len()
                .cmp(&a2.len())
                .then_with(|| a1.cmp(a2))
                .then_with(|| r1.cmp(r2)),
        }
    }
}

impl PartialOrd for ITy2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Step2Error {
    #[error("grammar does not validate: {0}")]
    Invalid(ValidationReport),
    #[error("shape violation: {reason}")]
    ShapeViolation { reason: String },
    #[error("refinement space of sort {sort} exceeds the cap of {cap}")]
    RefinementSpaceTooLarge { sort: String, cap: usize },
}

/// The refinement relation: `ε :: o`, `+ :: o`, and arrows componentwise
/// with a strictly increasing, duplicate-free argument list.
pub fn refines2(t: &ITy2, s: &Sort) -> bool {
    match (t, s) {
        (ITy2::Eps, Sort::Base) | (ITy2::Plus, Sort::Base) => true,
        (ITy2::Arrow(args, res), Sort::Arrow(d, c)) => {
            args.windows(2).all(|w| w[0] < w[1])
                && args.iter().all(|a| refines2(a, d))
                && refines2(res, c)
        }
        _ => false,
    }
}

/// All refinements of `s` in canonical order; errors out above `cap`.
pub fn enumerate_tty(s: &Sort, cap: usize) -> Result<Vec<ITy2>, Step2Error> {
    match s {
        Sort::Base => Ok(vec![ITy2::Eps, ITy2::Plus]),
        Sort::Arrow(d, c) => {
            let ds = enumerate_tty(d, cap)?;
            let cs = enumerate_tty(c, cap)?;
            if ds.len() > 20 {
                return Err(Step2Error::RefinementSpaceTooLarge {
                    sort: s.to_string(),
                    cap,
                });
            }
            let mut out = Vec::new();
            for mask in 0u64..(1u64 << ds.len()) {
                let mut args: Vec<ITy2> = Vec::new();
                for (i, t) in ds.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        args.push(t.clone());
                    }
                }
                args.sort();
                for res in &cs {
                    out.push(ITy2::Arrow(args.clone(), Box::new(res.clone())));
                    if out.len() > cap {
                        return Err(Step2Error::RefinementSpaceTooLarge {
                            sort: s.to_string(),
                            cap,
                        });
                    }
                }
            }
            out.sort();
            Ok(out)
        }
    }
}

/// The sort of the image of a value typed `t`: both base types map to `o`,
/// arrows map componentwise with one argument per conjunct.
pub fn tty_to_sort(t: &ITy2) -> Sort {
    match t {
        ITy2::Eps | ITy2::Plus => Sort::Base,
        ITy2::Arrow(args, res) => {
            Sort::arrows(args.iter().map(tty_to_sort), tty_to_sort(res))
        }
    }
}

/// The set of (non-terminal, type) pairs for which some rule body admits a
/// finite transformation derivation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivabilityTable(pub BTreeSet<(String, ITy2)>);

impl DerivabilityTable {
    pub fn contains(&self, nt: &str, ty: &ITy2) -> bool {
        self.0.contains(&(nt.to_string(), ty.clone()))
    }
}

pub fn render_subscripted2(name: &str, ty: &ITy2) -> String {
    format!("{name}'{{{}}}", ty.subscript())
}

#[derive(Clone, Copy, Debug)]
pub struct Step2Options {
    /// Restrict the output to non-terminals reachable from the fresh start.
    pub prune: bool,
    /// Refinement-space cap per sort.
    pub cap: usize,
}

impl Default for Step2Options {
    fn default() -> Self {
        Step2Options {
            prune: true,
            cap: 20_000,
        }
    }
}

// ---------------------------------------------------------------------------
// Derivation search

#[derive(Clone, Debug)]
enum SNode {
    Var(String),
    Nt(String),
    Tm(String),
    App(usize, usize),
}

struct Search2<'g> {
    g: &'g Grammar,
    table: &'g DerivabilityTable,
    nodes: Vec<SNode>,
    sorts: Vec<Sort>,
    env: BTreeMap<String, BTreeSet<ITy2>>,
    memo: HashMap<(usize, ITy2), Rc<Vec<ExtTerm>>>,
    cap: usize,
}

impl<'g> Search2<'g> {
    fn index(&mut self, t: &Term, sorts: &BTreeMap<String, Sort>) -> usize {
        let (node, sort) = match t {
            Term::Var(x) => (
                SNode::Var(x.clone()),
                sorts
                    .get(x)
                    .cloned()
                    .expect("free variables must be given sorts"),
            ),
            Term::NonTerminal(n) => (
                SNode::Nt(n.clone()),
                self.g.symbol_sort(n).expect("validated grammar"),
            ),
            Term::Terminal(n) => (
                SNode::Tm(n.clone()),
                self.g.symbol_sort(n).expect("validated grammar"),
            ),
            Term::App(f, a) => {
                let fi = self.index(f, sorts);
                let ai = self.index(a, sorts);
                let fs = self.sorts[fi].clone();
                let Sort::Arrow(_, c) = fs else {
                    unreachable!("validated grammar")
                };
                self.nodes.push(SNode::App(fi, ai));
                self.sorts.push(*c);
                return self.nodes.len() - 1;
            }
            Term::Abs(..) => unreachable!("the lambda prefix is peeled before indexing"),
        };
        self.nodes.push(node);
        self.sorts.push(sort);
        self.nodes.len() - 1
    }

    /// Detects a fully applied `br` spine at this node.
    fn as_full_br(&self, n: usize) -> Option<(usize, usize)> {
        let SNode::App(f, a1) = self.nodes[n] else {
            return None;
        };
        let SNode::App(h, a0) = self.nodes[f] else {
            return None;
        };
        match &self.nodes[h] {
            SNode::Tm(t) if t == BR => Some((a0, a1)),
            _ => None,
        }
    }

    fn search(&mut self, n: usize, ty: &ITy2) -> Result<Rc<Vec<ExtTerm>>, Step2Error> {
        if let Some(hit) = self.memo.get(&(n, ty.clone())) {
            return Ok(hit.clone());
        }
        let mut out: BTreeSet<ExtTerm> = BTreeSet::new();
        match self.nodes[n].clone() {
            SNode::Var(x) => {
                if self.env.get(&x).is_some_and(|ts| ts.contains(ty)) {
                    out.insert(ExtTerm::var(render_subscripted2(&x, ty)));
                }
            }
            SNode::Nt(a) => {
                if self.table.contains(&a, ty) {
                    out.insert(ExtTerm::nt(render_subscripted2(&a, ty)));
                }
            }
            SNode::Tm(a) => {
                if a == E {
                    if *ty == ITy2::Eps {
                        out.insert(ExtTerm::tm(E));
                    }
                } else if self.g.terminals.get(&a) == Some(&0) && *ty == ITy2::Plus {
                    out.insert(ExtTerm::tm(a));
                }
            }
            SNode::App(fun, arg) => {
                if let Some((t0, t1)) = self.as_full_br(n) {
                    self.search_br(t0, t1, ty, &mut out)?;
                } else {
                    self.search_app(fun, arg, ty, &mut out)?;
                }
            }
        }
        let rc = Rc::new(out.into_iter().collect::<Vec<_>>());
        self.memo.insert((n, ty.clone()), rc.clone());
        Ok(rc)
    }

    /// Tr2-Const2: the three-way case split on a fully applied `br`.
    fn search_br(
        &mut self,
        t0: usize,
        t1: usize,
        ty: &ITy2,
        out: &mut BTreeSet<ExtTerm>,
    ) -> Result<(), Step2Error> {
        match ty {
            ITy2::Plus => {
                let p0 = self.search(t0, &ITy2::Plus)?;
                let p1 = self.search(t1, &ITy2::Plus)?;
                let e0 = self.search(t0, &ITy2::Eps)?;
                let e1 = self.search(t1, &ITy2::Eps)?;
                for u0 in p0.iter() {
                    for u1 in p1.iter() {
                        out.insert(ExtTerm::apps(
                            ExtTerm::tm(BR),
                            [u0.clone(), u1.clone()],
                        ));
                    }
                }
                if !e1.is_empty() {
                    out.extend(p0.iter().cloned());
                }
                if !e0.is_empty() {
                    out.extend(p1.iter().cloned());
                }
            }
            ITy2::Eps => {
                let e0 = self.search(t0, &ITy2::Eps)?;
                let e1 = self.search(t1, &ITy2::Eps)?;
                if !e0.is_empty() && !e1.is_empty() {
                    out.insert(ExtTerm::tm(E));
                }
            }
            ITy2::Arrow(..) => {}
        }
        Ok(())
    }

    /// Tr2-App: environments are shared among the premises; per conjunct,
    /// all images of the argument are bundled into one set.
    fn search_app(
        &mut self,
        fun: usize,
        arg: usize,
        ty: &ITy2,
        out: &mut BTreeSet<ExtTerm>,
    ) -> Result<(), Step2Error> {
        let arg_sort = self.sorts[arg].clone();
        let refs = enumerate_tty(&arg_sort, self.cap)?;
        let mut live: Vec<ITy2> = Vec::new();
        for t in refs {
            if !self.search(arg, &t)?.is_empty() {
                live.push(t);
            }
        }
        if live.len() > 20 {
            return Err(Step2Error::RefinementSpaceTooLarge {
                sort: arg_sort.to_string(),
                cap: self.cap,
            });
        }
        for mask in 0u64..(1u64 << live.len()) {
            let mut args: Vec<ITy2> = Vec::new();
            for (i, t) in live.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    args.push(t.clone());
                }
            }
            args.sort();
            let fun_ty = ITy2::Arrow(args.clone(), Box::new(ty.clone()));
            let fun_results = self.search(fun, &fun_ty)?;
            if fun_results.is_empty() {
                continue;
            }
            let mut arg_sets: Vec<ExtTermSet> = Vec::new();
            for t in &args {
                let results = self.search(arg, t)?;
                arg_sets.push(results.iter().cloned().collect());
            }
            for v in fun_results.iter() {
                let mut acc = v.clone();
                for set in &arg_sets {
                    acc = ExtTerm::app_set(acc, set.clone());
                }
                out.insert(acc);
            }
        }
        Ok(())
    }
}

/// Transforms a term at type `ty` under a shared environment. A lambda
/// prefix is peeled with the binder types read off `ty`; `free_sorts` gives
/// the sorts of free variables, `ty_env` their types.
pub fn transform_term2(
    g: &Grammar,
    table: &DerivabilityTable,
    free_sorts: &BTreeMap<String, Sort>,
    ty_env: &BTreeSet<(String, ITy2)>,
    t: &Term,
    ty: &ITy2,
) -> Result<Vec<ExtTerm>, Step2Error> {
    transform_term2_opts(g, table, free_sorts, ty_env, t, ty, &Step2Options::default())
}

pub fn transform_term2_opts(
    g: &Grammar,
    table: &DerivabilityTable,
    free_sorts: &BTreeMap<String, Sort>,
    ty_env: &BTreeSet<(String, ITy2)>,
    t: &Term,
    ty: &ITy2,
    opts: &Step2Options,
) -> Result<Vec<ExtTerm>, Step2Error> {
    let mut env: BTreeMap<String, BTreeSet<ITy2>> = BTreeMap::new();
    for (x, t) in ty_env {
        env.entry(x.clone()).or_default().insert(t.clone());
    }
    let mut sorts = free_sorts.clone();
    let mut binders: Vec<(String, Vec<ITy2>)> = Vec::new();
    let mut cur = t;
    let mut cur_ty = ty.clone();
    while let Term::Abs(x, annot, body) = cur {
        let ITy2::Arrow(args, res) = cur_ty else {
            return Ok(vec![]);
        };
        env.insert(x.clone(), args.iter().cloned().collect());
        binders.push((x.clone(), args));
        sorts.insert(x.clone(), annot.clone());
        cur = body;
        cur_ty = *res;
    }

    let mut search = Search2 {
        g,
        table,
        nodes: Vec::new(),
        sorts: Vec::new(),
        env,
        memo: HashMap::new(),
        cap: opts.cap,
    };
    let root = search.index(cur, &sorts);
    let results = search.search(root, &cur_ty)?;

    let out: Vec<ExtTerm> = results
        .iter()
        .map(|body| {
            let mut acc = body.clone();
            for (x, conjuncts) in binders.iter().rev() {
                for c in conjuncts.iter().rev() {
                    acc = ExtTerm::Abs(render_subscripted2(x, c), Box::new(acc));
                }
            }
            acc
        })
        .collect();
    Ok(out)
}

fn check_shape(g: &Grammar) -> Result<(), Step2Error> {
    for (name, &arity) in &g.terminals {
        if name == BR {
            if arity != 2 {
                return Err(Step2Error::ShapeViolation {
                    reason: format!("terminal `br` has arity {arity}, expected 2"),
                });
            }
        } else if arity != 0 {
            return Err(Step2Error::ShapeViolation {
                reason: format!("terminal `{name}` has arity {arity}; all terminals except `br` must be nullary"),
            });
        }
    }
    fn full_br(t: &Term) -> bool {
        let (head, args) = t.spine();
        if matches!(head, Term::Terminal(n) if n == BR) && args.len() != 2 {
            return false;
        }
        args.iter().all(|a| full_br(a))
    }
    for r in g.rules() {
        if !full_br(&r.body) {
            return Err(Step2Error::ShapeViolation {
                reason: format!(
                    "partial application of `br` in a rule for `{}`; run the br saturation first",
                    r.lhs
                ),
            });
        }
    }
    Ok(())
}

/// Least fixpoint of non-terminal derivability: `(A, τ)` enters the table
/// when some rule body of `A` transforms at `τ` using only entries already
/// in the table.
pub fn compute_derivability(g: &Grammar) -> Result<DerivabilityTable, Step2Error> {
    compute_derivability_opts(g, &Step2Options::default())
}

pub fn compute_derivability_opts(
    g: &Grammar,
    opts: &Step2Options,
) -> Result<DerivabilityTable, Step2Error> {
    let report = validate(g);
    if !report.is_valid() {
        return Err(Step2Error::Invalid(report));
    }
    check_shape(g)?;
    let mut pairs: Vec<(String, ITy2, Rule)> = Vec::new();
    for (name, nt_sort) in &g.nonterminals {
        for ty in enumerate_tty(nt_sort, opts.cap)? {
            for rule in g.rules_of(name) {
                pairs.push((name.clone(), ty.clone(), rule.clone()));
            }
        }
    }
    let mut table = DerivabilityTable::default();
    loop {
        let mut changed = false;
        for (name, ty, rule) in &pairs {
            if table.contains(name, ty) {
                continue;
            }
            if !rule_images(g, &table, rule, ty, opts)?.is_empty() {
                table.0.insert((name.clone(), ty.clone()));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(table)
}

fn rule_images(
    g: &Grammar,
    table: &DerivabilityTable,
    rule: &Rule,
    ty: &ITy2,
    opts: &Step2Options,
) -> Result<Vec<ExtRule>, Step2Error> {
    let nt_sort = &g.nonterminals[&rule.lhs];
    let prefixed = rule
        .params
        .iter()
        .zip(nt_sort.domains())
        .rev()
        .fold(rule.body.clone(), |acc, (x, s)| {
            Term::Abs(x.clone(), s.clone(), Box::new(acc))
        });
    let images = transform_term2_opts(
        g,
        table,
        &BTreeMap::new(),
        &BTreeSet::new(),
        &prefixed,
        ty,
        opts,
    )?;
    Ok(images
        .into_iter()
        .map(|image| {
            let mut params = Vec::new();
            let mut cur = image;
            while let ExtTerm::Abs(x, body) = cur {
                params.push(x);
                cur = *body;
            }
            ExtRule {
                lhs: render_subscripted2(&rule.lhs, ty),
                params,
                body: cur,
            }
        })
        .collect())
}

/// Transforms a whole tree grammar: the alphabet is unchanged, non-terminals
/// are replicated per refinement type, and a fresh start symbol gets the two
/// rules rewriting to the `ε` and `+` copies of the old start.
pub fn transform_grammar2(g: &Grammar, opts: &Step2Options) -> Result<ExtGrammar, Step2Error> {
    let table = compute_derivability_opts(g, opts)?;

    let start = g.fresh_name("$S");
    let mut nonterminals: BTreeMap<String, Sort> = BTreeMap::new();
    let mut rules: BTreeSet<ExtRule> = BTreeSet::new();

    for (name, nt_sort) in &g.nonterminals {
        for ty in enumerate_tty(nt_sort, opts.cap)? {
            nonterminals.insert(render_subscripted2(name, &ty), tty_to_sort(&ty));
        }
    }
    for (name, ty) in &table.0 {
        for rule in g.rules_of(name) {
            for img in rule_images(g, &table, rule, ty, opts)? {
                rules.insert(img);
            }
        }
    }

    let s_eps = render_subscripted2(&g.start, &ITy2::Eps);
    let s_plus = render_subscripted2(&g.start, &ITy2::Plus);
    nonterminals.insert(start.clone(), Sort::Base);
    rules.insert(ExtRule {
        lhs: start.clone(),
        params: vec![],
        body: ExtTerm::nt(s_eps),
    });
    rules.insert(ExtRule {
        lhs: start.clone(),
        params: vec![],
        body: ExtTerm::nt(s_plus),
    });

    let mut out = ExtGrammar::new(
        g.terminals.clone(),
        nonterminals,
        rules.into_iter().collect(),
        start,
    );
    if opts.prune {
        out = prune_reachable(out);
    }
    Ok(out)
}

/// Keeps only the non-terminals reachable from the start. Rule-less but
/// reachable non-terminals (the underivable start copy, typically) stay
/// declared.
fn prune_reachable(g: ExtGrammar) -> ExtGrammar {
    let mut reachable: BTreeSet<String> = BTreeSet::from([g.start.clone()]);
    loop {
        let mut changed = false;
        for r in g.rules() {
            if !reachable.contains(&r.lhs) {
                continue;
            }
            for n in nts_of(&r.body) {
                if reachable.insert(n) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let rules: Vec<ExtRule> = g
        .rules()
        .iter()
        .filter(|r| reachable.contains(&r.lhs))
        .cloned()
        .collect();
    let nonterminals: BTreeMap<String, Sort> = g
        .nonterminals
        .iter()
        .filter(|(n, _)| reachable.contains(*n))
        .map(|(n, s)| (n.clone(), s.clone()))
        .collect();
    ExtGrammar::new(g.terminals.clone(), nonterminals, rules, g.start.clone())
}

fn nts_of(t: &ExtTerm) -> Vec<String> {
    fn go(t: &ExtTerm, out: &mut Vec<String>) {
        match t {
            ExtTerm::NonTerminal(n) => out.push(n.clone()),
            ExtTerm::App(f, args) => {
                go(f, out);
                for a in args {
                    go(a, out);
                }
            }
            ExtTerm::Abs(_, body) => go(body, out),
            _ => {}
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    out
}
