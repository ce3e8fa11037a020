//! Step 1: the order-lowering transformation from an order-(n+1) word
//! grammar to an order-n extended tree grammar with the same word language
//! up to removals of `e`.
//!
//! Simple sorts are refined by intersection types
//! `θ ::= o | θ1 ∧ .. ∧ θk -> θ` classified as balanced or unbalanced.
//! Unbalanced types mark values that contain the end of the word and are
//! treated linearly: a shared binding in an environment union must be
//! balanced, and an unbalanced binding is consumed exactly once. Order-0
//! arguments are removed: an argument used at type `o` moves out as a
//! sibling under `br` (rule App2), an argument ignored by its function
//! disappears (rule App1 with an empty intersection), and an abstraction
//! over a used order-0 variable substitutes `e` for it (rule Abs2).
//!
//! Derivation search follows the restricted set rule: at an unbalanced
//! argument type the output set is a singleton, at a balanced type all
//! outputs sharing one minimal environment are bundled into one set.

use crate::ext::{ExtGrammar, ExtRule, ExtTerm, ExtTermSet};
use crate::grammar::{
    is_word_grammar, print_term, validate, Grammar, Sort, Term, ValidationReport, BR,
    E,
};
use crate::preprocess::assumption_holds;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;
use thiserror::Error;

/// A step-1 intersection type. The argument list of an arrow is strictly
/// increasing in the canonical order; the empty list is the top type.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum ITy1 {
    Base,
    Arrow(Vec<ITy1>, Box<ITy1>),
}

impl ITy1 {
    pub fn arrow(args: Vec<ITy1>, result: ITy1) -> ITy1 {
        debug_assert!(args.windows(2).all(|w| w[0] < w[1]));
        ITy1::Arrow(args, Box::new(result))
    }

    /// Subscript rendering: `o`, `top`, `^` for intersection, `->` for
    /// arrows, parentheses around arrow conjuncts. Stable and parseable.
    pub fn subscript(&self) -> String {
        match self {
            ITy1::Base => "o".to_string(),
            ITy1::Arrow(args, res) => {
                let lhs = if args.is_empty() {
                    "top".to_string()
                } else {
                    args.iter()
                        .map(|c| match c {
                            ITy1::Base => "o".to_string(),
                            arrow => format!("({})", arrow.subscript()),
                        })
                        .collect::<Vec<_>>()
                        .join("^")
                };
                format!("{lhs}->{}", res.subscript())
            }
        }
    }
}

impl fmt::Debug for ITy1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subscript())
    }
}

impl fmt::Display for ITy1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subscript())
    }
}

// Canonical total order: base first, then arrows by conjunct count,
// then lexicographically, then by result.
impl Ord for ITy1 {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ITy1::Base, ITy1::Base) => Ordering::Equal,
            (ITy1::Base, _) => Ordering::Less,
            (_, ITy1::Base) => Ordering::Greater,
            (ITy1::Arrow(a1, r1), ITy1::Arrow(a2, r2)) => a1
                .len()
                .cmp(&a2.len())
                .then_with(|| a1.cmp(a2))
                .then_with(|| r1.cmp(r2)),
        }
    }
}

impl PartialOrd for ITy1 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The canonical total order on intersection types.
pub fn ity_order(a: &ITy1, b: &ITy1) -> Ordering {
    a.cmp(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Balanced,
    Unbalanced,
}

/// The polarity of a well-formed type, independent of the refined sort:
/// base is unbalanced; an intersection is unbalanced iff exactly one
/// conjunct is; an arrow from a balanced intersection takes the opposite
/// of nothing (balanced argument keeps the result's polarity rules:
/// balanced -> balanced is balanced, balanced -> unbalanced is unbalanced),
/// and an unbalanced argument forces an unbalanced result and a balanced
/// arrow. Returns `None` for structurally ill-formed types.
pub fn polarity(t: &ITy1) -> Option<Polarity> {
    match t {
        ITy1::Base => Some(Polarity::Unbalanced),
        ITy1::Arrow(args, res) => {
            if !args.windows(2).all(|w| w[0] < w[1]) {
                return None;
            }
            let mut unbalanced = 0usize;
            for a in args {
                if polarity(a)? == Polarity::Unbalanced {
                    unbalanced += 1;
                }
            }
            if unbalanced > 1 {
                return None;
            }
            let arg_pol = if unbalanced == 1 {
                Polarity::Unbalanced
            } else {
                Polarity::Balanced
            };
            match (arg_pol, polarity(res)?) {
                (Polarity::Balanced, Polarity::Unbalanced) => Some(Polarity::Unbalanced),
                (Polarity::Unbalanced, Polarity::Unbalanced) => Some(Polarity::Balanced),
                (Polarity::Balanced, Polarity::Balanced) => Some(Polarity::Balanced),
                (Polarity::Unbalanced, Polarity::Balanced) => None,
            }
        }
    }
}

/// Classifies `t` as a refinement of `s`, or `None` if ill-formed.
pub fn refines(t: &ITy1, s: &Sort) -> Option<Polarity> {
    match (t, s) {
        (ITy1::Base, Sort::Base) => polarity(t),
        (ITy1::Arrow(args, res), Sort::Arrow(d, c)) => {
            for a in args {
                refines(a, d)?;
            }
            refines(res, c)?;
            polarity(t)
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Step1Error {
    #[error("grammar does not validate: {0}")]
    Invalid(ValidationReport),
    #[error("not a word grammar")]
    NotAWordGrammar,
    #[error("order assumption violated: some non-terminal sort has an order-0 domain followed by an order-2 codomain (run the order normalization first)")]
    AssumptionViolated,
    #[error("refinement space of sort {sort} exceeds the cap of {cap}")]
    RefinementSpaceTooLarge { sort: String, cap: usize },
}

/// All well-formed refinements of `s`, with their polarity, in canonical
/// order. Errors out above `cap` results per sort.
pub fn enumerate_refinements(s: &Sort, cap: usize) -> Result<Vec<(ITy1, Polarity)>, Step1Error> {
    let out = enum_refs(s, cap)?;
    Ok(out)
}

fn enum_refs(s: &Sort, cap: usize) -> Result<Vec<(ITy1, Polarity)>, Step1Error> {
    match s {
        Sort::Base => Ok(vec![(ITy1::Base, Polarity::Unbalanced)]),
        Sort::Arrow(d, c) => {
            let ds = enum_refs(d, cap)?;
            let cs = enum_refs(c, cap)?;
            let balanced: Vec<&ITy1> = ds
                .iter()
                .filter(|(_, p)| *p == Polarity::Balanced)
                .map(|(t, _)| t)
                .collect();
            let unbalanced: Vec<&ITy1> = ds
                .iter()
                .filter(|(_, p)| *p == Polarity::Unbalanced)
                .map(|(t, _)| t)
                .collect();
            if balanced.len() > 20 {
                return Err(Step1Error::RefinementSpaceTooLarge {
                    sort: s.to_string(),
                    cap,
                });
            }
            let mut out = Vec::new();
            // subsets of the balanced refinements, plus at most one
            // unbalanced conjunct
            for mask in 0u64..(1u64 << balanced.len()) {
                let mut base: Vec<ITy1> = Vec::new();
                for (i, t) in balanced.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        base.push((*t).clone());
                    }
                }
                let mut extensions: Vec<Option<&ITy1>> = vec![None];
                extensions.extend(unbalanced.iter().map(|t| Some(*t)));
                for ext in extensions {
                    let mut args = base.clone();
                    if let Some(u) = ext {
                        args.push(u.clone());
                    }
                    args.sort();
                    for (res, _) in &cs {
                        let cand = ITy1::Arrow(args.clone(), Box::new(res.clone()));
                        if let Some(p) = polarity(&cand) {
                            out.push((cand, p));
                            if out.len() > cap {
                                return Err(Step1Error::RefinementSpaceTooLarge {
                                    sort: s.to_string(),
                                    cap,
                                });
                            }
                        }
                    }
                }
            }
            out.sort_by(|(a, _), (b, _)| a.cmp(b));
            Ok(out)
        }
    }
}

/// The sort of the transformed image of a value of type `t` refining `k`:
/// everything of order at most 1 maps to `o`; above that, one argument per
/// conjunct.
pub fn target_sort(t: &ITy1, k: &Sort) -> Sort {
    if k.order() <= 1 {
        return Sort::Base;
    }
    match (t, k) {
        (ITy1::Arrow(args, res), Sort::Arrow(d, c)) => Sort::arrows(
            args.iter().map(|a| target_sort(a, d)),
            target_sort(res, c),
        ),
        _ => unreachable!("refinements follow the sort structure"),
    }
}

/// A type environment: a set of bindings, where one variable may carry
/// several distinct types.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TEnv1(pub BTreeSet<(String, ITy1)>);

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("linearity violation: unbalanced binding {var} : {ty} shared between environments")]
pub struct LinearityViolation {
    pub var: String,
    pub ty: ITy1,
}

/// Union of two environments; defined only when every shared binding is
/// balanced.
pub fn env_union(e1: &TEnv1, e2: &TEnv1) -> Result<TEnv1, LinearityViolation> {
    for b in e1.0.intersection(&e2.0) {
        if polarity(&b.1) == Some(Polarity::Unbalanced) {
            return Err(LinearityViolation {
                var: b.0.clone(),
                ty: b.1.clone(),
            });
        }
    }
    Ok(TEnv1(e1.0.union(&e2.0).cloned().collect()))
}

/// A per-environment argument bundle: the shared minimal environment, the
/// output set, and the element derivations when tracing.
type ArgGroup = (TEnv1, ExtTermSet, Vec<Rc<Deriv1>>);

/// A recorded derivation node, for `--trace` output.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Deriv1 {
    pub rule: &'static str,
    pub judgment: String,
    pub children: Vec<Rc<Deriv1>>,
}

impl Deriv1 {
    fn node(rule: &'static str, judgment: String, children: Vec<Rc<Deriv1>>) -> Rc<Deriv1> {
        Rc::new(Deriv1 {
            rule,
            judgment,
            children,
        })
    }

    /// The rule names as a nested s-expression, e.g. `(Abs1 (Abs2 ..))`.
    pub fn skeleton(&self) -> String {
        if self.children.is_empty() {
            format!("({})", self.rule)
        } else {
            let inner: Vec<String> = self.children.iter().map(|c| c.skeleton()).collect();
            format!("({} {})", self.rule, inner.join(" "))
        }
    }

    /// Indented rule-name tree with judgments.
    pub fn render(&self) -> String {
        fn go(d: &Deriv1, depth: usize, out: &mut String) {
            out.push_str(&"  ".repeat(depth));
            out.push_str(d.rule);
            if !d.judgment.is_empty() {
                out.push_str(": ");
                out.push_str(&d.judgment);
            }
            out.push('\n');
            for c in &d.children {
                go(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }
}

/// One result of derivation search: a minimal environment and the output
/// extended term (plus the derivation when tracing).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransResult {
    pub env: TEnv1,
    pub out: ExtTerm,
    pub deriv: Option<Rc<Deriv1>>,
}

pub fn render_subscripted(name: &str, ty: &ITy1) -> String {
    format!("{name}'{{{}}}", ty.subscript())
}

#[derive(Clone, Copy, Debug)]
pub struct Step1Options {
    /// Restrict the output to rules reachable from the start symbol and
    /// productive (able to produce a tree).
    pub prune: bool,
    /// Record derivations.
    pub trace: bool,
    /// Refinement-space cap per sort.
    pub cap: usize,
}

impl Default for Step1Options {
    fn default() -> Self {
        Step1Options {
            prune: true,
            trace: false,
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

struct Search<'g> {
    g: &'g Grammar,
    nodes: Vec<SNode>,
    sorts: Vec<Sort>,
    texts: Vec<String>,
    /// allowed types per variable (conjuncts of its binder, or every
    /// refinement of its sort for free variables)
    allowed: BTreeMap<String, Vec<ITy1>>,
    memo: HashMap<(usize, ITy1), Rc<Vec<TransResult>>>,
    cap: usize,
    trace: bool,
}

impl<'g> Search<'g> {
    fn index(
        &mut self,
        t: &Term,
        env: &BTreeMap<String, Sort>,
    ) -> Result<usize, Step1Error> {
        let (node, sort) = match t {
            Term::Var(x) => (
                SNode::Var(x.clone()),
                env.get(x)
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
                let fi = self.index(f, env)?;
                let ai = self.index(a, env)?;
                let fs = self.sorts[fi].clone();
                let Sort::Arrow(_, c) = fs else {
                    unreachable!("validated grammar")
                };
                self.nodes.push(SNode::App(fi, ai));
                self.sorts.push(*c);
                self.texts.push(print_term(t));
                return Ok(self.nodes.len() - 1);
            }
            Term::Abs(..) => unreachable!("the lambda prefix is peeled before indexing"),
        };
        self.nodes.push(node);
        self.sorts.push(sort);
        self.texts.push(print_term(t));
        Ok(self.nodes.len() - 1)
    }

    fn judgment(&self, n: usize, ty: &ITy1, out: &ExtTerm) -> String {
        if self.trace {
            format!("{} : {} ~> {}", self.texts[n], ty, out)
        } else {
            String::new()
        }
    }

    fn search(&mut self, n: usize, ty: &ITy1) -> Result<Rc<Vec<TransResult>>, Step1Error> {
        if let Some(hit) = self.memo.get(&(n, ty.clone())) {
            return Ok(hit.clone());
        }
        let mut out: BTreeSet<TransResult> = BTreeSet::new();
        match self.nodes[n].clone() {
            SNode::Var(x) => {
                if self.allowed.get(&x).is_some_and(|ts| ts.contains(ty)) {
                    let term = ExtTerm::var(render_subscripted(&x, ty));
                    let deriv = self
                        .trace
                        .then(|| Deriv1::node("Var", self.judgment(n, ty, &term), vec![]));
                    out.insert(TransResult {
                        env: TEnv1(BTreeSet::from([(x, ty.clone())])),
                        out: term,
                        deriv,
                    });
                }
            }
            SNode::Nt(a) => {
                let nt_sort = self.g.symbol_sort(&a).expect("validated grammar");
                if refines(ty, &nt_sort).is_some() {
                    let term = ExtTerm::nt(render_subscripted(&a, ty));
                    let deriv = self
                        .trace
                        .then(|| Deriv1::node("NT", self.judgment(n, ty, &term), vec![]));
                    out.insert(TransResult {
                        env: TEnv1::default(),
                        out: term,
                        deriv,
                    });
                }
            }
            SNode::Tm(a) => {
                if a == E && *ty == ITy1::Base {
                    let term = ExtTerm::tm(E);
                    let deriv = self
                        .trace
                        .then(|| Deriv1::node("Const0", self.judgment(n, ty, &term), vec![]));
                    out.insert(TransResult {
                        env: TEnv1::default(),
                        out: term,
                        deriv,
                    });
                } else if self.g.terminals.get(&a) == Some(&1)
                    && *ty == ITy1::arrow(vec![ITy1::Base], ITy1::Base)
                {
                    let term = ExtTerm::tm(a);
                    let deriv = self
                        .trace
                        .then(|| Deriv1::node("Const1", self.judgment(n, ty, &term), vec![]));
                    out.insert(TransResult {
                        env: TEnv1::default(),
                        out: term,
                        deriv,
                    });
                }
            }
            SNode::App(fun, arg) => {
                self.search_app1(n, fun, arg, ty, &mut out)?;
                self.search_app2(n, fun, arg, ty, &mut out)?;
            }
        }
        let rc = Rc::new(out.into_iter().collect::<Vec<_>>());
        self.memo.insert((n, ty.clone()), rc.clone());
        Ok(rc)
    }

    /// Tr1-App1: choose an intersection of non-base argument types; the
    /// argument is replicated per conjunct, as a set of transformed images.
    fn search_app1(
        &mut self,
        n: usize,
        fun: usize,
        arg: usize,
        ty: &ITy1,
        out: &mut BTreeSet<TransResult>,
    ) -> Result<(), Step1Error> {
        let arg_sort = self.sorts[arg].clone();
        let ty_pol = polarity(ty).expect("requested types are well-formed");
        let refs = enumerate_refinements(&arg_sort, self.cap)?;
        // conjunct candidates: non-base refinements with at least one result
        let mut live: Vec<(ITy1, Polarity)> = Vec::new();
        for (t, p) in refs {
            if t == ITy1::Base {
                continue;
            }
            if !self.search(arg, &t)?.is_empty() {
                live.push((t, p));
            }
        }
        let balanced: Vec<&ITy1> = live
            .iter()
            .filter(|(_, p)| *p == Polarity::Balanced)
            .map(|(t, _)| t)
            .collect();
        let unbalanced: Vec<&ITy1> = live
            .iter()
            .filter(|(_, p)| *p == Polarity::Unbalanced)
            .map(|(t, _)| t)
            .collect();
        if balanced.len() > 20 {
            return Err(Step1Error::RefinementSpaceTooLarge {
                sort: arg_sort.to_string(),
                cap: self.cap,
            });
        }
        for mask in 0u64..(1u64 << balanced.len()) {
            let mut base: Vec<ITy1> = Vec::new();
            for (i, t) in balanced.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    base.push((*t).clone());
                }
            }
            let mut extensions: Vec<Option<&ITy1>> = vec![None];
            extensions.extend(unbalanced.iter().map(|t| Some(*t)));
            for ext in extensions {
                let mut args = base.clone();
                let arg_pol = match ext {
                    Some(u) => {
                        args.push((*u).clone());
                        Polarity::Unbalanced
                    }
                    None => Polarity::Balanced,
                };
                // ill-formed arrow: unbalanced argument, balanced result
                if arg_pol == Polarity::Unbalanced && ty_pol == Polarity::Balanced {
                    continue;
                }
                args.sort();
                let fun_ty = ITy1::Arrow(args.clone(), Box::new(ty.clone()));
                let fun_results = self.search(fun, &fun_ty)?;
                if fun_results.is_empty() {
                    continue;
                }
                // grouped argument candidates per conjunct
                let mut arg_groups: Vec<Vec<ArgGroup>> = Vec::new();
                for t in &args {
                    let results = self.search(arg, t)?;
                    arg_groups.push(group_results(
                        &results,
                        polarity(t).expect("well-formed"),
                    ));
                }
                let fun_results = fun_results.clone();
                for f in fun_results.iter() {
                    self.combine(n, ty, f, &arg_groups, out);
                }
            }
        }
        Ok(())
    }

    /// Cartesian product over per-conjunct candidates, pruned on linearity
    /// violations.
    fn combine(
        &self,
        n: usize,
        ty: &ITy1,
        fun_res: &TransResult,
        arg_groups: &[Vec<ArgGroup>],
        out: &mut BTreeSet<TransResult>,
    ) {
        struct Walk<'a> {
            s: &'a Search<'a>,
            n: usize,
            ty: &'a ITy1,
            fun_res: &'a TransResult,
            groups: &'a [Vec<ArgGroup>],
        }
        impl Walk<'_> {
            fn go(
                &self,
                idx: usize,
                env: TEnv1,
                acc: ExtTerm,
                derivs: Vec<Rc<Deriv1>>,
                out: &mut BTreeSet<TransResult>,
            ) {
                if idx == self.groups.len() {
                    let deriv = self.s.trace.then(|| {
                        let mut children = Vec::new();
                        if let Some(d) = &self.fun_res.deriv {
                            children.push(d.clone());
                        }
                        children.extend(derivs.iter().cloned());
                        Deriv1::node("App1", self.s.judgment(self.n, self.ty, &acc), children)
                    });
                    out.insert(TransResult {
                        env,
                        out: acc,
                        deriv,
                    });
                    return;
                }
                for (genv, gset, gderivs) in &self.groups[idx] {
                    let Ok(env2) = env_union(&env, genv) else {
                        continue;
                    };
                    let acc2 = ExtTerm::app_set(acc.clone(), gset.clone());
                    let mut derivs2 = derivs.clone();
                    if self.s.trace {
                        derivs2.push(set_deriv(gderivs));
                    }
                    self.go(idx + 1, env2, acc2, derivs2, out);
                }
            }
        }
        Walk {
            s: self,
            n,
            ty,
            fun_res,
            groups: arg_groups,
        }
        .go(
            0,
            fun_res.env.clone(),
            fun_res.out.clone(),
            Vec::new(),
            out,
        );
    }

    /// Tr1-App2: an order-0 argument moves out as a sibling under `br`.
    fn search_app2(
        &mut self,
        n: usize,
        fun: usize,
        arg: usize,
        ty: &ITy1,
        out: &mut BTreeSet<TransResult>,
    ) -> Result<(), Step1Error> {
        if self.sorts[arg] != Sort::Base {
            return Ok(());
        }
        // o -> ty is well-formed only when ty is unbalanced
        if polarity(ty) != Some(Polarity::Unbalanced) {
            return Ok(());
        }
        let fun_ty = ITy1::arrow(vec![ITy1::Base], ty.clone());
        let fun_results = self.search(fun, &fun_ty)?;
        if fun_results.is_empty() {
            return Ok(());
        }
        let arg_results = self.search(arg, &ITy1::Base)?;
        // the function side has a balanced type: bundle per environment;
        // the argument side is unbalanced: singletons
        let fun_groups = group_results(&fun_results, Polarity::Balanced);
        let arg_groups = group_results(&arg_results, Polarity::Unbalanced);
        for (fenv, fset, fderivs) in &fun_groups {
            for (aenv, aset, aderivs) in &arg_groups {
                let Ok(env) = env_union(fenv, aenv) else {
                    continue;
                };
                let term = ExtTerm::app_set(
                    ExtTerm::app_set(ExtTerm::tm(BR), fset.clone()),
                    aset.clone(),
                );
                let deriv = self.trace.then(|| {
                    Deriv1::node(
                        "App2",
                        self.judgment(n, ty, &term),
                        vec![set_deriv(fderivs), set_deriv(aderivs)],
                    )
                });
                out.insert(TransResult {
                    env,
                    out: term,
                    deriv,
                });
            }
        }
        Ok(())
    }
}

fn set_deriv(derivs: &[Rc<Deriv1>]) -> Rc<Deriv1> {
    if derivs.len() == 1 {
        derivs[0].clone()
    } else {
        Deriv1::node("Set", String::new(), derivs.to_vec())
    }
}

/// Bundles results into per-environment sets: singletons at unbalanced
/// types, maximal sets per identical minimal environment at balanced types.
fn group_results(results: &[TransResult], pol: Polarity) -> Vec<ArgGroup> {
    match pol {
        Polarity::Unbalanced => results
            .iter()
            .map(|r| {
                (
                    r.env.clone(),
                    ExtTermSet::from([r.out.clone()]),
                    r.deriv.iter().cloned().collect(),
                )
            })
            .collect(),
        Polarity::Balanced => {
            let mut by_env: BTreeMap<TEnv1, (ExtTermSet, Vec<Rc<Deriv1>>)> = BTreeMap::new();
            for r in results {
                let entry = by_env.entry(r.env.clone()).or_default();
                entry.0.insert(r.out.clone());
                if let Some(d) = &r.deriv {
                    entry.1.push(d.clone());
                }
            }
            by_env
                .into_iter()
                .map(|(env, (set, derivs))| (env, set, derivs))
                .collect()
        }
    }
}

/// Transforms a term at type `ty`. A lambda prefix is peeled with the
/// binder types read off `ty`; free variables take their sorts from
/// `free_sorts` and may be assigned any refinement, with the consumed
/// bindings reported in the minimal environment of each result.
pub fn transform_term1(
    g: &Grammar,
    free_sorts: &BTreeMap<String, Sort>,
    t: &Term,
    ty: &ITy1,
) -> Result<Vec<TransResult>, Step1Error> {
    transform_term1_opts(g, free_sorts, t, ty, &Step1Options::default())
}

enum Binder {
    /// Abs1: one parameter per conjunct.
    Replicate(String, Vec<ITy1>),
    /// Abs2: the order-0 parameter is consumed and replaced by `e`.
    ErasedBase(String),
}

pub fn transform_term1_opts(
    g: &Grammar,
    free_sorts: &BTreeMap<String, Sort>,
    t: &Term,
    ty: &ITy1,
    opts: &Step1Options,
) -> Result<Vec<TransResult>, Step1Error> {
    // an ill-formed type refines nothing, so nothing transforms at it
    if polarity(ty).is_none() {
        return Ok(vec![]);
    }
    // peel the lambda prefix, reading conjuncts off the requested type
    let mut binders: Vec<Binder> = Vec::new();
    let mut env = free_sorts.clone();
    let mut cur = t;
    let mut cur_ty = ty.clone();
    let mut allowed: BTreeMap<String, Vec<ITy1>> = BTreeMap::new();
    for (x, s) in free_sorts {
        allowed.insert(
            x.clone(),
            enumerate_refinements(s, opts.cap)?
                .into_iter()
                .map(|(t, _)| t)
                .collect(),
        );
    }
    while let Term::Abs(x, annot, body) = cur {
        let ITy1::Arrow(args, res) = cur_ty else {
            return Ok(vec![]);
        };
        if args == vec![ITy1::Base] {
            binders.push(Binder::ErasedBase(x.clone()));
            allowed.insert(x.clone(), vec![ITy1::Base]);
        } else {
            allowed.insert(x.clone(), args.clone());
            binders.push(Binder::Replicate(x.clone(), args));
        }
        env.insert(x.clone(), annot.clone());
        cur = body;
        cur_ty = *res;
    }

    let mut search = Search {
        g,
        nodes: Vec::new(),
        sorts: Vec::new(),
        texts: Vec::new(),
        allowed,
        memo: HashMap::new(),
        cap: opts.cap,
        trace: opts.trace,
    };
    let root = search.index(cur, &env)?;
    let results = search.search(root, &cur_ty)?;

    // apply the binders, innermost-first filtering on consumed bindings
    let mut out: Vec<TransResult> = Vec::new();
    'result: for r in results.iter() {
        let mut env = r.env.clone();
        let mut body = r.out.clone();
        let mut params_rev: Vec<String> = Vec::new();
        for b in binders.iter().rev() {
            match b {
                Binder::ErasedBase(x) => {
                    let binding = (x.clone(), ITy1::Base);
                    if !env.0.remove(&binding) {
                        continue 'result;
                    }
                    body = subst_var(&body, &render_subscripted(x, &ITy1::Base), &ExtTerm::tm(E));
                }
                Binder::Replicate(x, conjuncts) => {
                    for c in conjuncts {
                        let required = polarity(c) == Some(Polarity::Unbalanced);
                        let present = env.0.remove(&(x.clone(), c.clone()));
                        if required && !present {
                            continue 'result;
                        }
                    }
                    for c in conjuncts.iter().rev() {
                        params_rev.push(render_subscripted(x, c));
                    }
                }
            }
        }
        let params: Vec<String> = params_rev.into_iter().rev().collect();
        let body = params
            .iter()
            .rev()
            .fold(body, |acc, p| ExtTerm::Abs(p.clone(), Box::new(acc)));
        let deriv = r.deriv.as_ref().map(|d| {
            let mut node = d.clone();
            for b in binders.iter().rev() {
                let rule = match b {
                    Binder::ErasedBase(_) => "Abs2",
                    Binder::Replicate(..) => "Abs1",
                };
                node = Deriv1::node(rule, String::new(), vec![node]);
            }
            node
        });
        out.push(TransResult {
            env,
            out: body,
            deriv,
        });
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn subst_var(t: &ExtTerm, var: &str, replacement: &ExtTerm) -> ExtTerm {
    match t {
        ExtTerm::Var(x) if x == var => replacement.clone(),
        ExtTerm::Var(_) | ExtTerm::NonTerminal(_) | ExtTerm::Terminal(_) => t.clone(),
        ExtTerm::App(f, args) => ExtTerm::App(
            Box::new(subst_var(f, var, replacement)),
            args.iter().map(|a| subst_var(a, var, replacement)).collect(),
        ),
        ExtTerm::Abs(x, body) if x != var => {
            ExtTerm::Abs(x.clone(), Box::new(subst_var(body, var, replacement)))
        }
        ExtTerm::Abs(..) => t.clone(),
    }
}

/// Output of the whole-grammar transformation.
#[derive(Clone, Debug)]
pub struct Step1Output {
    pub grammar: ExtGrammar,
    /// Recorded derivations, one per emitted rule, when tracing.
    pub traces: Vec<(String, String, Rc<Deriv1>)>,
}

/// Transforms a whole word grammar: the output alphabet is
/// `{br: 2, e: 0}` plus one nullary terminal per unary input terminal;
/// non-terminals are replicated per refinement type; the start is the
/// base-typed copy of the input start.
pub fn transform_grammar1(g: &Grammar, opts: &Step1Options) -> Result<Step1Output, Step1Error> {
    let report = validate(g);
    if !report.is_valid() {
        return Err(Step1Error::Invalid(report));
    }
    if !is_word_grammar(g) {
        return Err(Step1Error::NotAWordGrammar);
    }
    if !assumption_holds(g) {
        return Err(Step1Error::AssumptionViolated);
    }

    let mut terminals: BTreeMap<String, usize> =
        [(BR.to_string(), 2), (E.to_string(), 0)].into();
    for (name, &arity) in &g.terminals {
        if arity == 1 {
            terminals.insert(name.clone(), 0);
        }
    }

    let mut nonterminals: BTreeMap<String, Sort> = BTreeMap::new();
    let mut rules: BTreeSet<ExtRule> = BTreeSet::new();
    let mut traces: Vec<(String, String, Rc<Deriv1>)> = Vec::new();

    for (name, nt_sort) in &g.nonterminals {
        for (ty, _) in enumerate_refinements(nt_sort, opts.cap)? {
            let rendered = render_subscripted(name, &ty);
            nonterminals.insert(rendered.clone(), target_sort(&ty, nt_sort));
            for rule in g.rules_of(name) {
                let prefixed = rule
                    .params
                    .iter()
                    .zip(nt_sort.domains())
                    .rev()
                    .fold(rule.body.clone(), |acc, (x, s)| {
                        Term::Abs(x.clone(), s.clone(), Box::new(acc))
                    });
                for res in transform_term1_opts(g, &BTreeMap::new(), &prefixed, &ty, opts)? {
                    debug_assert!(res.env.0.is_empty());
                    let (params, body) = strip_abs(res.out);
                    let ext_rule = ExtRule {
                        lhs: rendered.clone(),
                        params,
                        body,
                    };
                    if let Some(d) = res.deriv {
                        traces.push((
                            ext_rule.lhs.clone(),
                            crate::ext::print_ext_term(&ext_rule.body),
                            d,
                        ));
                    }
                    rules.insert(ext_rule);
                }
            }
        }
    }

    let start = render_subscripted(&g.start, &ITy1::Base);
    let mut out = ExtGrammar::new(
        terminals,
        nonterminals,
        rules.into_iter().collect(),
        start,
    );
    if opts.prune {
        out = prune(out);
        // keep only the derivations of surviving rules
        let kept: BTreeSet<(String, String)> = out
            .rules()
            .iter()
            .map(|r| (r.lhs.clone(), crate::ext::print_ext_term(&r.body)))
            .collect();
        traces.retain(|(lhs, body, _)| kept.contains(&(lhs.clone(), body.clone())));
    }
    Ok(Step1Output {
        grammar: out,
        traces,
    })
}

fn strip_abs(t: ExtTerm) -> (Vec<String>, ExtTerm) {
    let mut params = Vec::new();
    let mut cur = t;
    while let ExtTerm::Abs(x, body) = cur {
        params.push(x);
        cur = *body;
    }
    (params, cur)
}

/// Keeps the productive, reachable part of the grammar. Productivity treats
/// a term set as a choice: a set is productive when some element is. Dead
/// set elements are dropped; rules whose body cannot produce a tree are
/// removed; finally non-terminals unreachable from the start are dropped.
/// The start symbol stays declared even when unproductive.
pub(crate) fn prune(g: ExtGrammar) -> ExtGrammar {
    // least fixpoint of productivity
    let mut productive: BTreeSet<String> = BTreeSet::new();
    loop {
        let mut changed = false;
        for r in g.rules() {
            if productive.contains(&r.lhs) {
                continue;
            }
            if term_productive(&r.body, &productive) {
                productive.insert(r.lhs.clone());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // drop dead set elements, then dead rules
    let cleaned: Vec<ExtRule> = g
        .rules()
        .iter()
        .filter(|r| productive.contains(&r.lhs))
        .filter_map(|r| {
            clean_term(&r.body, &productive).map(|body| ExtRule {
                lhs: r.lhs.clone(),
                params: r.params.clone(),
                body,
            })
        })
        .collect();

    // reachability from the start over the cleaned rules
    let mut reachable: BTreeSet<String> = BTreeSet::from([g.start.clone()]);
    loop {
        let mut changed = false;
        for r in &cleaned {
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

    let rules: Vec<ExtRule> = cleaned
        .into_iter()
        .filter(|r| reachable.contains(&r.lhs))
        .collect();
    let nonterminals: BTreeMap<String, Sort> = g
        .nonterminals
        .iter()
        .filter(|(n, _)| reachable.contains(*n))
        .map(|(n, s)| (n.clone(), s.clone()))
        .collect();
    ExtGrammar::new(g.terminals.clone(), nonterminals, rules, g.start.clone())
}

fn term_productive(t: &ExtTerm, productive: &BTreeSet<String>) -> bool {
    match t {
        ExtTerm::Var(_) | ExtTerm::Terminal(_) => true,
        ExtTerm::NonTerminal(n) => productive.contains(n),
        ExtTerm::App(f, args) => {
            term_productive(f, productive)
                && args.iter().any(|a| term_productive(a, productive))
        }
        ExtTerm::Abs(_, body) => term_productive(body, productive),
    }
}

fn clean_term(t: &ExtTerm, productive: &BTreeSet<String>) -> Option<ExtTerm> {
    match t {
        ExtTerm::Var(_) | ExtTerm::Terminal(_) => Some(t.clone()),
        ExtTerm::NonTerminal(n) => productive.contains(n).then(|| t.clone()),
        ExtTerm::App(f, args) => {
            let f2 = clean_term(f, productive)?;
            let args2: ExtTermSet = args
                .iter()
                .filter_map(|a| clean_term(a, productive))
                .collect();
            if args2.is_empty() {
                return None;
            }
            Some(ExtTerm::App(Box::new(f2), args2))
        }
        ExtTerm::Abs(x, body) => Some(ExtTerm::Abs(
            x.clone(),
            Box::new(clean_term(body, productive)?),
        )),
    }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::parse_ext_grammar;
    use crate::grammar::parse_grammar;

    const G1: &str = include_str!("../fixtures/g1.hog");
    const STEP1_G1: &str = include_str!("../fixtures/step1_g1.hog");

    fn o() -> Sort {
        Sort::Base
    }
    fn oo() -> Sort {
        Sort::arrow(o(), o())
    }
    fn base() -> ITy1 {
        ITy1::Base
    }
    fn top_to_base() -> ITy1 {
        ITy1::arrow(vec![], base())
    }
    fn base_to_base() -> ITy1 {
        ITy1::arrow(vec![base()], base())
    }

    #[test]
    fn canonical_order_examples() {
        assert!(base() < top_to_base());
        assert!(top_to_base() < base_to_base());
        assert_eq!(ity_order(&base(), &base()), Ordering::Equal);
    }

    #[test]
    fn refinement_classification() {
        assert_eq!(refines(&base(), &o()), Some(Polarity::Unbalanced));
        // o -> o -> o as an intersection type is ill-formed
        let t = ITy1::arrow(vec![base()], base_to_base());
        assert_eq!(refines(&t, &Sort::arrow(o(), oo())), None);
        // top -> o refining o -> o is unbalanced
        assert_eq!(refines(&top_to_base(), &oo()), Some(Polarity::Unbalanced));
        // o -> o refining o -> o is balanced
        assert_eq!(refines(&base_to_base(), &oo()), Some(Polarity::Balanced));
    }

    #[test]
    fn enumerate_refinements_of_base_and_oo() {
        assert_eq!(
            enumerate_refinements(&o(), 20_000).unwrap(),
            vec![(base(), Polarity::Unbalanced)]
        );
        let refs = enumerate_refinements(&oo(), 20_000).unwrap();
        assert_eq!(
            refs,
            vec![
                (top_to_base(), Polarity::Unbalanced),
                (base_to_base(), Polarity::Balanced),
            ]
        );
    }

    #[test]
    fn enumerate_refinements_of_order2_sort() {
        // (o -> o) -> o has 4 refinements
        let s = Sort::arrow(oo(), o());
        let refs = enumerate_refinements(&s, 20_000).unwrap();
        let tys: Vec<ITy1> = refs.iter().map(|(t, _)| t.clone()).collect();
        let expect = vec![
            ITy1::arrow(vec![], base()),
            ITy1::arrow(vec![top_to_base()], base()),
            ITy1::arrow(vec![base_to_base()], base()),
            ITy1::arrow(vec![top_to_base(), base_to_base()], base()),
        ];
        assert_eq!(tys, expect);
    }

    #[test]
    fn env_union_linearity() {
        let unb = TEnv1(BTreeSet::from([("x".to_string(), base())]));
        assert!(env_union(&unb, &unb).is_err());
        let bal = TEnv1(BTreeSet::from([("f".to_string(), base_to_base())]));
        assert_eq!(env_union(&bal, &bal).unwrap(), bal);
        let mixed = TEnv1(BTreeSet::from([("f".to_string(), top_to_base())]));
        let u = env_union(&bal, &mixed).unwrap();
        assert_eq!(u.0.len(), 2);
    }

    #[test]
    fn target_sort_examples() {
        assert_eq!(target_sort(&base(), &o()), o());
        assert_eq!(target_sort(&base_to_base(), &oo()), o());
        let f_sort = Sort::arrow(oo(), o());
        let f_ty = ITy1::arrow(vec![base_to_base()], base());
        assert_eq!(target_sort(&f_ty, &f_sort), oo());
        let both = ITy1::arrow(vec![top_to_base(), base_to_base()], base());
        assert_eq!(target_sort(&both, &f_sort), Sort::arrows([o(), o()], o()));
    }

    #[test]
    fn transform_var_at_base() {
        let g = parse_grammar("%terminal e 0\n%nonterminal S o\n%start S\nS = e.\n").unwrap();
        let free: BTreeMap<String, Sort> = [("x".to_string(), o())].into();
        let res = transform_term1(&g, &free, &Term::var("x"), &base()).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(
            res[0].env,
            TEnv1(BTreeSet::from([("x".to_string(), base())]))
        );
        assert_eq!(res[0].out, ExtTerm::var("x'{o}"));
    }

    #[test]
    fn transform_example2_first_derivation() {
        // \f.\x. a (f x) at (o -> o) -> o -> o yields exactly
        // \f'{o->o}. br a (br f'{o->o} e)
        let g = parse_grammar(G1).unwrap();
        let t = Term::Abs(
            "f".into(),
            oo(),
            Box::new(Term::Abs(
                "x".into(),
                o(),
                Box::new(Term::app(
                    Term::tm("a"),
                    Term::app(Term::var("f"), Term::var("x")),
                )),
            )),
        );
        let ty = ITy1::arrow(vec![base_to_base()], base_to_base());
        let res = transform_term1(&g, &BTreeMap::new(), &t, &ty).unwrap();
        assert_eq!(res.len(), 1);
        assert!(res[0].env.0.is_empty());
        let f = ExtTerm::var("f'{o->o}");
        let expect = ExtTerm::Abs(
            "f'{o->o}".to_string(),
            Box::new(ExtTerm::apps(
                ExtTerm::tm("br"),
                [
                    ExtTerm::tm("a"),
                    ExtTerm::apps(ExtTerm::tm("br"), [f, ExtTerm::tm("e")]),
                ],
            )),
        );
        assert_eq!(res[0].out, expect);
    }

    #[test]
    fn transform_example2_second_derivation() {
        // \f. f (f e) at (top -> o) ^ (o -> o) -> o contains
        // \f'{top->o}. \f'{o->o}. br f'{o->o} f'{top->o}
        let g = parse_grammar(G1).unwrap();
        let t = Term::Abs(
            "f".into(),
            oo(),
            Box::new(Term::app(
                Term::var("f"),
                Term::app(Term::var("f"), Term::tm("e")),
            )),
        );
        let ty = ITy1::arrow(vec![top_to_base(), base_to_base()], base());
        let res = transform_term1(&g, &BTreeMap::new(), &t, &ty).unwrap();
        let expect = ExtTerm::Abs(
            "f'{top->o}".to_string(),
            Box::new(ExtTerm::Abs(
                "f'{o->o}".to_string(),
                Box::new(ExtTerm::apps(
                    ExtTerm::tm("br"),
                    [ExtTerm::var("f'{o->o}"), ExtTerm::var("f'{top->o}")],
                )),
            )),
        );
        assert!(res.iter().any(|r| r.out == expect && r.env.0.is_empty()));
    }

    fn same_grammar(a: &ExtGrammar, b: &ExtGrammar) -> bool {
        // rule order within a non-terminal is semantically irrelevant
        let ra: BTreeSet<&ExtRule> = a.rules().iter().collect();
        let rb: BTreeSet<&ExtRule> = b.rules().iter().collect();
        a.terminals == b.terminals
            && a.nonterminals == b.nonterminals
            && a.start == b.start
            && ra == rb
    }

    #[test]
    fn golden_step1_of_g1() {
        let g = parse_grammar(G1).unwrap();
        let out = transform_grammar1(&g, &Step1Options::default()).unwrap();
        let expect = parse_ext_grammar(STEP1_G1).unwrap();
        assert!(
            same_grammar(&out.grammar, &expect),
            "got:\n{}",
            crate::ext::print_ext_grammar(&out.grammar)
        );
    }

    #[test]
    fn step1_without_pruning_contains_unreachable_rule() {
        let g = parse_grammar(G1).unwrap();
        let opts = Step1Options {
            prune: false,
            ..Default::default()
        };
        let out = transform_grammar1(&g, &opts).unwrap();
        // the unreachable two-parameter rule is among the full rule set
        let lhs = "F'{(top->o)^(o->o)->o}";
        let expect = ExtRule {
            lhs: lhs.to_string(),
            params: vec!["f'{top->o}".to_string(), "f'{o->o}".to_string()],
            body: ExtTerm::apps(
                ExtTerm::tm("br"),
                [ExtTerm::var("f'{o->o}"), ExtTerm::var("f'{top->o}")],
            ),
        };
        assert!(out.grammar.rules().contains(&expect));
        // pruned by default
        let pruned = transform_grammar1(&g, &Step1Options::default()).unwrap();
        assert!(pruned.grammar.rules_of(lhs).next().is_none());
    }

    #[test]
    fn step1_of_trivial_e_grammar() {
        let g = parse_grammar("%terminal e 0\n%nonterminal S o\n%start S\nS = e.\n").unwrap();
        let out = transform_grammar1(&g, &Step1Options::default()).unwrap();
        assert_eq!(out.grammar.rules().len(), 1);
        let r = &out.grammar.rules()[0];
        assert_eq!(r.lhs, "S'{o}");
        assert!(r.params.is_empty());
        assert_eq!(r.body, ExtTerm::tm("e"));
    }

    #[test]
    fn step1_order_drops_by_one() {
        let g = parse_grammar(G1).unwrap();
        assert_eq!(g.order(), 2);
        let out = transform_grammar1(&g, &Step1Options::default()).unwrap();
        assert!(out.grammar.order() <= 1);
    }

    #[test]
    fn trace_records_example2_derivation_shape() {
        let g = parse_grammar(G1).unwrap();
        let opts = Step1Options {
            trace: true,
            ..Default::default()
        };
        let out = transform_grammar1(&g, &opts).unwrap();
        let a_trace = out
            .traces
            .iter()
            .find(|(lhs, _, _)| lhs == "A'{(o->o)->o->o}")
            .expect("trace for the A rule");
        assert_eq!(
            a_trace.2.skeleton(),
            "(Abs1 (Abs2 (App2 (Const1) (App2 (Var) (Var)))))"
        );
    }
}
