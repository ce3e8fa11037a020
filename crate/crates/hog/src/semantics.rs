//! Reduction and bounded enumeration of tree, word, and frontier languages.
//!
//! Enumeration is breadth-first over a frontier of terms with per-term step
//! counts; duplicate terms merge. The search is exact up to the configured
//! caps: a per-term node cap and a total distinct-state cap. Exceeding a cap
//! drops the offending branch and marks the result as truncated, so callers
//! can tell a complete slice from a partial one.
//!
//! Terms are hash-consed into a per-run arena: equality is id comparison and
//! successors share structure with their parents, which keeps chain-shaped
//! grammars (the common case for word languages) cheap to explore.

use crate::ext::{ExtGrammar, ExtTerm, ExtTermSet};
use crate::grammar::{is_word_grammar, Grammar, Term, E};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

/// A finite ranked tree over the terminal alphabet.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree {
    pub symbol: String,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaf(symbol: impl Into<String>) -> Tree {
        Tree {
            symbol: symbol.into(),
            children: vec![],
        }
    }

    pub fn node(symbol: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree {
            symbol: symbol.into(),
            children,
        }
    }

    /// Applicative rendering, e.g. `br (br a e) (br b e)`.
    pub fn to_term_string(&self) -> String {
        if self.children.is_empty() {
            return self.symbol.clone();
        }
        let mut out = self.symbol.clone();
        for c in &self.children {
            if c.children.is_empty() {
                out.push(' ');
                out.push_str(&c.symbol);
            } else {
                out.push_str(" (");
                out.push_str(&c.to_term_string());
                out.push(')');
            }
        }
        out
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term_string())
    }
}

/// A word: a sequence of terminal names. Prints space-separated, `ε` when
/// empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<String>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn letters(ls: impl IntoIterator<Item = impl Into<String>>) -> Word {
        Word(ls.into_iter().map(Into::into).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        write!(f, "{}", self.0.join(" "))
    }
}

/// The frontier word of a tree: the leaf symbols left to right.
pub fn leaves(t: &Tree) -> Word {
    fn go(t: &Tree, out: &mut Vec<String>) {
        if t.children.is_empty() {
            out.push(t.symbol.clone());
        } else {
            for c in &t.children {
                go(c, out);
            }
        }
    }
    let mut out = Vec::new();
    go(t, &mut out);
    Word(out)
}

/// Erases every occurrence of the special terminal `e` from a word.
pub fn remeps(w: &Word) -> Word {
    Word(w.0.iter().filter(|s| s.as_str() != E).cloned().collect())
}

/// The Lε operator on a set of frontier words: drop the single-letter word
/// `e`, and add ε if it was present.
pub fn le_epsilon(words: &BTreeSet<Word>) -> BTreeSet<Word> {
    let e_word = Word::letters([E]);
    let mut out: BTreeSet<Word> = words.iter().filter(|w| **w != e_word).cloned().collect();
    if words.contains(&e_word) {
        out.insert(Word::empty());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("not a word grammar: terminals must be unary except nullary `e`")]
    NotAWordGrammar,
}

/// Caps that keep bounded enumeration honest about exponential blowup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumLimits {
    /// Successor terms larger than this many nodes are dropped (truncation).
    pub max_term_nodes: usize,
    /// At most this many distinct terms are explored (truncation).
    pub max_states: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits {
            max_term_nodes: 10_000,
            max_states: 400_000,
        }
    }
}

/// Result of a bounded tree enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeSlice {
    pub trees: BTreeSet<Tree>,
    pub truncated: bool,
}

/// Result of a bounded word/frontier extraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordSlice {
    pub words: BTreeSet<Word>,
    pub truncated: bool,
}

// ---------------------------------------------------------------------------
// Interned-term engine

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct SymId(u32);
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct TermId(u32);
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct SetId(u32);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Var(SymId),
    Nt(SymId),
    Tm(SymId),
    App(TermId, SetId),
}

struct Store {
    names: Vec<String>,
    name_ids: HashMap<String, SymId>,
    nodes: Vec<Node>,
    node_ids: HashMap<Node, TermId>,
    sizes: Vec<u32>,
    sets: Vec<Box<[TermId]>>,
    set_ids: HashMap<Box<[TermId]>, SetId>,
    // 0 unknown, 1 tree, 2 not a tree
    tree_memo: Vec<u8>,
    terminal_arity: HashMap<SymId, usize>,
}

impl Store {
    fn new() -> Store {
        Store {
            names: Vec::new(),
            name_ids: HashMap::new(),
            nodes: Vec::new(),
            node_ids: HashMap::new(),
            sizes: Vec::new(),
            sets: Vec::new(),
            set_ids: HashMap::new(),
            tree_memo: Vec::new(),
            terminal_arity: HashMap::new(),
        }
    }

    fn sym(&mut self, name: &str) -> SymId {
        if let Some(&id) = self.name_ids.get(name) {
            return id;
        }
        let id = SymId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.name_ids.insert(name.to_string(), id);
        id
    }

    fn intern(&mut self, node: Node) -> TermId {
        if let Some(&id) = self.node_ids.get(&node) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        let size = match node {
            Node::Var(_) | Node::Nt(_) | Node::Tm(_) => 1,
            Node::App(f, s) => {
                let set_size: u32 = self.sets[s.0 as usize]
                    .iter()
                    .map(|t| self.sizes[t.0 as usize])
                    .sum();
                1 + self.sizes[f.0 as usize] + set_size
            }
        };
        self.nodes.push(node);
        self.sizes.push(size);
        self.tree_memo.push(0);
        self.node_ids.insert(node, id);
        id
    }

    fn intern_set(&mut self, mut elems: Vec<TermId>) -> SetId {
        elems.sort_unstable();
        elems.dedup();
        let key: Box<[TermId]> = elems.into_boxed_slice();
        if let Some(&id) = self.set_ids.get(&key) {
            return id;
        }
        let id = SetId(self.sets.len() as u32);
        self.sets.push(key.clone());
        self.set_ids.insert(key, id);
        id
    }

    fn intern_ext(&mut self, t: &ExtTerm) -> TermId {
        match t {
            ExtTerm::Var(n) => {
                let s = self.sym(n);
                self.intern(Node::Var(s))
            }
            ExtTerm::NonTerminal(n) => {
                let s = self.sym(n);
                self.intern(Node::Nt(s))
            }
            ExtTerm::Terminal(n) => {
                let s = self.sym(n);
                self.intern(Node::Tm(s))
            }
            ExtTerm::App(f, args) => {
                let fid = self.intern_ext(f);
                let elems: Vec<TermId> = args.iter().map(|a| self.intern_ext(a)).collect();
                let sid = self.intern_set(elems);
                self.intern(Node::App(fid, sid))
            }
            ExtTerm::Abs(..) => panic!("abstractions cannot be reduced"),
        }
    }

    fn extract(&self, t: TermId) -> ExtTerm {
        match self.nodes[t.0 as usize] {
            Node::Var(s) => ExtTerm::var(self.names[s.0 as usize].clone()),
            Node::Nt(s) => ExtTerm::nt(self.names[s.0 as usize].clone()),
            Node::Tm(s) => ExtTerm::tm(self.names[s.0 as usize].clone()),
            Node::App(f, set) => {
                let args: ExtTermSet = self.sets[set.0 as usize]
                    .iter()
                    .map(|&e| self.extract(e))
                    .collect();
                ExtTerm::App(Box::new(self.extract(f)), args)
            }
        }
    }

    fn spine(&self, t: TermId) -> (TermId, Vec<SetId>) {
        let mut args = Vec::new();
        let mut cur = t;
        while let Node::App(f, s) = self.nodes[cur.0 as usize] {
            args.push(s);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    fn rebuild(&mut self, head: TermId, args: &[SetId]) -> TermId {
        let mut acc = head;
        for &s in args {
            acc = self.intern(Node::App(acc, s));
        }
        acc
    }

    fn is_tree(&mut self, t: TermId) -> bool {
        match self.tree_memo[t.0 as usize] {
            1 => return true,
            2 => return false,
            _ => {}
        }
        let (head, args) = self.spine(t);
        let ok = match self.nodes[head.0 as usize] {
            Node::Tm(a) => {
                let arity = self.terminal_arity.get(&a).copied().unwrap_or(usize::MAX);
                args.len() == arity
                    && args.iter().all(|&s| {
                        self.sets[s.0 as usize].len() == 1 && {
                            let e = self.sets[s.0 as usize][0];
                            self.is_tree(e)
                        }
                    })
            }
            _ => false,
        };
        self.tree_memo[t.0 as usize] = if ok { 1 } else { 2 };
        ok
    }

    fn to_tree(&self, t: TermId) -> Tree {
        let (head, args) = self.spine(t);
        let Node::Tm(a) = self.nodes[head.0 as usize] else {
            panic!("to_tree on a non-tree");
        };
        Tree {
            symbol: self.names[a.0 as usize].clone(),
            children: args
                .iter()
                .map(|&s| self.to_tree(self.sets[s.0 as usize][0]))
                .collect(),
        }
    }

    /// Elements of the set-valued substitution image of `t`.
    fn subst(
        &mut self,
        t: TermId,
        map: &HashMap<SymId, SetId>,
        memo: &mut HashMap<TermId, Vec<TermId>>,
    ) -> Vec<TermId> {
        if let Some(v) = memo.get(&t) {
            return v.clone();
        }
        let out = match self.nodes[t.0 as usize] {
            Node::Var(x) => match map.get(&x) {
                Some(&s) => self.sets[s.0 as usize].to_vec(),
                None => vec![t],
            },
            Node::Nt(_) | Node::Tm(_) => vec![t],
            Node::App(f, s) => {
                let funs = self.subst(f, map, memo);
                let mut arg_union: Vec<TermId> = Vec::new();
                let elems = self.sets[s.0 as usize].to_vec();
                for e in elems {
                    arg_union.extend(self.subst(e, map, memo));
                }
                let new_set = self.intern_set(arg_union);
                funs.into_iter()
                    .map(|v| self.intern(Node::App(v, new_set)))
                    .collect()
            }
        };
        memo.insert(t, out.clone());
        out
    }
}

struct CompiledRule {
    params: Vec<SymId>,
    body: TermId,
}

struct Compiled {
    store: Store,
    rules: HashMap<SymId, Vec<CompiledRule>>,
    start: TermId,
}

fn compile(g: &ExtGrammar) -> Compiled {
    let mut store = Store::new();
    for (name, &arity) in &g.terminals {
        let s = store.sym(name);
        store.terminal_arity.insert(s, arity);
    }
    let mut rules: HashMap<SymId, Vec<CompiledRule>> = HashMap::new();
    for r in g.rules() {
        let lhs = store.sym(&r.lhs);
        let params: Vec<SymId> = r.params.iter().map(|p| store.sym(p)).collect();
        let body = store.intern_ext(&r.body);
        rules.entry(lhs).or_default().push(CompiledRule { params, body });
    }
    let start_sym = store.sym(&g.start);
    let start = store.intern(Node::Nt(start_sym));
    Compiled {
        store,
        rules,
        start,
    }
}

fn successors(c: &mut Compiled, t: TermId, limits: &EnumLimits, truncated: &mut bool) -> Vec<TermId> {
    let (head, args) = c.store.spine(t);
    let mut out = Vec::new();
    match c.store.nodes[head.0 as usize] {
        Node::Nt(a) => {
            if let Some(rules) = c.rules.get(&a) {
                for rule in rules {
                    if rule.params.len() != args.len() {
                        continue;
                    }
                    let map: HashMap<SymId, SetId> =
                        rule.params.iter().copied().zip(args.iter().copied()).collect();
                    let mut memo = HashMap::new();
                    let body = rule.body;
                    for s in c.store.subst(body, &map, &mut memo) {
                        if c.store.sizes[s.0 as usize] as usize > limits.max_term_nodes {
                            *truncated = true;
                            continue;
                        }
                        out.push(s);
                    }
                }
            }
        }
        Node::Tm(a) => {
            let arity = c.store.terminal_arity.get(&a).copied().unwrap_or(0);
            if args.len() == arity {
                for (i, &s) in args.iter().enumerate() {
                    let elems = c.store.sets[s.0 as usize].to_vec();
                    if elems.len() == 1 {
                        for succ in successors(c, elems[0], limits, truncated) {
                            let new_set = c.store.intern_set(vec![succ]);
                            let mut new_args = args.clone();
                            new_args[i] = new_set;
                            let rebuilt = c.store.rebuild(head, &new_args);
                            if c.store.sizes[rebuilt.0 as usize] as usize > limits.max_term_nodes
                            {
                                *truncated = true;
                                continue;
                            }
                            out.push(rebuilt);
                        }
                    } else {
                        // set narrowing: pick one element of a non-singleton set
                        for &u in &elems {
                            let new_set = c.store.intern_set(vec![u]);
                            let mut new_args = args.clone();
                            new_args[i] = new_set;
                            out.push(c.store.rebuild(head, &new_args));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// Resumable breadth-first enumerator over the reachable terms of a grammar.
pub struct Enumerator {
    compiled: Compiled,
    frontier: Vec<TermId>,
    seen: Vec<bool>,
    seen_count: usize,
    trees: BTreeSet<Tree>,
    steps_done: usize,
    truncated: bool,
    limits: EnumLimits,
}

impl Enumerator {
    pub fn new(g: &ExtGrammar, limits: EnumLimits) -> Enumerator {
        let compiled = compile(g);
        let start = compiled.start;
        let mut e = Enumerator {
            compiled,
            frontier: vec![start],
            seen: Vec::new(),
            seen_count: 0,
            trees: BTreeSet::new(),
            steps_done: 0,
            truncated: false,
            limits,
        };
        e.mark_seen(start);
        e.note_term(start);
        e
    }

    pub fn for_grammar(g: &Grammar, limits: EnumLimits) -> Enumerator {
        Enumerator::new(&ExtGrammar::from_grammar(g), limits)
    }

    fn mark_seen(&mut self, t: TermId) -> bool {
        let idx = t.0 as usize;
        if idx >= self.seen.len() {
            self.seen.resize(idx + 1, false);
        }
        if self.seen[idx] {
            false
        } else {
            self.seen[idx] = true;
            self.seen_count += 1;
            true
        }
    }

    fn note_term(&mut self, t: TermId) {
        if self.compiled.store.is_tree(t) {
            self.trees.insert(self.compiled.store.to_tree(t));
        }
    }

    /// Runs breadth-first steps until `budget` total steps have been taken,
    /// the frontier empties, or a cap trips.
    pub fn advance_to(&mut self, budget: usize) {
        while self.steps_done < budget && !self.frontier.is_empty() {
            if self.seen_count >= self.limits.max_states {
                self.truncated = true;
                break;
            }
            let frontier = std::mem::take(&mut self.frontier);
            let mut next = Vec::new();
            'outer: for t in frontier {
                let succs =
                    successors(&mut self.compiled, t, &self.limits, &mut self.truncated);
                for s in succs {
                    if self.mark_seen(s) {
                        self.note_term(s);
                        next.push(s);
                        if self.seen_count >= self.limits.max_states {
                            self.truncated = true;
                            break 'outer;
                        }
                    }
                }
            }
            self.frontier = next;
            self.steps_done += 1;
        }
    }

    pub fn trees(&self) -> &BTreeSet<Tree> {
        &self.trees
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// True when the whole reachable space has been explored.
    pub fn exhausted(&self) -> bool {
        self.frontier.is_empty() && !self.truncated
    }
}

// ---------------------------------------------------------------------------
// Public operations

/// All one-step successors of `t` under the grammar's reduction relation.
pub fn reduce_step(g: &Grammar, t: &Term) -> BTreeSet<Term> {
    let eg = ExtGrammar::from_grammar(g);
    let u = ExtTerm::from_term(t);
    reduce_step_ext(&eg, &u)
        .into_iter()
        .map(|u| {
            u.to_term()
                .expect("plain-grammar reduction keeps sets singleton")
        })
        .collect()
}

/// One-step successors under the extended reduction rules, including set
/// narrowing.
pub fn reduce_step_ext(g: &ExtGrammar, u: &ExtTerm) -> BTreeSet<ExtTerm> {
    let mut compiled = compile(g);
    let t = compiled.store.intern_ext(u);
    let limits = EnumLimits {
        max_term_nodes: usize::MAX,
        max_states: usize::MAX,
    };
    let mut truncated = false;
    successors(&mut compiled, t, &limits, &mut truncated)
        .into_iter()
        .map(|s| compiled.store.extract(s))
        .collect()
}

/// The trees reachable from the start symbol within `budget` steps.
pub fn enumerate_trees(g: &Grammar, budget: usize, limits: EnumLimits) -> TreeSlice {
    enumerate_trees_ext(&ExtGrammar::from_grammar(g), budget, limits)
}

pub fn enumerate_trees_ext(g: &ExtGrammar, budget: usize, limits: EnumLimits) -> TreeSlice {
    let mut e = Enumerator::new(g, limits);
    e.advance_to(budget);
    TreeSlice {
        trees: e.trees,
        truncated: e.truncated,
    }
}

/// Reads the word off a chain tree `a1 (a2 (.. (e)..))`.
pub fn word_of_chain(t: &Tree) -> Option<Word> {
    let mut letters = Vec::new();
    let mut cur = t;
    loop {
        match cur.children.len() {
            0 => {
                if cur.symbol == E {
                    return Some(Word(letters));
                }
                return None;
            }
            1 => {
                letters.push(cur.symbol.clone());
                cur = &cur.children[0];
            }
            _ => return None,
        }
    }
}

/// Bounded word-language slice of a word grammar: the words of length at
/// most `max_len` whose chain trees appear within `budget` steps.
pub fn word_language_slice(
    g: &Grammar,
    budget: usize,
    max_len: usize,
    limits: EnumLimits,
) -> Result<WordSlice, SemanticsError> {
    if !is_word_grammar(g) {
        return Err(SemanticsError::NotAWordGrammar);
    }
    let ts = enumerate_trees(g, budget, limits);
    let words = ts
        .trees
        .iter()
        .filter_map(word_of_chain)
        .filter(|w| w.len() <= max_len)
        .collect();
    Ok(WordSlice {
        words,
        truncated: ts.truncated,
    })
}

/// Bounded frontier slice: the leaf words of the reachable trees.
pub fn frontier_slice(g: &Grammar, budget: usize, limits: EnumLimits) -> WordSlice {
    frontier_slice_ext(&ExtGrammar::from_grammar(g), budget, limits)
}

pub fn frontier_slice_ext(g: &ExtGrammar, budget: usize, limits: EnumLimits) -> WordSlice {
    let ts = enumerate_trees_ext(g, budget, limits);
    WordSlice {
        words: ts.trees.iter().map(leaves).collect(),
        truncated: ts.truncated,
    }
}

/// Bounded Lε slice: the frontier slice with the Lε operator applied.
pub fn le_epsilon_slice(g: &Grammar, budget: usize, limits: EnumLimits) -> WordSlice {
    let fs = frontier_slice(g, budget, limits);
    WordSlice {
        words: le_epsilon(&fs.words),
        truncated: fs.truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    const G1: &str = include_str!("../fixtures/g1.hog");
    const G2: &str = include_str!("../fixtures/g2.hog");
    const G3: &str = include_str!("../fixtures/g3.hog");

    fn g1() -> Grammar {
        parse_grammar(G1).unwrap()
    }
    fn g2() -> Grammar {
        parse_grammar(G2).unwrap()
    }
    fn g3() -> Grammar {
        parse_grammar(G3).unwrap()
    }

    #[test]
    fn reduce_start_of_g1() {
        let g = g1();
        let got = reduce_step(&g, &Term::nt("S"));
        let expect: BTreeSet<Term> = [
            Term::app(Term::nt("F"), Term::tm("a")),
            Term::app(Term::nt("F"), Term::tm("b")),
        ]
        .into();
        assert_eq!(got, expect);
    }

    #[test]
    fn reduce_f_b_of_g1() {
        let g = g1();
        let t = Term::app(Term::nt("F"), Term::tm("b"));
        let got = reduce_step(&g, &t);
        let expect: BTreeSet<Term> = [
            // b (b e)
            Term::app(Term::tm("b"), Term::app(Term::tm("b"), Term::tm("e"))),
            Term::app(Term::nt("F"), Term::app(Term::nt("A"), Term::tm("b"))),
            Term::app(Term::nt("F"), Term::app(Term::nt("B"), Term::tm("b"))),
        ]
        .into();
        assert_eq!(got, expect);
    }

    #[test]
    fn trees_are_normal_forms() {
        let g = g2();
        let t = Term::apps(Term::tm("br"), [Term::tm("a"), Term::tm("a")]);
        assert!(reduce_step(&g, &t).is_empty());
    }

    #[test]
    fn enumerate_single_rule() {
        let g = parse_grammar("%terminal e 0\n%nonterminal S o\n%start S\nS = e.\n").unwrap();
        let ts = enumerate_trees(&g, 1, EnumLimits::default());
        assert!(!ts.truncated);
        assert_eq!(ts.trees, BTreeSet::from([Tree::leaf("e")]));
    }

    #[test]
    fn enumerate_g1_contains_abab() {
        let ts = enumerate_trees(&g1(), 6, EnumLimits::default());
        // a (b (a (b e)))
        let expect = Tree::node(
            "a",
            vec![Tree::node(
                "b",
                vec![Tree::node("a", vec![Tree::node("b", vec![Tree::leaf("e")])])],
            )],
        );
        assert!(ts.trees.contains(&expect));
    }

    #[test]
    fn enumerate_g2_contains_br_a_a() {
        let ts = enumerate_trees(&g2(), 4, EnumLimits::default());
        let expect = Tree::node("br", vec![Tree::leaf("a"), Tree::leaf("a")]);
        assert!(ts.trees.contains(&expect));
    }

    #[test]
    fn leaves_examples() {
        assert_eq!(leaves(&Tree::leaf("e")), Word::letters(["e"]));
        let t = Tree::node(
            "br",
            vec![
                Tree::node("br", vec![Tree::leaf("a"), Tree::leaf("e")]),
                Tree::node("br", vec![Tree::leaf("b"), Tree::leaf("e")]),
            ],
        );
        assert_eq!(leaves(&t), Word::letters(["a", "e", "b", "e"]));
        let chain = Tree::node("a", vec![Tree::node("b", vec![Tree::leaf("e")])]);
        assert_eq!(leaves(&chain), Word::letters(["e"]));
    }

    #[test]
    fn remeps_examples() {
        assert_eq!(
            remeps(&Word::letters(["a", "e", "b", "e"])),
            Word::letters(["a", "b"])
        );
        assert_eq!(remeps(&Word::letters(["e", "e"])), Word::empty());
        assert_eq!(
            remeps(&Word::letters(["a", "b"])),
            Word::letters(["a", "b"])
        );
    }

    #[test]
    fn word_slice_g1_len4() {
        let ws = word_language_slice(&g1(), 14, 4, EnumLimits::default()).unwrap();
        let expect: BTreeSet<Word> = [
            Word::letters(["a", "a"]),
            Word::letters(["b", "b"]),
            Word::letters(["a", "a", "a", "a"]),
            Word::letters(["a", "b", "a", "b"]),
            Word::letters(["b", "a", "b", "a"]),
            Word::letters(["b", "b", "b", "b"]),
        ]
        .into();
        assert_eq!(ws.words, expect);
        assert!(!ws.truncated);
    }

    #[test]
    fn word_slice_of_e_grammar() {
        let g = parse_grammar("%terminal e 0\n%nonterminal S o\n%start S\nS = e.\n").unwrap();
        let ws = word_language_slice(&g, 2, 4, EnumLimits::default()).unwrap();
        assert_eq!(ws.words, BTreeSet::from([Word::empty()]));
    }

    #[test]
    fn word_slice_rejects_tree_grammar() {
        assert_eq!(
            word_language_slice(&g2(), 2, 4, EnumLimits::default()),
            Err(SemanticsError::NotAWordGrammar)
        );
    }

    #[test]
    fn frontier_and_le_of_e_grammar() {
        let g = parse_grammar("%terminal e 0\n%nonterminal S o\n%start S\nS = e.\n").unwrap();
        let fs = frontier_slice(&g, 2, EnumLimits::default());
        assert_eq!(fs.words, BTreeSet::from([Word::letters(["e"])]));
        let le = le_epsilon_slice(&g, 2, EnumLimits::default());
        assert_eq!(le.words, BTreeSet::from([Word::empty()]));
    }

    #[test]
    fn frontier_g2_contains_aa() {
        let fs = frontier_slice(&g2(), 4, EnumLimits::default());
        assert!(fs.words.contains(&Word::letters(["a", "a"])));
    }

    #[test]
    fn frontier_g3_contains_aae() {
        // S -> F a -> br a (br a e), whose frontier is a a e
        let fs = frontier_slice(&g3(), 6, EnumLimits::default());
        assert!(fs.words.contains(&Word::letters(["a", "a", "e"])));
    }

    #[test]
    fn g1_reduction_chain_step_by_step() {
        // S -> F b -> F (A b) -> (A b) (A b e) -> a (b (A b e)) -> a (b (a (b e)))
        let g = g1();
        let s0 = Term::nt("S");
        let s1 = Term::app(Term::nt("F"), Term::tm("b"));
        let s2 = Term::app(Term::nt("F"), Term::app(Term::nt("A"), Term::tm("b")));
        let ab = Term::app(Term::nt("A"), Term::tm("b"));
        let s3 = Term::app(ab.clone(), Term::app(ab.clone(), Term::tm("e")));
        let s4 = Term::app(
            Term::tm("a"),
            Term::app(Term::tm("b"), Term::app(ab, Term::tm("e"))),
        );
        let s5 = Term::app(
            Term::tm("a"),
            Term::app(
                Term::tm("b"),
                Term::app(Term::tm("a"), Term::app(Term::tm("b"), Term::tm("e"))),
            ),
        );
        for (from, to) in [(&s0, &s1), (&s1, &s2), (&s2, &s3), (&s3, &s4), (&s4, &s5)] {
            assert!(
                reduce_step(&g, from).contains(to),
                "{from} should step to {to}"
            );
        }
    }

    #[test]
    fn enumeration_is_monotone_in_budget() {
        let g = g1();
        let t4 = enumerate_trees(&g, 4, EnumLimits::default());
        let t6 = enumerate_trees(&g, 6, EnumLimits::default());
        assert!(t4.trees.is_subset(&t6.trees));
    }

    #[test]
    fn extended_narrowing_reduces_sets() {
        use crate::ext::parse_ext_grammar;
        let eg = parse_ext_grammar(
            "%extended\n%terminal br 2\n%terminal a 0\n%terminal b 0\n%terminal e 0\n%nonterminal S o\n%start S\nS = br { a | b } e.\n",
        )
        .unwrap();
        let ts = enumerate_trees_ext(&eg, 3, EnumLimits::default());
        let expect: BTreeSet<Tree> = [
            Tree::node("br", vec![Tree::leaf("a"), Tree::leaf("e")]),
            Tree::node("br", vec![Tree::leaf("b"), Tree::leaf("e")]),
        ]
        .into();
        assert_eq!(ts.trees, expect);
    }
}
