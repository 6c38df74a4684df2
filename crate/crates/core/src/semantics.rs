//! Finite ternary-relation models and the satisfaction relation.
//!
//! A model is a finite set of states, a ternary relation `R` and a valuation.
//! A triple `(a, b, c)` in `R` reads "composing `b` with input `a` may yield
//! `c`". The iterative divisions are evaluated through two derived binary
//! relations, computed as least fixpoints:
//!
//! * left reach over `X`: `(s, u)` whenever `R x s u` for some `x` in `X`, or
//!   `(s, y)` is already related and `R x y u` for some `x` in `X`;
//! * right reach over `X`: the same with the input in the middle slot,
//!   `R s x u` and `R y x u`.
//!
//! `(s, t)` is in left reach over `X` exactly when some non-empty path of
//! `X`-inputs leads from `s` to `t`. The path oracles in this module enumerate
//! such paths directly and exist to cross-check the fixpoint code.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::syntax::{is_atom_name, Formula, Sequent};

/// Subset of a model's states, indexed by state position.
pub type StateSet = FixedBitSet;

/// `[a, b, c]` stands for `R a b c`.
pub type Triple = [usize; 3];

pub type TernaryRelation = BTreeSet<Triple>;

/// Binary relation over the states of a model, stored as successor rows.
#[derive(Clone, PartialEq, Eq)]
pub struct StatePairSet {
    rows: Vec<FixedBitSet>,
}

impl StatePairSet {
    pub fn empty(states: usize) -> Self {
        StatePairSet { rows: vec![FixedBitSet::with_capacity(states); states] }
    }

    pub fn from_pairs(states: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = Self::empty(states);
        for (s, t) in pairs {
            out.insert(s, t);
        }
        out
    }

    pub fn insert(&mut self, s: usize, t: usize) {
        self.rows[s].insert(t);
    }

    pub fn contains(&self, s: usize, t: usize) -> bool {
        self.rows[s].contains(t)
    }

    /// States `t` with `(s, t)` in the set.
    pub fn successors(&self, s: usize) -> &FixedBitSet {
        &self.rows[s]
    }

    pub fn union_with(&mut self, other: &StatePairSet) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.union_with(b);
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().enumerate().flat_map(|(s, row)| row.ones().map(move |t| (s, t)))
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones(..)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.is_clear())
    }
}

impl fmt::Debug for StatePairSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameProperty {
    /// `R s s s` for every state.
    Reflexive,
    /// `R s t u` implies `R t s u`.
    Commutative,
}

impl FrameProperty {
    pub fn name(self) -> &'static str {
        match self {
            FrameProperty::Reflexive => "reflexive",
            FrameProperty::Commutative => "commutative",
        }
    }
}

impl fmt::Display for FrameProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameProperty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reflexive" => Ok(FrameProperty::Reflexive),
            "commutative" => Ok(FrameProperty::Commutative),
            other => Err(format!("unknown frame property `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: state `{name}` declared twice")]
    DuplicateState { line: usize, name: String },
    #[error("line {line}: undeclared state `{name}`")]
    UndeclaredState { line: usize, name: String },
    #[error("line {line}: valuation for `{atom}` given twice")]
    DuplicateValuation { line: usize, atom: String },
    #[error("model has no `states:` line")]
    MissingStates,
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown state `{0}`")]
pub struct UnknownState(pub String);

/// A finite model. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    states: Vec<String>,
    index: HashMap<String, usize>,
    rel: TernaryRelation,
    val: BTreeMap<String, StateSet>,
}

fn is_state_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

impl Model {
    /// Builds a model from state names, triples over state positions and a
    /// valuation over state positions.
    pub fn new(
        states: Vec<String>,
        rel: impl IntoIterator<Item = Triple>,
        val: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, ModelError> {
        let n = states.len();
        let mut index = HashMap::with_capacity(n);
        for (i, name) in states.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(ModelError::DuplicateState { line: 0, name: name.clone() });
            }
        }
        let mut triples = TernaryRelation::new();
        for t in rel {
            if let Some(&bad) = t.iter().find(|&&i| i >= n) {
                return Err(ModelError::StateOutOfRange(bad));
            }
            triples.insert(t);
        }
        let mut valuation = BTreeMap::new();
        for (atom, members) in val {
            let mut set = StateSet::with_capacity(n);
            for i in members {
                if i >= n {
                    return Err(ModelError::StateOutOfRange(i));
                }
                set.insert(i);
            }
            valuation.insert(atom, set);
        }
        Ok(Model { states, index, rel: triples, val: valuation })
    }

    /// Model with states named `s0 .. s{n-1}`.
    pub fn with_indexed_states(
        n: usize,
        rel: impl IntoIterator<Item = Triple>,
        val: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, ModelError> {
        Self::new((0..n).map(|i| format!("s{i}")).collect(), rel, val)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn state_index(&self, name: &str) -> Result<usize, UnknownState> {
        self.index.get(name).copied().ok_or_else(|| UnknownState(name.to_string()))
    }

    pub fn relation(&self) -> &TernaryRelation {
        &self.rel
    }

    pub fn has_triple(&self, a: usize, b: usize, c: usize) -> bool {
        self.rel.contains(&[a, b, c])
    }

    /// Atoms listed in the valuation (possibly with empty extension).
    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.val.keys().map(String::as_str)
    }

    /// Extension of `atom`; unlisted atoms are empty.
    pub fn valuation(&self, atom: &str) -> StateSet {
        self.val.get(atom).cloned().unwrap_or_else(|| StateSet::with_capacity(self.len()))
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::with_capacity(self.len())
    }

    pub fn full_set(&self) -> StateSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    /// Same states and valuation with the first two slots of every triple
    /// swapped. Turns left paths into right paths and back.
    pub fn mirrored(&self) -> Model {
        let mut m = self.clone();
        m.rel = self.rel.iter().map(|&[a, b, c]| [b, a, c]).collect();
        m
    }

    /// Same states and valuation over a different relation.
    pub fn with_relation(&self, rel: TernaryRelation) -> Model {
        assert!(rel.iter().flatten().all(|&i| i < self.len()));
        let mut m = self.clone();
        m.rel = rel;
        m
    }

    pub fn names_of(&self, set: &StateSet) -> Vec<&str> {
        set.ones().map(|i| self.states[i].as_str()).collect()
    }

    /// Renders in the line format read by [`parse_model`].
    pub fn to_text(&self) -> String {
        let mut out = format!("states: {}\n", self.states.join(" "));
        for &[a, b, c] in &self.rel {
            out.push_str(&format!("r: {} {} {}\n", self.states[a], self.states[b], self.states[c]));
        }
        for (atom, set) in &self.val {
            out.push_str(&format!("v {atom}:"));
            for i in set.ones() {
                out.push(' ');
                out.push_str(&self.states[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the line format:
///
/// ```text
/// states: s t u      # exactly once, first
/// r: s t u           # R s t u
/// v p: s u           # V(p) = {s, u}; empty list allowed
/// ```
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let mut states: Option<Vec<String>> = None;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut triples = Vec::new();
    let mut val: BTreeMap<String, Vec<usize>> = BTreeMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: &str| ModelError::Malformed { line: line_no, reason: reason.to_string() };
        let (head, body) = line.split_once(':').ok_or_else(|| malformed("expected `<keyword>: ...`"))?;
        let head = head.trim();
        let ids: Vec<&str> = body.split_whitespace().collect();

        if head == "states" {
            if states.is_some() {
                return Err(malformed("second `states:` line"));
            }
            if ids.is_empty() {
                return Err(malformed("a model needs at least one state"));
            }
            let mut names = Vec::with_capacity(ids.len());
            for id in ids {
                if !is_state_name(id) {
                    return Err(malformed(&format!("bad state name `{id}`")));
                }
                if index.insert(id.to_string(), names.len()).is_some() {
                    return Err(ModelError::DuplicateState { line: line_no, name: id.to_string() });
                }
                names.push(id.to_string());
            }
            states = Some(names);
            continue;
        }
        if states.is_none() {
            return Err(malformed("`states:` must come first"));
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| ModelError::UndeclaredState { line: line_no, name: id.to_string() })
        };
        if head == "r" {
            if ids.len() != 3 {
                return Err(malformed("`r:` takes exactly three states"));
            }
            triples.push([lookup(ids[0])?, lookup(ids[1])?, lookup(ids[2])?]);
        } else if let Some(atom) = head.strip_prefix('v').filter(|rest| rest.starts_with(char::is_whitespace)) {
            let atom = atom.trim();
            if !is_atom_name(atom) {
                return Err(malformed(&format!("bad atom name `{atom}`")));
            }
            let members = ids.iter().map(|id| lookup(id)).collect::<Result<Vec<_>, _>>()?;
            if val.insert(atom.to_string(), members).is_some() {
                return Err(ModelError::DuplicateValuation { line: line_no, atom: atom.to_string() });
            }
        } else {
            return Err(malformed(&format!("unknown line kind `{head}`")));
        }
    }
    let states = states.ok_or(ModelError::MissingStates)?;
    Model::new(states, triples, val)
}

/// `{s | s satisfies f}`.
pub fn denotation(m: &Model, f: &Formula) -> StateSet {
    match f {
        Formula::Atom(name) => m.valuation(name),
        Formula::Top => m.full_set(),
        Formula::Bot => m.empty_set(),
        Formula::Meet(l, r) => {
            let mut out = denotation(m, l);
            out.intersect_with(&denotation(m, r));
            out
        }
        Formula::Join(l, r) => {
            let mut out = denotation(m, l);
            out.union_with(&denotation(m, r));
            out
        }
        Formula::Fuse(a, b) => {
            let (da, db) = (denotation(m, a), denotation(m, b));
            let mut out = m.empty_set();
            for &[t, u, s] in m.relation() {
                if da.contains(t) && db.contains(u) {
                    out.insert(s);
                }
            }
            out
        }
        Formula::LDiv(a, b) => {
            let (da, db) = (denotation(m, a), denotation(m, b));
            let mut out = m.full_set();
            for &[t, s, u] in m.relation() {
                if da.contains(t) && !db.contains(u) {
                    out.remove(s);
                }
            }
            out
        }
        Formula::RDiv(b, a) => {
            let (da, db) = (denotation(m, a), denotation(m, b));
            let mut out = m.full_set();
            for &[s, t, u] in m.relation() {
                if da.contains(t) && !db.contains(u) {
                    out.remove(s);
                }
            }
            out
        }
        Formula::IterLDiv(a, b) => {
            let reach = left_reach(m, &denotation(m, a));
            all_successors_in(m, &reach, &denotation(m, b))
        }
        Formula::IterRDiv(b, a) => {
            let reach = right_reach(m, &denotation(m, a));
            all_successors_in(m, &reach, &denotation(m, b))
        }
    }
}

fn all_successors_in(m: &Model, reach: &StatePairSet, target: &StateSet) -> StateSet {
    let mut out = m.empty_set();
    for s in 0..m.len() {
        if reach.successors(s).is_subset(target) {
            out.insert(s);
        }
    }
    out
}

pub fn satisfies(m: &Model, state: &str, f: &Formula) -> Result<bool, UnknownState> {
    let s = m.state_index(state)?;
    Ok(denotation(m, f).contains(s))
}

/// `lhs` entails `rhs` at every state of `m`.
pub fn sequent_valid(m: &Model, sq: &Sequent) -> bool {
    denotation(m, &sq.lhs).is_subset(&denotation(m, &sq.rhs))
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// One-step relation: `(s, u)` when some input `x` in `xs` takes `s` to `u`.
fn step_relation(m: &Model, xs: &StateSet, side: Side) -> StatePairSet {
    let mut step = StatePairSet::empty(m.len());
    for &[a, b, c] in m.relation() {
        let (input, from) = match side {
            Side::Left => (a, b),
            Side::Right => (b, a),
        };
        if xs.contains(input) {
            step.insert(from, c);
        }
    }
    step
}

/// Least fixpoint of "one step, or already reached then one more step".
fn reach_fixpoint(step: StatePairSet) -> StatePairSet {
    if cfg!(feature = "inject-fault") {
        return step;
    }
    let n = step.rows.len();
    let mut out = StatePairSet::empty(n);
    let mut work = Vec::new();
    for s in 0..n {
        let row = &mut out.rows[s];
        work.extend(step.rows[s].ones());
        while let Some(y) = work.pop() {
            if row.put(y) {
                continue;
            }
            work.extend(step.rows[y].ones().filter(|&u| !row.contains(u)));
        }
    }
    out
}

/// Pairs `(s, t)` joined by a non-empty left path whose inputs all lie in `xs`.
pub fn left_reach(m: &Model, xs: &StateSet) -> StatePairSet {
    reach_fixpoint(step_relation(m, xs, Side::Left))
}

/// Pairs `(s, t)` joined by a non-empty right path whose inputs all lie in `xs`.
pub fn right_reach(m: &Model, xs: &StateSet) -> StatePairSet {
    reach_fixpoint(step_relation(m, xs, Side::Right))
}

/// A concrete path witness: inputs `x1..xn` and intermediate states
/// `y1..y(n-1)` leading from `source` to `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathWitness {
    pub source: usize,
    pub inputs: Vec<usize>,
    pub intermediates: Vec<usize>,
    pub target: usize,
}

fn has_step(m: &Model, side: Side, input: usize, from: usize, to: usize) -> bool {
    match side {
        Side::Left => m.has_triple(input, from, to),
        Side::Right => m.has_triple(from, input, to),
    }
}

/// Endpoints of paths of each exact length `1..=maxlen` from `source`,
/// computed layer by layer straight from triple membership.
fn path_layers(m: &Model, xs: &StateSet, source: usize, maxlen: usize, side: Side) -> Vec<StateSet> {
    let n = m.len();
    let mut layers = Vec::with_capacity(maxlen);
    let mut frontier = m.empty_set();
    frontier.insert(source);
    for _ in 0..maxlen {
        let mut next = m.empty_set();
        for from in frontier.ones() {
            for x in xs.ones() {
                for to in 0..n {
                    if has_step(m, side, x, from, to) {
                        next.insert(to);
                    }
                }
            }
        }
        layers.push(next.clone());
        frontier = next;
    }
    layers
}

fn path_oracle(m: &Model, xs: &StateSet, lengths: std::ops::RangeInclusive<usize>, side: Side) -> StatePairSet {
    let mut out = StatePairSet::empty(m.len());
    for s in 0..m.len() {
        let layers = path_layers(m, xs, s, *lengths.end(), side);
        for len in lengths.clone() {
            for t in layers[len - 1].ones() {
                out.insert(s, t);
            }
        }
    }
    out
}

/// `{(s, t)}` joined by some left path of length `1..=maxlen` over `xs`.
pub fn left_path_oracle(m: &Model, xs: &StateSet, maxlen: usize) -> StatePairSet {
    path_oracle(m, xs, 1..=maxlen, Side::Left)
}

pub fn right_path_oracle(m: &Model, xs: &StateSet, maxlen: usize) -> StatePairSet {
    path_oracle(m, xs, 1..=maxlen, Side::Right)
}

/// `{(s, t)}` joined by some left path of length exactly `len` over `xs`.
pub fn left_path_oracle_exact(m: &Model, xs: &StateSet, len: usize) -> StatePairSet {
    path_oracle(m, xs, len..=len, Side::Left)
}

pub fn right_path_oracle_exact(m: &Model, xs: &StateSet, len: usize) -> StatePairSet {
    path_oracle(m, xs, len..=len, Side::Right)
}

fn witnesses(m: &Model, xs: &StateSet, source: usize, len: usize, side: Side) -> Vec<PathWitness> {
    fn go(
        m: &Model,
        xs: &StateSet,
        side: Side,
        remaining: usize,
        at: usize,
        partial: &mut PathWitness,
        out: &mut Vec<PathWitness>,
    ) {
        for x in xs.ones() {
            for to in 0..m.len() {
                if !has_step(m, side, x, at, to) {
                    continue;
                }
                partial.inputs.push(x);
                if remaining == 1 {
                    out.push(PathWitness { target: to, ..partial.clone() });
                } else {
                    partial.intermediates.push(to);
                    go(m, xs, side, remaining - 1, to, partial, out);
                    partial.intermediates.pop();
                }
                partial.inputs.pop();
            }
        }
    }
    assert!(len >= 1, "paths are non-empty");
    let mut partial = PathWitness { source, inputs: Vec::new(), intermediates: Vec::new(), target: source };
    let mut out = Vec::new();
    go(m, xs, side, len, source, &mut partial, &mut out);
    out
}

/// Every left path of exactly `len` inputs from `xs` starting at `source`,
/// with its intermediate states. Exponential; meant for tests on small models.
pub fn left_path_witnesses(m: &Model, xs: &StateSet, source: usize, len: usize) -> Vec<PathWitness> {
    witnesses(m, xs, source, len, Side::Left)
}

pub fn right_path_witnesses(m: &Model, xs: &StateSet, source: usize, len: usize) -> Vec<PathWitness> {
    witnesses(m, xs, source, len, Side::Right)
}

fn is_path(m: &Model, inputs: &[usize], source: usize, target: usize, side: Side) -> bool {
    if inputs.is_empty() {
        return false;
    }
    let mut frontier = m.empty_set();
    frontier.insert(source);
    for &x in inputs {
        let mut next = m.empty_set();
        for from in frontier.ones() {
            for to in 0..m.len() {
                if has_step(m, side, x, from, to) {
                    next.insert(to);
                }
            }
        }
        frontier = next;
    }
    frontier.contains(target)
}

/// Whether the given input sequence leads from `source` to `target` along
/// some choice of intermediate states (left composition).
pub fn is_left_path(m: &Model, inputs: &[usize], source: usize, target: usize) -> bool {
    is_path(m, inputs, source, target, Side::Left)
}

pub fn is_right_path(m: &Model, inputs: &[usize], source: usize, target: usize) -> bool {
    is_path(m, inputs, source, target, Side::Right)
}

/// Union of `R^n`, where `R^(n+1) = {(s, t, u) | R s y u and R^n x t y}`.
pub fn left_transitive_closure(m: &Model) -> TernaryRelation {
    closure_fixpoint(m.relation(), |outer, inner| {
        // outer = R s y u, inner = R^n x t y
        let [s, y, u] = outer;
        let [_, t, y2] = inner;
        (y == y2).then_some([s, t, u])
    })
}

/// Union of `R^n`, where `R^(n+1) = {(s, t, u) | R y t u and R^n s x y}`.
///
/// This is the left construction conjugated by swapping the first two slots,
/// so `right(mirror(M)) = mirror(left(M))`. A triple `(s, x, t)` appears
/// exactly when a right path from `s` ends at `t` with last input `x`.
pub fn right_transitive_closure(m: &Model) -> TernaryRelation {
    closure_fixpoint(m.relation(), |outer, inner| {
        // outer = R y t u, inner = R^n s x y
        let [y, t, u] = outer;
        let [s, _, y2] = inner;
        (y == y2).then_some([s, t, u])
    })
}

fn closure_fixpoint(base: &TernaryRelation, compose: impl Fn(Triple, Triple) -> Option<Triple>) -> TernaryRelation {
    let mut acc = base.clone();
    let mut frontier: Vec<Triple> = base.iter().copied().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &inner in &frontier {
            for &outer in base {
                if let Some(t) = compose(outer, inner) {
                    if acc.insert(t) {
                        next.push(t);
                    }
                }
            }
        }
        frontier = next;
    }
    acc
}

/// `{s | for all t, u: R+l t s u and t in [a] imply u in [b]}`.
pub fn box_plus_left(m: &Model, a: &Formula, b: &Formula) -> StateSet {
    let (da, db) = (denotation(m, a), denotation(m, b));
    let mut out = m.full_set();
    for [t, s, u] in left_transitive_closure(m) {
        if da.contains(t) && !db.contains(u) {
            out.remove(s);
        }
    }
    out
}

/// `{s | for all t, u: R+r s t u and t in [a] imply u in [b]}`.
pub fn box_plus_right(m: &Model, a: &Formula, b: &Formula) -> StateSet {
    let (da, db) = (denotation(m, a), denotation(m, b));
    let mut out = m.full_set();
    for [s, t, u] in right_transitive_closure(m) {
        if da.contains(t) && !db.contains(u) {
            out.remove(s);
        }
    }
    out
}

pub fn frame_has_property(m: &Model, p: FrameProperty) -> bool {
    match p {
        FrameProperty::Reflexive => (0..m.len()).all(|s| m.has_triple(s, s, s)),
        FrameProperty::Commutative => m.relation().iter().all(|&[s, t, u]| m.has_triple(t, s, u)),
    }
}
