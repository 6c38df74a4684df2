//! Randomized cross-checks between independent parts of the crate.
//!
//! Each suite draws one random model per iteration from its own ChaCha8
//! stream, so a report depends only on the seed and the iteration count,
//! never on the thread count.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::proofs::{instantiate, Bindings, Metavar, SchemaId};
use crate::search::{random_formula, random_model_with};
use crate::semantics::{
    box_plus_left, box_plus_right, denotation, is_left_path, is_right_path, left_path_oracle,
    left_path_oracle_exact, left_path_witnesses, left_reach, left_transitive_closure,
    right_path_oracle, right_path_oracle_exact, right_path_witnesses, right_reach,
    right_transitive_closure, sequent_valid, Model, StatePairSet, StateSet,
};
use crate::syntax::{expand_left_division, expand_right_division, Formula, Sequent};

pub const MAX_STATES: usize = 5;
pub const TRIPLE_PROBABILITY: f64 = 0.3;
pub const ATOM_PROBABILITY: f64 = 0.5;
pub const SCHEMA_DRAWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    /// Fixpoint reach relations against bounded path enumeration.
    OracleEquivalence,
    /// `A\^n B` against the exact-length path condition.
    PathExpansion,
    /// Axioms valid, rules preserve validity, residuation.
    Soundness,
    /// Iterated division against the conjunction of its expansions.
    Unfolding,
    /// A path with its first step removed is still a path.
    Subpath,
    /// The transitive-closure box is contained in iterated division.
    BoxPlus,
    /// Meet, join and constants against set operations.
    Lattice,
    /// Left connectives on a model agree with right ones on its mirror.
    Mirror,
}

impl Suite {
    pub const ALL: &'static [Suite] = &[
        Suite::OracleEquivalence,
        Suite::PathExpansion,
        Suite::Soundness,
        Suite::Unfolding,
        Suite::Subpath,
        Suite::BoxPlus,
        Suite::Lattice,
        Suite::Mirror,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::OracleEquivalence => "oracle-equivalence",
            Suite::PathExpansion => "path-expansion",
            Suite::Soundness => "soundness",
            Suite::Unfolding => "unfolding",
            Suite::Subpath => "subpath",
            Suite::BoxPlus => "box-plus",
            Suite::Lattice => "lattice",
            Suite::Mirror => "mirror",
        }
    }

    fn salt(self) -> u64 {
        (self as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub iterations: u64,
    pub checks: u64,
    pub failures: u64,
    /// Description of the failure in the lowest-numbered failing iteration.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "pass" } else { "FAIL" };
        write!(
            f,
            "{status} {:<20} iterations {:>6}  checks {:>8}  failures {}",
            self.suite.name(),
            self.iterations,
            self.checks,
            self.failures
        )?;
        if let Some(msg) = &self.first_failure {
            write!(f, "\n     first failure: {msg}")?;
        }
        Ok(())
    }
}

/// Outcome of one iteration: checks made, failures seen, first message.
#[derive(Default)]
struct Tally {
    checks: u64,
    failures: u64,
    first: Option<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(msg());
            }
        }
    }
}

fn atoms() -> Vec<String> {
    ["p", "q", "r"].iter().map(|s| s.to_string()).collect()
}

fn draw_model(rng: &mut ChaCha8Rng, atoms: &[String]) -> Model {
    let n = rng.random_range(1..=MAX_STATES);
    random_model_with(rng, n, atoms, TRIPLE_PROBABILITY, ATOM_PROBABILITY)
}

fn rng_for(suite: Suite, seed: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ suite.salt());
    rng.set_stream(iteration);
    rng
}

pub fn run_suite(suite: Suite, seed: u64, iterations: u64) -> SuiteReport {
    let one = |i: u64| {
        let mut rng = rng_for(suite, seed, i);
        let mut t = Tally::default();
        run_iteration(suite, &mut rng, &mut t);
        t.first = t.first.map(|m| format!("iteration {i}: {m}"));
        t
    };
    #[cfg(feature = "parallel")]
    let tallies: Vec<Tally> = {
        use rayon::prelude::*;
        (0..iterations).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tallies: Vec<Tally> = (0..iterations).map(one).collect();

    let mut report = SuiteReport { suite, iterations, checks: 0, failures: 0, first_failure: None };
    for t in tallies {
        report.checks += t.checks;
        report.failures += t.failures;
        if report.first_failure.is_none() {
            report.first_failure = t.first;
        }
    }
    report
}

pub fn run_all(seed: u64, iterations: u64) -> Vec<SuiteReport> {
    Suite::ALL.iter().map(|&s| run_suite(s, seed, iterations)).collect()
}

fn run_iteration(suite: Suite, rng: &mut ChaCha8Rng, t: &mut Tally) {
    let atoms = atoms();
    let m = draw_model(rng, &atoms);
    match suite {
        Suite::OracleEquivalence => oracle_equivalence(rng, &m, &atoms, t),
        Suite::PathExpansion => path_expansion(&m, &atoms, t),
        Suite::Soundness => soundness(rng, &m, &atoms, t),
        Suite::Unfolding => unfolding(rng, &m, &atoms, t),
        Suite::Subpath => subpath(&m, &atoms, t),
        Suite::BoxPlus => box_plus(rng, &m, &atoms, t),
        Suite::Lattice => lattice(rng, &m, &atoms, t),
        Suite::Mirror => mirror(rng, &m, &atoms, t),
    }
}

fn set_text(m: &Model, set: &StateSet) -> String {
    format!("{{{}}}", m.names_of(set).join(", "))
}

fn pairs_text(m: &Model, rel: &StatePairSet) -> String {
    let items: Vec<String> =
        rel.pairs().map(|(s, t)| format!("({}, {})", m.state_name(s), m.state_name(t))).collect();
    format!("{{{}}}", items.join(", "))
}

fn oracle_equivalence(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let mut inputs: Vec<Formula> = atoms.iter().map(|a| Formula::atom(a.as_str())).collect();
    inputs.extend((0..3).map(|_| random_formula(rng, atoms, 3)));
    let maxlen = m.len() + 1;
    for f in &inputs {
        let xs = denotation(m, f);
        let (fast, slow) = (left_reach(m, &xs), left_path_oracle(m, &xs, maxlen));
        t.check(fast == slow, || {
            format!(
                "left reach over [{f}] is {} but paths give {}\n{}",
                pairs_text(m, &fast),
                pairs_text(m, &slow),
                m.to_text()
            )
        });
        let (fast, slow) = (right_reach(m, &xs), right_path_oracle(m, &xs, maxlen));
        t.check(fast == slow, || {
            format!(
                "right reach over [{f}] is {} but paths give {}\n{}",
                pairs_text(m, &fast),
                pairs_text(m, &slow),
                m.to_text()
            )
        });
    }
}

/// States all of whose `rel`-successors lie in `b`.
fn boxed(m: &Model, rel: &StatePairSet, b: &StateSet) -> StateSet {
    let mut out = m.full_set();
    for (s, u) in rel.pairs() {
        if !b.contains(u) {
            out.remove(s);
        }
    }
    out
}

fn path_expansion(m: &Model, atoms: &[String], t: &mut Tally) {
    for a in atoms {
        for b in atoms {
            let (fa, fb) = (Formula::atom(a.as_str()), Formula::atom(b.as_str()));
            let (da, db) = (denotation(m, &fa), denotation(m, &fb));
            for n in 1..=4 {
                let left = expand_left_division(&fa, &fb, n).expect("n >= 1");
                let want = boxed(m, &left_path_oracle_exact(m, &da, n), &db);
                let got = denotation(m, &left);
                t.check(got == want, || {
                    format!("[{left}] is {} but length-{n} paths give {}", set_text(m, &got), set_text(m, &want))
                });
                let right = expand_right_division(&fb, &fa, n).expect("n >= 1");
                let want = boxed(m, &right_path_oracle_exact(m, &da, n), &db);
                let got = denotation(m, &right);
                t.check(got == want, || {
                    format!("[{right}] is {} but length-{n} paths give {}", set_text(m, &got), set_text(m, &want))
                });
            }
        }
    }
}

fn base_schemata() -> Vec<SchemaId> {
    SchemaId::ALL.iter().copied().filter(|s| !s.is_extension()).collect()
}

/// Bindings that make the premises of a rule valid by construction, so the
/// rule's conclusion is actually exercised.
fn premise_satisfying(schema: SchemaId, rng: &mut ChaCha8Rng, atoms: &[String]) -> Option<Bindings> {
    use Metavar::*;
    let mut f = || random_formula(rng, atoms, 2);
    let (x, y, z, w) = (f(), f(), f(), f());
    let bind = |pairs: Vec<(Metavar, Formula)>| Some(pairs.into_iter().collect());
    match schema {
        // A * B |- C with C = (A * B) | Z
        SchemaId::ResLDivIntro | SchemaId::ResRDivIntro => {
            bind(vec![(A, x.clone()), (B, y.clone()), (C, Formula::join(Formula::fuse(x, y), z))])
        }
        // B |- A \ C with B = (A \ C) & Z
        SchemaId::ResLDivElim => {
            bind(vec![(A, x.clone()), (B, Formula::meet(Formula::ldiv(x, y.clone()), z)), (C, y)])
        }
        // A |- C / B with A = (C / B) & Z
        SchemaId::ResRDivElim => {
            bind(vec![(A, Formula::meet(Formula::rdiv(y.clone(), x.clone()), z)), (B, x), (C, y)])
        }
        SchemaId::AndIntro => bind(vec![
            (A, Formula::meet(Formula::meet(x.clone(), y.clone()), z)),
            (B, x),
            (C, y),
        ]),
        SchemaId::OrElim => bind(vec![
            (A, x.clone()),
            (B, y.clone()),
            (C, Formula::join(Formula::join(x, y), z)),
        ]),
        SchemaId::Cut => bind(vec![
            (A, Formula::meet(x.clone(), y)),
            (B, x.clone()),
            (C, Formula::join(x, z)),
        ]),
        SchemaId::IterLMono | SchemaId::IterRMono => bind(vec![
            (A, Formula::meet(x.clone(), y)),
            (B, x),
            (C, z.clone()),
            (D, Formula::join(z, w)),
        ]),
        // A = B \\ X satisfies A |- B \ A by unfolding.
        SchemaId::LoopInvL => bind(vec![(A, Formula::iter_ldiv(y.clone(), x)), (B, y)]),
        SchemaId::LoopInvR => bind(vec![(A, Formula::iter_rdiv(x, y.clone())), (B, y)]),
        _ => None,
    }
}

fn random_bindings(schema: SchemaId, rng: &mut ChaCha8Rng, atoms: &[String]) -> Bindings {
    if rng.random_bool(0.5) {
        if let Some(b) = premise_satisfying(schema, rng, atoms) {
            return b;
        }
    }
    schema.metavars().iter().map(|&v| (v, random_formula(rng, atoms, 2))).collect()
}

fn soundness(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let schemata = base_schemata();
    for _ in 0..SCHEMA_DRAWS {
        let schema = schemata[rng.random_range(0..schemata.len())];
        let b = random_bindings(schema, rng, atoms);
        let inst = instantiate(schema, &b).expect("bindings cover the schema");
        if inst.premises.iter().all(|p| sequent_valid(m, p)) {
            t.check(sequent_valid(m, &inst.conclusion), || {
                format!("{schema} instance `{}` fails\n{}", inst.conclusion, m.to_text())
            });
        }
    }
    // A * B |- C  iff  B |- A \ C  iff  A |- C / B
    let (a, b, c) = (random_formula(rng, atoms, 2), random_formula(rng, atoms, 2), random_formula(rng, atoms, 2));
    let fused = sequent_valid(m, &Sequent::new(Formula::fuse(a.clone(), b.clone()), c.clone()));
    let left = sequent_valid(m, &Sequent::new(b.clone(), Formula::ldiv(a.clone(), c.clone())));
    let right = sequent_valid(m, &Sequent::new(a.clone(), Formula::rdiv(c.clone(), b.clone())));
    t.check(fused == left && left == right, || {
        format!("residuation breaks for A={a}, B={b}, C={c}: {fused} {left} {right}\n{}", m.to_text())
    });
}

fn unfolding(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let mut pairs: Vec<(Formula, Formula)> = Vec::new();
    for a in atoms {
        for b in atoms {
            pairs.push((Formula::atom(a.as_str()), Formula::atom(b.as_str())));
        }
    }
    pairs.push((random_formula(rng, atoms, 2), random_formula(rng, atoms, 2)));
    let depth = m.len() + 1;
    for (a, b) in &pairs {
        let mut left = m.full_set();
        let mut right = m.full_set();
        for n in 1..=depth {
            left.intersect_with(&denotation(m, &expand_left_division(a, b, n).expect("n >= 1")));
            right.intersect_with(&denotation(m, &expand_right_division(b, a, n).expect("n >= 1")));
        }
        let iter_l = denotation(m, &Formula::iter_ldiv(a.clone(), b.clone()));
        t.check(iter_l == left, || {
            format!("[{a} \\\\ {b}] is {} but expansions give {}", set_text(m, &iter_l), set_text(m, &left))
        });
        let iter_r = denotation(m, &Formula::iter_rdiv(b.clone(), a.clone()));
        t.check(iter_r == right, || {
            format!("[{b} // {a}] is {} but expansions give {}", set_text(m, &iter_r), set_text(m, &right))
        });
    }
}

fn subpath(m: &Model, atoms: &[String], t: &mut Tally) {
    for a in atoms {
        let xs = m.valuation(a);
        for s in 0..m.len() {
            for len in 2..=3 {
                for w in left_path_witnesses(m, &xs, s, len) {
                    let (x1, y1) = (w.inputs[0], w.intermediates[0]);
                    let ok = m.has_triple(x1, s, y1) && is_left_path(m, &w.inputs[1..], y1, w.target);
                    t.check(ok, || format!("left path {w:?} has no tail from its first step"));
                }
                for w in right_path_witnesses(m, &xs, s, len) {
                    let (x1, y1) = (w.inputs[0], w.intermediates[0]);
                    let ok = m.has_triple(s, x1, y1) && is_right_path(m, &w.inputs[1..], y1, w.target);
                    t.check(ok, || format!("right path {w:?} has no tail from its first step"));
                }
            }
        }
    }
}

fn box_plus(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let (a, b) = (random_formula(rng, atoms, 1), random_formula(rng, atoms, 1));
    let boxed = box_plus_left(m, &a, &b);
    let iter = denotation(m, &Formula::iter_ldiv(a.clone(), b.clone()));
    t.check(boxed.is_subset(&iter), || {
        format!("left box over [{a}], [{b}] is {} outside {}", set_text(m, &boxed), set_text(m, &iter))
    });
    let boxed = box_plus_right(m, &a, &b);
    let iter = denotation(m, &Formula::iter_rdiv(b.clone(), a.clone()));
    t.check(boxed.is_subset(&iter), || {
        format!("right box over [{a}], [{b}] is {} outside {}", set_text(m, &boxed), set_text(m, &iter))
    });
    let (lc, rc) = (left_transitive_closure(m), right_transitive_closure(m));
    t.check(m.relation().is_subset(&lc) && m.relation().is_subset(&rc), || {
        format!("a transitive closure drops a base triple\n{}", m.to_text())
    });
    let mirrored = m.mirrored();
    let mirror_left: std::collections::BTreeSet<_> =
        left_transitive_closure(&mirrored).into_iter().map(|[a, b, c]| [b, a, c]).collect();
    t.check(mirror_left == rc, || format!("right closure is not the mirror of the left\n{}", m.to_text()));
}

fn lattice(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let (a, b) = (random_formula(rng, atoms, 2), random_formula(rng, atoms, 2));
    let (da, db) = (denotation(m, &a), denotation(m, &b));
    let mut meet = da.clone();
    meet.intersect_with(&db);
    let mut join = da.clone();
    join.union_with(&db);
    t.check(denotation(m, &Formula::meet(a.clone(), b.clone())) == meet, || format!("meet of {a} and {b}"));
    t.check(denotation(m, &Formula::join(a.clone(), b.clone())) == join, || format!("join of {a} and {b}"));
    t.check(denotation(m, &Formula::Top) == m.full_set(), || "top is not every state".into());
    t.check(denotation(m, &Formula::Bot) == m.empty_set(), || "bot is not empty".into());
}

/// Swaps the arguments of every fusion and turns left divisions into right
/// ones and back.
fn mirror_formula(f: &Formula) -> Formula {
    let mf = |x: &Formula| mirror_formula(x);
    match f {
        Formula::Atom(_) | Formula::Top | Formula::Bot => f.clone(),
        Formula::Meet(l, r) => Formula::meet(mf(l), mf(r)),
        Formula::Join(l, r) => Formula::join(mf(l), mf(r)),
        Formula::Fuse(l, r) => Formula::fuse(mf(r), mf(l)),
        Formula::LDiv(a, b) => Formula::rdiv(mf(b), mf(a)),
        Formula::RDiv(b, a) => Formula::ldiv(mf(a), mf(b)),
        Formula::IterLDiv(a, b) => Formula::iter_rdiv(mf(b), mf(a)),
        Formula::IterRDiv(b, a) => Formula::iter_ldiv(mf(a), mf(b)),
    }
}

fn mirror(rng: &mut ChaCha8Rng, m: &Model, atoms: &[String], t: &mut Tally) {
    let mirrored = m.mirrored();
    for _ in 0..3 {
        let f = random_formula(rng, atoms, 3);
        let (here, there) = (denotation(m, &f), denotation(&mirrored, &mirror_formula(&f)));
        t.check(here == there, || {
            format!("[{f}] is {} but its mirror gives {}\n{}", set_text(m, &here), set_text(m, &there), m.to_text())
        });
    }
}
