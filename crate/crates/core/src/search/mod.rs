//! Countermodel search over finite models.
//!
//! Models of each size are visited in a fixed order: by relation mask counting
//! up, then by valuation counting up (see [`enumerate_models`]). The first
//! falsifying model in that order is reported, so results do not depend on the
//! number of worker threads.

mod bitpar;
mod frames;
mod random;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::semantics::{FrameProperty, Model, Triple};
use crate::syntax::{closure, FormulaSet, Sequent};

pub use bitpar::{Evaluator, Falsified, Program};
pub use frames::{FrameSpace, IsoFilter, MAX_ENUMERABLE_STATES};
pub use random::{random_formula, random_model, RandomConfig};
pub(crate) use random::random_model_with;

/// Relations scanned per unit of work between deadline checks.
const BLOCK: u128 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub max_states: usize,
    pub frame_properties: BTreeSet<FrameProperty>,
    /// Report the first countermodel in canonical order. When false and
    /// running in parallel, any countermodel may be reported.
    pub deterministic: bool,
    pub parallel: bool,
    /// Worker threads for parallel mode; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Skip relations that are not the least of their isomorphism class.
    /// Ignored when frame properties are requested.
    pub symmetry_breaking: bool,
    pub timeout: Option<Duration>,
}

impl SearchConfig {
    pub fn new(max_states: usize) -> Self {
        SearchConfig {
            max_states,
            frame_properties: BTreeSet::new(),
            deterministic: true,
            parallel: false,
            threads: None,
            symmetry_breaking: false,
            timeout: None,
        }
    }

    pub fn with_property(mut self, p: FrameProperty) -> Self {
        self.frame_properties.insert(p);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// `model` falsifies the sequent at state index `state`.
    Countermodel { model: Model, state: usize },
    /// No countermodel with at most this many states.
    ExhaustedTo(usize),
    /// Exhausted up to the finite-model bound, so the sequent is valid.
    CompleteValid(u64),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Countermodel { model, state } => {
                let plural = if model.len() == 1 { "" } else { "s" };
                writeln!(f, "# countermodel with {} state{plural}", model.len())?;
                write!(f, "{}", model.to_text())?;
                writeln!(f, "# witness: {}", model.state_name(*state))
            }
            Verdict::ExhaustedTo(1) => writeln!(f, "no countermodel with 1 state"),
            Verdict::ExhaustedTo(k) => writeln!(f, "no countermodel with at most {k} states"),
            Verdict::CompleteValid(bound) => {
                writeln!(f, "valid: no countermodel up to the finite-model bound {bound}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search aborted after {0:?}")]
    Timeout(Duration),
    #[error("models with {states} states are beyond the enumerable range")]
    TooLarge { states: usize },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("finite-model bound 2^{0} does not fit in 64 bits")]
pub struct BoundOverflow(pub usize);

/// `2^|closure({lhs, rhs})|`, the state count past which exhaustive search
/// proves validity.
pub fn fmp_bound(sq: &Sequent) -> Result<u64, BoundOverflow> {
    let phi = closure(&FormulaSet::from([sq.lhs.clone(), sq.rhs.clone()]));
    1u64.checked_shl(phi.len() as u32).filter(|_| phi.len() < 64).ok_or(BoundOverflow(phi.len()))
}

/// Builds the model over states `s0 .. s{n-1}` with the given relation and
/// the valuation encoded by `valuation`.
pub fn model_from_bits(
    n: usize,
    triples: impl IntoIterator<Item = Triple>,
    atoms: &[String],
    valuation: u64,
) -> Model {
    let val: BTreeMap<String, Vec<usize>> = atoms
        .iter()
        .enumerate()
        .map(|(j, a)| (a.clone(), (0..n).filter(|s| valuation >> (j * n + s) & 1 == 1).collect()))
        .collect();
    Model::with_indexed_states(n, triples, val).expect("indices are in range")
}

/// The least relation over `n` states with `props`: only the forced triples.
fn least_relation(n: usize, props: &BTreeSet<FrameProperty>) -> Vec<Triple> {
    if props.contains(&FrameProperty::Reflexive) {
        (0..n).map(|s| [s, s, s]).collect()
    } else {
        Vec::new()
    }
}

/// Stream of all models with `n` states over `atoms` satisfying `props`.
pub struct ModelStream {
    space: FrameSpace,
    atoms: Vec<String>,
    frame_count: u128,
    valuation_count: u64,
    frame: u128,
    valuation: u64,
}

impl Iterator for ModelStream {
    type Item = Model;

    fn next(&mut self) -> Option<Model> {
        if self.frame >= self.frame_count {
            return None;
        }
        let mask = self.space.frame(self.frame);
        let model =
            model_from_bits(self.space.states(), self.space.triples_of(mask), &self.atoms, self.valuation);
        self.valuation += 1;
        if self.valuation == self.valuation_count {
            self.valuation = 0;
            self.frame += 1;
        }
        Some(model)
    }
}

/// Every model with states `s0 .. s{n-1}` and valuation over `atoms` whose
/// frame has `props`, once each. Relations count up as bit strings with bit
/// `a*n*n + b*n + c` for `R a b c`; within a relation, valuations count up
/// with bit `j*n + s` for "state `s` is in atom `j`".
pub fn enumerate_models(
    n: usize,
    atoms: &[String],
    props: &BTreeSet<FrameProperty>,
) -> Result<ModelStream, SearchError> {
    let too_large = SearchError::TooLarge { states: n };
    let space = FrameSpace::new(n, props).ok_or(too_large.clone())?;
    let frame_count = space.count().ok_or(too_large.clone())?;
    let valuation_count = 1u64.checked_shl((n * atoms.len()) as u32).ok_or(too_large)?;
    Ok(ModelStream {
        space,
        atoms: atoms.to_vec(),
        frame_count,
        valuation_count,
        frame: 0,
        valuation: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hit {
    mask: u128,
    found: Falsified,
}

struct SizeSearch<'a> {
    prog: &'a Program,
    space: FrameSpace,
    iso: Option<IsoFilter>,
    frames: u128,
    deadline: Option<(Instant, Duration)>,
}

impl SizeSearch<'_> {
    fn scan(&self, ev: &mut Evaluator<'_>, start: u128) -> Result<Option<Hit>, SearchError> {
        check_deadline(self.deadline)?;
        let end = (start + BLOCK).min(self.frames);
        let mut mask = self.space.frame(start);
        for index in start..end {
            if index > start {
                mask = self.space.next_frame(index - 1, mask);
            }
            if let Some(iso) = &self.iso {
                if !iso.is_canonical(mask) {
                    continue;
                }
            }
            ev.set_frame(self.space.triples_of(mask));
            if let Some(found) = ev.check_frame() {
                return Ok(Some(Hit { mask, found }));
            }
        }
        Ok(None)
    }

    fn evaluator(&self) -> Evaluator<'_> {
        Evaluator::new(self.prog, self.space.states()).expect("checked by caller")
    }

    fn run_sequential(&self) -> Result<Option<Hit>, SearchError> {
        let mut ev = self.evaluator();
        let mut start = 0;
        while start < self.frames {
            if let Some(hit) = self.scan(&mut ev, start)? {
                return Ok(Some(hit));
            }
            start += BLOCK;
        }
        Ok(None)
    }

    #[cfg(feature = "parallel")]
    fn run_parallel(&self, deterministic: bool, width: usize) -> Result<Option<Hit>, SearchError> {
        use rayon::prelude::*;

        // A wave of blocks is scanned in parallel; waves run in order, and
        // inside a wave the earliest block with a result wins.
        let wave = (width.max(1) * 4) as u128;
        let mut base = 0;
        while base < self.frames {
            let blocks: Vec<u128> =
                (0..wave).map(|i| base + i * BLOCK).take_while(|&s| s < self.frames).collect();
            let scan = |ev: &mut Evaluator<'_>, &start: &u128| self.scan(ev, start);
            let keep = |r: Result<Option<Hit>, SearchError>| r.transpose();
            let found = if deterministic {
                blocks.par_iter().map_init(|| self.evaluator(), scan).find_map_first(keep)
            } else {
                blocks.par_iter().map_init(|| self.evaluator(), scan).find_map_any(keep)
            };
            if let Some(result) = found {
                return result.map(Some);
            }
            base += wave * BLOCK;
        }
        Ok(None)
    }
}

fn check_deadline(deadline: Option<(Instant, Duration)>) -> Result<(), SearchError> {
    match deadline {
        Some((at, limit)) if Instant::now() >= at => Err(SearchError::Timeout(limit)),
        _ => Ok(()),
    }
}

/// Looks for a model falsifying `sq`, trying sizes `1..=cfg.max_states` in
/// order over the atoms that occur in `sq`.
pub fn find_countermodel(sq: &Sequent, cfg: &SearchConfig) -> Result<Verdict, SearchError> {
    let prog = Program::compile(sq);
    let bound = if cfg.frame_properties.is_empty() { fmp_bound(sq).ok() } else { None };
    let deadline = cfg.timeout.map(|t| (Instant::now() + t, t));
    let prune = cfg.symmetry_breaking && cfg.frame_properties.is_empty();
    let last = bound.map_or(cfg.max_states, |b| cfg.max_states.min(b.try_into().unwrap_or(usize::MAX)));
    // Refuse up front rather than after searching every smaller size.
    if let Some(n) = (1..=last).find(|&n| {
        Evaluator::new(&prog, n).is_none() || (prog.is_relational() && n > MAX_ENUMERABLE_STATES)
    }) {
        return Err(SearchError::TooLarge { states: n });
    }

    for n in 1..=cfg.max_states {
        if bound.is_some_and(|b| (n as u64) > b) {
            break;
        }
        let too_large = SearchError::TooLarge { states: n };
        if !prog.is_relational() {
            // Every relation gives the same verdict; the least one stands for all.
            let triples = least_relation(n, &cfg.frame_properties);
            let mut ev = Evaluator::new(&prog, n).ok_or(too_large)?;
            ev.set_frame(triples.iter().copied());
            for chunk in 0..ev.chunks() {
                if chunk % 1024 == 0 {
                    check_deadline(deadline)?;
                }
                if let Some(found) = ev.check_chunk(chunk) {
                    let model = model_from_bits(n, triples, prog.atoms(), found.valuation);
                    return Ok(Verdict::Countermodel { model, state: found.state });
                }
            }
            continue;
        }
        let space = FrameSpace::new(n, &cfg.frame_properties).ok_or(too_large.clone())?;
        if Evaluator::new(&prog, n).is_none() {
            return Err(too_large);
        }
        let frames = space.count().ok_or(too_large)?;
        let iso = if prune { IsoFilter::new(n) } else { None };
        let search = SizeSearch { prog: &prog, space, iso, frames, deadline };
        if let Some(hit) = run(&search, cfg)? {
            let triples = search.space.triples_of(hit.mask);
            let model = model_from_bits(n, triples, prog.atoms(), hit.found.valuation);
            return Ok(Verdict::Countermodel { model, state: hit.found.state });
        }
    }
    match bound {
        Some(b) if (cfg.max_states as u64) >= b => Ok(Verdict::CompleteValid(b)),
        _ => Ok(Verdict::ExhaustedTo(cfg.max_states)),
    }
}

#[cfg(feature = "parallel")]
fn run(search: &SizeSearch<'_>, cfg: &SearchConfig) -> Result<Option<Hit>, SearchError> {
    if !cfg.parallel || search.frames <= BLOCK {
        return search.run_sequential();
    }
    match cfg.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| SearchError::Pool(e.to_string()))?;
            pool.install(|| search.run_parallel(cfg.deterministic, threads))
        }
        None => search.run_parallel(cfg.deterministic, rayon::current_num_threads()),
    }
}

#[cfg(not(feature = "parallel"))]
fn run(search: &SizeSearch<'_>, _cfg: &SearchConfig) -> Result<Option<Hit>, SearchError> {
    search.run_sequential()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{frame_has_property, satisfies, sequent_valid};
    use crate::syntax::parse_sequent;

    fn sq(text: &str) -> Sequent {
        parse_sequent(text).unwrap()
    }

    fn atoms(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn props(ps: &[FrameProperty]) -> BTreeSet<FrameProperty> {
        ps.iter().copied().collect()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_models(1, &atoms(&["p"]), &props(&[])).unwrap().count(), 4);
        let refl: Vec<Model> =
            enumerate_models(1, &[], &props(&[FrameProperty::Reflexive])).unwrap().collect();
        assert_eq!(refl.len(), 1);
        assert!(refl[0].has_triple(0, 0, 0));
        assert_eq!(enumerate_models(2, &[], &props(&[])).unwrap().count(), 256);
        assert_eq!(enumerate_models(2, &atoms(&["p"]), &props(&[])).unwrap().count(), 256 * 4);
    }

    #[test]
    fn enumeration_order_and_uniqueness() {
        let all: Vec<Model> = enumerate_models(1, &atoms(&["p"]), &props(&[])).unwrap().collect();
        let texts: Vec<String> = all.iter().map(Model::to_text).collect();
        assert_eq!(
            texts,
            [
                "states: s0\nv p:\n",
                "states: s0\nv p: s0\n",
                "states: s0\nr: s0 s0 s0\nv p:\n",
                "states: s0\nr: s0 s0 s0\nv p: s0\n",
            ]
        );
        let distinct: BTreeSet<String> =
            enumerate_models(2, &atoms(&["p"]), &props(&[])).unwrap().map(|m| m.to_text()).collect();
        assert_eq!(distinct.len(), 1024);
    }

    #[test]
    fn enumeration_respects_frame_properties() {
        let ps = props(&[FrameProperty::Commutative]);
        for m in enumerate_models(2, &[], &ps).unwrap() {
            assert!(frame_has_property(&m, FrameProperty::Commutative));
        }
        assert_eq!(enumerate_models(2, &[], &ps).unwrap().count(), 64);
    }

    #[test]
    fn bounds() {
        assert_eq!(fmp_bound(&sq("p |- q")), Ok(16));
        assert_eq!(fmp_bound(&sq("top |- top")), Ok(4));
        assert_eq!(fmp_bound(&sq("p \\\\ q |- p \\ q")), Ok(64));
        let mut big = String::from("p0");
        for i in 1..70 {
            big = format!("{big} & p{i}");
        }
        assert!(fmp_bound(&sq(&format!("{big} |- p0"))).is_err());
    }

    #[test]
    fn axiom_instance_exhausts() {
        assert_eq!(find_countermodel(&sq("p & q |- p"), &SearchConfig::new(1)), Ok(Verdict::ExhaustedTo(1)));
    }

    #[test]
    fn tiny_closure_reaches_complete_validity() {
        assert_eq!(find_countermodel(&sq("top |- top"), &SearchConfig::new(4)), Ok(Verdict::CompleteValid(4)));
        assert_eq!(find_countermodel(&sq("top |- top"), &SearchConfig::new(10)), Ok(Verdict::CompleteValid(4)));
        assert_eq!(find_countermodel(&sq("top |- top"), &SearchConfig::new(3)), Ok(Verdict::ExhaustedTo(3)));
    }

    #[test]
    fn weak_contraction_fails_on_one_state() {
        let v = find_countermodel(&sq("p & (p \\ q) |- q"), &SearchConfig::new(1)).unwrap();
        let Verdict::Countermodel { model, state } = v else { panic!("expected countermodel") };
        assert_eq!(model.to_text(), "states: s0\nv p: s0\nv q:\n");
        assert_eq!(state, 0);
    }

    #[test]
    fn countermodels_are_minimal_and_sound() {
        for text in ["p * q |- q * p", "p \\ q |- p \\ (p & q)", "p |- p * p", "p / q |- p // q"] {
            let s = sq(text);
            let Verdict::Countermodel { model, state } = find_countermodel(&s, &SearchConfig::new(3)).unwrap()
            else {
                panic!("{text}: expected countermodel")
            };
            let name = model.state_name(state);
            assert!(satisfies(&model, name, &s.lhs).unwrap());
            assert!(!satisfies(&model, name, &s.rhs).unwrap());
            if model.len() > 1 {
                assert_eq!(
                    find_countermodel(&s, &SearchConfig::new(model.len() - 1)).unwrap(),
                    Verdict::ExhaustedTo(model.len() - 1),
                    "{text}"
                );
            }
        }
    }

    /// The bit-parallel search agrees with walking the model stream and
    /// evaluating each model with the reference semantics.
    #[test]
    fn fast_search_matches_naive_enumeration() {
        let cases = [
            "p * q |- q * p",
            "p \\ q |- p \\ (p & q)",
            "(p \\\\ r) & (q \\\\ r) |- (p | q) \\\\ r",
            "(r // p) & (r // q) |- r // (p | q)",
            "p \\\\ q |- p \\ (p \\ q)",
            "q // p |- (q / p) / p",
            "p & q |- p",
            "p |- p \\\\ p",
        ];
        for text in cases {
            let s = sq(text);
            let names: Vec<String> = s.atoms().into_iter().collect();
            let mut naive = None;
            'sizes: for n in 1..=2 {
                for m in enumerate_models(n, &names, &props(&[])).unwrap() {
                    let (l, r) = (crate::semantics::denotation(&m, &s.lhs), crate::semantics::denotation(&m, &s.rhs));
                    if let Some(state) = l.ones().find(|&i| !r.contains(i)) {
                        naive = Some(Verdict::Countermodel { model: m, state });
                        break 'sizes;
                    }
                }
            }
            let fast = find_countermodel(&s, &SearchConfig::new(2)).unwrap();
            match naive {
                Some(v) => assert_eq!(fast, v, "{text}"),
                None => assert_eq!(fast, Verdict::ExhaustedTo(2), "{text}"),
            }
        }
    }

    #[test]
    fn frame_filters_block_extension_countermodels() {
        let refl = SearchConfig::new(2).with_property(FrameProperty::Reflexive);
        assert_eq!(find_countermodel(&sq("p & (p \\ q) |- q"), &refl), Ok(Verdict::ExhaustedTo(2)));
        let comm = SearchConfig::new(2).with_property(FrameProperty::Commutative);
        assert_eq!(find_countermodel(&sq("p * q |- q * p"), &comm), Ok(Verdict::ExhaustedTo(2)));
        // Commutativity does not rescue weak contraction.
        let v = find_countermodel(&sq("p & (p \\ q) |- q"), &comm).unwrap();
        let Verdict::Countermodel { model, .. } = v else { panic!() };
        assert!(frame_has_property(&model, FrameProperty::Commutative));
    }

    #[test]
    fn symmetry_breaking_preserves_existence_and_size() {
        for text in ["p * q |- q * p", "(p \\\\ r) & (q \\\\ r) |- (p | q) \\\\ r", "p \\ q |- p \\ (p & q)"] {
            let s = sq(text);
            let plain = find_countermodel(&s, &SearchConfig::new(3)).unwrap();
            let pruned =
                find_countermodel(&s, &SearchConfig { symmetry_breaking: true, ..SearchConfig::new(3) }).unwrap();
            let size = |v: &Verdict| match v {
                Verdict::Countermodel { model, .. } => model.len(),
                _ => 0,
            };
            assert_eq!(size(&plain), size(&pruned), "{text}");
            if let Verdict::Countermodel { model, state } = pruned {
                assert!(!sequent_valid(&model, &s));
                assert!(satisfies(&model, model.state_name(state), &s.lhs).unwrap());
            }
        }
    }

    #[test]
    fn timeout_is_distinct_from_exhaustion() {
        let cfg = SearchConfig { timeout: Some(Duration::ZERO), ..SearchConfig::new(3) };
        assert_eq!(
            find_countermodel(&sq("p & (p \\ q) |- p"), &cfg),
            Err(SearchError::Timeout(Duration::ZERO))
        );
    }

    #[test]
    fn lattice_sequents_skip_relation_enumeration() {
        assert_eq!(find_countermodel(&sq("p |- p"), &SearchConfig::new(10)), Ok(Verdict::CompleteValid(8)));
        let refl = SearchConfig::new(6).with_property(FrameProperty::Reflexive);
        assert_eq!(find_countermodel(&sq("p & q |- q & p"), &refl), Ok(Verdict::ExhaustedTo(6)));
        let Verdict::Countermodel { model, state } =
            find_countermodel(&sq("p | q |- p"), &refl).unwrap()
        else {
            panic!()
        };
        assert!(frame_has_property(&model, FrameProperty::Reflexive));
        assert!(!satisfies(&model, model.state_name(state), &crate::syntax::Formula::atom("p")).unwrap());
    }

    #[test]
    fn verdict_output_is_a_model_file() {
        let v = find_countermodel(&sq("p * q |- q * p"), &SearchConfig::new(3)).unwrap();
        let text = v.to_string();
        let m = crate::semantics::parse_model(&text).unwrap();
        let Verdict::Countermodel { model, .. } = v else { panic!() };
        assert_eq!(m, model);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_agrees_with_sequential() {
        for text in ["(p \\\\ r) & (q \\\\ r) |- (p | q) \\\\ r", "(r // p) & (r // q) |- r // (p | q)"] {
            let s = sq(text);
            let seq = find_countermodel(&s, &SearchConfig::new(4)).unwrap();
            for threads in [1, 3, 8] {
                let cfg = SearchConfig { parallel: true, threads: Some(threads), ..SearchConfig::new(4) };
                assert_eq!(find_countermodel(&s, &cfg).unwrap(), seq, "{text} threads={threads}");
            }
        }
    }
}
