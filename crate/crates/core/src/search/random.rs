use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::semantics::Model;
use crate::syntax::{BinOp, Formula};

/// Parameters of a random model.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomConfig {
    pub states: usize,
    pub atoms: Vec<String>,
    /// Chance that any given triple is in the relation.
    pub triple_probability: f64,
    /// Chance that any given state is in any given atom's extension.
    pub atom_probability: f64,
    pub seed: u64,
}

/// Draws a model: triples in `(a, b, c)` order, then atom memberships atom by
/// atom in state order, all from a ChaCha8 stream seeded with `cfg.seed`.
pub fn random_model(cfg: &RandomConfig) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    random_model_with(&mut rng, cfg.states, &cfg.atoms, cfg.triple_probability, cfg.atom_probability)
}

pub(crate) fn random_model_with(
    rng: &mut impl Rng,
    n: usize,
    atoms: &[String],
    triple_probability: f64,
    atom_probability: f64,
) -> Model {
    assert!(n >= 1, "a model needs at least one state");
    assert!((0.0..=1.0).contains(&triple_probability), "triple probability out of range");
    assert!((0.0..=1.0).contains(&atom_probability), "atom probability out of range");
    let mut triples = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if rng.random_bool(triple_probability) {
                    triples.push([a, b, c]);
                }
            }
        }
    }
    let mut val = BTreeMap::new();
    for atom in atoms {
        let members: Vec<usize> = (0..n).filter(|_| rng.random_bool(atom_probability)).collect();
        val.insert(atom.clone(), members);
    }
    Model::with_indexed_states(n, triples, val).expect("indices are in range")
}

/// Random formula over `atoms` with at most `depth` levels of connectives.
pub fn random_formula(rng: &mut impl Rng, atoms: &[String], depth: usize) -> Formula {
    if depth == 0 || rng.random_ratio(1, 4) {
        return match rng.random_range(0..10) {
            0 => Formula::Top,
            1 => Formula::Bot,
            _ => Formula::Atom(atoms[rng.random_range(0..atoms.len())].clone()),
        };
    }
    let op = BinOp::ALL[rng.random_range(0..BinOp::ALL.len())];
    let l = random_formula(rng, atoms, depth - 1);
    let r = random_formula(rng, atoms, depth - 1);
    op.apply(l, r)
}
