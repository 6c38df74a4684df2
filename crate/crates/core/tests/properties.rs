use proptest::prelude::*;

use idfnl::proofs::{instantiate, Bindings, SchemaId};
use idfnl::search::{find_countermodel, random_model, RandomConfig, SearchConfig, Verdict};
use idfnl::semantics::{denotation, satisfies, sequent_valid};
use idfnl::syntax::{
    closure, expand_left_division, expand_right_division, parse_formula, parse_sequent,
    render_formula, subformulas, BinOp, Formula, FormulaSet, Sequent,
};

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        4 => prop::sample::select(vec!["p", "q", "r", "s1", "long_name"]).prop_map(Formula::atom),
        1 => Just(Formula::Top),
        1 => Just(Formula::Bot),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        (prop::sample::select(BinOp::ALL.to_vec()), inner.clone(), inner)
            .prop_map(|(op, l, r)| op.apply(l, r))
    })
}

fn formula_set() -> impl Strategy<Value = FormulaSet> {
    prop::collection::btree_set(formula(), 0..4)
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(f in formula()) {
        prop_assert_eq!(parse_formula(&render_formula(&f)).unwrap(), f);
    }

    #[test]
    fn sequents_round_trip(l in formula(), r in formula()) {
        let sq = Sequent::new(l, r);
        prop_assert_eq!(parse_sequent(&sq.to_string()).unwrap(), sq);
    }

    #[test]
    fn closure_is_idempotent(fs in formula_set()) {
        let once = closure(&fs);
        prop_assert_eq!(closure(&once), once);
    }

    #[test]
    fn closure_is_monotone(fs in formula_set(), extra in formula_set()) {
        let gs: FormulaSet = fs.union(&extra).cloned().collect();
        prop_assert!(closure(&fs).is_subset(&closure(&gs)));
    }

    #[test]
    fn closure_size_is_linear(fs in formula_set()) {
        let subs: usize = fs.iter().map(|f| subformulas(f).len()).sum();
        prop_assert!(closure(&fs).len() <= 2 * subs + 2);
    }

    #[test]
    fn expansions_unfold_one_step(a in formula(), b in formula(), n in 1usize..6) {
        prop_assert_eq!(
            expand_left_division(&a, &b, n + 1).unwrap(),
            Formula::ldiv(a.clone(), expand_left_division(&a, &b, n).unwrap())
        );
        prop_assert_eq!(
            expand_right_division(&b, &a, n + 1).unwrap(),
            Formula::rdiv(expand_right_division(&b, &a, n).unwrap(), a.clone())
        );
    }

    #[test]
    fn instantiate_is_injective_when_conclusion_mentions_every_metavariable(
        idx in 0..SchemaId::ALL.len(),
        xs in prop::collection::vec(formula(), 4),
        ys in prop::collection::vec(formula(), 4),
    ) {
        let schema = SchemaId::ALL[idx];
        let vars = schema.metavars();
        let probe: Bindings = vars.iter().map(|&v| (v, Formula::atom(format!("meta_{}", v.name().to_lowercase())))).collect();
        let shown = instantiate(schema, &probe).unwrap().conclusion.atoms();
        prop_assume!(vars.iter().all(|v| shown.contains(&format!("meta_{}", v.name().to_lowercase()))));
        let bx: Bindings = vars.iter().copied().zip(xs).collect();
        let by: Bindings = vars.iter().copied().zip(ys).collect();
        let (cx, cy) = (instantiate(schema, &bx).unwrap().conclusion, instantiate(schema, &by).unwrap().conclusion);
        prop_assert_eq!(cx == cy, bx == by);
    }

    #[test]
    fn denotations_are_lattice_homomorphic(seed in any::<u64>(), a in formula(), b in formula()) {
        let atoms = ["p", "q", "r", "s1", "long_name"].iter().map(|s| s.to_string()).collect();
        let m = random_model(&RandomConfig { states: 3, atoms, triple_probability: 0.3, atom_probability: 0.5, seed });
        let (da, db) = (denotation(&m, &a), denotation(&m, &b));
        let mut meet = da.clone();
        meet.intersect_with(&db);
        prop_assert_eq!(denotation(&m, &Formula::meet(a.clone(), b.clone())), meet);
        let mut join = da;
        join.union_with(&db);
        prop_assert_eq!(denotation(&m, &Formula::join(a, b)), join);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn countermodels_are_genuine(l in formula(), r in formula()) {
        let sq = Sequent::new(l, r);
        prop_assume!(sq.atoms().len() <= 3);
        if let Verdict::Countermodel { model, state } = find_countermodel(&sq, &SearchConfig::new(2)).unwrap() {
            let name = model.state_name(state);
            prop_assert!(satisfies(&model, name, &sq.lhs).unwrap());
            prop_assert!(!satisfies(&model, name, &sq.rhs).unwrap());
            prop_assert!(!sequent_valid(&model, &sq));
        }
    }
}

