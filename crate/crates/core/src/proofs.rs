//! Derivations in the axiom system and their checker.
//!
//! A derivation is a numbered list of steps. Each step names a schema, gives
//! an explicit substitution for the schema's metavariables and lists the
//! earlier steps it uses as premises. Checking is substitution followed by
//! structural comparison; there is no matching or search.
//!
//! File format, one step per line (`#` starts a comment):
//!
//! ```text
//! 1. p * q |- p * q ; id ; A=p * q
//! 2. q |- p \ (p * q) ; res_ldiv_intro ; A=p , B=q , C=p * q ; premises: 1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::syntax::{parse_formula, parse_sequent, BinOp, Formula, ParseError, Sequent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metavar {
    A,
    B,
    C,
    D,
}

impl Metavar {
    pub fn name(self) -> &'static str {
        match self {
            Metavar::A => "A",
            Metavar::B => "B",
            Metavar::C => "C",
            Metavar::D => "D",
        }
    }
}

impl FromStr for Metavar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Metavar::A),
            "B" => Ok(Metavar::B),
            "C" => Ok(Metavar::C),
            "D" => Ok(Metavar::D),
            other => Err(format!("unknown metavariable `{other}`")),
        }
    }
}

pub type Bindings = BTreeMap<Metavar, Formula>;

macro_rules! schemas {
    ($($variant:ident => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum SchemaId {
            $($variant,)*
        }

        impl SchemaId {
            pub const ALL: &'static [SchemaId] = &[$(SchemaId::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(SchemaId::$variant => $name,)*
                }
            }
        }

        impl FromStr for SchemaId {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(SchemaId::$variant),)*
                    other => Err(other.to_string()),
                }
            }
        }
    };
}

schemas! {
    Id => "id",
    Top => "top",
    Bot => "bot",
    AndElimL => "and_elim_l",
    AndElimR => "and_elim_r",
    OrIntroL => "or_intro_l",
    OrIntroR => "or_intro_r",
    Distrib => "distrib",
    IterLMeet => "iter_l_meet",
    IterRMeet => "iter_r_meet",
    IterLUnfold => "iter_l_unfold",
    IterRUnfold => "iter_r_unfold",
    IterLFold => "iter_l_fold",
    IterRFold => "iter_r_fold",
    ResLDivIntro => "res_ldiv_intro",
    ResLDivElim => "res_ldiv_elim",
    ResRDivIntro => "res_rdiv_intro",
    ResRDivElim => "res_rdiv_elim",
    AndIntro => "and_intro",
    OrElim => "or_elim",
    Cut => "cut",
    IterLMono => "iter_l_mono",
    IterRMono => "iter_r_mono",
    LoopInvL => "loop_inv_l",
    LoopInvR => "loop_inv_r",
    WeakContraction => "weak_contraction",
    WeakCommutativity => "weak_commutativity",
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl SchemaId {
    /// Schemata outside the base system, accepted only when enabled.
    pub fn is_extension(self) -> bool {
        matches!(self, SchemaId::WeakContraction | SchemaId::WeakCommutativity)
    }

    pub fn arity(self) -> usize {
        use SchemaId::*;
        match self {
            ResLDivIntro | ResLDivElim | ResRDivIntro | ResRDivElim | LoopInvL | LoopInvR => 1,
            AndIntro | OrElim | Cut | IterLMono | IterRMono => 2,
            _ => 0,
        }
    }

    pub fn metavars(self) -> &'static [Metavar] {
        use Metavar::*;
        use SchemaId::*;
        match self {
            Id | Top | Bot => &[A],
            AndElimL | AndElimR | OrIntroL | OrIntroR | IterLUnfold | IterRUnfold | IterLFold
            | IterRFold | LoopInvL | LoopInvR | WeakContraction | WeakCommutativity => &[A, B],
            Distrib | IterLMeet | IterRMeet | ResLDivIntro | ResLDivElim | ResRDivIntro
            | ResRDivElim | AndIntro | OrElim | Cut => &[A, B, C],
            IterLMono | IterRMono => &[A, B, C, D],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("{schema} needs a binding for {var}", var = .var.name())]
    Missing { schema: SchemaId, var: Metavar },
    #[error("{schema} has no metavariable {var}", var = .var.name())]
    Extra { schema: SchemaId, var: Metavar },
}

/// Premise shapes and conclusion of a schema under a substitution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub premises: Vec<Sequent>,
    pub conclusion: Sequent,
}

pub fn instantiate(schema: SchemaId, b: &Bindings) -> Result<Instance, BindingError> {
    let wanted = schema.metavars();
    if let Some(&var) = wanted.iter().find(|v| !b.contains_key(v)) {
        return Err(BindingError::Missing { schema, var });
    }
    if let Some(&var) = b.keys().find(|v| !wanted.contains(v)) {
        return Err(BindingError::Extra { schema, var });
    }
    let get = |v: Metavar| b[&v].clone();
    let (a, bb, c, d) = (
        || get(Metavar::A),
        || get(Metavar::B),
        || get(Metavar::C),
        || get(Metavar::D),
    );
    let seq = Sequent::new;
    let (meet, join, fuse) = (Formula::meet, Formula::join, Formula::fuse);
    let (ldiv, rdiv, il, ir) = (Formula::ldiv, Formula::rdiv, Formula::iter_ldiv, Formula::iter_rdiv);

    use SchemaId::*;
    let (premises, conclusion) = match schema {
        Id => (vec![], seq(a(), a())),
        Top => (vec![], seq(a(), Formula::Top)),
        Bot => (vec![], seq(Formula::Bot, a())),
        AndElimL => (vec![], seq(meet(a(), bb()), a())),
        AndElimR => (vec![], seq(meet(a(), bb()), bb())),
        OrIntroL => (vec![], seq(a(), join(a(), bb()))),
        OrIntroR => (vec![], seq(bb(), join(a(), bb()))),
        Distrib => (
            vec![],
            seq(meet(a(), join(bb(), c())), join(meet(a(), bb()), meet(a(), c()))),
        ),
        IterLMeet => (vec![], seq(meet(il(a(), bb()), il(a(), c())), il(a(), meet(bb(), c())))),
        IterRMeet => (vec![], seq(meet(ir(bb(), a()), ir(c(), a())), ir(meet(bb(), c()), a()))),
        IterLUnfold => (vec![], seq(il(a(), bb()), meet(ldiv(a(), bb()), ldiv(a(), il(a(), bb()))))),
        IterRUnfold => (vec![], seq(ir(bb(), a()), meet(rdiv(bb(), a()), rdiv(ir(bb(), a()), a())))),
        IterLFold => (vec![], seq(meet(ldiv(a(), bb()), ldiv(a(), il(a(), bb()))), il(a(), bb()))),
        IterRFold => (vec![], seq(meet(rdiv(ir(bb(), a()), a()), rdiv(bb(), a())), ir(bb(), a()))),
        ResLDivIntro => (vec![seq(fuse(a(), bb()), c())], seq(bb(), ldiv(a(), c()))),
        ResLDivElim => (vec![seq(bb(), ldiv(a(), c()))], seq(fuse(a(), bb()), c())),
        ResRDivIntro => (vec![seq(fuse(a(), bb()), c())], seq(a(), rdiv(c(), bb()))),
        ResRDivElim => (vec![seq(a(), rdiv(c(), bb()))], seq(fuse(a(), bb()), c())),
        AndIntro => (vec![seq(a(), bb()), seq(a(), c())], seq(a(), meet(bb(), c()))),
        OrElim => (vec![seq(a(), c()), seq(bb(), c())], seq(join(a(), bb()), c())),
        Cut => (vec![seq(a(), bb()), seq(bb(), c())], seq(a(), c())),
        IterLMono => (vec![seq(a(), bb()), seq(c(), d())], seq(il(bb(), c()), il(a(), d()))),
        IterRMono => (vec![seq(a(), bb()), seq(c(), d())], seq(ir(c(), bb()), ir(d(), a()))),
        LoopInvL => (vec![seq(a(), ldiv(bb(), a()))], seq(a(), il(bb(), a()))),
        LoopInvR => (vec![seq(a(), rdiv(a(), bb()))], seq(a(), ir(a(), bb()))),
        WeakContraction => (vec![], seq(meet(a(), ldiv(a(), bb())), bb())),
        WeakCommutativity => (vec![], seq(fuse(a(), bb()), fuse(bb(), a()))),
    };
    debug_assert_eq!(premises.len(), schema.arity());
    Ok(Instance { premises, conclusion })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// 1-based position in the derivation.
    pub index: usize,
    pub sequent: Sequent,
    pub schema: SchemaId,
    pub bindings: Bindings,
    pub premises: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Derivation {
    pub steps: Vec<Step>,
}

impl Derivation {
    /// Sequent proved by the last step.
    pub fn conclusion(&self) -> Option<&Sequent> {
        self.steps.last().map(|s| &s.sequent)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&format!("{}. {} ; {}", step.index, step.sequent, step.schema));
            let binds: Vec<String> =
                step.bindings.iter().map(|(v, f)| format!("{}={}", v.name(), f)).collect();
            out.push_str(" ; ");
            out.push_str(&binds.join(" , "));
            if !step.premises.is_empty() {
                let ps: Vec<String> = step.premises.iter().map(usize::to_string).collect();
                out.push_str(&format!(" ; premises: {}", ps.join(",")));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Failure {
    #[error("extension disabled: {0}")]
    ExtensionDisabled(SchemaId),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error("{schema} takes {expected} premises, {found} given")]
    Arity { schema: SchemaId, expected: usize, found: usize },
    #[error("premise {premise} does not name an earlier step")]
    BadPremise { premise: usize },
    #[error("step index {found} out of sequence")]
    BadIndex { found: usize },
    #[error("conclusion should be `{expected}`, found `{found}`")]
    ConclusionMismatch { expected: Sequent, found: Sequent },
    #[error("premise {position} (step {premise}) should be `{expected}`, found `{found}`")]
    PremiseMismatch { position: usize, premise: usize, expected: Sequent, found: Sequent },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub ok: bool,
    pub first_failure: Option<(usize, Failure)>,
}

impl CheckReport {
    fn failed(step: usize, reason: Failure) -> Self {
        CheckReport { ok: false, first_failure: Some((step, reason)) }
    }
}

fn check_step(d: &Derivation, pos: usize, extensions: &BTreeSet<SchemaId>) -> Result<(), Failure> {
    let step = &d.steps[pos];
    if step.index != pos + 1 {
        return Err(Failure::BadIndex { found: step.index });
    }
    if step.schema.is_extension() && !extensions.contains(&step.schema) {
        return Err(Failure::ExtensionDisabled(step.schema));
    }
    if step.premises.len() != step.schema.arity() {
        return Err(Failure::Arity {
            schema: step.schema,
            expected: step.schema.arity(),
            found: step.premises.len(),
        });
    }
    if let Some(&premise) = step.premises.iter().find(|&&p| p == 0 || p >= step.index) {
        return Err(Failure::BadPremise { premise });
    }
    let inst = instantiate(step.schema, &step.bindings)?;
    if inst.conclusion != step.sequent {
        return Err(Failure::ConclusionMismatch { expected: inst.conclusion, found: step.sequent.clone() });
    }
    for (position, (&premise, expected)) in step.premises.iter().zip(inst.premises).enumerate() {
        let found = &d.steps[premise - 1].sequent;
        if *found != expected {
            return Err(Failure::PremiseMismatch {
                position: position + 1,
                premise,
                expected,
                found: found.clone(),
            });
        }
    }
    Ok(())
}

/// Checks every step in order and reports the first one that fails.
pub fn check_derivation(d: &Derivation, extensions: &BTreeSet<SchemaId>) -> CheckReport {
    for pos in 0..d.steps.len() {
        if let Err(reason) = check_step(d, pos, extensions) {
            return CheckReport::failed(d.steps[pos].index, reason);
        }
    }
    CheckReport { ok: true, first_failure: None }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: expected step {expected}, found {found}")]
    BadIndex { line: usize, expected: usize, found: usize },
    #[error("line {line}: step {step} cites premise {premise}, which is not an earlier step")]
    BadPremise { line: usize, step: usize, premise: usize },
    #[error("line {line}: unknown schema `{name}`")]
    UnknownSchema { line: usize, name: String },
    #[error("line {line}: {schema} takes {expected} premises, {found} given")]
    Arity { line: usize, schema: SchemaId, expected: usize, found: usize },
    #[error("line {line}: {source}")]
    Syntax { line: usize, source: ParseError },
}

fn parse_step(line: usize, text: &str, expected: usize) -> Result<Step, DerivationError> {
    let malformed = |reason: String| DerivationError::Malformed { line, reason };
    let syntax = |source| DerivationError::Syntax { line, source };
    let mut fields = text.split(';').map(str::trim);

    let head = fields.next().unwrap_or_default();
    let (idx, seq_text) = head.split_once('.').ok_or_else(|| malformed("expected `<index>. <sequent>`".into()))?;
    let index: usize = idx.trim().parse().map_err(|_| malformed(format!("bad step index `{}`", idx.trim())))?;
    if index != expected {
        return Err(DerivationError::BadIndex { line, expected, found: index });
    }
    let sequent = parse_sequent(seq_text).map_err(syntax)?;

    let name = fields.next().ok_or_else(|| malformed("missing schema name".into()))?;
    let schema: SchemaId =
        name.parse().map_err(|name| DerivationError::UnknownSchema { line, name })?;

    let mut bindings = Bindings::new();
    let mut premises = Vec::new();
    let mut seen_premises = false;
    for field in fields {
        if let Some(list) = field.strip_prefix("premises:") {
            if seen_premises {
                return Err(malformed("premises given twice".into()));
            }
            seen_premises = true;
            for p in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let p: usize = p.parse().map_err(|_| malformed(format!("bad premise `{p}`")))?;
                if p == 0 || p >= index {
                    return Err(DerivationError::BadPremise { line, step: index, premise: p });
                }
                premises.push(p);
            }
        } else if seen_premises {
            return Err(malformed("bindings must come before premises".into()));
        } else {
            for bind in field.split(',').map(str::trim).filter(|b| !b.is_empty()) {
                let (var, formula) =
                    bind.split_once('=').ok_or_else(|| malformed(format!("bad binding `{bind}`")))?;
                let var: Metavar = var.trim().parse().map_err(malformed)?;
                let formula = parse_formula(formula).map_err(syntax)?;
                if bindings.insert(var, formula).is_some() {
                    return Err(malformed(format!("{} bound twice", var.name())));
                }
            }
        }
    }
    if premises.len() != schema.arity() {
        return Err(DerivationError::Arity { line, schema, expected: schema.arity(), found: premises.len() });
    }
    Ok(Step { index, sequent, schema, bindings, premises })
}

pub fn parse_derivation(text: &str) -> Result<Derivation, DerivationError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        steps.push(parse_step(i + 1, line, steps.len() + 1)?);
    }
    Ok(Derivation { steps })
}

/// Derivations shipped with the crate, as `(file name, text)`.
pub const SHIPPED: &[(&str, &str)] = &[
    ("residuation.idp", include_str!("../data/proofs/residuation.idp")),
    ("iter_unfold.idp", include_str!("../data/proofs/iter_unfold.idp")),
    ("loop_invariance.idp", include_str!("../data/proofs/loop_invariance.idp")),
    ("meet_commutes.idp", include_str!("../data/proofs/meet_commutes.idp")),
    ("iter_r_monotone.idp", include_str!("../data/proofs/iter_r_monotone.idp")),
];

/// Every formula obtained from `f` by changing exactly one node: an atom is
/// renamed, `top` and `bot` swap, a connective is replaced by the next one.
pub fn single_node_mutants(f: &Formula) -> Vec<Formula> {
    let mut out = Vec::new();
    match f {
        Formula::Atom(name) => out.push(Formula::Atom(format!("{name}_m"))),
        Formula::Top => out.push(Formula::Bot),
        Formula::Bot => out.push(Formula::Top),
        _ => {
            let (op, l, r) = f.as_binary().expect("binary node");
            let pos = BinOp::ALL.iter().position(|&o| o == op).expect("listed");
            let next = BinOp::ALL[(pos + 1) % BinOp::ALL.len()];
            out.push(next.apply(l.clone(), r.clone()));
            out.extend(single_node_mutants(l).into_iter().map(|m| op.apply(m, r.clone())));
            out.extend(single_node_mutants(r).into_iter().map(|m| op.apply(l.clone(), m)));
        }
    }
    out
}

/// All single-node mutations of a derivation, over every formula of every
/// step (both sides of the sequent and every binding), tagged with the index
/// of the mutated step.
pub fn derivation_mutants(d: &Derivation) -> Vec<(usize, Derivation)> {
    let mut out = Vec::new();
    for (pos, step) in d.steps.iter().enumerate() {
        let mut push = |edit: &dyn Fn(&mut Step)| {
            let mut m = d.clone();
            edit(&mut m.steps[pos]);
            out.push((step.index, m));
        };
        for f in single_node_mutants(&step.sequent.lhs) {
            push(&|s: &mut Step| s.sequent.lhs = f.clone());
        }
        for f in single_node_mutants(&step.sequent.rhs) {
            push(&|s: &mut Step| s.sequent.rhs = f.clone());
        }
        for (&var, bound) in &step.bindings {
            for f in single_node_mutants(bound) {
                push(&|s: &mut Step| {
                    s.bindings.insert(var, f.clone());
                });
            }
        }
    }
    out
}
