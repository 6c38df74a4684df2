//! Formulas and sequents of the Lambek language with iterative division.
//!
//! Concrete syntax (ASCII):
//!
//! ```text
//! formula  := join ;
//! join     := meet { "|" meet } ;
//! meet     := binop { "&" binop } ;
//! binop    := unit [ ("*" | "\\" | "//" | "\" | "/") unit ] ;
//! unit     := atom | "top" | "bot" | "(" formula ")" ;
//! sequent  := formula "|-" formula ;
//! ```
//!
//! The product and the four division operators share one precedence level and
//! never associate: `p \ q \ r` is rejected, `p \ (q \ r)` is required. `&`
//! and `|` associate to the left. `#` starts a comment that runs to the end of
//! the line.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A formula tree. Equality is purely structural.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom(String),
    Top,
    Bot,
    Meet(Box<Formula>, Box<Formula>),
    Join(Box<Formula>, Box<Formula>),
    /// `l * r`
    Fuse(Box<Formula>, Box<Formula>),
    /// `l \ r`: left division, `l` is the input type.
    LDiv(Box<Formula>, Box<Formula>),
    /// `l / r`: right division, `r` is the input type.
    RDiv(Box<Formula>, Box<Formula>),
    /// `l \\ r`
    IterLDiv(Box<Formula>, Box<Formula>),
    /// `l // r`
    IterRDiv(Box<Formula>, Box<Formula>),
}

/// Finite set of formulas under structural equality.
pub type FormulaSet = BTreeSet<Formula>;

/// `lhs |- rhs`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequent {
    pub lhs: Formula,
    pub rhs: Formula,
}

impl Sequent {
    pub fn new(lhs: Formula, rhs: Formula) -> Self {
        Sequent { lhs, rhs }
    }

    /// Atom names occurring on either side, sorted.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = self.lhs.atoms();
        out.extend(self.rhs.atoms());
        out
    }
}

/// The binary connectives, used where code needs to treat them uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Meet,
    Join,
    Fuse,
    LDiv,
    RDiv,
    IterLDiv,
    IterRDiv,
}

impl BinOp {
    pub const ALL: [BinOp; 7] = [
        BinOp::Meet,
        BinOp::Join,
        BinOp::Fuse,
        BinOp::LDiv,
        BinOp::RDiv,
        BinOp::IterLDiv,
        BinOp::IterRDiv,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Meet => "&",
            BinOp::Join => "|",
            BinOp::Fuse => "*",
            BinOp::LDiv => "\\",
            BinOp::RDiv => "/",
            BinOp::IterLDiv => "\\\\",
            BinOp::IterRDiv => "//",
        }
    }

    fn level(self) -> u8 {
        match self {
            BinOp::Join => 0,
            BinOp::Meet => 1,
            _ => 2,
        }
    }

    pub fn apply(self, l: Formula, r: Formula) -> Formula {
        let (l, r) = (Box::new(l), Box::new(r));
        match self {
            BinOp::Meet => Formula::Meet(l, r),
            BinOp::Join => Formula::Join(l, r),
            BinOp::Fuse => Formula::Fuse(l, r),
            BinOp::LDiv => Formula::LDiv(l, r),
            BinOp::RDiv => Formula::RDiv(l, r),
            BinOp::IterLDiv => Formula::IterLDiv(l, r),
            BinOp::IterRDiv => Formula::IterRDiv(l, r),
        }
    }
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn meet(l: Formula, r: Formula) -> Self {
        BinOp::Meet.apply(l, r)
    }

    pub fn join(l: Formula, r: Formula) -> Self {
        BinOp::Join.apply(l, r)
    }

    pub fn fuse(l: Formula, r: Formula) -> Self {
        BinOp::Fuse.apply(l, r)
    }

    pub fn ldiv(l: Formula, r: Formula) -> Self {
        BinOp::LDiv.apply(l, r)
    }

    pub fn rdiv(l: Formula, r: Formula) -> Self {
        BinOp::RDiv.apply(l, r)
    }

    pub fn iter_ldiv(l: Formula, r: Formula) -> Self {
        BinOp::IterLDiv.apply(l, r)
    }

    pub fn iter_rdiv(l: Formula, r: Formula) -> Self {
        BinOp::IterRDiv.apply(l, r)
    }

    /// Splits a binary node into its connective and children.
    pub fn as_binary(&self) -> Option<(BinOp, &Formula, &Formula)> {
        let (op, l, r) = match self {
            Formula::Meet(l, r) => (BinOp::Meet, l, r),
            Formula::Join(l, r) => (BinOp::Join, l, r),
            Formula::Fuse(l, r) => (BinOp::Fuse, l, r),
            Formula::LDiv(l, r) => (BinOp::LDiv, l, r),
            Formula::RDiv(l, r) => (BinOp::RDiv, l, r),
            Formula::IterLDiv(l, r) => (BinOp::IterLDiv, l, r),
            Formula::IterRDiv(l, r) => (BinOp::IterRDiv, l, r),
            Formula::Atom(_) | Formula::Top | Formula::Bot => return None,
        };
        Some((op, l, r))
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.as_binary() {
            Some((_, l, r)) => 1 + l.size() + r.size(),
            None => 1,
        }
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(name) => {
                out.insert(name.clone());
            }
            Formula::Top | Formula::Bot => {}
            _ => {
                let (_, l, r) = self.as_binary().expect("binary node");
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// True if the formula mentions the ternary relation, i.e. contains a
    /// product or any division.
    pub fn is_relational(&self) -> bool {
        match self.as_binary() {
            None => false,
            Some((BinOp::Meet | BinOp::Join, l, r)) => l.is_relational() || r.is_relational(),
            Some(_) => true,
        }
    }

    fn level(&self) -> u8 {
        self.as_binary().map_or(3, |(op, _, _)| op.level())
    }

    fn render_into(&self, out: &mut String, min_level: u8) {
        let parens = self.level() < min_level;
        if parens {
            out.push('(');
        }
        match self {
            Formula::Atom(name) => out.push_str(name),
            Formula::Top => out.push_str("top"),
            Formula::Bot => out.push_str("bot"),
            _ => {
                let (op, l, r) = self.as_binary().expect("binary node");
                let (ll, rl) = match op.level() {
                    0 => (0, 1),
                    1 => (1, 2),
                    _ => (3, 3),
                };
                l.render_into(out, ll);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                r.render_into(out, rl);
            }
        }
        if parens {
            out.push(')');
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} |- {}", self.lhs, self.rhs)
    }
}

/// Renders with the fewest parentheses the grammar allows.
pub fn render_formula(f: &Formula) -> String {
    let mut out = String::new();
    f.render_into(&mut out, 0);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    Lexical { pos: usize, ch: char },
    #[error("operator `{op}` at offset {pos} continues a non-associative chain; add parentheses")]
    NonAssociative { pos: usize, op: &'static str },
    #[error("unbalanced parenthesis at offset {pos}")]
    Unbalanced { pos: usize },
    #[error("expected a formula at offset {pos}, found {found}")]
    Expected { pos: usize, found: String },
    #[error("unexpected {found} at offset {pos}")]
    Trailing { pos: usize, found: String },
    #[error("sequent is missing the `|-` separator")]
    MissingTurnstile,
    #[error("second `|-` separator at offset {pos}")]
    DuplicateTurnstile { pos: usize },
    #[error("`|-` is not allowed inside a formula (offset {pos})")]
    UnexpectedTurnstile { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Top,
    Bot,
    LParen,
    RParen,
    Op(BinOp),
    Turnstile,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("atom `{name}`"),
            Tok::Top => "`top`".into(),
            Tok::Bot => "`bot`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::Turnstile => "`|-`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

/// True for names matching `[a-z][a-z0-9_]*` that are not reserved words.
pub fn is_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
        && name != "top"
        && name != "bot"
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b'&' => (Tok::Op(BinOp::Meet), 1),
            b'*' => (Tok::Op(BinOp::Fuse), 1),
            b'|' if next == Some(b'-') => (Tok::Turnstile, 2),
            b'|' => (Tok::Op(BinOp::Join), 1),
            b'\\' if next == Some(b'\\') => (Tok::Op(BinOp::IterLDiv), 2),
            b'\\' => (Tok::Op(BinOp::LDiv), 1),
            b'/' if next == Some(b'/') => (Tok::Op(BinOp::IterRDiv), 2),
            b'/' => (Tok::Op(BinOp::RDiv), 1),
            b'a'..=b'z' => {
                let start = i;
                let mut end = i + 1;
                while end < bytes.len() && matches!(bytes[end], b'a'..=b'z' | b'0'..=b'9' | b'_') {
                    end += 1;
                }
                let word = &text[start..end];
                let tok = match word {
                    "top" => Tok::Top,
                    "bot" => Tok::Bot,
                    _ => Tok::Ident(word.to_string()),
                };
                (tok, end - start)
            }
            _ => {
                let ch = text[i..].chars().next().expect("in bounds");
                return Err(ParseError::Lexical { pos: i, ch });
            }
        };
        toks.push((i, tok));
        i += len;
    }
    toks.push((text.len(), Tok::End));
    Ok(toks)
}

struct Parser<'t> {
    toks: &'t [(usize, Tok)],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &(usize, Tok) {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn join(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.meet()?;
        while self.peek().1 == Tok::Op(BinOp::Join) {
            self.bump();
            acc = Formula::join(acc, self.meet()?);
        }
        Ok(acc)
    }

    fn meet(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.binop()?;
        while self.peek().1 == Tok::Op(BinOp::Meet) {
            self.bump();
            acc = Formula::meet(acc, self.binop()?);
        }
        Ok(acc)
    }

    fn binop(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unit()?;
        let op = match self.peek().1 {
            Tok::Op(op) if op.level() == 2 => op,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.unit()?;
        if let (pos, Tok::Op(next)) = self.peek() {
            if next.level() == 2 {
                return Err(ParseError::NonAssociative { pos: *pos, op: next.symbol() });
            }
        }
        Ok(op.apply(lhs, rhs))
    }

    fn unit(&mut self) -> Result<Formula, ParseError> {
        let (pos, tok) = self.bump().clone();
        match tok {
            Tok::Ident(name) => Ok(Formula::Atom(name)),
            Tok::Top => Ok(Formula::Top),
            Tok::Bot => Ok(Formula::Bot),
            Tok::LParen => {
                let inner = self.join()?;
                match self.peek().1 {
                    Tok::RParen => {
                        self.bump();
                        Ok(inner)
                    }
                    Tok::End => Err(ParseError::Unbalanced { pos }),
                    ref other => Err(ParseError::Trailing {
                        pos: self.peek().0,
                        found: other.describe(),
                    }),
                }
            }
            Tok::RParen => Err(ParseError::Unbalanced { pos }),
            Tok::Turnstile => Err(ParseError::UnexpectedTurnstile { pos }),
            other => Err(ParseError::Expected { pos, found: other.describe() }),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            (_, Tok::End) => Ok(()),
            (pos, Tok::RParen) => Err(ParseError::Unbalanced { pos: *pos }),
            (pos, Tok::Turnstile) => Err(ParseError::UnexpectedTurnstile { pos: *pos }),
            (pos, other) => Err(ParseError::Trailing { pos: *pos, found: other.describe() }),
        }
    }
}

fn parse_tokens(toks: &[(usize, Tok)]) -> Result<Formula, ParseError> {
    let mut p = Parser { toks, pos: 0 };
    let f = p.join()?;
    p.finish()?;
    Ok(f)
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    parse_tokens(&lex(text)?)
}

pub fn parse_sequent(text: &str) -> Result<Sequent, ParseError> {
    let toks = lex(text)?;
    let mut turnstiles = toks.iter().enumerate().filter(|(_, (_, t))| *t == Tok::Turnstile);
    let (split, _) = turnstiles.next().ok_or(ParseError::MissingTurnstile)?;
    if let Some((_, (pos, _))) = turnstiles.next() {
        return Err(ParseError::DuplicateTurnstile { pos: *pos });
    }
    let mut left = toks[..split].to_vec();
    left.push((toks[split].0, Tok::End));
    let lhs = parse_tokens(&left)?;
    let rhs = parse_tokens(&toks[split + 1..])?;
    Ok(Sequent { lhs, rhs })
}

/// All subtrees of `f`, including `f`.
pub fn subformulas(f: &Formula) -> FormulaSet {
    let mut out = FormulaSet::new();
    add_subformulas(f, &mut out);
    out
}

fn add_subformulas(f: &Formula, out: &mut FormulaSet) {
    if out.insert(f.clone()) {
        if let Some((_, l, r)) = f.as_binary() {
            add_subformulas(l, out);
            add_subformulas(r, out);
        }
    }
}

/// Smallest superset of `fs` that contains `top` and `bot`, is closed under
/// subformulas, and contains `a \ b` for every `a \\ b` and `b / a` for every
/// `b // a` it contains.
pub fn closure(fs: &FormulaSet) -> FormulaSet {
    let mut out = FormulaSet::new();
    let mut work: Vec<Formula> = fs.iter().cloned().collect();
    work.push(Formula::Top);
    work.push(Formula::Bot);
    while let Some(f) = work.pop() {
        if out.contains(&f) {
            continue;
        }
        match &f {
            Formula::IterLDiv(a, b) => work.push(Formula::LDiv(a.clone(), b.clone())),
            Formula::IterRDiv(b, a) => work.push(Formula::RDiv(b.clone(), a.clone())),
            _ => {}
        }
        if let Some((_, l, r)) = f.as_binary() {
            work.push(l.clone());
            work.push(r.clone());
        }
        out.insert(f);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("division depth must be at least 1")]
pub struct ZeroDepth;

/// `a \ (a \ ... (a \ b))` with `n` divisions.
pub fn expand_left_division(a: &Formula, b: &Formula, n: usize) -> Result<Formula, ZeroDepth> {
    if n == 0 {
        return Err(ZeroDepth);
    }
    let mut acc = Formula::ldiv(a.clone(), b.clone());
    for _ in 1..n {
        acc = Formula::ldiv(a.clone(), acc);
    }
    Ok(acc)
}

/// `((b / a) / a) ... / a` with `n` divisions.
pub fn expand_right_division(b: &Formula, a: &Formula, n: usize) -> Result<Formula, ZeroDepth> {
    if n == 0 {
        return Err(ZeroDepth);
    }
    let mut acc = Formula::rdiv(b.clone(), a.clone());
    for _ in 1..n {
        acc = Formula::rdiv(acc, a.clone());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Formula {
        Formula::atom("p")
    }
    fn q() -> Formula {
        Formula::atom("q")
    }
    fn r() -> Formula {
        Formula::atom("r")
    }

    #[test]
    fn parses_iterative_division() {
        assert_eq!(parse_formula("p \\\\ q").unwrap(), Formula::iter_ldiv(p(), q()));
        assert_eq!(parse_formula("q//p").unwrap(), Formula::iter_rdiv(q(), p()));
    }

    #[test]
    fn meet_binds_tighter_than_join() {
        assert_eq!(
            parse_formula("p & q | r").unwrap(),
            Formula::join(Formula::meet(p(), q()), r())
        );
        assert_eq!(
            parse_formula("p | q & r").unwrap(),
            Formula::join(p(), Formula::meet(q(), r()))
        );
    }

    #[test]
    fn lattice_ops_associate_left() {
        assert_eq!(
            parse_formula("p & q & r").unwrap(),
            Formula::meet(Formula::meet(p(), q()), r())
        );
    }

    #[test]
    fn division_chains_are_rejected() {
        assert!(matches!(
            parse_formula("p \\ q \\ r"),
            Err(ParseError::NonAssociative { pos: 6, op: "\\" })
        ));
        assert!(matches!(parse_formula("p * q // r"), Err(ParseError::NonAssociative { .. })));
        assert_eq!(
            parse_formula("p \\ (q \\ r)").unwrap(),
            Formula::ldiv(p(), Formula::ldiv(q(), r()))
        );
    }

    #[test]
    fn reports_lexical_and_paren_errors() {
        assert_eq!(parse_formula("p & Q"), Err(ParseError::Lexical { pos: 4, ch: 'Q' }));
        assert_eq!(parse_formula("(p & q"), Err(ParseError::Unbalanced { pos: 0 }));
        assert_eq!(parse_formula("p & q)"), Err(ParseError::Unbalanced { pos: 5 }));
        assert!(matches!(parse_formula(""), Err(ParseError::Expected { pos: 0, .. })));
        assert!(matches!(parse_formula("p q"), Err(ParseError::Trailing { pos: 2, .. })));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(parse_formula("p # trailing\n & q").unwrap(), Formula::meet(p(), q()));
    }

    #[test]
    fn sequents() {
        assert_eq!(
            parse_sequent("p & q |- p").unwrap(),
            Sequent::new(Formula::meet(p(), q()), p())
        );
        assert_eq!(
            parse_sequent("p \\\\ q |- p \\ q").unwrap(),
            Sequent::new(Formula::iter_ldiv(p(), q()), Formula::ldiv(p(), q()))
        );
        assert!(matches!(
            parse_sequent("p |- q |- r"),
            Err(ParseError::DuplicateTurnstile { pos: 7 })
        ));
        assert_eq!(parse_sequent("p & q"), Err(ParseError::MissingTurnstile));
        assert!(parse_sequent("|- p").is_err());
        assert!(matches!(parse_formula("p |- q"), Err(ParseError::UnexpectedTurnstile { .. })));
    }

    #[test]
    fn renders_minimally() {
        assert_eq!(render_formula(&Formula::iter_ldiv(p(), q())), "p \\\\ q");
        let f = Formula::meet(
            Formula::ldiv(p(), q()),
            Formula::ldiv(p(), Formula::iter_ldiv(p(), q())),
        );
        assert_eq!(render_formula(&f), "p \\ q & p \\ (p \\\\ q)");
        assert_eq!(render_formula(&Formula::Top), "top");
        let right_nested = Formula::join(p(), Formula::join(q(), r()));
        assert_eq!(render_formula(&right_nested), "p | (q | r)");
        let g = Formula::meet(Formula::join(p(), q()), r());
        assert_eq!(render_formula(&g), "(p | q) & r");
    }

    #[test]
    fn subformula_sets() {
        assert_eq!(subformulas(&p()), FormulaSet::from([p()]));
        let m = Formula::meet(p(), q());
        assert_eq!(subformulas(&m), FormulaSet::from([m.clone(), p(), q()]));
        let it = Formula::iter_ldiv(p(), q());
        assert_eq!(subformulas(&it), FormulaSet::from([it.clone(), p(), q()]));
    }

    #[test]
    fn closure_adds_one_step_divisions() {
        let it = Formula::iter_ldiv(p(), q());
        let expected = FormulaSet::from([
            it.clone(),
            Formula::ldiv(p(), q()),
            p(),
            q(),
            Formula::Top,
            Formula::Bot,
        ]);
        assert_eq!(closure(&FormulaSet::from([it])), expected);

        assert_eq!(closure(&FormulaSet::new()), FormulaSet::from([Formula::Top, Formula::Bot]));

        let rt = Formula::iter_rdiv(q(), p());
        let expected = FormulaSet::from([
            rt.clone(),
            Formula::rdiv(q(), p()),
            q(),
            p(),
            Formula::Top,
            Formula::Bot,
        ]);
        assert_eq!(closure(&FormulaSet::from([rt])), expected);
    }

    #[test]
    fn division_expansions() {
        assert_eq!(expand_left_division(&p(), &q(), 1).unwrap(), Formula::ldiv(p(), q()));
        assert_eq!(
            expand_left_division(&p(), &q(), 2).unwrap(),
            Formula::ldiv(p(), Formula::ldiv(p(), q()))
        );
        assert_eq!(render_formula(&expand_left_division(&p(), &q(), 3).unwrap()), "p \\ (p \\ (p \\ q))");
        assert_eq!(expand_right_division(&q(), &p(), 1).unwrap(), Formula::rdiv(q(), p()));
        assert_eq!(
            expand_right_division(&q(), &p(), 2).unwrap(),
            Formula::rdiv(Formula::rdiv(q(), p()), p())
        );
        assert_eq!(render_formula(&expand_right_division(&q(), &p(), 3).unwrap()), "((q / p) / p) / p");
        assert_eq!(expand_left_division(&p(), &q(), 0), Err(ZeroDepth));
        assert_eq!(expand_right_division(&q(), &p(), 0), Err(ZeroDepth));
    }

    #[test]
    fn atom_name_rule() {
        assert!(is_atom_name("p"));
        assert!(is_atom_name("p_1"));
        assert!(!is_atom_name("top"));
        assert!(!is_atom_name("1p"));
        assert!(!is_atom_name("P"));
        assert!(!is_atom_name(""));
    }
}
