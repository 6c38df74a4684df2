//! Evaluates a sequent on one frame under many valuations at once.
//!
//! With `n` states and `k` atoms there are `2^(n*k)` valuations; valuation
//! `v` puts state `s` into atom `j` iff bit `j*n + s` of `v` is set. Every
//! (subformula, state) pair gets a bit vector with one bit per valuation, so
//! each connective becomes a handful of word operations. Valuations are
//! processed in chunks of at most `CHUNK_WORDS * 64`.

use std::collections::HashMap;

use crate::semantics::Triple;
use crate::syntax::{Formula, Sequent};

const CHUNK_WORDS: usize = 64;

/// Bit `p` of the in-word offset, for `p < 6`.
const LOW_PATTERNS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[derive(Debug, Clone, Copy)]
enum Node {
    Atom(usize),
    Top,
    Bot,
    Meet(usize, usize),
    Join(usize, usize),
    /// input, rest
    Fuse(usize, usize),
    /// input, result
    LDiv(usize, usize),
    /// result, input
    RDiv(usize, usize),
    IterL(usize, usize),
    IterR(usize, usize),
}

/// A sequent flattened into shared subformula nodes, children first.
#[derive(Debug, Clone)]
pub struct Program {
    nodes: Vec<Node>,
    lhs: usize,
    rhs: usize,
    atoms: Vec<String>,
    relational: bool,
}

impl Program {
    pub fn compile(sq: &Sequent) -> Self {
        let atoms: Vec<String> = sq.atoms().into_iter().collect();
        let mut prog = Program { nodes: Vec::new(), lhs: 0, rhs: 0, atoms, relational: false };
        let mut memo = HashMap::new();
        prog.lhs = prog.add(&sq.lhs, &mut memo);
        prog.rhs = prog.add(&sq.rhs, &mut memo);
        prog.relational = sq.lhs.is_relational() || sq.rhs.is_relational();
        prog
    }

    fn add(&mut self, f: &Formula, memo: &mut HashMap<Formula, usize>) -> usize {
        if let Some(&i) = memo.get(f) {
            return i;
        }
        let node = match f {
            Formula::Atom(name) => {
                Node::Atom(self.atoms.iter().position(|a| a == name).expect("atom collected"))
            }
            Formula::Top => Node::Top,
            Formula::Bot => Node::Bot,
            Formula::Meet(l, r) => Node::Meet(self.add(l, memo), self.add(r, memo)),
            Formula::Join(l, r) => Node::Join(self.add(l, memo), self.add(r, memo)),
            Formula::Fuse(l, r) => Node::Fuse(self.add(l, memo), self.add(r, memo)),
            Formula::LDiv(l, r) => Node::LDiv(self.add(l, memo), self.add(r, memo)),
            Formula::RDiv(l, r) => Node::RDiv(self.add(l, memo), self.add(r, memo)),
            Formula::IterLDiv(l, r) => Node::IterL(self.add(l, memo), self.add(r, memo)),
            Formula::IterRDiv(l, r) => Node::IterR(self.add(l, memo), self.add(r, memo)),
        };
        self.nodes.push(node);
        memo.insert(f.clone(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    /// Atom names in valuation-bit order.
    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    /// False if no connective consults the relation, so every frame of a
    /// given size behaves identically.
    pub fn is_relational(&self) -> bool {
        self.relational
    }
}

/// A falsifying valuation and state found by [`Evaluator::check_chunk`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Falsified {
    pub valuation: u64,
    pub state: usize,
}

/// Scratch space for evaluating one program on models of one size.
pub struct Evaluator<'p> {
    prog: &'p Program,
    n: usize,
    words: usize,
    chunks: u64,
    valid: u64,
    vals: Vec<u64>,
    reach: Vec<u64>,
    triples: Vec<Triple>,
    loaded_chunk: Option<u64>,
}

impl<'p> Evaluator<'p> {
    /// `None` when `n * atoms` is too large to index valuations by `u64`.
    pub fn new(prog: &'p Program, n: usize) -> Option<Self> {
        let vbits = n * prog.atoms.len();
        if vbits > 62 {
            return None;
        }
        let total_words = if vbits < 6 { 1u64 } else { 1u64 << (vbits - 6) };
        let words = total_words.min(CHUNK_WORDS as u64) as usize;
        let valid = if vbits < 6 { (1u64 << (1u32 << vbits)) - 1 } else { !0 };
        Some(Evaluator {
            prog,
            n,
            words,
            chunks: total_words / words as u64,
            valid,
            vals: vec![0; prog.nodes.len() * n * words],
            reach: vec![0; n * n * words],
            triples: Vec::with_capacity(n * n * n),
            loaded_chunk: None,
        })
    }

    /// Number of valuation chunks per frame.
    pub fn chunks(&self) -> u64 {
        self.chunks
    }

    pub fn set_frame(&mut self, triples: impl Iterator<Item = Triple>) {
        self.triples.clear();
        self.triples.extend(triples);
    }

    fn load_atoms(&mut self, chunk: u64) {
        if self.loaded_chunk == Some(chunk) {
            return;
        }
        let (n, w) = (self.n, self.words);
        let stride = n * w;
        let base = chunk * (w as u64) * 64;
        for (i, node) in self.prog.nodes.iter().enumerate() {
            let out = &mut self.vals[i * stride..(i + 1) * stride];
            match *node {
                Node::Atom(j) => {
                    for s in 0..n {
                        let p = j * n + s;
                        for k in 0..w {
                            out[s * w + k] = if p < 6 {
                                LOW_PATTERNS[p]
                            } else if (base + 64 * k as u64) >> p & 1 == 1 {
                                !0
                            } else {
                                0
                            };
                        }
                    }
                }
                Node::Top => out.fill(!0),
                Node::Bot => out.fill(0),
                _ => {}
            }
        }
        self.loaded_chunk = Some(chunk);
    }

    /// Evaluates the current frame on valuation chunk `chunk` and returns the
    /// least falsifying valuation in it, with the least falsified state.
    pub fn check_chunk(&mut self, chunk: u64) -> Option<Falsified> {
        self.load_atoms(chunk);
        macro_rules! dispatch {
            ($($n:literal),*) => {
                match self.n {
                    $($n => match self.words {
                        1 => self.eval::<$n, 1>(chunk),
                        2 => self.eval::<$n, 2>(chunk),
                        4 => self.eval::<$n, 4>(chunk),
                        8 => self.eval::<$n, 8>(chunk),
                        16 => self.eval::<$n, 16>(chunk),
                        32 => self.eval::<$n, 32>(chunk),
                        64 => self.eval::<$n, 64>(chunk),
                        w => unreachable!("chunk width {w} is a power of two up to 64"),
                    },)*
                    _ => self.eval_any(chunk),
                }
            };
        }
        dispatch!(1, 2, 3, 4, 5)
    }

    /// Fallback for state counts without a specialized kernel.
    fn eval_any(&mut self, chunk: u64) -> Option<Falsified> {
        match self.words {
            1 => self.eval_n::<1>(self.n, chunk),
            2 => self.eval_n::<2>(self.n, chunk),
            4 => self.eval_n::<4>(self.n, chunk),
            8 => self.eval_n::<8>(self.n, chunk),
            16 => self.eval_n::<16>(self.n, chunk),
            32 => self.eval_n::<32>(self.n, chunk),
            64 => self.eval_n::<64>(self.n, chunk),
            w => unreachable!("chunk width {w} is a power of two up to 64"),
        }
    }

    fn eval<const N: usize, const W: usize>(&mut self, chunk: u64) -> Option<Falsified> {
        self.eval_n::<W>(N, chunk)
    }

    #[inline(always)]
    fn eval_n<const W: usize>(&mut self, n: usize, chunk: u64) -> Option<Falsified> {
        let stride = n * W;
        for i in 0..self.prog.nodes.len() {
            let (done, rest) = self.vals.split_at_mut(i * stride);
            let out = rest[..stride].as_chunks_mut::<W>().0;
            let node = |j: usize| done[j * stride..(j + 1) * stride].as_chunks::<W>().0;
            match self.prog.nodes[i] {
                Node::Atom(_) | Node::Top | Node::Bot => {}
                Node::Meet(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(node(a)).zip(node(b)) {
                        for k in 0..W {
                            o[k] = x[k] & y[k];
                        }
                    }
                }
                Node::Join(a, b) => {
                    for ((o, x), y) in out.iter_mut().zip(node(a)).zip(node(b)) {
                        for k in 0..W {
                            o[k] = x[k] | y[k];
                        }
                    }
                }
                Node::Fuse(a, b) => {
                    let (da, db) = (node(a), node(b));
                    out.fill([0; W]);
                    for &[t, u, s] in &self.triples {
                        for k in 0..W {
                            out[s][k] |= da[t][k] & db[u][k];
                        }
                    }
                }
                Node::LDiv(a, b) => {
                    let (da, db) = (node(a), node(b));
                    out.fill([!0; W]);
                    for &[t, s, u] in &self.triples {
                        for k in 0..W {
                            out[s][k] &= !da[t][k] | db[u][k];
                        }
                    }
                }
                Node::RDiv(b, a) => {
                    let (da, db) = (node(a), node(b));
                    out.fill([!0; W]);
                    for &[s, t, u] in &self.triples {
                        for k in 0..W {
                            out[s][k] &= !da[t][k] | db[u][k];
                        }
                    }
                }
                Node::IterL(a, b) | Node::IterR(b, a) => {
                    let left = matches!(self.prog.nodes[i], Node::IterL(..));
                    let (da, db) = (node(a), node(b));
                    let reach = self.reach[..n * n * W].as_chunks_mut::<W>().0;
                    reach.fill([0; W]);
                    for &[x, y, u] in &self.triples {
                        let (input, from) = if left { (x, y) } else { (y, x) };
                        for k in 0..W {
                            reach[from * n + u][k] |= da[input][k];
                        }
                    }
                    // Warshall: transitive closure of the step relation, per valuation bit.
                    for m in 0..n {
                        for s in 0..n {
                            let sm = reach[s * n + m];
                            for t in 0..n {
                                let mt = reach[m * n + t];
                                let st = &mut reach[s * n + t];
                                for k in 0..W {
                                    st[k] |= sm[k] & mt[k];
                                }
                            }
                        }
                    }
                    out.fill([!0; W]);
                    for (s, o) in out.iter_mut().enumerate() {
                        for t in 0..n {
                            let st = &reach[s * n + t];
                            for k in 0..W {
                                o[k] &= !st[k] | db[t][k];
                            }
                        }
                    }
                }
            }
        }

        let view = |j: usize| self.vals[j * stride..(j + 1) * stride].as_chunks::<W>().0;
        let (lhs, rhs) = (view(self.prog.lhs), view(self.prog.rhs));
        for k in 0..W {
            let mut bad = 0u64;
            for s in 0..n {
                bad |= lhs[s][k] & !rhs[s][k];
            }
            bad &= self.valid;
            if bad != 0 {
                let bit = bad.trailing_zeros();
                let state = (0..n)
                    .find(|&s| (lhs[s][k] & !rhs[s][k]) >> bit & 1 == 1)
                    .expect("some state is falsified");
                let valuation = chunk * (W as u64) * 64 + 64 * k as u64 + bit as u64;
                return Some(Falsified { valuation, state });
            }
        }
        None
    }

    /// Least falsifying valuation of the current frame, over all chunks.
    pub fn check_frame(&mut self) -> Option<Falsified> {
        (0..self.chunks).find_map(|c| self.check_chunk(c))
    }
}
