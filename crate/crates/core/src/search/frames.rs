//! Canonical ordering of ternary relations over `n` states.
//!
//! A relation is a bit mask with bit `a*n*n + b*n + c` standing for `R a b c`.
//! Frame properties force some bits on and tie others together (commutativity
//! ties `(a, b, c)` to `(b, a, c)`). The remaining free orbits are ordered by
//! their highest bit, so counting up through the free orbits visits the
//! admissible masks in increasing numeric order.

use std::collections::BTreeSet;

use crate::semantics::{FrameProperty, Triple};

/// Largest state count whose relation mask fits the `u128` counter.
pub const MAX_ENUMERABLE_STATES: usize = 5;

/// Largest state count for which isomorphism pruning tables are built.
const MAX_PRUNED_STATES: usize = 4;

#[derive(Debug, Clone)]
pub struct FrameSpace {
    n: usize,
    forced: u128,
    /// Free orbits, ascending by highest bit.
    orbits: Vec<u128>,
    triples: Vec<Triple>,
}

impl FrameSpace {
    /// `None` when `n` is zero or `n^3` exceeds 128 bits.
    pub fn new(n: usize, props: &BTreeSet<FrameProperty>) -> Option<Self> {
        if n == 0 || n > MAX_ENUMERABLE_STATES {
            return None;
        }
        let bits = n * n * n;
        let index = |a: usize, b: usize, c: usize| a * n * n + b * n + c;
        let triples: Vec<Triple> = (0..bits).map(|i| [i / (n * n), (i / n) % n, i % n]).collect();

        let commutative = props.contains(&FrameProperty::Commutative);
        let mut forced = 0u128;
        if props.contains(&FrameProperty::Reflexive) {
            for s in 0..n {
                forced |= 1 << index(s, s, s);
            }
        }
        let mut seen = 0u128;
        let mut orbits = Vec::new();
        for (i, &[a, b, c]) in triples.iter().enumerate() {
            if seen >> i & 1 == 1 {
                continue;
            }
            let mut orbit = 1u128 << i;
            if commutative {
                orbit |= 1 << index(b, a, c);
            }
            seen |= orbit;
            if orbit & forced != 0 {
                forced |= orbit;
            } else {
                orbits.push(orbit);
            }
        }
        orbits.sort_by_key(|o| 127 - o.leading_zeros());
        Some(FrameSpace { n, forced, orbits, triples })
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn free_orbits(&self) -> usize {
        self.orbits.len()
    }

    /// Number of admissible relations; `None` if it does not fit in `u128`.
    pub fn count(&self) -> Option<u128> {
        1u128.checked_shl(self.orbits.len() as u32)
    }

    /// The `index`-th admissible relation mask in increasing order.
    pub fn frame(&self, index: u128) -> u128 {
        let mut mask = self.forced;
        let mut rest = index;
        let mut k = 0;
        while rest != 0 {
            if rest & 1 == 1 {
                mask |= self.orbits[k];
            }
            rest >>= 1;
            k += 1;
        }
        mask
    }

    /// The relation after `mask`, where `mask == self.frame(index)`. Only the
    /// orbits whose counter bits flip are toggled.
    pub fn next_frame(&self, index: u128, mask: u128) -> u128 {
        let mut flipped = index ^ (index + 1);
        let mut next = mask;
        while flipped != 0 {
            next ^= self.orbits[flipped.trailing_zeros() as usize];
            flipped &= flipped - 1;
        }
        next
    }

    pub fn triple(&self, bit: usize) -> Triple {
        self.triples[bit]
    }

    pub fn triples_of(&self, mask: u128) -> impl Iterator<Item = Triple> + '_ {
        let mut m = mask;
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(self.triples[i])
        })
    }
}

/// Recognizes the least mask of each isomorphism class of relations.
pub struct IsoFilter {
    /// `tables[p][chunk][byte]` is the image of `byte << 8*chunk` under
    /// permutation `p` (identity excluded).
    tables: Vec<Vec<[u64; 256]>>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

impl IsoFilter {
    /// `None` when `n` is too large for the lookup tables.
    pub fn new(n: usize) -> Option<Self> {
        if n == 0 || n > MAX_PRUNED_STATES {
            return None;
        }
        let bits = n * n * n;
        let chunks = bits.div_ceil(8);
        let tables = permutations(n)
            .into_iter()
            .filter(|p| p.iter().enumerate().any(|(i, &j)| i != j))
            .map(|p| {
                let image = |bit: usize| {
                    let (a, b, c) = (bit / (n * n), (bit / n) % n, bit % n);
                    p[a] * n * n + p[b] * n + p[c]
                };
                (0..chunks)
                    .map(|chunk| {
                        let mut table = [0u64; 256];
                        for (byte, slot) in table.iter_mut().enumerate() {
                            for k in 0..8 {
                                let bit = chunk * 8 + k;
                                if byte >> k & 1 == 1 && bit < bits {
                                    *slot |= 1 << image(bit);
                                }
                            }
                        }
                        table
                    })
                    .collect()
            })
            .collect();
        Some(IsoFilter { tables })
    }

    /// True if no state permutation maps `mask` to a smaller mask.
    pub fn is_canonical(&self, mask: u128) -> bool {
        let mask = mask as u64;
        self.tables.iter().all(|chunks| {
            let image = chunks
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, table)| acc | table[(mask >> (8 * i)) as usize & 0xff]);
            image >= mask
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(ps: &[FrameProperty]) -> BTreeSet<FrameProperty> {
        ps.iter().copied().collect()
    }

    /// Brute force: every mask in order, filtered by the property definitions.
    fn naive_frames(n: usize, ps: &[FrameProperty]) -> Vec<u128> {
        let bits = n * n * n;
        let has = |m: u128, a: usize, b: usize, c: usize| m >> (a * n * n + b * n + c) & 1 == 1;
        (0..1u128 << bits)
            .filter(|&m| {
                ps.iter().all(|p| match p {
                    FrameProperty::Reflexive => (0..n).all(|s| has(m, s, s, s)),
                    FrameProperty::Commutative => (0..bits).all(|i| {
                        let (a, b, c) = (i / (n * n), (i / n) % n, i % n);
                        !has(m, a, b, c) || has(m, b, a, c)
                    }),
                })
            })
            .collect()
    }

    #[test]
    fn ordered_enumeration_matches_filtered_count_up() {
        use FrameProperty::*;
        for n in 1..=2 {
            for ps in [vec![], vec![Reflexive], vec![Commutative], vec![Reflexive, Commutative]] {
                let space = FrameSpace::new(n, &props(&ps)).unwrap();
                let ours: Vec<u128> = (0..space.count().unwrap()).map(|i| space.frame(i)).collect();
                assert_eq!(ours, naive_frames(n, &ps), "n={n} props={ps:?}");
            }
        }
    }

    #[test]
    fn stepping_agrees_with_direct_indexing() {
        use FrameProperty::*;
        for ps in [vec![], vec![Reflexive], vec![Commutative], vec![Reflexive, Commutative]] {
            let space = FrameSpace::new(2, &props(&ps)).unwrap();
            let mut mask = space.frame(0);
            for i in 0..space.count().unwrap() - 1 {
                mask = space.next_frame(i, mask);
                assert_eq!(mask, space.frame(i + 1));
            }
        }
    }

    #[test]
    fn orbit_counts_for_three_states() {
        use FrameProperty::*;
        assert_eq!(FrameSpace::new(3, &props(&[])).unwrap().free_orbits(), 27);
        assert_eq!(FrameSpace::new(3, &props(&[Reflexive])).unwrap().free_orbits(), 24);
        assert_eq!(FrameSpace::new(3, &props(&[Commutative])).unwrap().free_orbits(), 18);
        assert_eq!(FrameSpace::new(3, &props(&[Reflexive, Commutative])).unwrap().free_orbits(), 15);
    }

    #[test]
    fn size_limits() {
        assert!(FrameSpace::new(0, &props(&[])).is_none());
        assert!(FrameSpace::new(6, &props(&[])).is_none());
        assert_eq!(FrameSpace::new(5, &props(&[])).unwrap().count(), Some(1 << 125));
        assert!(IsoFilter::new(5).is_none());
    }

    #[test]
    fn iso_filter_keeps_one_mask_per_class() {
        let n = 2;
        let filter = IsoFilter::new(n).unwrap();
        let kept = (0..256u128).filter(|&m| filter.is_canonical(m)).count();
        // Orbit count of 2^8 relations on two states under the swap, by Burnside:
        // the swap fixes the 4 pairs {(a,b,c),(~a,~b,~c)} so (256 + 16) / 2.
        assert_eq!(kept, 136);
        assert!(filter.is_canonical(0));
    }

    #[test]
    fn triples_decode_in_order() {
        let space = FrameSpace::new(2, &props(&[])).unwrap();
        let got: Vec<Triple> = space.triples_of(0b1000_0001).collect();
        assert_eq!(got, vec![[0, 0, 0], [1, 1, 1]]);
    }
}
