//! Finite cover combinatorics: the nerve of declared-nonempty
//! intersections, and scalar 2-cochains indexed by its triples.

use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NerveError {
    #[error("pair ({0},{1}) uses an undeclared index")]
    UnknownIndex(u32, u32),
    #[error("triple ({0},{1},{2}) declared without its pair ({3},{4})")]
    MissingPair(u32, u32, u32, u32, u32),
    #[error("quadruple ({0},{1},{2},{3}) declared without its triple ({4},{5},{6})")]
    MissingTriple(u32, u32, u32, u32, u32, u32, u32),
    #[error("simplex with repeated index")]
    Degenerate,
    #[error("nerves differ")]
    NerveMismatch,
    #[error("cocycle value at ({0},{1},{2}) is zero")]
    ZeroValue(u32, u32, u32),
    #[error("triple ({0},{1},{2}) is not declared in the nerve")]
    UndeclaredTriple(u32, u32, u32),
}

/// Simplices are stored with ascending indices; tuples in any
/// orientation resolve to their sorted form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Nerve {
    indices: Vec<u32>,
    pairs: BTreeSet<(u32, u32)>,
    triples: BTreeSet<(u32, u32, u32)>,
    quads: BTreeSet<(u32, u32, u32, u32)>,
}

fn sort2(a: u32, b: u32) -> (u32, u32) {
    if a <= b { (a, b) } else { (b, a) }
}

fn sort3(a: u32, b: u32, c: u32) -> (u32, u32, u32) {
    let mut v = [a, b, c];
    v.sort_unstable();
    (v[0], v[1], v[2])
}

fn sort4(a: u32, b: u32, c: u32, d: u32) -> (u32, u32, u32, u32) {
    let mut v = [a, b, c, d];
    v.sort_unstable();
    (v[0], v[1], v[2], v[3])
}

impl Nerve {
    /// Validates the closure rules: every quadruple's triples and every
    /// triple's pairs must be declared.
    pub fn new(
        indices: Vec<u32>,
        pairs: Vec<(u32, u32)>,
        triples: Vec<(u32, u32, u32)>,
        quads: Vec<(u32, u32, u32, u32)>,
    ) -> Result<Self, NerveError> {
        let mut idx = indices;
        idx.sort_unstable();
        idx.dedup();
        let index_set: BTreeSet<u32> = idx.iter().copied().collect();
        let mut ps = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(NerveError::Degenerate);
            }
            if !index_set.contains(&a) || !index_set.contains(&b) {
                return Err(NerveError::UnknownIndex(a, b));
            }
            ps.insert(sort2(a, b));
        }
        let mut ts = BTreeSet::new();
        for (a, b, c) in triples {
            if a == b || a == c || b == c {
                return Err(NerveError::Degenerate);
            }
            let (a, b, c) = sort3(a, b, c);
            for (p, q) in [(a, b), (a, c), (b, c)] {
                if !ps.contains(&(p, q)) {
                    return Err(NerveError::MissingPair(a, b, c, p, q));
                }
            }
            ts.insert((a, b, c));
        }
        let mut qs = BTreeSet::new();
        for (a, b, c, d) in quads {
            let (a, b, c, d) = sort4(a, b, c, d);
            if a == b || b == c || c == d {
                return Err(NerveError::Degenerate);
            }
            for t in [(a, b, c), (a, b, d), (a, c, d), (b, c, d)] {
                if !ts.contains(&t) {
                    return Err(NerveError::MissingTriple(a, b, c, d, t.0, t.1, t.2));
                }
            }
            qs.insert((a, b, c, d));
        }
        Ok(Nerve { indices: idx, pairs: ps, triples: ts, quads: qs })
    }

    /// The full k-skeleton on `n` indices `1..=n`, up to quadruples.
    pub fn complete(n: u32) -> Self {
        let indices: Vec<u32> = (1..=n).collect();
        let mut pairs = Vec::new();
        let mut triples = Vec::new();
        let mut quads = Vec::new();
        for a in 1..=n {
            for b in (a + 1)..=n {
                pairs.push((a, b));
                for c in (b + 1)..=n {
                    triples.push((a, b, c));
                    for d in (c + 1)..=n {
                        quads.push((a, b, c, d));
                    }
                }
            }
        }
        Nerve::new(indices, pairs, triples, quads).unwrap()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn triples(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.triples.iter().copied()
    }

    pub fn quads(&self) -> impl Iterator<Item = (u32, u32, u32, u32)> + '_ {
        self.quads.iter().copied()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn has_pair(&self, i: u32, j: u32) -> bool {
        i == j || self.pairs.contains(&sort2(i, j))
    }

    pub fn has_triple(&self, i: u32, j: u32, k: u32) -> bool {
        self.triples.contains(&sort3(i, j, k))
    }
}

/// The sign of the permutation sorting a triple; `None` on repeats.
fn orientation_sign(i: u32, j: u32, k: u32) -> Option<bool> {
    if i == j || j == k || i == k {
        return None;
    }
    let mut inversions = 0;
    let v = [i, j, k];
    for a in 0..3 {
        for b in (a + 1)..3 {
            if v[a] > v[b] {
                inversions += 1;
            }
        }
    }
    Some(inversions % 2 == 0)
}

/// A nonvanishing scalar 2-cochain on the nerve's triples, stored for
/// ascending orientation; other orientations resolve alternately
/// (odd permutations invert the value), degenerate entries are 1.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ScalarCocycle {
    nerve: Nerve,
    values: BTreeMap<(u32, u32, u32), Scalar>,
}

impl ScalarCocycle {
    pub fn new(
        nerve: &Nerve,
        values: BTreeMap<(u32, u32, u32), Scalar>,
    ) -> Result<Self, NerveError> {
        let mut canon = BTreeMap::new();
        for ((i, j, k), v) in values {
            if v.is_zero() {
                return Err(NerveError::ZeroValue(i, j, k));
            }
            let even = orientation_sign(i, j, k).ok_or(NerveError::Degenerate)?;
            let key = sort3(i, j, k);
            if !nerve.has_triple(key.0, key.1, key.2) {
                return Err(NerveError::UndeclaredTriple(i, j, k));
            }
            let stored = if even { v } else { v.inv().expect("nonzero") };
            canon.insert(key, stored);
        }
        Ok(ScalarCocycle { nerve: nerve.clone(), values: canon })
    }

    pub fn trivial(nerve: &Nerve) -> Self {
        ScalarCocycle { nerve: nerve.clone(), values: BTreeMap::new() }
    }

    pub fn nerve(&self) -> &Nerve {
        &self.nerve
    }

    /// Value in any orientation; 1 on degenerate or unset triples.
    pub fn value(&self, i: u32, j: u32, k: u32) -> Scalar {
        match orientation_sign(i, j, k) {
            None => Scalar::one(),
            Some(even) => {
                let v = self
                    .values
                    .get(&sort3(i, j, k))
                    .cloned()
                    .unwrap_or_else(Scalar::one);
                if even {
                    v
                } else {
                    v.inv().expect("nonzero by construction")
                }
            }
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(u32, u32, u32), &Scalar)> {
        self.values.iter()
    }

    pub fn inverse(&self) -> Self {
        ScalarCocycle {
            nerve: self.nerve.clone(),
            values: self
                .values
                .iter()
                .map(|(k, v)| (*k, v.inv().expect("nonzero")))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, NerveError> {
        if self.nerve != other.nerve {
            return Err(NerveError::NerveMismatch);
        }
        let mut values = BTreeMap::new();
        let keys: BTreeSet<_> = self.values.keys().chain(other.values.keys()).collect();
        for &(i, j, k) in keys {
            let v = &self.value(i, j, k) * &other.value(i, j, k);
            if !v.is_one() {
                values.insert((i, j, k), v);
            }
        }
        Ok(ScalarCocycle { nerve: self.nerve.clone(), values })
    }

    /// Violations of `c_ijk c_ikl = c_jkl c_ijl` over declared quadruples.
    pub fn cocycle_violations(&self) -> Vec<(u32, u32, u32, u32)> {
        self.nerve
            .quads()
            .filter(|&(i, j, k, l)| {
                let lhs = &self.value(i, j, k) * &self.value(i, k, l);
                let rhs = &self.value(j, k, l) * &self.value(i, j, l);
                lhs != rhs
            })
            .collect()
    }

    pub fn is_cocycle(&self) -> bool {
        self.cocycle_violations().is_empty()
    }

    /// The coboundary `d_ij d_jk / d_ik` of a 1-cochain on pairs
    /// (missing pairs count as 1).
    pub fn coboundary(nerve: &Nerve, d: &BTreeMap<(u32, u32), Scalar>) -> Self {
        let dv = |i: u32, j: u32| -> Scalar {
            d.get(&sort2(i, j)).cloned().unwrap_or_else(Scalar::one)
        };
        let mut values = BTreeMap::new();
        for (i, j, k) in nerve.triples() {
            let v = &(&dv(i, j) * &dv(j, k)) * &dv(i, k).inv().expect("nonzero");
            if !v.is_one() {
                values.insert((i, j, k), v);
            }
        }
        ScalarCocycle { nerve: nerve.clone(), values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_is_enforced() {
        assert!(Nerve::new(vec![1, 2, 3], vec![(1, 2), (2, 3)], vec![(1, 2, 3)], vec![]).is_err());
        assert!(Nerve::new(
            vec![1, 2, 3],
            vec![(1, 2), (2, 3), (1, 3)],
            vec![(1, 2, 3)],
            vec![]
        )
        .is_ok());
        let tetra = Nerve::complete(4);
        assert_eq!(tetra.n_pairs(), 6);
        assert_eq!(tetra.quads().count(), 1);
    }

    #[test]
    fn orientation_resolution() {
        let n = Nerve::complete(3);
        let two = Scalar::from_int(2);
        let c = ScalarCocycle::new(&n, [((1, 2, 3), two.clone())].into()).unwrap();
        assert_eq!(c.value(1, 2, 3), two);
        assert_eq!(c.value(2, 3, 1), two); // even permutation
        assert_eq!(c.value(3, 2, 1), Scalar::from_ratio(1, 2)); // odd
        assert_eq!(c.value(1, 1, 2), Scalar::one()); // degenerate
    }

    #[test]
    fn coboundaries_are_cocycles() {
        let n = Nerve::complete(4);
        let d: BTreeMap<(u32, u32), Scalar> = [
            ((1, 2), Scalar::from_int(2)),
            ((1, 3), Scalar::from_int(-1)),
            ((2, 4), Scalar::i()),
        ]
        .into();
        let c = ScalarCocycle::coboundary(&n, &d);
        assert!(c.is_cocycle());
        let inv = c.inverse();
        assert!(c.mul(&inv).unwrap().entries().next().is_none());
    }
}
