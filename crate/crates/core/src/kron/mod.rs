//! Kronecker-power index algebra: full powers, reduced powers with
//! duplicate monomials merged, and the maps between the two coordinate
//! systems.
//!
//! Reduced vectors and matrices are indexed by degree-`m` multi-indices
//! over `n` coordinates, listed in strictly descending lexicographic
//! order, so `(m, 0, …, 0)` comes first and `(0, …, 0, m)` last. This
//! fixes the row order of every reduced vector and matrix in the crate.

mod sparse;

pub use sparse::{SparseMatrix, TripletBuilder};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent tuple `(m_1, …, m_n)`; one monomial `x_1^{m_1} ⋯ x_n^{m_n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    exps: Vec<u16>,
}

impl MultiIndex {
    pub fn new(exps: Vec<u16>) -> Self {
        MultiIndex { exps }
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex { exps: vec![0; n] }
    }

    /// Multi-index of the standard basis monomial `x_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut exps = vec![0; n];
        exps[i] = 1;
        MultiIndex { exps }
    }

    pub fn exponents(&self) -> &[u16] {
        &self.exps
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum()
    }

    /// Exponent-wise sum (product of the monomials).
    pub fn combine(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        MultiIndex {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Multi-index of a full-Kronecker position: counts how often each
    /// coordinate occurs among the base-`n` digits of `pos` (most
    /// significant digit = first Kronecker factor).
    pub fn of_full_position(n: usize, m: u32, mut pos: usize) -> MultiIndex {
        let mut exps = vec![0u16; n];
        for _ in 0..m {
            exps[pos % n] += 1;
            pos /= n;
        }
        MultiIndex { exps }
    }

    /// Evaluate the monomial at a point. Factors multiply one at a time
    /// in coordinate order, which reproduces the iterated Kronecker
    /// product bit-for-bit at each class's representative position.
    pub fn eval<T: Scalar>(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.exps.len());
        let mut acc = T::one();
        for (x, &e) in v.iter().zip(&self.exps) {
            for _ in 0..e {
                acc *= *x;
            }
        }
        acc
    }
}

/// Binomial coefficient as usize; counts stay far below `usize::MAX` for
/// every configuration this crate accepts.
pub fn binomial(n: u64, k: u64) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    usize::try_from(acc).expect("binomial fits usize")
}

/// Number of degree-`m` multi-indices over `n` coordinates.
pub fn index_set_len(n: usize, m: u32) -> usize {
    if n == 0 {
        return if m == 0 { 1 } else { 0 };
    }
    binomial(n as u64 + m as u64 - 1, m as u64)
}

/// All degree-`m` multi-indices over `n` coordinates in strictly
/// descending lexicographic order.
#[derive(Debug, Clone)]
pub struct IndexSet {
    n: usize,
    m: u32,
    members: Vec<MultiIndex>,
}

impl IndexSet {
    pub fn new(n: usize, m: u32) -> Self {
        assert!(n >= 1, "state dimension must be at least 1");
        let mut members = Vec::with_capacity(index_set_len(n, m));
        let mut current = vec![0u16; n];
        fill_descending(&mut members, &mut current, 0, m);
        IndexSet { n, m, members }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn get(&self, rank: usize) -> &MultiIndex {
        &self.members[rank]
    }

    /// Position of a multi-index within the descending order, or `None`
    /// if it does not belong to this set.
    pub fn rank(&self, idx: &MultiIndex) -> Option<usize> {
        if idx.len() != self.n || idx.degree() != self.m {
            return None;
        }
        Some(rank_descending(idx.exponents()))
    }
}

fn fill_descending(out: &mut Vec<MultiIndex>, current: &mut Vec<u16>, pos: usize, rem: u32) {
    if pos + 1 == current.len() {
        current[pos] = rem as u16;
        out.push(MultiIndex::new(current.clone()));
        return;
    }
    for e in (0..=rem).rev() {
        current[pos] = e as u16;
        fill_descending(out, current, pos + 1, rem - e);
    }
}

/// Rank of `exps` within the descending lexicographic order of its degree
/// class, computed combinatorially (no table lookup).
pub fn rank_descending(exps: &[u16]) -> usize {
    let n = exps.len();
    let mut rank = 0usize;
    let mut rem: u64 = exps.iter().map(|&e| e as u64).sum();
    for (l, &e) in exps.iter().enumerate() {
        let free = (n - l - 1) as u64;
        let gap = rem - e as u64; // degree left for larger leading values
        if free >= 1 && gap >= 1 {
            // tuples with a strictly larger value at position l
            rank += binomial(free + gap - 1, gap - 1);
        }
        rem -= e as u64;
    }
    rank
}

/// `m`-fold Kronecker power of a vector; `m = 0` gives `[1]`.
pub fn kron_power<T: Scalar>(v: &[T], m: u32) -> Vec<T> {
    assert!(!v.is_empty(), "kron_power of an empty vector");
    let mut out = vec![T::one()];
    for _ in 0..m {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for &a in &out {
            for &b in v {
                next.push(a * b);
            }
        }
        out = next;
    }
    out
}

/// Reduced `m`-th Kronecker power: one entry per distinct monomial,
/// ordered like [`IndexSet::new`].
pub fn reduced_kron_power<T: Scalar>(v: &[T], m: u32) -> Vec<T> {
    assert!(!v.is_empty(), "reduced_kron_power of an empty vector");
    IndexSet::new(v.len(), m)
        .members()
        .iter()
        .map(|idx| idx.eval(v))
        .collect()
}

/// Correspondence between the `n^m` full Kronecker positions of degree
/// `m` and the distinct monomials of [`IndexSet`].
#[derive(Debug, Clone)]
pub struct ReductionMap {
    n: usize,
    m: u32,
    /// reduced rank for each full position
    target: Vec<usize>,
    /// how many full positions map to each reduced rank
    multiplicity: Vec<usize>,
    /// first full position for each reduced rank
    representative: Vec<usize>,
}

impl ReductionMap {
    /// Builds the dense position table; intended for the moderate sizes
    /// where full coordinates are usable at all.
    pub fn new(n: usize, m: u32) -> Result<Self> {
        let full_len = checked_full_len(n, m)?;
        let reduced_len = index_set_len(n, m);
        let mut target = Vec::with_capacity(full_len);
        let mut multiplicity = vec![0usize; reduced_len];
        let mut representative = vec![usize::MAX; reduced_len];
        for pos in 0..full_len {
            let idx = MultiIndex::of_full_position(n, m, pos);
            let rank = rank_descending(idx.exponents());
            target.push(rank);
            multiplicity[rank] += 1;
            if representative[rank] == usize::MAX {
                representative[rank] = pos;
            }
        }
        Ok(ReductionMap {
            n,
            m,
            target,
            multiplicity,
            representative,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn full_len(&self) -> usize {
        self.target.len()
    }

    pub fn reduced_len(&self) -> usize {
        self.multiplicity.len()
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn representatives(&self) -> &[usize] {
        &self.representative
    }

    /// Copy each reduced value to all full positions of its class.
    pub fn expand<T: Scalar>(&self, reduced: &[T]) -> Result<Vec<T>> {
        if reduced.len() != self.reduced_len() {
            return Err(Error::dims(format!(
                "expand: expected {} reduced entries, got {}",
                self.reduced_len(),
                reduced.len()
            )));
        }
        Ok(self.target.iter().map(|&r| reduced[r]).collect())
    }

    /// Select the representative full position of each class
    /// (multiplicity-1 selection; the inverse of [`Self::expand`] on
    /// vectors of Kronecker-power form).
    pub fn compress_select<T: Scalar>(&self, full: &[T]) -> Result<Vec<T>> {
        if full.len() != self.full_len() {
            return Err(Error::dims(format!(
                "compress: expected {} full entries, got {}",
                self.full_len(),
                full.len()
            )));
        }
        Ok(self.representative.iter().map(|&p| full[p]).collect())
    }
}

fn checked_full_len(n: usize, m: u32) -> Result<usize> {
    let mut acc: usize = 1;
    for _ in 0..m {
        acc = acc.checked_mul(n).ok_or_else(|| Error::ResourceBudget {
            what: format!("full Kronecker index space {n}^{m}"),
            needed: u64::MAX,
            budget: u64::MAX,
        })?;
        if acc > 100_000_000 {
            return Err(Error::ResourceBudget {
                what: format!("full Kronecker index space {n}^{m}"),
                needed: acc as u64,
                budget: 100_000_000,
            });
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_power_degree_zero_is_one() {
        assert_eq!(kron_power(&[2.0, 3.0], 0), vec![1.0]);
    }

    #[test]
    fn kron_power_square() {
        // [a,b]^[2] = [a², ab, ba, b²]
        assert_eq!(kron_power(&[2.0, 3.0], 2), vec![4.0, 6.0, 6.0, 9.0]);
    }

    #[test]
    fn index_set_2_2_matches_listing() {
        let s = IndexSet::new(2, 2);
        let exps: Vec<&[u16]> = s.members().iter().map(|m| m.exponents()).collect();
        assert_eq!(exps, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
    }

    #[test]
    fn index_set_degree_zero() {
        let s = IndexSet::new(4, 0);
        assert_eq!(s.len(), 1);
        assert_eq!(s.get(0).exponents(), &[0, 0, 0, 0]);
    }

    #[test]
    fn index_set_3_2_has_six_members() {
        let s = IndexSet::new(3, 2);
        assert_eq!(s.len(), 6);
        assert_eq!(s.len(), index_set_len(3, 2));
        assert_eq!(s.get(0).exponents(), &[2, 0, 0]);
        assert_eq!(s.get(5).exponents(), &[0, 0, 2]);
    }

    #[test]
    fn ranks_agree_with_enumeration() {
        for (n, m) in [(1usize, 5u32), (2, 4), (3, 5), (5, 3), (6, 4)] {
            let s = IndexSet::new(n, m);
            for (i, idx) in s.members().iter().enumerate() {
                assert_eq!(s.rank(idx), Some(i), "n={n} m={m} i={i}");
            }
        }
    }

    #[test]
    fn rank_rejects_wrong_degree() {
        let s = IndexSet::new(2, 2);
        assert_eq!(s.rank(&MultiIndex::new(vec![1, 0])), None);
    }

    #[test]
    fn reduced_square() {
        assert_eq!(reduced_kron_power(&[2.0, 3.0], 2), vec![4.0, 6.0, 9.0]);
        let any = [0.3, -1.2, 4.5];
        assert_eq!(reduced_kron_power(&any, 0), vec![1.0]);
    }

    #[test]
    fn reduction_map_2_2_multiplicities() {
        let map = ReductionMap::new(2, 2).unwrap();
        assert_eq!(map.multiplicities(), &[1, 2, 1]);
        assert_eq!(map.target(), &[0, 1, 1, 2]);
    }

    #[test]
    fn reduction_map_degree_one_is_identity() {
        let map = ReductionMap::new(4, 1).unwrap();
        assert_eq!(map.multiplicities(), &[1, 1, 1, 1]);
        assert_eq!(map.target(), &[0, 1, 2, 3]);
    }

    #[test]
    fn reduction_map_2_3_multiplicities() {
        let map = ReductionMap::new(2, 3).unwrap();
        assert_eq!(map.multiplicities(), &[1, 3, 3, 1]);
    }

    #[test]
    fn expand_reconstructs_full_power() {
        for (n, m) in [(1usize, 3u32), (2, 3), (3, 4)] {
            let v: Vec<f64> = (0..n).map(|i| 0.5 + 0.25 * i as f64).collect();
            let map = ReductionMap::new(n, m).unwrap();
            let full = kron_power(&v, m);
            let reduced = reduced_kron_power(&v, m);
            assert_eq!(map.expand(&reduced).unwrap(), full);
            assert_eq!(map.compress_select(&full).unwrap(), reduced);
        }
    }

    #[test]
    fn multiplicities_sum_to_full_len() {
        for (n, m) in [(2usize, 4u32), (3, 3), (4, 2)] {
            let map = ReductionMap::new(n, m).unwrap();
            let total: usize = map.multiplicities().iter().sum();
            assert_eq!(total, map.full_len());
        }
    }
}
