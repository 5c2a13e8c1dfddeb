//! Property tests for the index algebra and sparse primitives.

use carmo_core::kron::{
    index_set_len, kron_power, reduced_kron_power, IndexSet, ReductionMap, SparseMatrix,
};
use proptest::prelude::*;

fn small_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #[test]
    fn reduced_power_expands_to_full_power(
        n in 1usize..=3,
        m in 0u32..=4,
        seed in any::<u64>(),
    ) {
        let v: Vec<f64> = (0..n)
            .map(|i| {
                let x = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(i as u64);
                ((x >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
            })
            .collect();
        let full = kron_power(&v, m);
        let reduced = reduced_kron_power(&v, m);
        let map = ReductionMap::new(n, m).unwrap();
        let expanded = map.expand(&reduced).unwrap();
        // representative positions agree bitwise; the other members of a
        // class differ only by multiplication-order rounding
        for &rep in map.representatives() {
            prop_assert_eq!(expanded[rep], full[rep]);
        }
        for (e, f) in expanded.iter().zip(&full) {
            prop_assert!((e - f).abs() <= 1e-14 * (1.0 + f.abs()), "{} vs {}", e, f);
        }
    }

    #[test]
    fn index_set_sizes_are_binomial(n in 1usize..=5, m in 0u32..=6) {
        let set = IndexSet::new(n, m);
        prop_assert_eq!(set.len(), index_set_len(n, m));
        if m > 0 {
            // strictly descending lexicographic order
            for w in set.members().windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }
    }

    #[test]
    fn kron_power_is_multiplicative_in_the_degree(
        v in small_vec(3),
        j in 0u32..=3,
        k in 0u32..=3,
    ) {
        let lhs = kron_power(&v, j + k);
        let a = kron_power(&v, j);
        let b = kron_power(&v, k);
        let mut rhs = Vec::with_capacity(lhs.len());
        for &x in &a {
            for &y in &b {
                rhs.push(x * y);
            }
        }
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn mixed_product_identity(
        a in small_vec(9), b in small_vec(9), c in small_vec(9), d in small_vec(9),
        use_3x3 in any::<bool>(),
    ) {
        let dim = if use_3x3 { 3 } else { 2 };
        let take = |v: &[f64]| SparseMatrix::from_dense(dim, dim, &v[..dim * dim]);
        let (ma, mb, mc, md) = (take(&a), take(&b), take(&c), take(&d));
        let lhs = ma.kron(&mb).matmul(&mc.kron(&md)).unwrap();
        let rhs = ma.matmul(&mc).unwrap().kron(&mb.matmul(&md).unwrap());
        let (ld, rd) = (lhs.to_dense(), rhs.to_dense());
        prop_assert_eq!(ld.len(), rd.len());
        for (l, r) in ld.iter().zip(&rd) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()), "{} vs {}", l, r);
        }
    }
}
