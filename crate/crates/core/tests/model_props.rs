//! Property tests for noise polynomials and initial-moment providers.

use std::collections::BTreeMap;

use carmo_core::kron::{IndexSet, ReductionMap};
use carmo_core::model::{
    initial_moments, CoeffMatrix, InitialStateModel, Mode, NoiseDistribution, NoisePolynomial,
    NoiseSymbol, SystemSpec,
};
use proptest::prelude::*;

fn arb_poly(nsyms: usize) -> impl Strategy<Value = NoisePolynomial<f64>> {
    prop::collection::vec((prop::collection::vec(0u16..4, nsyms), -3.0f64..3.0), 0..6).prop_map(
        move |terms| {
            let mut p = NoisePolynomial::zero(nsyms);
            for (exps, c) in terms {
                p.add_term(exps, c);
            }
            p
        },
    )
}

fn tables() -> Vec<Vec<f64>> {
    vec![
        NoiseDistribution::Uniform { a: 0.2, b: 0.9 }
            .moments_upto(16)
            .unwrap(),
        NoiseDistribution::Gaussian {
            mean: 0.1,
            std: 0.5,
        }
        .moments_upto(16)
        .unwrap(),
    ]
}

proptest! {
    #[test]
    fn expectation_is_linear(p in arb_poly(2), q in arb_poly(2), s in -2.0f64..2.0) {
        let tables = tables();
        let mut sum = p.clone();
        sum.add(&q.scaled(s));
        let lhs = sum.expectation(&tables).unwrap();
        let rhs = p.expectation(&tables).unwrap() + s * q.expectation(&tables).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn multiplication_matches_pointwise_evaluation(p in arb_poly(2), q in arb_poly(2)) {
        let prod = p.multiply(&q);
        for vals in [[0.3, -0.7], [1.1, 0.4], [-0.2, -0.9]] {
            let lhs = prod.evaluate(&vals);
            let rhs = p.evaluate(&vals) * q.evaluate(&vals);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}

fn spec_with_initial(mode: Mode, initial: InitialStateModel<f64>) -> SystemSpec<f64> {
    let coeffs = (0..=1u32)
        .map(|d| CoeffMatrix {
            degree: d,
            cols: mode.block_len(2, d),
            entries: BTreeMap::new(),
        })
        .collect();
    SystemSpec {
        name: "prop".into(),
        n: 2,
        degree: 1,
        mode,
        noise: Vec::<NoiseSymbol<f64>>::new(),
        coeffs,
        initial,
        content_hash: String::new(),
    }
}

proptest! {
    #[test]
    fn reduced_initial_moments_expand_to_full(
        m1 in 0.1f64..1.5, m2 in -0.5f64..0.5, s in 0.05f64..0.3,
    ) {
        let dists = vec![
            NoiseDistribution::Gaussian { mean: m1, std: s },
            NoiseDistribution::Uniform { a: m2 - 0.1, b: m2 + 0.3 },
        ];
        let full_spec = spec_with_initial(
            Mode::Full,
            InitialStateModel::IndependentProduct(dists.clone()),
        );
        let red_spec = spec_with_initial(
            Mode::Reduced,
            InitialStateModel::IndependentProduct(dists),
        );
        let full = initial_moments(&full_spec, 4).unwrap();
        let red = initial_moments(&red_spec, 4).unwrap();
        for j in 0..=4u32 {
            let map = ReductionMap::new(2, j).unwrap();
            let expanded = map.expand(&red[j as usize]).unwrap();
            prop_assert_eq!(&expanded, &full[j as usize], "degree {}", j);
        }
    }

    #[test]
    fn independent_product_moments_factor_per_monomial(
        ma in -0.4f64..0.9, sa in 0.05f64..0.4,
    ) {
        let d1 = NoiseDistribution::Gaussian { mean: ma, std: sa };
        let d2 = NoiseDistribution::Uniform { a: 0.1, b: 0.7 };
        let spec = spec_with_initial(
            Mode::Reduced,
            InitialStateModel::IndependentProduct(vec![d1.clone(), d2.clone()]),
        );
        let ms = initial_moments(&spec, 4).unwrap();
        let t1 = d1.moments_upto(4).unwrap();
        let t2 = d2.moments_upto(4).unwrap();
        for j in 0..=4u32 {
            let set = IndexSet::new(2, j);
            for (r, idx) in set.members().iter().enumerate() {
                let e = idx.exponents();
                let want = t1[e[0] as usize] * t2[e[1] as usize];
                prop_assert!((ms[j as usize][r] - want).abs() <= 1e-13 * (1.0 + want.abs()));
            }
        }
    }
}
