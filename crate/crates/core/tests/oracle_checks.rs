//! Statistical cross-checks between the expected-block machinery and
//! plain Monte Carlo evaluation of the raw dynamics.

use std::path::{Path, PathBuf};

use carmo_core::carleman::{expected_block, BuildBudget, ExactEngine};
use carmo_core::kron::kron_power;
use carmo_core::model::parse::parse_spec_file;
use carmo_core::model::SystemSpec;
use carmo_core::oracle::{sample_distribution, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// The expected degree-2 update blocks reproduce the sampled mean of the
/// Kronecker square of one update step, for a fixed deterministic state.
#[test]
fn expected_blocks_match_sampled_kron_square() {
    let spec: SystemSpec<f64> = parse_spec_file(&fixture("example4.toml")).unwrap();
    let budget = BuildBudget::default();
    let x = [0.7, 0.3];
    // prediction: Σ_k E_{2,k} · x^[k]
    let mut predicted = [0.0f64; 4];
    for k in 0..=4u32 {
        let block = expected_block(&spec, 2, k, &budget).unwrap();
        let xp = kron_power(&x, k);
        let contrib = block.matvec(&xp).unwrap();
        for (p, c) in predicted.iter_mut().zip(contrib) {
            *p += c;
        }
    }
    // sampling: z = Σ_i F_i(t) x^[i], averaged over noise draws of a(t)
    let samples = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
    let mut mean = [0.0f64; 4];
    let mut m2 = [0.0f64; 4];
    for _ in 0..samples {
        let a = sample_distribution(&spec.noise[0].distribution, &mut rng).unwrap();
        let z = [a * x[0] * x[1], a * (x[0] + x[1])];
        let zz = kron_power(&z, 2);
        for i in 0..4 {
            mean[i] += zz[i];
            m2[i] += zz[i] * zz[i];
        }
    }
    for i in 0..4 {
        mean[i] /= samples as f64;
        let var = (m2[i] / samples as f64 - mean[i] * mean[i]).max(0.0);
        let se = (var / samples as f64).sqrt();
        let diff = (mean[i] - predicted[i]).abs();
        assert!(
            diff <= 3.0 * se + 1e-12,
            "coordinate {i}: {} vs {} (se {se})",
            mean[i],
            predicted[i]
        );
    }
}

/// Exact logistic moments sit within the Monte Carlo confidence band.
#[test]
fn logistic_exact_moments_match_simulation() {
    let spec: SystemSpec<f64> = parse_spec_file(&fixture("logistic.toml")).unwrap();
    let run = simulate(&spec, 20_000, 3, 42).unwrap();
    let mut exact = ExactEngine::new(&spec, BuildBudget::default());
    for t in 0..=3u32 {
        for j0 in 1..=2u32 {
            let want = exact.moment(j0, t).unwrap()[0];
            let got = run.empirical_moment(j0, t).unwrap()[0];
            let se = run.empirical_moment_stderr(j0, t).unwrap()[0];
            assert!(
                (got - want).abs() <= 4.0 * se + 1e-12,
                "j0={j0} t={t}: {got} vs {want} (se {se})"
            );
        }
    }
}

/// Vehicle one-step mean against simulation, exercising the functional
/// initial model end to end.
#[test]
fn vehicle_exact_mean_matches_simulation() {
    let spec: SystemSpec<f64> = parse_spec_file(&fixture("vehicle.toml")).unwrap();
    let run = simulate(&spec, 20_000, 2, 7).unwrap();
    let mut exact = ExactEngine::new(&spec, BuildBudget::default());
    for t in 1..=2u32 {
        let want = exact.moment(1, t).unwrap();
        let got = run.empirical_moment(1, t).unwrap();
        let se = run.empirical_moment_stderr(1, t).unwrap();
        for i in 0..spec.n {
            assert!(
                (got[i] - want[i]).abs() <= 4.0 * se[i] + 1e-12,
                "t={t} dim {i}: {} vs {} (se {})",
                got[i],
                want[i],
                se[i]
            );
        }
    }
}
