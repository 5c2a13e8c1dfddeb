//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them all). Tolerances are pinned
//! in code; nothing is deferred to later calibration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use carmo_core::carleman::{build_propagator, BuildBudget, ExactEngine, MomentState};
use carmo_core::errbound::{
    bound_subset_j, bound_subset_k, exact_bound, global_bound, select_subset, ErrorCertificate,
    ExpansionBuilder, StackedInitialMoments, SubsetStrategy,
};
use carmo_core::kron::{IndexSet, MultiIndex, ReductionMap};
use carmo_core::linalg;
use carmo_core::model::parse::{parse_spec_file, parse_spec_str};
use carmo_core::model::{Mode, SystemSpec};
use carmo_core::oracle::{grid_maxdet_check, simulate};
use carmo_core::safety::{build_safety_region, RegionShape, SafetyEllipsoid, SecondMomentView};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

fn logistic() -> SystemSpec<f64> {
    parse_spec_file(&fixture("logistic.toml")).unwrap()
}

fn example4() -> SystemSpec<f64> {
    parse_spec_file(&fixture("example4.toml")).unwrap()
}

fn vehicle() -> SystemSpec<f64> {
    parse_spec_file(&fixture("vehicle.toml")).unwrap()
}

fn report(id: u32, desc: &str, pass: bool) {
    println!(
        "ACCEPTANCE {id:02} {}: {desc}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {desc}");
}

/// Exact-moment region of the vehicle at `t = 2`, equal to what a
/// degree-18 truncation would produce.
fn vehicle_exact_region(spec: &SystemSpec<f64>) -> SafetyEllipsoid<f64> {
    let mut exact = ExactEngine::new(spec, BuildBudget::default());
    let m1 = exact.moment(1, 2).unwrap();
    let m2 = exact.moment(2, 2).unwrap();
    let view = SecondMomentView::exact(spec.n, spec.mode, m1, m2).unwrap();
    build_safety_region(&view, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap()
}

/// Vehicle region at `t = 2` from a truncated propagator with
/// coordinate-subset certificates of the given size.
fn vehicle_truncated_region(
    spec: &SystemSpec<f64>,
    builder: &mut ExpansionBuilder<f64>,
    n_t: u32,
    k_hat: usize,
) -> SafetyEllipsoid<f64> {
    let p = build_propagator(spec, n_t, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(spec, n_t).unwrap();
    let y2 = p.propagate(&y0, 2).unwrap();
    let mut certs: Vec<ErrorCertificate<f64>> = Vec::new();
    for j0 in [1u32, 2] {
        let exp = builder.expansion(&p, j0, 2).unwrap();
        let init = StackedInitialMoments::new(spec, exp.width_degree()).unwrap();
        let subset = select_subset(SubsetStrategy::LargestStackedCoordinate, k_hat, &exp, &init);
        certs.push(bound_subset_k(&exp, &init, &subset).unwrap());
    }
    let view = SecondMomentView::new(
        spec.n,
        spec.mode,
        y2.block(&p.layout, 1).to_vec(),
        y2.block(&p.layout, 2).to_vec(),
        certs[0].bounds.clone(),
        certs[1].bounds.clone(),
    )
    .unwrap();
    build_safety_region(&view, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap()
}

/// 1. Truncation is exact below the degree horizon: logistic, N_T = 16,
///    every (j0, t) with j0·2^t ≤ 16 within 1e-10 relative, in under 5s.
#[test]
fn criterion_01_exactness_horizon() {
    let started = Instant::now();
    let spec = logistic();
    let p = build_propagator(&spec, 16, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(&spec, 16).unwrap();
    let mut exact = ExactEngine::new(&spec, BuildBudget::default());
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for t in 0..=4u32 {
        let yt = p.propagate(&y0, t).unwrap();
        for j0 in 1..=16u32 {
            if j0 * 2u32.pow(t) > 16 {
                continue;
            }
            let want = exact.moment(j0, t).unwrap()[0];
            let got = yt.y[p.layout.offset(j0)];
            worst = worst.max((got - want).abs() / want.abs().max(1e-300));
            checked += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        &format!(
            "exactness below the horizon ({checked} pairs, worst rel {worst:.2e}, {elapsed:.2}s)"
        ),
        worst <= 1e-10 && elapsed < 5.0,
    );
}

/// 2. Exact first and second logistic moments sit within 4 standard
///    errors of a 10^4-sample Monte Carlo run, in under 30s.
#[test]
fn criterion_02_monte_carlo_agreement() {
    let started = Instant::now();
    let spec = logistic();
    let run = simulate(&spec, 10_000, 5, 20_240_101).unwrap();
    let mut exact = ExactEngine::new(&spec, BuildBudget::default());
    let mut worst_sigmas = 0.0f64;
    for t in 0..=5u32 {
        for j0 in 1..=2u32 {
            let want = exact.moment(j0, t).unwrap()[0];
            let got = run.empirical_moment(j0, t).unwrap()[0];
            let se = run.empirical_moment_stderr(j0, t).unwrap()[0];
            worst_sigmas = worst_sigmas.max((got - want).abs() / se.max(1e-300));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        2,
        &format!("Monte Carlo agreement (worst {worst_sigmas:.2} SE, {elapsed:.2}s)"),
        worst_sigmas <= 4.0 && elapsed < 30.0,
    );
}

/// 3. All four bound methods dominate the exact error per coordinate on
///    the logistic and vehicle configurations; full subsets reproduce it.
#[test]
fn criterion_03_error_bound_soundness() {
    let mut sound = true;
    let mut exact_match = true;
    let mut worst_slack = 0.0f64;

    // logistic sweep
    let spec = logistic();
    let budget = BuildBudget::default();
    let mut exact_engine = ExactEngine::new(&spec, budget);
    for n_t in [4u32, 8, 16] {
        let p = build_propagator(&spec, n_t, &budget).unwrap();
        let y0 = MomentState::initial(&spec, n_t).unwrap();
        let mut builder = ExpansionBuilder::new(&spec, budget);
        for j0 in 1..=2u32 {
            for t in 0..=4u32 {
                let exp = builder.expansion(&p, j0, t).unwrap();
                let init = StackedInitialMoments::new(&spec, exp.width_degree()).unwrap();
                let truth = (exact_engine.moment(j0, t).unwrap()[0]
                    - p.propagate(&y0, t).unwrap().y[p.layout.offset(j0)])
                .abs();
                let width = exp.width_degree() as usize + 1;
                let j_half =
                    select_subset(SubsetStrategy::LargestInitialMoment, width / 2, &exp, &init);
                let k_half = select_subset(
                    SubsetStrategy::LargestStackedCoordinate,
                    exp.support.len() / 2,
                    &exp,
                    &init,
                );
                let certs = [
                    global_bound(&exp, &init).unwrap(),
                    bound_subset_j(&exp, &init, &j_half).unwrap(),
                    bound_subset_k(&exp, &init, &k_half).unwrap(),
                    exact_bound(&exp, &init).unwrap(),
                ];
                for c in &certs {
                    if c.bounds[0] < truth - 1e-12 {
                        sound = false;
                    }
                    worst_slack = worst_slack.max(truth - c.bounds[0]);
                }
                // exhaustive subsets reproduce the exact magnitude
                let all_j: Vec<usize> = (0..width).collect();
                let jc = bound_subset_j(&exp, &init, &all_j).unwrap();
                let kc = bound_subset_k(&exp, &init, &exp.support).unwrap();
                if (jc.bounds[0] - truth).abs() > 1e-10 || (kc.bounds[0] - truth).abs() > 1e-10 {
                    exact_match = false;
                }
            }
        }
    }

    // vehicle sweep, position coordinates only
    let spec = vehicle();
    let p = build_propagator(&spec, 7, &budget).unwrap();
    let y0 = MomentState::initial(&spec, 7).unwrap();
    let mut builder = ExpansionBuilder::new(&spec, budget);
    let mut exact_engine = ExactEngine::new(&spec, budget);
    let pair_set = IndexSet::new(spec.n, 2);
    let pair_coords: Vec<usize> = [(0usize, 0usize), (0, 1), (1, 1)]
        .iter()
        .map(|&(i, j)| {
            pair_set
                .rank(&MultiIndex::unit(6, i).combine(&MultiIndex::unit(6, j)))
                .unwrap()
        })
        .collect();
    for t in 1..=2u32 {
        let yt = p.propagate(&y0, t).unwrap();
        for j0 in 1..=2u32 {
            let exp = builder.expansion(&p, j0, t).unwrap();
            let init = StackedInitialMoments::new(&spec, exp.width_degree()).unwrap();
            let truth_block = exact_engine.moment(j0, t).unwrap();
            let approx = yt.block(&p.layout, j0);
            let coords: &[usize] = if j0 == 1 { &[0, 1] } else { &pair_coords };
            let k900 = select_subset(SubsetStrategy::LargestStackedCoordinate, 900, &exp, &init);
            let certs = [
                global_bound(&exp, &init).unwrap(),
                bound_subset_j(&exp, &init, &[0, 1, 2]).unwrap(),
                bound_subset_k(&exp, &init, &k900).unwrap(),
                exact_bound(&exp, &init).unwrap(),
            ];
            for &i in coords {
                let truth = (truth_block[i] - approx[i]).abs();
                for c in &certs {
                    if c.bounds[i] < truth - 1e-12 {
                        sound = false;
                    }
                }
                let kc = bound_subset_k(&exp, &init, &exp.support).unwrap();
                if (kc.bounds[i] - truth).abs() > 1e-10 {
                    exact_match = false;
                }
            }
        }
    }
    report(
        3,
        "certificates dominate the exact error; exhaustive subsets reproduce it",
        sound && exact_match,
    );
}

/// 4. The degree-subset bound curve: exact at |J| = 33, within 5% of it
///    at |J| = 30 (logistic, N_T = 16, t = 4, j0 = 2).
#[test]
fn criterion_04_subset_curve() {
    let spec = logistic();
    let budget = BuildBudget::default();
    let p = build_propagator(&spec, 16, &budget).unwrap();
    let mut builder = ExpansionBuilder::new(&spec, budget);
    let exp = builder.expansion(&p, 2, 4).unwrap();
    let init = StackedInitialMoments::new(&spec, exp.width_degree()).unwrap();
    assert_eq!(exp.width_degree(), 32, "32 degree blocks plus the constant");
    let truth = exact_bound(&exp, &init).unwrap().bounds[0];

    let j33 = select_subset(SubsetStrategy::LargestInitialMoment, 33, &exp, &init);
    assert_eq!(j33.len(), 33);
    let b33 = bound_subset_j(&exp, &init, &j33).unwrap().bounds[0];
    let j30 = select_subset(SubsetStrategy::LargestInitialMoment, 30, &exp, &init);
    let b30 = bound_subset_j(&exp, &init, &j30).unwrap().bounds[0];
    let rel33 = (b33 - truth).abs() / truth;
    let rel30 = (b30 - b33).abs() / b33;
    report(
        4,
        &format!(
            "subset curve: |J|=33 exact (rel {rel33:.1e}), |J|=30 within 5% (rel {rel30:.1e})"
        ),
        rel33 <= 1e-10 && rel30 <= 0.05,
    );
}

/// 5. Region areas quoted for the two-dimensional quadratic system at
///    t = 2 with b = 0.1: ellipsoid ≈ 0.07 and ball ≈ 0.36, within ±15%.
///
/// The pipeline's covariance at t = 2 is verified against direct Monte
/// Carlo (see criterion 6 and the oracle tests), and with b = 0.1 it
/// yields areas almost exactly 4× smaller than the quoted pair; the
/// quoted pair corresponds to a per-step budget of b = 0.025 (a radius
/// factor of 2). Both measurements are printed so the discrepancy stays
/// visible; the assertion keeps the stated parameters.
#[test]
fn criterion_05_region_areas() {
    let spec = example4();
    let p = build_propagator(&spec, 16, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(&spec, 16).unwrap();
    let y2 = p.propagate(&y0, 2).unwrap();
    let view = SecondMomentView::exact(
        2,
        spec.mode,
        y2.block(&p.layout, 1).to_vec(),
        y2.block(&p.layout, 2).to_vec(),
    )
    .unwrap();
    let ell = build_safety_region(&view, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
    let ball = build_safety_region(&view, 0.1, 1.0, &[0, 1], RegionShape::Ball).unwrap();
    let (ea, ba) = (ell.area().unwrap(), ball.area().unwrap());
    let ell_q = build_safety_region(&view, 0.025, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
    let ball_q = build_safety_region(&view, 0.025, 1.0, &[0, 1], RegionShape::Ball).unwrap();
    println!(
        "criterion 05 detail: measured areas at b=0.1: ellipsoid {ea:.4}, ball {ba:.4}; \
         at b=0.025: ellipsoid {:.4}, ball {:.4} (quoted pair 0.07 / 0.36)",
        ell_q.area().unwrap(),
        ball_q.area().unwrap()
    );
    let pass = (ea - 0.07).abs() <= 0.15 * 0.07 && (ba - 0.36).abs() <= 0.15 * 0.36;
    report(
        5,
        &format!("region areas at b=0.1 within ±15% of 0.07/0.36 (got {ea:.4}/{ba:.4})"),
        pass,
    );
}

/// 6. Coverage soundness: out-of-region fraction at b = 0.1 stays below
///    0.1 + 0.009 for both case studies at every tested step.
#[test]
fn criterion_06_coverage() {
    let mut worst_out = 0.0f64;

    // quadratic system, exact moments at t ≤ 3
    let spec = example4();
    let p = build_propagator(&spec, 16, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(&spec, 16).unwrap();
    let run = simulate(&spec, 10_000, 3, 77).unwrap();
    for t in 0..=3u32 {
        let yt = p.propagate(&y0, t).unwrap();
        let view = SecondMomentView::exact(
            2,
            spec.mode,
            yt.block(&p.layout, 1).to_vec(),
            yt.block(&p.layout, 2).to_vec(),
        )
        .unwrap();
        for shape in [RegionShape::Ellipsoid, RegionShape::Ball] {
            let region = build_safety_region(&view, 0.1, 1.0, &[0, 1], shape).unwrap();
            let out = 1.0 - run.coverage(&region, t).unwrap();
            worst_out = worst_out.max(out);
        }
    }

    // vehicle with truncated moments and coordinate-subset certificates
    let spec = vehicle();
    let p = build_propagator(&spec, 7, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(&spec, 7).unwrap();
    let run = simulate(&spec, 10_000, 2, 99).unwrap();
    let mut builder = ExpansionBuilder::new(&spec, BuildBudget::default());
    for t in 0..=2u32 {
        let yt = p.propagate(&y0, t).unwrap();
        let (c1, c2) = if t == 0 {
            (
                ErrorCertificate::zero(1, 0, p.layout.block_len(1)),
                ErrorCertificate::zero(2, 0, p.layout.block_len(2)),
            )
        } else {
            let mut cs = Vec::new();
            for j0 in [1u32, 2] {
                let exp = builder.expansion(&p, j0, t).unwrap();
                let init = StackedInitialMoments::new(&spec, exp.width_degree()).unwrap();
                let subset =
                    select_subset(SubsetStrategy::LargestStackedCoordinate, 900, &exp, &init);
                cs.push(bound_subset_k(&exp, &init, &subset).unwrap());
            }
            (cs.remove(0), cs.remove(0))
        };
        let view = SecondMomentView::new(
            spec.n,
            spec.mode,
            yt.block(&p.layout, 1).to_vec(),
            yt.block(&p.layout, 2).to_vec(),
            c1.bounds,
            c2.bounds,
        )
        .unwrap();
        let region = build_safety_region(&view, 0.1, 1.0, &[0, 1], RegionShape::Ellipsoid).unwrap();
        let out = 1.0 - run.coverage(&region, t).unwrap();
        worst_out = worst_out.max(out);
    }
    report(
        6,
        &format!("coverage soundness (worst out-of-region fraction {worst_out:.4})"),
        worst_out <= 0.1 + 0.009,
    );
}

/// 7. Containment: truncated vehicle regions contain the exact-moment
///    region, and coordinate-subset regions shrink toward the
///    all-indices region with k̂ = 900 within 10% of it.
///
/// Boundary membership allows a 1e-6 relative slack: truncation errors
/// of order 1e-9 perturb the region shape itself, so pointwise
/// containment holds only up to slivers at the certificate scale.
#[test]
fn criterion_07_containment() {
    let spec = vehicle();
    let exact_region = vehicle_exact_region(&spec);
    let boundary = exact_region.boundary(1000).unwrap();
    let mut builder = ExpansionBuilder::new(&spec, BuildBudget::default());

    let mut contained = true;
    for n_t in [5u32, 6, 7] {
        let region = vehicle_truncated_region(&spec, &mut builder, n_t, 900);
        for &(x, y) in &boundary {
            let s = region.seminorm(&[x, y, 0.0, 0.0, 0.0, 0.0]);
            if s > region.radius * (1.0 + 1e-6) {
                contained = false;
            }
        }
    }

    let mut areas = Vec::new();
    for k_hat in [0usize, 300, 900, usize::MAX] {
        let region = vehicle_truncated_region(&spec, &mut builder, 7, k_hat);
        areas.push(region.area().unwrap());
    }
    let shrinking = areas.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let close = (areas[2] - areas[3]).abs() <= 0.1 * areas[3];
    report(
        7,
        &format!(
            "containment and subset-size sweep (areas {:?}, k̂=900 within 10% of all)",
            areas
        ),
        contained && shrinking && close,
    );
}

/// 8. Reduced Kronecker equivalence, plus the build-budget contrast:
///    the reduced vehicle build succeeds at N_T = 7 under 1 GiB where
///    the full build at N_T = 8 is refused.
#[test]
fn criterion_08_reduced_equivalence() {
    let mut equal = true;

    // logistic: n = 1, the two coordinate systems coincide
    let spec = logistic();
    let pf = build_propagator(&spec, 4, &BuildBudget::default()).unwrap();
    let pr = build_propagator(&spec.to_reduced(), 4, &BuildBudget::default()).unwrap();
    if pf.matrix.to_dense() != pr.matrix.to_dense() {
        equal = false;
    }

    // a dense two-dimensional quadratic system with both an additive and
    // a multiplicative symbol
    let text = r#"
        name = "dense2"
        n = 2
        degree = 2
        mode = "full"

        [[noise]]
        symbol = "g"
        kind = "gaussian"
        mean = 0.05
        std = 0.2

        [[noise]]
        symbol = "u"
        kind = "uniform"
        a = 0.3
        b = 0.9

        [initial]
        kind = "independent"
        dim = [
            { kind = "gaussian", mean = 0.4, std = 0.15 },
            { kind = "uniform", a = -0.3, b = 0.5 },
        ]

        [[coeff]]
        degree = 0
        entry = [
            { row = 0, col = 0, poly = "0.07*g" },
            { row = 1, col = 0, poly = "-0.03" },
        ]

        [[coeff]]
        degree = 1
        entry = [
            { row = 0, col = 0, poly = "0.6 + 0.1*g" },
            { row = 0, col = 1, poly = "-0.25*u" },
            { row = 1, col = 0, poly = "0.2*u" },
            { row = 1, col = 1, poly = "0.5 - 0.05*g" },
        ]

        [[coeff]]
        degree = 2
        entry = [
            { row = 0, col = 0, poly = "0.15*u" },
            { row = 0, col = 1, poly = "-0.1*g" },
            { row = 0, col = 3, poly = "0.05" },
            { row = 1, col = 1, poly = "0.12" },
            { row = 1, col = 2, poly = "0.08*u" },
            { row = 1, col = 3, poly = "-0.04*g*u" },
        ]
    "#;
    let dense: SystemSpec<f64> = parse_spec_str(text, "dense2-fixture".into()).unwrap();
    let reduced = dense.to_reduced();
    for n_t in [2u32, 3, 4] {
        let pf = build_propagator(&dense, n_t, &BuildBudget::default()).unwrap();
        let pr = build_propagator(&reduced, n_t, &BuildBudget::default()).unwrap();
        let yf0 = MomentState::initial(&dense, n_t).unwrap();
        let yr0 = MomentState::initial(&reduced, n_t).unwrap();
        for t in 0..=3u32 {
            let yf = pf.propagate(&yf0, t).unwrap();
            let yr = pr.propagate(&yr0, t).unwrap();
            for j in 0..=n_t {
                let map = ReductionMap::new(2, j).unwrap();
                let expanded = map.expand(yr.block(&pr.layout, j)).unwrap();
                for (a, b) in expanded.iter().zip(yf.block(&pf.layout, j)) {
                    if (a - b).abs() > 1e-12 {
                        equal = false;
                    }
                }
            }
        }
    }

    // budget contrast on the vehicle
    let spec = vehicle();
    let budget = BuildBudget::bytes(1 << 30);
    let reduced_ok = build_propagator(&spec, 7, &budget).is_ok();
    let full_refused = matches!(
        build_propagator(&spec.to_full().unwrap(), 8, &budget),
        Err(carmo_core::Error::ResourceBudget { .. })
    );
    report(
        8,
        &format!(
            "reduced equivalence within 1e-12; reduced N_T=7 builds ({reduced_ok}), full N_T=8 refused ({full_refused})"
        ),
        equal && reduced_ok && full_refused,
    );
}

/// 9. The closed-form max-det solution beats every feasible grid point
///    in log-determinant, across 20 seeded positive-definite covariances.
#[test]
fn criterion_09_maxdet_oracle() {
    let mut pass = true;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut state = 0x5eed_cafe_u64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64)
    };
    for case in 0..20 {
        // C = A Aᵀ + δI for a random 2×2 A
        let a = [next() - 0.5, next() - 0.5, next() - 0.5, next() - 0.5];
        let mut c = [
            a[0] * a[0] + a[1] * a[1],
            a[0] * a[2] + a[1] * a[3],
            0.0,
            a[2] * a[2] + a[3] * a[3],
        ];
        c[2] = c[1];
        c[0] += 0.05;
        c[3] += 0.05;
        let scale = 0.02 + 0.2 * next();
        for v in &mut c {
            *v *= scale;
        }
        let (b, alpha) = (0.1, 1.0);
        // closed form through the pipeline
        let mean = vec![0.0, 0.0];
        let second = vec![c[0], c[1], c[2], c[3]];
        let view = SecondMomentView::exact(2, Mode::Full, mean, second).unwrap();
        let q =
            carmo_core::safety::maxdet_ellipsoid(&view, b, alpha, &[0, 1], RegionShape::Ellipsoid)
                .unwrap();
        let closed = linalg::determinant(&q, 2).ln();
        // 22 × 22 × 22 ≈ 10^4 grid points
        let grid = grid_maxdet_check(&c, b, alpha, 22).unwrap();
        let (_, best) = grid.best.expect("feasible grid point");
        let gap = best.ln() - closed;
        worst_gap = worst_gap.max(gap);
        if gap > 1e-9 {
            pass = false;
            println!("criterion 09 detail: case {case} grid beat closed form by {gap:.3e}");
        }
    }
    report(
        9,
        &format!("closed-form max-det dominates the grid (worst log-det gap {worst_gap:.2e})"),
        pass,
    );
}

/// 10. Online speed: propagation at N_T = 256 over 5 steps runs at least
///     100× faster than a 10^4-sample Monte Carlo of the same horizon.
#[test]
fn criterion_10_online_speed() {
    let spec = logistic();
    let p = build_propagator(&spec, 256, &BuildBudget::default()).unwrap();
    let y0 = MomentState::initial(&spec, 256).unwrap();
    // warm up, then best-of to de-noise the short measurement
    let mut sink = 0.0;
    sink += p.propagate(&y0, 5).unwrap().y[1];
    let mut online = f64::INFINITY;
    for _ in 0..20 {
        let started = Instant::now();
        sink += p.propagate(&y0, 5).unwrap().y[1];
        online = online.min(started.elapsed().as_secs_f64());
    }
    let mut mc = f64::INFINITY;
    let mut run = simulate(&spec, 10_000, 5, 4242).unwrap();
    for _ in 0..3 {
        let started = Instant::now();
        run = simulate(&spec, 10_000, 5, 4242).unwrap();
        mc = mc.min(started.elapsed().as_secs_f64());
    }
    sink += run.empirical_moment(1, 5).unwrap()[0];
    assert!(sink.is_finite());
    let ratio = mc / online;
    report(
        10,
        &format!("online speed: propagate {online:.2e}s vs Monte Carlo {mc:.2e}s ({ratio:.0}×)"),
        ratio >= 100.0,
    );
}
