//! Independent ground-truth engines: Monte Carlo simulation of the raw
//! dynamics, empirical moments and coverage, a grid-search max-det
//! checker, and a literal small-case evaluation of the truncation-error
//! sum. Nothing here touches the propagator machinery; that is the
//! point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carleman::BuildBudget;
use crate::error::{Error, Result};
use crate::kron::{kron_power, reduced_kron_power};
use crate::model::{initial_moments, InitialStateModel, Mode, NoiseDistribution, SystemSpec};
use crate::safety::SafetyEllipsoid;
use crate::scalar::Scalar;

/// Trajectories of the raw stochastic recursion, reproducible from the
/// seed. Every sample runs on its own counter-derived stream, so sample
/// `s` is identical no matter how many samples are drawn.
#[derive(Debug, Clone)]
pub struct SimulationRun<T> {
    pub seed: u64,
    pub samples: usize,
    pub horizon: u32,
    pub n: usize,
    pub mode: Mode,
    /// `states[s][t]` is the state vector of sample `s` at time `t`.
    pub states: Vec<Vec<Vec<T>>>,
}

/// Draw one value; explicit-moment distributions have no sampler.
pub fn sample_distribution<T: Scalar>(d: &NoiseDistribution<T>, rng: &mut ChaCha8Rng) -> Result<T> {
    match d {
        NoiseDistribution::Uniform { a, b } => {
            let u = T::from_f64_lit(rng.gen::<f64>());
            Ok(*a + (*b - *a) * u)
        }
        NoiseDistribution::Gaussian { mean, std } => {
            Ok(*mean + *std * T::from_f64_lit(standard_normal(rng)))
        }
        NoiseDistribution::TruncatedGaussian { mean, std, lo, hi } => {
            // rejection from the parent gaussian; acceptance is harmless
            // for every window this crate meets
            for _ in 0..100_000 {
                let v = *mean + *std * T::from_f64_lit(standard_normal(rng));
                if v >= *lo && v <= *hi {
                    return Ok(v);
                }
            }
            Err(Error::numeric(
                "truncated gaussian rejection sampler starved",
            ))
        }
        NoiseDistribution::ExplicitMoments(_) => Err(Error::invalid(
            "explicit-moment distributions cannot be sampled",
        )),
    }
}

/// Box-Muller; no lookup tables, identical on every platform.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draw one initial state.
pub fn sample_initial<T: Scalar>(spec: &SystemSpec<T>, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
    match &spec.initial {
        InitialStateModel::IndependentProduct(dists) => {
            dists.iter().map(|d| sample_distribution(d, rng)).collect()
        }
        InitialStateModel::Functional { base, maps } => {
            let w: Vec<T> = base
                .iter()
                .map(|d| sample_distribution(d, rng))
                .collect::<Result<_>>()?;
            Ok(maps.iter().map(|m| m.eval(&w)).collect())
        }
        InitialStateModel::ExplicitMoments(_) => Err(Error::invalid(
            "explicit-moment initial models cannot be sampled",
        )),
    }
}

/// Simulate the raw recursion `x(t+1) = Σ_i F_i(t) x^[i](t)` in plain
/// arithmetic (no propagator machinery), redrawing every noise symbol
/// each step.
pub fn simulate<T: Scalar>(
    spec: &SystemSpec<T>,
    samples: usize,
    horizon: u32,
    seed: u64,
) -> Result<SimulationRun<T>> {
    if samples == 0 {
        return Err(Error::invalid("at least one sample required"));
    }
    spec.validate()?;
    let mut states = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64 + 1);
        let mut x = sample_initial(spec, &mut rng)?;
        let mut traj = Vec::with_capacity(horizon as usize + 1);
        traj.push(x.clone());
        for _ in 0..horizon {
            let noise: Vec<T> = spec
                .noise
                .iter()
                .map(|sym| sample_distribution(&sym.distribution, &mut rng))
                .collect::<Result<_>>()?;
            let mut next = vec![T::zero(); spec.n];
            for c in &spec.coeffs {
                let powers = match spec.mode {
                    Mode::Full => kron_power(&x, c.degree),
                    Mode::Reduced => reduced_kron_power(&x, c.degree),
                };
                for (&(row, col), poly) in &c.entries {
                    next[row] += poly.evaluate(&noise) * powers[col];
                }
            }
            x = next;
            traj.push(x.clone());
        }
        states.push(traj);
    }
    Ok(SimulationRun {
        seed,
        samples,
        horizon,
        n: spec.n,
        mode: spec.mode,
        states,
    })
}

impl<T: Scalar> SimulationRun<T> {
    pub fn state(&self, sample: usize, t: u32) -> &[T] {
        &self.states[sample][t as usize]
    }

    /// Sample average of the degree-`j` power vector at time `t`.
    pub fn empirical_moment(&self, j: u32, t: u32) -> Result<Vec<T>> {
        self.check_t(t)?;
        let width = self.mode.block_len(self.n, j);
        let mut acc = vec![T::zero(); width];
        for s in 0..self.samples {
            let p = match self.mode {
                Mode::Full => kron_power(self.state(s, t), j),
                Mode::Reduced => reduced_kron_power(self.state(s, t), j),
            };
            for (a, v) in acc.iter_mut().zip(p) {
                *a += v;
            }
        }
        let inv = T::one() / T::from_usize_lit(self.samples);
        Ok(acc.into_iter().map(|v| v * inv).collect())
    }

    /// Per-coordinate standard error of the degree-`j` empirical moment.
    pub fn empirical_moment_stderr(&self, j: u32, t: u32) -> Result<Vec<T>> {
        self.check_t(t)?;
        let mean = self.empirical_moment(j, t)?;
        let width = mean.len();
        let mut ss = vec![T::zero(); width];
        for s in 0..self.samples {
            let p = match self.mode {
                Mode::Full => kron_power(self.state(s, t), j),
                Mode::Reduced => reduced_kron_power(self.state(s, t), j),
            };
            for ((acc, &m), v) in ss.iter_mut().zip(&mean).zip(p) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let denom = T::from_usize_lit(self.samples.saturating_sub(1).max(1))
            * T::from_usize_lit(self.samples);
        Ok(ss.into_iter().map(|v| (v / denom).sqrt()).collect())
    }

    /// Fraction of samples inside the region at time `t`.
    pub fn coverage(&self, region: &SafetyEllipsoid<T>, t: u32) -> Result<T> {
        self.check_t(t)?;
        let mut inside = 0usize;
        for s in 0..self.samples {
            if region.contains(self.state(s, t)) {
                inside += 1;
            }
        }
        Ok(T::from_usize_lit(inside) / T::from_usize_lit(self.samples))
    }

    fn check_t(&self, t: u32) -> Result<()> {
        if t > self.horizon {
            return Err(Error::invalid(format!(
                "time {t} beyond simulated horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Result of the exhaustive 2×2 max-det grid search.
#[derive(Debug, Clone)]
pub struct GridSearchResult<T> {
    /// best feasible `(q11, q12, q22)` and its determinant
    pub best: Option<([T; 3], T)>,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Exhaustive search over symmetric positive-definite `Q` on a grid,
/// subject to `⟨Q, C⟩ ≤ b·α²`; the oracle for the closed-form solution.
pub fn grid_maxdet_check<T: Scalar>(
    c: &[T],
    b: T,
    alpha: T,
    resolution: usize,
) -> Result<GridSearchResult<T>> {
    if c.len() != 4 {
        return Err(Error::dims("grid search supports 2×2 covariances only"));
    }
    let budget = b * alpha * alpha;
    // any feasible Q has trace(Q) ≤ budget / λ_min(C)
    let lmin = {
        let tr = c[0] + c[3];
        let det = c[0] * c[3] - c[1] * c[2];
        let half = T::from_f64_lit(0.5);
        let disc = (tr * tr - T::from_f64_lit(4.0) * det).max(T::zero()).sqrt();
        half * (tr - disc)
    };
    if !(lmin > T::zero()) {
        return Err(Error::invalid("grid search needs a positive-definite C"));
    }
    let qmax = budget / lmin;
    let res = resolution.max(2);
    let step = qmax / T::from_usize_lit(res);
    let mut out = GridSearchResult {
        best: None,
        evaluated: 0,
        feasible: 0,
    };
    for i in 1..=res {
        let q11 = step * T::from_usize_lit(i);
        for j in 1..=res {
            let q22 = step * T::from_usize_lit(j);
            for k in 0..=(2 * res) {
                let q12 = step * T::from_usize_lit(k) - qmax;
                out.evaluated += 1;
                let det = q11 * q22 - q12 * q12;
                if det <= T::zero() {
                    continue;
                }
                let trace_qc = q11 * c[0] + q12 * (c[1] + c[2]) + q22 * c[3];
                if trace_qc > budget {
                    continue;
                }
                out.feasible += 1;
                if out.best.as_ref().is_none_or(|(_, d)| det > *d) {
                    out.best = Some(([q11, q12, q22], det));
                }
            }
        }
    }
    Ok(out)
}

/// Literal nested-loop evaluation of the truncation error for scalar
/// systems over at most two steps; validates the matrix-difference
/// construction once, nothing more.
pub fn direct_error_expansion_small<T: Scalar>(
    spec: &SystemSpec<T>,
    n_t: u32,
    j0: u32,
    t: u32,
) -> Result<T> {
    if spec.n != 1 || t > 2 {
        return Err(Error::invalid(
            "direct expansion is deliberately limited to n = 1, t ≤ 2",
        ));
    }
    let budget = BuildBudget::default();
    let nu = spec.degree;
    let block = |j: u32, k: u32| -> Result<T> {
        if k > j * nu {
            return Ok(T::zero());
        }
        Ok(crate::carleman::expected_block(spec, j, k, &budget)?.get(0, 0))
    };
    let max_deg = j0 * nu.pow(t);
    let m = initial_moments(spec, max_deg)?;
    let m = |j: u32| m[j as usize][0];
    match t {
        0 => Ok(T::zero()),
        1 => {
            let mut acc = T::zero();
            for j1 in (n_t + 1)..=(j0 * nu) {
                acc += block(j0, j1)? * m(j1);
            }
            Ok(acc)
        }
        2 => {
            let mut acc = T::zero();
            // escape at the first step
            for j1 in (n_t + 1)..=(j0 * nu) {
                let mut inner = T::zero();
                for j2 in 0..=(j1 * nu) {
                    inner += block(j1, j2)? * m(j2);
                }
                acc += block(j0, j1)? * inner;
            }
            // escape at the second step
            for j1 in 0..=n_t.min(j0 * nu) {
                let mut inner = T::zero();
                for j2 in (n_t + 1)..=(j1 * nu) {
                    inner += block(j1, j2)? * m(j2);
                }
                acc += block(j0, j1)? * inner;
            }
            Ok(acc)
        }
        _ => unreachable!(),
    }
}
