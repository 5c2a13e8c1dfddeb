//! Declaration of stochastic polynomial systems.
//!
//! A system is `x(t+1) = Σ_i F_i(t) x^[i](t)` where the entries of the
//! coefficient matrices are polynomials in named noise symbols. Fresh
//! i.i.d. copies of every symbol are drawn at each time step; within a
//! step, distinct symbols are mutually independent and dependence is
//! expressed by sharing a symbol across entries (or across different
//! `F_i`). Everything downstream only ever needs expectations of
//! noise-symbol monomials, so distributions enter through their moments.

pub mod parse;
pub mod quadrature;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kron::{self, IndexSet, MultiIndex};
use crate::scalar::Scalar;

/// Scalar noise distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseDistribution<T> {
    Uniform {
        a: T,
        b: T,
    },
    Gaussian {
        mean: T,
        std: T,
    },
    TruncatedGaussian {
        mean: T,
        std: T,
        lo: T,
        hi: T,
    },
    /// Raw moments `m_0 … m_K`, `m_0 = 1`.
    ExplicitMoments(Vec<T>),
}

impl<T: Scalar> NoiseDistribution<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseDistribution::Uniform { a, b } => {
                if !(a < b) {
                    return Err(Error::invalid("uniform distribution requires a < b"));
                }
            }
            NoiseDistribution::Gaussian { std, .. } => {
                if !(*std > T::zero()) {
                    return Err(Error::invalid("gaussian distribution requires std > 0"));
                }
            }
            NoiseDistribution::TruncatedGaussian { std, lo, hi, .. } => {
                if !(*std > T::zero()) {
                    return Err(Error::invalid("truncated gaussian requires std > 0"));
                }
                if !(lo < hi) {
                    return Err(Error::invalid("truncated gaussian requires lo < hi"));
                }
            }
            NoiseDistribution::ExplicitMoments(m) => {
                if m.is_empty() || (m[0] - T::one()).abs() > T::from_f64_lit(1e-12) {
                    return Err(Error::invalid("explicit moments must start with m_0 = 1"));
                }
            }
        }
        Ok(())
    }

    /// `E[w^k]`.
    pub fn moment(&self, k: u32) -> Result<T> {
        Ok(self.moments_upto(k)?[k as usize])
    }

    /// `E[w^0] … E[w^kmax]` in one pass.
    ///
    /// Uniform uses the closed form `(b^{k+1} − a^{k+1}) / ((k+1)(b−a))`,
    /// the gaussian the two-term recursion
    /// `m_k = μ m_{k−1} + (k−1) σ² m_{k−2}`, and the truncated gaussian a
    /// single adaptive quadrature pass shared by all powers (relative
    /// tolerance 1e-12), normalized by the window mass so no CDF is
    /// needed.
    pub fn moments_upto(&self, kmax: u32) -> Result<Vec<T>> {
        let len = kmax as usize + 1;
        match self {
            NoiseDistribution::Uniform { a, b } => {
                let mut out = Vec::with_capacity(len);
                let mut pa = *a; // a^{k+1}
                let mut pb = *b;
                for k in 0..len {
                    let kf = T::from_usize_lit(k + 1);
                    out.push((pb - pa) / (kf * (*b - *a)));
                    pa *= *a;
                    pb *= *b;
                }
                Ok(out)
            }
            NoiseDistribution::Gaussian { mean, std } => {
                let var = *std * *std;
                let mut out = Vec::with_capacity(len);
                out.push(T::one());
                if kmax >= 1 {
                    out.push(*mean);
                }
                for k in 2..len {
                    let m = *mean * out[k - 1] + T::from_usize_lit(k - 1) * var * out[k - 2];
                    out.push(m);
                }
                Ok(out)
            }
            NoiseDistribution::TruncatedGaussian { mean, std, lo, hi } => {
                let mu = *mean;
                let sig = *std;
                let mut f = |x: T, out: &mut [T]| {
                    let z = (x - mu) / sig;
                    let w = (-(z * z) * T::from_f64_lit(0.5)).exp();
                    let mut p = T::one();
                    for slot in out.iter_mut() {
                        *slot = p * w;
                        p *= x;
                    }
                };
                let raw = quadrature::integrate_vector(
                    &mut f,
                    len + 1,
                    *lo,
                    *hi,
                    T::from_f64_lit(1e-12),
                )?;
                let mass = raw[0];
                if !(mass > T::zero()) {
                    return Err(Error::numeric("truncated gaussian has no mass in window"));
                }
                Ok(raw[..len].iter().map(|&v| v / mass).collect())
            }
            NoiseDistribution::ExplicitMoments(m) => {
                if len > m.len() {
                    return Err(Error::invalid(format!(
                        "moment of order {kmax} beyond stored horizon {}",
                        m.len() - 1
                    )));
                }
                Ok(m[..len].to_vec())
            }
        }
    }
}

/// Named noise symbol with its distribution.
#[derive(Debug, Clone)]
pub struct NoiseSymbol<T> {
    pub name: String,
    pub distribution: NoiseDistribution<T>,
}

/// Polynomial in the noise symbols of one system; keys are exponent
/// tuples over the symbol list.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePolynomial<T> {
    nsyms: usize,
    terms: BTreeMap<Vec<u16>, T>,
}

impl<T: Scalar> NoisePolynomial<T> {
    pub fn zero(nsyms: usize) -> Self {
        NoisePolynomial {
            nsyms,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T, nsyms: usize) -> Self {
        let mut p = Self::zero(nsyms);
        p.add_term(vec![0; nsyms], c);
        p
    }

    pub fn symbol(idx: usize, nsyms: usize) -> Self {
        let mut exps = vec![0u16; nsyms];
        exps[idx] = 1;
        let mut p = Self::zero(nsyms);
        p.add_term(exps, T::one());
        p
    }

    pub fn nsyms(&self) -> usize {
        self.nsyms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Add `c·w^exps`, pruning the term if the coefficient cancels.
    pub fn add_term(&mut self, exps: Vec<u16>, c: T) {
        debug_assert_eq!(exps.len(), self.nsyms);
        if c == T::zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let nv = *o.get() + c;
                if nv == T::zero() {
                    o.remove();
                } else {
                    *o.get_mut() = nv;
                }
            }
        }
    }

    pub fn add(&mut self, other: &NoisePolynomial<T>) {
        for (e, &c) in &other.terms {
            self.add_term(e.clone(), c);
        }
    }

    pub fn scaled(&self, s: T) -> NoisePolynomial<T> {
        let mut out = Self::zero(self.nsyms);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    /// Distributive product with exponent addition.
    pub fn multiply(&self, other: &NoisePolynomial<T>) -> NoisePolynomial<T> {
        debug_assert_eq!(self.nsyms, other.nsyms);
        let mut out = Self::zero(self.nsyms);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let exps: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        out
    }

    /// `E[p]` given per-symbol moment tables (`tables[s][k] = E[w_s^k]`).
    /// Shared symbols across factors have already been merged into joint
    /// exponents, so independence applies per distinct symbol only.
    pub fn expectation(&self, tables: &[Vec<T>]) -> Result<T> {
        let mut acc = T::zero();
        for (exps, &c) in &self.terms {
            let mut m = c;
            for (s, &e) in exps.iter().enumerate() {
                if e > 0 {
                    let table = &tables[s];
                    let idx = e as usize;
                    if idx >= table.len() {
                        return Err(Error::invalid(format!(
                            "noise moment of order {e} not available for symbol {s}"
                        )));
                    }
                    m *= table[idx];
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Evaluate at concrete symbol values (used by the simulator).
    pub fn evaluate(&self, vals: &[T]) -> T {
        let mut acc = T::zero();
        for (exps, &c) in &self.terms {
            let mut m = c;
            for (s, &e) in exps.iter().enumerate() {
                if e > 0 {
                    m *= vals[s].powi(e as i32);
                }
            }
            acc += m;
        }
        acc
    }

    /// Largest exponent of any symbol over all terms.
    pub fn max_power(&self) -> u16 {
        self.terms
            .keys()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

/// Whether vectors and matrices are indexed by full Kronecker positions
/// or by distinct monomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full,
    Reduced,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Reduced => "reduced",
        }
    }

    /// Width of the degree-`m` coordinate block.
    pub fn block_len(self, n: usize, m: u32) -> usize {
        match self {
            Mode::Full => n.pow(m),
            Mode::Reduced => kron::index_set_len(n, m),
        }
    }
}

/// Coefficient matrix of one polynomial degree; sparse entries over
/// noise polynomials.
#[derive(Debug, Clone)]
pub struct CoeffMatrix<T> {
    pub degree: u32,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), NoisePolynomial<T>>,
}

impl<T: Scalar> CoeffMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// A discrete-time stochastic polynomial system.
#[derive(Debug, Clone)]
pub struct SystemSpec<T> {
    pub name: String,
    pub n: usize,
    /// Polynomial degree ν of the dynamics.
    pub degree: u32,
    pub mode: Mode,
    pub noise: Vec<NoiseSymbol<T>>,
    /// ν+1 coefficient matrices, index = monomial degree fed in.
    pub coeffs: Vec<CoeffMatrix<T>>,
    pub initial: InitialStateModel<T>,
    /// SHA-256 of the source file (or of the canonical rendering for
    /// specs assembled in memory).
    pub content_hash: String,
}

impl<T: Scalar> SystemSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("state dimension must be at least 1"));
        }
        if self.coeffs.len() != self.degree as usize + 1 {
            return Err(Error::invalid(format!(
                "expected {} coefficient matrices, found {}",
                self.degree + 1,
                self.coeffs.len()
            )));
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.degree != i as u32 {
                return Err(Error::invalid("coefficient matrices out of order"));
            }
            let want = self.mode.block_len(self.n, i as u32);
            if c.cols != want {
                return Err(Error::invalid(format!(
                    "coefficient matrix of degree {i} must have {want} columns, has {}",
                    c.cols
                )));
            }
            for (&(r, col), p) in &c.entries {
                if r >= self.n || col >= c.cols {
                    return Err(Error::invalid("coefficient entry out of range"));
                }
                if p.nsyms() != self.noise.len() {
                    return Err(Error::invalid("entry polynomial over wrong symbol set"));
                }
            }
        }
        for s in &self.noise {
            s.distribution.validate()?;
        }
        match &self.initial {
            InitialStateModel::IndependentProduct(dists) => {
                if dists.len() != self.n {
                    return Err(Error::invalid("initial model must cover every dimension"));
                }
                for d in dists {
                    d.validate()?;
                }
            }
            InitialStateModel::Functional { base, maps } => {
                if maps.len() != self.n {
                    return Err(Error::invalid("initial model must cover every dimension"));
                }
                for d in base {
                    d.validate()?;
                }
                for m in maps {
                    m.validate(base.len())?;
                }
            }
            InitialStateModel::ExplicitMoments(vs) => {
                for (j, v) in vs.iter().enumerate() {
                    if v.len() != self.mode.block_len(self.n, j as u32) {
                        return Err(Error::invalid(format!(
                            "explicit moment vector of degree {j} has wrong length"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn nsyms(&self) -> usize {
        self.noise.len()
    }

    /// Moment tables for every symbol up to `max_power`.
    pub fn noise_moment_tables(&self, max_power: u32) -> Result<Vec<Vec<T>>> {
        self.noise
            .iter()
            .map(|s| s.distribution.moments_upto(max_power))
            .collect()
    }

    /// One-step update of each state coordinate as a polynomial in the
    /// state monomials, with noise-polynomial coefficients.
    pub fn update_polynomials(&self) -> Result<Vec<BTreeMap<Vec<u16>, NoisePolynomial<T>>>> {
        let mut out: Vec<BTreeMap<Vec<u16>, NoisePolynomial<T>>> = vec![BTreeMap::new(); self.n];
        for c in &self.coeffs {
            let set = IndexSet::new(self.n, c.degree);
            for (&(row, col), p) in &c.entries {
                let idx = match self.mode {
                    Mode::Reduced => set.get(col).clone(),
                    Mode::Full => MultiIndex::of_full_position(self.n, c.degree, col),
                };
                let key = idx.exponents().to_vec();
                match out[row].entry(key) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(p.clone());
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        o.get_mut().add(p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reduced-mode version of the spec: columns of each coefficient
    /// matrix summed per monomial class.
    pub fn to_reduced(&self) -> SystemSpec<T> {
        if self.mode == Mode::Reduced {
            return self.clone();
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let set = IndexSet::new(self.n, c.degree);
            let mut entries: BTreeMap<(usize, usize), NoisePolynomial<T>> = BTreeMap::new();
            for (&(row, col), p) in &c.entries {
                let idx = MultiIndex::of_full_position(self.n, c.degree, col);
                let rank = set.rank(&idx).expect("column within degree class");
                match entries.entry((row, rank)) {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(p.clone());
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        o.get_mut().add(p);
                    }
                }
            }
            coeffs.push(CoeffMatrix {
                degree: c.degree,
                cols: set.len(),
                entries,
            });
        }
        SystemSpec {
            mode: Mode::Reduced,
            coeffs,
            ..self.clone()
        }
    }

    /// Full-mode version: each reduced coefficient is placed on the
    /// representative Kronecker column of its class. Entries of `x^[k]`
    /// are equal within a class, so the moment dynamics are unchanged.
    pub fn to_full(&self) -> Result<SystemSpec<T>> {
        if self.mode == Mode::Full {
            return Ok(self.clone());
        }
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            let map = kron::ReductionMap::new(self.n, c.degree)?;
            let set = IndexSet::new(self.n, c.degree);
            let _ = set;
            let mut entries: BTreeMap<(usize, usize), NoisePolynomial<T>> = BTreeMap::new();
            for (&(row, col), p) in &c.entries {
                let full_col = map.representatives()[col];
                entries.insert((row, full_col), p.clone());
            }
            coeffs.push(CoeffMatrix {
                degree: c.degree,
                cols: map.full_len(),
                entries,
            });
        }
        Ok(SystemSpec {
            mode: Mode::Full,
            coeffs,
            ..self.clone()
        })
    }
}

/// How the initial state is specified.
#[derive(Debug, Clone)]
pub enum InitialStateModel<T> {
    /// Independent coordinates, one distribution each.
    IndependentProduct(Vec<NoiseDistribution<T>>),
    /// `x_ini = g(w)` for an independent base vector `w`; each
    /// coordinate map is a polynomial or a trig function of an affine
    /// form in `w`.
    Functional {
        base: Vec<NoiseDistribution<T>>,
        maps: Vec<StateMap<T>>,
    },
    /// Verbatim moment vectors `E[x_ini^[j]]`, `j = 0…`, in the spec's
    /// coordinate mode.
    ExplicitMoments(Vec<Vec<T>>),
}

/// One coordinate of a functional initial-state model.
#[derive(Debug, Clone)]
pub enum StateMap<T> {
    /// Multivariate polynomial in the base vector: terms `(powers, coeff)`.
    Polynomial(Vec<(Vec<u16>, T)>),
    /// `cos(shift + Σ_k weights[k]·w_k)`
    CosAffine { shift: T, weights: Vec<T> },
    /// `sin(shift + Σ_k weights[k]·w_k)`
    SinAffine { shift: T, weights: Vec<T> },
}

impl<T: Scalar> StateMap<T> {
    pub fn validate(&self, nbase: usize) -> Result<()> {
        match self {
            StateMap::Polynomial(terms) => {
                if terms.iter().any(|(p, _)| p.len() != nbase) {
                    return Err(Error::invalid("polynomial map over wrong base size"));
                }
            }
            StateMap::CosAffine { weights, .. } | StateMap::SinAffine { weights, .. } => {
                if weights.len() != nbase {
                    return Err(Error::invalid("affine map over wrong base size"));
                }
            }
        }
        Ok(())
    }

    /// Base variables the map actually depends on.
    pub fn active_vars(&self) -> Vec<usize> {
        match self {
            StateMap::Polynomial(terms) => {
                let mut vars: Vec<usize> = Vec::new();
                for (powers, _) in terms {
                    for (v, &p) in powers.iter().enumerate() {
                        if p > 0 && !vars.contains(&v) {
                            vars.push(v);
                        }
                    }
                }
                vars.sort_unstable();
                vars
            }
            StateMap::CosAffine { weights, .. } | StateMap::SinAffine { weights, .. } => weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != T::zero())
                .map(|(v, _)| v)
                .collect(),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, StateMap::Polynomial(_))
    }

    pub fn eval(&self, w: &[T]) -> T {
        match self {
            StateMap::Polynomial(terms) => {
                let mut acc = T::zero();
                for (powers, c) in terms {
                    let mut m = *c;
                    for (v, &p) in powers.iter().enumerate() {
                        if p > 0 {
                            m *= w[v].powi(p as i32);
                        }
                    }
                    acc += m;
                }
                acc
            }
            StateMap::CosAffine { shift, weights } => affine(*shift, weights, w).cos(),
            StateMap::SinAffine { shift, weights } => affine(*shift, weights, w).sin(),
        }
    }
}

fn affine<T: Scalar>(shift: T, weights: &[T], w: &[T]) -> T {
    let mut acc = shift;
    for (&c, &x) in weights.iter().zip(w) {
        if c != T::zero() {
            acc += c * x;
        }
    }
    acc
}

mod initial;

pub use initial::initial_moments;

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(a: f64, b: f64) -> NoiseDistribution<f64> {
        NoiseDistribution::Uniform { a, b }
    }

    #[test]
    fn standard_normal_fourth_moment_is_three() {
        let d = NoiseDistribution::Gaussian {
            mean: 0.0f64,
            std: 1.0,
        };
        assert!((d.moment(4).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_first_moment_is_midpoint() {
        assert!((uniform(0.4, 0.6).moment(1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_second_moment_closed_form_and_quadrature_agree() {
        let d = uniform(0.4, 0.6);
        let closed = d.moment(2).unwrap();
        assert!((closed - 0.25333333333333333).abs() < 1e-15);
        // independent cross-check through plain quadrature of x²/(b−a)
        let mut f = |x: f64| x * x / 0.2;
        let quad = quadrature::integrate(&mut f, 0.4, 0.6, 1e-13).unwrap();
        assert!((closed - quad).abs() < 1e-13);
    }

    #[test]
    fn gaussian_recursion_matches_quadrature() {
        let (mu, sigma) = (0.3, 0.7);
        let d = NoiseDistribution::Gaussian {
            mean: mu,
            std: sigma,
        };
        let table = d.moments_upto(16).unwrap();
        for k in 0..=16u32 {
            let mut f = |x: f64| {
                let z = (x - mu) / sigma;
                x.powi(k as i32) * (-0.5 * z * z).exp()
                    / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            };
            let quad =
                quadrature::integrate(&mut f, mu - 14.0 * sigma, mu + 14.0 * sigma, 1e-12).unwrap();
            let rel = (table[k as usize] - quad).abs() / quad.abs().max(1e-300);
            assert!(rel < 1e-10, "k={k}: {} vs {quad}", table[k as usize]);
        }
    }

    #[test]
    fn truncated_gaussian_symmetric_mean() {
        let d = NoiseDistribution::TruncatedGaussian {
            mean: 0.5f64,
            std: 0.1,
            lo: 0.0,
            hi: 1.0,
        };
        assert!((d.moment(1).unwrap() - 0.5).abs() < 1e-12);
        // second moment ≈ μ² + σ² up to the small ±5σ truncation correction
        let m2 = d.moment(2).unwrap();
        assert!((m2 - 0.26).abs() < 1e-6, "{m2}");
    }

    #[test]
    fn explicit_moments_respect_horizon() {
        let d = NoiseDistribution::ExplicitMoments(vec![1.0f64, 0.5, 0.3]);
        assert!((d.moment(2).unwrap() - 0.3).abs() == 0.0);
        assert!(d.moment(3).is_err());
    }

    #[test]
    fn shared_symbol_product_expectation() {
        // E[-a·a] = -E[a²] for a ~ U[0.4, 0.6], not -(E[a])²
        let a = NoisePolynomial::<f64>::symbol(0, 1);
        let minus_a = a.scaled(-1.0);
        let prod = a.multiply(&minus_a);
        let tables = vec![uniform(0.4, 0.6).moments_upto(2).unwrap()];
        let e = prod.expectation(&tables).unwrap();
        assert!((e + 0.25333333333333333).abs() < 1e-15);
    }

    #[test]
    fn poly_multiply_expands_products() {
        // (1+a)(1−a) = 1 − a²
        let mut onep = NoisePolynomial::<f64>::constant(1.0, 1);
        onep.add(&NoisePolynomial::symbol(0, 1));
        let mut onem = NoisePolynomial::<f64>::constant(1.0, 1);
        onem.add(&NoisePolynomial::symbol(0, 1).scaled(-1.0));
        let prod = onep.multiply(&onem);
        assert_eq!(prod.num_terms(), 2);
        let tables = vec![uniform(0.0, 1.0).moments_upto(2).unwrap()];
        // E[1 − a²] with a ~ U[0,1] is 1 − 1/3
        assert!((prod.expectation(&tables).unwrap() - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn poly_terms_cancel_to_zero() {
        let mut p = NoisePolynomial::<f64>::symbol(0, 1);
        p.add(&NoisePolynomial::symbol(0, 1).scaled(-1.0));
        assert!(p.is_zero());
    }
}
