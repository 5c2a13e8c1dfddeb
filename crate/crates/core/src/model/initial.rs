//! Initial-state moment vectors `E[x_ini^[j]]`.
//!
//! Independent-product models factor analytically through per-dimension
//! moment tables. Functional models factor over groups of coordinates
//! that share base variables; a group of purely polynomial maps is
//! expanded symbolically and reduced to base-variable moments, while
//! groups containing trig maps are integrated by adaptive quadrature
//! against the base densities (joint dimension capped at 3).

use std::collections::BTreeMap;

use super::quadrature;
use super::{InitialStateModel, Mode, NoiseDistribution, StateMap, SystemSpec};
use crate::error::{Error, Result};
use crate::kron::{IndexSet, MultiIndex};
use crate::scalar::Scalar;

/// `E[x_ini^[j]]` for `j = 0…jmax`, in the spec's coordinate mode.
pub fn initial_moments<T: Scalar>(spec: &SystemSpec<T>, jmax: u32) -> Result<Vec<Vec<T>>> {
    initial_moments_in_mode(spec, jmax, spec.mode)
}

/// Same, with an explicit target mode (full-mode vectors are filled by
/// evaluating the class monomial at every Kronecker position).
pub fn initial_moments_in_mode<T: Scalar>(
    spec: &SystemSpec<T>,
    jmax: u32,
    mode: Mode,
) -> Result<Vec<Vec<T>>> {
    match &spec.initial {
        InitialStateModel::ExplicitMoments(vs) => {
            if (jmax as usize) >= vs.len() {
                return Err(Error::invalid(format!(
                    "initial moments of degree {jmax} beyond stored horizon {}",
                    vs.len().saturating_sub(1)
                )));
            }
            if mode != spec.mode {
                return Err(Error::invalid(
                    "explicit initial moments are only available in the spec's own mode",
                ));
            }
            Ok(vs[..=jmax as usize].to_vec())
        }
        InitialStateModel::IndependentProduct(dists) => {
            let tables: Vec<Vec<T>> = dists
                .iter()
                .map(|d| d.moments_upto(jmax))
                .collect::<Result<_>>()?;
            let eval = |idx: &MultiIndex| -> T {
                let mut acc = T::one();
                for (dim, &e) in idx.exponents().iter().enumerate() {
                    if e > 0 {
                        acc *= tables[dim][e as usize];
                    }
                }
                acc
            };
            moments_from_monomial_eval(spec.n, jmax, mode, eval)
        }
        InitialStateModel::Functional { base, maps } => {
            let mut ctx = FunctionalCtx::new(base, maps)?;
            let eval = |idx: &MultiIndex| ctx.monomial_moment(idx.exponents());
            moments_from_monomial_eval_res(spec.n, jmax, mode, eval)
        }
    }
}

fn moments_from_monomial_eval<T: Scalar>(
    n: usize,
    jmax: u32,
    mode: Mode,
    mut eval: impl FnMut(&MultiIndex) -> T,
) -> Result<Vec<Vec<T>>> {
    moments_from_monomial_eval_res(n, jmax, mode, |idx| Ok(eval(idx)))
}

fn moments_from_monomial_eval_res<T: Scalar>(
    n: usize,
    jmax: u32,
    mode: Mode,
    mut eval: impl FnMut(&MultiIndex) -> Result<T>,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(jmax as usize + 1);
    for j in 0..=jmax {
        let set = IndexSet::new(n, j);
        let mut reduced = Vec::with_capacity(set.len());
        for idx in set.members() {
            reduced.push(eval(idx)?);
        }
        match mode {
            Mode::Reduced => out.push(reduced),
            Mode::Full => {
                let full_len = n.pow(j);
                let mut full = Vec::with_capacity(full_len);
                for pos in 0..full_len {
                    let idx = MultiIndex::of_full_position(n, j, pos);
                    let rank = set.rank(&idx).expect("position degree matches");
                    full.push(reduced[rank]);
                }
                out.push(full);
            }
        }
    }
    Ok(out)
}

/// Shared state for functional-model moment computation: lazily grown
/// per-variable moment tables plus a cache of group expectations.
struct FunctionalCtx<'a, T> {
    base: &'a [NoiseDistribution<T>],
    maps: &'a [StateMap<T>],
    active: Vec<Vec<usize>>,
    var_tables: Vec<Vec<T>>,
    group_cache: BTreeMap<Vec<(usize, u16)>, T>,
}

impl<'a, T: Scalar> FunctionalCtx<'a, T> {
    fn new(base: &'a [NoiseDistribution<T>], maps: &'a [StateMap<T>]) -> Result<Self> {
        Ok(FunctionalCtx {
            base,
            maps,
            active: maps.iter().map(|m| m.active_vars()).collect(),
            var_tables: vec![Vec::new(); base.len()],
            group_cache: BTreeMap::new(),
        })
    }

    fn var_moment(&mut self, var: usize, k: u32) -> Result<T> {
        if (k as usize) >= self.var_tables[var].len() {
            let want = k.max(8) * 2;
            self.var_tables[var] = self.base[var].moments_upto(want)?;
        }
        Ok(self.var_tables[var][k as usize])
    }

    /// `E[Π_i x_i^{exps[i]}]` where `x_i = map_i(w)`.
    fn monomial_moment(&mut self, exps: &[u16]) -> Result<T> {
        let factors: Vec<(usize, u16)> = exps
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i, e))
            .collect();
        if factors.is_empty() {
            return Ok(T::one());
        }
        let groups = group_by_shared_vars(&factors, &self.active);
        let mut acc = T::one();
        for group in groups {
            acc *= self.group_moment(&group)?;
        }
        Ok(acc)
    }

    fn group_moment(&mut self, group: &[(usize, u16)]) -> Result<T> {
        if let Some(&v) = self.group_cache.get(group) {
            return Ok(v);
        }
        let all_poly = group.iter().all(|&(i, _)| self.maps[i].is_polynomial());
        let v = if all_poly {
            self.polynomial_group_moment(group)?
        } else {
            self.quadrature_group_moment(group)?
        };
        self.group_cache.insert(group.to_vec(), v);
        Ok(v)
    }

    /// Exact path: expand Π map_i^{e_i} into base monomials, then take
    /// expectations variable by variable.
    fn polynomial_group_moment(&mut self, group: &[(usize, u16)]) -> Result<T> {
        let nbase = self.base.len();
        let mut prod: BTreeMap<Vec<u16>, T> = BTreeMap::new();
        prod.insert(vec![0; nbase], T::one());
        for &(i, e) in group {
            let StateMap::Polynomial(terms) = &self.maps[i] else {
                unreachable!("polynomial group");
            };
            for _ in 0..e {
                let mut next: BTreeMap<Vec<u16>, T> = BTreeMap::new();
                for (pa, &ca) in &prod {
                    for (pb, cb) in terms {
                        let key: Vec<u16> = pa.iter().zip(pb).map(|(a, b)| a + b).collect();
                        let c = ca * *cb;
                        *next.entry(key).or_insert_with(T::zero) += c;
                    }
                }
                prod = next;
            }
        }
        let mut acc = T::zero();
        for (powers, c) in prod {
            let mut m = c;
            for (var, &p) in powers.iter().enumerate() {
                if p > 0 {
                    m *= self.var_moment(var, p as u32)?;
                }
            }
            acc += m;
        }
        Ok(acc)
    }

    /// Quadrature path for groups containing trig maps; integrates the
    /// product against the joint base density over the group's variables.
    fn quadrature_group_moment(&mut self, group: &[(usize, u16)]) -> Result<T> {
        let mut vars: Vec<usize> = Vec::new();
        for &(i, _) in group {
            for &v in &self.active[i] {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
        }
        vars.sort_unstable();
        if vars.is_empty() {
            // constant maps; evaluate directly
            let w = vec![T::zero(); self.base.len()];
            let mut acc = T::one();
            for &(i, e) in group {
                acc *= self.maps[i].eval(&w).powi(e as i32);
            }
            return Ok(acc);
        }
        let axes: Vec<(T, T)> = vars
            .iter()
            .map(|&v| integration_window(&self.base[v]))
            .collect();
        let nbase = self.base.len();
        let maps = self.maps;
        let base = self.base;
        let vars_ref = &vars;
        let integrand = move |point: &[T]| -> T {
            let mut w = vec![T::zero(); nbase];
            for (slot, &v) in vars_ref.iter().enumerate() {
                w[v] = point[slot];
            }
            let mut acc = T::one();
            for &(i, e) in group {
                acc *= maps[i].eval(&w).powi(e as i32);
            }
            for (slot, &v) in vars_ref.iter().enumerate() {
                acc *= density(&base[v], point[slot]);
            }
            acc
        };
        let raw = quadrature::integrate_box(&axes, &integrand, T::from_f64_lit(1e-11))?;
        // normalize by the window mass of each axis density
        let mut mass = T::one();
        for &v in &vars {
            mass *= self.axis_mass(v)?;
        }
        Ok(raw / mass)
    }

    fn axis_mass(&mut self, var: usize) -> Result<T> {
        let (a, b) = integration_window(&self.base[var]);
        let d = &self.base[var];
        match d {
            NoiseDistribution::Uniform { .. } => Ok(T::one()),
            _ => {
                let dist = d.clone();
                let mut f = |x: T| density(&dist, x);
                quadrature::integrate(&mut f, a, b, T::from_f64_lit(1e-13))
            }
        }
    }
}

fn integration_window<T: Scalar>(d: &NoiseDistribution<T>) -> (T, T) {
    match d {
        NoiseDistribution::Uniform { a, b } => (*a, *b),
        NoiseDistribution::Gaussian { mean, std } => {
            let k = T::from_f64_lit(14.0);
            (*mean - k * *std, *mean + k * *std)
        }
        NoiseDistribution::TruncatedGaussian { lo, hi, .. } => (*lo, *hi),
        NoiseDistribution::ExplicitMoments(_) => {
            // no density; callers reject this earlier
            (T::zero(), T::one())
        }
    }
}

fn density<T: Scalar>(d: &NoiseDistribution<T>, x: T) -> T {
    match d {
        NoiseDistribution::Uniform { a, b } => T::one() / (*b - *a),
        NoiseDistribution::Gaussian { mean, std }
        | NoiseDistribution::TruncatedGaussian { mean, std, .. } => {
            let z = (x - *mean) / *std;
            let norm = *std * T::from_f64_lit((2.0 * std::f64::consts::PI).sqrt());
            (-(z * z) * T::from_f64_lit(0.5)).exp() / norm
        }
        NoiseDistribution::ExplicitMoments(_) => T::zero(),
    }
}

/// Union of factors that share base variables, as sorted disjoint groups.
fn group_by_shared_vars(factors: &[(usize, u16)], active: &[Vec<usize>]) -> Vec<Vec<(usize, u16)>> {
    let k = factors.len();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let (ia, ib) = (factors[a].0, factors[b].0);
            if active[ia].iter().any(|v| active[ib].contains(v)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<(usize, u16)>> = BTreeMap::new();
    for (i, &factor) in factors.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(factor);
    }
    groups.into_values().collect()
}
