//! Offline construction of expected update blocks.
//!
//! Two paths produce the same stacked row matrices:
//!
//! - **Full coordinates**: the symbolic block recursion
//!   `S(j,k) = Σ_d F_d ⊗ S(j−1, k−d)` over noise-polynomial entries,
//!   with expectation taken per entry once a level is complete. The
//!   recursion keeps one symbolic level alive and merges duplicate
//!   positions as it goes, which is what makes large scalar systems
//!   (n = 1, hundreds of degrees) cheap.
//! - **Reduced coordinates**: the row for monomial `α` of degree `j` is
//!   the expansion of `Π_i (x_i(t+1))^{α_i}` in the state monomials,
//!   computed by multiplying the per-coordinate update polynomials onto
//!   the parent row of degree `j−1`. Duplicate-monomial columns never
//!   exist in the first place.
//!
//! Construction is guarded by a byte budget: full mode is estimated
//! upfront from coefficient sparsity (so hopeless builds are refused
//! immediately), and both modes account live while building.

use std::collections::BTreeMap;

use super::StackLayout;
use crate::error::{Error, Result};
use crate::kron::{rank_descending, IndexSet, SparseMatrix, TripletBuilder};
use crate::model::{Mode, NoisePolynomial, SystemSpec};
use crate::scalar::Scalar;

/// Hard cap on stacked coordinate counts; degree chains blow up
/// exponentially and anything wider than this is not usable downstream.
pub(crate) const MAX_STACK_WIDTH: usize = 10_000_000;

/// Bytes a symbolic or numeric entry is charged at during accounting.
const ENTRY_BYTES: u64 = 48;

/// Memory budget for offline construction.
#[derive(Debug, Clone, Copy)]
pub struct BuildBudget {
    pub max_bytes: u64,
}

impl Default for BuildBudget {
    fn default() -> Self {
        // 1 GiB
        BuildBudget { max_bytes: 1 << 30 }
    }
}

impl BuildBudget {
    pub fn bytes(max_bytes: u64) -> Self {
        BuildBudget { max_bytes }
    }

    fn charge(&self, what: &str, used: u64) -> Result<()> {
        if used > self.max_bytes {
            return Err(Error::ResourceBudget {
                what: what.to_string(),
                needed: used,
                budget: self.max_bytes,
            });
        }
        Ok(())
    }
}

/// Stacked expected update rows: row blocks for degrees `0..=max_row`,
/// column blocks for degrees `0..=max_col`, in the spec's mode.
pub fn stacked_update_rows<T: Scalar>(
    spec: &SystemSpec<T>,
    max_row: u32,
    max_col: u32,
    budget: &BuildBudget,
) -> Result<SparseMatrix<T>> {
    spec.validate()?;
    let row_layout = StackLayout::new(spec.n, spec.mode, max_row);
    let col_layout = StackLayout::new(spec.n, spec.mode, max_col);
    if row_layout.total_len() > MAX_STACK_WIDTH || col_layout.total_len() > MAX_STACK_WIDTH {
        return Err(Error::ResourceBudget {
            what: "stacked coordinate space".into(),
            needed: row_layout.total_len().max(col_layout.total_len()) as u64,
            budget: MAX_STACK_WIDTH as u64,
        });
    }
    match spec.mode {
        Mode::Full => full_rows(spec, max_row, max_col, budget, &row_layout, &col_layout),
        Mode::Reduced => reduced_rows(spec, max_row, max_col, budget, &row_layout, &col_layout),
    }
}

fn max_entry_power<T: Scalar>(spec: &SystemSpec<T>) -> u32 {
    spec.coeffs
        .iter()
        .flat_map(|c| c.entries.values())
        .map(|p| p.max_power() as u32)
        .max()
        .unwrap_or(0)
}

// ---------------------------------------------------------------------
// full coordinates
// ---------------------------------------------------------------------

type SymBlock<T> = BTreeMap<(usize, usize), NoisePolynomial<T>>;

fn full_rows<T: Scalar>(
    spec: &SystemSpec<T>,
    max_row: u32,
    max_col: u32,
    budget: &BuildBudget,
    row_layout: &StackLayout,
    col_layout: &StackLayout,
) -> Result<SparseMatrix<T>> {
    let est = estimate_full_bytes(spec, max_row, max_col);
    budget.charge("full-mode block construction (estimated)", est)?;
    let pmax = max_entry_power(spec);
    let tables = spec.noise_moment_tables(pmax * max_row.max(1))?;

    let mut out = TripletBuilder::new(row_layout.total_len(), col_layout.total_len());
    // degree-0 level: the constant block [1]
    let mut prev: BTreeMap<u32, SymBlock<T>> = BTreeMap::new();
    let mut level0: SymBlock<T> = BTreeMap::new();
    level0.insert((0, 0), NoisePolynomial::constant(T::one(), spec.nsyms()));
    prev.insert(0, level0);
    out.push(0, 0, T::one());

    let n = spec.n;
    for j in 1..=max_row {
        let mut cur: BTreeMap<u32, SymBlock<T>> = BTreeMap::new();
        let prev_rows = n.pow(j - 1);
        let mut live_terms: u64 = 0;
        for k in 0..=(j * spec.degree).min(max_col) {
            let mut block: SymBlock<T> = BTreeMap::new();
            for d in 0..=spec.degree.min(k) {
                let Some(s) = prev.get(&(k - d)) else {
                    continue;
                };
                let f = &spec.coeffs[d as usize];
                let s_cols = col_width_full(n, k - d);
                for (&(rf, cf), pf) in &f.entries {
                    for (&(rs, cs), ps) in s {
                        let key = (rf * prev_rows + rs, cf * s_cols + cs);
                        let prod = pf.multiply(ps);
                        if prod.is_zero() {
                            continue;
                        }
                        match block.entry(key) {
                            std::collections::btree_map::Entry::Vacant(v) => {
                                v.insert(prod);
                            }
                            std::collections::btree_map::Entry::Occupied(mut o) => {
                                o.get_mut().add(&prod);
                            }
                        }
                    }
                }
            }
            live_terms += block.values().map(|p| p.num_terms() as u64).sum::<u64>();
            budget.charge(
                "full-mode block construction",
                (live_terms + out.nnz() as u64) * ENTRY_BYTES,
            )?;
            if !block.is_empty() {
                cur.insert(k, block);
            }
        }
        // numeric emission for this row level
        for (&k, block) in &cur {
            let row_off = row_layout.offset(j);
            let col_off = col_layout.offset(k);
            for (&(r, c), poly) in block {
                out.push(row_off + r, col_off + c, poly.expectation(&tables)?);
            }
        }
        prev = cur;
    }
    Ok(out.finalize())
}

fn col_width_full(n: usize, deg: u32) -> usize {
    n.pow(deg)
}

/// Predicted construction size in bytes from coefficient sparsity alone.
/// Merged block density is bounded by both the path count and the block
/// area, so the estimate stays sane for scalar systems while catching
/// genuinely hopeless full-mode builds.
fn estimate_full_bytes<T: Scalar>(spec: &SystemSpec<T>, max_row: u32, max_col: u32) -> u64 {
    let n = spec.n as u128;
    let nnz: Vec<u128> = spec.coeffs.iter().map(|c| c.nnz() as u128).collect();
    let cap = |j: u32, k: u32| -> u128 {
        let rows = n.checked_pow(j).unwrap_or(u128::MAX);
        let cols = n.checked_pow(k).unwrap_or(u128::MAX);
        rows.saturating_mul(cols)
    };
    let mut prev: BTreeMap<u32, u128> = BTreeMap::new();
    prev.insert(0, 1);
    let mut total: u128 = 1;
    for j in 1..=max_row {
        let mut cur: BTreeMap<u32, u128> = BTreeMap::new();
        for k in 0..=(j * spec.degree).min(max_col) {
            let mut est: u128 = 0;
            for d in 0..=spec.degree.min(k) {
                if let Some(&p) = prev.get(&(k - d)) {
                    est = est.saturating_add(nnz[d as usize].saturating_mul(p));
                }
            }
            let est = est.min(cap(j, k));
            if est > 0 {
                cur.insert(k, est);
                total = total.saturating_add(est);
            }
        }
        prev = cur;
    }
    u64::try_from(total.saturating_mul(ENTRY_BYTES as u128)).unwrap_or(u64::MAX)
}

// ---------------------------------------------------------------------
// reduced coordinates
// ---------------------------------------------------------------------

/// Polynomial in the state monomials with noise-polynomial coefficients.
type StatePoly<T> = BTreeMap<Vec<u16>, NoisePolynomial<T>>;

fn reduced_rows<T: Scalar>(
    spec: &SystemSpec<T>,
    max_row: u32,
    max_col: u32,
    budget: &BuildBudget,
    row_layout: &StackLayout,
    col_layout: &StackLayout,
) -> Result<SparseMatrix<T>> {
    let updates = spec.update_polynomials()?;
    let pmax = max_entry_power(spec);
    let tables = spec.noise_moment_tables(pmax * max_row.max(1))?;

    let mut out = TripletBuilder::new(row_layout.total_len(), col_layout.total_len());
    out.push(0, 0, T::one());

    let n = spec.n;
    let mut prev: BTreeMap<Vec<u16>, StatePoly<T>> = BTreeMap::new();
    let mut unit: StatePoly<T> = BTreeMap::new();
    unit.insert(
        vec![0u16; n],
        NoisePolynomial::constant(T::one(), spec.nsyms()),
    );
    prev.insert(vec![0u16; n], unit);

    let mut prev_terms: u64 = prev_terms_of(&prev);
    for j in 1..=max_row {
        let set = IndexSet::new(n, j);
        let mut cur: BTreeMap<Vec<u16>, StatePoly<T>> = BTreeMap::new();
        let mut cur_terms: u64 = 0;
        for alpha in set.members() {
            let exps = alpha.exponents();
            let last = exps
                .iter()
                .rposition(|&e| e > 0)
                .expect("positive degree monomial");
            let mut parent = exps.to_vec();
            parent[last] -= 1;
            let q_parent = prev.get(&parent).expect("parent row exists");
            let q = multiply_state_poly(q_parent, &updates[last], max_col);
            let row = row_layout.offset(j) + rank_descending(exps);
            for (beta, poly) in &q {
                let deg: u32 = beta.iter().map(|&e| e as u32).sum();
                let col = col_layout.offset(deg) + rank_descending(beta);
                out.push(row, col, poly.expectation(&tables)?);
            }
            cur_terms += q.values().map(|p| p.num_terms() as u64).sum::<u64>();
            budget.charge(
                "reduced-mode block construction",
                (prev_terms + cur_terms + out.nnz() as u64) * ENTRY_BYTES,
            )?;
            cur.insert(exps.to_vec(), q);
        }
        prev = cur;
        prev_terms = cur_terms;
    }
    Ok(out.finalize())
}

fn prev_terms_of<T: Scalar>(level: &BTreeMap<Vec<u16>, StatePoly<T>>) -> u64 {
    level
        .values()
        .flat_map(|sp| sp.values())
        .map(|p| p.num_terms() as u64)
        .sum()
}

/// `a · p` with monomials above `max_deg` pruned. Degrees never decrease
/// under multiplication, so pruned monomials cannot feed back into kept
/// ones at later levels.
fn multiply_state_poly<T: Scalar>(
    a: &StatePoly<T>,
    p: &StatePoly<T>,
    max_deg: u32,
) -> StatePoly<T> {
    let mut out: StatePoly<T> = BTreeMap::new();
    for (ka, ca) in a {
        for (kp, cp) in p {
            let key: Vec<u16> = ka.iter().zip(kp).map(|(x, y)| x + y).collect();
            let deg: u32 = key.iter().map(|&e| e as u32).sum();
            if deg > max_deg {
                continue;
            }
            let prod = ca.multiply(cp);
            if prod.is_zero() {
                continue;
            }
            match out.entry(key) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(prod);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    o.get_mut().add(&prod);
                }
            }
        }
    }
    out.retain(|_, p| !p.is_zero());
    out
}
