//! Truncation-error expansions and guaranteed per-coordinate
//! certificates.
//!
//! The error of the degree-`j0` moment block after `t` steps is a linear
//! functional of the stacked initial moments up to degree `j0·ν^t`. Its
//! matrix is realized as *exact map minus zero-padded truncated map*:
//! the row block of the rectangular update chain minus the same row
//! block of the `t`-th power of the truncated propagator. Certificates
//! bound the error per coordinate either globally, or with a subset of
//! degree blocks (or of individual stacked coordinates) evaluated
//! exactly and the rest bounded by norms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carleman::{stacked_update_rows, BuildBudget, StackLayout, TruncatedPropagator};
use crate::error::{Error, Result};
use crate::kron::{SparseMatrix, TripletBuilder};
use crate::model::{initial_moments, Mode, SystemSpec};
use crate::scalar::Scalar;

/// Stacked initial moments `[E[x_ini^[0]]ᵀ … E[x_ini^[D]]ᵀ]ᵀ`.
#[derive(Debug, Clone)]
pub struct StackedInitialMoments<T> {
    pub layout: StackLayout,
    pub values: Vec<T>,
}

impl<T: Scalar> StackedInitialMoments<T> {
    pub fn new(spec: &SystemSpec<T>, max_degree: u32) -> Result<Self> {
        let blocks = initial_moments(spec, max_degree)?;
        let layout = StackLayout::new(spec.n, spec.mode, max_degree);
        let values = crate::carleman::stack_vectors(&blocks);
        debug_assert_eq!(values.len(), layout.total_len());
        Ok(StackedInitialMoments { layout, values })
    }

    /// Sup norm of one degree block.
    pub fn block_sup(&self, degree: u32) -> T {
        let lo = self.layout.offset(degree);
        self.values[lo..lo + self.layout.block_len(degree)]
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// `ξ(t)`: largest block sup norm over all stored degrees.
    pub fn sup_over_all(&self) -> T {
        (0..=self.layout.max_degree).fold(T::zero(), |acc, j| acc.max(self.block_sup(j)))
    }
}

/// The error functional of one `(j0, t)` configuration: a sparse matrix
/// from stacked initial moments to the degree-`j0` coordinate block.
#[derive(Debug, Clone)]
pub struct ErrorExpansion<T> {
    pub j0: u32,
    pub t: u32,
    pub n_t: u32,
    pub n: usize,
    pub mode: Mode,
    /// column layout; `max_degree = j0·ν^t`
    pub layout: StackLayout,
    /// rows: coordinates of the degree-`j0` block
    pub stacked: SparseMatrix<T>,
    /// columns with at least one nonzero entry
    pub support: Vec<usize>,
}

impl<T: Scalar> ErrorExpansion<T> {
    pub fn rows(&self) -> usize {
        self.stacked.rows()
    }

    pub fn width_degree(&self) -> u32 {
        self.layout.max_degree
    }

    /// Absolute row sum of the degree-`j` column block (the induced
    /// sup-norm of that row of the block).
    pub fn block_row_abs_sum(&self, row: usize, j: u32) -> T {
        let lo = self.layout.offset(j);
        self.stacked
            .row_abs_sum(row, lo, lo + self.layout.block_len(j))
    }

    pub fn is_zero(&self) -> bool {
        self.stacked.nnz() == 0
    }
}

/// Builds expansions, caching the rectangular row matrices that do not
/// depend on the truncation degree so sweeps over several propagators
/// reuse the expensive part.
pub struct ExpansionBuilder<'a, T> {
    spec: &'a SystemSpec<T>,
    budget: BuildBudget,
    chain_cache: BTreeMap<(u32, u32), SparseMatrix<T>>,
}

impl<'a, T: Scalar> ExpansionBuilder<'a, T> {
    pub fn new(spec: &'a SystemSpec<T>, budget: BuildBudget) -> Self {
        ExpansionBuilder {
            spec,
            budget,
            chain_cache: BTreeMap::new(),
        }
    }

    fn chain_rows(&mut self, max_row: u32, max_col: u32) -> Result<&SparseMatrix<T>> {
        if !self.chain_cache.contains_key(&(max_row, max_col)) {
            let m = stacked_update_rows(self.spec, max_row, max_col, &self.budget)?;
            self.chain_cache.insert((max_row, max_col), m);
        }
        Ok(&self.chain_cache[&(max_row, max_col)])
    }

    /// Exact moment map restricted to the degree-`j0` row block, as a
    /// matrix over the stacked initial moments of degree ≤ `j0·ν^t`.
    fn exact_map(&mut self, j0: u32, t: u32) -> Result<SparseMatrix<T>> {
        let nu = self.spec.degree.max(1);
        let row_layout = StackLayout::new(self.spec.n, self.spec.mode, j0);
        if t == 0 {
            // identity on the degree-j0 block
            let mut b = TripletBuilder::new(row_layout.block_len(j0), row_layout.total_len());
            for i in 0..row_layout.block_len(j0) {
                b.push(i, row_layout.offset(j0) + i, T::one());
            }
            return Ok(b.finalize());
        }
        let first = self.chain_rows(j0, j0 * nu)?;
        let mut m = first.row_slice(
            row_layout.offset(j0),
            row_layout.offset(j0) + row_layout.block_len(j0),
        );
        for s in 1..t {
            let deg = j0 * nu.pow(s);
            let next = self.chain_rows(deg, deg * nu)?;
            m = m.matmul(next)?;
        }
        Ok(m)
    }

    /// Truncated moment map over the same columns: row block `j0` of the
    /// `t`-th propagator power, columns re-indexed into the wide layout.
    fn truncated_map(
        &self,
        propagator: &TruncatedPropagator<T>,
        j0: u32,
        t: u32,
        wide: &StackLayout,
    ) -> Result<SparseMatrix<T>> {
        let pl = &propagator.layout;
        let mut m = if t == 0 {
            let mut b = TripletBuilder::new(pl.block_len(j0), pl.total_len());
            for i in 0..pl.block_len(j0) {
                b.push(i, pl.offset(j0) + i, T::one());
            }
            b.finalize()
        } else {
            let mut m = propagator
                .matrix
                .row_slice(pl.offset(j0), pl.offset(j0) + pl.block_len(j0));
            for _ in 1..t {
                m = m.matmul(&propagator.matrix)?;
            }
            m
        };
        m = embed_columns(&m, pl, wide)?;
        Ok(m)
    }

    /// Assemble the expansion for one configuration.
    pub fn expansion(
        &mut self,
        propagator: &TruncatedPropagator<T>,
        j0: u32,
        t: u32,
    ) -> Result<ErrorExpansion<T>> {
        if j0 > propagator.n_t {
            return Err(Error::invalid(format!(
                "j0 = {j0} exceeds truncation degree {}",
                propagator.n_t
            )));
        }
        if propagator.mode != self.spec.mode || propagator.spec_hash != self.spec.content_hash {
            return Err(Error::Artifact(
                "expansion requested for a propagator of a different spec".into(),
            ));
        }
        let nu = self.spec.degree.max(1);
        let width_deg = j0
            .checked_mul(
                nu.checked_pow(t).ok_or_else(|| {
                    Error::invalid("expansion horizon overflows the degree range")
                })?,
            )
            .ok_or_else(|| Error::invalid("expansion horizon overflows the degree range"))?;
        let wide = StackLayout::new(self.spec.n, self.spec.mode, width_deg);
        let exact = self.exact_map(j0, t)?;
        // the truncated map's columns beyond `width_deg` are structurally
        // zero (degrees at most multiply by ν per step), so re-indexing
        // into the exact map's layout is total
        let trunc = self.truncated_map(propagator, j0, t, &wide)?;
        let stacked = exact.add_scaled(&trunc, -T::one())?;
        let support = column_support(&stacked);
        Ok(ErrorExpansion {
            j0,
            t,
            n_t: propagator.n_t,
            n: self.spec.n,
            mode: self.spec.mode,
            layout: wide,
            stacked,
            support,
        })
    }
}

fn column_support<T: Scalar>(m: &SparseMatrix<T>) -> Vec<usize> {
    let mut cols: Vec<usize> = m.iter().map(|(_, c, _)| c).collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// Re-index columns from one degree layout into a wider one, block by
/// block. Nonzero entries in degree blocks the target cannot hold are an
/// error (they cannot occur for the maps built here).
fn embed_columns<T: Scalar>(
    m: &SparseMatrix<T>,
    src: &StackLayout,
    dst: &StackLayout,
) -> Result<SparseMatrix<T>> {
    if src == dst {
        return Ok(m.clone());
    }
    let mut b = TripletBuilder::new(m.rows(), dst.total_len());
    for (r, c, v) in m.iter() {
        let deg = src.degree_of(c);
        if deg > dst.max_degree {
            return Err(Error::dims("nonzero entry beyond the target degree range"));
        }
        let within = c - src.offset(deg);
        b.push(r, dst.offset(deg) + within, v);
    }
    Ok(b.finalize())
}

/// Which bound produced a certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundMethod {
    Global,
    SubsetJ,
    SubsetK,
    Exact,
}

impl BoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMethod::Global => "global",
            BoundMethod::SubsetJ => "J",
            BoundMethod::SubsetK => "K",
            BoundMethod::Exact => "exact",
        }
    }
}

/// Guaranteed per-coordinate upper bounds on the truncation error of one
/// moment block.
#[derive(Debug, Clone)]
pub struct ErrorCertificate<T> {
    pub j0: u32,
    pub t: u32,
    pub method: BoundMethod,
    pub subset: Vec<usize>,
    pub bounds: Vec<T>,
}

impl<T: Scalar> ErrorCertificate<T> {
    pub fn sup(&self) -> T {
        self.bounds.iter().fold(T::zero(), |a, b| a.max(b.abs()))
    }

    /// All-zero certificate (used when moments are exact by
    /// construction).
    pub fn zero(j0: u32, t: u32, len: usize) -> Self {
        ErrorCertificate {
            j0,
            t,
            method: BoundMethod::Exact,
            subset: Vec::new(),
            bounds: vec![T::zero(); len],
        }
    }
}

/// Global bound: `|e_i| ≤ ξ(t) · Σ_j ‖v_{j,i}‖` with the induced row
/// norms, where `ξ(t)` is the largest initial-moment block sup norm.
pub fn global_bound<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
) -> Result<ErrorCertificate<T>> {
    check_compatible(exp, initial)?;
    let xi = initial.sup_over_all();
    let bounds = (0..exp.rows())
        .map(|i| xi * exp.stacked.row_abs_sum(i, 0, exp.layout.total_len()))
        .collect();
    Ok(ErrorCertificate {
        j0: exp.j0,
        t: exp.t,
        method: BoundMethod::Global,
        subset: Vec::new(),
        bounds,
    })
}

/// Subset bound over degree blocks: blocks in `j_set` contribute their
/// exact inner product, the rest are bounded by row norms times the
/// largest remaining initial-moment block.
pub fn bound_subset_j<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
    j_set: &[usize],
) -> Result<ErrorCertificate<T>> {
    check_compatible(exp, initial)?;
    let width = exp.width_degree() as usize;
    let mut in_set = vec![false; width + 1];
    for &j in j_set {
        if j > width {
            return Err(Error::invalid(format!("degree index {j} out of range")));
        }
        in_set[j] = true;
    }
    let xi_rest = (0..=width as u32)
        .filter(|&j| !in_set[j as usize])
        .fold(T::zero(), |acc, j| acc.max(initial.block_sup(j)));
    let mut bounds = Vec::with_capacity(exp.rows());
    for i in 0..exp.rows() {
        let mut exact_part = T::zero();
        let mut norm_part = T::zero();
        let (cols, vals) = exp.stacked.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if in_set[exp.layout.degree_of(c) as usize] {
                exact_part += v * initial.values[c];
            } else {
                norm_part += v.abs();
            }
        }
        bounds.push(exact_part.abs() + xi_rest * norm_part);
    }
    let mut subset: Vec<usize> = j_set.to_vec();
    subset.sort_unstable();
    Ok(ErrorCertificate {
        j0: exp.j0,
        t: exp.t,
        method: BoundMethod::SubsetJ,
        subset,
        bounds,
    })
}

/// Subset bound over individual stacked coordinates.
pub fn bound_subset_k<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
    k_set: &[usize],
) -> Result<ErrorCertificate<T>> {
    check_compatible(exp, initial)?;
    let total = exp.layout.total_len();
    let mut in_set = vec![false; total];
    for &k in k_set {
        if k >= total {
            return Err(Error::invalid(format!("coordinate index {k} out of range")));
        }
        in_set[k] = true;
    }
    let y_rest_max = initial
        .values
        .iter()
        .enumerate()
        .filter(|(k, _)| !in_set[*k])
        .fold(T::zero(), |acc, (_, v)| acc.max(v.abs()));
    let mut bounds = Vec::with_capacity(exp.rows());
    for i in 0..exp.rows() {
        let mut exact_part = T::zero();
        let mut abs_rest = T::zero();
        let (cols, vals) = exp.stacked.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if in_set[c] {
                exact_part += v * initial.values[c];
            } else {
                abs_rest += v.abs();
            }
        }
        bounds.push(exact_part.abs() + y_rest_max * abs_rest);
    }
    let mut subset: Vec<usize> = k_set.to_vec();
    subset.sort_unstable();
    Ok(ErrorCertificate {
        j0: exp.j0,
        t: exp.t,
        method: BoundMethod::SubsetK,
        subset,
        bounds,
    })
}

/// Exact error magnitude per coordinate (the certificate the subset
/// bounds converge to).
pub fn exact_bound<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
) -> Result<ErrorCertificate<T>> {
    check_compatible(exp, initial)?;
    let e = exp.stacked.matvec(&initial.values)?;
    Ok(ErrorCertificate {
        j0: exp.j0,
        t: exp.t,
        method: BoundMethod::Exact,
        subset: Vec::new(),
        bounds: e.into_iter().map(|v| v.abs()).collect(),
    })
}

/// Signed exact error vector (oracle use).
pub fn exact_error<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
) -> Result<Vec<T>> {
    check_compatible(exp, initial)?;
    exp.stacked.matvec(&initial.values)
}

fn check_compatible<T: Scalar>(
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
) -> Result<()> {
    if initial.layout != exp.layout {
        return Err(Error::dims(
            "initial moment stack does not match expansion layout",
        ));
    }
    Ok(())
}

/// Subset selection strategies; all deterministic with ties broken by
/// the smaller index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetStrategy {
    /// Degree blocks with the largest initial-moment sup norm (for the
    /// degree-block bound).
    LargestInitialMoment,
    /// Degree blocks with the largest expansion row norm (for the
    /// degree-block bound).
    LargestRowNorm,
    /// Stacked coordinates with the largest initial-moment magnitude,
    /// restricted to the expansion support (for the coordinate bound).
    LargestStackedCoordinate,
}

/// Pick a subset of the given size; larger requests return every
/// available candidate.
pub fn select_subset<T: Scalar>(
    strategy: SubsetStrategy,
    size: usize,
    exp: &ErrorExpansion<T>,
    initial: &StackedInitialMoments<T>,
) -> Vec<usize> {
    let ranked: Vec<(usize, T)> = match strategy {
        SubsetStrategy::LargestInitialMoment => (0..=exp.width_degree())
            .map(|j| (j as usize, initial.block_sup(j)))
            .collect(),
        SubsetStrategy::LargestRowNorm => (0..=exp.width_degree())
            .map(|j| {
                let norm = (0..exp.rows())
                    .map(|i| exp.block_row_abs_sum(i, j))
                    .fold(T::zero(), |a, b| a.max(b));
                (j as usize, norm)
            })
            .collect(),
        SubsetStrategy::LargestStackedCoordinate => exp
            .support
            .iter()
            .map(|&k| (k, initial.values[k].abs()))
            .collect(),
    };
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| {
        ranked[b]
            .1
            .partial_cmp(&ranked[a].1)
            .expect("finite keys")
            .then(ranked[a].0.cmp(&ranked[b].0))
    });
    let mut out: Vec<usize> = order
        .into_iter()
        .take(size.min(ranked.len()))
        .map(|p| ranked[p].0)
        .collect();
    out.sort_unstable();
    out
}

#[derive(Serialize, Deserialize)]
struct ExpansionMeta {
    j0: u32,
    t: u32,
    n_t: u32,
    n: usize,
    nu: u32,
    mode: String,
    width_degree: u32,
    spec_hash: String,
    tool_version: String,
}

impl<T: Scalar> ErrorExpansion<T> {
    pub fn save(&self, matrix_path: &Path, meta_path: &Path, spec: &SystemSpec<T>) -> Result<()> {
        self.stacked.write_to(matrix_path)?;
        let meta = ExpansionMeta {
            j0: self.j0,
            t: self.t,
            n_t: self.n_t,
            n: self.n,
            nu: spec.degree,
            mode: self.mode.as_str().to_string(),
            width_degree: self.layout.max_degree,
            spec_hash: spec.content_hash.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        std::fs::write(
            meta_path,
            serde_json::to_string_pretty(&meta).expect("meta serializes"),
        )?;
        Ok(())
    }

    pub fn load(matrix_path: &Path, meta_path: &Path, spec: &SystemSpec<T>) -> Result<Self> {
        let meta: ExpansionMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)
            .map_err(|e| Error::Artifact(format!("bad expansion metadata: {e}")))?;
        if meta.spec_hash != spec.content_hash {
            return Err(Error::Artifact(
                "expansion was built for a different spec".into(),
            ));
        }
        let mode = match meta.mode.as_str() {
            "full" => Mode::Full,
            "reduced" => Mode::Reduced,
            other => return Err(Error::Artifact(format!("unknown mode {other:?}"))),
        };
        if mode != spec.mode || meta.n != spec.n {
            return Err(Error::Artifact(
                "expansion metadata disagrees with spec".into(),
            ));
        }
        let stacked = SparseMatrix::read_from(matrix_path)?;
        let layout = StackLayout::new(meta.n, mode, meta.width_degree);
        if stacked.cols() != layout.total_len() {
            return Err(Error::Artifact("expansion matrix has wrong width".into()));
        }
        let support = column_support(&stacked);
        Ok(ErrorExpansion {
            j0: meta.j0,
            t: meta.t,
            n_t: meta.n_t,
            n: meta.n,
            mode,
            layout,
            stacked,
            support,
        })
    }
}
