//! Expected update blocks, the truncated propagator, and moment
//! propagation.
//!
//! The one-step update of the degree-`j` monomial block against the
//! degree-`k` monomial block is the expectation of a sum of `j`-fold
//! Kronecker products of coefficient matrices, one product per tuple of
//! factor degrees summing to `k`. Blocks vanish whenever `k > j·ν`, so
//! stacking all blocks up to a truncation degree gives a block-lower-
//! triangular-by-degree propagator for the approximate moments. The same
//! machinery with rectangular degree ranges yields the exact moment
//! chain, which serves as the in-repo ground truth wherever it is
//! feasible.

mod build;

pub use build::{stacked_update_rows, BuildBudget};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::SparseMatrix;
use crate::model::{initial_moments, Mode, SystemSpec};
use crate::scalar::Scalar;

/// Coordinate layout of a stacked moment vector: degree blocks
/// `0..=max_degree` concatenated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackLayout {
    pub n: usize,
    pub mode: Mode,
    pub max_degree: u32,
    offsets: Vec<usize>,
}

impl StackLayout {
    pub fn new(n: usize, mode: Mode, max_degree: u32) -> Self {
        let mut offsets = Vec::with_capacity(max_degree as usize + 2);
        let mut acc = 0usize;
        for j in 0..=max_degree {
            offsets.push(acc);
            acc += mode.block_len(n, j);
        }
        offsets.push(acc);
        StackLayout {
            n,
            mode,
            max_degree,
            offsets,
        }
    }

    pub fn offset(&self, degree: u32) -> usize {
        self.offsets[degree as usize]
    }

    pub fn block_len(&self, degree: u32) -> usize {
        self.offsets[degree as usize + 1] - self.offsets[degree as usize]
    }

    pub fn total_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Degree block containing a stacked coordinate.
    pub fn degree_of(&self, coord: usize) -> u32 {
        debug_assert!(coord < self.total_len());
        match self.offsets.binary_search(&coord) {
            Ok(j) => (j as u32).min(self.max_degree),
            Err(j) => (j - 1) as u32,
        }
    }
}

/// Tuples of factor degrees `(i_1, …, i_j)` with `0 ≤ i_l ≤ ν` summing
/// to `k`, generated by the recursion
/// `tuples(j+1, k) = ⋃_d {d} × tuples(j, k−d)` with memoization.
pub fn degree_tuples(j: u32, k: u32, nu: u32) -> Vec<Vec<u32>> {
    fn rec(
        j: u32,
        k: i64,
        nu: u32,
        memo: &mut BTreeMap<(u32, i64), Vec<Vec<u32>>>,
    ) -> Vec<Vec<u32>> {
        if k < 0 {
            return Vec::new();
        }
        if j == 0 {
            return if k == 0 { vec![Vec::new()] } else { Vec::new() };
        }
        if let Some(v) = memo.get(&(j, k)) {
            return v.clone();
        }
        let mut out = Vec::new();
        for d in 0..=nu {
            for rest in rec(j - 1, k - d as i64, nu, memo) {
                let mut t = Vec::with_capacity(j as usize);
                t.push(d);
                t.extend(rest);
                out.push(t);
            }
        }
        memo.insert((j, k), out.clone());
        out
    }
    rec(j, k as i64, nu, &mut BTreeMap::new())
}

/// The truncated moment propagator: every expected update block with row
/// and column degree at most `n_t`, stacked into one square sparse
/// matrix.
#[derive(Debug, Clone)]
pub struct TruncatedPropagator<T> {
    pub n: usize,
    pub nu: u32,
    pub n_t: u32,
    pub mode: Mode,
    pub layout: StackLayout,
    pub matrix: SparseMatrix<T>,
    pub spec_hash: String,
}

/// Stacked approximate moment vector at one time step; the leading
/// coordinate is the degree-0 moment and stays exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState<T> {
    pub t: u32,
    pub y: Vec<T>,
}

impl<T: Scalar> MomentState<T> {
    /// Stack the initial moments `E[x_ini^[j]]`, `j = 0…n_t`.
    pub fn initial(spec: &SystemSpec<T>, n_t: u32) -> Result<Self> {
        let moments = initial_moments(spec, n_t)?;
        Ok(MomentState {
            t: 0,
            y: stack_vectors(&moments),
        })
    }

    pub fn block<'a>(&'a self, layout: &StackLayout, degree: u32) -> &'a [T] {
        let lo = layout.offset(degree);
        &self.y[lo..lo + layout.block_len(degree)]
    }
}

/// Concatenate per-degree vectors into one stacked vector.
pub fn stack_vectors<T: Scalar>(blocks: &[Vec<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for b in blocks {
        out.extend_from_slice(b);
    }
    out
}

/// Build the square truncated propagator for a spec.
pub fn build_propagator<T: Scalar>(
    spec: &SystemSpec<T>,
    n_t: u32,
    budget: &BuildBudget,
) -> Result<TruncatedPropagator<T>> {
    if n_t < 1 {
        return Err(Error::invalid("truncation degree must be at least 1"));
    }
    let matrix = stacked_update_rows(spec, n_t, n_t, budget)?;
    Ok(TruncatedPropagator {
        n: spec.n,
        nu: spec.degree,
        n_t,
        mode: spec.mode,
        layout: StackLayout::new(spec.n, spec.mode, n_t),
        matrix,
        spec_hash: spec.content_hash.clone(),
    })
}

/// One expected update block in isolation (row degree `j`, column degree
/// `k`).
pub fn expected_block<T: Scalar>(
    spec: &SystemSpec<T>,
    j: u32,
    k: u32,
    budget: &BuildBudget,
) -> Result<SparseMatrix<T>> {
    let rows = stacked_update_rows(spec, j, k.max(1), budget)?;
    let rl = StackLayout::new(spec.n, spec.mode, j);
    let cl = StackLayout::new(spec.n, spec.mode, k.max(1));
    let sliced = rows.row_slice(rl.offset(j), rl.offset(j) + rl.block_len(j));
    // keep only the degree-k column block
    let mut b = crate::kron::TripletBuilder::new(sliced.rows(), cl.block_len(k));
    let (lo, hi) = (cl.offset(k), cl.offset(k) + cl.block_len(k));
    for (r, c, v) in sliced.iter() {
        if c >= lo && c < hi {
            b.push(r, c - lo, v);
        }
    }
    Ok(b.finalize())
}

impl<T: Scalar> TruncatedPropagator<T> {
    /// Propagate `steps` time steps by repeated sparse matrix-vector
    /// products (never by matrix powering).
    pub fn propagate(&self, state: &MomentState<T>, steps: u32) -> Result<MomentState<T>> {
        if state.y.len() != self.layout.total_len() {
            return Err(Error::dims(format!(
                "moment state has {} coordinates, propagator expects {}",
                state.y.len(),
                self.layout.total_len()
            )));
        }
        let mut y = state.y.clone();
        for _ in 0..steps {
            y = self.matrix.matvec(&y)?;
        }
        Ok(MomentState {
            t: state.t + steps,
            y,
        })
    }

    /// All intermediate states `t, t+1, …, t+steps`.
    pub fn trajectory(&self, state: &MomentState<T>, steps: u32) -> Result<Vec<MomentState<T>>> {
        let mut out = Vec::with_capacity(steps as usize + 1);
        out.push(state.clone());
        for s in 0..steps {
            let next = self.propagate(out.last().unwrap(), 1)?;
            debug_assert_eq!(next.t, state.t + s + 1);
            out.push(next);
        }
        Ok(out)
    }

    pub fn save(&self, matrix_path: &Path, meta_path: &Path) -> Result<()> {
        self.matrix.write_to(matrix_path)?;
        let meta = PropagatorMeta {
            n: self.n,
            nu: self.nu,
            n_t: self.n_t,
            mode: self.mode.as_str().to_string(),
            spec_hash: self.spec_hash.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        std::fs::write(
            meta_path,
            serde_json::to_string_pretty(&meta).expect("meta serializes"),
        )?;
        Ok(())
    }

    /// Load a persisted propagator, verifying the stored spec hash
    /// against the provided spec.
    pub fn load(matrix_path: &Path, meta_path: &Path, spec: &SystemSpec<T>) -> Result<Self> {
        let meta: PropagatorMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)
            .map_err(|e| Error::Artifact(format!("bad propagator metadata: {e}")))?;
        if meta.spec_hash != spec.content_hash {
            return Err(Error::Artifact(format!(
                "propagator was built for spec {}, got {}",
                meta.spec_hash, spec.content_hash
            )));
        }
        let mode = match meta.mode.as_str() {
            "full" => Mode::Full,
            "reduced" => Mode::Reduced,
            other => return Err(Error::Artifact(format!("unknown mode {other:?}"))),
        };
        if mode != spec.mode || meta.n != spec.n || meta.nu != spec.degree {
            return Err(Error::Artifact(
                "propagator metadata disagrees with spec".into(),
            ));
        }
        let matrix = SparseMatrix::read_from(matrix_path)?;
        let layout = StackLayout::new(meta.n, mode, meta.n_t);
        if matrix.rows() != layout.total_len() || matrix.cols() != layout.total_len() {
            return Err(Error::Artifact("propagator matrix has wrong shape".into()));
        }
        Ok(TruncatedPropagator {
            n: meta.n,
            nu: meta.nu,
            n_t: meta.n_t,
            mode,
            layout,
            matrix,
            spec_hash: meta.spec_hash,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PropagatorMeta {
    n: usize,
    nu: u32,
    n_t: u32,
    mode: String,
    spec_hash: String,
    tool_version: String,
}

/// Exact moments through the rectangular update chain, with a cache of
/// stacked row matrices keyed by their degree ranges.
pub struct ExactEngine<'a, T> {
    spec: &'a SystemSpec<T>,
    budget: BuildBudget,
    cache: BTreeMap<(u32, u32), SparseMatrix<T>>,
}

impl<'a, T: Scalar> ExactEngine<'a, T> {
    pub fn new(spec: &'a SystemSpec<T>, budget: BuildBudget) -> Self {
        ExactEngine {
            spec,
            budget,
            cache: BTreeMap::new(),
        }
    }

    fn rows(&mut self, max_row: u32, max_col: u32) -> Result<&SparseMatrix<T>> {
        if !self.cache.contains_key(&(max_row, max_col)) {
            let m = stacked_update_rows(self.spec, max_row, max_col, &self.budget)?;
            self.cache.insert((max_row, max_col), m);
        }
        Ok(&self.cache[&(max_row, max_col)])
    }

    /// Stacked exact moments `E[x^[j]](t)` for all `j ≤ j_max`.
    pub fn stacked_exact(&mut self, j_max: u32, t: u32) -> Result<Vec<T>> {
        let nu = self.spec.degree.max(1);
        // width of the deepest initial-moment stack
        let mut deg = j_max;
        for _ in 0..t {
            deg = deg
                .checked_mul(nu)
                .ok_or_else(|| Error::invalid("exact chain degree overflow"))?;
            if StackLayout::new(self.spec.n, self.spec.mode, deg).total_len()
                > build::MAX_STACK_WIDTH
            {
                return Err(Error::ResourceBudget {
                    what: format!("exact moment chain of degree {deg}"),
                    needed: StackLayout::new(self.spec.n, self.spec.mode, deg).total_len() as u64,
                    budget: build::MAX_STACK_WIDTH as u64,
                });
            }
        }
        let moments = initial_moments(self.spec, deg)?;
        let mut v = stack_vectors(&moments);
        for s in (0..t).rev() {
            let row_deg = j_max * nu.pow(s);
            let col_deg = row_deg * nu;
            let m = self.rows(row_deg, col_deg)?;
            v = m.matvec(&v)?;
        }
        Ok(v)
    }

    /// Exact `E[x^[j0]](t)` as one degree block.
    pub fn moment(&mut self, j0: u32, t: u32) -> Result<Vec<T>> {
        let v = self.stacked_exact(j0, t)?;
        let layout = StackLayout::new(self.spec.n, self.spec.mode, j0);
        let lo = layout.offset(j0);
        Ok(v[lo..lo + layout.block_len(j0)].to_vec())
    }
}
