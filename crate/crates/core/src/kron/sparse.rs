//! Sparse matrices in compressed row form, built from triplets.
//!
//! Triplets are accumulated through [`TripletBuilder`] and finalized into
//! a [`SparseMatrix`]: sorted by row then column, duplicates summed,
//! exact zeros dropped. Matrices are immutable afterwards.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"CARMOSPM";
const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TripletBuilder<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        TripletBuilder {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.rows && col < self.cols, "triplet out of range");
        if value != T::zero() {
            self.entries.push((row, col, value));
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Approximate heap footprint, used for budget accounting.
    pub fn bytes(&self) -> u64 {
        (self.entries.len() * std::mem::size_of::<(usize, usize, T)>()) as u64
    }

    pub fn finalize(mut self) -> SparseMatrix<T> {
        self.entries.sort_unstable_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(self.entries.len());
        for (row, col, v) in self.entries {
            match merged.last_mut() {
                Some((lr, lc, lv)) if *lr == row && *lc == col => *lv += v,
                _ => merged.push((row, col, v)),
            }
        }
        let mut indptr = vec![0usize; self.rows + 1];
        let mut colidx = Vec::with_capacity(merged.len());
        let mut values = Vec::with_capacity(merged.len());
        for (row, col, v) in merged {
            if v != T::zero() {
                colidx.push(col);
                values.push(v);
                indptr[row + 1] += 1;
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            colidx,
            values,
        }
    }
}

/// Immutable compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    colidx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            colidx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            colidx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let mut b = TripletBuilder::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                b.push(r, c, data[r * cols + c]);
            }
        }
        b.finalize()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        (&self.colidx[s..e], &self.values[s..e])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(i) => vals[i],
            Err(_) => T::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::dims(format!(
                "matvec: matrix is {}x{}, vector has {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![T::zero(); self.rows];
        for (r, slot) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            let mut acc = T::zero();
            for (&c, &a) in cols.iter().zip(vals) {
                acc += a * v[c];
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Exact real matrix product, dense accumulator per row.
    pub fn matmul(&self, other: &SparseMatrix<T>) -> Result<SparseMatrix<T>> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut b = TripletBuilder::new(self.rows, other.cols);
        let mut scratch = vec![T::zero(); other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&c, &bv) in ocols.iter().zip(ovals) {
                    if scratch[c] == T::zero() {
                        touched.push(c);
                    }
                    scratch[c] += a * bv;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                b.push(r, c, scratch[c]);
                scratch[c] = T::zero();
            }
            touched.clear();
        }
        Ok(b.finalize())
    }

    /// Kronecker product with standard row/column ordering.
    pub fn kron(&self, other: &SparseMatrix<T>) -> SparseMatrix<T> {
        let mut b = TripletBuilder::new(self.rows * other.rows, self.cols * other.cols);
        for (ra, ca, va) in self.iter() {
            for (rb, cb, vb) in other.iter() {
                b.push(ra * other.rows + rb, ca * other.cols + cb, va * vb);
            }
        }
        b.finalize()
    }

    /// `self + s · other`, shapes must agree.
    pub fn add_scaled(&self, other: &SparseMatrix<T>, s: T) -> Result<SparseMatrix<T>> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims("add_scaled: shape mismatch"));
        }
        let mut b = TripletBuilder::new(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            b.push(r, c, v);
        }
        for (r, c, v) in other.iter() {
            b.push(r, c, s * v);
        }
        Ok(b.finalize())
    }

    /// Place this matrix into a wider/taller zero matrix at offset (0, 0).
    pub fn pad_to(&self, rows: usize, cols: usize) -> Result<SparseMatrix<T>> {
        if rows < self.rows || cols < self.cols {
            return Err(Error::dims("pad_to: target smaller than source"));
        }
        let mut indptr = self.indptr.clone();
        indptr.resize(rows + 1, *self.indptr.last().unwrap());
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            colidx: self.colidx.clone(),
            values: self.values.clone(),
        })
    }

    /// Rows `lo..hi` as a standalone matrix.
    pub fn row_slice(&self, lo: usize, hi: usize) -> SparseMatrix<T> {
        assert!(lo <= hi && hi <= self.rows);
        let base = self.indptr[lo];
        SparseMatrix {
            rows: hi - lo,
            cols: self.cols,
            indptr: self.indptr[lo..=hi].iter().map(|&p| p - base).collect(),
            colidx: self.colidx[self.indptr[lo]..self.indptr[hi]].to_vec(),
            values: self.values[self.indptr[lo]..self.indptr[hi]].to_vec(),
        }
    }

    /// Sum of absolute values of row `r` restricted to `col_lo..col_hi`.
    pub fn row_abs_sum(&self, r: usize, col_lo: usize, col_hi: usize) -> T {
        let (cols, vals) = self.row(r);
        let mut acc = T::zero();
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= col_lo && c < col_hi {
                acc += v.abs();
            }
        }
        acc
    }

    pub fn is_zero_block(
        &self,
        row_lo: usize,
        row_hi: usize,
        col_lo: usize,
        col_hi: usize,
    ) -> bool {
        for r in row_lo..row_hi {
            let (cols, _) = self.row(r);
            if cols.iter().any(|&c| c >= col_lo && c < col_hi) {
                return false;
            }
        }
        true
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows * self.cols];
        for (r, c, v) in self.iter() {
            out[r * self.cols + c] = v;
        }
        out
    }

    /// Portable binary serialization: `CARMOSPM`, then version, rows,
    /// cols, nnz as u64 little-endian, then `(row u64, col u64, value
    /// f64)` triplets.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (r, c, v) in self.iter() {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(c as u64).to_le_bytes())?;
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<SparseMatrix<T>> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Artifact(format!(
                "{}: bad magic, not a sparse matrix file",
                path.display()
            )));
        }
        let version = read_u64(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported sparse matrix format version {version}"
            )));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let nnz = read_u64(&mut r)? as usize;
        let mut b = TripletBuilder::new(rows, cols);
        for _ in 0..nnz {
            let row = read_u64(&mut r)? as usize;
            let col = read_u64(&mut r)? as usize;
            let mut vb = [0u8; 8];
            r.read_exact(&mut vb)?;
            let v = f64::from_le_bytes(vb);
            if row >= rows || col >= cols {
                return Err(Error::Artifact("triplet index out of range".to_string()));
            }
            b.push(
                row,
                col,
                T::from_f64(v)
                    .ok_or_else(|| Error::Artifact("value not representable".to_string()))?,
            );
        }
        Ok(b.finalize())
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn finalize_merges_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 1, 2.0);
        b.push(0, 1, 3.0);
        b.push(1, 0, -1.0);
        b.push(1, 0, 1.0); // cancels to zero, must be dropped
        let m = b.finalize();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn identity_times_any_is_any() {
        let a = SparseMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, -1.0, 4.0, 0.5]);
        let id = SparseMatrix::identity(2);
        let p = id.matmul(&a).unwrap();
        assert_eq!(p.to_dense(), a.to_dense());
    }

    #[test]
    fn one_by_one_product_is_scalar_product() {
        let a = SparseMatrix::from_dense(1, 1, &[3.0]);
        let b = SparseMatrix::from_dense(1, 1, &[-0.5]);
        assert_eq!(a.matmul(&b).unwrap().get(0, 0), -1.5);
    }

    #[test]
    fn matvec_dimension_mismatch_is_error() {
        let a = SparseMatrix::<f64>::identity(2);
        assert!(a.matvec(&[1.0, 2.0, 3.0]).is_err());
        assert!(a.matmul(&SparseMatrix::identity(3)).is_err());
    }

    #[test]
    fn kron_matches_dense_expansion() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let b = SparseMatrix::from_dense(2, 2, &[0.5, 0.0, 1.0, 3.0]);
        let k = a.kron(&b);
        // block (0,1) of a⊗b is 2·b
        assert_eq!(k.get(0, 2), 1.0);
        assert_eq!(k.get(1, 2), 2.0);
        assert_eq!(k.get(1, 3), 6.0);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.cols(), 4);
    }

    #[test]
    fn row_slice_and_pad() {
        let a = SparseMatrix::from_dense(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 0.0]);
        let s = a.row_slice(1, 3);
        assert_eq!(s.to_dense(), vec![0.0, 2.0, 3.0, 0.0]);
        let p = s.pad_to(2, 4).unwrap();
        assert_eq!(p.get(0, 1), 2.0);
        assert_eq!(p.get(1, 3), 0.0);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("carmo-spm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.spm");
        let a = SparseMatrix::from_dense(3, 3, &[0.0, 1.5, 0.0, -2.25, 0.0, 0.0, 0.0, 0.0, 1e-30]);
        a.write_to(&path).unwrap();
        let b = SparseMatrix::<f64>::read_from(&path).unwrap();
        approx_eq(&a.to_dense(), &b.to_dense(), 0.0);
        std::fs::remove_dir_all(&dir).ok();
    }
}
