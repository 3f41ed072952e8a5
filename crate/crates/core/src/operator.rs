//! Linear operators on the quantum space `(C^3)^{⊗N}`.
//!
//! [`QOperator`] is dense below [`DENSE_DIM_LIMIT`] and compressed-sparse-row
//! above it (Hamiltonian-only work at `N = 7, 8`). Everything built from the
//! monodromy is dense.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::C64;

pub type DenseMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

/// Operators with dimension at or above this are stored sparse by
/// [`StoragePolicy::Auto`].
pub const DENSE_DIM_LIMIT: usize = 1000;

/// Local dimension of a spin-1 site.
pub const LOCAL_DIM: usize = 3;

pub fn quantum_dim(sites: usize) -> usize {
    LOCAL_DIM.pow(sites as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StoragePolicy {
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl StoragePolicy {
    pub fn sparse_for(self, dim: usize) -> bool {
        match self {
            StoragePolicy::Auto => dim >= DENSE_DIM_LIMIT,
            StoragePolicy::Dense => false,
            StoragePolicy::Sparse => true,
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            *rows[r].entry(c).or_insert_with(C64::zero) += v;
        }
        Self::from_rows(nrows, ncols, rows)
    }

    fn from_rows(nrows: usize, ncols: usize, rows: Vec<BTreeMap<usize, C64>>) -> Self {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != C64::zero() {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            nrows: dim,
            ncols: dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![C64::new(1.0, 0.0); dim],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn matvec(&self, x: &StateVector) -> StateVector {
        StateVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum::<C64>()),
        )
    }

    /// Row-vector product `xᵀ A`.
    pub fn vecmat(&self, x: &StateVector) -> StateVector {
        let mut out = StateVector::zeros(self.ncols);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr != C64::zero() {
                for (c, v) in self.row(r) {
                    out[c] += xr * v;
                }
            }
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            trip.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn adjoint(&self) -> Self {
        self.transpose().map_values(|v| v.conj())
    }

    pub fn add_scaled(&self, other: &Self, alpha: C64) -> Self {
        assert_eq!(self.shape(), other.shape());
        let rows = (0..self.nrows)
            .map(|r| {
                let mut row: BTreeMap<usize, C64> = self.row(r).collect();
                for (c, v) in other.row(r) {
                    *row.entry(c).or_insert_with(C64::zero) += alpha * v;
                }
                row
            })
            .collect();
        Self::from_rows(self.nrows, self.ncols, rows)
    }

    pub fn mul_sparse(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let rows = (0..self.nrows)
            .map(|r| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        *acc.entry(c).or_insert_with(C64::zero) += a * b;
                    }
                }
                acc
            })
            .collect();
        Self::from_rows(self.nrows, other.ncols, rows)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

/// A linear operator on the `3^N`-dimensional quantum space of an `N`-site chain.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    sites: usize,
    storage: Storage,
}

impl QOperator {
    pub fn from_dense(sites: usize, m: DenseMatrix) -> Result<Self> {
        let dim = quantum_dim(sites);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::Shape(format!(
                "{}x{} matrix for a {}-site chain (dim {})",
                m.nrows(),
                m.ncols(),
                sites,
                dim
            )));
        }
        Ok(Self { sites, storage: Storage::Dense(m) })
    }

    pub fn from_sparse(sites: usize, m: SparseMatrix) -> Result<Self> {
        let dim = quantum_dim(sites);
        if m.shape() != (dim, dim) {
            return Err(Error::Shape(format!("{:?} sparse matrix for dim {dim}", m.shape())));
        }
        Ok(Self { sites, storage: Storage::Sparse(m) })
    }

    pub(crate) fn dense_unchecked(sites: usize, m: DenseMatrix) -> Self {
        debug_assert_eq!(m.nrows(), quantum_dim(sites));
        Self { sites, storage: Storage::Dense(m) }
    }

    pub fn identity(sites: usize, policy: StoragePolicy) -> Self {
        let dim = quantum_dim(sites);
        let storage = if policy.sparse_for(dim) {
            Storage::Sparse(SparseMatrix::identity(dim))
        } else {
            Storage::Dense(DenseMatrix::identity(dim, dim))
        };
        Self { sites, storage }
    }

    pub fn zeros(sites: usize) -> Self {
        let dim = quantum_dim(sites);
        Self::dense_unchecked(sites, DenseMatrix::zeros(dim, dim))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        quantum_dim(self.sites)
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            Storage::Sparse(_) => None,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn into_dense(self) -> DenseMatrix {
        match self.storage {
            Storage::Dense(m) => m,
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    fn check_same_chain(&self, other: &Self) {
        assert_eq!(self.sites, other.sites, "operators act on chains of different length");
    }

    pub fn scale(&self, alpha: C64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m * alpha),
            Storage::Sparse(s) => Storage::Sparse(s.map_values(|v| v * alpha)),
        };
        Self { sites: self.sites, storage }
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, other: &Self, alpha: C64) -> Self {
        self.check_same_chain(other);
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b * alpha),
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a.add_scaled(b, alpha)),
            _ => Storage::Dense(self.to_dense() + other.to_dense() * alpha),
        };
        Self { sites: self.sites, storage }
    }

    /// Accumulates `alpha · other` in place (dense accumulator).
    pub fn axpy(&mut self, alpha: C64, other: &Self) {
        self.check_same_chain(other);
        match (&mut self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => a.zip_apply(b, |x, y| *x += alpha * y),
            _ => *self = self.add_scaled(other, alpha),
        }
    }

    pub fn mul_op(&self, other: &Self) -> Self {
        self.check_same_chain(other);
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a.mul_sparse(b)),
            (Storage::Sparse(a), Storage::Dense(b)) => {
                let mut out = DenseMatrix::zeros(a.nrows, b.ncols());
                for r in 0..a.nrows {
                    for (k, v) in a.row(r) {
                        for c in 0..b.ncols() {
                            out[(r, c)] += v * b[(k, c)];
                        }
                    }
                }
                Storage::Dense(out)
            }
            (Storage::Dense(a), Storage::Sparse(b)) => {
                let mut out = DenseMatrix::zeros(a.nrows(), b.ncols);
                for k in 0..b.nrows {
                    for (c, v) in b.row(k) {
                        for r in 0..a.nrows() {
                            out[(r, c)] += a[(r, k)] * v;
                        }
                    }
                }
                Storage::Dense(out)
            }
        };
        Self { sites: self.sites, storage }
    }

    /// Product of a sequence of operators, left to right; identity when empty.
    pub fn product<'a>(sites: usize, ops: impl IntoIterator<Item = &'a QOperator>) -> Self {
        let mut iter = ops.into_iter();
        match iter.next() {
            None => Self::identity(sites, StoragePolicy::Dense),
            Some(first) => iter.fold(first.clone(), |acc, op| acc.mul_op(op)),
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul_op(other).add_scaled(&other.mul_op(self), C64::new(-1.0, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
            Storage::Sparse(s) => Storage::Sparse(s.adjoint()),
        };
        Self { sites: self.sites, storage }
    }

    pub fn transpose(&self) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.transpose()),
            Storage::Sparse(s) => Storage::Sparse(s.transpose()),
        };
        Self { sites: self.sites, storage }
    }

    pub fn trace(&self) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m.trace(),
            Storage::Sparse(s) => (0..s.nrows)
                .map(|r| s.row(r).filter(|(c, _)| *c == r).map(|(_, v)| v).sum::<C64>())
                .sum(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.norm(),
            Storage::Sparse(s) => s.frobenius_norm(),
        }
    }

    /// Spectral norm. Dense: largest singular value. Sparse: power iteration
    /// on `A†A`.
    pub fn operator_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.clone().singular_values().iter().copied().fold(0.0, f64::max),
            Storage::Sparse(s) => {
                let adj = s.adjoint();
                let n = s.ncols;
                let mut x = StateVector::from_iterator(
                    n,
                    (0..n).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05)),
                );
                let mut lambda = 0.0;
                for _ in 0..500 {
                    let norm = x.norm();
                    if norm == 0.0 {
                        return 0.0;
                    }
                    x /= C64::new(norm, 0.0);
                    let y = adj.matvec(&s.matvec(&x));
                    let next = y.norm();
                    let converged = (next - lambda).abs() <= 1e-14 * next.max(1.0);
                    lambda = next;
                    x = y;
                    if converged {
                        break;
                    }
                }
                lambda.sqrt()
            }
        }
    }

    pub fn apply(&self, x: &StateVector) -> StateVector {
        match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(s) => s.matvec(x),
        }
    }

    /// Row-vector action `xᵀ A` (no conjugation), returned as a column.
    pub fn apply_row(&self, x: &StateVector) -> StateVector {
        match &self.storage {
            Storage::Dense(m) => m.tr_mul(x),
            Storage::Sparse(s) => s.vecmat(x),
        }
    }

    /// Right-multiplies by `I ⊗ … ⊗ r ⊗ … ⊗ I` with the 3×3 block `r` acting on
    /// `site` (1-based). Sparse operators are densified.
    pub fn mul_site_right(&self, site: usize, r: &[[C64; 3]; 3]) -> Self {
        let a = self.to_dense();
        let dim = self.dim();
        let mut out = DenseMatrix::zeros(dim, dim);
        site_right_accumulate(&mut out, &a, site_stride(self.sites, site), r, C64::new(1.0, 0.0));
        Self::dense_unchecked(self.sites, out)
    }

    /// Frobenius-relative distance to another operator.
    pub fn residual(&self, other: &Self) -> f64 {
        let diff = self.add_scaled(other, C64::new(-1.0, 0.0)).frobenius_norm();
        diff / self.frobenius_norm().max(other.frobenius_norm()).max(1.0)
    }
}

/// Stride of the local index of `site` (1-based) in a site-1-slowest layout.
pub fn site_stride(sites: usize, site: usize) -> usize {
    assert!(site >= 1 && site <= sites, "site {site} outside 1..={sites}");
    LOCAL_DIM.pow((sites - site) as u32)
}

/// `dst += alpha · src · (I ⊗ r ⊗ I)` where `r` acts on the local index with
/// the given stride.
pub(crate) fn site_right_accumulate(
    dst: &mut DenseMatrix,
    src: &DenseMatrix,
    stride: usize,
    r: &[[C64; 3]; 3],
    alpha: C64,
) {
    let dim = src.ncols();
    for_each_site_base(dim, stride, |base| {
        for m in 0..3 {
            let j = base + m * stride;
            for (mp, row) in r.iter().enumerate() {
                let coef = row[m] * alpha;
                if coef == C64::zero() {
                    continue;
                }
                let src_col = src.column(base + mp * stride);
                dst.column_mut(j).axpy(coef, &src_col, C64::new(1.0, 0.0));
            }
        }
    });
}

/// Calls `f` with every flat index whose digit at the given stride is zero.
pub(crate) fn for_each_site_base(dim: usize, stride: usize, mut f: impl FnMut(usize)) {
    let block = stride * LOCAL_DIM;
    for hi in (0..dim).step_by(block) {
        for lo in 0..stride {
            f(hi + lo);
        }
    }
}

/// Kronecker product of dense matrices.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.kronecker(b)
}

/// Weight label of each basis state: the sum of its local indices. Every
/// operator of the model conserves it, so spectra split by label.
pub fn weight_sectors(sites: usize) -> Vec<usize> {
    (0..quantum_dim(sites))
        .map(|mut i| {
            let mut w = 0;
            while i > 0 {
                w += i % LOCAL_DIM;
                i /= LOCAL_DIM;
            }
            w
        })
        .collect()
}

/// The reference product state with every site in local state 0.
pub fn reference_state(sites: usize) -> StateVector {
    let mut v = StateVector::zeros(quantum_dim(sites));
    v[0] = C64::new(1.0, 0.0);
    v
}

impl Add for &QOperator {
    type Output = QOperator;
    fn add(self, rhs: &QOperator) -> QOperator {
        self.add_scaled(rhs, C64::new(1.0, 0.0))
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        self.add_scaled(rhs, C64::new(-1.0, 0.0))
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        self.mul_op(rhs)
    }
}

impl Mul<C64> for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: C64) -> QOperator {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(sites: usize, seed: u64) -> DenseMatrix {
        let dim = quantum_dim(sites);
        let mut s = seed;
        DenseMatrix::from_fn(dim, dim, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5;
            let b = ((s >> 13) & 0xffff) as f64 / 65536.0 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn sparse_and_dense_agree() {
        let a = sample(2, 1);
        let b = sample(2, 2);
        let trip = |m: &DenseMatrix| {
            let mut t = Vec::new();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if (r + c) % 3 != 0 {
                        t.push((r, c, m[(r, c)]));
                    }
                }
            }
            t
        };
        let sa = SparseMatrix::from_triplets(9, 9, &trip(&a));
        let sb = SparseMatrix::from_triplets(9, 9, &trip(&b));
        let (da, db) = (sa.to_dense(), sb.to_dense());
        let qa = QOperator::from_sparse(2, sa).unwrap();
        let qb = QOperator::from_sparse(2, sb).unwrap();
        let qa_d = QOperator::from_dense(2, da.clone()).unwrap();
        assert!(crate::residual::matrix(&(&qa * &qb).to_dense(), &(&da * &db)) < 1e-15);
        assert!(crate::residual::matrix(&(&qa + &qb).to_dense(), &(&da + &db)) < 1e-15);
        assert!(crate::residual::matrix(&(&qa * &qa_d).to_dense(), &(&da * &da)) < 1e-15);
        assert!(crate::residual::matrix(&(&qa_d * &qa).to_dense(), &(&da * &da)) < 1e-15);
        assert!(crate::residual::matrix(&qa.adjoint().to_dense(), &da.adjoint()) < 1e-15);
        assert!((qa.frobenius_norm() - da.norm()).abs() < 1e-13);
        assert!((qa.operator_norm() - qa_d.operator_norm()).abs() < 1e-9 * qa_d.operator_norm());
        assert!((qa.trace() - da.trace()).norm() < 1e-14);
    }

    #[test]
    fn site_multiplication_matches_kronecker() {
        let a = QOperator::from_dense(3, sample(3, 7)).unwrap();
        let r = [
            [C64::new(1.0, 0.5), C64::new(0.0, 0.0), C64::new(2.0, 0.0)],
            [C64::new(0.0, -1.0), C64::new(0.3, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 1.0), C64::new(-0.5, 0.0)],
        ];
        let r_mat = DenseMatrix::from_fn(3, 3, |i, j| r[i][j]);
        let id3 = DenseMatrix::identity(3, 3);
        for site in 1..=3 {
            let mut full = DenseMatrix::identity(1, 1);
            for k in 1..=3 {
                full = kron(&full, if k == site { &r_mat } else { &id3 });
            }
            let expected = a.to_dense() * full;
            let got = a.mul_site_right(site, &r);
            assert!(crate::residual::matrix(&got.to_dense(), &expected) < 1e-15, "site {site}");
        }
    }

    #[test]
    fn shape_is_validated() {
        assert!(QOperator::from_dense(2, DenseMatrix::zeros(8, 8)).is_err());
    }

    #[test]
    fn row_action_has_no_conjugation() {
        let m = sample(1, 3);
        let q = QOperator::from_dense(1, m.clone()).unwrap();
        let x = StateVector::from_vec(vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0), C64::new(2.0, -1.0)]);
        let expected = (x.transpose() * &m).transpose();
        assert!(crate::residual::vector(&q.apply_row(&x), &expected) < 1e-15);
    }
}
