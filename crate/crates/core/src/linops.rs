//! Dense complex linear algebra on multi-qubit operators.
//!
//! Qubit `0` is the most significant bit of a basis index: for a register
//! of `q` qubits, qubit `k` is bit `q - 1 - k`. Signal states use the
//! register order `(A_1, ..., A_N, B)`, so Alice's ports come first and
//! Bob's qubit is the least significant one.
//!
//! Eigendecompositions are delegated to `faer`; everything built on top of
//! them (support restriction, partial traces, embeddings) lives here.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{domain, Error, Result};

/// Relative eigenvalue cut separating the kernel from the support.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Absolute entrywise tolerance for `A == A^dagger`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A single-qubit operator in row-major order.
pub type Matrix2 = [[c64; 2]; 2];

#[inline]
fn bit_of(index: usize, qubit: usize, qubits: usize) -> usize {
    (index >> (qubits - 1 - qubit)) & 1
}

#[inline]
fn mask_of(qubit: usize, qubits: usize) -> usize {
    1 << (qubits - 1 - qubit)
}

/// Dense Hermitian operator on a register of qubits.
#[derive(Clone, Debug)]
pub struct HermitianOp {
    mat: Mat<c64>,
    qubits: usize,
}

impl HermitianOp {
    /// Wraps a dense matrix after checking shape and Hermiticity.
    pub fn new(mat: Mat<c64>) -> Result<Self> {
        let dim = mat.nrows();
        if mat.ncols() != dim {
            return domain(format!("matrix is {}x{}, not square", dim, mat.ncols()));
        }
        if dim == 0 || !dim.is_power_of_two() {
            return domain(format!("dimension {dim} is not a power of two"));
        }
        let err = hermiticity_error(mat.as_ref());
        if err > HERMITIAN_TOL {
            return domain(format!("matrix is not Hermitian (max deviation {err:e})"));
        }
        Ok(Self {
            qubits: dim.trailing_zeros() as usize,
            mat,
        })
    }

    /// Builds an operator from an entry function, checked like [`HermitianOp::new`].
    pub fn from_fn(qubits: usize, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        let dim = 1usize << qubits;
        Self::new(Mat::from_fn(dim, dim, f))
    }

    /// Symmetrizes `(A + A^dagger) / 2`; used for products that are Hermitian
    /// analytically but carry round-off.
    pub(crate) fn hermitized(mat: Mat<c64>) -> Self {
        let dim = mat.nrows();
        debug_assert!(dim.is_power_of_two() && mat.ncols() == dim);
        let out = Mat::from_fn(dim, dim, |i, j| {
            if i == j {
                c64::new(mat[(i, i)].re, 0.0)
            } else {
                (mat[(i, j)] + mat[(j, i)].conj()) * 0.5
            }
        });
        Self {
            qubits: dim.trailing_zeros() as usize,
            mat: out,
        }
    }

    pub fn identity(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            mat: Mat::identity(dim, dim),
            qubits,
        }
    }

    pub fn zeros(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            mat: Mat::zeros(dim, dim),
            qubits,
        }
    }

    /// Rank-one operator `|v><v|`.
    pub fn projector(v: &[c64]) -> Result<Self> {
        let dim = v.len();
        if dim == 0 || !dim.is_power_of_two() {
            return domain(format!("vector length {dim} is not a power of two"));
        }
        Ok(Self::hermitized(Mat::from_fn(dim, dim, |i, j| v[i] * v[j].conj())))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.mat
    }

    pub fn entry(&self, row: usize, col: usize) -> c64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// `tr(self * other)`.
    pub fn trace_product(&self, other: &HermitianOp) -> Result<c64> {
        self.same_shape(other)?;
        Ok(trace_of_product(self.matrix(), other.matrix()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * factor),
            qubits: self.qubits,
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &HermitianOp, factor: f64) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| {
                self.mat[(i, j)] + other.mat[(i, j)] * factor
            }),
            qubits: self.qubits,
        })
    }

    pub fn add(&self, other: &HermitianOp) -> Result<Self> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &HermitianOp) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianOp) -> Result<f64> {
        self.same_shape(other)?;
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                worst = worst.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        Ok(worst)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(self.matrix())
    }

    /// `U_q A U_q^dagger` with the single-qubit operator `u` acting on `qubit`.
    pub fn conjugate_local(&self, u: &Matrix2, qubit: usize) -> Result<Self> {
        if qubit >= self.qubits {
            return domain(format!(
                "qubit {qubit} out of range for a {}-qubit operator",
                self.qubits
            ));
        }
        let dim = self.dim();
        let n = self.qubits;
        let mask = mask_of(qubit, n);
        let left = Mat::from_fn(dim, dim, |r, c| {
            let b = bit_of(r, qubit, n);
            let r0 = r & !mask;
            u[b][0] * self.mat[(r0, c)] + u[b][1] * self.mat[(r0 | mask, c)]
        });
        let both = Mat::from_fn(dim, dim, |r, c| {
            let b = bit_of(c, qubit, n);
            let c0 = c & !mask;
            left[(r, c0)] * u[b][0].conj() + left[(r, c0 | mask)] * u[b][1].conj()
        });
        Ok(Self::hermitized(both))
    }

    /// Relabels qubits: qubit `k` of the result is qubit `perm[k]` of `self`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<Self> {
        let n = self.qubits;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return domain(format!("{perm:?} is not a permutation of 0..{n}"));
        }
        let dim = self.dim();
        let source: Vec<usize> = (0..dim)
            .map(|idx| {
                (0..n).fold(0, |acc, k| {
                    acc | (bit_of(idx, k, n) << (n - 1 - perm[k]))
                })
            })
            .collect();
        Ok(Self {
            mat: Mat::from_fn(dim, dim, |i, j| self.mat[(source[i], source[j])]),
            qubits: n,
        })
    }

    /// Places a two-qubit operator on qubits `(first, second)` of a
    /// `total`-qubit register, with the identity on every other qubit.
    pub fn embed_two_qubit(
        block: &HermitianOp,
        first: usize,
        second: usize,
        total: usize,
    ) -> Result<Self> {
        if block.qubits != 2 {
            return domain("embedded block must act on two qubits");
        }
        if first >= total || second >= total || first == second {
            return domain(format!(
                "invalid qubit pair ({first}, {second}) in a {total}-qubit register"
            ));
        }
        let dim = 1usize << total;
        let (m1, m2) = (mask_of(first, total), mask_of(second, total));
        let mut mat = Mat::<c64>::zeros(dim, dim);
        for r in 0..dim {
            let br = 2 * bit_of(r, first, total) + bit_of(r, second, total);
            let base = r & !(m1 | m2);
            for bc in 0..4 {
                let v = block.mat[(br, bc)];
                if v != c64::new(0.0, 0.0) {
                    let c = base | if bc & 2 != 0 { m1 } else { 0 } | if bc & 1 != 0 { m2 } else { 0 };
                    mat[(r, c)] = v;
                }
            }
        }
        Ok(Self { mat, qubits: total })
    }

    /// Per-column lists of nonzero entries, when the operator is sparse
    /// enough for a structured product to pay off.
    fn column_pattern(&self) -> Option<Vec<Vec<(usize, c64)>>> {
        let dim = self.dim();
        let budget = dim * dim / 16;
        let mut nnz = 0;
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut col = Vec::new();
            for i in 0..dim {
                let v = self.mat[(i, j)];
                if v != c64::new(0.0, 0.0) {
                    col.push((i, v));
                    nnz += 1;
                    if nnz > budget {
                        return None;
                    }
                }
            }
            cols.push(col);
        }
        Some(cols)
    }

    fn same_shape(&self, other: &HermitianOp) -> Result<()> {
        if self.dim() != other.dim() {
            return domain(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            ));
        }
        Ok(())
    }
}

fn hermiticity_error(m: MatRef<'_, c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn frobenius(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for j in 0..a.ncols() {
        for k in 0..a.nrows() {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

/// `A * B`, using the column sparsity of `B` when it has any.
pub(crate) fn product(a: MatRef<'_, c64>, b: &HermitianOp) -> Mat<c64> {
    match b.column_pattern() {
        Some(cols) => {
            let mut out = Mat::<c64>::zeros(a.nrows(), b.dim());
            for (j, col) in cols.iter().enumerate() {
                for &(k, v) in col {
                    for i in 0..a.nrows() {
                        out[(i, j)] += a[(i, k)] * v;
                    }
                }
            }
            out
        }
        None => a * b.matrix(),
    }
}

/// `S X S` for Hermitian `S` and `X`.
pub(crate) fn sandwich(s: &HermitianOp, x: &HermitianOp) -> HermitianOp {
    let sx = product(s.matrix(), x);
    HermitianOp::hermitized(sx.as_ref() * s.matrix())
}

/// Kronecker product; `a` occupies the most significant qubits.
pub fn tensor(a: &HermitianOp, b: &HermitianOp) -> HermitianOp {
    let (da, db) = (a.dim(), b.dim());
    HermitianOp {
        mat: Mat::from_fn(da * db, da * db, |i, j| {
            a.mat[(i / db, j / db)] * b.mat[(i % db, j % db)]
        }),
        qubits: a.qubits + b.qubits,
    }
}

/// Traces out every qubit not listed in `keep`. Kept qubits retain their
/// relative order; tracing out everything yields a 1x1 operator.
pub fn partial_trace(op: &HermitianOp, keep: &[usize]) -> Result<HermitianOp> {
    let n = op.qubits;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&q| q >= n) {
        return domain(format!("qubit {bad} out of range for a {n}-qubit operator"));
    }
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let scatter = |qubits: &[usize]| -> Vec<usize> {
        let m = qubits.len();
        (0..1usize << m)
            .map(|idx| {
                qubits.iter().enumerate().fold(0, |acc, (pos, &q)| {
                    acc | (bit_of(idx, pos, m) * mask_of(q, n))
                })
            })
            .collect()
    };
    let keep_idx = scatter(&kept);
    let trace_idx = scatter(&traced);
    let dk = keep_idx.len();
    let mat = Mat::from_fn(dk, dk, |i, j| {
        trace_idx
            .iter()
            .map(|&t| op.mat[(keep_idx[i] | t, keep_idx[j] | t)])
            .sum()
    });
    Ok(HermitianOp {
        mat,
        qubits: kept.len(),
    })
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<c64>,
    rank_tol: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns pair with [`SpectralDecomposition::eigenvalues`].
    pub fn eigenvectors(&self) -> MatRef<'_, c64> {
        self.eigenvectors.as_ref()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self
    }

    fn cutoff(&self) -> f64 {
        let scale = self
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(self.eigenvalues.last().map_or(0.0, |v| -v));
        self.rank_tol * scale
    }

    /// Number of eigenvalues above the relative cut.
    pub fn rank(&self) -> usize {
        let cut = self.cutoff();
        self.eigenvalues.iter().filter(|&&l| l > cut).count()
    }

    /// `V diag(lambda) V^dagger`.
    pub fn reconstruct(&self) -> HermitianOp {
        self.assemble(Some)
    }

    /// Applies `f` on the support and zero on the kernel; fails when an
    /// eigenvalue lies below `-rank_tol * lambda_max`.
    pub fn map_on_support(&self, f: impl Fn(f64) -> f64) -> Result<HermitianOp> {
        let cut = self.cutoff();
        if let Some(&min) = self.eigenvalues.last() {
            if min < -cut {
                return domain(format!(
                    "operator is not positive semidefinite (eigenvalue {min:e})"
                ));
            }
        }
        Ok(self.assemble(|l| (l > cut).then(|| f(l))))
    }

    /// Applies `f` to every eigenvalue, kernel included.
    pub fn map_all(&self, f: impl Fn(f64) -> f64) -> HermitianOp {
        self.assemble(|l| Some(f(l)))
    }

    /// Projector onto the eigenvectors at or below the rank cut.
    pub fn kernel_projector(&self) -> HermitianOp {
        let cut = self.cutoff();
        self.assemble(|l| (l <= cut).then_some(1.0))
    }

    fn assemble(&self, f: impl Fn(f64) -> Option<f64>) -> HermitianOp {
        let dim = self.eigenvectors.nrows();
        let picked: Vec<(usize, f64)> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter_map(|(k, &l)| f(l).map(|v| (k, v)))
            .collect();
        if picked.is_empty() {
            return HermitianOp::zeros(dim.trailing_zeros() as usize);
        }
        let v = &self.eigenvectors;
        let cols = Mat::from_fn(dim, picked.len(), |i, c| v[(i, picked[c].0)]);
        let scaled = Mat::from_fn(dim, picked.len(), |i, c| cols[(i, c)] * picked[c].1);
        HermitianOp::hermitized(scaled.as_ref() * cols.adjoint())
    }
}

fn numerical(err: impl std::fmt::Debug) -> Error {
    Error::Numerical {
        message: format!("eigensolver failed: {err:?}"),
        residual: f64::NAN,
    }
}

/// Full spectral decomposition with eigenvalues sorted descending.
pub fn eig_hermitian(op: &HermitianOp) -> Result<SpectralDecomposition> {
    let evd = op
        .mat
        .self_adjoint_eigen(Side::Lower)
        .map_err(numerical)?;
    let dim = op.dim();
    let s = evd.S().column_vector();
    let u = evd.U();
    let eigenvalues = (0..dim).rev().map(|k| s[k].re).collect();
    let eigenvectors = Mat::from_fn(dim, dim, |i, k| u[(i, dim - 1 - k)]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        rank_tol: DEFAULT_RANK_TOL,
    })
}

/// Eigenvalues only, descending.
pub fn eigenvalues(op: &HermitianOp) -> Result<Vec<f64>> {
    let mut vals = op
        .mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(numerical)?;
    vals.reverse();
    Ok(vals)
}

/// `f(op)` on the support of a positive semidefinite operator.
pub fn func_on_support(
    op: &HermitianOp,
    f: impl Fn(f64) -> f64,
    rank_tol: f64,
) -> Result<HermitianOp> {
    eig_hermitian(op)?.with_rank_tol(rank_tol).map_on_support(f)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(op: &HermitianOp) -> Result<f64> {
    Ok(eigenvalues(op)?.iter().map(|l| l.abs()).sum())
}

/// Uhlmann fidelity `tr sqrt(sqrt(a) b sqrt(a))`, evaluated as the trace
/// norm of `sqrt(a) sqrt(b)`.
pub fn state_fidelity(a: &HermitianOp, b: &HermitianOp) -> Result<f64> {
    a.same_shape(b)?;
    let ra = func_on_support(a, f64::sqrt, DEFAULT_RANK_TOL)?;
    let rb = func_on_support(b, f64::sqrt, DEFAULT_RANK_TOL)?;
    let m = ra.matrix() * rb.matrix();
    let sv = m.singular_values().map_err(numerical)?;
    Ok(sv.iter().sum())
}
