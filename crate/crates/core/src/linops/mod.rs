//! Dense complex Hermitian operators with subsystem structure.
//!
//! A [`HermitianOp`] stores a square complex matrix together with the list of
//! subsystem dimensions of the space it acts on and the subset of subsystems
//! that belong to party B. Subsystem `k` is the `k`-th tensor factor, with the
//! first factor being the most significant index digit.

mod cone;
mod eig;
mod json;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use cone::{dykstra, project_ppt_cone, project_psd, project_psd_floor, DykstraOutcome, Projection};
pub use eig::{eig_herm, eig_matrix, herm_fn, Spectrum};
pub use json::MatrixJson;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Default cap on the total dimension of a tensor power.
pub const DEFAULT_DIM_CAP: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    mat: CMat,
    dims: Vec<usize>,
    b_indices: Vec<usize>,
}

fn check_layout(n: usize, dims: &[usize], b_indices: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::structural(format!("invalid subsystem dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != n {
        return Err(Error::structural(format!(
            "dims {dims:?} multiply to {prod}, matrix has size {n}"
        )));
    }
    for w in b_indices.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::structural("b_indices must be strictly increasing"));
        }
    }
    if let Some(&last) = b_indices.last() {
        if last >= dims.len() {
            return Err(Error::structural(format!(
                "b index {last} out of range for {} subsystems",
                dims.len()
            )));
        }
    }
    Ok(())
}

/// Largest entry of |X − X†|.
pub(crate) fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &CMat) -> CMat {
    let mut out = m.clone();
    let n = m.nrows();
    for i in 0..n {
        out[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Digits of every basis index with respect to `dims`, row `i` holding the
/// digits of index `i`.
fn digit_table(dims: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = dims.iter().product();
    (0..n)
        .map(|mut i| {
            let mut digits = vec![0; dims.len()];
            for k in (0..dims.len()).rev() {
                digits[k] = i % dims[k];
                i /= dims[k];
            }
            digits
        })
        .collect()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

impl HermitianOp {
    /// Builds an operator from a matrix, checking the layout and Hermiticity.
    /// Matrices within [`HERMITICITY_TOL`] of Hermitian are symmetrized.
    pub fn new(mat: CMat, dims: Vec<usize>, b_indices: Vec<usize>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::structural("matrix is not square"));
        }
        check_layout(mat.nrows(), &dims, &b_indices)?;
        let scale = mat.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        let defect = hermiticity_defect(&mat);
        if defect > HERMITICITY_TOL * scale {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self {
            mat: hermitize(&mat),
            dims,
            b_indices,
        })
    }

    /// Single-system operator without bipartition.
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        Self::new(mat, vec![n], vec![])
    }

    pub fn from_real(rows: &[Vec<f64>], dims: Vec<usize>, b_indices: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::structural("ragged matrix rows"));
        }
        let mat = CMat::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(mat, dims, b_indices)
    }

    /// Wraps a matrix known to be Hermitian up to rounding; symmetrizes it.
    pub(crate) fn from_parts(mat: CMat, dims: Vec<usize>, b_indices: Vec<usize>) -> Self {
        debug_assert_eq!(mat.nrows(), dims.iter().product::<usize>());
        Self {
            mat: hermitize(&mat),
            dims,
            b_indices,
        }
    }

    pub fn identity(dims: Vec<usize>, b_indices: Vec<usize>) -> Result<Self> {
        let n: usize = dims.iter().product();
        check_layout(n, &dims, &b_indices)?;
        Ok(Self {
            mat: CMat::identity(n, n),
            dims,
            b_indices,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let n = self.dim();
        Self {
            mat: CMat::zeros(n, n),
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        }
    }

    pub fn identity_like(&self) -> Self {
        let n = self.dim();
        Self {
            mat: CMat::identity(n, n),
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mat = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self {
            mat,
            dims: vec![n],
            b_indices: vec![],
        }
    }

    /// Rank-one projector |v⟩⟨v| (not normalized).
    pub fn outer(v: &[C64], dims: Vec<usize>, b_indices: Vec<usize>) -> Result<Self> {
        let n = v.len();
        check_layout(n, &dims, &b_indices)?;
        let mat = CMat::from_fn(n, n, |i, j| v[i] * v[j].conj());
        Ok(Self::from_parts(mat, dims, b_indices))
    }

    /// Same matrix with a different subsystem layout of equal total size.
    pub fn with_layout(&self, dims: Vec<usize>, b_indices: Vec<usize>) -> Result<Self> {
        check_layout(self.dim(), &dims, &b_indices)?;
        Ok(Self {
            mat: self.mat.clone(),
            dims,
            b_indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn b_indices(&self) -> &[usize] {
        &self.b_indices
    }

    pub fn a_indices(&self) -> Vec<usize> {
        (0..self.dims.len())
            .filter(|k| !self.b_indices.contains(k))
            .collect()
    }

    pub fn is_bipartite(&self) -> bool {
        !self.b_indices.is_empty() && self.b_indices.len() < self.dims.len()
    }

    /// Total dimensions of the A and B parties.
    pub fn party_dims(&self) -> (usize, usize) {
        let db: usize = self.b_indices.iter().map(|&k| self.dims[k]).product();
        (self.dim() / db, db)
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// tr[XY] for Hermitian X, Y (always real).
    pub fn inner(&self, other: &HermitianOp) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in inner product");
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.mat[(i, j)];
                let b = other.mat[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |a, z| a.max(z.norm()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: self.mat.map(|z| z * c),
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        }
    }

    /// Linear combination Σ c_k X_k of operators with identical layout.
    pub fn combination(terms: &[(f64, &HermitianOp)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::structural("empty linear combination"))?;
        let mut mat = CMat::zeros(first.dim(), first.dim());
        for (c, x) in terms {
            if x.dim() != first.dim() {
                return Err(Error::structural("dimension mismatch in combination"));
            }
            mat += x.mat.map(|z| z * *c);
        }
        Ok(Self {
            mat,
            dims: first.dims.clone(),
            b_indices: first.b_indices.clone(),
        })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_herm(self)?.eigenvalues[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*eig_herm(self)?.eigenvalues.last().unwrap())
    }

    /// Kronecker product A ⊗ B; B's subsystems are appended after A's.
    pub fn tensor(&self, other: &HermitianOp) -> Self {
        let mat = self.mat.kronecker(&other.mat);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let shift = self.dims.len();
        let mut b = self.b_indices.clone();
        b.extend(other.b_indices.iter().map(|k| k + shift));
        Self {
            mat,
            dims,
            b_indices: b,
        }
    }

    /// Transposes every subsystem in the B set.
    pub fn partial_transpose(&self) -> Result<Self> {
        if self.b_indices.is_empty() {
            return Err(Error::structural("partial transpose needs a declared bipartition"));
        }
        let n = self.dim();
        let digits = digit_table(&self.dims);
        let st = strides(&self.dims);
        let mut out = CMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let mut r2 = r as isize;
                let mut c2 = c as isize;
                for &k in &self.b_indices {
                    let delta = (digits[c][k] as isize - digits[r][k] as isize) * st[k] as isize;
                    r2 += delta;
                    c2 -= delta;
                }
                out[(r2 as usize, c2 as usize)] = self.mat[(r, c)];
            }
        }
        Ok(Self {
            mat: out,
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        })
    }

    /// Traces out every subsystem not listed in `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.iter().any(|&k| k >= self.dims.len()) {
            return Err(Error::structural(format!(
                "keep set {keep:?} invalid for {} subsystems",
                self.dims.len()
            )));
        }
        let traced: Vec<usize> = (0..self.dims.len()).filter(|k| !keep.contains(k)).collect();
        let new_dims: Vec<usize> = if keep.is_empty() {
            vec![1]
        } else {
            keep.iter().map(|&k| self.dims[k]).collect()
        };
        let new_b: Vec<usize> = keep
            .iter()
            .enumerate()
            .filter(|(_, k)| self.b_indices.contains(k))
            .map(|(i, _)| i)
            .collect();
        let m: usize = new_dims.iter().product();
        let new_st = strides(&new_dims);
        let digits = digit_table(&self.dims);
        let n = self.dim();
        let kept_index: Vec<usize> = digits
            .iter()
            .map(|dg| keep.iter().zip(&new_st).map(|(&k, s)| dg[k] * s).sum())
            .collect();
        let traced_key: Vec<usize> = {
            let tst = strides(&traced.iter().map(|&k| self.dims[k]).collect::<Vec<_>>());
            digits
                .iter()
                .map(|dg| traced.iter().zip(&tst).map(|(&k, s)| dg[k] * s).sum())
                .collect()
        };
        let mut out = CMat::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                if traced_key[i] == traced_key[j] {
                    out[(kept_index[i], kept_index[j])] += self.mat[(i, j)];
                }
            }
        }
        Ok(Self::from_parts(out, new_dims, new_b))
    }

    /// Reorders subsystems: new subsystem `k` is old subsystem `perm[k]`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        let k = self.dims.len();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::structural(format!("invalid permutation {perm:?}")));
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let new_st = strides(&new_dims);
        let digits = digit_table(&self.dims);
        let map: Vec<usize> = digits
            .iter()
            .map(|dg| perm.iter().zip(&new_st).map(|(&p, s)| dg[p] * s).sum())
            .collect();
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(map[i], map[j])] = self.mat[(i, j)];
            }
        }
        let mut new_b: Vec<usize> = (0..k).filter(|&i| self.b_indices.contains(&perm[i])).collect();
        new_b.sort_unstable();
        Ok(Self {
            mat: out,
            dims: new_dims,
            b_indices: new_b,
        })
    }

    /// Regroups a bipartite operator into a two-factor layout `[d_A, d_B]`
    /// with all A subsystems first (in their original order).
    pub fn to_ab_blocks(&self) -> Result<Self> {
        if !self.is_bipartite() {
            return Err(Error::structural("operator has no proper bipartition"));
        }
        let mut perm = self.a_indices();
        perm.extend_from_slice(&self.b_indices);
        let p = self.permute_subsystems(&perm)?;
        let (da, db) = self.party_dims();
        Ok(Self {
            mat: p.mat,
            dims: vec![da, db],
            b_indices: vec![1],
        })
    }

    /// n-fold tensor power, refusing results above `dim_cap`.
    pub fn tensor_power(&self, n: usize, dim_cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("tensor power needs n ≥ 1"));
        }
        let total = (self.dim() as f64).powi(n as i32);
        if total > dim_cap as f64 {
            return Err(Error::Resource(format!(
                "tensor power dimension {total} exceeds cap {dim_cap}"
            )));
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        Ok(out)
    }

    /// Operator dagger-conjugation V X V† for a square matrix V.
    pub fn conjugate_by(&self, v: &CMat) -> Self {
        let mat = v * &self.mat * v.adjoint();
        Self::from_parts(mat, self.dims.clone(), self.b_indices.clone())
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }
}

impl Add for &HermitianOp {
    type Output = HermitianOp;
    fn add(self, rhs: &HermitianOp) -> HermitianOp {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        HermitianOp {
            mat: &self.mat + &rhs.mat,
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        }
    }
}

impl Sub for &HermitianOp {
    type Output = HermitianOp;
    fn sub(self, rhs: &HermitianOp) -> HermitianOp {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in subtraction");
        HermitianOp {
            mat: &self.mat - &rhs.mat,
            dims: self.dims.clone(),
            b_indices: self.b_indices.clone(),
        }
    }
}

impl Mul<f64> for &HermitianOp {
    type Output = HermitianOp;
    fn mul(self, c: f64) -> HermitianOp {
        self.scale(c)
    }
}

impl Neg for &HermitianOp {
    type Output = HermitianOp;
    fn neg(self) -> HermitianOp {
        self.scale(-1.0)
    }
}

/// A unit-trace positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    op: HermitianOp,
}

impl DensityOp {
    pub fn new(op: HermitianOp) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Validation(format!("state has trace {tr}")));
        }
        let lmin = op.min_eigenvalue()?;
        if lmin < -PSD_TOL {
            return Err(Error::Validation(format!(
                "state has negative eigenvalue {lmin:e}"
            )));
        }
        Ok(Self { op })
    }

    /// Skips validation; used for operators that are states by construction.
    pub(crate) fn new_unchecked(op: HermitianOp) -> Self {
        Self { op }
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn into_op(self) -> HermitianOp {
        self.op
    }

    pub fn tensor(&self, other: &DensityOp) -> DensityOp {
        DensityOp::new_unchecked(self.op.tensor(&other.op))
    }

    pub fn tensor_power(&self, n: usize, dim_cap: usize) -> Result<DensityOp> {
        Ok(DensityOp::new_unchecked(self.op.tensor_power(n, dim_cap)?))
    }
}

impl std::ops::Deref for DensityOp {
    type Target = HermitianOp;
    fn deref(&self) -> &HermitianOp {
        &self.op
    }
}
