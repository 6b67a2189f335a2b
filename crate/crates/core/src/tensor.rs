//! Dense complex tensors and the handful of matrix factorizations the rest
//! of the crate is built on.
//!
//! Every tensor is stored row-major: for shape `[d0, d1, ..., dk]` the
//! element at `[i0, ..., ik]` lives at `((i0 * d1 + i1) * d2 + ...) + ik`.
//! Reshapes never move data, so the axis grouping of every reshape in the
//! crate is fixed by this rule.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Shared numerical tolerances.
pub mod tol {
    /// Default absolute tolerance for structural checks.
    pub const ATOL: f64 = 1e-10;
    /// Default relative cutoff for discarding singular values.
    pub const SVD_CUTOFF: f64 = 1e-12;
    /// Accepted deviation from Hermiticity.
    pub const HERMITIAN: f64 = 1e-10;
    /// Accepted deviation from unitarity / isometry of compiler inputs.
    pub const UNITARY: f64 = 1e-8;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("zero dimension in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        DenseTensor { shape: shape.to_vec(), data: vec![ZERO; shape.iter().product()] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        t
    }

    /// A `rows x cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// A matrix from real row-major data.
    pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::matrix(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn vector(data: Vec<C64>) -> Self {
        let n = data.len();
        DenseTensor { shape: vec![n], data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: C64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.rank(), 2, "not a matrix");
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.rank(), 2, "not a matrix");
        self.shape[1]
    }

    /// Matrix element; panics unless rank 2.
    pub fn at(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols() + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut C64 {
        let cols = self.cols();
        &mut self.data[r * cols + c]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Reorders axes: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Self {
        assert_eq!(axes.len(), self.rank(), "permutation length");
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let mut strides = vec![1usize; self.rank()];
        for ax in (0..self.rank().saturating_sub(1)).rev() {
            strides[ax] = strides[ax + 1] * self.shape[ax + 1];
        }
        let src_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[src]);
            for ax in (0..new_shape.len()).rev() {
                idx[ax] += 1;
                src += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                src -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        DenseTensor { shape: new_shape, data: out }
    }

    pub fn conj(&self) -> Self {
        DenseTensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        assert_eq!(self.rank(), 2, "transpose of non-matrix");
        self.permute(&[1, 0])
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Self {
        self.transpose().conj()
    }

    pub fn scale(&self, a: C64) -> Self {
        DenseTensor { shape: self.shape.clone(), data: self.data.iter().map(|z| z * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::shape(format!(
                "matmul {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![ZERO; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(DenseTensor { shape: vec![m, n], data: out })
    }

    /// Kronecker product of two matrices; `self` indexes the high-order bits.
    pub fn kron(&self, other: &Self) -> Self {
        assert!(self.rank() == 2 && other.rank() == 2, "kron of non-matrices");
        let (ra, ca) = (self.shape[0], self.shape[1]);
        let (rb, cb) = (other.shape[0], other.shape[1]);
        Self::from_fn(&[ra * rb, ca * cb], |ix| {
            self.at(ix[0] / rb, ix[1] / cb) * other.at(ix[0] % rb, ix[1] % cb)
        })
    }

    pub fn trace(&self) -> C64 {
        let n = self.rows().min(self.cols());
        (0..n).map(|i| self.at(i, i)).sum()
    }

    /// Largest deviation of `self` from its adjoint.
    pub fn hermiticity_error(&self) -> f64 {
        if self.rank() != 2 || self.rows() != self.cols() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.at(r, c) - self.at(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Largest entry of `self^dagger self - I`; zero for an isometry.
    pub fn isometry_error(&self) -> f64 {
        let g = self.adjoint().matmul(self).expect("square gram");
        g.max_abs_diff(&Self::identity(g.rows()))
    }

    /// Largest entry of `U^dagger U - I` and `U U^dagger - I`.
    pub fn unitarity_error(&self) -> f64 {
        if self.rank() != 2 || self.rows() != self.cols() {
            return f64::INFINITY;
        }
        let a = self.isometry_error();
        let b = self.adjoint().isometry_error();
        a.max(b)
    }

    /// Operator (spectral) norm of a matrix.
    pub fn op_norm(&self) -> f64 {
        match self.to_mat().singular_values() {
            Ok(s) => s.into_iter().fold(0.0, f64::max),
            Err(_) => f64::NAN,
        }
    }

    pub(crate) fn to_mat(&self) -> Mat<C64> {
        let c = self.cols();
        Mat::from_fn(self.rows(), c, |i, j| self.data[i * c + j])
    }

    pub(crate) fn from_mat(m: faer::MatRef<'_, C64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        DenseTensor { shape: vec![r, c], data }
    }

    /// Column `j` of a matrix.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows()).map(|i| self.at(i, j)).collect()
    }

    /// Leading `k` columns of a matrix.
    pub fn leading_columns(&self, k: usize) -> Self {
        let r = self.rows();
        Self::from_fn(&[r, k], |ix| self.at(ix[0], ix[1]))
    }

    /// Leading `k` rows of a matrix.
    pub fn leading_rows(&self, k: usize) -> Self {
        let c = self.cols();
        Self::from_fn(&[k, c], |ix| self.at(ix[0], ix[1]))
    }
}

/// Sums products over paired axes of `a` and `b`.
///
/// The result carries the free axes of `a` in order, followed by the free
/// axes of `b` in order.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    axes_a: &[usize],
    axes_b: &[usize],
) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(Error::shape("different numbers of contracted axes"));
    }
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if x >= a.rank() || y >= b.rank() {
            return Err(Error::shape(format!("axis out of range ({x}, {y})")));
        }
        if a.shape[x] != b.shape[y] {
            return Err(Error::shape(format!(
                "paired axes {x} and {y} have dimensions {} and {}",
                a.shape[x], b.shape[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|ax| !axes_a.contains(ax)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|ax| !axes_b.contains(ax)).collect();

    let perm_a: Vec<usize> = free_a.iter().chain(axes_a).copied().collect();
    let perm_b: Vec<usize> = axes_b.iter().chain(&free_b).copied().collect();
    let rows: usize = free_a.iter().map(|&x| a.shape[x]).product();
    let inner: usize = axes_a.iter().map(|&x| a.shape[x]).product();
    let cols: usize = free_b.iter().map(|&x| b.shape[x]).product();

    let am = a.permute(&perm_a).reshape(&[rows, inner])?;
    let bm = b.permute(&perm_b).reshape(&[inner, cols])?;
    let prod = am.matmul(&bm)?;

    let mut shape: Vec<usize> = free_a.iter().map(|&x| a.shape[x]).collect();
    shape.extend(free_b.iter().map(|&x| b.shape[x]));
    if shape.is_empty() {
        shape.push(1);
    }
    prod.reshape(&shape)
}

/// Truncated singular value decomposition `m ~ u * diag(s) * v`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x k`, orthonormal columns.
    pub u: DenseTensor,
    /// Descending, length `k`.
    pub s: Vec<f64>,
    /// `k x cols`, orthonormal rows.
    pub v: DenseTensor,
    /// Sum of squares of the discarded singular values.
    pub discarded_weight: f64,
}

impl Svd {
    /// `u * diag(s) * v`.
    pub fn reconstruct(&self) -> DenseTensor {
        let us = scale_columns(&self.u, &self.s);
        us.matmul(&self.v).expect("svd factors conform")
    }
}

pub(crate) fn scale_columns(m: &DenseTensor, s: &[f64]) -> DenseTensor {
    let c = m.cols();
    let mut out = m.clone();
    for (i, z) in out.data.iter_mut().enumerate() {
        *z *= s[i % c];
    }
    out
}

pub(crate) fn scale_rows(m: &DenseTensor, s: &[f64]) -> DenseTensor {
    let c = m.cols();
    let mut out = m.clone();
    for (i, z) in out.data.iter_mut().enumerate() {
        *z *= s[i / c];
    }
    out
}

/// Keeps at most `chi_max` singular values, and drops any below
/// `cutoff * max(s)`. At least one value is always kept.
pub fn svd_truncated(m: &DenseTensor, chi_max: usize, cutoff: f64) -> Result<Svd> {
    if m.rank() != 2 {
        return Err(Error::shape(format!("svd of rank-{} tensor", m.rank())));
    }
    if chi_max == 0 {
        return Err(Error::invalid("chi_max must be positive"));
    }
    if !(cutoff >= 0.0) {
        return Err(Error::invalid("cutoff must be non-negative"));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::shape("svd of an empty matrix"));
    }
    let svd = m
        .to_mat()
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let sv: Vec<f64> = (0..svd.S().dim()).map(|i| svd.S()[i].re).collect();
    let smax = sv[0];
    let total = sv.len();

    let mut keep = 0;
    for i in 0..total {
        if i >= chi_max {
            break;
        }
        if i > 0 && sv[i] <= cutoff * smax {
            break;
        }
        keep += 1;
    }
    let discarded_weight = (keep..total).map(|i| sv[i] * sv[i]).sum();

    let rows = m.rows();
    let cols = m.cols();
    let uk = DenseTensor::from_fn(&[rows, keep], |ix| u[(ix[0], ix[1])]);
    let vk = DenseTensor::from_fn(&[keep, cols], |ix| v[(ix[1], ix[0])].conj());
    let s = (0..keep).map(|i| sv[i]).collect();
    Ok(Svd { u: uk, s, v: vk, discarded_weight })
}

/// Thin QR of a matrix of any shape: `Q` is `rows x k`, `R` is `k x cols`,
/// `k = min(rows, cols)`.
pub(crate) fn qr_thin(m: &DenseTensor) -> (DenseTensor, DenseTensor) {
    let qr = m.to_mat().qr();
    let k = m.rows().min(m.cols());
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    (DenseTensor::from_mat(q.as_ref()), DenseTensor::from_mat(r.subrows(0, k)))
}

/// QR decomposition of a tall (or square) matrix.
pub fn qr_decompose(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(Error::shape(format!("QR of rank-{} tensor", m.rank())));
    }
    if m.rows() < m.cols() {
        return Err(Error::shape(format!(
            "QR needs rows >= columns, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(qr_thin(m))
}

fn check_hermitian(h: &DenseTensor) -> Result<()> {
    if h.rank() != 2 || h.rows() != h.cols() {
        return Err(Error::shape(format!("expected a square matrix, got {:?}", h.shape())));
    }
    let dev = h.hermiticity_error();
    let scale = h.norm().max(1.0);
    if dev > tol::HERMITIAN * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// as the columns of the returned matrix.
pub fn hermitian_eig(h: &DenseTensor) -> Result<(Vec<f64>, DenseTensor)> {
    check_hermitian(h)?;
    let n = h.rows();
    // symmetrize so the solver sees an exactly Hermitian input
    let dm = Mat::from_fn(n, n, |r, c| {
        if r == c {
            C64::new(h.at(r, r).re, 0.0)
        } else {
            (h.at(r, c) + h.at(c, r).conj()) * 0.5
        }
    });
    let eig = dm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    let (u, sv) = (eig.U(), eig.S());
    let values = (0..n).map(|i| sv[i].re).collect();
    let vecs = DenseTensor::from_mat(u);
    Ok((values, vecs))
}

/// Determinant of a square matrix.
pub fn determinant(m: &DenseTensor) -> Result<C64> {
    if m.rank() != 2 || m.rows() != m.cols() {
        return Err(Error::shape(format!("determinant of shape {:?}", m.shape())));
    }
    Ok(m.to_mat().as_ref().determinant())
}

/// Eigen-decomposition of a real symmetric `n x n` matrix given row-major.
/// Returns ascending eigenvalues and the eigenvectors as columns (row-major).
pub(crate) fn real_symmetric_eig(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = Mat::<f64>::from_fn(n, n, |r, c| 0.5 * (a[r * n + c] + a[c * n + r]));
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    let (u, sv) = (eig.U(), eig.S());
    let values = (0..n).map(|i| sv[i]).collect();
    let mut vecs = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            vecs[r * n + c] = u[(r, c)];
        }
    }
    Ok((values, vecs))
}

/// The unitary `W` maximizing `Re tr(W e)` for a square `e`: with
/// `e = U S V^dag` it is `V U^dag`, and `tr(W e)` is the sum of the
/// singular values. Rank-deficient inputs still yield a unitary.
pub(crate) fn polar_unitary(e: &DenseTensor) -> Result<DenseTensor> {
    if e.rank() != 2 || e.rows() != e.cols() {
        return Err(Error::shape(format!("polar factor of shape {:?}", e.shape())));
    }
    let svd = e
        .to_mat()
        .svd()
        .map_err(|err| Error::Numerical(format!("SVD did not converge: {err:?}")))?;
    let w = svd.V() * svd.U().adjoint();
    Ok(DenseTensor::from_mat(w.as_ref()))
}

/// `exp(scale * h)` for Hermitian `h`, through its eigendecomposition.
pub fn hermitian_expm(h: &DenseTensor, scale: C64) -> Result<DenseTensor> {
    let (vals, vecs) = hermitian_eig(h)?;
    let n = vals.len();
    let phases: Vec<C64> = vals.iter().map(|&l| (scale * l).exp()).collect();
    let mut left = vecs.clone();
    for r in 0..n {
        for c in 0..n {
            *left.at_mut(r, c) *= phases[c];
        }
    }
    left.matmul(&vecs.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseTensor {
        DenseTensor::from_fn(&[r, c], |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DenseTensor {
        let a = random_matrix(rng, n, n);
        a.add(&a.adjoint()).unwrap()
    }

    fn pauli_x() -> DenseTensor {
        DenseTensor::real_matrix(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn pauli_z() -> DenseTensor {
        DenseTensor::real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    #[test]
    fn new_rejects_bad_shapes() {
        assert!(DenseTensor::new(vec![2, 0], vec![]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![ONE; 3]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![ONE; 4]).is_ok());
    }

    #[test]
    fn identity_contraction_returns_vector() {
        let v = DenseTensor::vector(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let out = contract(&DenseTensor::identity(2), &v, &[1], &[0]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn contraction_matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2, 3);
        let b = random_matrix(&mut rng, 3, 4);
        let out = contract(&a, &b, &[1], &[0]).unwrap();
        assert_eq!(out.shape(), &[2, 4]);
        for i in 0..2 {
            for j in 0..4 {
                let mut acc = ZERO;
                for k in 0..3 {
                    acc += a.at(i, k) * b.at(k, j);
                }
                assert!((out.at(i, j) - acc).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn full_contraction_with_conjugate_is_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 3, 5).reshape(&[3, 5, 1]).unwrap();
        let out = contract(&a, &a.conj(), &[0, 1, 2], &[0, 1, 2]).unwrap();
        let v = out.data()[0];
        assert!(v.im.abs() < 1e-14);
        assert!(v.re >= 0.0);
        assert!((v.re - a.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn contraction_rejects_mismatched_axes() {
        let a = DenseTensor::zeros(&[2, 3]);
        let b = DenseTensor::zeros(&[2, 3]);
        assert!(matches!(contract(&a, &b, &[1], &[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn permute_moves_axes() {
        let t = DenseTensor::from_fn(&[2, 3, 4], |ix| {
            C64::new((ix[0] * 100 + ix[1] * 10 + ix[2]) as f64, 0.0)
        });
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for c in 0..4 {
                    assert_eq!(p.get(&[c, a, b]), t.get(&[a, b, c]));
                }
            }
        }
    }

    #[test]
    fn svd_of_identity() {
        let svd = svd_truncated(&DenseTensor::identity(4), 4, 0.0).unwrap();
        assert_eq!(svd.s.len(), 4);
        for s in &svd.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, c) in [(4, 4), (6, 3), (3, 7)] {
            let m = random_matrix(&mut rng, r, c);
            let svd = svd_truncated(&m, r.max(c), 0.0).unwrap();
            assert!(svd.reconstruct().sub(&m).unwrap().norm() <= 1e-12 * m.norm().max(1.0));
            assert!(svd.u.isometry_error() < 1e-12);
            assert!(svd.v.adjoint().isometry_error() < 1e-12);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_of_rank_one_keeps_one_value() {
        let x = DenseTensor::from_fn(&[4, 1], |ix| C64::new(1.0 + ix[0] as f64, 0.3));
        let y = DenseTensor::from_fn(&[1, 4], |ix| C64::new(0.5, -(ix[1] as f64)));
        let m = x.matmul(&y).unwrap();
        let svd = svd_truncated(&m, 4, 1e-10).unwrap();
        assert_eq!(svd.s.len(), 1);
        assert!(svd.discarded_weight < 1e-20);
    }

    #[test]
    fn svd_respects_chi_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(&mut rng, 5, 5);
        let full = svd_truncated(&m, 5, 0.0).unwrap();
        let cut = svd_truncated(&m, 2, 0.0).unwrap();
        assert_eq!(cut.s.len(), 2);
        let expected: f64 = full.s[2..].iter().map(|s| s * s).sum();
        assert!((cut.discarded_weight - expected).abs() < 1e-12);
        let err = cut.reconstruct().sub(&m).unwrap().norm();
        assert!((err * err - expected).abs() < 1e-10);
    }

    #[test]
    fn qr_of_identity() {
        let (q, r) = qr_decompose(&DenseTensor::identity(2)).unwrap();
        for i in 0..2 {
            assert!((q.at(i, i).norm() - 1.0).abs() < 1e-14);
            assert!((r.at(i, i).norm() - 1.0).abs() < 1e-14);
        }
        assert!(q.matmul(&r).unwrap().max_abs_diff(&DenseTensor::identity(2)) < 1e-14);
    }

    #[test]
    fn qr_of_random_tall_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 6, 3);
        let (q, r) = qr_decompose(&m).unwrap();
        assert!(q.isometry_error() < 1e-12);
        for i in 0..r.rows() {
            for j in 0..i {
                assert!(r.at(i, j).norm() < 1e-14);
            }
        }
        assert!(q.matmul(&r).unwrap().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn qr_with_dependent_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_matrix(&mut rng, 5, 1);
        let m = DenseTensor::from_fn(&[5, 3], |ix| base.at(ix[0], 0) * (ix[1] as f64 + 1.0));
        let (q, r) = qr_decompose(&m).unwrap();
        assert!(q.matmul(&r).unwrap().max_abs_diff(&m) < 1e-12);
        assert!(q.isometry_error() < 1e-12);
    }

    #[test]
    fn qr_rejects_wide_matrix() {
        assert!(qr_decompose(&DenseTensor::zeros(&[2, 3])).is_err());
    }

    #[test]
    fn expm_of_zero_scale_is_identity() {
        let e = hermitian_expm(&pauli_z(), ZERO).unwrap();
        assert!(e.max_abs_diff(&DenseTensor::identity(2)) < 1e-15);
    }

    #[test]
    fn expm_of_z_rotation() {
        let theta = std::f64::consts::FRAC_PI_2;
        let e = hermitian_expm(&pauli_z(), C64::new(0.0, -theta)).unwrap();
        assert!((e.at(0, 0) - C64::new(0.0, -theta).exp()).norm() < 1e-14);
        assert!((e.at(1, 1) - C64::new(0.0, theta).exp()).norm() < 1e-14);
        assert!(e.at(0, 1).norm() < 1e-14);
        assert!(e.unitarity_error() < 1e-10);
    }

    #[test]
    fn expm_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 4);
        let scale = C64::new(-0.01, 0.0);
        let e = hermitian_expm(&h, scale).unwrap();
        // twelve terms of sum_k (scale h)^k / k!
        let a = h.scale(scale);
        let mut term = DenseTensor::identity(4);
        let mut series = DenseTensor::identity(4);
        for k in 1..12 {
            term = term.matmul(&a).unwrap().scale(C64::new(1.0 / k as f64, 0.0));
            series = series.add(&term).unwrap();
        }
        assert!(e.max_abs_diff(&series) < 1e-10);
    }

    #[test]
    fn expm_imaginary_scale_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 6);
        let e = hermitian_expm(&h, C64::new(0.0, 0.7)).unwrap();
        assert!(e.unitarity_error() < 1e-10);
    }

    #[test]
    fn expm_is_additive_in_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(&mut rng, 4);
        let (s1, s2) = (C64::new(0.3, -0.2), C64::new(-0.1, 0.5));
        let lhs = hermitian_expm(&h, s1).unwrap().matmul(&hermitian_expm(&h, s2).unwrap()).unwrap();
        let rhs = hermitian_expm(&h, s1 + s2).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let m = DenseTensor::real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_expm(&m, ONE), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eig_of_diagonal_and_pauli_x() {
        let d = DenseTensor::real_matrix(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, _) = hermitian_eig(&d).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let (vals, _) = hermitian_eig(&pauli_x()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_residuals_on_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_hermitian(&mut rng, 8);
        let (vals, vecs) = hermitian_eig(&h).unwrap();
        assert!(vecs.isometry_error() < 1e-12);
        for (k, &lambda) in vals.iter().enumerate() {
            let v = DenseTensor::matrix(8, 1, vecs.column(k)).unwrap();
            let hv = h.matmul(&v).unwrap();
            let resid = hv.sub(&v.scale(C64::new(lambda, 0.0))).unwrap().norm();
            assert!(resid <= 1e-10 * h.op_norm().max(1.0), "residual {resid}");
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = DenseTensor::real_matrix(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        assert!(hermitian_eig(&m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_matrix(r: usize, c: usize) -> impl Strategy<Value = DenseTensor> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c).prop_map(move |v| {
                DenseTensor::matrix(r, c, v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn contraction_is_bilinear(
                a in arb_matrix(3, 4),
                b in arb_matrix(4, 2),
                re in -2.0f64..2.0,
                im in -2.0f64..2.0,
            ) {
                let alpha = C64::new(re, im);
                let lhs = contract(&a.scale(alpha), &b, &[1], &[0]).unwrap();
                let rhs = contract(&a, &b, &[1], &[0]).unwrap().scale(alpha);
                prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            }

            #[test]
            fn full_rank_svd_is_exact(m in arb_matrix(4, 5)) {
                let svd = svd_truncated(&m, 5, 0.0).unwrap();
                let err = svd.reconstruct().sub(&m).unwrap().norm();
                prop_assert!(err <= 1e-12 * m.norm().max(1e-300));
            }
        }
    }
}
