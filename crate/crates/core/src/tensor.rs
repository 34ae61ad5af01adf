//! Small dense symmetric matrices (dimension 1 to 3) and the closed-form
//! identities the optimality conditions are built from.
//!
//! Eigendecompositions are analytic in dimension 2 and use cyclic Jacobi
//! sweeps in dimension 3, so no external linear algebra is needed.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 50;
const SYMMETRY_TOL: f64 = 1e-12;
const SPD_RATIO: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension {0} outside 1..=3")]
    BadDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operation requires dimension >= 2, got {0}")]
    NeedsPlane(usize),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (eigenvalues in [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("zero vector where a direction is required")]
    ZeroVector,
    #[error("vector norm {0} differs from 1")]
    NotUnit(f64),
}

fn check_dim(dim: usize) -> Result<(), TensorError> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(TensorError::BadDimension(dim))
    }
}

/// A vector of dimension at most 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<T> {
    dim: usize,
    c: [T; MAX_DIM],
}

impl<T: Scalar> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside 1..=3");
        Self { dim, c: [T::zero(); MAX_DIM] }
    }

    pub fn from_slice(v: &[T]) -> Self {
        let mut out = Self::zeros(v.len());
        out.c[..v.len()].copy_from_slice(v);
        out
    }

    /// The `k`-th standard basis vector.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut out = Self::zeros(dim);
        out.c[k] = T::one();
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.c[..self.dim]
    }

    pub fn get(&self, i: usize) -> T {
        self.as_slice()[i]
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        (0..self.dim).map(|i| self.c[i] * other.c[i]).sum()
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.c.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn outer(&self, other: &Self) -> Mat<T> {
        debug_assert_eq!(self.dim, other.dim);
        let mut m = Mat::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = self.c[i] * other.c[j];
            }
        }
        m
    }
}

impl<T: Scalar> Add for Vector<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..MAX_DIM {
            self.c[i] += rhs.c[i];
        }
        self
    }
}

impl<T: Scalar> Sub for Vector<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..MAX_DIM {
            self.c[i] -= rhs.c[i];
        }
        self
    }
}

impl<T: Scalar> Neg for Vector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar + Serialize> Serialize for Vector<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

/// A point of the unit sphere: Euclidean norm 1 to `1e-12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent, bound = "T: Scalar + Serialize")]
pub struct UnitVector<T>(Vector<T>);

impl<T: Scalar> UnitVector<T> {
    /// Normalizes a nonzero vector.
    pub fn normalize(v: Vector<T>) -> Result<Self, TensorError> {
        let n = v.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(TensorError::ZeroVector);
        }
        Ok(Self(v.scale(T::one() / n)))
    }

    /// Accepts a vector that is already of unit length.
    pub fn try_new(v: Vector<T>) -> Result<Self, TensorError> {
        let n = v.norm();
        if (n - T::one()).abs() > T::tol(UNIT_TOL, 8.0) {
            return Err(TensorError::NotUnit(n.to_f64_lossy()));
        }
        Ok(Self(v))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        Self(Vector::basis(dim, k))
    }

    /// Unit vector at angle `theta` (radians) from the first axis in the plane.
    pub fn from_angle(theta: T) -> Self {
        Self(Vector::from_slice(&[theta.cos(), theta.sin()]))
    }

    pub fn vector(&self) -> &Vector<T> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }
}

/// A small dense square matrix. Most values handled here are symmetric,
/// but products are not, so symmetry is not part of this type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat<T> {
    dim: usize,
    a: [[T; MAX_DIM]; MAX_DIM],
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside 1..=3");
        Self { dim, a: [[T::zero(); MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, T::one())
    }

    /// `s * I`.
    pub fn scalar(dim: usize, s: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = s;
        }
        m
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.a[i][i] = x;
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self, TensorError> {
        let dim = rows.len();
        check_dim(dim)?;
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(TensorError::DimensionMismatch(dim, row.len()));
            }
            m.a[i][..dim].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.dim && j < self.dim);
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.dim && j < self.dim);
        self.a[i][j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.a.iter_mut() {
            row.iter_mut().for_each(|x| *x *= s);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = self.a[j][i];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[i][j] = (0..n).map(|k| self.a[i][k] * other.a[k][j]).sum();
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.dim, v.dim);
        let n = self.dim;
        let mut out = Vector::zeros(n);
        for i in 0..n {
            out.c[i] = (0..n).map(|k| self.a[i][k] * v.c[k]).sum();
        }
        out
    }

    /// `vᵀ M w`.
    pub fn bilinear(&self, v: &Vector<T>, w: &Vector<T>) -> T {
        v.dot(&self.mat_vec(w))
    }

    pub fn quad_form(&self, v: &Vector<T>) -> T {
        self.bilinear(v, v)
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        let n = self.dim;
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    /// Largest entry-wise asymmetry relative to the Frobenius norm.
    pub fn asymmetry(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        let scale = self.frobenius_norm();
        if scale > T::zero() {
            worst / scale
        } else {
            worst
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= T::tol(SYMMETRY_TOL, 16.0)
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = half * (self.a[i][j] + self.a[j][i]);
            }
        }
        out
    }

    /// Eigendecomposition of the symmetric part.
    pub fn sym_eigen(&self) -> SymEigen<T> {
        sym_eigen(&self.symmetrize())
    }

    pub fn min_eigenvalue(&self) -> T {
        self.sym_eigen().values[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        let e = self.sym_eigen();
        e.values[e.dim - 1]
    }
}

impl<T: Scalar> Add for Mat<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                self.a[i][j] += rhs.a[i][j];
            }
        }
        self
    }
}

impl<T: Scalar> Sub for Mat<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..MAX_DIM {
            for j in 0..MAX_DIM {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl<T: Scalar> Mul<T> for Mat<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Scalar> Mul for Mat<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}

impl<T: Scalar + Serialize> Serialize for Mat<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen<T> {
    pub dim: usize,
    pub values: [T; MAX_DIM],
    pub vectors: Mat<T>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn values(&self) -> &[T] {
        &self.values[..self.dim]
    }

    pub fn vector(&self, k: usize) -> Vector<T> {
        let mut v = Vector::zeros(self.dim);
        for i in 0..self.dim {
            v.c[i] = self.vectors.a[i][k];
        }
        v
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(T) -> T) -> Mat<T> {
        let n = self.dim;
        let mut out = Mat::zeros(n);
        for k in 0..n {
            let fk = f(self.values[k]);
            for i in 0..n {
                for j in 0..n {
                    out.a[i][j] += self.vectors.a[i][k] * fk * self.vectors.a[j][k];
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix (only the upper triangle is
/// trusted for dim 2; the full matrix is rotated for dim 3).
pub fn sym_eigen<T: Scalar>(m: &Mat<T>) -> SymEigen<T> {
    let (values, vectors) = match m.dim {
        1 => ([m.a[0][0], T::zero(), T::zero()], Mat::identity(1)),
        2 => eigen2(m),
        _ => jacobi3(m),
    };
    let mut out = SymEigen { dim: m.dim, values, vectors };
    sort_eigen(&mut out);
    out
}

fn eigen2<T: Scalar>(m: &Mat<T>) -> ([T; MAX_DIM], Mat<T>) {
    let (a, b, d) = (m.a[0][0], m.a[0][1], m.a[1][1]);
    // One Jacobi rotation diagonalizes a 2x2 symmetric matrix exactly.
    let theta = T::lit(0.5) * (b + b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let l1 = a * c * c + (b + b) * s * c + d * s * s;
    let l2 = a * s * s - (b + b) * s * c + d * c * c;
    let mut v = Mat::zeros(2);
    v.a[0][0] = c;
    v.a[1][0] = s;
    v.a[0][1] = -s;
    v.a[1][1] = c;
    ([l1, l2, T::zero()], v)
}

fn jacobi3<T: Scalar>(m: &Mat<T>) -> ([T; MAX_DIM], Mat<T>) {
    let n = 3;
    let mut a = m.a;
    let mut v = Mat::<T>::identity(3);
    let scale = m.frobenius_norm();
    let tol = T::tol(JACOBI_TOL, 1.0) * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (a[p][q] + a[p][q]);
                let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.a[k][p];
                    let vkq = v.a[k][q];
                    v.a[k][p] = c * vkp - s * vkq;
                    v.a[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

fn sort_eigen<T: Scalar>(e: &mut SymEigen<T>) {
    let n = e.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| e.values[i].partial_cmp(&e.values[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = e.values;
    let vectors = e.vectors;
    for (new, &old) in order.iter().enumerate() {
        e.values[new] = values[old];
        for i in 0..n {
            e.vectors.a[i][new] = vectors.a[i][old];
        }
    }
}

/// A symmetric positive definite matrix: smallest eigenvalue above
/// `1e-12` times the largest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent, bound = "T: Scalar + Serialize")]
pub struct SpdMatrix<T>(Mat<T>);

impl<T: Scalar> SpdMatrix<T> {
    pub fn new(m: Mat<T>) -> Result<Self, TensorError> {
        check_dim(m.dim)?;
        let asym = m.asymmetry();
        if asym > T::tol(SYMMETRY_TOL, 16.0) {
            return Err(TensorError::NotSymmetric(asym.to_f64_lossy()));
        }
        let m = m.symmetrize();
        let e = sym_eigen(&m);
        let (lo, hi) = (e.values[0], e.values[m.dim - 1]);
        if !(lo > T::zero()) || lo <= T::tol(SPD_RATIO, 4.0) * hi || !hi.is_finite() {
            return Err(TensorError::NotPositiveDefinite { min: lo.to_f64_lossy(), max: hi.to_f64_lossy() });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Mat::identity(dim))
    }

    /// `s * I` for `s > 0`.
    pub fn scalar(dim: usize, s: T) -> Result<Self, TensorError> {
        Self::new(Mat::scalar(dim, s))
    }

    pub fn diag(d: &[T]) -> Result<Self, TensorError> {
        Self::new(Mat::diag(d))
    }

    /// Wraps a matrix that is SPD by construction (e.g. a convex or
    /// harmonic combination of SPD matrices). Checked in debug builds.
    pub(crate) fn from_mat_unchecked(m: Mat<T>) -> Self {
        debug_assert!(Self::new(m).is_ok(), "expected SPD matrix, got {m:?}");
        Self(m.symmetrize())
    }

    pub fn mat(&self) -> &Mat<T> {
        &self.0
    }

    pub fn into_mat(self) -> Mat<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn eigen(&self) -> SymEigen<T> {
        sym_eigen(&self.0)
    }

    /// Eigenvalue range `(min, max)`.
    pub fn spectrum_bounds(&self) -> (T, T) {
        let e = self.eigen();
        (e.values[0], e.values[self.dim() - 1])
    }

    pub fn inverse(&self) -> Self {
        Self(self.eigen().reassemble(|l| T::one() / l).symmetrize())
    }

    pub fn sqrt(&self) -> Self {
        Self(self.eigen().reassemble(|l| l.sqrt()).symmetrize())
    }

    pub fn inv_sqrt(&self) -> Self {
        Self(self.eigen().reassemble(|l| T::one() / l.sqrt()).symmetrize())
    }

    pub fn quad_form(&self, v: &Vector<T>) -> T {
        self.0.quad_form(v)
    }

    pub fn mat_vec(&self, v: &Vector<T>) -> Vector<T> {
        self.0.mat_vec(v)
    }
}

/// Inverse of an SPD matrix; non-SPD input is rejected.
pub fn spd_inverse<T: Scalar>(m: &Mat<T>) -> Result<SpdMatrix<T>, TensorError> {
    Ok(SpdMatrix::new(*m)?.inverse())
}

/// Principal square root of an SPD matrix; non-SPD input is rejected.
pub fn spd_sqrt<T: Scalar>(m: &Mat<T>) -> Result<SpdMatrix<T>, TensorError> {
    Ok(SpdMatrix::new(*m)?.sqrt())
}

/// `max_{|μ|=1} ⟨μ,ξ⟩⟨μ,η⟩ = (|ξ||η| + ⟨ξ,η⟩)/2` together with a maximizer.
///
/// Selection rule when the maximizer is not unique: if either vector is zero
/// the value is 0 and the first basis vector is returned; if the vectors are
/// antiparallel, a unit vector orthogonal to `ξ` is returned (the 90° rotation
/// in the plane, Gram–Schmidt against the standard basis in dimension 3).
/// Otherwise the maximizer is the bisector of `ξ/|ξ|` and `η/|η|`.
pub fn pair_max_bilinear<T: Scalar>(xi: &Vector<T>, eta: &Vector<T>) -> Result<(T, UnitVector<T>), TensorError> {
    let dim = xi.dim();
    if dim != eta.dim() {
        return Err(TensorError::DimensionMismatch(dim, eta.dim()));
    }
    if dim < 2 {
        return Err(TensorError::NeedsPlane(dim));
    }
    let (nx, ne) = (xi.norm(), eta.norm());
    if nx == T::zero() || ne == T::zero() {
        return Ok((T::zero(), UnitVector::basis(dim, 0)));
    }
    let value = T::lit(0.5) * (nx * ne + xi.dot(eta));
    let a = xi.scale(T::one() / nx);
    let b = eta.scale(T::one() / ne);
    let bisector = a + b;
    // |a + b|² = 2(1 + cos∠); treat roundoff-level values as antiparallel.
    if bisector.norm() <= T::tol(0.0, 16.0) {
        return Ok((value.max(T::zero()), orthogonal_to(&a)));
    }
    Ok((value, UnitVector::normalize(bisector)?))
}

/// Deterministic unit vector orthogonal to the unit vector `a`.
fn orthogonal_to<T: Scalar>(a: &Vector<T>) -> UnitVector<T> {
    let dim = a.dim();
    if dim == 2 {
        return UnitVector(Vector::from_slice(&[-a.get(1), a.get(0)]));
    }
    for k in 0..dim {
        let e = Vector::basis(dim, k);
        let r = e - a.scale(a.dot(&e));
        if r.norm() > T::lit(0.5) {
            return UnitVector::normalize(r).expect("nonzero residual");
        }
    }
    unreachable!("some basis vector has a large component orthogonal to a unit vector")
}

/// Laminate-type interpolation between two SPD matrices:
///
/// `G = αB₁ + (1−α)B₂ − α(1−α)(B₂−B₁)μμᵀ(B₂−B₁) / μᵀ[αB₂ + (1−α)B₁]μ`.
///
/// `μ` need not be normalized; `G` is invariant under `μ ↦ cμ`. For
/// `α ∈ [0,1]` the result lies between the weighted harmonic and arithmetic
/// means in the Loewner order.
pub fn lemma41_matrix<T: Scalar>(
    b1: &SpdMatrix<T>,
    b2: &SpdMatrix<T>,
    alpha: T,
    mu: &Vector<T>,
) -> Result<SpdMatrix<T>, TensorError> {
    let dim = b1.dim();
    if b2.dim() != dim {
        return Err(TensorError::DimensionMismatch(dim, b2.dim()));
    }
    if mu.dim() != dim {
        return Err(TensorError::DimensionMismatch(dim, mu.dim()));
    }
    if mu.norm() == T::zero() {
        return Err(TensorError::ZeroVector);
    }
    let one_m = T::one() - alpha;
    let diff = *b2.mat() - *b1.mat();
    let c = b2.mat().scale(alpha) + b1.mat().scale(one_m);
    let w = diff.mat_vec(mu);
    let denom = c.quad_form(mu);
    let g = b1.mat().scale(alpha) + b2.mat().scale(one_m) - w.outer(&w).scale(alpha * one_m / denom);
    Ok(SpdMatrix::from_mat_unchecked(g))
}

/// Weighted harmonic mean `(αB₁⁻¹ + (1−α)B₂⁻¹)⁻¹`.
pub fn harmonic_mean<T: Scalar>(b1: &SpdMatrix<T>, b2: &SpdMatrix<T>, alpha: T) -> SpdMatrix<T> {
    let inv = b1.inverse().mat().scale(alpha) + b2.inverse().mat().scale(T::one() - alpha);
    SpdMatrix::from_mat_unchecked(inv).inverse()
}

/// Weighted arithmetic mean `αB₁ + (1−α)B₂`.
pub fn arithmetic_mean<T: Scalar>(b1: &SpdMatrix<T>, b2: &SpdMatrix<T>, alpha: T) -> SpdMatrix<T> {
    SpdMatrix::from_mat_unchecked(b1.mat().scale(alpha) + b2.mat().scale(T::one() - alpha))
}

/// Frobenius residual of the algebraic identity
/// `αB₁ + (1−α)B₂ − α(1−α)(B₂−B₁)C⁻¹(B₂−B₁) = (αB₁⁻¹ + (1−α)B₂⁻¹)⁻¹`
/// with `C = αB₂ + (1−α)B₁`.
pub fn e417_identity_residual<T: Scalar>(b1: &SpdMatrix<T>, b2: &SpdMatrix<T>, alpha: T) -> T {
    let one_m = T::one() - alpha;
    let diff = *b2.mat() - *b1.mat();
    let c = SpdMatrix::from_mat_unchecked(b2.mat().scale(alpha) + b1.mat().scale(one_m));
    let lhs = b1.mat().scale(alpha) + b2.mat().scale(one_m)
        - diff.matmul(c.inverse().mat()).matmul(&diff).scale(alpha * one_m);
    let rhs = harmonic_mean(b1, b2, alpha);
    (lhs - *rhs.mat()).frobenius_norm()
}

/// Smallest eigenvalue of `upper − lower`; nonnegative iff `lower ≤ upper`
/// in the Loewner order.
pub fn loewner_margin<T: Scalar>(upper: &Mat<T>, lower: &Mat<T>) -> T {
    (*upper - *lower).min_eigenvalue()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd2(a: f64, b: f64, d: f64) -> SpdMatrix<f64> {
        SpdMatrix::new(Mat::from_rows(&[&[a, b], &[b, d]]).unwrap()).unwrap()
    }

    #[test]
    fn inverse_and_sqrt_of_diagonal() {
        let i = Mat::<f64>::identity(2);
        assert_eq!(*spd_inverse(&i).unwrap().mat(), i);
        let inv = spd_inverse(&Mat::diag(&[2.0, 4.0])).unwrap();
        assert!((*inv.mat() - Mat::diag(&[0.5, 0.25])).frobenius_norm() < 1e-15);
        let root = spd_sqrt(&Mat::diag(&[4.0, 9.0])).unwrap();
        assert!((*root.mat() - Mat::diag(&[2.0, 3.0])).frobenius_norm() < 1e-15);
        assert!((*spd_sqrt(&i).unwrap().mat() - i).frobenius_norm() < 1e-15);
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        let indefinite = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(spd_inverse(&indefinite), Err(TensorError::NotPositiveDefinite { .. })));
        let asym = Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(matches!(spd_sqrt(&asym), Err(TensorError::NotSymmetric(_))));
        let nearly_singular = Mat::diag(&[1.0, 1e-14]);
        assert!(SpdMatrix::new(nearly_singular).is_err());
    }

    #[test]
    fn jacobi_three_by_three() {
        let m = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]).unwrap();
        let e = sym_eigen(&m);
        let back = e.reassemble(|l| l);
        assert!((back - m).frobenius_norm() < 1e-13);
        assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        let v = e.vectors;
        assert!((v.transpose().matmul(&v) - Mat::identity(3)).frobenius_norm() < 1e-13);
    }

    #[test]
    fn pair_max_examples() {
        let e1 = Vector::<f64>::from_slice(&[1.0, 0.0]);
        let e2 = Vector::<f64>::from_slice(&[0.0, 1.0]);
        let (v, mu) = pair_max_bilinear(&e1, &e1).unwrap();
        assert_eq!(v, 1.0);
        assert!((mu.as_slice()[0] - 1.0).abs() < 1e-15);

        let (v, mu) = pair_max_bilinear(&e1, &(-e1)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(mu.as_slice(), &[-0.0, 1.0]);

        let (v, mu) = pair_max_bilinear(&e1, &e2).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mu.as_slice()[0] - s).abs() < 1e-15 && (mu.as_slice()[1] - s).abs() < 1e-15);

        let zero = Vector::zeros(2);
        let (v, mu) = pair_max_bilinear(&zero, &e2).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(mu.as_slice(), &[1.0, 0.0]);

        assert!(matches!(
            pair_max_bilinear(&Vector::from_slice(&[1.0]), &Vector::from_slice(&[1.0])),
            Err(TensorError::NeedsPlane(1))
        ));
    }

    #[test]
    fn pair_max_antiparallel_in_3d_is_orthogonal() {
        let xi = Vector::<f64>::from_slice(&[0.0, 2.0, 0.0]);
        let (v, mu) = pair_max_bilinear(&xi, &xi.scale(-3.0)).unwrap();
        assert_eq!(v, 0.0);
        assert!(mu.vector().dot(&xi).abs() < 1e-15);
        assert_eq!(mu.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn lemma41_examples() {
        let i = SpdMatrix::<f64>::identity(2);
        let g = lemma41_matrix(&i, &i, 0.3, &Vector::from_slice(&[0.6, 0.8])).unwrap();
        assert!((*g.mat() - Mat::identity(2)).frobenius_norm() < 1e-15);

        let four = SpdMatrix::scalar(2, 4.0).unwrap();
        let g = lemma41_matrix(&i, &four, 0.5, &Vector::basis(2, 0)).unwrap();
        assert!((*g.mat() - Mat::diag(&[1.6, 2.5])).frobenius_norm() < 1e-14);
        assert!(matches!(
            lemma41_matrix(&i, &four, 0.5, &Vector::zeros(2)),
            Err(TensorError::ZeroVector)
        ));
    }

    #[test]
    fn e417_examples() {
        let b1 = SpdMatrix::diag(&[1.0, 2.0]).unwrap();
        let b2 = SpdMatrix::diag(&[3.0, 1.0]).unwrap();
        assert!(e417_identity_residual(&b1, &b2, 0.3) <= 1e-12);
        assert!(e417_identity_residual(&b1, &b1, 0.7) <= 1e-15);
        let b3 = spd2(2.0, 0.7, 1.0);
        assert!(e417_identity_residual(&b1, &b3, 0.45) <= 1e-12);
    }

    #[test]
    fn unit_vector_validation() {
        assert!(UnitVector::try_new(Vector::from_slice(&[0.6, 0.8])).is_ok());
        assert!(matches!(UnitVector::try_new(Vector::from_slice(&[1.0, 1.0])), Err(TensorError::NotUnit(_))));
        assert!(matches!(UnitVector::<f64>::normalize(Vector::zeros(3)), Err(TensorError::ZeroVector)));
    }

    #[test]
    fn works_in_single_precision() {
        let m = Mat::<f32>::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let inv = spd_inverse(&m).unwrap();
        assert!((m.matmul(inv.mat()) - Mat::identity(2)).frobenius_norm() < 1e-5);
    }
}
