//! Compressed sparse row storage and Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Zero matrix with the given sparsity (rows must hold sorted columns).
    pub fn with_pattern(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        let nnz = cols.len();
        Self { n, row_ptr, cols, vals: vec![T::zero(); nnz] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// Position of `(i, j)` in the value array, if stored.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.cols[start..self.row_ptr[i + 1]].binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |k| self.vals[k])
    }

    #[inline]
    pub(crate) fn add_at(&mut self, slot: usize, v: T) {
        self.vals[slot] += v;
    }

    pub fn values(&self) -> &[T] {
        &self.vals
    }

    pub fn scale(&mut self, s: T) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).1.iter().copied().sum()).collect()
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions<T> {
    /// Stop once `‖b − A x‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: T,
    /// Defaults to `20 n`.
    pub max_iter: Option<usize>,
}

impl<T: Scalar> Default for CgOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::tol(1e-13, 64.0), max_iter: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn pcg<T: Scalar>(a: &CsrMatrix<T>, b: &[T], opts: &CgOptions<T>) -> Result<(Vec<T>, CgStats)> {
    let n = a.dim();
    crate::error::check_len("right-hand side", n, b.len())?;
    let mut x = vec![T::zero(); n];
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return Ok((x, CgStats { iterations: 0, rel_residual: 0.0 }));
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let target = opts.rel_tol * bnorm;
    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));

    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    let mut rnorm = bnorm;
    for it in 0..max_iter {
        if rnorm <= target {
            return Ok((x, CgStats { iterations: it, rel_residual: (rnorm / bnorm).to_f64_lossy() }));
        }
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        rnorm = norm(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rnorm <= target {
        return Ok((x, CgStats { iterations: max_iter, rel_residual: (rnorm / bnorm).to_f64_lossy() }));
    }
    Err(Error::CgFailed { iterations: max_iter, residual: (rnorm / bnorm).to_f64_lossy() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix<f64> {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                cols.push(j);
            }
            row_ptr.push(cols.len());
        }
        let mut a = CsrMatrix::with_pattern(n, row_ptr, cols);
        for i in 0..n {
            let s = a.slot(i, i).unwrap();
            a.add_at(s, 2.0);
            if i > 0 {
                let s = a.slot(i, i - 1).unwrap();
                a.add_at(s, -1.0);
            }
            if i + 1 < n {
                let s = a.slot(i, i + 1).unwrap();
                a.add_at(s, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal() {
        let a = tridiag(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (x, stats) = pcg(&a, &b, &CgOptions::default()).unwrap();
        let r: Vec<f64> = a.mul(&x).iter().zip(&b).map(|(ax, b)| ax - b).collect();
        assert!(norm(&r) <= 1e-12 * norm(&b));
        assert!(stats.iterations <= 60);
        assert_eq!(a.max_asymmetry(), 0.0);
    }

    #[test]
    fn zero_rhs_and_failure_report() {
        let a = tridiag(10);
        let (x, _) = pcg(&a, &[0.0; 10], &CgOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        let opts = CgOptions { rel_tol: 1e-14, max_iter: Some(1) };
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(pcg(&a, &b, &opts), Err(Error::CgFailed { iterations: 1, .. })));
    }
}
