use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::dense::LuFactor;
use crate::scalar::Real;

/// Compressed sparse row matrix. Column indices are sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Builds from triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); n_rows];
        for (i, j, v) in triplets {
            debug_assert!(i < n_rows && j < n_cols);
            let e = rows[i].entry(j).or_insert_with(T::zero);
            *e = *e + v;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, T::one())))
    }

    pub fn diagonal(d: &[T]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                let mut s = T::zero();
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s = s + self.vals[k] * x[self.cols[k]];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, v)))
    }

    /// Adjoint in the weighted inner product ⟨f, g⟩ = Σ w_i f_i g_i:
    /// (A^*)_{ij} = w_j A_{ji} / w_i.
    pub fn weighted_adjoint(&self, w: &[T]) -> Self {
        Self::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, w[i] * v / w[j])))
    }

    pub fn scale(&self, c: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v = *v * c;
        }
        out
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Self, c: T) -> Self {
        debug_assert_eq!(self.n_rows, other.n_rows);
        Self::from_triplets(
            self.n_rows,
            self.n_cols,
            self.triplets().chain(other.triplets().map(|(i, j, v)| (i, j, c * v))),
        )
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.vals[k] = out.vals[k] * d[i];
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n_rows).map(|i| self.row(i).fold(T::zero(), |s, (_, v)| s + v)).collect()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n_rows * self.n_cols];
        for (i, j, v) in self.triplets() {
            d[i * self.n_cols + j] = v;
        }
        d
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }
}

/// Linear solver for a fixed sparse system: dense LU below a size threshold,
/// Jacobi-preconditioned BiCGSTAB above it.
pub enum SparseSolver<T> {
    Direct(LuFactor<T>),
    Iterative { matrix: Csr<T>, inv_diag: Vec<T>, tol: T, max_iter: usize },
}

/// Systems up to this size are factorised densely.
pub const DIRECT_SOLVE_LIMIT: usize = 1024;

impl<T: Real> SparseSolver<T> {
    pub fn new(matrix: Csr<T>) -> Result<Self> {
        Self::with_direct_limit(matrix, DIRECT_SOLVE_LIMIT)
    }

    /// Factorises densely when the system has at most `limit` rows.
    pub fn with_direct_limit(matrix: Csr<T>, limit: usize) -> Result<Self> {
        let n = matrix.n_rows();
        if n <= limit {
            Ok(SparseSolver::Direct(LuFactor::new(n, matrix.to_dense())?))
        } else {
            Self::iterative(matrix)
        }
    }

    pub fn iterative(matrix: Csr<T>) -> Result<Self> {
        let d = matrix.diag();
        if d.iter().any(|&x| x == T::zero()) {
            return Err(Error::numerical("BiCGSTAB setup", "zero on the diagonal"));
        }
        let inv_diag = d.iter().map(|&x| T::one() / x).collect();
        let tol = (T::epsilon() * T::of(50.0)).max(T::of(1e-14));
        Ok(SparseSolver::Iterative { matrix, inv_diag, tol, max_iter: 2000 })
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        match self {
            SparseSolver::Direct(lu) => Ok(lu.solve(b)),
            SparseSolver::Iterative { matrix, inv_diag, tol, max_iter } => bicgstab(matrix, inv_diag, b, *tol, *max_iter),
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    crate::numeric::sum::compensated_sum(a.iter().zip(b).map(|(&x, &y)| x * y))
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn bicgstab<T: Real>(a: &Csr<T>, inv_diag: &[T], b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let precond = |v: &[T]| -> Vec<T> { v.iter().zip(inv_diag).map(|(&x, &d)| x * d).collect() };
    let mut x = precond(b);
    let ax = a.mul_vec(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let r_hat = r.clone();
    let mut rho = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for _ in 0..max_iter {
        let res = norm(&r);
        if res <= tol * bnorm {
            return Ok(x);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = a.mul_vec(&p_hat);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<T> = r.iter().zip(&v).map(|(&ri, &vi)| ri - alpha * vi).collect();
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] = x[i] + alpha * p_hat[i];
            }
            return Ok(x);
        }
        let s_hat = precond(&s);
        let t = a.mul_vec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt == T::zero() { T::zero() } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] = x[i] + alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == T::zero() {
            break;
        }
    }
    let ax = a.mul_vec(&x);
    let res: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let rel = norm(&res) / bnorm;
    if rel <= tol * T::of(100.0) {
        return Ok(x);
    }
    Err(Error::numerical("BiCGSTAB", format!("stalled at relative residual {:.3e}", rel.to64())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> Csr<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            t.push((i, (i + 1) % n, -1.0 + 0.3));
            t.push((i, (i + n - 1) % n, -1.0 - 0.3));
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn weighted_adjoint_identity() {
        let a = tridiag(6);
        let w = [1.0, 2.0, 0.5, 3.0, 1.5, 0.25];
        let adj = a.weighted_adjoint(&w);
        let f = [0.3, -1.0, 2.0, 0.1, 0.7, -0.4];
        let g = [1.1, 0.2, -0.3, 0.9, -2.0, 0.5];
        let lhs: f64 = (0..6).map(|i| w[i] * a.mul_vec(&f)[i] * g[i]).sum();
        let rhs: f64 = (0..6).map(|i| w[i] * f[i] * adj.mul_vec(&g)[i]).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn iterative_agrees_with_direct() {
        let a = tridiag(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = SparseSolver::new(a.clone()).unwrap().solve(&b).unwrap();
        let x2 = SparseSolver::iterative(a).unwrap().solve(&b).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
