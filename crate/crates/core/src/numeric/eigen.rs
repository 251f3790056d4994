//! Symmetric eigendecomposition by Householder tridiagonalisation followed by
//! the implicit QL algorithm (Bowdler, Martin, Reinsch & Wilkinson; EISPACK
//! `tred2`/`tql2`).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub n: usize,
    pub values: Vec<T>,
    /// Column-major: column `k` (the slice `vectors[k*n..(k+1)*n]`) is the
    /// unit eigenvector for `values[k]`.
    pub vectors: Vec<T>,
}

impl<T: Real> SymmetricEigen<T> {
    pub fn vector(&self, k: usize) -> &[T] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }
}

const MAX_QL_SWEEPS: usize = 60;

/// Decomposes the symmetric matrix given in row-major order. Only symmetry of
/// the input is assumed; the lower triangle is read.
pub fn symmetric_eigen<T: Real>(n: usize, matrix: &[T]) -> Result<SymmetricEigen<T>> {
    if matrix.len() != n * n {
        return Err(Error::domain(format!("expected {}x{} matrix, got {} entries", n, n, matrix.len())));
    }
    if n == 0 {
        return Ok(SymmetricEigen { n, values: vec![], vectors: vec![] });
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("symmetric_eigen", "matrix has non-finite entries"));
    }
    // Column-major working copy; symmetric so transposition is free.
    let mut v: Vec<T> = matrix.to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;
    Ok(SymmetricEigen { n, values: d, vectors: v })
}

/// Symmetric tridiagonal eigenproblem (diagonal `diag`, off-diagonal `off`
/// with `off.len() == diag.len() - 1`).
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<SymmetricEigen<T>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::domain("tridiagonal_eigen: inconsistent lengths"));
    }
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[1..n].copy_from_slice(off);
    tql2(n, &mut v, &mut d, &mut e)?;
    Ok(SymmetricEigen { n, values: d, vectors: v })
}

#[inline]
fn at(n: usize, r: usize, c: usize) -> usize {
    c * n + r
}

fn tred2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale = scale + d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = zero;
                v[at(n, j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] = d[k] / scale;
                h = h + d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[at(n, j, i)] = f;
                g = e[j] + v[at(n, j, j)] * f;
                let col = j * n;
                for k in (j + 1)..i {
                    let vkj = v[col + k];
                    g = g + vkj * d[k];
                    e[k] = e[k] + vkj * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = j * n;
                for k in j..i {
                    v[col + k] = v[col + k] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = zero;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            let c1 = (i + 1) * n;
            for k in 0..=i {
                d[k] = v[c1 + k] / h;
            }
            for j in 0..=i {
                let cj = j * n;
                let mut g = zero;
                for k in 0..=i {
                    g = g + v[c1 + k] * v[cj + k];
                }
                for k in 0..=i {
                    v[cj + k] = v[cj + k] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = zero;
    }
    v[at(n, n - 1, n - 1)] = T::one();
    e[0] = zero;
}

fn tql2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<()> {
    let zero = T::zero();
    let two = T::of(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::numerical(
                        "tql2",
                        format!(
                            "no convergence for eigenvalue {} of {} after {} sweeps (|e| = {:.3e}, scale = {:.3e})",
                            l,
                            n,
                            MAX_QL_SWEEPS,
                            e[l].abs().to64(),
                            tst1.to64()
                        ),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = v.split_at_mut((i + 1) * n);
                    let ci = &mut lo[i * n..];
                    let ci1 = &mut hi[..n];
                    for k in 0..n {
                        let hk = ci1[k];
                        ci1[k] = s * ci[k] + c * hk;
                        ci[k] = c * ci[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }

    // Selection sort keeps the pairing with columns.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            let (lo, hi) = v.split_at_mut(k * n);
            lo[i * n..(i + 1) * n].swap_with_slice(&mut hi[..n]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(n: usize, a: &[f64], eig: &SymmetricEigen<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let q = eig.vector(k);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * q[j]).sum();
                worst = worst.max((av - eig.values[k] * q[i]).abs());
            }
        }
        worst
    }

    #[test]
    fn second_difference_spectrum() {
        // Dirichlet second difference: eigenvalues -4 sin^2(k pi / (2(n+1))).
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = -2.0;
            if i + 1 < n {
                a[i * n + i + 1] = 1.0;
                a[(i + 1) * n + i] = 1.0;
            }
        }
        let eig = symmetric_eigen(n, &a).unwrap();
        let mut expected: Vec<f64> = (1..=n)
            .map(|k| -4.0 * (k as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin().powi(2))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in eig.values.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
        assert!(residual(n, &a, &eig) < 1e-13);
    }

    #[test]
    fn orthonormal_columns_with_degeneracy() {
        // Periodic cycle has doubly degenerate eigenvalues.
        let n = 9;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = -2.0;
            a[i * n + (i + 1) % n] += 1.0;
            a[i * n + (i + n - 1) % n] += 1.0;
        }
        let eig = symmetric_eigen(n, &a).unwrap();
        for p in 0..n {
            for q in 0..n {
                let dot: f64 = eig.vector(p).iter().zip(eig.vector(q)).map(|(x, y)| x * y).sum();
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-13);
            }
        }
        assert!(residual(n, &a, &eig) < 1e-13);
        assert!(eig.values[n - 1].abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [1.0_f64, -0.5, 2.0, 0.25, 3.0];
        let off = [0.3, -1.2, 0.7, 0.1];
        let n = diag.len();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = diag[i];
        }
        for i in 0..n - 1 {
            a[i * n + i + 1] = off[i];
            a[(i + 1) * n + i] = off[i];
        }
        let t = tridiagonal_eigen(&diag, &off).unwrap();
        let d = symmetric_eigen(n, &a).unwrap();
        for (x, y) in t.values.iter().zip(&d.values) {
            assert!((x - y).abs() < 1e-13);
        }
        assert!(residual(n, &a, &t) < 1e-13);
    }

    #[test]
    fn single_precision_runs() {
        let a = [2.0f32, 1.0, 1.0, 2.0];
        let eig = symmetric_eigen(2, &a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-6);
        assert!((eig.values[1] - 3.0).abs() < 1e-6);
    }
}
