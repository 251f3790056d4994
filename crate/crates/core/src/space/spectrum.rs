//! Spectral data of the generator: eigenpairs of the symmetrised operator
//! S = M^{1/2} Δ M^{-1/2}, either dense or as a tensor product of 1D factors.

use rayon::prelude::*;

use crate::numeric::SymmetricEigen;
use crate::scalar::Real;

/// One dense factor: eigenpairs of S plus the measure scalings.
#[derive(Clone, Debug)]
pub struct DenseSpectrum<T> {
    pub eig: SymmetricEigen<T>,
    pub sqrt_m: Vec<T>,
}

impl<T: Real> DenseSpectrum<T> {
    pub fn n(&self) -> usize {
        self.eig.n
    }

    /// Coefficients c_k = ⟨f, e_k⟩_m = q_kᵀ M^{1/2} f.
    fn forward(&self, f: &[T]) -> Vec<T> {
        let y: Vec<T> = f.iter().zip(&self.sqrt_m).map(|(&a, &s)| a * s).collect();
        (0..self.n())
            .map(|k| crate::numeric::compensated_sum(self.eig.vector(k).iter().zip(&y).map(|(&q, &v)| q * v)))
            .collect()
    }

    /// f = Σ_k c_k e_k = M^{-1/2} Σ_k c_k q_k.
    fn backward(&self, c: &[T]) -> Vec<T> {
        let n = self.n();
        let mut z = vec![T::zero(); n];
        for (k, &ck) in c.iter().enumerate() {
            if ck == T::zero() {
                continue;
            }
            for (zi, &q) in z.iter_mut().zip(self.eig.vector(k)) {
                *zi = *zi + ck * q;
            }
        }
        z.iter().zip(&self.sqrt_m).map(|(&v, &s)| v / s).collect()
    }
}

#[derive(Clone, Debug)]
pub enum Spectrum<T> {
    Dense(DenseSpectrum<T>),
    /// 2D separable case: factor 0 acts along x (fastest index), factor 1 along y.
    Tensor(Vec<DenseSpectrum<T>>),
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        match self {
            Spectrum::Dense(d) => d.n(),
            Spectrum::Tensor(f) => f.iter().map(|d| d.n()).product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Eigenvalues in coefficient order (not sorted in the tensor case).
    pub fn eigenvalues(&self) -> Vec<T> {
        match self {
            Spectrum::Dense(d) => d.eig.values.clone(),
            Spectrum::Tensor(f) => {
                let (a, b) = (&f[0].eig.values, &f[1].eig.values);
                let mut out = Vec::with_capacity(a.len() * b.len());
                for &lb in b {
                    for &la in a {
                        out.push(la + lb);
                    }
                }
                out
            }
        }
    }

    pub fn forward(&self, f: &[T]) -> Vec<T> {
        match self {
            Spectrum::Dense(d) => d.forward(f),
            Spectrum::Tensor(fac) => {
                let (nx, ny) = (fac[0].n(), fac[1].n());
                let rows: Vec<Vec<T>> = (0..ny).into_par_iter().map(|j| fac[0].forward(&f[j * nx..(j + 1) * nx])).collect();
                let cols: Vec<Vec<T>> = (0..nx)
                    .into_par_iter()
                    .map(|i| {
                        let col: Vec<T> = (0..ny).map(|j| rows[j][i]).collect();
                        fac[1].forward(&col)
                    })
                    .collect();
                let mut out = vec![T::zero(); nx * ny];
                for (i, col) in cols.iter().enumerate() {
                    for (j, &v) in col.iter().enumerate() {
                        out[j * nx + i] = v;
                    }
                }
                out
            }
        }
    }

    pub fn backward(&self, c: &[T]) -> Vec<T> {
        match self {
            Spectrum::Dense(d) => d.backward(c),
            Spectrum::Tensor(fac) => {
                let (nx, ny) = (fac[0].n(), fac[1].n());
                let cols: Vec<Vec<T>> = (0..nx)
                    .into_par_iter()
                    .map(|i| {
                        let col: Vec<T> = (0..ny).map(|j| c[j * nx + i]).collect();
                        fac[1].backward(&col)
                    })
                    .collect();
                let rows: Vec<Vec<T>> = (0..ny)
                    .into_par_iter()
                    .map(|j| {
                        let row: Vec<T> = (0..nx).map(|i| cols[i][j]).collect();
                        fac[0].backward(&row)
                    })
                    .collect();
                rows.concat()
            }
        }
    }

    /// The k-th m-orthonormal eigenvector (coefficient order).
    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        let mut c = vec![T::zero(); self.len()];
        c[k] = T::one();
        self.backward(&c)
    }

    /// Flat f64 dump of every factor (values then column-major vectors), used for checksums and caching.
    pub fn to_blocks(&self) -> Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let block = |d: &DenseSpectrum<T>| {
            (
                d.n(),
                d.eig.values.iter().map(|x| x.to64()).collect(),
                d.eig.vectors.iter().map(|x| x.to64()).collect(),
                d.sqrt_m.iter().map(|x| x.to64()).collect(),
            )
        };
        match self {
            Spectrum::Dense(d) => vec![block(d)],
            Spectrum::Tensor(f) => f.iter().map(block).collect(),
        }
    }
}
