use crate::error::{Error, Result};
use crate::scalar::Real;

/// LU factorisation with partial pivoting of a dense row-major matrix.
#[derive(Clone, Debug)]
pub struct LuFactor<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> LuFactor<T> {
    pub fn new(n: usize, mut a: Vec<T>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::domain("LuFactor: matrix size mismatch"));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut max_entry = T::zero();
        for x in &a {
            max_entry = max_entry.max(x.abs());
        }
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::numerical(
                    "LU factorisation",
                    format!("singular pivot at column {k} (max |a_ij| = {:.3e})", max_entry.to64()),
                ));
            }
            min_pivot = min_pivot.min(best);
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                if factor != T::zero() {
                    let (top, bottom) = a.split_at_mut(i * n);
                    let row_k = &top[k * n..k * n + n];
                    let row_i = &mut bottom[..n];
                    for j in (k + 1)..n {
                        row_i[j] = row_i[j] - factor * row_k[j];
                    }
                }
            }
        }
        if min_pivot < max_entry * T::epsilon() * T::of_usize(n) {
            return Err(Error::numerical(
                "LU factorisation",
                format!(
                    "ill-conditioned: min pivot {:.3e} vs max entry {:.3e}",
                    min_pivot.to64(),
                    max_entry.to64()
                ),
            ));
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut s = x[i];
            for (j, &l) in row.iter().enumerate() {
                s = s - l * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}
