use crate::error::{Error, Result};
use crate::scalar::Real;

/// Identity of the [`Space`](super::Space) a field lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceId(pub(crate) u64);

/// Node values on a grid space.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub(crate) values: Vec<T>,
    pub(crate) space: SpaceId,
}

impl<T: Real> ScalarField<T> {
    pub(crate) fn from_raw(space: SpaceId, values: Vec<T>) -> Self {
        Self { values, space }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.space, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.space, other.space);
        Self::from_raw(self.space, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn positive_part(&self) -> Self {
        self.map(|x| x.max(T::zero()))
    }

    pub fn negative_part(&self) -> Self {
        self.map(|x| (-x).max(T::zero()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    pub fn ensure_same_space(&self, other: SpaceId) -> Result<()> {
        if self.space != other {
            return Err(Error::domain("field belongs to a different space"));
        }
        Ok(())
    }

    /// Converts to f64 values (for reports and export).
    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|x| x.to64()).collect()
    }
}
