use crate::scalar::Real;

/// Neumaier compensated accumulator. Reductions go through this in a fixed
/// order so results do not depend on thread scheduling.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Accumulator<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(items: I) -> T {
    let mut acc = Accumulator::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

/// Σ w_i a_i b_i with compensation.
pub fn weighted_dot<T: Real>(w: &[T], a: &[T], b: &[T]) -> T {
    debug_assert_eq!(w.len(), a.len());
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(w.iter().zip(a).zip(b).map(|((&w, &a), &b)| w * a * b))
}
