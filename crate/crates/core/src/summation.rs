//! Compensated accumulation for long spectral sums.
//!
//! Large sums (up to 10^8 terms) are split into fixed-size chunks. Each chunk is
//! accumulated with Neumaier's compensated algorithm, and the chunk totals are
//! combined in chunk order with the same algorithm. The chunk size is a
//! constant, so results are bitwise identical for any thread count.

use rayon::prelude::*;

use crate::scalar::Real;

/// Number of terms per chunk in [`chunked_sum`].
pub const CHUNK_LEN: usize = 1 << 16;

/// Kahan-Babuska-Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Real> NeumaierSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), compensation: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, value: T) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation = self.compensation + ((self.sum - t) + value);
        } else {
            self.compensation = self.compensation + ((value - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Real> FromIterator<T> for NeumaierSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<NeumaierSum<T>>().total()
}

/// Deterministic parallel sum of `term(i)` for `i` in `range`.
pub fn chunked_sum<T, F>(range: std::ops::Range<i64>, term: F) -> T
where
    T: Real,
    F: Fn(i64) -> T + Sync,
{
    chunked_sums::<T, _, 1>(range, |i| [term(i)])[0]
}

/// Deterministic parallel sum of several series evaluated together.
pub fn chunked_sums<T, F, const K: usize>(range: std::ops::Range<i64>, term: F) -> [T; K]
where
    T: Real,
    F: Fn(i64) -> [T; K] + Sync,
{
    if range.start >= range.end {
        return [T::zero(); K];
    }
    let len = (range.end - range.start) as usize;
    let chunks = len.div_ceil(CHUNK_LEN);
    let partial: Vec<[T; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = range.start + (c * CHUNK_LEN) as i64;
            let hi = (lo + CHUNK_LEN as i64).min(range.end);
            let mut acc = [NeumaierSum::<T>::new(); K];
            for i in lo..hi {
                let v = term(i);
                for (a, x) in acc.iter_mut().zip(v) {
                    a.add(x);
                }
            }
            acc.map(|a| a.total())
        })
        .collect();
    let mut out = [NeumaierSum::<T>::new(); K];
    for p in partial {
        for (a, x) in out.iter_mut().zip(p) {
            a.add(x);
        }
    }
    out.map(|a| a.total())
}
