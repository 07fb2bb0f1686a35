//! ADWIN change detector over an exponential histogram of buckets.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Buckets kept per row before the two oldest are merged into the next row.
pub const MAX_BUCKETS: usize = 5;
/// Sub-windows shorter than this are never compared.
const MIN_SUB_WINDOW: u64 = 5;
/// No cut is evaluated until the window holds more items than this.
const MIN_WINDOW: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket<S> {
    total: S,
    variance: S,
}

/// Adaptive sliding window: keeps the longest recent window whose mean is statistically
/// consistent with no change.
#[derive(Debug, Clone)]
pub struct Adwin<S> {
    delta: f64,
    /// Row `i` holds buckets of `2^i` items, newest first.
    rows: Vec<VecDeque<Bucket<S>>>,
    width: u64,
    total: S,
    variance: S,
    detections: u64,
}

impl<S: Scalar> Adwin<S> {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            rows: Vec::new(),
            width: 0,
            total: S::zero(),
            variance: S::zero(),
            detections: 0,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn total(&self) -> S {
        self.total
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Mean of the current window.
    pub fn estimate(&self) -> Result<S> {
        if self.width == 0 {
            return Err(Error::Domain("estimate of an empty window".into()));
        }
        Ok(self.total / S::from_count(self.width))
    }

    /// Estimate, or zero for an empty window.
    pub fn estimate_or_zero(&self) -> S {
        self.estimate().unwrap_or(S::zero())
    }

    /// Inserts `value` (in `[0, 1]`) and returns whether a change was detected, in which case
    /// the older part of the window has been dropped.
    pub fn add(&mut self, value: S) -> Result<bool> {
        if !(value >= S::zero() && value <= S::one()) {
            return Err(Error::Domain(format!("ADWIN input {value} outside [0, 1]")));
        }
        self.insert(value);
        self.compress();
        let changed = self.detect();
        if changed {
            self.detections += 1;
        }
        Ok(changed)
    }

    fn insert(&mut self, value: S) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::with_capacity(MAX_BUCKETS + 1));
        }
        self.rows[0].push_front(Bucket {
            total: value,
            variance: S::zero(),
        });
        self.width += 1;
        if self.width > 1 {
            let prev = S::from_count(self.width - 1);
            let d = value - self.total / prev;
            self.variance += prev * d * d / S::from_count(self.width);
        }
        self.total += value;
    }

    fn compress(&mut self) {
        let mut row = 0;
        while row < self.rows.len() {
            if self.rows[row].len() <= MAX_BUCKETS {
                break;
            }
            let older = self.rows[row].pop_back().expect("row over capacity");
            let newer = self.rows[row].pop_back().expect("row over capacity");
            let n = S::from_count(1 << row);
            let d = older.total / n - newer.total / n;
            let merged = Bucket {
                total: older.total + newer.total,
                variance: older.variance + newer.variance + n * n * d * d / (n + n),
            };
            if row + 1 == self.rows.len() {
                self.rows.push(VecDeque::with_capacity(MAX_BUCKETS + 1));
            }
            self.rows[row + 1].push_front(merged);
            row += 1;
        }
    }

    /// Drops the oldest bucket.
    fn drop_oldest(&mut self) {
        let last = self.rows.len() - 1;
        let bucket = self.rows[last].pop_back().expect("non-empty last row");
        let n = S::from_count(1 << last);
        self.width -= 1 << last;
        self.total -= bucket.total;
        if self.width > 0 {
            let w = S::from_count(self.width);
            let d = bucket.total / n - self.total / w;
            self.variance -= bucket.variance + n * w * d * d / (n + w);
            if self.variance < S::zero() {
                self.variance = S::zero();
            }
        } else {
            self.variance = S::zero();
        }
        if self.rows[last].is_empty() {
            self.rows.pop();
        }
    }

    fn detect(&mut self) -> bool {
        let mut changed = false;
        while self.width > MIN_WINDOW && self.cut_found() {
            changed = true;
            self.drop_oldest();
        }
        changed
    }

    /// Tests every bucket boundary, oldest first.
    fn cut_found(&self) -> bool {
        let mut n0 = 0u64;
        let mut sum0 = S::zero();
        let width = self.width;
        for (row, buckets) in self.rows.iter().enumerate().rev() {
            for b in buckets.iter().rev() {
                n0 += 1 << row;
                sum0 += b.total;
                let n1 = width - n0;
                if n1 == 0 {
                    return false;
                }
                if n0 > MIN_SUB_WINDOW + 1
                    && n1 > MIN_SUB_WINDOW + 1
                    && self.cut_expression(n0, n1, sum0, self.total - sum0)
                {
                    return true;
                }
            }
        }
        false
    }

    fn cut_expression(&self, n0: u64, n1: u64, sum0: S, sum1: S) -> bool {
        let n = self.width as f64;
        let diff = (sum0.as_f64() / n0 as f64 - sum1.as_f64() / n1 as f64).abs();
        let var = self.variance.as_f64() / n;
        let dd = (2.0 * n.ln() / self.delta).ln();
        let m = 1.0 / (n0 - MIN_SUB_WINDOW + 1) as f64 + 1.0 / (n1 - MIN_SUB_WINDOW + 1) as f64;
        let eps = (2.0 * m * var * dd).sqrt() + 2.0 / 3.0 * dd * m;
        diff >= eps
    }
}
