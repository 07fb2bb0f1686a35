//! Per-leaf sufficient statistics used to rank split candidates and for naive Bayes.

use crate::num::Scalar;

/// Weighted running mean/variance of one attribute for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimator<S> {
    weight: S,
    mean: S,
    var_sum: S,
}

impl<S: Scalar> Default for GaussianEstimator<S> {
    fn default() -> Self {
        Self {
            weight: S::zero(),
            mean: S::zero(),
            var_sum: S::zero(),
        }
    }
}

impl<S: Scalar> GaussianEstimator<S> {
    pub fn add(&mut self, x: S, w: S) {
        if self.weight <= S::zero() {
            self.weight = w;
            self.mean = x;
            self.var_sum = S::zero();
            return;
        }
        self.weight += w;
        let last_mean = self.mean;
        self.mean += w * (x - last_mean) / self.weight;
        self.var_sum += w * (x - last_mean) * (x - self.mean);
        if self.var_sum < S::zero() {
            self.var_sum = S::zero();
        }
    }

    pub fn weight(&self) -> S {
        self.weight
    }

    pub fn mean(&self) -> S {
        self.mean
    }

    pub fn variance(&self) -> S {
        if self.weight > S::one() {
            self.var_sum / (self.weight - S::one())
        } else {
            S::zero()
        }
    }

    pub fn std_dev(&self) -> S {
        self.variance().sqrt()
    }

    pub fn density(&self, x: S) -> S {
        if self.weight <= S::zero() {
            return S::zero();
        }
        let sd = self.std_dev();
        if sd > S::zero() {
            let z = (x - self.mean) / sd;
            let two = S::lit(2.0);
            (-(z * z) / two).exp() / (sd * (two * S::lit(std::f64::consts::PI)).sqrt())
        } else if x == self.mean {
            S::one()
        } else {
            S::zero()
        }
    }

    /// Estimated weight with value `<= x`.
    pub fn weight_at_or_below(&self, x: S) -> S {
        let sd = self.std_dev();
        if sd > S::zero() {
            self.weight * S::normal_cdf(x, self.mean, sd)
        } else if x >= self.mean {
            self.weight
        } else {
            S::zero()
        }
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        for v in [self.weight, self.mean, self.var_sum] {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericObserver<S> {
    per_class: Vec<GaussianEstimator<S>>,
    min: Vec<S>,
    max: Vec<S>,
}

impl<S: Scalar> NumericObserver<S> {
    pub fn new(num_classes: usize) -> Self {
        Self {
            per_class: vec![GaussianEstimator::default(); num_classes],
            min: vec![S::infinity(); num_classes],
            max: vec![S::neg_infinity(); num_classes],
        }
    }

    pub fn observe(&mut self, x: S, class: usize, w: S) {
        self.per_class[class].add(x, w);
        if x < self.min[class] {
            self.min[class] = x;
        }
        if x > self.max[class] {
            self.max[class] = x;
        }
    }

    pub fn estimator(&self, class: usize) -> &GaussianEstimator<S> {
        &self.per_class[class]
    }

    /// Range of values seen over all classes, if any.
    pub fn range(&self) -> Option<(S, S)> {
        let lo = self.min.iter().copied().fold(S::infinity(), S::min);
        let hi = self.max.iter().copied().fold(S::neg_infinity(), S::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// `bins` equal-width thresholds strictly between the observed min and max.
    pub fn candidate_thresholds(&self, bins: usize) -> Vec<S> {
        match self.range() {
            Some((lo, hi)) if hi > lo => {
                let step = (hi - lo) / S::from_count(bins as u64 + 1);
                (1..=bins)
                    .map(|i| lo + step * S::from_count(i as u64))
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    /// Per-class weights routed left (`<= threshold`) and right.
    pub fn binary_split(&self, threshold: S) -> [Vec<S>; 2] {
        let n = self.per_class.len();
        let mut left = vec![S::zero(); n];
        let mut right = vec![S::zero(); n];
        for c in 0..n {
            let est = &self.per_class[c];
            let w = est.weight();
            if w <= S::zero() {
                continue;
            }
            let l = if threshold < self.min[c] {
                S::zero()
            } else if threshold >= self.max[c] {
                w
            } else {
                est.weight_at_or_below(threshold)
            };
            left[c] = l;
            right[c] = w - l;
        }
        [left, right]
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        for c in 0..self.per_class.len() {
            self.per_class[c].write(out);
            out.extend_from_slice(&self.min[c].as_f64().to_le_bytes());
            out.extend_from_slice(&self.max[c].as_f64().to_le_bytes());
        }
    }
}

/// Class-by-value count table.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalObserver<S> {
    counts: Vec<Vec<S>>,
}

impl<S: Scalar> NominalObserver<S> {
    pub fn new(num_classes: usize, arity: usize) -> Self {
        Self {
            counts: vec![vec![S::zero(); arity]; num_classes],
        }
    }

    pub fn observe(&mut self, value: usize, class: usize, w: S) {
        self.counts[class][value] += w;
    }

    pub fn arity(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn count(&self, class: usize, value: usize) -> S {
        self.counts[class][value]
    }

    /// Laplace-smoothed estimate of P(value | class).
    pub fn probability(&self, value: usize, class: usize) -> S {
        let row = &self.counts[class];
        let total = crate::num::sum(row);
        (row.get(value).copied().unwrap_or(S::zero()) + S::one())
            / (total + S::from_count(row.len() as u64))
    }

    /// Per-branch class distributions of a multiway split.
    pub fn multiway_split(&self) -> Vec<Vec<S>> {
        (0..self.arity())
            .map(|v| self.counts.iter().map(|row| row[v]).collect())
            .collect()
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        for row in &self.counts {
            for v in row {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeObserver<S> {
    Nominal(NominalObserver<S>),
    Numeric(NumericObserver<S>),
}

impl<S: Scalar> AttributeObserver<S> {
    pub fn observe(&mut self, x: S, class: usize, w: S) {
        match self {
            Self::Nominal(o) => o.observe(x.to_usize().unwrap_or(0), class, w),
            Self::Numeric(o) => o.observe(x, class, w),
        }
    }

    /// Naive Bayes likelihood P(x | class).
    pub fn likelihood(&self, x: S, class: usize) -> S {
        match self {
            Self::Nominal(o) => o.probability(x.to_usize().unwrap_or(usize::MAX), class),
            Self::Numeric(o) => o.estimator(class).density(x),
        }
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        match self {
            Self::Nominal(o) => {
                out.push(0);
                o.write(out);
            }
            Self::Numeric(o) => {
                out.push(1);
                o.write(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_moments_match_direct_computation() {
        let mut e = GaussianEstimator::<f64>::default();
        let xs = [(1.0, 1.0), (2.0, 2.0), (4.0, 1.0)];
        for (x, w) in xs {
            e.add(x, w);
        }
        // mean = (1 + 4 + 4) / 4
        assert!((e.mean() - 2.25).abs() < 1e-12);
        // sum w (x - mean)^2 = 1.5625 + 2*0.0625 + 3.0625 = 4.75, / (W - 1)
        assert!((e.variance() - 4.75 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn binary_split_conserves_class_weight() {
        let mut o = NumericObserver::<f64>::new(2);
        for i in 0..100 {
            o.observe(i as f64 / 100.0, i % 2, 1.5);
        }
        for t in o.candidate_thresholds(10) {
            let [l, r] = o.binary_split(t);
            for c in 0..2 {
                assert!((l[c] + r[c] - 75.0).abs() < 1e-9);
                assert!(l[c] >= 0.0 && r[c] >= 0.0);
            }
        }
    }

    #[test]
    fn thresholds_are_equal_width_interior_points() {
        let mut o = NumericObserver::<f64>::new(1);
        o.observe(0.0, 0, 1.0);
        o.observe(10.0, 0, 1.0);
        let t = o.candidate_thresholds(4);
        assert_eq!(t, vec![2.0, 4.0, 6.0, 8.0]);
        let mut single = NumericObserver::<f64>::new(1);
        single.observe(3.0, 0, 1.0);
        assert!(single.candidate_thresholds(4).is_empty());
    }

    #[test]
    fn laplace_probability() {
        let mut o = NominalObserver::<f64>::new(2, 3);
        o.observe(0, 0, 2.0);
        assert!((o.probability(0, 0) - 3.0 / 5.0).abs() < 1e-12);
        assert!((o.probability(1, 1) - 1.0 / 3.0).abs() < 1e-12);
    }
}
