use std::marker::PhantomData;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttributeSpec, Instance, Schema};
use crate::num::Scalar;

/// `change_at` value for a stream that never drifts.
pub const NO_DRIFT: u64 = u64::MAX;

const THRESHOLD_BEFORE: f64 = 1.0;
const THRESHOLD_AFTER: f64 = 0.6;

/// Three numeric features in [0, 1] and a binary class.
pub fn synthetic_schema() -> Schema {
    Schema::new(
        "synthetic_drift",
        vec![
            AttributeSpec::numeric("x0"),
            AttributeSpec::numeric("x1"),
            AttributeSpec::numeric("x2"),
            AttributeSpec::nominal("class", ["0", "1"]).expect("static values"),
        ],
        3,
    )
    .expect("static schema")
}

/// Infinite, seeded stream whose concept is `x0 + x1 > 1.0` before instance `change_at`
/// and `x0 + x1 > 0.6` from then on. `x2` is noise.
#[derive(Debug, Clone)]
pub struct DriftStream<S> {
    rng: ChaCha8Rng,
    produced: u64,
    change_at: u64,
    _scalar: PhantomData<S>,
}

pub fn synthetic_drift_stream<S: Scalar>(seed: u64, change_at: u64) -> DriftStream<S> {
    DriftStream {
        rng: ChaCha8Rng::seed_from_u64(seed),
        produced: 0,
        change_at,
        _scalar: PhantomData,
    }
}

impl<S: Scalar> DriftStream<S> {
    pub fn threshold_at(&self, index: u64) -> f64 {
        if index < self.change_at {
            THRESHOLD_BEFORE
        } else {
            THRESHOLD_AFTER
        }
    }
}

impl<S: Scalar> Iterator for DriftStream<S> {
    type Item = Instance<S>;

    fn next(&mut self) -> Option<Instance<S>> {
        let x: [f64; 3] = [self.rng.gen(), self.rng.gen(), self.rng.gen()];
        let threshold = self.threshold_at(self.produced);
        self.produced += 1;
        let values: Vec<S> = x.iter().map(|v| S::lit(*v)).collect();
        // label computed on the stored precision so it stays a pure function of the features
        let label = usize::from((values[0] + values[1]).as_f64() > threshold);
        Some(Instance::new(values, label))
    }
}
