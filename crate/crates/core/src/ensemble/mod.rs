//! Online bagging ensembles of Hoeffding trees behind one train/predict interface.

mod learner;
mod poisson;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use sha2::{Digest, Sha256};

pub use self::learner::{Learner, TrainOutcome};
pub use self::poisson::{mix, poisson_weight};
use self::learner::LearnerContext;
use crate::data::{Instance, Schema};
use crate::error::{Error, Result};
use crate::num::{argmax, sum, Scalar};
use crate::tree::HtConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    OzaBag,
    OzaBagAsht,
    ObAdwin,
    LeveragingBag,
    AdaptiveRandomForest,
    StreamingRandomPatches,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::OzaBag,
        Algorithm::OzaBagAsht,
        Algorithm::ObAdwin,
        Algorithm::LeveragingBag,
        Algorithm::AdaptiveRandomForest,
        Algorithm::StreamingRandomPatches,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OzaBag => "ozabag",
            Algorithm::OzaBagAsht => "ozabag_asht",
            Algorithm::ObAdwin => "obadwin",
            Algorithm::LeveragingBag => "lbag",
            Algorithm::AdaptiveRandomForest => "arf",
            Algorithm::StreamingRandomPatches => "srp",
        }
    }

    /// Poisson rate of the online bootstrap.
    pub fn lambda(self) -> f64 {
        match self {
            Algorithm::OzaBag | Algorithm::OzaBagAsht | Algorithm::ObAdwin => 1.0,
            _ => 6.0,
        }
    }

    pub fn has_detector(self) -> bool {
        !matches!(self, Algorithm::OzaBag | Algorithm::OzaBagAsht)
    }

    /// Whether change handling needs the serial section after training (global replacement).
    pub fn has_global_replacement(self) -> bool {
        self == Algorithm::ObAdwin
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub algorithm: Algorithm,
    pub ensemble_size: usize,
    pub lambda: f64,
    /// Feature subset size for arf/srp; defaults to `round(sqrt(F)) + 1`.
    pub subspace_size: Option<usize>,
    /// Error detector confidence for obadwin/lbag.
    pub delta_adwin: f64,
    pub delta_warning: f64,
    pub delta_drift: f64,
    pub base_seed: u64,
    pub tree: HtConfig,
}

impl EnsembleConfig {
    pub fn new(algorithm: Algorithm, ensemble_size: usize) -> Self {
        Self {
            algorithm,
            ensemble_size,
            lambda: algorithm.lambda(),
            subspace_size: None,
            delta_adwin: 0.002,
            delta_warning: 0.01,
            delta_drift: 0.001,
            base_seed: 1,
            tree: HtConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn validate(&self, num_features: usize) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble size must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if let Some(k) = self.subspace_size {
            if k == 0 || k > num_features {
                return Err(Error::Config(format!(
                    "subspace size {k} outside [1, {num_features}]"
                )));
            }
        }
        for (name, d) in [
            ("delta_adwin", self.delta_adwin),
            ("delta_warning", self.delta_warning),
            ("delta_drift", self.delta_drift),
        ] {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        self.tree.validate()
    }

    pub fn effective_subspace_size(&self, num_features: usize) -> usize {
        self.subspace_size
            .unwrap_or_else(|| (num_features as f64).sqrt().round() as usize + 1)
            .clamp(1, num_features)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<S> {
    pub votes: Vec<S>,
    pub class: usize,
}

/// Adds `votes` normalized to unit sum into `acc`; all-zero vectors are skipped.
pub fn accumulate_votes<S: Scalar>(acc: &mut [S], votes: &[S]) {
    let total = sum(votes);
    if total > S::zero() {
        for (a, v) in acc.iter_mut().zip(votes) {
            *a += *v / total;
        }
    }
}

/// Normalized-sum vote over per-learner vote vectors; ties go to the lowest class.
pub fn combine_votes<S: Scalar>(per_learner: &[Vec<S>], num_classes: usize) -> Prediction<S> {
    let mut votes = vec![S::zero(); num_classes];
    for v in per_learner {
        accumulate_votes(&mut votes, v);
    }
    let class = argmax(&votes);
    Prediction { votes, class }
}

#[derive(Debug, Clone)]
pub struct Ensemble<S> {
    schema: Arc<Schema>,
    ctx: Arc<LearnerContext>,
    learners: Vec<Learner<S>>,
    global_replacements: u64,
}

impl<S: Scalar> Ensemble<S> {
    pub fn new(config: EnsembleConfig, schema: &Schema) -> Result<Self> {
        config.validate(schema.num_features())?;
        let ctx = Arc::new(LearnerContext {
            subspace_size: config.effective_subspace_size(schema.num_features()),
            kinds: schema.feature_kinds().into(),
            num_classes: schema.num_classes(),
            config,
        });
        let learners = (0..ctx.config.ensemble_size)
            .map(|i| Learner::new(i, ctx.clone(), mix(ctx.config.base_seed, i as u64)))
            .collect();
        Ok(Self {
            schema: Arc::new(schema.clone()),
            ctx,
            learners,
            global_replacements: 0,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.ctx.config
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn num_classes(&self) -> usize {
        self.ctx.num_classes
    }

    pub fn size(&self) -> usize {
        self.learners.len()
    }

    pub fn learners(&self) -> &[Learner<S>] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [Learner<S>] {
        &mut self.learners
    }

    pub fn check(&self, instance: &Instance<S>) -> Result<()> {
        self.schema.validate(instance)
    }

    /// Normalized-sum vote of all foreground learners. Pure.
    pub fn predict(&self, instance: &Instance<S>) -> Prediction<S> {
        let mut votes = vec![S::zero(); self.ctx.num_classes];
        if self.check(instance).is_ok() {
            for l in &self.learners {
                accumulate_votes(&mut votes, &l.votes(instance));
            }
        }
        let class = argmax(&votes);
        Prediction { votes, class }
    }

    /// Trains every learner in index order, then applies any global replacement.
    pub fn train(&mut self, instance: &Instance<S>) -> Result<()> {
        self.check(instance)?;
        for l in &mut self.learners {
            l.train(instance)?;
        }
        self.apply_global_replacement();
        Ok(())
    }

    /// obadwin: when any learner's detector fired since the last call, the learner with the
    /// highest error estimate is replaced. Returns the replaced index.
    pub fn apply_global_replacement(&mut self) -> Option<usize> {
        let mut fired = false;
        for l in &mut self.learners {
            fired |= l.take_change_flag();
        }
        if !fired || !self.ctx.config.algorithm.has_global_replacement() {
            return None;
        }
        let mut worst = None;
        let mut max = S::zero();
        for (i, l) in self.learners.iter().enumerate() {
            let e = l.error_estimate();
            if e > max {
                max = e;
                worst = Some(i);
            }
        }
        let i = worst?;
        self.learners[i].reset();
        self.global_replacements += 1;
        Some(i)
    }

    pub fn reset_learner(&mut self, i: usize) -> Result<()> {
        let m = self.learners.len();
        self.learners
            .get_mut(i)
            .ok_or_else(|| Error::Domain(format!("learner index {i} outside [0, {m})")))?
            .reset();
        Ok(())
    }

    /// Learner resets of every kind, including obadwin's global replacements.
    pub fn total_resets(&self) -> u64 {
        self.learners.iter().map(Learner::resets).sum()
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for l in &self.learners {
            let bytes = l.serialize();
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    /// SHA-256 of the serialized ensemble, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.serialize());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_drift_stream, synthetic_schema, AttributeSpec, FeatureKind, NO_DRIFT};
    use crate::tree::HoeffdingTree;

    #[test]
    fn vote_combination_hand_arithmetic() {
        let p = combine_votes::<f64>(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4]], 2);
        assert!((p.votes[0] - 1.7).abs() < 1e-12 && (p.votes[1] - 1.3).abs() < 1e-12);
        assert_eq!(p.class, 0);
        assert_eq!(combine_votes::<f64>(&[vec![0.0, 0.0]], 2).class, 0);
        // scaling a learner's raw votes does not change the outcome
        let q = combine_votes(&[vec![9.0, 1.0], vec![20.0, 80.0], vec![0.6, 0.4]], 2);
        assert_eq!(q.class, p.class);
    }

    #[test]
    fn untrained_ensemble_predicts_class_zero() {
        let schema = synthetic_schema();
        for a in Algorithm::ALL {
            let e = Ensemble::<f64>::new(EnsembleConfig::new(a, 4), &schema).unwrap();
            let inst = synthetic_drift_stream::<f64>(1, NO_DRIFT).next().unwrap();
            assert_eq!(e.predict(&inst).class, 0, "{a}");
        }
    }

    #[test]
    fn single_learner_matches_its_tree() {
        let schema = synthetic_schema();
        let mut e = Ensemble::<f64>::new(EnsembleConfig::new(Algorithm::OzaBag, 1), &schema).unwrap();
        let stream: Vec<_> = synthetic_drift_stream::<f64>(3, NO_DRIFT).take(3000).collect();
        for inst in &stream[..2000] {
            e.train(inst).unwrap();
        }
        for inst in &stream[2000..] {
            let tree_class = argmax(&e.learners()[0].votes(inst));
            assert_eq!(e.predict(inst).class, tree_class);
        }
    }

    #[test]
    fn reset_yields_fresh_tree_and_isolates_others() {
        let schema = synthetic_schema();
        let mut e = Ensemble::<f64>::new(EnsembleConfig::new(Algorithm::LeveragingBag, 3), &schema).unwrap();
        for inst in synthetic_drift_stream::<f64>(4, NO_DRIFT).take(2000) {
            e.train(&inst).unwrap();
        }
        let others: Vec<Vec<u8>> = [0, 2].iter().map(|&i| e.learners()[i].serialize()).collect();
        e.reset_learner(1).unwrap();
        let fresh = HoeffdingTree::<f64>::new(schema.feature_kinds().to_vec(), 2, HtConfig::default());
        assert_eq!(e.learners()[1].serialize(), fresh.serialize());
        assert_eq!(e.learners()[0].serialize(), others[0]);
        assert_eq!(e.learners()[2].serialize(), others[1]);
        e.reset_learner(1).unwrap();
        assert_eq!(e.learners()[1].serialize(), fresh.serialize());
        assert!(e.reset_learner(3).is_err());
    }

    #[test]
    fn learner_order_does_not_matter_without_detectors() {
        let schema = synthetic_schema();
        let stream: Vec<_> = synthetic_drift_stream::<f64>(8, NO_DRIFT).take(1000).collect();
        let config = EnsembleConfig::new(Algorithm::OzaBag, 3).with_seed(77);
        let mut a = Ensemble::<f64>::new(config.clone(), &schema).unwrap();
        for inst in &stream {
            a.train(inst).unwrap();
        }
        // learner-by-learner: each learner consumes the whole stream before the next starts
        let mut b = Ensemble::<f64>::new(config, &schema).unwrap();
        for i in [2, 0, 1] {
            for inst in &stream {
                b.learners_mut()[i].train(inst).unwrap();
            }
        }
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn prediction_never_mutates() {
        let schema = synthetic_schema();
        for a in Algorithm::ALL {
            let mut e = Ensemble::<f64>::new(EnsembleConfig::new(a, 3), &schema).unwrap();
            let stream: Vec<_> = synthetic_drift_stream::<f64>(5, 600).take(1500).collect();
            for inst in &stream[..1000] {
                e.train(inst).unwrap();
            }
            let before = e.serialize();
            for inst in &stream[1000..] {
                e.predict(inst);
            }
            assert_eq!(before, e.serialize(), "{a}");
        }
    }

    #[test]
    fn srp_patches_have_requested_size() {
        let attrs: Vec<AttributeSpec> = (0..12)
            .map(|i| AttributeSpec::numeric(format!("f{i}")))
            .chain([AttributeSpec::nominal("class", ["a", "b"]).unwrap()])
            .collect();
        let schema = Schema::new("wide", attrs, 12).unwrap();
        let mut config = EnsembleConfig::new(Algorithm::StreamingRandomPatches, 5);
        config.subspace_size = Some(4);
        let e = Ensemble::<f64>::new(config, &schema).unwrap();
        for l in e.learners() {
            assert_eq!(l.subspace().len(), 4);
            assert_eq!(l.tree().feature_kinds(), &[FeatureKind::Numeric; 4]);
            assert_eq!(l.tree().observed_features().len(), 4);
        }
    }

    #[test]
    fn config_validation() {
        let schema = synthetic_schema();
        assert!(Ensemble::<f64>::new(EnsembleConfig::new(Algorithm::OzaBag, 0), &schema).is_err());
        let mut c = EnsembleConfig::new(Algorithm::StreamingRandomPatches, 2);
        c.subspace_size = Some(4);
        assert!(Ensemble::<f64>::new(c, &schema).is_err());
        assert_eq!("LBAG".parse::<Algorithm>().unwrap(), Algorithm::LeveragingBag);
        assert!("boost".parse::<Algorithm>().is_err());
        assert_eq!(EnsembleConfig::new(Algorithm::AdaptiveRandomForest, 1).effective_subspace_size(54), 8);
    }

    #[test]
    fn train_rejects_schema_mismatch() {
        let schema = synthetic_schema();
        let mut e = Ensemble::<f64>::new(EnsembleConfig::new(Algorithm::OzaBag, 2), &schema).unwrap();
        assert!(e.train(&Instance::new(vec![0.1, 0.2], 0)).is_err());
    }
}
