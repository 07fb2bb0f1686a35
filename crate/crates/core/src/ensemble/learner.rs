use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{poisson_weight, Algorithm, EnsembleConfig};
use crate::change_detection::Adwin;
use crate::data::{FeatureKind, Instance};
use crate::error::Result;
use crate::num::{argmax, Scalar};
use crate::tree::{asht_budget, AshtConfig, HoeffdingTree};

/// Static facts every learner of an ensemble shares.
#[derive(Debug)]
pub(crate) struct LearnerContext {
    pub config: EnsembleConfig,
    pub kinds: Arc<[FeatureKind]>,
    pub num_classes: usize,
    pub subspace_size: usize,
}

/// A tree restricted to a fixed feature subset (random patches).
#[derive(Debug, Clone)]
struct Patch<S> {
    features: Vec<usize>,
    tree: HoeffdingTree<S>,
}

/// What happened while a learner trained on one instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainOutcome {
    pub weight: u32,
    /// The learner's own change detector fired.
    pub change: bool,
    /// The learner replaced its model.
    pub reset: bool,
}

/// One ensemble member together with everything it owns: RNG stream, detectors and
/// background model. Learners never share mutable state, so they can train concurrently.
#[derive(Debug, Clone)]
pub struct Learner<S> {
    index: usize,
    ctx: Arc<LearnerContext>,
    rng: ChaCha8Rng,
    model: Patch<S>,
    background: Option<Patch<S>>,
    /// Error detector (obadwin, lbag) or drift detector (arf, srp).
    detector: Option<Adwin<S>>,
    warning: Option<Adwin<S>>,
    scratch: Vec<S>,
    resets: u64,
    warnings: u64,
    change_pending: bool,
}

impl<S: Scalar> Learner<S> {
    pub(crate) fn new(index: usize, ctx: Arc<LearnerContext>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = fresh_patch(&ctx, index, &mut rng);
        let (detector, warning) = fresh_detectors(&ctx.config);
        Self {
            index,
            ctx,
            rng,
            model,
            background: None,
            detector,
            warning,
            scratch: Vec::new(),
            resets: 0,
            warnings: 0,
            change_pending: false,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tree(&self) -> &HoeffdingTree<S> {
        &self.model.tree
    }

    pub fn background(&self) -> Option<&HoeffdingTree<S>> {
        self.background.as_ref().map(|p| &p.tree)
    }

    /// Feature indices of the learner's patch; all features unless the algorithm is srp.
    pub fn subspace(&self) -> &[usize] {
        &self.model.features
    }

    pub fn resets(&self) -> u64 {
        self.resets
    }

    pub fn warnings(&self) -> u64 {
        self.warnings
    }

    /// Error-rate estimate of the change detector, zero without one.
    pub fn error_estimate(&self) -> S {
        self.detector.as_ref().map_or(S::zero(), Adwin::estimate_or_zero)
    }

    pub fn detector(&self) -> Option<&Adwin<S>> {
        self.detector.as_ref()
    }

    pub(crate) fn take_change_flag(&mut self) -> bool {
        std::mem::take(&mut self.change_pending)
    }

    /// Raw vote vector of the foreground model.
    pub fn votes(&self, instance: &Instance<S>) -> Vec<S> {
        predict_patch(&self.model, &instance.values)
    }

    /// Draws this learner's Poisson weight and trains on the weighted instance, then runs the
    /// learner's own change detection.
    pub fn train(&mut self, instance: &Instance<S>) -> Result<TrainOutcome> {
        let k = poisson_weight(&mut self.rng, self.ctx.config.lambda);
        let weight = S::from_count(u64::from(k)) * instance.weight;
        let class = instance.class_index;
        let mut outcome = TrainOutcome {
            weight: k,
            ..TrainOutcome::default()
        };
        let algorithm = self.ctx.config.algorithm;
        // the error indicator is measured before the model sees the instance
        let error = if algorithm.has_detector() {
            let wrong = argmax(&predict_patch(&self.model, &instance.values)) != class;
            Some(if wrong { S::one() } else { S::zero() })
        } else {
            None
        };
        if k > 0 {
            train_patch(&mut self.model, &mut self.scratch, instance, weight)?;
            if let Some(bg) = self.background.as_mut() {
                train_patch(bg, &mut self.scratch, instance, weight)?;
            }
        }
        let Some(error) = error else {
            return Ok(outcome);
        };
        match algorithm {
            Algorithm::ObAdwin => {
                if self.detector.as_mut().expect("detector").add(error)? {
                    self.change_pending = true;
                    outcome.change = true;
                }
            }
            Algorithm::LeveragingBag => {
                if self.detector.as_mut().expect("detector").add(error)? {
                    outcome.change = true;
                    outcome.reset = true;
                    self.reset();
                }
            }
            Algorithm::AdaptiveRandomForest | Algorithm::StreamingRandomPatches => {
                if self.warning.as_mut().expect("warning detector").add(error)? {
                    self.warnings += 1;
                    self.background = Some(fresh_patch(&self.ctx, self.index, &mut self.rng));
                    self.warning = Some(Adwin::new(self.ctx.config.delta_warning));
                }
                if self.detector.as_mut().expect("drift detector").add(error)? {
                    outcome.change = true;
                    outcome.reset = true;
                    self.model = match self.background.take() {
                        Some(bg) => bg,
                        None => fresh_patch(&self.ctx, self.index, &mut self.rng),
                    };
                    let (detector, warning) = fresh_detectors(&self.ctx.config);
                    self.detector = detector;
                    self.warning = warning;
                    self.resets += 1;
                }
            }
            Algorithm::OzaBag | Algorithm::OzaBagAsht => {}
        }
        Ok(outcome)
    }

    /// Fresh model and detectors; the RNG stream continues.
    pub fn reset(&mut self) {
        self.model = fresh_patch(&self.ctx, self.index, &mut self.rng);
        self.background = None;
        let (detector, warning) = fresh_detectors(&self.ctx.config);
        self.detector = detector;
        self.warning = warning;
        self.change_pending = false;
        self.resets += 1;
    }

    /// Model bytes: foreground tree, then background and patch indices when present.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = self.model.tree.serialize();
        if self.ctx.config.algorithm == Algorithm::StreamingRandomPatches {
            write_indices(&mut out, &self.model.features);
        }
        if let Some(bg) = &self.background {
            out.push(0xB6);
            bg.tree.write_into(&mut out);
            if self.ctx.config.algorithm == Algorithm::StreamingRandomPatches {
                write_indices(&mut out, &bg.features);
            }
        }
        out
    }
}

fn write_indices(out: &mut Vec<u8>, features: &[usize]) {
    out.extend_from_slice(&(features.len() as u32).to_le_bytes());
    for f in features {
        out.extend_from_slice(&(*f as u32).to_le_bytes());
    }
}

fn fresh_detectors<S: Scalar>(config: &EnsembleConfig) -> (Option<Adwin<S>>, Option<Adwin<S>>) {
    match config.algorithm {
        Algorithm::OzaBag | Algorithm::OzaBagAsht => (None, None),
        Algorithm::ObAdwin | Algorithm::LeveragingBag => (Some(Adwin::new(config.delta_adwin)), None),
        Algorithm::AdaptiveRandomForest | Algorithm::StreamingRandomPatches => (
            Some(Adwin::new(config.delta_drift)),
            Some(Adwin::new(config.delta_warning)),
        ),
    }
}

fn fresh_patch<S: Scalar>(ctx: &LearnerContext, index: usize, rng: &mut ChaCha8Rng) -> Patch<S> {
    let config = &ctx.config;
    let n = ctx.kinds.len();
    match config.algorithm {
        Algorithm::OzaBagAsht => Patch {
            features: (0..n).collect(),
            tree: HoeffdingTree::asht(
                ctx.kinds.clone(),
                ctx.num_classes,
                AshtConfig {
                    base: config.tree.clone(),
                    max_split_nodes: asht_budget(index),
                },
            ),
        },
        Algorithm::AdaptiveRandomForest => {
            let seed = rng.gen();
            Patch {
                features: (0..n).collect(),
                tree: HoeffdingTree::new(ctx.kinds.clone(), ctx.num_classes, config.tree.clone())
                    .with_leaf_subspace(ctx.subspace_size, seed),
            }
        }
        Algorithm::StreamingRandomPatches => {
            let mut features = sample(rng, n, ctx.subspace_size.min(n)).into_vec();
            features.sort_unstable();
            let kinds: Vec<FeatureKind> = features.iter().map(|&f| ctx.kinds[f]).collect();
            Patch {
                features,
                tree: HoeffdingTree::new(kinds, ctx.num_classes, config.tree.clone()),
            }
        }
        _ => Patch {
            features: (0..n).collect(),
            tree: HoeffdingTree::new(ctx.kinds.clone(), ctx.num_classes, config.tree.clone()),
        },
    }
}

fn is_identity(features: &[usize], n: usize) -> bool {
    features.len() == n
}

fn predict_patch<S: Scalar>(patch: &Patch<S>, values: &[S]) -> Vec<S> {
    if is_identity(&patch.features, values.len()) {
        patch.tree.predict_values(values)
    } else {
        let projected: Vec<S> = patch.features.iter().map(|&f| values[f]).collect();
        patch.tree.predict_values(&projected)
    }
}

fn train_patch<S: Scalar>(
    patch: &mut Patch<S>,
    scratch: &mut Vec<S>,
    instance: &Instance<S>,
    weight: S,
) -> Result<()> {
    if is_identity(&patch.features, instance.values.len()) {
        patch.tree.train_values(&instance.values, instance.class_index, weight)
    } else {
        scratch.clear();
        scratch.extend(patch.features.iter().map(|&f| instance.values[f]));
        patch.tree.train_values(scratch, instance.class_index, weight)
    }
}
