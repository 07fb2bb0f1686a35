//! Incremental Hoeffding tree and its adaptive-size (ASHT) variant.

mod observer;

use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use self::observer::{
    AttributeObserver, GaussianEstimator, NominalObserver, NumericObserver,
};
use crate::data::{FeatureKind, Instance};
use crate::error::{Error, Result};
use crate::num::{argmax, sum, Scalar};

/// Confidence radius `sqrt(R^2 ln(1/delta) / 2n)`.
pub fn hoeffding_bound<S: Scalar>(range: S, confidence: S, n: S) -> Result<S> {
    if !(range > S::zero()) {
        return Err(Error::Domain(format!("range must be positive, got {range}")));
    }
    if !(confidence > S::zero() && confidence <= S::one()) {
        return Err(Error::Domain(format!(
            "confidence must lie in (0, 1], got {confidence}"
        )));
    }
    if !(n > S::zero()) {
        return Err(Error::Domain(format!("observation count must be positive, got {n}")));
    }
    Ok((range * range * -confidence.ln() / (S::lit(2.0) * n)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafPredictor {
    MajorityClass,
    NaiveBayesAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HtConfig {
    /// Weight a leaf must accumulate between split attempts.
    pub grace_period: usize,
    pub split_confidence: f64,
    pub tie_threshold: f64,
    pub leaf_predictor: LeafPredictor,
    pub numeric_bins: usize,
}

impl Default for HtConfig {
    fn default() -> Self {
        Self {
            grace_period: 200,
            split_confidence: 1e-7,
            tie_threshold: 0.05,
            leaf_predictor: LeafPredictor::NaiveBayesAdaptive,
            numeric_bins: 10,
        }
    }
}

impl HtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grace_period == 0 {
            return Err(Error::Config("grace_period must be positive".into()));
        }
        if !(self.split_confidence > 0.0 && self.split_confidence < 1.0) {
            return Err(Error::Config("split_confidence must lie in (0, 1)".into()));
        }
        if !(self.tie_threshold >= 0.0) {
            return Err(Error::Config("tie_threshold must be non-negative".into()));
        }
        if self.numeric_bins == 0 {
            return Err(Error::Config("numeric_bins must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AshtConfig {
    pub base: HtConfig,
    pub max_split_nodes: usize,
}

/// Split-node budget of the `k`-th tree of an ASHT ensemble: `2^(k+1)`, capped at `2^10`.
pub fn asht_budget(k: usize) -> usize {
    1 << (k + 1).min(10)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitTest<S> {
    /// One branch per nominal value.
    Nominal,
    /// Left branch takes values `<= threshold`.
    Numeric(S),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitDecision<S> {
    NoSplit,
    Split {
        feature: usize,
        test: SplitTest<S>,
        merit: S,
        /// Class distributions handed to the children.
        branches: Vec<Vec<S>>,
    },
}

/// Leaf statistics: class distribution, attribute observers and predictor bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf<S> {
    class_counts: Vec<S>,
    /// Feature indices this leaf may split on, in increasing order.
    features: Vec<usize>,
    observers: Vec<AttributeObserver<S>>,
    weight_at_last_eval: S,
    nb_correct: S,
    mc_correct: S,
}

impl<S: Scalar> Leaf<S> {
    pub fn new(kinds: &[FeatureKind], features: Vec<usize>, class_counts: Vec<S>) -> Self {
        let num_classes = class_counts.len();
        let observers = features
            .iter()
            .map(|&f| match kinds[f] {
                FeatureKind::Numeric => AttributeObserver::Numeric(NumericObserver::new(num_classes)),
                FeatureKind::Nominal(arity) => {
                    AttributeObserver::Nominal(NominalObserver::new(num_classes, arity))
                }
            })
            .collect();
        let seen = sum(&class_counts);
        Self {
            class_counts,
            features,
            observers,
            weight_at_last_eval: seen,
            nb_correct: S::zero(),
            mc_correct: S::zero(),
        }
    }

    pub fn class_counts(&self) -> &[S] {
        &self.class_counts
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn total_weight(&self) -> S {
        sum(&self.class_counts)
    }

    pub fn is_pure(&self) -> bool {
        self.class_counts.iter().filter(|c| **c > S::zero()).count() < 2
    }

    pub fn learn(&mut self, values: &[S], class: usize, weight: S, predictor: LeafPredictor) {
        if predictor == LeafPredictor::NaiveBayesAdaptive && self.total_weight() > S::zero() {
            if argmax(&self.class_counts) == class {
                self.mc_correct += weight;
            }
            if argmax(&self.naive_bayes(values)) == class {
                self.nb_correct += weight;
            }
        }
        self.class_counts[class] += weight;
        for (obs, &f) in self.observers.iter_mut().zip(&self.features) {
            obs.observe(values[f], class, weight);
        }
    }

    pub fn votes(&self, values: &[S], predictor: LeafPredictor) -> Vec<S> {
        match predictor {
            LeafPredictor::NaiveBayesAdaptive if self.nb_correct > self.mc_correct => {
                self.naive_bayes(values)
            }
            _ => self.class_counts.clone(),
        }
    }

    /// Naive Bayes posterior scaled by the leaf weight; falls back to the class counts when
    /// every class has zero likelihood.
    pub fn naive_bayes(&self, values: &[S]) -> Vec<S> {
        let total = self.total_weight();
        if total <= S::zero() {
            return self.class_counts.clone();
        }
        let log_post: Vec<S> = (0..self.class_counts.len())
            .map(|c| {
                if self.class_counts[c] <= S::zero() {
                    return S::neg_infinity();
                }
                let mut lp = (self.class_counts[c] / total).ln();
                for (obs, &f) in self.observers.iter().zip(&self.features) {
                    lp += obs.likelihood(values[f], c).ln();
                }
                lp
            })
            .collect();
        let max = log_post.iter().copied().fold(S::neg_infinity(), S::max);
        if max == S::neg_infinity() || max.is_nan() {
            return self.class_counts.clone();
        }
        let exp: Vec<S> = log_post.iter().map(|lp| (*lp - max).exp()).collect();
        let z = sum(&exp);
        exp.into_iter().map(|e| e / z * total).collect()
    }

    /// Ranks split candidates by information gain and applies the Hoeffding test.
    pub fn attempt_split(&self, config: &HtConfig) -> SplitDecision<S> {
        if self.is_pure() {
            return SplitDecision::NoSplit;
        }
        let pre = entropy(&self.class_counts);
        let mut best: Vec<(S, usize, SplitTest<S>, Vec<Vec<S>>)> = Vec::new();
        for (obs, &feature) in self.observers.iter().zip(&self.features) {
            let candidate = match obs {
                AttributeObserver::Nominal(o) => {
                    let branches = o.multiway_split();
                    let merit = info_gain(pre, &branches);
                    Some((merit, SplitTest::Nominal, branches))
                }
                AttributeObserver::Numeric(o) => {
                    let mut top: Option<(S, SplitTest<S>, Vec<Vec<S>>)> = None;
                    for t in o.candidate_thresholds(config.numeric_bins) {
                        let branches: Vec<Vec<S>> = o.binary_split(t).into();
                        let merit = info_gain(pre, &branches);
                        if top.as_ref().map_or(true, |(m, _, _)| merit > *m) {
                            top = Some((merit, SplitTest::Numeric(t), branches));
                        }
                    }
                    top
                }
            };
            if let Some((merit, test, branches)) = candidate {
                if merit > S::neg_infinity() {
                    best.push((merit, feature, test, branches));
                }
            }
        }
        // stable sort keeps the lowest feature index first among equal merits
        best.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let Some((g1, feature, test, branches)) = best.first().cloned() else {
            return SplitDecision::NoSplit;
        };
        // the "no split" candidate always has merit 0
        let g2 = best.get(1).map_or(S::zero(), |b| b.0.max(S::zero()));
        if g1 <= S::zero() {
            return SplitDecision::NoSplit;
        }
        let range = S::lit((self.class_counts.len() as f64).log2());
        let eps = match hoeffding_bound(range, S::lit(config.split_confidence), self.total_weight()) {
            Ok(e) => e,
            Err(_) => return SplitDecision::NoSplit,
        };
        if g1 - g2 > eps || eps < S::lit(config.tie_threshold) {
            SplitDecision::Split {
                feature,
                test,
                merit: g1,
                branches: self.hand_off(branches),
            }
        } else {
            SplitDecision::NoSplit
        }
    }

    /// Rescales observer-derived branch distributions so that, per class, the children
    /// together hold exactly this leaf's class counts (including mass inherited at creation).
    fn hand_off(&self, mut branches: Vec<Vec<S>>) -> Vec<Vec<S>> {
        let branch_totals: Vec<S> = branches.iter().map(|b| sum(b)).collect();
        let all = sum(&branch_totals);
        for (c, &count) in self.class_counts.iter().enumerate() {
            let observed = branches.iter().fold(S::zero(), |acc, b| acc + b[c]);
            let last = branches.len() - 1;
            let mut assigned = S::zero();
            for (i, b) in branches.iter_mut().enumerate() {
                let share = if i == last {
                    (count - assigned).max(S::zero())
                } else if observed > S::zero() {
                    count * b[c] / observed
                } else {
                    count * branch_totals[i] / all
                };
                assigned += share;
                b[c] = share;
            }
        }
        branches
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.push(0);
        write_len(out, self.class_counts.len());
        for v in &self.class_counts {
            write_f64(out, *v);
        }
        for v in [self.weight_at_last_eval, self.nb_correct, self.mc_correct] {
            write_f64(out, v);
        }
        write_len(out, self.observers.len());
        for (obs, f) in self.observers.iter().zip(&self.features) {
            write_len(out, *f);
            obs.write(out);
        }
    }
}

fn entropy<S: Scalar>(dist: &[S]) -> S {
    let total = sum(dist);
    if total <= S::zero() {
        return S::zero();
    }
    dist.iter()
        .filter(|w| **w > S::zero())
        .fold(S::zero(), |h, w| {
            let p = *w / total;
            h - p * p.log2()
        })
}

/// Information gain; `-inf` unless at least two branches hold 1% of the weight.
fn info_gain<S: Scalar>(pre: S, branches: &[Vec<S>]) -> S {
    let weights: Vec<S> = branches.iter().map(|b| sum(b)).collect();
    let total = sum(&weights);
    if total <= S::zero() {
        return S::neg_infinity();
    }
    let min_frac = S::lit(0.01);
    if weights.iter().filter(|w| **w / total >= min_frac).count() < 2 {
        return S::neg_infinity();
    }
    let post = branches
        .iter()
        .zip(&weights)
        .fold(S::zero(), |acc, (b, w)| acc + *w / total * entropy(b));
    pre - post
}

fn write_f64<S: Scalar>(out: &mut Vec<u8>, v: S) {
    out.extend_from_slice(&v.as_f64().to_le_bytes());
}

fn write_len(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u32).to_le_bytes());
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitNode<S> {
    feature: usize,
    test: SplitTest<S>,
    children: Vec<Node<S>>,
}

impl<S: Scalar> SplitNode<S> {
    fn branch(&self, values: &[S]) -> usize {
        let v = values[self.feature];
        match self.test {
            SplitTest::Nominal => v.to_usize().unwrap_or(0).min(self.children.len() - 1),
            SplitTest::Numeric(t) => usize::from(v > t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<S> {
    Leaf(Leaf<S>),
    Split(SplitNode<S>),
}

impl<S: Scalar> Node<S> {
    fn write(&self, out: &mut Vec<u8>) {
        match self {
            Node::Leaf(leaf) => leaf.write(out),
            Node::Split(s) => {
                out.push(1);
                write_len(out, s.feature);
                match s.test {
                    SplitTest::Nominal => out.push(0),
                    SplitTest::Numeric(t) => {
                        out.push(1);
                        write_f64(out, t);
                    }
                }
                write_len(out, s.children.len());
                for c in &s.children {
                    c.write(out);
                }
            }
        }
    }

    fn visit_leaves<'a>(&'a self, f: &mut impl FnMut(&'a Leaf<S>)) {
        match self {
            Node::Leaf(l) => f(l),
            Node::Split(s) => s.children.iter().for_each(|c| c.visit_leaves(f)),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(s) => 1 + s.children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }
}

/// Chooses the feature subset of each new leaf.
#[derive(Debug, Clone)]
struct LeafFactory {
    kinds: Arc<[FeatureKind]>,
    num_classes: usize,
    /// Random per-leaf subspace `(size, rng)`, as used by adaptive random forests.
    subspace: Option<(usize, ChaCha8Rng)>,
}

impl LeafFactory {
    fn make<S: Scalar>(&mut self, class_counts: Vec<S>) -> Leaf<S> {
        let n = self.kinds.len();
        let features = match &mut self.subspace {
            Some((k, rng)) if *k < n => {
                let mut f = sample(rng, n, *k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..n).collect(),
        };
        debug_assert_eq!(class_counts.len(), self.num_classes);
        Leaf::new(&self.kinds, features, class_counts)
    }
}

#[derive(Debug, Clone)]
pub struct HoeffdingTree<S> {
    config: HtConfig,
    max_split_nodes: Option<usize>,
    factory: LeafFactory,
    root: Node<S>,
    split_nodes: usize,
    resets: u64,
}

impl<S: Scalar> HoeffdingTree<S> {
    pub fn new(kinds: impl Into<Arc<[FeatureKind]>>, num_classes: usize, config: HtConfig) -> Self {
        let mut factory = LeafFactory {
            kinds: kinds.into(),
            num_classes,
            subspace: None,
        };
        let root = Node::Leaf(factory.make(vec![S::zero(); num_classes]));
        Self {
            config,
            max_split_nodes: None,
            factory,
            root,
            split_nodes: 0,
            resets: 0,
        }
    }

    /// Adaptive-size tree: reset to a single leaf whenever a split pushes the split-node
    /// count past `max_split_nodes`.
    pub fn asht(kinds: impl Into<Arc<[FeatureKind]>>, num_classes: usize, config: AshtConfig) -> Self {
        let mut tree = Self::new(kinds, num_classes, config.base);
        tree.max_split_nodes = Some(config.max_split_nodes.max(1));
        tree
    }

    /// Restricts every leaf created from now on (including the root, which is rebuilt)
    /// to `size` randomly chosen features.
    pub fn with_leaf_subspace(mut self, size: usize, seed: u64) -> Self {
        self.factory.subspace = Some((size, ChaCha8Rng::seed_from_u64(seed)));
        self.root = Node::Leaf(self.factory.make(vec![S::zero(); self.factory.num_classes]));
        self
    }

    pub fn config(&self) -> &HtConfig {
        &self.config
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.factory.kinds
    }

    pub fn num_classes(&self) -> usize {
        self.factory.num_classes
    }

    pub fn max_split_nodes(&self) -> Option<usize> {
        self.max_split_nodes
    }

    pub fn split_node_count(&self) -> usize {
        self.split_nodes
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.root.visit_leaves(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Times the size budget forced a reset.
    pub fn budget_resets(&self) -> u64 {
        self.resets
    }

    /// Sum of class counts over all leaves.
    pub fn leaf_mass(&self) -> S {
        let mut total = S::zero();
        self.root.visit_leaves(&mut |l| total += l.total_weight());
        total
    }

    /// Features with an observer in at least one leaf.
    pub fn observed_features(&self) -> Vec<usize> {
        let mut seen = vec![false; self.factory.kinds.len()];
        self.root.visit_leaves(&mut |l| l.features().iter().for_each(|f| seen[*f] = true));
        seen.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect()
    }

    pub fn root(&self) -> &Node<S> {
        &self.root
    }

    /// Back to a single empty leaf.
    pub fn reset(&mut self) {
        self.root = Node::Leaf(self.factory.make(vec![S::zero(); self.factory.num_classes]));
        self.split_nodes = 0;
    }

    fn check(&self, values: &[S], class: Option<usize>) -> Result<()> {
        let kinds = &self.factory.kinds;
        if values.len() != kinds.len() {
            return Err(Error::SchemaMismatch(format!(
                "tree expects {} features, got {}",
                kinds.len(),
                values.len()
            )));
        }
        if let Some(c) = class {
            if c >= self.factory.num_classes {
                return Err(Error::SchemaMismatch(format!("class {c} out of range")));
            }
        }
        for (i, (v, k)) in values.iter().zip(kinds.iter()).enumerate() {
            if let FeatureKind::Nominal(arity) = k {
                if !(*v >= S::zero() && v.as_f64() < *arity as f64) {
                    return Err(Error::SchemaMismatch(format!(
                        "nominal feature {i} value {v} outside [0, {arity})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn train(&mut self, instance: &Instance<S>, weight: S) -> Result<()> {
        self.train_values(&instance.values, instance.class_index, weight)
    }

    /// Routes to a leaf, updates its statistics and, after every `grace_period` weight,
    /// attempts a split.
    pub fn train_values(&mut self, values: &[S], class: usize, weight: S) -> Result<()> {
        self.check(values, Some(class))?;
        if !(weight > S::zero()) {
            return Ok(());
        }
        let config = &self.config;
        let mut node = &mut self.root;
        while let Node::Split(s) = node {
            let b = s.branch(values);
            node = &mut s.children[b];
        }
        let Node::Leaf(leaf) = node else {
            unreachable!("descent stops at a leaf")
        };
        leaf.learn(values, class, weight, config.leaf_predictor);
        let seen = leaf.total_weight();
        if seen - leaf.weight_at_last_eval < S::from_count(config.grace_period as u64) {
            return Ok(());
        }
        leaf.weight_at_last_eval = seen;
        if let SplitDecision::Split {
            feature,
            test,
            branches,
            ..
        } = leaf.attempt_split(config)
        {
            let children = branches
                .into_iter()
                .map(|dist| Node::Leaf(self.factory.make(dist)))
                .collect();
            *node = Node::Split(SplitNode {
                feature,
                test,
                children,
            });
            self.split_nodes += 1;
            if self.max_split_nodes.is_some_and(|max| self.split_nodes > max) {
                self.reset();
                self.resets += 1;
            }
        }
        Ok(())
    }

    pub fn predict(&self, instance: &Instance<S>) -> Vec<S> {
        self.predict_values(&instance.values)
    }

    /// Vote vector of the leaf the values route to. Never mutates the tree.
    pub fn predict_values(&self, values: &[S]) -> Vec<S> {
        if self.check(values, None).is_err() {
            return vec![S::zero(); self.factory.num_classes];
        }
        let mut node = &self.root;
        while let Node::Split(s) = node {
            node = &s.children[s.branch(values)];
        }
        match node {
            Node::Leaf(leaf) => leaf.votes(values, self.config.leaf_predictor),
            Node::Split(_) => unreachable!(),
        }
    }

    /// Deterministic depth-first encoding of the model (nodes and statistics only).
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_into(&mut out);
        out
    }

    pub fn write_into(&self, out: &mut Vec<u8>) {
        self.root.write(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_drift_stream, NO_DRIFT};

    fn numeric3() -> Arc<[FeatureKind]> {
        vec![FeatureKind::Numeric; 3].into()
    }

    #[test]
    fn bound_trivial_and_scaling() {
        assert_eq!(hoeffding_bound(1.0f64, 1.0, 100.0).unwrap(), 0.0);
        let e1 = hoeffding_bound(1.0f64, 0.05, 1000.0).unwrap();
        // 50-digit reference evaluation
        assert!((e1 - 0.038_702_275_602_049_494).abs() < 1e-15, "{e1}");
        let e2 = hoeffding_bound(2.0f64, 0.05, 1000.0).unwrap();
        assert_eq!(e2, 2.0 * e1);
        assert!(hoeffding_bound(1.0f64, 0.05, 0.0).is_err());
        assert!(hoeffding_bound(0.0f64, 0.05, 1.0).is_err());
        assert!(hoeffding_bound(1.0f64, 0.0, 1.0).is_err());
    }

    #[test]
    fn fresh_tree_votes_zero_and_single_update() {
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        assert_eq!(t.predict_values(&[0.1, 0.2, 0.3]), vec![0.0, 0.0]);
        t.train_values(&[0.1, 0.2, 0.3], 0, 1.0).unwrap();
        let Node::Leaf(leaf) = t.root() else { panic!() };
        assert_eq!(leaf.class_counts(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_weight_is_a_no_op() {
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        for inst in synthetic_drift_stream::<f64>(2, NO_DRIFT).take(500) {
            t.train(&inst, 1.0).unwrap();
        }
        let before = t.serialize();
        t.train_values(&[0.5, 0.5, 0.5], 1, 0.0).unwrap();
        assert_eq!(before, t.serialize());
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        assert!(t.train_values(&[0.1, 0.2], 0, 1.0).is_err());
        assert!(t.train_values(&[0.1, 0.2, 0.3], 2, 1.0).is_err());
        let mut nominal = HoeffdingTree::<f64>::new(vec![FeatureKind::Nominal(2)], 2, HtConfig::default());
        assert!(nominal.train_values(&[2.0], 0, 1.0).is_err());
    }

    #[test]
    fn majority_votes_pass_counts_through() {
        let config = HtConfig {
            leaf_predictor: LeafPredictor::MajorityClass,
            ..HtConfig::default()
        };
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, config);
        for c in [0, 0, 0, 1] {
            t.train_values(&[0.1, 0.2, 0.3], c, 1.0).unwrap();
        }
        assert_eq!(t.predict_values(&[0.9, 0.9, 0.9]), vec![3.0, 1.0]);
    }

    #[test]
    fn pure_leaf_never_splits() {
        let kinds: Arc<[FeatureKind]> = numeric3();
        let mut leaf = Leaf::<f64>::new(&kinds, vec![0, 1, 2], vec![0.0, 0.0]);
        for i in 0..1000 {
            let x = i as f64 / 1000.0;
            leaf.learn(&[x, 1.0 - x, 0.5], 1, 1.0, LeafPredictor::MajorityClass);
        }
        assert_eq!(leaf.attempt_split(&HtConfig::default()), SplitDecision::NoSplit);
    }

    #[test]
    fn separating_binary_attribute_wins() {
        // class equals feature 1; feature 0 is constant noise
        let kinds: Arc<[FeatureKind]> = vec![FeatureKind::Nominal(2), FeatureKind::Nominal(2)].into();
        let mut leaf = Leaf::<f64>::new(&kinds, vec![0, 1], vec![0.0, 0.0]);
        for i in 0..500 {
            let c = i % 2;
            leaf.learn(&[0.0, c as f64], c, 1.0, LeafPredictor::MajorityClass);
        }
        match leaf.attempt_split(&HtConfig::default()) {
            SplitDecision::Split { feature, merit, branches, .. } => {
                assert_eq!(feature, 1);
                assert!((merit - 1.0).abs() < 1e-12);
                assert_eq!(branches, vec![vec![250.0, 0.0], vec![0.0, 250.0]]);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn tie_rule_splits_on_lowest_index() {
        // two identical informative-but-noisy attributes; G1 == G2, so only the tie rule fires
        let kinds: Arc<[FeatureKind]> = vec![FeatureKind::Nominal(2), FeatureKind::Nominal(2)].into();
        let mut leaf = Leaf::<f64>::new(&kinds, vec![0, 1], vec![0.0, 0.0]);
        let config = HtConfig::default();
        for i in 0..20_000 {
            let v = i % 2;
            let c = if i % 10 < 7 { v } else { 1 - v };
            leaf.learn(&[v as f64, v as f64], c, 1.0, LeafPredictor::MajorityClass);
        }
        let eps = hoeffding_bound(1.0, config.split_confidence, 20_000.0).unwrap();
        assert!(eps < config.tie_threshold);
        match leaf.attempt_split(&config) {
            SplitDecision::Split { feature, .. } => assert_eq!(feature, 0),
            other => panic!("expected tie split, got {other:?}"),
        }
        // with too little evidence the same statistics do not split
        let mut small = Leaf::<f64>::new(&kinds, vec![0, 1], vec![0.0, 0.0]);
        for i in 0..200 {
            let v = i % 2;
            let c = if i % 10 < 7 { v } else { 1 - v };
            small.learn(&[v as f64, v as f64], c, 1.0, LeafPredictor::MajorityClass);
        }
        assert_eq!(small.attempt_split(&config), SplitDecision::NoSplit);
    }

    #[test]
    fn split_children_inherit_parent_mass() {
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        let mut total = 0.0;
        for (i, inst) in synthetic_drift_stream::<f64>(5, NO_DRIFT).take(20_000).enumerate() {
            let w = (i % 3) as f64;
            total += w;
            t.train(&inst, w).unwrap();
        }
        assert!(t.split_node_count() > 1);
        assert!((t.leaf_mass() - total).abs() < 1e-9 * total);
    }

    #[test]
    fn hand_off_sums_to_parent_counts() {
        let kinds: Arc<[FeatureKind]> = vec![FeatureKind::Numeric].into();
        // 30 units of class 0 and 10 of class 1 inherited without observer statistics
        let mut leaf = Leaf::<f64>::new(&kinds, vec![0], vec![30.0, 10.0]);
        for i in 0..400 {
            let x = i as f64 / 400.0;
            leaf.learn(&[x], usize::from(x > 0.5), 1.0, LeafPredictor::MajorityClass);
        }
        match leaf.attempt_split(&HtConfig::default()) {
            SplitDecision::Split { branches, .. } => {
                for c in 0..2 {
                    let s: f64 = branches.iter().map(|b| b[c]).sum();
                    assert!((s - leaf.class_counts()[c]).abs() < 1e-9);
                }
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn learns_linear_threshold_concept() {
        let mut t = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        let stream: Vec<Instance<f64>> = synthetic_drift_stream(42, NO_DRIFT).take(11_000).collect();
        for inst in &stream[..10_000] {
            t.train(inst, 1.0).unwrap();
        }
        let correct = stream[10_000..]
            .iter()
            .filter(|i| argmax(&t.predict(i)) == i.class_index)
            .count();
        assert!(correct as f64 / 1000.0 >= 0.95, "accuracy {}", correct as f64 / 1000.0);
    }

    #[test]
    fn prediction_is_pure_and_training_deterministic() {
        let stream: Vec<Instance<f64>> = synthetic_drift_stream(9, NO_DRIFT).take(3000).collect();
        let mut a = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        let mut b = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        for inst in &stream {
            a.train(inst, 1.0).unwrap();
            b.train(inst, 1.0).unwrap();
        }
        let bytes = a.serialize();
        assert_eq!(bytes, b.serialize());
        for inst in stream.iter().take(1000) {
            let _ = a.predict(inst);
        }
        assert_eq!(bytes, a.serialize());
    }

    #[test]
    fn asht_resets_when_budget_exceeded() {
        let config = AshtConfig {
            base: HtConfig::default(),
            max_split_nodes: 1,
        };
        let mut t = HoeffdingTree::<f64>::asht(numeric3(), 2, config);
        let mut max_seen = 0;
        let mut reset_seen = false;
        for inst in synthetic_drift_stream::<f64>(5, NO_DRIFT).take(30_000) {
            let before = t.split_node_count();
            t.train(&inst, 1.0).unwrap();
            max_seen = max_seen.max(t.split_node_count());
            if before == 1 && t.budget_resets() > 0 && !reset_seen {
                reset_seen = true;
                assert_eq!(t.split_node_count(), 0);
                assert_eq!(t.leaf_count(), 1);
            }
        }
        assert!(reset_seen);
        assert!(max_seen <= 1);
    }

    #[test]
    fn asht_with_huge_budget_matches_plain_tree() {
        let config = AshtConfig {
            base: HtConfig::default(),
            max_split_nodes: 1 << 30,
        };
        let mut asht = HoeffdingTree::<f64>::asht(numeric3(), 2, config);
        let mut plain = HoeffdingTree::<f64>::new(numeric3(), 2, HtConfig::default());
        for inst in synthetic_drift_stream::<f64>(6, NO_DRIFT).take(10_000) {
            asht.train(&inst, 1.0).unwrap();
            plain.train(&inst, 1.0).unwrap();
        }
        assert_eq!(asht.serialize(), plain.serialize());
    }

    #[test]
    fn budget_ladder() {
        assert_eq!(asht_budget(0), 2);
        assert_eq!(asht_budget(3), 16);
        assert_eq!(asht_budget(9), 1024);
        assert_eq!(asht_budget(40), 1024);
    }

    #[test]
    fn leaf_subspace_limits_observers() {
        let kinds: Arc<[FeatureKind]> = vec![FeatureKind::Numeric; 12].into();
        let t = HoeffdingTree::<f64>::new(kinds, 2, HtConfig::default()).with_leaf_subspace(4, 3);
        assert_eq!(t.observed_features().len(), 4);
    }

    #[test]
    fn f32_tree_learns_too() {
        let mut t = HoeffdingTree::<f32>::new(numeric3(), 2, HtConfig::default());
        let stream: Vec<Instance<f32>> = synthetic_drift_stream(42, NO_DRIFT).take(6000).collect();
        for inst in &stream[..5000] {
            t.train(inst, 1.0).unwrap();
        }
        let correct = stream[5000..]
            .iter()
            .filter(|i| argmax(&t.predict(i)) == i.class_index)
            .count();
        assert!(correct > 900, "{correct}");
    }
}
