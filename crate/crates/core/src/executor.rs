//! Sequential, per-instance parallel and mini-batch execution of an ensemble over a stream.

use std::fmt;
use std::str::FromStr;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::clock::{now_ns, process_cpu_time};
use crate::data::{Instance, StreamRecord};
use crate::ensemble::{accumulate_votes, Ensemble};
use crate::error::{Error, Result};
use crate::num::{argmax, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    Sequential,
    ParallelInstance,
    MiniBatch,
}

impl ExecutionMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecutionMode::Sequential => "sequential",
            ExecutionMode::ParallelInstance => "parallel_instance",
            ExecutionMode::MiniBatch => "mini_batch",
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sequential" | "seq" => Ok(ExecutionMode::Sequential),
            "parallel_instance" | "parallel" => Ok(ExecutionMode::ParallelInstance),
            "mini_batch" | "minibatch" => Ok(ExecutionMode::MiniBatch),
            _ => Err(Error::Config(format!("unknown executor `{s}`"))),
        }
    }
}

/// Which learner touches the access trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceScope {
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorConfig {
    pub mode: ExecutionMode,
    pub batch_size: usize,
    pub num_threads: usize,
    pub timeout: Option<Duration>,
    /// Classify a mini-batch in parallel across learners. `None` means parallel when m >= 8.
    pub parallel_classify: Option<bool>,
    pub trace: Option<TraceScope>,
}

impl ExecutorConfig {
    pub fn sequential() -> Self {
        Self {
            mode: ExecutionMode::Sequential,
            batch_size: 1,
            num_threads: 1,
            timeout: None,
            parallel_classify: None,
            trace: None,
        }
    }

    pub fn parallel_instance(num_threads: usize) -> Self {
        Self {
            mode: ExecutionMode::ParallelInstance,
            num_threads,
            ..Self::sequential()
        }
    }

    pub fn mini_batch(batch_size: usize, num_threads: usize) -> Self {
        Self {
            mode: ExecutionMode::MiniBatch,
            batch_size,
            num_threads,
            ..Self::sequential()
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn with_trace(mut self, scope: TraceScope) -> Self {
        self.trace = Some(scope);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.num_threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }

    /// Short label used in results: Seq, B1 or B{L}.
    pub fn label(&self) -> String {
        match self.mode {
            ExecutionMode::Sequential => "Seq".into(),
            ExecutionMode::ParallelInstance => "B1".into(),
            ExecutionMode::MiniBatch => format!("B{}", self.batch_size),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionEvent {
    pub seq: u64,
    pub predicted: usize,
    pub true_class: usize,
    pub emitted_at: u64,
    pub sent_at: u64,
    pub received_at: u64,
}

impl PredictionEvent {
    pub fn correct(&self) -> bool {
        self.predicted == self.true_class
    }

    /// Emission minus send time, ns; zero if the clocks disagree.
    pub fn delay_ns(&self) -> u64 {
        self.emitted_at.saturating_sub(self.sent_at)
    }
}

/// Receives prediction events, always from the serial section of a run.
pub trait PredictionSink {
    fn emit(&mut self, event: PredictionEvent);
}

impl PredictionSink for Vec<PredictionEvent> {
    fn emit(&mut self, event: PredictionEvent) {
        self.push(event);
    }
}

impl<T: PredictionSink + ?Sized> PredictionSink for &mut T {
    fn emit(&mut self, event: PredictionEvent) {
        (**self).emit(event);
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl PredictionSink for NullSink {
    fn emit(&mut self, _event: PredictionEvent) {}
}

pub enum Fetch<S> {
    Record(StreamRecord<S>),
    /// The deadline passed before anything arrived.
    Idle,
    End,
}

/// Input side of a run. `fetch` blocks until a record arrives, the stream ends or the
/// deadline passes; it must not spin.
pub trait RecordSource<S> {
    fn fetch(&mut self, deadline: Option<Instant>) -> Result<Fetch<S>>;
}

impl<S, T: RecordSource<S> + ?Sized> RecordSource<S> for &mut T {
    fn fetch(&mut self, deadline: Option<Instant>) -> Result<Fetch<S>> {
        (**self).fetch(deadline)
    }
}

/// Adapts an in-memory iterator of records.
pub struct IterSource<I>(pub I);

impl<S, I> RecordSource<S> for IterSource<I>
where
    I: Iterator<Item = Result<StreamRecord<S>>>,
{
    fn fetch(&mut self, _deadline: Option<Instant>) -> Result<Fetch<S>> {
        match self.0.next() {
            Some(r) => r.map(Fetch::Record),
            None => Ok(Fetch::End),
        }
    }
}

/// Numbers instances from 0 and stamps them as locally read.
pub fn from_instances<S, I>(instances: I) -> impl RecordSource<S>
where
    S: Scalar,
    I: IntoIterator<Item = Instance<S>>,
{
    from_results(instances.into_iter().map(Ok))
}

/// Like [`from_instances`] for fallible readers such as the ARFF and CSV parsers.
pub fn from_results<S, I>(instances: I) -> impl RecordSource<S>
where
    S: Scalar,
    I: IntoIterator<Item = Result<Instance<S>>>,
{
    IterSource(
        instances
            .into_iter()
            .zip(0u64..)
            .map(|(r, seq)| r.map(|inst| StreamRecord::local(seq, inst))),
    )
}

/// Channel fed by a reader thread; a disconnected sender ends the stream.
impl<S> RecordSource<S> for Receiver<Result<StreamRecord<S>>> {
    fn fetch(&mut self, deadline: Option<Instant>) -> Result<Fetch<S>> {
        let item = match deadline {
            None => match self.recv() {
                Ok(item) => item,
                Err(_) => return Ok(Fetch::End),
            },
            Some(d) => match self.recv_timeout(d.saturating_duration_since(Instant::now())) {
                Ok(item) => item,
                Err(RecvTimeoutError::Timeout) => return Ok(Fetch::Idle),
                Err(RecvTimeoutError::Disconnected) => return Ok(Fetch::End),
            },
        };
        item.map(Fetch::Record)
    }
}

/// Process CPU time spent in each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseCpu {
    pub classify: Duration,
    pub train: Duration,
    /// Vote compilation, event emission and global replacement.
    pub serial: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub instances: u64,
    pub wall: Duration,
    pub cpu: PhaseCpu,
    /// Wall time spent blocked on input.
    pub idle: Duration,
    pub digest: String,
    pub resets: u64,
    pub timed_out: bool,
    pub minibatch_calls: u64,
    pub trainers_created: u64,
    pub trace: Option<Vec<usize>>,
}

/// Persistent per-learner task state, created once per run and reused for every instance.
struct Trainer<S> {
    votes: Vec<Vec<S>>,
}

struct Run<'a, S, K> {
    config: &'a ExecutorConfig,
    sink: K,
    pool: Option<Arc<ThreadPool>>,
    trainers: Vec<Trainer<S>>,
    trace: Option<Vec<usize>>,
    cpu: PhaseCpu,
    idle: Duration,
    instances: u64,
    minibatch_calls: u64,
    trainers_created: u64,
}

impl<'a, S: Scalar, K: PredictionSink> Run<'a, S, K> {
    fn touch(&mut self, scope: TraceScope, ids: impl Iterator<Item = usize>) {
        if let Some(trace) = self.trace.as_mut() {
            if scope == TraceScope::Train || self.config.trace == Some(TraceScope::All) {
                trace.extend(ids);
            }
        }
    }

    fn emit(&mut self, record: &StreamRecord<S>, predicted: usize) {
        self.sink.emit(PredictionEvent {
            seq: record.seq,
            predicted,
            true_class: record.instance.class_index,
            emitted_at: now_ns(),
            sent_at: record.sent_at,
            received_at: record.received_at,
        });
        self.instances += 1;
    }

    fn sequential_step(&mut self, ensemble: &mut Ensemble<S>, record: &StreamRecord<S>) -> Result<()> {
        let m = ensemble.size();
        let t0 = process_cpu_time();
        let prediction = ensemble.predict(&record.instance);
        self.touch(TraceScope::All, 0..m);
        let t1 = process_cpu_time();
        self.emit(record, prediction.class);
        let t2 = process_cpu_time();
        for l in ensemble.learners_mut() {
            l.train(&record.instance)?;
        }
        self.touch(TraceScope::Train, 0..m);
        let t3 = process_cpu_time();
        ensemble.apply_global_replacement();
        let t4 = process_cpu_time();
        self.cpu.classify += t1 - t0;
        self.cpu.train += t3 - t2;
        self.cpu.serial += (t2 - t1) + (t4 - t3);
        Ok(())
    }

    fn parallel_step(&mut self, ensemble: &mut Ensemble<S>, record: &StreamRecord<S>) -> Result<()> {
        let m = ensemble.size();
        let t0 = process_cpu_time();
        let prediction = ensemble.predict(&record.instance);
        self.touch(TraceScope::All, 0..m);
        let t1 = process_cpu_time();
        self.emit(record, prediction.class);
        let t2 = process_cpu_time();
        let pool = self.pool.clone().expect("thread pool");
        let instance = &record.instance;
        pool.install(|| {
            ensemble
                .learners_mut()
                .par_iter_mut()
                .try_for_each(|l| l.train(instance).map(drop))
        })?;
        self.touch(TraceScope::Train, 0..m);
        let t3 = process_cpu_time();
        ensemble.apply_global_replacement();
        let t4 = process_cpu_time();
        self.cpu.classify += t1 - t0;
        self.cpu.train += t3 - t2;
        self.cpu.serial += (t2 - t1) + (t4 - t3);
        Ok(())
    }

    fn process_minibatch(&mut self, ensemble: &mut Ensemble<S>, batch: &mut Vec<StreamRecord<S>>) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        self.minibatch_calls += 1;
        let m = ensemble.size();
        let b = batch.len();
        let parallel = self.config.parallel_classify.unwrap_or(m >= 8);
        let pool = self.pool.clone().expect("thread pool");

        // phase 1: every trainer classifies the whole batch against its model as of batch start
        let t0 = process_cpu_time();
        let classify = |(l, t): (&mut crate::ensemble::Learner<S>, &mut Trainer<S>)| {
            t.votes.clear();
            t.votes.extend(batch.iter().map(|r| l.votes(&r.instance)));
        };
        if parallel {
            pool.install(|| {
                ensemble
                    .learners_mut()
                    .par_iter_mut()
                    .zip(self.trainers.par_iter_mut())
                    .for_each(classify)
            });
        } else {
            ensemble
                .learners_mut()
                .iter_mut()
                .zip(self.trainers.iter_mut())
                .for_each(classify);
        }
        for i in 0..m {
            self.touch(TraceScope::All, std::iter::repeat(i).take(b));
        }
        let t1 = process_cpu_time();

        // phase 2: compile votes in instance order
        let num_classes = ensemble.num_classes();
        for (j, record) in batch.iter().enumerate() {
            let mut votes = vec![S::zero(); num_classes];
            for t in &self.trainers {
                accumulate_votes(&mut votes, &t.votes[j]);
            }
            self.emit(record, argmax(&votes));
        }
        let t2 = process_cpu_time();

        // phase 3: each trainer runs through the batch, learners in parallel
        let records: &[StreamRecord<S>] = batch;
        pool.install(|| {
            ensemble.learners_mut().par_iter_mut().try_for_each(|l| {
                records.iter().try_for_each(|r| l.train(&r.instance).map(drop))
            })
        })?;
        for i in 0..m {
            self.touch(TraceScope::Train, std::iter::repeat(i).take(b));
        }
        let t3 = process_cpu_time();

        // phase 4
        ensemble.apply_global_replacement();
        batch.clear();
        let t4 = process_cpu_time();
        self.cpu.classify += t1 - t0;
        self.cpu.train += t3 - t2;
        self.cpu.serial += (t2 - t1) + (t4 - t3);
        Ok(())
    }
}

/// Runs `ensemble` prequentially over `source` until the stream ends or the timeout passes.
pub fn run<S, R, K>(ensemble: &mut Ensemble<S>, mut source: R, sink: K, config: &ExecutorConfig) -> Result<RunSummary>
where
    S: Scalar,
    R: RecordSource<S>,
    K: PredictionSink,
{
    config.validate()?;
    let start = Instant::now();
    let deadline = config.timeout.map(|t| start + t);
    let m = ensemble.size();
    let mut state = Run {
        config,
        sink,
        pool: None,
        trainers: Vec::new(),
        trace: config.trace.map(|_| Vec::new()),
        cpu: PhaseCpu::default(),
        idle: Duration::ZERO,
        instances: 0,
        minibatch_calls: 0,
        trainers_created: 0,
    };
    if config.mode != ExecutionMode::Sequential {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.num_threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        state.pool = Some(Arc::new(pool));
        state.trainers = (0..m).map(|_| Trainer { votes: Vec::new() }).collect();
        state.trainers_created = m as u64;
    }
    let capacity = if config.mode == ExecutionMode::MiniBatch {
        config.batch_size
    } else {
        1
    };
    let mut batch: Vec<StreamRecord<S>> = Vec::with_capacity(capacity);
    let mut timed_out = false;
    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
        let waiting = Instant::now();
        let fetched = source.fetch(deadline)?;
        state.idle += waiting.elapsed();
        let record = match fetched {
            Fetch::Record(r) => r,
            Fetch::Idle => {
                timed_out = true;
                break;
            }
            Fetch::End => break,
        };
        ensemble.check(&record.instance)?;
        match config.mode {
            ExecutionMode::Sequential => state.sequential_step(ensemble, &record)?,
            ExecutionMode::ParallelInstance => state.parallel_step(ensemble, &record)?,
            ExecutionMode::MiniBatch => {
                batch.push(record);
                if batch.len() == config.batch_size {
                    state.process_minibatch(ensemble, &mut batch)?;
                }
            }
        }
    }
    // a timed-out partial batch is treated as complete, as is the tail at stream end
    state.process_minibatch(ensemble, &mut batch)?;
    Ok(RunSummary {
        instances: state.instances,
        wall: start.elapsed(),
        cpu: state.cpu,
        idle: state.idle,
        digest: ensemble.digest(),
        resets: ensemble.total_resets(),
        timed_out,
        minibatch_calls: state.minibatch_calls,
        trainers_created: state.trainers_created,
        trace: state.trace,
    })
}

pub fn run_sequential<S: Scalar>(
    ensemble: &mut Ensemble<S>,
    source: impl RecordSource<S>,
    sink: impl PredictionSink,
) -> Result<RunSummary> {
    run(ensemble, source, sink, &ExecutorConfig::sequential())
}

pub fn run_parallel_instance<S: Scalar>(
    ensemble: &mut Ensemble<S>,
    source: impl RecordSource<S>,
    sink: impl PredictionSink,
    num_threads: usize,
) -> Result<RunSummary> {
    run(ensemble, source, sink, &ExecutorConfig::parallel_instance(num_threads))
}

pub fn run_minibatch<S: Scalar>(
    ensemble: &mut Ensemble<S>,
    source: impl RecordSource<S>,
    sink: impl PredictionSink,
    batch_size: usize,
    num_threads: usize,
) -> Result<RunSummary> {
    run(ensemble, source, sink, &ExecutorConfig::mini_batch(batch_size, num_threads))
}
