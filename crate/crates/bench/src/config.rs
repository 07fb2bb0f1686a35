use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use streambag::ensemble::Algorithm;
use streambag::executor::{ExecutionMode, ExecutorConfig};

use crate::dataset::DatasetSource;

/// Bad flags, conflicting settings or missing inputs. The CLI exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        pairs.push((key.trim().replace('-', "_"), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_key_values(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_key_values(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorKind {
    Null,
    OsCounter,
    /// Constant power in watts.
    Synthetic(f64),
}

impl std::str::FromStr for SensorKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.split_once(':') {
            None if s == "null" => Ok(SensorKind::Null),
            None if s == "os_counter" => Ok(SensorKind::OsCounter),
            None if s == "synthetic" => Ok(SensorKind::Synthetic(4.0)),
            Some(("synthetic", w)) => w
                .parse()
                .ok()
                .filter(|w: &f64| *w >= 0.0)
                .map(SensorKind::Synthetic)
                .ok_or_else(|| usage(format!("bad synthetic power `{w}`"))),
            _ => Err(usage(format!("unknown sensor `{s}`"))),
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SensorKind::Null => f.write_str("null"),
            SensorKind::OsCounter => f.write_str("os_counter"),
            SensorKind::Synthetic(w) => write!(f, "synthetic:{w}"),
        }
    }
}

/// Where instances come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Transport {
    /// Read the dataset directly.
    Offline,
    /// Accept one generator connection on this address.
    Listen(SocketAddr),
    /// Run the generator in-process over loopback at `rate_fraction` of capacity.
    Loopback,
}

/// Parses `Seq`, `B1` or `B<L>`; `B1` is the per-instance parallel executor.
pub fn parse_executor_label(label: &str) -> anyhow::Result<(ExecutionMode, usize)> {
    if label.eq_ignore_ascii_case("seq") || label == "sequential" {
        return Ok((ExecutionMode::Sequential, 1));
    }
    match label.strip_prefix(['B', 'b']).map(str::parse::<usize>) {
        Some(Ok(1)) => Ok((ExecutionMode::ParallelInstance, 1)),
        Some(Ok(l)) if l > 1 => Ok((ExecutionMode::MiniBatch, l)),
        _ => Err(usage(format!("bad executor label `{label}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: Option<String>,
    pub algorithm: Algorithm,
    pub m: usize,
    pub mode: ExecutionMode,
    pub batch_size: usize,
    pub threads: usize,
    pub dataset: Option<DatasetSource>,
    pub rate_fraction: f64,
    /// Generator duration in network modes, timeout offline.
    pub duration: Option<Duration>,
    /// Stop after this many instances (offline) or frames (loopback).
    pub instances: Option<u64>,
    pub seed: u64,
    pub sensor: SensorKind,
    pub output: Option<PathBuf>,
    pub transport: Transport,
    pub capacity: Option<f64>,
    pub warmup: Duration,
    pub parallel_classify: Option<bool>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            run_id: None,
            algorithm: Algorithm::OzaBag,
            m: 10,
            mode: ExecutionMode::Sequential,
            batch_size: 1,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            dataset: None,
            rate_fraction: 1.0,
            duration: None,
            instances: None,
            seed: 1,
            sensor: SensorKind::Null,
            output: None,
            transport: Transport::Offline,
            capacity: None,
            warmup: Duration::from_secs(30),
            parallel_classify: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value
        .parse()
        .map_err(|_| usage(format!("{key}: cannot parse `{value}`")))
}

fn seconds(key: &str, value: &str) -> anyhow::Result<Duration> {
    let s: f64 = parse(key, value)?;
    Duration::try_from_secs_f64(s).map_err(|_| usage(format!("{key}: bad duration `{value}`")))
}

impl RunSpec {
    /// Applies one setting by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        match key {
            "run_id" => self.run_id = Some(value.to_string()),
            "algorithm" => self.algorithm = value.parse().map_err(|e| usage(format!("{e}")))?,
            "m" | "ensemble_size" => self.m = parse(key, value)?,
            "executor" => {
                let (mode, batch) = match value.parse::<ExecutionMode>() {
                    Ok(ExecutionMode::MiniBatch) => (ExecutionMode::MiniBatch, self.batch_size),
                    Ok(mode) => (mode, 1),
                    Err(_) => parse_executor_label(value)?,
                };
                self.mode = mode;
                self.batch_size = batch;
            }
            "batch_size" | "l_mb" => self.batch_size = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "dataset" => self.dataset = Some(value.parse()?),
            "rate_fraction" => self.rate_fraction = parse(key, value)?,
            "duration" => self.duration = Some(seconds(key, value)?),
            "instances" => self.instances = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "sensor" => self.sensor = value.parse()?,
            "output" => self.output = Some(PathBuf::from(value)),
            "listen" => self.transport = Transport::Listen(parse(key, value)?),
            "loopback" => {
                if parse::<bool>(key, value)? {
                    self.transport = Transport::Loopback;
                }
            }
            "capacity" => self.capacity = Some(parse(key, value)?),
            "warmup" => self.warmup = seconds(key, value)?,
            "parallel_classify" => self.parallel_classify = Some(parse(key, value)?),
            _ => return Err(usage(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    pub fn apply_all(&mut self, pairs: &[(String, String)]) -> anyhow::Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn executor_config(&self) -> ExecutorConfig {
        let mut config = match self.mode {
            ExecutionMode::Sequential => ExecutorConfig::sequential(),
            ExecutionMode::ParallelInstance => ExecutorConfig::parallel_instance(self.threads),
            ExecutionMode::MiniBatch => ExecutorConfig::mini_batch(self.batch_size, self.threads),
        };
        config.parallel_classify = self.parallel_classify;
        if self.transport == Transport::Offline {
            config.timeout = self.duration;
        }
        config
    }

    pub fn executor_label(&self) -> String {
        self.executor_config().label()
    }

    pub fn dataset(&self) -> anyhow::Result<&DatasetSource> {
        self.dataset.as_ref().ok_or_else(|| usage("no dataset given"))
    }

    /// Checks settings that can be judged before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.m == 0 {
            return Err(usage("ensemble size must be at least 1"));
        }
        if self.threads == 0 || self.batch_size == 0 {
            return Err(usage("threads and batch size must be at least 1"));
        }
        if self.mode != ExecutionMode::MiniBatch && self.batch_size != 1 {
            return Err(usage(format!("batch size {} needs the mini_batch executor", self.batch_size)));
        }
        if !(self.rate_fraction > 0.0 && self.rate_fraction <= 1.0) {
            return Err(usage(format!("rate fraction {} outside (0, 1]", self.rate_fraction)));
        }
        if let Some(c) = self.capacity {
            if !(c > 0.0) {
                return Err(usage("capacity must be positive"));
            }
        }
        if matches!(self.transport, Transport::Offline | Transport::Loopback) {
            self.dataset()?.check()?;
        }
        Ok(())
    }

    /// Identifier of a run, stable across reruns of the same cell.
    pub fn id(&self, rep: usize) -> String {
        if let Some(id) = &self.run_id {
            return id.clone();
        }
        let dataset = self.dataset.as_ref().map_or("stream".to_string(), DatasetSource::tag);
        format!(
            "{}-m{}-{}-{}-{}-r{}",
            self.algorithm,
            self.m,
            self.executor_label(),
            dataset,
            self.rate_fraction,
            rep
        )
    }
}
