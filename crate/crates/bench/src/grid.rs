use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use streambag::ensemble::Algorithm;
use streambag::netstream::WireDataset;

use crate::config::{parse_executor_label, usage, RunSpec, SensorKind, Transport};
use crate::dataset::DatasetSource;
use crate::results::{append_rows, existing_ids};
use crate::run;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub algorithms: Vec<Algorithm>,
    pub datasets: Vec<DatasetSource>,
    /// Executor labels: Seq, B1, B50, ...
    pub executors: Vec<String>,
    pub loads: Vec<f64>,
    pub m: usize,
    pub threads: usize,
    pub repetitions: usize,
    pub duration: Duration,
    pub warmup: Duration,
    pub seed: u64,
    pub sensor: SensorKind,
    /// Offline grids read datasets directly and ignore loads for pacing.
    pub offline: bool,
    pub output: PathBuf,
}

impl Default for GridSpec {
    fn default() -> Self {
        let run = RunSpec::default();
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            datasets: Vec::new(),
            executors: ["Seq", "B1", "B50", "B250", "B500"].map(String::from).to_vec(),
            loads: vec![0.1, 0.5, 0.9],
            m: run.m,
            threads: run.threads,
            repetitions: 1,
            duration: run::DEFAULT_NETWORK_DURATION,
            warmup: run.warmup,
            seed: run.seed,
            sensor: SensorKind::Null,
            offline: false,
            output: PathBuf::from("results.csv"),
        }
    }
}

fn list<T>(key: &str, value: &str, f: impl Fn(&str) -> anyhow::Result<T>) -> anyhow::Result<Vec<T>> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<anyhow::Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(usage(format!("{key} must not be empty")));
    }
    Ok(items)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> anyhow::Result<T> {
    value
        .parse()
        .map_err(|_| usage(format!("{key}: cannot parse `{value}`")))
}

impl GridSpec {
    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        match key {
            "algorithms" => self.algorithms = list(key, value, |s| s.parse().map_err(|e| usage(format!("{e}"))))?,
            "datasets" => self.datasets = list(key, value, |s| s.parse())?,
            "executors" => {
                self.executors = list(key, value, |s| parse_executor_label(s).map(|_| s.to_string()))?;
            }
            "loads" => self.loads = list(key, value, |s| num(key, s))?,
            "m" => self.m = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "repetitions" | "reps" => self.repetitions = num(key, value)?,
            "duration" => self.duration = Duration::from_secs_f64(num(key, value)?),
            "warmup" => self.warmup = Duration::from_secs_f64(num(key, value)?),
            "seed" => self.seed = num(key, value)?,
            "sensor" => self.sensor = value.parse()?,
            "mode" => {
                self.offline = match value {
                    "offline" => true,
                    "network" | "loopback" => false,
                    _ => return Err(usage(format!("mode must be offline or network, not `{value}`"))),
                }
            }
            "output" => self.output = PathBuf::from(value),
            _ => return Err(usage(format!("unknown grid setting `{key}`"))),
        }
        Ok(())
    }

    /// All run specs of the grid with their repetition index, in execution order.
    pub fn cells(&self) -> anyhow::Result<Vec<(RunSpec, usize)>> {
        if self.datasets.is_empty() || self.repetitions == 0 {
            return Err(usage("grid needs at least one dataset and one repetition"));
        }
        let mut cells = Vec::new();
        for dataset in &self.datasets {
            for &algorithm in &self.algorithms {
                for executor in &self.executors {
                    for &load in &self.loads {
                        for rep in 0..self.repetitions {
                            let mut spec = RunSpec {
                                algorithm,
                                m: self.m,
                                threads: self.threads,
                                dataset: Some(dataset.clone()),
                                rate_fraction: load,
                                seed: self.seed,
                                sensor: self.sensor,
                                warmup: self.warmup,
                                transport: if self.offline { Transport::Offline } else { Transport::Loopback },
                                duration: (!self.offline).then_some(self.duration),
                                ..RunSpec::default()
                            };
                            spec.set("executor", executor)?;
                            spec.validate()?;
                            cells.push((spec, rep));
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Default)]
pub struct GridOutcome {
    pub produced: usize,
    pub skipped: usize,
    pub failures: Vec<(String, String)>,
}

/// `grid`: runs every missing cell in order, appending one row per run. Capacity is calibrated
/// once per (dataset, algorithm, executor). A failing cell is reported and the grid continues.
pub fn cmd_grid(grid: &GridSpec) -> anyhow::Result<GridOutcome> {
    let cells = grid.cells()?;
    let done = existing_ids(&grid.output)?;
    let mut capacities: HashMap<(String, Algorithm, String), f64> = HashMap::new();
    let mut wires: HashMap<String, WireDataset> = HashMap::new();
    let mut outcome = GridOutcome::default();
    for (mut spec, rep) in cells {
        let id = spec.id(rep);
        if done.contains(&id) {
            outcome.skipped += 1;
            continue;
        }
        let result = (|| -> anyhow::Result<()> {
            if !grid.offline {
                let dataset = spec.dataset()?.clone();
                let key = (dataset.tag(), spec.algorithm, spec.executor_label());
                let capacity = match capacities.get(&key) {
                    Some(&c) => c,
                    None => {
                        if !wires.contains_key(&dataset.tag()) {
                            let (schema, rows) = dataset.load()?;
                            wires.insert(dataset.tag(), WireDataset::new(schema, &rows)?);
                        }
                        let c = run::calibrate(&spec, &wires[&dataset.tag()])?;
                        capacities.insert(key, c);
                        c
                    }
                };
                spec.capacity = Some(capacity);
            }
            let run = run::execute(&spec, rep)?;
            append_rows(&grid.output, &[run.row])
        })();
        match result {
            Ok(()) => outcome.produced += 1,
            Err(e) => {
                eprintln!("run {id} failed: {e:#}");
                outcome.failures.push((id, format!("{e:#}")));
            }
        }
    }
    Ok(outcome)
}
