use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use anyhow::Context;
use streambag::ensemble::EnsembleConfig;
use streambag::executor::{from_results, run, ExecutorConfig, RunSummary};
use streambag::metrics::{
    energy_joules, jpi, throughput, EnergySample, EnergySensor, NullSensor, OsCounterSensor, ResultsRow,
    RunMetrics, SensorRecorder, SyntheticSensor, DEFAULT_SENSOR_PERIOD,
};
use streambag::netstream::{calibrate_capacity, connect, generate_load, receive_stream, LoadLimit, RateConfig, WireDataset};
use streambag::Ensemble;

use crate::config::{RunSpec, SensorKind, Transport};
use crate::results::append_rows;

/// Benchmark runs default to three minutes of load.
pub const DEFAULT_NETWORK_DURATION: Duration = Duration::from_secs(180);

pub struct RunOutcome {
    pub row: ResultsRow,
    pub summary: RunSummary,
    pub samples: Vec<EnergySample>,
}

pub fn make_sensor(kind: SensorKind) -> anyhow::Result<Box<dyn EnergySensor>> {
    Ok(match kind {
        SensorKind::Null => Box::new(NullSensor::new()),
        SensorKind::OsCounter => Box::new(OsCounterSensor::new()?),
        SensorKind::Synthetic(watts) => Box::new(SyntheticSensor::constant(watts)?),
    })
}

/// Joules over `[0, seconds]` and joules per instance; JPI is NaN without instances.
pub fn account_energy(samples: &[EnergySample], seconds: f64, instances: u64) -> anyhow::Result<(f64, f64)> {
    let joules = energy_joules(samples, 0.0, seconds)?;
    let per_instance = jpi(joules, instances).unwrap_or(f64::NAN);
    Ok((joules, per_instance))
}

fn ensemble_for(spec: &RunSpec, schema: &streambag::data::Schema) -> anyhow::Result<Ensemble> {
    let config = EnsembleConfig::new(spec.algorithm, spec.m).with_seed(spec.seed);
    Ok(Ensemble::new(config, schema)?)
}

/// Consumes one connection with the spec's ensemble and executor.
fn process_connection(spec: &RunSpec, socket: TcpStream, config: &ExecutorConfig, metrics: &mut RunMetrics) -> anyhow::Result<RunSummary> {
    socket.set_nodelay(true)?;
    let incoming = receive_stream::<f64, _>(socket, 4 * config.batch_size)?;
    let mut ensemble = ensemble_for(spec, &incoming.schema)?;
    let summary = run(&mut ensemble, incoming.records, &mut *metrics, config)?;
    if !summary.timed_out {
        incoming
            .reader
            .join()
            .map_err(|_| anyhow::anyhow!("stream reader panicked"))??;
    }
    Ok(summary)
}

/// Runs `body` while the spec's sensor records, then builds the results row.
fn measured(
    spec: &RunSpec,
    rep: usize,
    body: impl FnOnce(&mut RunMetrics) -> anyhow::Result<RunSummary>,
    mut metrics: RunMetrics,
) -> anyhow::Result<RunOutcome> {
    let recorder = SensorRecorder::start(make_sensor(spec.sensor)?, DEFAULT_SENSOR_PERIOD);
    let result = body(&mut metrics);
    let samples = recorder.stop()?;
    let summary = result?;
    let wall = summary.wall.as_secs_f64();
    let (joules, per_instance) = account_energy(&samples, wall, summary.instances)?;
    let ips = throughput(summary.instances, summary.wall).unwrap_or(0.0);
    let dataset = spec.dataset.as_ref().map_or_else(|| "stream".into(), |d| d.tag());
    let ms = |ns: f64| ns / 1e6;
    let row = ResultsRow {
        run_id: spec.id(rep),
        dataset,
        algorithm: spec.algorithm.to_string(),
        m: spec.m,
        executor: spec.executor_label(),
        batch_size: spec.batch_size,
        threads: spec.threads,
        rate_fraction: spec.rate_fraction,
        instances: summary.instances,
        accuracy: metrics.accuracy.accuracy(),
        wall_seconds: wall,
        ips,
        delay_mean_ms: ms(metrics.delays.mean_ns()),
        delay_p50_ms: ms(metrics.delays.p50_ns() as f64),
        delay_p95_ms: ms(metrics.delays.p95_ns() as f64),
        delay_basis: if metrics.receiver_side { "received" } else { "sent" }.into(),
        joules,
        jpi: per_instance,
        resets: summary.resets,
        digest: summary.digest.clone(),
    };
    Ok(RunOutcome { row, summary, samples })
}

/// Reads the dataset straight into the executor.
pub fn run_offline(spec: &RunSpec, rep: usize) -> anyhow::Result<RunOutcome> {
    let (schema, records) = spec.dataset()?.open()?;
    let limit = spec.instances.unwrap_or(u64::MAX) as usize;
    let config = spec.executor_config();
    let mut ensemble = ensemble_for(spec, &schema)?;
    measured(
        spec,
        rep,
        |metrics| Ok(run(&mut ensemble, from_results(records.take(limit)), metrics, &config)?),
        RunMetrics::default(),
    )
}

/// Serves one generator connection on `addr`.
pub fn run_listen(spec: &RunSpec, addr: SocketAddr, rep: usize) -> anyhow::Result<RunOutcome> {
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    let (socket, peer) = listener.accept()?;
    let mut config = spec.executor_config();
    config.timeout = spec.duration;
    let metrics = if peer.ip().is_loopback() {
        RunMetrics::default()
    } else {
        RunMetrics::receiver_side()
    };
    measured(spec, rep, |metrics| process_connection(spec, socket, &config, metrics), metrics)
}

/// Measures how fast the spec's processor absorbs an unthrottled stream over loopback.
pub fn calibrate(spec: &RunSpec, wire: &WireDataset) -> anyhow::Result<f64> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let mut config = spec.executor_config();
    config.timeout = Some(spec.warmup);
    let processor = {
        let spec = spec.clone();
        thread::spawn(move || -> anyhow::Result<()> {
            let (socket, _) = listener.accept()?;
            process_connection(&spec, socket, &config, &mut RunMetrics::default()).map(drop)
        })
    };
    let capacity = calibrate_capacity(addr, wire, spec.warmup);
    processor
        .join()
        .map_err(|_| anyhow::anyhow!("calibration processor panicked"))??;
    Ok(capacity?)
}

/// Generator and processor in one process over loopback, paced at a fraction of capacity.
pub fn run_loopback(spec: &RunSpec, rep: usize) -> anyhow::Result<RunOutcome> {
    let (schema, rows) = spec.dataset()?.load()?;
    let wire = WireDataset::new(schema, &rows)?;
    let capacity = match spec.capacity {
        Some(c) => c,
        None => calibrate(spec, &wire)?,
    };
    let rate = RateConfig::new(spec.rate_fraction, capacity)?.rate();
    let limit = match spec.instances {
        Some(n) => LoadLimit::Count(n),
        None => LoadLimit::Duration(spec.duration.unwrap_or(DEFAULT_NETWORK_DURATION)),
    };
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let generator = thread::spawn(move || generate_load(connect(addr)?, &wire, Some(rate), limit));
    let (socket, _) = listener.accept()?;
    let mut config = spec.executor_config();
    config.timeout = None;
    let outcome = measured(spec, rep, |metrics| process_connection(spec, socket, &config, metrics), RunMetrics::default());
    generator
        .join()
        .map_err(|_| anyhow::anyhow!("load generator panicked"))??;
    outcome
}

pub fn execute(spec: &RunSpec, rep: usize) -> anyhow::Result<RunOutcome> {
    spec.validate()?;
    match spec.transport {
        Transport::Offline => run_offline(spec, rep),
        Transport::Listen(addr) => run_listen(spec, addr, rep),
        Transport::Loopback => run_loopback(spec, rep),
    }
}

/// `process`: one run, one appended results row.
pub fn cmd_process(spec: &RunSpec) -> anyhow::Result<ResultsRow> {
    let outcome = execute(spec, 0)?;
    if let Some(path) = &spec.output {
        append_rows(path, std::slice::from_ref(&outcome.row))?;
    }
    Ok(outcome.row)
}
