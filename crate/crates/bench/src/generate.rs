use std::path::PathBuf;
use std::time::Duration;

use streambag::netstream::{connect, generate_load, LoadLimit, RateConfig, SendLog, WireDataset};

use crate::config::usage;
use crate::dataset::DatasetSource;

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub dataset: DatasetSource,
    pub rate_fraction: f64,
    pub capacity: f64,
    pub duration: Option<Duration>,
    pub count: Option<u64>,
    pub connect: String,
    /// CSV send log: seq, sent_at_ns, blocked_ns.
    pub log: Option<PathBuf>,
}

impl GenSpec {
    pub fn limit(&self) -> anyhow::Result<LoadLimit> {
        match (self.count, self.duration) {
            (Some(n), None) => Ok(LoadLimit::Count(n)),
            (None, Some(d)) => Ok(LoadLimit::Duration(d)),
            (None, None) => Ok(LoadLimit::Duration(crate::run::DEFAULT_NETWORK_DURATION)),
            (Some(_), Some(_)) => Err(usage("give either a duration or a count, not both")),
        }
    }
}

pub fn write_send_log(path: &std::path::Path, log: &SendLog) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["seq", "sent_at_ns", "blocked_ns"])?;
    for e in &log.entries {
        out.write_record([e.seq.to_string(), e.sent_at.to_string(), e.blocked_ns.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `generate`: streams the dataset to a processor at a fraction of its capacity.
pub fn cmd_generate(spec: &GenSpec) -> anyhow::Result<SendLog> {
    let limit = spec.limit()?;
    let rate = RateConfig::new(spec.rate_fraction, spec.capacity).map_err(|e| usage(e.to_string()))?;
    spec.dataset.check()?;
    let (schema, rows) = spec.dataset.load()?;
    let wire = WireDataset::new(schema, &rows)?;
    let socket = connect(spec.connect.as_str())?;
    let log = generate_load(socket, &wire, Some(rate.rate()), limit)?;
    if let Some(path) = &spec.log {
        write_send_log(path, &log)?;
    }
    Ok(log)
}
