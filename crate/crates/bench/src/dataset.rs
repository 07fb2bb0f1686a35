use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use streambag::data::{parse_arff, synthetic_drift_stream, synthetic_schema, Schema, NO_DRIFT};
use streambag::Instance;

use crate::config::usage;

pub type Instances = Box<dyn Iterator<Item = streambag::Result<Instance>> + Send>;

/// `synthetic:N[:change_at[:seed]]` or the path of an ARFF file.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic { count: u64, change_at: u64, seed: u64 },
    Arff(PathBuf),
}

impl std::str::FromStr for DatasetSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let Some(rest) = s.strip_prefix("synthetic:") else {
            return Ok(DatasetSource::Arff(PathBuf::from(s)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |i: usize, default: u64| -> anyhow::Result<u64> {
            parts.get(i).map_or(Ok(default), |p| {
                p.parse().map_err(|_| usage(format!("bad synthetic dataset `{s}`")))
            })
        };
        if parts.len() > 3 {
            return Err(usage(format!("bad synthetic dataset `{s}`")));
        }
        Ok(DatasetSource::Synthetic {
            count: num(0, 0)?,
            change_at: num(1, NO_DRIFT)?,
            seed: num(2, 1)?,
        })
    }
}

impl DatasetSource {
    pub fn check(&self) -> anyhow::Result<()> {
        match self {
            DatasetSource::Synthetic { count: 0, .. } => Err(usage("synthetic dataset needs a positive count")),
            DatasetSource::Arff(path) if !path.is_file() => {
                Err(usage(format!("dataset {} not found", path.display())))
            }
            _ => Ok(()),
        }
    }

    /// Short name used in run ids and reports.
    pub fn tag(&self) -> String {
        match self {
            DatasetSource::Synthetic { count, change_at, .. } if *change_at == NO_DRIFT => format!("synthetic{count}"),
            DatasetSource::Synthetic { count, change_at, .. } => format!("synthetic{count}d{change_at}"),
            DatasetSource::Arff(path) => path
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    /// Lazily reads the dataset.
    pub fn open(&self) -> anyhow::Result<(Schema, Instances)> {
        self.check()?;
        match self {
            DatasetSource::Synthetic { count, change_at, seed } => {
                let stream = synthetic_drift_stream::<f64>(*seed, *change_at).take(*count as usize);
                Ok((synthetic_schema(), Box::new(stream.map(Ok))))
            }
            DatasetSource::Arff(path) => {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let (schema, records) = parse_arff::<f64, _>(BufReader::new(file))
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok((schema, Box::new(records)))
            }
        }
    }

    pub fn load(&self) -> anyhow::Result<(Schema, Vec<Instance>)> {
        let (schema, records) = self.open()?;
        let rows = records.collect::<streambag::Result<Vec<_>>>()?;
        Ok((schema, rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sources() {
        assert_eq!(
            "synthetic:100:50".parse::<DatasetSource>().unwrap(),
            DatasetSource::Synthetic { count: 100, change_at: 50, seed: 1 }
        );
        assert!("synthetic:x".parse::<DatasetSource>().is_err());
        let d: DatasetSource = "data/elec.arff".parse().unwrap();
        assert_eq!(d.tag(), "elec");
        let (schema, rows) = "synthetic:10".parse::<DatasetSource>().unwrap().load().unwrap();
        assert_eq!((schema.num_features(), rows.len()), (3, 10));
    }
}
