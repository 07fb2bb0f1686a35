use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::path::Path;

use anyhow::Context;
use streambag::metrics::ResultsRow;

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultsRow]) -> anyhow::Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = csv::Writer::from_writer(file);
    if fresh {
        out.write_record(ResultsRow::HEADER)?;
    }
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> anyhow::Result<Vec<ResultsRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers()?.clone();
    anyhow::ensure!(
        header.iter().eq(ResultsRow::HEADER),
        "{} is not a results file",
        path.display()
    );
    reader
        .records()
        .enumerate()
        .map(|(i, r)| {
            let r = r?;
            let fields: Vec<&str> = r.iter().collect();
            ResultsRow::from_fields(&fields).with_context(|| format!("{} row {}", path.display(), i + 1))
        })
        .collect()
}

/// Run ids already present; a missing file has none.
pub fn existing_ids(path: &Path) -> anyhow::Result<HashSet<String>> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_rows(path)?.into_iter().map(|r| r.run_id).collect())
}
