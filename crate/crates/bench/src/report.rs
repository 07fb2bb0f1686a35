use std::collections::BTreeMap;
use std::fmt::Write as _;

use streambag::metrics::ResultsRow;

/// Per-cell averages over repetitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub jpi: f64,
    pub ips: f64,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub algorithm: String,
    pub dataset: String,
    pub rate_fraction: f64,
    /// Executor label of the better of Seq and B1 by JPI.
    pub baseline: Option<String>,
    pub delta_jpi_pct: Option<f64>,
    pub cells: BTreeMap<String, CellStats>,
}

/// Percentage change of `candidate` against `baseline`; negative is a reduction.
pub fn delta_pct(candidate: f64, baseline: f64) -> f64 {
    (candidate - baseline) / baseline * 100.0
}

/// Groups rows by (algorithm, dataset, load) and compares `target` (normally B50) against the
/// best of Seq and B1 on joules per instance. Missing cells yield blanks and a warning.
pub fn build_report(rows: &[ResultsRow], target: &str, warnings: &mut Vec<String>) -> Vec<ReportLine> {
    type Key = (String, String, String);
    let mut sums: BTreeMap<Key, BTreeMap<String, (CellStats, usize)>> = BTreeMap::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.dataset.clone(), r.rate_fraction.to_string());
        let (acc, n) = sums.entry(key).or_default().entry(r.executor.clone()).or_default();
        acc.jpi += r.jpi;
        acc.ips += r.ips;
        acc.delay_ms += r.delay_mean_ms;
        *n += 1;
    }
    let mut lines = Vec::new();
    for ((algorithm, dataset, load), execs) in sums {
        let cells: BTreeMap<String, CellStats> = execs
            .into_iter()
            .map(|(label, (s, n))| {
                let n = n as f64;
                (label, CellStats { jpi: s.jpi / n, ips: s.ips / n, delay_ms: s.delay_ms / n })
            })
            .collect();
        let baseline = ["Seq", "B1"]
            .into_iter()
            .filter_map(|l| cells.get(l).map(|c| (l, c.jpi)))
            .filter(|(_, j)| j.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let target_jpi = cells.get(target).map(|c| c.jpi);
        let delta = match (baseline, target_jpi) {
            (Some((_, base)), Some(t)) if base > 0.0 && t.is_finite() => Some(delta_pct(t, base)),
            _ => {
                warnings.push(format!(
                    "{algorithm}/{dataset}/{load}: missing or zero-energy cell for {target} or baseline"
                ));
                None
            }
        };
        lines.push(ReportLine {
            algorithm,
            dataset,
            rate_fraction: load.parse().unwrap_or(f64::NAN),
            baseline: baseline.map(|(l, _)| l.to_string()),
            delta_jpi_pct: delta,
            cells,
        });
    }
    lines
}

/// CSV rendering of the report.
pub fn render_report(lines: &[ReportLine], target: &str) -> String {
    let labels = ["Seq", "B1", target];
    let mut out = String::from("algorithm,dataset,rate_fraction,baseline,delta_jpi_pct");
    for l in labels {
        let _ = write!(out, ",{l}_jpi,{l}_ips,{l}_delay_ms");
    }
    out.push('\n');
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
    for line in lines {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            line.algorithm,
            line.dataset,
            line.rate_fraction,
            line.baseline.as_deref().unwrap_or(""),
            opt(line.delta_jpi_pct)
        );
        for l in labels {
            let c = line.cells.get(l);
            let _ = write!(
                out,
                ",{},{},{}",
                opt(c.map(|c| c.jpi)),
                opt(c.map(|c| c.ips)),
                opt(c.map(|c| c.delay_ms))
            );
        }
        out.push('\n');
    }
    out
}
