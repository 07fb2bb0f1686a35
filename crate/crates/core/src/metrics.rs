//! Accuracy, delay, throughput and energy accounting, plus the reuse-distance model.

use std::collections::HashMap;
use std::fs;
use std::hash::Hash;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::executor::{PredictionEvent, PredictionSink};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrequentialAccuracy {
    pub correct: u64,
    pub total: u64,
}

impl PrequentialAccuracy {
    pub fn record(&mut self, predicted: usize, truth: usize) {
        self.total += 1;
        if predicted == truth {
            self.correct += 1;
        }
    }

    /// Fraction correct; 0 before any instance.
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Per-instance delays in nanoseconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayStats {
    delays: Vec<u64>,
    sorted: bool,
}

impl DelayStats {
    pub fn push(&mut self, delay_ns: u64) {
        self.delays.push(delay_ns);
        self.sorted = false;
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn mean_ns(&self) -> f64 {
        if self.delays.is_empty() {
            return 0.0;
        }
        self.delays.iter().map(|&d| d as f64).sum::<f64>() / self.delays.len() as f64
    }

    /// Nearest-rank percentile, `q` in [0, 1].
    pub fn percentile_ns(&mut self, q: f64) -> u64 {
        if self.delays.is_empty() {
            return 0;
        }
        if !self.sorted {
            self.delays.sort_unstable();
            self.sorted = true;
        }
        let rank = (q.clamp(0.0, 1.0) * self.delays.len() as f64).ceil() as usize;
        self.delays[rank.max(1) - 1]
    }

    pub fn p50_ns(&mut self) -> u64 {
        self.percentile_ns(0.5)
    }

    pub fn p95_ns(&mut self) -> u64 {
        self.percentile_ns(0.95)
    }

    pub fn max_ns(&self) -> u64 {
        self.delays.iter().copied().max().unwrap_or(0)
    }
}

/// Sink that keeps prequential accuracy and delays.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub accuracy: PrequentialAccuracy,
    pub delays: DelayStats,
    /// Delays measured from receipt instead of send (clocks not shared).
    pub receiver_side: bool,
}

impl RunMetrics {
    pub fn receiver_side() -> Self {
        Self {
            receiver_side: true,
            ..Self::default()
        }
    }
}

impl PredictionSink for RunMetrics {
    fn emit(&mut self, event: PredictionEvent) {
        self.accuracy.record(event.predicted, event.true_class);
        let from = if self.receiver_side {
            event.received_at
        } else {
            event.sent_at
        };
        self.delays.push(event.emitted_at.saturating_sub(from));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    /// Seconds since the sensor started.
    pub t: f64,
    pub watts: f64,
}

pub const DEFAULT_SENSOR_PERIOD: Duration = Duration::from_millis(100);

pub trait EnergySensor: Send {
    fn kind(&self) -> &'static str;

    fn poll(&mut self) -> Result<EnergySample>;

    /// True when timestamps advance by one period per poll rather than with the wall clock.
    fn is_virtual(&self) -> bool {
        false
    }
}

/// Reports zero power.
#[derive(Debug)]
pub struct NullSensor {
    start: Instant,
}

impl NullSensor {
    pub fn new() -> Self {
        Self { start: Instant::now() }
    }
}

impl Default for NullSensor {
    fn default() -> Self {
        Self::new()
    }
}

impl EnergySensor for NullSensor {
    fn kind(&self) -> &'static str {
        "null"
    }

    fn poll(&mut self) -> Result<EnergySample> {
        Ok(EnergySample {
            t: self.start.elapsed().as_secs_f64(),
            watts: 0.0,
        })
    }
}

/// Replays a scripted power trace, cycling when it runs out.
#[derive(Debug)]
pub struct SyntheticSensor {
    trace: Vec<f64>,
    period: Duration,
    polls: u64,
    clock: Option<Instant>,
}

impl SyntheticSensor {
    /// Timestamps follow the wall clock.
    pub fn new(trace: Vec<f64>) -> Result<Self> {
        if trace.is_empty() || trace.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("synthetic power trace must be non-empty and non-negative".into()));
        }
        Ok(Self {
            trace,
            period: DEFAULT_SENSOR_PERIOD,
            polls: 0,
            clock: Some(Instant::now()),
        })
    }

    pub fn constant(watts: f64) -> Result<Self> {
        Self::new(vec![watts])
    }

    /// Sample `i` is stamped `i * period` regardless of the wall clock.
    pub fn virtual_clock(mut self, period: Duration) -> Self {
        self.period = period;
        self.clock = None;
        self
    }
}

impl EnergySensor for SyntheticSensor {
    fn kind(&self) -> &'static str {
        "synthetic"
    }

    fn poll(&mut self) -> Result<EnergySample> {
        let watts = self.trace[(self.polls % self.trace.len() as u64) as usize];
        let t = match self.clock {
            Some(start) => start.elapsed().as_secs_f64(),
            None => self.polls as f64 * self.period.as_secs_f64(),
        };
        self.polls += 1;
        Ok(EnergySample { t, watts })
    }

    fn is_virtual(&self) -> bool {
        self.clock.is_none()
    }
}

/// Differences the cumulative microjoule counters under `/sys/class/powercap` into watts.
#[derive(Debug)]
pub struct OsCounterSensor {
    domains: Vec<Domain>,
    start: Instant,
    last: Instant,
    last_watts: f64,
}

#[derive(Debug)]
struct Domain {
    energy: PathBuf,
    range_uj: u64,
    last_uj: u64,
}

fn read_u64(path: &Path) -> Result<u64> {
    let text = fs::read_to_string(path)?;
    text.trim()
        .parse()
        .map_err(|_| Error::Io(std::io::Error::other(format!("bad counter in {}", path.display()))))
}

impl OsCounterSensor {
    pub fn new() -> Result<Self> {
        Self::from_root(Path::new("/sys/class/powercap"))
    }

    /// Uses the top-level zones under `root` (subzones are already included in their parent).
    pub fn from_root(root: &Path) -> Result<Self> {
        let mut zones: Vec<PathBuf> = fs::read_dir(root)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.matches(':').count() == 1)
            })
            .filter(|p| p.join("energy_uj").is_file())
            .collect();
        zones.sort();
        let mut domains = Vec::new();
        for zone in zones {
            let energy = zone.join("energy_uj");
            let last_uj = read_u64(&energy)?;
            let range_uj = read_u64(&zone.join("max_energy_range_uj")).unwrap_or(u64::MAX);
            domains.push(Domain {
                energy,
                range_uj,
                last_uj,
            });
        }
        if domains.is_empty() {
            return Err(Error::Config(format!("no readable energy counters under {}", root.display())));
        }
        let now = Instant::now();
        Ok(Self {
            domains,
            start: now,
            last: now,
            last_watts: 0.0,
        })
    }
}

impl EnergySensor for OsCounterSensor {
    fn kind(&self) -> &'static str {
        "os_counter"
    }

    fn poll(&mut self) -> Result<EnergySample> {
        let now = Instant::now();
        let mut joules = 0.0;
        for d in &mut self.domains {
            let uj = read_u64(&d.energy)?;
            let delta = if uj >= d.last_uj {
                uj - d.last_uj
            } else {
                d.range_uj.saturating_sub(d.last_uj) + uj
            };
            d.last_uj = uj;
            joules += delta as f64 * 1e-6;
        }
        let dt = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        // intervals this short say more about counter granularity than power
        if dt >= 1e-3 {
            self.last_watts = joules / dt;
        }
        Ok(EnergySample {
            t: now.duration_since(self.start).as_secs_f64(),
            watts: self.last_watts,
        })
    }
}

/// Polls a sensor on its own thread at a fixed period until stopped.
pub struct SensorRecorder {
    stop: mpsc::Sender<()>,
    handle: JoinHandle<Result<Vec<EnergySample>>>,
}

impl SensorRecorder {
    pub fn start(mut sensor: Box<dyn EnergySensor>, period: Duration) -> Self {
        let (stop, stopped) = mpsc::channel();
        let handle = std::thread::spawn(move || {
            let mut samples = Vec::new();
            let mut next = Instant::now();
            loop {
                samples.push(sensor.poll()?);
                next += period;
                match stopped.recv_timeout(next.saturating_duration_since(Instant::now())) {
                    Err(RecvTimeoutError::Timeout) => {}
                    _ => break,
                }
            }
            samples.push(sensor.poll()?);
            Ok(samples)
        });
        Self { stop, handle }
    }

    pub fn stop(self) -> Result<Vec<EnergySample>> {
        let _ = self.stop.send(());
        self.handle
            .join()
            .map_err(|_| Error::Io(std::io::Error::other("energy sensor thread panicked")))?
    }
}

/// Energy over `[start, end]` seconds: mean power of the samples inside the window times its length.
pub fn energy_joules(samples: &[EnergySample], start: f64, end: f64) -> Result<f64> {
    if !(end >= start) {
        return Err(Error::Domain(format!("energy window [{start}, {end}] is reversed")));
    }
    let (sum, count) = samples
        .iter()
        .filter(|s| s.t >= start && s.t <= end)
        .fold((0.0, 0usize), |(sum, n), s| (sum + s.watts, n + 1));
    if count == 0 {
        return Err(Error::Domain(format!("no energy samples in [{start}, {end}]")));
    }
    Ok(sum / count as f64 * (end - start))
}

/// Joules per instance.
pub fn jpi(joules: f64, instances: u64) -> Result<f64> {
    if instances == 0 {
        return Err(Error::Domain("joules per instance of zero instances".into()));
    }
    Ok(joules / instances as f64)
}

/// Instances per second.
pub fn throughput(instances: u64, wall: Duration) -> Result<f64> {
    if wall.is_zero() {
        return Err(Error::Domain("throughput over zero wall time".into()));
    }
    Ok(instances as f64 / wall.as_secs_f64())
}

fn rd_params(n: u64, m: u64, b: u64) -> Result<()> {
    if n == 0 || m == 0 || b == 0 || b > n {
        return Err(Error::Domain(format!("reuse distance needs n, m, b >= 1 and b <= n (n={n}, m={m}, b={b})")));
    }
    Ok(())
}

/// Total reuse distance of the sequential schedule: n·m².
pub fn rd_sequential(n: u64, m: u64) -> Result<u64> {
    rd_params(n, m, 1)?;
    Ok(n * m * m)
}

/// Total reuse distance of mini-batching: each full batch contributes m·(m+b−1); a trailing
/// partial batch of r instances contributes m·(m+r−1).
pub fn rd_minibatch(n: u64, m: u64, b: u64) -> Result<u64> {
    rd_params(n, m, b)?;
    let full = n / b;
    let rest = n % b;
    let tail = if rest > 0 { m * (m + rest - 1) } else { 0 };
    Ok(full * m * (m + b - 1) + tail)
}

/// Whether the stream is long enough for mini-batching to pay off: n > b·m².
pub fn locality_guidance_holds(n: u64, m: u64, b: u64) -> bool {
    u128::from(n) > u128::from(b) * u128::from(m) * u128::from(m)
}

/// Per access, the number of accesses since the previous access to the same id, counting the
/// access itself; `None` on first touch. Reproduces `abc cba abc -> ∞∞∞ 135 135`.
pub fn empirical_rd<T: Eq + Hash>(trace: &[T]) -> Vec<Option<usize>> {
    let mut last = HashMap::new();
    trace
        .iter()
        .enumerate()
        .map(|(i, id)| last.insert(id, i).map(|prev| i - prev))
        .collect()
}

/// LRU stack distance: distinct ids touched since the previous access to the same id, inclusive.
pub fn stack_distance<T: Eq + Hash + Clone>(trace: &[T]) -> Vec<Option<usize>> {
    let mut stack: Vec<T> = Vec::new();
    trace
        .iter()
        .map(|id| {
            let found = stack.iter().rposition(|x| x == id);
            let d = found.map(|p| stack.len() - p);
            if let Some(p) = found {
                stack.remove(p);
            }
            stack.push(id.clone());
            d
        })
        .collect()
}

/// Renders distances as digits with `∞` for first touches, a space after every `group` entries.
pub fn format_rd(rds: &[Option<usize>], group: usize) -> String {
    let mut out = String::new();
    for (i, rd) in rds.iter().enumerate() {
        if group > 0 && i > 0 && i % group == 0 {
            out.push(' ');
        }
        match rd {
            Some(d) => out.push_str(&d.to_string()),
            None => out.push('∞'),
        }
    }
    out
}

/// One results-file row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub run_id: String,
    pub dataset: String,
    pub algorithm: String,
    pub m: usize,
    pub executor: String,
    pub batch_size: usize,
    pub threads: usize,
    pub rate_fraction: f64,
    pub instances: u64,
    pub accuracy: f64,
    pub wall_seconds: f64,
    pub ips: f64,
    pub delay_mean_ms: f64,
    pub delay_p50_ms: f64,
    pub delay_p95_ms: f64,
    /// `sent` on a shared clock, `received` when only receiver-side delay is known.
    pub delay_basis: String,
    pub joules: f64,
    pub jpi: f64,
    pub resets: u64,
    pub digest: String,
}

impl ResultsRow {
    pub const HEADER: [&'static str; 20] = [
        "run_id",
        "dataset",
        "algorithm",
        "m",
        "executor",
        "batch_size",
        "threads",
        "rate_fraction",
        "instances",
        "accuracy",
        "wall_seconds",
        "ips",
        "delay_mean_ms",
        "delay_p50_ms",
        "delay_p95_ms",
        "delay_basis",
        "joules",
        "jpi",
        "resets",
        "digest",
    ];

    /// Columns that depend on timing or the sensor and so differ between identical reruns.
    pub const TIMING_COLUMNS: [&'static str; 8] = [
        "wall_seconds",
        "ips",
        "delay_mean_ms",
        "delay_p50_ms",
        "delay_p95_ms",
        "joules",
        "jpi",
        "threads",
    ];

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.dataset.clone(),
            self.algorithm.clone(),
            self.m.to_string(),
            self.executor.clone(),
            self.batch_size.to_string(),
            self.threads.to_string(),
            self.rate_fraction.to_string(),
            self.instances.to_string(),
            self.accuracy.to_string(),
            self.wall_seconds.to_string(),
            self.ips.to_string(),
            self.delay_mean_ms.to_string(),
            self.delay_p50_ms.to_string(),
            self.delay_p95_ms.to_string(),
            self.delay_basis.clone(),
            self.joules.to_string(),
            self.jpi.to_string(),
            self.resets.to_string(),
            self.digest.clone(),
        ]
    }

    /// Parses a row written with [`ResultsRow::HEADER`] column order.
    pub fn from_fields<T: AsRef<str>>(fields: &[T]) -> Result<Self> {
        if fields.len() != Self::HEADER.len() {
            return Err(Error::Arity {
                row: 0,
                expected: Self::HEADER.len(),
                found: fields.len(),
            });
        }
        let f = |i: usize| fields[i].as_ref();
        fn num<T: std::str::FromStr>(name: &str, s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| Error::Config(format!("results column {name}: bad value `{s}`")))
        }
        let h = Self::HEADER;
        Ok(Self {
            run_id: f(0).to_string(),
            dataset: f(1).to_string(),
            algorithm: f(2).to_string(),
            m: num(h[3], f(3))?,
            executor: f(4).to_string(),
            batch_size: num(h[5], f(5))?,
            threads: num(h[6], f(6))?,
            rate_fraction: num(h[7], f(7))?,
            instances: num(h[8], f(8))?,
            accuracy: num(h[9], f(9))?,
            wall_seconds: num(h[10], f(10))?,
            ips: num(h[11], f(11))?,
            delay_mean_ms: num(h[12], f(12))?,
            delay_p50_ms: num(h[13], f(13))?,
            delay_p95_ms: num(h[14], f(14))?,
            delay_basis: f(15).to_string(),
            joules: num(h[16], f(16))?,
            jpi: num(h[17], f(17))?,
            resets: num(h[18], f(18))?,
            digest: f(19).to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(watts: &[f64], period: f64) -> Vec<EnergySample> {
        watts
            .iter()
            .enumerate()
            .map(|(i, &w)| EnergySample { t: i as f64 * period, watts: w })
            .collect()
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_joules(&samples(&[10.0, 10.0], 2.0), 0.0, 2.0).unwrap(), 20.0);
        assert_eq!(energy_joules(&samples(&[5.0, 15.0], 2.0), 0.0, 2.0).unwrap(), 20.0);
        let trace = samples(&[4.0; 1800], 0.1);
        assert!((energy_joules(&trace, 0.0, 180.0).unwrap() - 720.0).abs() < 1e-9);
        assert!(energy_joules(&trace, 500.0, 600.0).is_err());
        assert!(energy_joules(&trace, 1.0, 0.0).is_err());
    }

    #[test]
    fn jpi_and_throughput() {
        assert_eq!(jpi(20.0, 100).unwrap(), 0.2);
        assert_eq!(jpi(0.0, 7).unwrap(), 0.0);
        assert!((jpi(720.0, 36_000).unwrap() - 0.02).abs() < 1e-15);
        assert!(jpi(1.0, 0).is_err());
        assert_eq!(throughput(1000, Duration::from_secs(10)).unwrap(), 100.0);
        assert_eq!(throughput(0, Duration::from_secs(10)).unwrap(), 0.0);
        assert!(throughput(5, Duration::ZERO).is_err());
        // reference point from the LBag/Airlines measurements, kept as a trend target
        assert!((78.12f64 / 46.56 - 1.68).abs() < 0.005);
    }

    #[test]
    fn reuse_distance_closed_forms() {
        assert_eq!(rd_sequential(3, 3).unwrap(), 27);
        assert_eq!(rd_sequential(1, 1).unwrap(), 1);
        assert_eq!(rd_sequential(9, 3).unwrap(), 81);
        assert_eq!(rd_minibatch(9, 3, 3).unwrap(), 45);
        assert_eq!(rd_minibatch(100, 2, 100).unwrap(), 202);
        assert_eq!(rd_minibatch(10, 2, 4).unwrap(), 2 * 2 * 5 + 2 * 3);
        assert!(rd_minibatch(3, 2, 4).is_err());
        assert!(rd_sequential(0, 2).is_err());
        assert!(locality_guidance_holds(1000, 3, 50));
        assert!(!locality_guidance_holds(450, 3, 50));
    }

    #[test]
    fn empirical_sequences() {
        let abc: Vec<char> = "abcabcabc".chars().collect();
        assert_eq!(format_rd(&empirical_rd(&abc), 3), "∞∞∞ 333 333");
        let mixed: Vec<char> = "abccbaabc".chars().collect();
        assert_eq!(format_rd(&empirical_rd(&mixed), 3), "∞∞∞ 135 135");
        assert_eq!(format_rd(&empirical_rd(&['a', 'a', 'a']), 0), "∞11");
        assert_eq!(format_rd(&stack_distance(&mixed), 3), "∞∞∞ 123 123");
    }

    #[test]
    fn sequential_trace_rounds_sum_to_m_squared() {
        let m = 4;
        let trace: Vec<usize> = (0..10).flat_map(|_| 0..m).collect();
        let rds = empirical_rd(&trace);
        for round in rds.chunks(m).skip(1) {
            assert_eq!(round.iter().map(|r| r.unwrap()).sum::<usize>(), m * m);
        }
    }

    #[test]
    fn delay_percentiles() {
        let mut d = DelayStats::default();
        for v in 1..=100 {
            d.push(v);
        }
        assert_eq!((d.p50_ns(), d.p95_ns(), d.max_ns()), (50, 95, 100));
        assert_eq!(d.mean_ns(), 50.5);
        assert_eq!(DelayStats::default().p95_ns(), 0);
    }

    #[test]
    fn synthetic_virtual_sensor_and_recorder() {
        let mut s = SyntheticSensor::new(vec![1.0, 3.0]).unwrap().virtual_clock(Duration::from_millis(100));
        let a: Vec<EnergySample> = (0..4).map(|_| s.poll().unwrap()).collect();
        assert_eq!(a.iter().map(|x| x.watts).collect::<Vec<_>>(), [1.0, 3.0, 1.0, 3.0]);
        assert!((a[3].t - 0.3).abs() < 1e-12);
        assert!(SyntheticSensor::new(vec![-1.0]).is_err());
        let rec = SensorRecorder::start(Box::new(NullSensor::new()), Duration::from_millis(10));
        std::thread::sleep(Duration::from_millis(55));
        let samples = rec.stop().unwrap();
        assert!(samples.len() >= 3);
        assert!(samples.windows(2).all(|w| w[0].t <= w[1].t));
    }

    #[test]
    fn os_counter_differences_fake_powercap() {
        let dir = std::env::temp_dir().join(format!("powercap-{}", std::process::id()));
        let zone = dir.join("intel-rapl:0");
        let sub = dir.join("intel-rapl:0:0");
        fs::create_dir_all(&zone).unwrap();
        fs::create_dir_all(&sub).unwrap();
        fs::write(zone.join("energy_uj"), "1000000\n").unwrap();
        fs::write(zone.join("max_energy_range_uj"), "2000000\n").unwrap();
        fs::write(sub.join("energy_uj"), "5\n").unwrap();
        let mut sensor = OsCounterSensor::from_root(&dir).unwrap();
        assert_eq!(sensor.domains.len(), 1);
        std::thread::sleep(Duration::from_millis(20));
        fs::write(zone.join("energy_uj"), "500000\n").unwrap();
        let s = sensor.poll().unwrap();
        // wrapped: 1.0 J to range end plus 0.5 J
        assert!(s.watts > 0.0 && s.watts < 1.5 / 0.02 + 1.0);
        fs::remove_dir_all(&dir).unwrap();
        assert!(OsCounterSensor::from_root(&dir).is_err());
    }

    #[test]
    fn results_row_round_trip() {
        let row = ResultsRow {
            run_id: "r".into(),
            dataset: "synthetic".into(),
            algorithm: "lbag".into(),
            m: 5,
            executor: "B50".into(),
            batch_size: 50,
            threads: 4,
            rate_fraction: 0.1,
            instances: 10,
            accuracy: 0.9,
            wall_seconds: 1.5,
            ips: 10.0 / 1.5,
            delay_mean_ms: 0.25,
            delay_p50_ms: 0.2,
            delay_p95_ms: 0.3,
            delay_basis: "sent".into(),
            joules: 7.0,
            jpi: 0.7,
            resets: 2,
            digest: "ab".into(),
        };
        assert_eq!(ResultsRow::from_fields(&row.fields()).unwrap(), row);
        assert!(ResultsRow::from_fields(&["x"]).is_err());
    }

    proptest! {
        #[test]
        fn minibatching_improves_locality(m in 2u64..200, b in 2u64..500, k in 1u64..20) {
            let n = b * k;
            prop_assert!(rd_minibatch(n, m, b).unwrap() < rd_sequential(n, m).unwrap());
        }

        #[test]
        fn batch_of_one_is_sequential(n in 1u64..10_000, m in 1u64..100) {
            prop_assert_eq!(rd_minibatch(n, m, 1).unwrap(), rd_sequential(n, m).unwrap());
        }

        #[test]
        fn constant_power_energy_is_exact(p in 0.0f64..500.0, count in 2usize..2000) {
            let period = 0.1;
            let trace = samples(&vec![p; count], period);
            let t = (count - 1) as f64 * period;
            let e = energy_joules(&trace, 0.0, t).unwrap();
            prop_assert!((e - p * t).abs() <= 1e-9 * (1.0 + p * t));
        }

        #[test]
        fn first_touches_are_infinite(trace in proptest::collection::vec(0u8..6, 0..60)) {
            let rds = empirical_rd(&trace);
            let distinct: std::collections::HashSet<_> = trace.iter().collect();
            prop_assert_eq!(rds.iter().filter(|r| r.is_none()).count(), distinct.len());
            for (e, s) in rds.iter().zip(stack_distance(&trace)) {
                prop_assert!(s <= *e);
            }
        }
    }
}
