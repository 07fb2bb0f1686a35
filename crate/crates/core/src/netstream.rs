//! Length-prefixed text framing over TCP, the paced load generator and the receiving side.
//!
//! A frame is a big-endian `u32` length followed by that many bytes of UTF-8. The first frame
//! of a connection carries the ARFF header; each later frame is `seq,send_ts_ns,<csv row>`; a
//! zero-length frame ends the stream.

use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::clock::now_ns;
use crate::data::{parse_arff, Instance, Schema, StreamRecord};
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Largest accepted frame payload.
pub const MAX_FRAME_LEN: u32 = 1 << 24;

pub fn write_frame<W: Write + ?Sized>(writer: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l <= MAX_FRAME_LEN)
        .ok_or_else(|| io::Error::new(ErrorKind::InvalidInput, "frame payload too large"))?;
    writer.write_all(&len.to_be_bytes())?;
    writer.write_all(payload)
}

pub fn write_terminator<W: Write + ?Sized>(writer: &mut W) -> io::Result<()> {
    writer.write_all(&0u32.to_be_bytes())
}

/// Reads one frame; `Ok(None)` for the zero-length terminator.
pub fn read_frame<R: Read + ?Sized>(reader: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    read_exact(reader, &mut len, "frame length")?;
    let len = u32::from_be_bytes(len);
    if len == 0 {
        return Ok(None);
    }
    if len > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("frame length {len} exceeds {MAX_FRAME_LEN}")));
    }
    let mut payload = vec![0u8; len as usize];
    read_exact(reader, &mut payload, "frame payload")?;
    Ok(Some(payload))
}

fn read_exact<R: Read + ?Sized>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Protocol(format!("stream truncated inside {what}")),
        _ => Error::Io(e),
    })
}

pub fn encode_row(seq: u64, sent_at: u64, row: &str) -> String {
    format!("{seq},{sent_at},{row}")
}

/// Splits a data frame into sequence number, send stamp and instance.
pub fn decode_row<S: Scalar>(schema: &Schema, payload: &[u8]) -> Result<(u64, u64, Instance<S>)> {
    let text = std::str::from_utf8(payload).map_err(|_| Error::Protocol("frame is not UTF-8".into()))?;
    let mut parts = text.splitn(3, ',');
    let mut field = |name: &str| -> Result<u64> {
        parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| Error::Protocol(format!("frame lacks a valid {name}")))
    };
    let seq = field("sequence number")?;
    let sent_at = field("send timestamp")?;
    let row = parts
        .next()
        .ok_or_else(|| Error::Protocol(format!("frame {seq} has no instance row")))?;
    let instance = schema.parse_row(row, seq as usize + 1)?;
    Ok((seq, sent_at, instance))
}

pub fn read_handshake<R: Read + ?Sized>(reader: &mut R) -> Result<Schema> {
    let header = read_frame(reader)?.ok_or_else(|| Error::Protocol("stream ended before handshake".into()))?;
    let (schema, _) = parse_arff::<f64, _>(header.as_slice())?;
    Ok(schema)
}

/// The receiving end of a connection.
pub struct Incoming<S> {
    pub schema: Schema,
    /// Records in sequence order; the sender side disconnects after the terminator.
    pub records: Receiver<Result<StreamRecord<S>>>,
    /// Reader thread; yields the number of records read.
    pub reader: JoinHandle<Result<u64>>,
}

/// Reads the handshake, then hands the connection to a reader thread that feeds a bounded
/// queue of `queue_capacity` records. Reads block; nothing polls.
pub fn receive_stream<S, R>(mut reader: R, queue_capacity: usize) -> Result<Incoming<S>>
where
    S: Scalar,
    R: Read + Send + 'static,
{
    let schema = read_handshake(&mut reader)?;
    let (tx, records) = mpsc::sync_channel(queue_capacity.max(1));
    let thread_schema = schema.clone();
    let reader = thread::Builder::new()
        .name("stream-reader".into())
        .spawn(move || {
            let mut expected = 0u64;
            let result = loop {
                let frame = match read_frame(&mut reader) {
                    Ok(Some(frame)) => frame,
                    Ok(None) => break Ok(expected),
                    Err(e) => break Err(e),
                };
                let received_at = now_ns();
                let record = decode_row::<S>(&thread_schema, &frame).and_then(|(seq, sent_at, instance)| {
                    if seq != expected {
                        return Err(Error::Protocol(format!("expected seq {expected}, got {seq}")));
                    }
                    Ok(StreamRecord {
                        seq,
                        instance,
                        sent_at,
                        received_at,
                    })
                });
                match record {
                    Ok(r) => {
                        if tx.send(Ok(r)).is_err() {
                            break Ok(expected);
                        }
                        expected += 1;
                    }
                    Err(e) => break Err(e),
                }
            };
            if let Err(e) = &result {
                let _ = tx.send(Err(Error::Protocol(e.to_string())));
            }
            result
        })?;
    Ok(Incoming {
        schema,
        records,
        reader,
    })
}

/// Dataset pre-rendered for the wire.
#[derive(Debug, Clone)]
pub struct WireDataset {
    pub schema: Schema,
    pub rows: Vec<String>,
}

impl WireDataset {
    pub fn new<S: Scalar>(schema: Schema, instances: &[Instance<S>]) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::Config("dataset has no rows".into()));
        }
        let rows = instances.iter().map(|i| schema.format_row(i)).collect();
        Ok(Self { schema, rows })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    pub target_fraction: f64,
    pub calibrated_capacity: f64,
}

impl RateConfig {
    pub fn new(target_fraction: f64, calibrated_capacity: f64) -> Result<Self> {
        let config = Self {
            target_fraction,
            calibrated_capacity,
        };
        if !(target_fraction > 0.0 && target_fraction <= 1.0) {
            return Err(Error::Config(format!("rate fraction {target_fraction} outside (0, 1]")));
        }
        if !(config.rate() > 0.0 && config.rate().is_finite()) {
            return Err(Error::Config(format!("capacity {calibrated_capacity} gives no positive rate")));
        }
        Ok(config)
    }

    pub fn rate(&self) -> f64 {
        self.target_fraction * self.calibrated_capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadLimit {
    Count(u64),
    Duration(Duration),
}

/// Token bucket holding at most one token, refilled at `rate` per second.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            tokens: 1.0,
            last: Instant::now(),
        }
    }

    fn refill(&mut self, cap: bool) {
        let now = Instant::now();
        self.tokens += now.duration_since(self.last).as_secs_f64() * self.rate;
        if cap {
            self.tokens = self.tokens.min(1.0);
        }
        self.last = now;
    }

    /// Time until a token is available; zero if one is.
    pub fn wait_time(&mut self) -> Duration {
        self.refill(true);
        self.until_token()
    }

    fn until_token(&self) -> Duration {
        if self.tokens >= 1.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - self.tokens) / self.rate)
        }
    }

    /// Blocks until a token is available and takes it. Refill that accrues while oversleeping
    /// is kept, so wake-up jitter does not lower the mean rate.
    pub fn acquire(&mut self) {
        self.refill(true);
        loop {
            let wait = self.until_token();
            if wait.is_zero() {
                break;
            }
            thread::sleep(wait);
            self.refill(false);
        }
        self.tokens = (self.tokens - 1.0).min(1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendEntry {
    pub seq: u64,
    pub sent_at: u64,
    /// Nanoseconds the write spent blocked on a full socket buffer, when noticeable.
    pub blocked_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SendLog {
    pub entries: Vec<SendEntry>,
    pub backpressure_events: u64,
    pub elapsed: Duration,
}

/// Writes that take longer than this are logged as backpressure.
const BACKPRESSURE_NS: u64 = 1_000_000;

/// Sends the handshake and then dataset rows, looping the dataset, paced at `rate` instances
/// per second (`None` sends as fast as the receiver takes them), and finishes with a terminator.
pub fn generate_load<W: Write>(writer: W, dataset: &WireDataset, rate: Option<f64>, limit: LoadLimit) -> Result<SendLog> {
    let mut log = SendLog::default();
    send_paced(writer, dataset, rate, limit, &mut log)?;
    Ok(log)
}

fn send_paced<W: Write>(
    writer: W,
    dataset: &WireDataset,
    rate: Option<f64>,
    limit: LoadLimit,
    log: &mut SendLog,
) -> Result<()> {
    if let Some(r) = rate {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("send rate {r} must be positive")));
        }
    }
    let mut out = BufWriter::with_capacity(64 * 1024, writer);
    write_frame(&mut out, dataset.schema.header_text().as_bytes())?;
    out.flush()?;
    let mut bucket = rate.map(TokenBucket::new);
    let start = Instant::now();
    let mut seq = 0u64;
    let mut frame = String::new();
    loop {
        match limit {
            LoadLimit::Count(n) if seq >= n => break,
            LoadLimit::Duration(d) if start.elapsed() >= d => break,
            _ => {}
        }
        if let Some(bucket) = bucket.as_mut() {
            if !bucket.wait_time().is_zero() {
                out.flush()?;
            }
            bucket.acquire();
            if let LoadLimit::Duration(d) = limit {
                if start.elapsed() >= d {
                    break;
                }
            }
        }
        let row = &dataset.rows[(seq % dataset.rows.len() as u64) as usize];
        let sent_at = now_ns();
        frame.clear();
        frame.push_str(&encode_row(seq, sent_at, row));
        let before = Instant::now();
        write_frame(&mut out, frame.as_bytes())?;
        if bucket.is_some() {
            out.flush()?;
        }
        let blocked = before.elapsed().as_nanos() as u64;
        let blocked_ns = if blocked >= BACKPRESSURE_NS {
            log.backpressure_events += 1;
            blocked
        } else {
            0
        };
        log.entries.push(SendEntry {
            seq,
            sent_at,
            blocked_ns,
        });
        seq += 1;
        log.elapsed = start.elapsed();
    }
    write_terminator(&mut out)?;
    out.flush()?;
    log.elapsed = start.elapsed();
    Ok(())
}

pub fn connect(addr: impl ToSocketAddrs) -> Result<TcpStream> {
    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    Ok(stream)
}

/// Streams unthrottled to the processor for `warmup` and returns the mean rate it absorbed
/// over the final two thirds of the window.
pub fn calibrate_capacity(addr: impl ToSocketAddrs, dataset: &WireDataset, warmup: Duration) -> Result<f64> {
    if warmup.is_zero() {
        return Err(Error::Calibration("calibration window is empty".into()));
    }
    let stream = connect(addr)?;
    let mut log = SendLog::default();
    let started = Instant::now();
    if let Err(e) = send_paced(stream, dataset, None, LoadLimit::Duration(warmup), &mut log) {
        // a processor that hangs up once the window is over still yields a measurement
        let window_done = started.elapsed() >= warmup;
        let hung_up = matches!(&e, Error::Io(io) if matches!(io.kind(), ErrorKind::BrokenPipe | ErrorKind::ConnectionReset));
        if !(window_done && hung_up) {
            return Err(e);
        }
    }
    let capacity = steady_rate(&log, warmup);
    if !(capacity >= 1.0) {
        return Err(Error::Calibration(format!("processor absorbed {capacity:.3} instances/s, below 1")));
    }
    Ok(capacity)
}

fn steady_rate(log: &SendLog, window: Duration) -> f64 {
    let Some(first) = log.entries.first() else {
        return 0.0;
    };
    let from = first.sent_at + (window.as_nanos() / 3) as u64;
    let to = first.sent_at + window.as_nanos() as u64;
    let n = log
        .entries
        .iter()
        .filter(|e| e.sent_at >= from && e.sent_at < to)
        .count();
    n as f64 / (window.as_secs_f64() * 2.0 / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_drift_stream, synthetic_schema, NO_DRIFT};
    use std::io::Cursor;

    fn dataset(n: usize) -> WireDataset {
        let rows: Vec<Instance<f64>> = synthetic_drift_stream(9, NO_DRIFT).take(n).collect();
        WireDataset::new(synthetic_schema(), &rows).unwrap()
    }

    #[test]
    fn frame_round_trip_and_guards() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        write_terminator(&mut buf).unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 5]);
        let mut r = Cursor::new(buf);
        assert_eq!(read_frame(&mut r).unwrap().unwrap(), b"hello");
        assert_eq!(read_frame(&mut r).unwrap(), None);
        assert!(matches!(read_frame(&mut r), Err(Error::Protocol(_))));

        let mut big = Cursor::new(((1u32 << 24) + 1).to_be_bytes().to_vec());
        assert!(matches!(read_frame(&mut big), Err(Error::Protocol(_))));
        let mut short = Cursor::new(vec![0, 0, 0, 9, b'a']);
        assert!(matches!(read_frame(&mut short), Err(Error::Protocol(_))));
    }

    #[test]
    fn looping_count_limit_and_terminator() {
        let data = dataset(50);
        let mut wire = Vec::new();
        let log = generate_load(&mut wire, &data, None, LoadLimit::Count(120)).unwrap();
        assert_eq!(log.entries.len(), 120);
        let mut r = Cursor::new(wire);
        let schema = read_handshake(&mut r).unwrap();
        assert_eq!(schema, data.schema);
        let mut rows = Vec::new();
        while let Some(frame) = read_frame(&mut r).unwrap() {
            let text = String::from_utf8(frame).unwrap();
            rows.push(text.splitn(3, ',').nth(2).unwrap().to_string());
        }
        assert_eq!(r.position() as usize, r.get_ref().len());
        let expected: Vec<&String> = data.rows.iter().chain(&data.rows).chain(&data.rows[..20]).collect();
        assert!(rows.iter().eq(expected));
    }

    #[test]
    fn zero_duration_sends_only_header_and_terminator() {
        let mut wire = Vec::new();
        let log = generate_load(&mut wire, &dataset(5), Some(100.0), LoadLimit::Duration(Duration::ZERO)).unwrap();
        assert!(log.entries.is_empty());
        assert_eq!(&wire[wire.len() - 4..], &[0, 0, 0, 0]);
        assert!(generate_load(Vec::new(), &dataset(5), Some(0.0), LoadLimit::Count(1)).is_err());
    }

    #[test]
    fn pacing_matches_rate() {
        let log = generate_load(io::sink(), &dataset(10), Some(200.0), LoadLimit::Duration(Duration::from_secs(1))).unwrap();
        assert!((190..=210).contains(&log.entries.len()), "{}", log.entries.len());
    }

    #[test]
    fn receiver_yields_records_in_order() {
        let data = dataset(30);
        let mut wire = Vec::new();
        generate_load(&mut wire, &data, None, LoadLimit::Count(30)).unwrap();
        let incoming = receive_stream::<f64, _>(Cursor::new(wire), 4).unwrap();
        let records: Vec<StreamRecord<f64>> = incoming.records.iter().map(|r| r.unwrap()).collect();
        assert_eq!(incoming.reader.join().unwrap().unwrap(), 30);
        assert!(records.iter().map(|r| r.seq).eq(0..30));
        for (r, row) in records.iter().zip(&data.rows) {
            assert_eq!(&data.schema.format_row(&r.instance), row);
            assert!(r.received_at >= r.sent_at);
        }
    }

    #[test]
    fn receiver_reports_gaps_and_garbage() {
        let schema = synthetic_schema();
        let mut wire = Vec::new();
        write_frame(&mut wire, schema.header_text().as_bytes()).unwrap();
        write_frame(&mut wire, b"1,0,0.1,0.2,0.3,1").unwrap();
        let incoming = receive_stream::<f64, _>(Cursor::new(wire), 4).unwrap();
        assert!(incoming.records.recv().unwrap().is_err());
        assert!(incoming.reader.join().unwrap().is_err());

        let mut wire = Vec::new();
        write_frame(&mut wire, b"not a header").unwrap();
        assert!(receive_stream::<f64, _>(Cursor::new(wire), 4).is_err());
    }

    #[test]
    fn rate_config_and_calibration_guards() {
        assert_eq!(RateConfig::new(0.5, 1000.0).unwrap().rate(), 500.0);
        assert!(RateConfig::new(0.0, 1000.0).is_err());
        assert!(RateConfig::new(1.5, 1000.0).is_err());
        assert!(RateConfig::new(0.5, 0.0).is_err());
        assert!(matches!(
            calibrate_capacity("127.0.0.1:9", &dataset(3), Duration::ZERO),
            Err(Error::Calibration(_))
        ));
    }
}
