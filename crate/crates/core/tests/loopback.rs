use std::io::Cursor;
use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use streambag::clock::process_cpu_time;
use streambag::data::{synthetic_drift_stream, synthetic_schema, Instance, NO_DRIFT};
use streambag::ensemble::{Algorithm, Ensemble, EnsembleConfig};
use streambag::executor::{run, ExecutorConfig};
use streambag::metrics::RunMetrics;
use streambag::netstream::{
    calibrate_capacity, connect, generate_load, receive_stream, write_frame, LoadLimit, WireDataset,
};

fn dataset(n: usize) -> WireDataset {
    let rows: Vec<Instance<f64>> = synthetic_drift_stream(31, NO_DRIFT).take(n).collect();
    WireDataset::new(synthetic_schema(), &rows).unwrap()
}

/// Accepts one connection and drains it; returns how many records arrived.
fn drain_one(listener: TcpListener) -> thread::JoinHandle<u64> {
    thread::spawn(move || {
        let (socket, _) = listener.accept().unwrap();
        let incoming = receive_stream::<f64, _>(socket, 256).unwrap();
        let n = incoming.records.iter().map(|r| r.unwrap()).count() as u64;
        incoming.reader.join().unwrap().unwrap();
        n
    })
}

#[test]
fn loopback_round_trip_is_exact() {
    let data = dataset(5000);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let sender = {
        let data = data.clone();
        thread::spawn(move || generate_load(connect(addr).unwrap(), &data, None, LoadLimit::Count(10_000)).unwrap())
    };
    let (socket, _) = listener.accept().unwrap();
    let incoming = receive_stream::<f64, _>(socket, 64).unwrap();
    assert_eq!(incoming.schema, data.schema);
    let mut n = 0usize;
    for record in incoming.records.iter() {
        let record = record.unwrap();
        assert_eq!(record.seq, n as u64);
        assert_eq!(data.schema.format_row(&record.instance), data.rows[n % data.rows.len()]);
        assert!(record.received_at >= record.sent_at);
        n += 1;
    }
    assert_eq!(n, 10_000);
    let log = sender.join().unwrap();
    assert_eq!(log.entries.len(), 10_000);
}

#[test]
fn token_bucket_pacing_over_ten_seconds() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let receiver = drain_one(listener);
    let log = generate_load(connect(addr).unwrap(), &dataset(50), Some(100.0), LoadLimit::Duration(Duration::from_secs(10))).unwrap();
    let sent = log.entries.len();
    assert!((990..=1010).contains(&sent), "{sent} frames");
    assert_eq!(receiver.join().unwrap(), sent as u64);
}

#[test]
fn calibration_against_a_no_op_sink() {
    let mut rates = Vec::new();
    for _ in 0..2 {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let receiver = drain_one(listener);
        rates.push(calibrate_capacity(addr, &dataset(200), Duration::from_millis(1500)).unwrap());
        receiver.join().unwrap();
    }
    assert!(rates.iter().all(|&r| r > 1e4), "{rates:?}");
    let (a, b) = (rates[0], rates[1]);
    assert!((a - b).abs() / a.max(b) <= 0.15, "{rates:?}");
}

#[test]
fn unreachable_processor_fails_calibration() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    assert!(calibrate_capacity(port, &dataset(5), Duration::from_millis(100)).is_err());
}

#[test]
fn slow_stream_keeps_the_receiver_idle() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let sender = thread::spawn(move || {
        generate_load(connect(addr).unwrap(), &dataset(20), Some(10.0), LoadLimit::Duration(Duration::from_secs(5))).unwrap()
    });
    let (socket, _) = listener.accept().unwrap();
    let incoming = receive_stream::<f64, _>(socket, 200).unwrap();
    let mut ensemble = Ensemble::<f64>::new(EnsembleConfig::new(Algorithm::OzaBag, 2), &incoming.schema).unwrap();
    let cpu = process_cpu_time();
    let start = Instant::now();
    let mut metrics = RunMetrics::default();
    let summary = run(&mut ensemble, incoming.records, &mut metrics, &ExecutorConfig::mini_batch(50, 1)).unwrap();
    let used = process_cpu_time() - cpu;
    assert!(start.elapsed() >= Duration::from_millis(4900));
    assert!(used < Duration::from_millis(50), "{used:?}");
    assert_eq!(summary.instances, sender.join().unwrap().entries.len() as u64);
    assert_eq!(metrics.accuracy.total, summary.instances);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn garbage_after_handshake_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let mut wire = Vec::new();
        write_frame(&mut wire, synthetic_schema().header_text().as_bytes()).unwrap();
        wire.extend_from_slice(&bytes);
        let incoming = receive_stream::<f64, _>(Cursor::new(wire), 8).unwrap();
        let _ = incoming.records.iter().count();
        let _ = incoming.reader.join().expect("reader thread must not panic");
    }

    #[test]
    fn garbage_handshake_is_an_error_not_a_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = receive_stream::<f64, _>(Cursor::new(bytes), 8);
    }

    #[test]
    fn mutated_frames_never_panic(seed in any::<u64>(), flips in proptest::collection::vec((0usize..4096, any::<u8>()), 1..8)) {
        let data = dataset(20);
        let mut wire = Vec::new();
        generate_load(&mut wire, &data, None, LoadLimit::Count(seed % 40)).unwrap();
        let header = synthetic_schema().header_text().len() + 4;
        for (pos, byte) in flips {
            let len = wire.len();
            if len > header {
                wire[header + pos % (len - header)] = byte;
            }
        }
        let incoming = receive_stream::<f64, _>(Cursor::new(wire), 8).unwrap();
        let _ = incoming.records.iter().count();
        let _ = incoming.reader.join().expect("reader thread must not panic");
    }
}
