use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use iqa_attack::oracle::MeanBrightness;
use iqa_attack::wire::{
    serve_connection, spawn_tcp_server, OracleRequest, OracleResponse, Transport, WireOracle,
};
use iqa_attack::{
    run_attack, AttackConfig, BuiltinScorer, Error, ImageTensor, QualityOracle, ScoreBounds, Shape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, shape: Shape) -> ImageTensor<f32> {
    ImageTensor::new(shape, (0..shape.len()).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn tcp_transport(addr: std::net::SocketAddr) -> Transport {
    Transport::Tcp {
        host: addr.ip().to_string(),
        port: addr.port(),
    }
}

#[test]
fn loopback_is_bit_exact_for_every_builtin() {
    let bounds = ScoreBounds::<f32>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for scorer in BuiltinScorer::ALL {
        let served: Arc<dyn QualityOracle<f32>> = Arc::from(scorer.build::<f32>(bounds));
        let (addr, _) = spawn_tcp_server(served, "127.0.0.1:0").unwrap();
        let remote = WireOracle::connect(&tcp_transport(addr), bounds, Duration::from_secs(10)).unwrap();
        let local = scorer.build::<f32>(bounds);
        for _ in 0..100 {
            let shape = Shape::new(rng.random_range(3..20), rng.random_range(3..20), 3);
            let img = random_image(&mut rng, shape);
            let a = remote.score(&img).unwrap();
            let b = local.score(&img).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{scorer}");
        }
        assert_eq!(remote.queries_used(), 100);
    }
}

#[test]
fn f64_oracle_over_f32_payload() {
    // f32-representable images widen exactly, so f64 scorers also match.
    let bounds = ScoreBounds::<f64>::default();
    let served = Arc::new(MeanBrightness::new(bounds));
    let (addr, _) = spawn_tcp_server(served.clone(), "127.0.0.1:0").unwrap();
    let remote = WireOracle::connect(&tcp_transport(addr), bounds, Duration::from_secs(10)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let img: ImageTensor<f64> = random_image(&mut rng, Shape::new(8, 8, 3)).cast();
        assert_eq!(
            remote.score(&img).unwrap().to_bits(),
            served.evaluate(&img).to_bits()
        );
    }
}

#[test]
fn attack_through_the_wire_matches_in_process() {
    let bounds = ScoreBounds::<f32>::default();
    let served: Arc<dyn QualityOracle<f32>> = Arc::from(BuiltinScorer::Sharpness.build::<f32>(bounds));
    let (addr, _) = spawn_tcp_server(served, "127.0.0.1:0").unwrap();
    let remote = WireOracle::connect(&tcp_transport(addr), bounds, Duration::from_secs(10)).unwrap();
    let local = BuiltinScorer::Sharpness.build::<f32>(bounds);
    let img = random_image(&mut ChaCha8Rng::seed_from_u64(3), Shape::new(12, 12, 3));
    let config = AttackConfig::<f32> {
        max_iterations: 60,
        ..AttackConfig::default()
    };
    let a = run_attack(&img, &remote, &config).unwrap();
    let b = run_attack(&img, &local, &config).unwrap();
    assert_eq!(a, b);
}

/// A server that sends a handshake and then answers every request with `reply(id)`.
fn fake_server(
    handshake: &'static str,
    reply: impl Fn(u64) -> String + Send + 'static,
) -> Transport {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut writer = stream.try_clone().unwrap();
        writeln!(writer, "{handshake}").unwrap();
        for line in BufReader::new(stream).lines() {
            let line = line.unwrap();
            let req: OracleRequest = serde_json::from_str(&line).unwrap();
            writeln!(writer, "{}", reply(req.id)).unwrap();
        }
    });
    tcp_transport(addr)
}

const HELLO: &str = r#"{"proto":"iqa-oracle/1","beta1":0.0,"beta2":10.0}"#;

fn probe() -> ImageTensor<f64> {
    ImageTensor::filled(Shape::new(4, 4, 1), 0.5).unwrap()
}

#[test]
fn mismatched_id_is_reported() {
    let t = fake_server(HELLO, |id| format!(r#"{{"id":{},"score":1.0}}"#, id + 1));
    let oracle = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).unwrap();
    let err = oracle.score(&probe()).unwrap_err();
    assert!(matches!(err, Error::IdMismatch { expected: 1, got: 2 }), "{err}");
    // the stream is out of sync from here on
    assert!(matches!(oracle.score(&probe()), Err(Error::Transport(_))));
}

#[test]
fn non_finite_score_is_a_protocol_error() {
    let t = fake_server(HELLO, |id| format!(r#"{{"id":{id},"score":1e999}}"#));
    let oracle = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).unwrap();
    assert!(matches!(oracle.score(&probe()), Err(Error::Protocol(_))));
}

#[test]
fn remote_errors_keep_the_connection() {
    let t = fake_server(HELLO, |id| {
        if id % 2 == 1 {
            format!(r#"{{"id":{id},"error":"model crashed"}}"#)
        } else {
            format!(r#"{{"id":{id},"score":42.0}}"#)
        }
    });
    let oracle = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).unwrap();
    assert!(matches!(oracle.score(&probe()), Err(Error::Remote(m)) if m == "model crashed"));
    // out-of-range scores are clamped to the bounds
    assert_eq!(oracle.score(&probe()).unwrap(), 10.0);
}

#[test]
fn handshake_bound_mismatch_is_rejected() {
    let t = fake_server(r#"{"proto":"iqa-oracle/1","beta1":1.0,"beta2":10.0}"#, |_| String::new());
    let err = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)), "{err}");

    let t = fake_server(r#"{"proto":"other/2","beta1":0.0,"beta2":10.0}"#, |_| String::new());
    assert!(WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).is_err());
}

#[test]
fn silent_server_times_out() {
    let t = fake_server(HELLO, |_| {
        thread::sleep(Duration::from_secs(3));
        String::new()
    });
    let oracle = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_millis(200)).unwrap();
    assert!(matches!(oracle.score(&probe()), Err(Error::Timeout(_))));
}

#[test]
fn connection_refused() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = WireOracle::<f64>::connect(&tcp_transport(addr), ScoreBounds::default(), Duration::from_secs(1))
        .unwrap_err();
    assert!(matches!(err, Error::Transport(_)));
}

#[test]
fn stdio_transport_with_shell_command() {
    // a canned server: handshake, then one fixed response
    let t = Transport::Stdio(format!(
        r#"printf '%s\n%s\n' '{HELLO}' '{{"id":1,"score":2.5}}'; cat > /dev/null"#
    ));
    let oracle = WireOracle::<f64>::connect(&t, ScoreBounds::default(), Duration::from_secs(5)).unwrap();
    assert_eq!(oracle.score(&probe()).unwrap(), 2.5);
}

fn run_server(lines: &[String]) -> Vec<String> {
    let oracle = MeanBrightness::<f32>::new(ScoreBounds::default());
    let input = lines.join("\n") + "\n";
    let mut out = Vec::new();
    serve_connection(&oracle, input.as_bytes(), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(String::from).collect()
}

#[test]
fn server_isolates_faults() {
    let img = ImageTensor::filled(Shape::new(2, 2, 3), 0.25f32).unwrap();
    let good = serde_json::to_string(&OracleRequest::from_image(5, &img)).unwrap();
    let mut truncated = OracleRequest::from_image(6, &img);
    truncated.data_b64.truncate(8);
    let truncated = serde_json::to_string(&truncated).unwrap();
    let bad_range = serde_json::to_string(&OracleRequest {
        id: 8,
        h: 1,
        w: 1,
        c: 1,
        data_b64: "AAAAQA==".into(), // 2.0f32
    })
    .unwrap();

    let out = run_server(&[
        good.clone(),
        truncated,
        "{not json".into(),
        r#"{"id":7,"h":1}"#.into(),
        bad_range,
        good,
    ]);
    assert_eq!(out.len(), 7);
    assert!(out[0].contains("iqa-oracle/1"));
    let parsed: Vec<OracleResponse> = out[1..].iter().map(|l| OracleResponse::parse(l).unwrap()).collect();
    assert_eq!(parsed[0], OracleResponse::Score { id: 5, score: 2.5 });
    assert!(matches!(parsed[1], OracleResponse::Error { id: 6, .. }));
    assert!(matches!(parsed[2], OracleResponse::Error { id: 0, .. }));
    assert!(matches!(parsed[3], OracleResponse::Error { id: 7, .. }));
    assert!(matches!(parsed[4], OracleResponse::Error { id: 8, .. }));
    assert_eq!(parsed[5], OracleResponse::Score { id: 5, score: 2.5 });
}

#[test]
fn server_preserves_order_over_1000_requests() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lines: Vec<String> = (1..=1000u64)
        .map(|id| {
            let img = random_image(&mut rng, Shape::new(3, 3, 1));
            serde_json::to_string(&OracleRequest::from_image(id, &img)).unwrap()
        })
        .collect();
    let out = run_server(&lines);
    assert_eq!(out.len(), 1001);
    for (i, line) in out[1..].iter().enumerate() {
        let r = OracleResponse::parse(line).unwrap();
        assert_eq!(r.id(), i as u64 + 1);
        assert!(matches!(r, OracleResponse::Score { .. }));
    }
}

#[test]
fn in_memory_pipe_round_trip() {
    use std::os::unix::net::UnixStream;
    let (client, server) = UnixStream::pair().unwrap();
    let served = MeanBrightness::<f32>::new(ScoreBounds::default());
    let reader = BufReader::new(server.try_clone().unwrap());
    let handle = thread::spawn(move || serve_connection(&served, reader, server).unwrap());

    let read_half = client.try_clone().unwrap();
    let closer = client.try_clone().unwrap();
    let remote =
        WireOracle::<f32>::from_streams(read_half, client, ScoreBounds::default(), Duration::from_secs(5)).unwrap();
    let local = MeanBrightness::<f32>::new(ScoreBounds::default());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let img = random_image(&mut rng, Shape::new(5, 6, 3));
        assert_eq!(remote.score(&img).unwrap().to_bits(), local.evaluate(&img).to_bits());
    }
    drop(remote);
    closer.shutdown(std::net::Shutdown::Both).unwrap();
    assert_eq!(handle.join().unwrap(), 50);
}
