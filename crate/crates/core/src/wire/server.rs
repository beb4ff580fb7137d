use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::oracle::QualityOracle;
use crate::scalar::Scalar;
use crate::wire::protocol::{Handshake, OracleRequest, OracleResponse};

/// Serves one connection until the reader reaches end of input.
///
/// Requests are answered strictly in order. A malformed request gets an
/// error response carrying its id (0 if the id cannot be read) and the
/// connection stays open. Returns the number of requests answered.
pub fn serve_connection<T, O>(oracle: &O, reader: impl BufRead, mut writer: impl Write) -> io::Result<u64>
where
    T: Scalar,
    O: QualityOracle<T> + ?Sized,
{
    let hello = serde_json::to_string(&Handshake::new(&oracle.bounds())).expect("handshake");
    writeln!(writer, "{hello}")?;
    writer.flush()?;

    let mut answered = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = answer(oracle, &line);
        writeln!(writer, "{}", response.to_line())?;
        writer.flush()?;
        answered += 1;
    }
    Ok(answered)
}

fn answer<T: Scalar, O: QualityOracle<T> + ?Sized>(oracle: &O, line: &str) -> OracleResponse {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => {
            return OracleResponse::Error {
                id: 0,
                error: format!("malformed request: {e}"),
            }
        }
    };
    let id = value.get("id").and_then(|v| v.as_u64()).unwrap_or(0);
    let fail = |error: String| OracleResponse::Error { id, error };

    let request: OracleRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return fail(format!("malformed request: {e}")),
    };
    let img = match request.to_image::<T>() {
        Ok(img) => img,
        Err(e) => return fail(e.to_string()),
    };
    match oracle.score(&img) {
        Ok(score) => OracleResponse::Score {
            id,
            score: score.as_f64(),
        },
        Err(e) => fail(e.to_string()),
    }
}

/// Serves the protocol on this process's stdin/stdout.
pub fn serve_stdio<T: Scalar, O: QualityOracle<T> + ?Sized>(oracle: &O) -> io::Result<u64> {
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_connection(oracle, stdin.lock(), BufWriter::new(stdout.lock()))
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp<T, O>(oracle: Arc<O>, listener: TcpListener) -> io::Result<()>
where
    T: Scalar,
    O: QualityOracle<T> + ?Sized + 'static,
{
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                eprintln!("oracle server: accept failed: {e}");
                continue;
            }
        };
        let oracle = Arc::clone(&oracle);
        thread::spawn(move || {
            stream.set_nodelay(true).ok();
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve_connection(&*oracle, reader, BufWriter::new(stream));
        });
    }
    Ok(())
}

/// Binds `addr` and serves in a background thread; returns the bound address.
pub fn spawn_tcp_server<T, O>(
    oracle: Arc<O>,
    addr: impl ToSocketAddrs,
) -> io::Result<(SocketAddr, JoinHandle<io::Result<()>>)>
where
    T: Scalar,
    O: QualityOracle<T> + ?Sized + 'static,
{
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let handle = thread::spawn(move || serve_tcp(oracle, listener));
    Ok((local, handle))
}
