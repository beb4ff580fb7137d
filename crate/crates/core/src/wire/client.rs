use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::marker::PhantomData;
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::oracle::{QualityOracle, QueryCounter, ScoreBounds};
use crate::scalar::Scalar;
use crate::wire::protocol::{Handshake, OracleRequest, OracleResponse, PROTOCOL};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Where an external scorer lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Shell command whose stdin/stdout carry the protocol.
    Stdio(String),
    Tcp { host: String, port: u16 },
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Stdio(cmd) => write!(f, "cmd:{cmd}"),
            Transport::Tcp { host, port } => write!(f, "tcp:{host}:{port}"),
        }
    }
}

impl FromStr for Transport {
    type Err = Error;

    /// `cmd:<shell command>` or `tcp:<host>:<port>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            if cmd.trim().is_empty() {
                return Err(Error::Argument("empty oracle command".into()));
            }
            return Ok(Transport::Stdio(cmd.to_string()));
        }
        if let Some(addr) = s.strip_prefix("tcp:") {
            let (host, port) = addr
                .rsplit_once(':')
                .ok_or_else(|| Error::Argument(format!("expected tcp:HOST:PORT, got `{s}`")))?;
            let port = port
                .parse()
                .map_err(|_| Error::Argument(format!("bad port in `{s}`")))?;
            return Ok(Transport::Tcp {
                host: host.to_string(),
                port,
            });
        }
        Err(Error::Argument(format!("unknown oracle transport `{s}`")))
    }
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
    /// Set after any transport or framing failure; the stream may be out of sync.
    broken: Option<String>,
}

impl Connection {
    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Transport(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Transport("oracle closed the connection".into()))
            }
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// An out-of-process scorer speaking the line protocol. One request is in
/// flight at a time; scores are clamped to the configured bounds.
pub struct WireOracle<T> {
    conn: Mutex<Connection>,
    bounds: ScoreBounds<T>,
    timeout: Duration,
    queries: QueryCounter,
    _scalar: PhantomData<fn() -> T>,
}

impl<T> fmt::Debug for WireOracle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WireOracle")
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

fn spawn_reader(input: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(input);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

pub fn connect_external_oracle<T: Scalar>(
    transport: &Transport,
    bounds: ScoreBounds<T>,
) -> Result<WireOracle<T>> {
    WireOracle::connect(transport, bounds, DEFAULT_TIMEOUT)
}

impl<T: Scalar> WireOracle<T> {
    pub fn connect(
        transport: &Transport,
        bounds: ScoreBounds<T>,
        timeout: Duration,
    ) -> Result<Self> {
        let conn = match transport {
            Transport::Stdio(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Transport(format!("spawning `{cmd}`: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Connection {
                    writer: Box::new(stdin),
                    lines: spawn_reader(stdout),
                    next_id: 1,
                    child: Some(child),
                    broken: None,
                }
            }
            Transport::Tcp { host, port } => {
                let stream = TcpStream::connect((host.as_str(), *port))
                    .map_err(|e| Error::Transport(format!("connecting to {host}:{port}: {e}")))?;
                stream.set_nodelay(true).ok();
                let read_half = stream
                    .try_clone()
                    .map_err(|e| Error::Transport(e.to_string()))?;
                Connection {
                    writer: Box::new(stream),
                    lines: spawn_reader(read_half),
                    next_id: 1,
                    child: None,
                    broken: None,
                }
            }
        };
        Self::handshake(conn, bounds, timeout)
    }

    /// Wraps already-open streams, e.g. in-memory pipes.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        bounds: ScoreBounds<T>,
        timeout: Duration,
    ) -> Result<Self> {
        let conn = Connection {
            writer: Box::new(writer),
            lines: spawn_reader(reader),
            next_id: 1,
            child: None,
            broken: None,
        };
        Self::handshake(conn, bounds, timeout)
    }

    fn handshake(mut conn: Connection, bounds: ScoreBounds<T>, timeout: Duration) -> Result<Self> {
        let line = conn.recv(timeout)?;
        let hello: Handshake = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::Protocol(format!("bad handshake `{}`: {e}", line.trim_end())))?;
        if hello.proto != PROTOCOL {
            return Err(Error::Protocol(format!(
                "server speaks `{}`, expected `{PROTOCOL}`",
                hello.proto
            )));
        }
        let expected = Handshake::new(&bounds);
        if hello.beta1 != expected.beta1 || hello.beta2 != expected.beta2 {
            return Err(Error::Protocol(format!(
                "server bounds ({}, {}) differ from configured ({}, {})",
                hello.beta1, hello.beta2, expected.beta1, expected.beta2
            )));
        }
        Ok(WireOracle {
            conn: Mutex::new(conn),
            bounds,
            timeout,
            queries: QueryCounter::default(),
            _scalar: PhantomData,
        })
    }

    fn exchange(&self, img: &ImageTensor<T>) -> Result<T> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(reason) = &conn.broken {
            return Err(Error::Transport(format!("connection unusable: {reason}")));
        }
        let id = conn.next_id;
        conn.next_id += 1;

        let result = (|| {
            let mut line = serde_json::to_string(&OracleRequest::from_image(id, img))
                .expect("request serializes");
            line.push('\n');
            conn.writer
                .write_all(line.as_bytes())
                .and_then(|_| conn.writer.flush())
                .map_err(|e| Error::Transport(e.to_string()))?;
            let reply = conn.recv(self.timeout)?;
            let response = OracleResponse::parse(reply.trim_end())?;
            if response.id() != id {
                return Err(Error::IdMismatch {
                    expected: id,
                    got: response.id(),
                });
            }
            Ok(response)
        })();

        match result {
            Ok(OracleResponse::Score { score, .. }) => Ok(self.bounds.clamp(T::of(score))),
            // scorer-side failure; framing is intact
            Ok(OracleResponse::Error { error, .. }) => Err(Error::Remote(error)),
            Err(e) => {
                conn.broken = Some(e.to_string());
                Err(e)
            }
        }
    }
}

impl<T: Scalar> QualityOracle<T> for WireOracle<T> {
    fn score(&self, img: &ImageTensor<T>) -> Result<T> {
        self.queries.tick();
        self.exchange(img)
    }

    fn bounds(&self) -> ScoreBounds<T> {
        self.bounds
    }

    fn queries_used(&self) -> u64 {
        self.queries.get()
    }
}
