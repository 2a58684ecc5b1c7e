use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;

use super::protocol::{self, Hello, HelloReply, Request, Response};
use super::{ImageInput, Segmenter, SegmenterSpec};
use crate::error::{Error, Result};
use crate::mask::{io, MaskSet};
use crate::space::ParamValue;

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOptions {
    /// Per request, and for connecting plus the handshake.
    pub timeout: Duration,
    /// Extra attempts after a retryable failure.
    pub retries: u32,
    pub protocol: u32,
    pub client: String,
}

struct Connection {
    lines: Receiver<std::io::Result<String>>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    worker: String,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn spawn_reader<R: Read + Send + 'static>(source: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
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

impl Connection {
    fn open(endpoint: &SegmenterSpec, opts: &ExternalOptions) -> Result<Connection> {
        let mut conn = match endpoint {
            SegmenterSpec::Command(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::WorkerDown(format!("launching `{}`: {e}", argv.join(" "))))?;
                let stdout = child.stdout.take().expect("piped stdout");
                let stdin = child.stdin.take().expect("piped stdin");
                Connection {
                    lines: spawn_reader(stdout),
                    writer: Box::new(stdin),
                    child: Some(child),
                    worker: String::new(),
                }
            }
            SegmenterSpec::Tcp(addr) => {
                let target = addr
                    .to_socket_addrs()
                    .map_err(|e| Error::WorkerDown(format!("resolving {addr}: {e}")))?
                    .next()
                    .ok_or_else(|| Error::WorkerDown(format!("{addr} resolves to no address")))?;
                let stream = TcpStream::connect_timeout(&target, opts.timeout)
                    .map_err(|e| Error::WorkerDown(format!("connecting to {addr}: {e}")))?;
                let _ = stream.set_nodelay(true);
                let reader = stream
                    .try_clone()
                    .map_err(|e| Error::WorkerDown(format!("cloning stream to {addr}: {e}")))?;
                Connection {
                    lines: spawn_reader(reader),
                    writer: Box::new(stream),
                    child: None,
                    worker: String::new(),
                }
            }
            SegmenterSpec::Builtin => return Err(Error::invalid("the builtin segmenter needs no connection")),
        };
        let reply = conn.handshake(opts)?;
        conn.worker = reply.worker;
        Ok(conn)
    }

    fn send(&mut self, line: &str) -> Result<()> {
        let write = |w: &mut Box<dyn Write + Send>| -> std::io::Result<()> {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()
        };
        write(&mut self.writer).map_err(|e| Error::WorkerDown(format!("writing to worker: {e}")))
    }

    fn recv(&mut self, deadline: Instant, timeout: Duration) -> Result<String> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::WorkerDown(format!("reading from worker: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::SegmenterTimeout(timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => Err(Error::WorkerDown("worker closed its output".into())),
        }
    }

    fn handshake(&mut self, opts: &ExternalOptions) -> Result<HelloReply> {
        self.send(&protocol::encode(&Hello {
            protocol: opts.protocol,
            client: opts.client.clone(),
        }))?;
        let line = self.recv(Instant::now() + opts.timeout, opts.timeout).map_err(|e| match e {
            Error::SegmenterTimeout(ms) => Error::WorkerDown(format!("no handshake within {ms} ms")),
            other => other,
        })?;
        let reply: HelloReply = protocol::decode(&line)?;
        if reply.protocol != opts.protocol {
            return Err(Error::Protocol(format!(
                "protocol version mismatch: client speaks {}, worker `{}` speaks {}",
                opts.protocol, reply.worker, reply.protocol
            )));
        }
        if let Some(e) = reply.error {
            return Err(Error::Protocol(format!("worker `{}` refused the handshake: {e}", reply.worker)));
        }
        Ok(reply)
    }

    fn call(&mut self, req: &Request, line: &str, timeout: Duration) -> Result<Response> {
        self.send(line)?;
        let deadline = Instant::now() + timeout;
        loop {
            let line = self.recv(deadline, timeout)?;
            let resp: Response = protocol::decode(&line)?;
            if resp.id == req.id {
                return Ok(resp);
            }
            log::debug!("discarding stale response {} while waiting for {}", resp.id, req.id);
        }
    }
}

/// Client for workers launched as a command (stdin/stdout) or reached over
/// TCP. Connections are pooled, one request in flight per connection.
pub struct ExternalSegmenter {
    endpoint: SegmenterSpec,
    opts: ExternalOptions,
    pool: Mutex<Vec<Connection>>,
    next_id: AtomicU64,
}

impl ExternalSegmenter {
    pub fn new(endpoint: SegmenterSpec, opts: ExternalOptions) -> Result<Self> {
        if opts.timeout.is_zero() {
            return Err(Error::Config("segmenter timeout must be positive".into()));
        }
        if endpoint == SegmenterSpec::Builtin {
            return Err(Error::Config("external segmenter needs `cmd:` or `tcp:`".into()));
        }
        Ok(ExternalSegmenter {
            endpoint,
            opts,
            pool: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(1),
        })
    }

    fn checkout(&self) -> Result<Connection> {
        if let Some(c) = self.pool.lock().expect("pool lock").pop() {
            return Ok(c);
        }
        Connection::open(&self.endpoint, &self.opts)
    }

    fn checkin(&self, conn: Connection) {
        self.pool.lock().expect("pool lock").push(conn);
    }

    /// Connects (or reuses a pooled connection) and returns the worker identity.
    pub fn handshake(&self) -> Result<String> {
        let conn = self.checkout()?;
        let worker = conn.worker.clone();
        self.checkin(conn);
        Ok(worker)
    }

    fn attempt(&self, req: &Request, line: &str, width: u32, height: u32) -> Result<MaskSet> {
        let mut conn = self.checkout()?;
        let resp = conn.call(req, line, self.opts.timeout)?;
        self.checkin(conn);
        resp.mask_set(width, height)
    }
}

impl Segmenter for ExternalSegmenter {
    fn id(&self) -> String {
        self.endpoint.to_string()
    }

    fn segment_params(&self, image: &ImageInput, params: &BTreeMap<String, ParamValue>, seed: u64) -> Result<MaskSet> {
        let (image_path, image_b64) = match &image.path {
            Some(p) => (Some(p.to_string_lossy().into_owned()), None),
            None => (
                None,
                Some(base64::engine::general_purpose::STANDARD.encode(io::encode_png(&image.grid)?)),
            ),
        };
        let req = Request {
            id: self.next_id.fetch_add(1, Ordering::Relaxed),
            image_path,
            image_b64,
            params: params.clone(),
            seed: Some(seed),
        };
        let line = protocol::encode(&req);
        let mut attempt = 0;
        loop {
            match self.attempt(&req, &line, image.grid.width(), image.grid.height()) {
                Ok(set) => return Ok(set),
                Err(e) if e.is_retryable() && attempt < self.opts.retries => {
                    attempt += 1;
                    log::warn!("request {} to {} failed ({e}); retry {attempt}/{}", req.id, self.endpoint, self.opts.retries);
                }
                Err(e) => return Err(e),
            }
        }
    }
}
