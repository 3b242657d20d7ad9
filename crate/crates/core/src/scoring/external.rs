//! Client for scorers running in another process, over a child's stdio or TCP.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::protocol::{bio_response, role_response, sense_response, Hello, WireRequest, WireResponse};
use super::{BioRequest, RoleRequest, Scorer, SenseRequest, TagDistribution};
use crate::error::{Error, Result};
use crate::frames::BaseRole;

type Pending = Arc<Mutex<HashMap<u64, Sender<WireResponse>>>>;

/// Several batches may be in flight from different threads; a reader thread
/// routes each response to its batch by request id.
pub struct ExternalScorer {
    writer: Mutex<Box<dyn Write + Send>>,
    pending: Pending,
    next_id: AtomicU64,
    timeout: Duration,
    child: Mutex<Option<Child>>,
    peer: String,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer").field("peer", &self.peer).finish()
    }
}

fn transport(peer: &str, e: impl std::fmt::Display) -> Error {
    Error::Transport(format!("{peer}: {e}"))
}

impl ExternalScorer {
    /// Runs `command` through `sh -c` and talks to its stdin/stdout.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport(command, e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Self::start(Box::new(stdin), stdout, Some(child), timeout, command.to_string())
    }

    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| transport(addr, e))?;
        stream.set_nodelay(true).ok();
        let reader = stream.try_clone().map_err(|e| transport(addr, e))?;
        Self::start(Box::new(stream), reader, None, timeout, addr.to_string())
    }

    fn start<R: Read + Send + 'static>(
        mut writer: Box<dyn Write + Send>,
        reader: R,
        child: Option<Child>,
        timeout: Duration,
        peer: String,
    ) -> Result<Self> {
        let (hello_tx, hello_rx) = mpsc::channel::<std::result::Result<String, String>>();
        let pending: Pending = Arc::default();
        let routes = Arc::clone(&pending);
        let name = peer.clone();
        thread::Builder::new()
            .name("scorer-reader".into())
            .spawn(move || read_loop(BufReader::new(reader), hello_tx, routes, name))
            .map_err(|e| transport(&peer, e))?;

        let hello = serde_json::to_string(&Hello::current()).expect("hello serializes");
        writeln!(writer, "{hello}")
            .and_then(|_| writer.flush())
            .map_err(|e| transport(&peer, e))?;
        let scorer = ExternalScorer {
            writer: Mutex::new(writer),
            pending,
            next_id: AtomicU64::new(1),
            timeout,
            child: Mutex::new(child),
            peer,
        };
        match hello_rx.recv_timeout(timeout) {
            Ok(Ok(line)) => Hello::check(&line)?,
            Ok(Err(e)) => return Err(transport(&scorer.peer, e)),
            Err(_) => return Err(transport(&scorer.peer, "no handshake before timeout")),
        }
        debug!("connected to scorer {}", scorer.peer);
        Ok(scorer)
    }

    /// Sends one batch and waits for all its responses.
    fn round_trip(&self, requests: Vec<WireRequest>) -> Result<Vec<(u64, WireResponse)>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let (tx, rx) = mpsc::channel();
        let ids: Vec<u64> = requests.iter().map(|r| r.id).collect();
        {
            let mut routes = self.pending.lock().expect("pending lock");
            for id in &ids {
                routes.insert(*id, tx.clone());
            }
        }
        drop(tx);
        let sent = self.send(&requests);
        let result = sent.and_then(|_| self.collect(&ids, &rx));
        let mut routes = self.pending.lock().expect("pending lock");
        for id in &ids {
            routes.remove(id);
        }
        result
    }

    fn send(&self, requests: &[WireRequest]) -> Result<()> {
        let mut buf = Vec::new();
        for r in requests {
            serde_json::to_writer(&mut buf, r).map_err(|e| Error::Protocol(e.to_string()))?;
            buf.push(b'\n');
        }
        let mut w = self.writer.lock().expect("writer lock");
        w.write_all(&buf)
            .and_then(|_| w.flush())
            .map_err(|e| transport(&self.peer, e))
    }

    fn collect(&self, ids: &[u64], rx: &Receiver<WireResponse>) -> Result<Vec<(u64, WireResponse)>> {
        let deadline = Instant::now() + self.timeout;
        let mut got: HashMap<u64, WireResponse> = HashMap::with_capacity(ids.len());
        while got.len() < ids.len() {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(resp) => {
                    let id = resp.id().expect("routed responses carry ids");
                    got.insert(id, resp);
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(transport(
                        &self.peer,
                        format!("{} of {} responses missing after {:?}", ids.len() - got.len(), ids.len(), self.timeout),
                    ))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(transport(&self.peer, "connection closed"));
                }
            }
        }
        Ok(ids.iter().map(|id| (*id, got.remove(id).expect("every id answered"))).collect())
    }

    fn ids(&self, n: usize) -> Vec<u64> {
        let first = self.next_id.fetch_add(n as u64, Ordering::Relaxed);
        (first..first + n as u64).collect()
    }
}

fn read_loop<R: BufRead>(
    reader: R,
    hello: Sender<std::result::Result<String, String>>,
    routes: Pending,
    peer: String,
) {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(line)) => {
            let _ = hello.send(Ok(line));
        }
        Some(Err(e)) => {
            let _ = hello.send(Err(e.to_string()));
            return;
        }
        None => {
            let _ = hello.send(Err("closed before handshake".to_string()));
            return;
        }
    }
    for line in lines {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                warn!("{peer}: read failed: {e}");
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let resp: WireResponse = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warn!("{peer}: unreadable response {line:?}: {e}");
                continue;
            }
        };
        let Some(id) = resp.id() else {
            warn!("{peer}: response without id: {line}");
            continue;
        };
        let route = routes.lock().expect("pending lock").get(&id).cloned();
        match route {
            Some(tx) => {
                let _ = tx.send(resp);
            }
            None => warn!("{peer}: response for unknown request {id}"),
        }
    }
    // Dropping the senders wakes every waiting batch with a disconnect.
    routes.lock().expect("pending lock").clear();
}

impl Scorer for ExternalScorer {
    fn score_senses(&self, requests: &[SenseRequest]) -> Result<Vec<f64>> {
        let ids = self.ids(requests.len());
        let wire = ids.iter().zip(requests).map(|(id, r)| WireRequest::sense(*id, r)).collect();
        self.round_trip(wire)?
            .iter()
            .map(|(id, resp)| sense_response(*id, resp))
            .collect()
    }

    fn score_roles(&self, requests: &[RoleRequest]) -> Result<Vec<BTreeMap<BaseRole, f64>>> {
        let ids = self.ids(requests.len());
        let wire = ids.iter().zip(requests).map(|(id, r)| WireRequest::role(*id, r)).collect();
        self.round_trip(wire)?
            .iter()
            .zip(requests)
            .map(|((id, resp), req)| role_response(*id, req, resp))
            .collect()
    }

    fn score_bio(&self, requests: &[BioRequest]) -> Result<Vec<TagDistribution>> {
        let ids = self.ids(requests.len());
        let wire = ids.iter().zip(requests).map(|(id, r)| WireRequest::bio(*id, r)).collect();
        self.round_trip(wire)?
            .iter()
            .zip(requests)
            .map(|((id, resp), req)| bio_response(*id, req, resp))
            .collect()
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.lock().ok().and_then(|mut c| c.take()) {
            // closing stdin lets a well-behaved server exit on its own
            drop(std::mem::replace(
                self.writer.get_mut().expect("writer lock"),
                Box::new(std::io::sink()),
            ));
            let deadline = Instant::now() + Duration::from_millis(500);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
