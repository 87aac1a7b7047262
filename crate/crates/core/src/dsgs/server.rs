use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::{self, JoinHandle};

use log::{debug, error, warn};

use super::wire::{read_message, write_message, WireMessage};
use crate::stats::{check_lambda, GlobalStats, Hyper, SparseDelta};
use crate::Result;

/// Everything the server owns. Guarded by one readers-writer lock: snapshots
/// read, pushes write.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    pub stats: GlobalStats,
    pub lambda: f64,
    /// Number of pushes applied so far.
    pub merges: u64,
    /// Every applied push in application order, when recording is enabled.
    pub push_log: Option<Vec<SparseDelta>>,
}

impl ServerState {
    pub fn new(hyper: &Hyper, lambda: f64, record_pushes: bool) -> Self {
        ServerState {
            stats: GlobalStats::new(hyper.topics, hyper.vocab),
            lambda,
            merges: 0,
            push_log: record_pushes.then(Vec::new),
        }
    }

    /// Merge one pushed delta. A rejected delta leaves the state untouched.
    pub fn apply_push(&mut self, delta: SparseDelta) -> Result<()> {
        self.stats.merge_delta(&delta, self.lambda)?;
        self.merges += 1;
        if let Some(log) = &mut self.push_log {
            log.push(delta);
        }
        Ok(())
    }

    pub fn snapshot_message(&self) -> WireMessage {
        WireMessage::Snapshot {
            topics: self.stats.topics() as u32,
            vocab: self.stats.vocab() as u32,
            lambda: self.lambda,
            entries: self.stats.entries(),
        }
    }
}

/// Re-apply a logged push sequence to fresh statistics.
pub fn replay(topics: usize, vocab: usize, lambda: f64, pushes: &[SparseDelta]) -> Result<GlobalStats> {
    let mut stats = GlobalStats::new(topics, vocab);
    for delta in pushes {
        stats.merge_delta(delta, lambda)?;
    }
    Ok(stats)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ServerOptions {
    pub record_pushes: bool,
}

struct Shared {
    state: RwLock<ServerState>,
    shutdown: AtomicBool,
}

/// A running parameter server. Dropping the handle leaves the server
/// running; call [`ServerHandle::shutdown`] to stop accepting connections.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Copy of the current state, consistent with some prefix of the pushes.
    pub fn state(&self) -> ServerState {
        self.shared.state.read().expect("server lock poisoned").clone()
    }

    pub fn merges(&self) -> u64 {
        self.shared.state.read().expect("server lock poisoned").merges
    }

    /// Block until the accept loop ends.
    pub fn join(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    /// Stop accepting connections and return the final state. Connections
    /// already open are served until their peers hang up.
    pub fn shutdown(mut self) -> ServerState {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        self.state()
    }
}

pub fn serve<A: ToSocketAddrs>(bind: A, hyper: &Hyper, lambda: f64) -> Result<ServerHandle> {
    serve_with(bind, hyper, lambda, ServerOptions::default())
}

pub fn serve_with<A: ToSocketAddrs>(
    bind: A,
    hyper: &Hyper,
    lambda: f64,
    options: ServerOptions,
) -> Result<ServerHandle> {
    check_lambda(lambda)?;
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        state: RwLock::new(ServerState::new(hyper, lambda, options.record_pushes)),
        shutdown: AtomicBool::new(false),
    });
    let acceptor = {
        let shared = Arc::clone(&shared);
        thread::Builder::new()
            .name("ps-accept".into())
            .spawn(move || accept_loop(listener, shared))?
    };
    Ok(ServerHandle {
        addr,
        shared,
        acceptor: Some(acceptor),
    })
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for conn in listener.incoming() {
        if shared.shutdown.load(Ordering::SeqCst) {
            break;
        }
        match conn {
            Ok(stream) => {
                let shared = Arc::clone(&shared);
                let spawned = thread::Builder::new()
                    .name("ps-conn".into())
                    .spawn(move || handle_connection(stream, shared));
                if let Err(e) = spawned {
                    error!("cannot spawn connection handler: {e}");
                }
            }
            Err(e) => warn!("accept failed: {e}"),
        }
    }
}

fn handle_connection(stream: TcpStream, shared: Arc<Shared>) {
    let peer = stream.peer_addr().ok();
    let _ = stream.set_nodelay(true);
    let mut reader = match stream.try_clone() {
        Ok(s) => BufReader::new(s),
        Err(e) => {
            error!("{peer:?}: {e}");
            return;
        }
    };
    let mut writer = BufWriter::new(stream);
    loop {
        let msg = match read_message(&mut reader) {
            Ok(Some(msg)) => msg,
            Ok(None) => break,
            Err(e) => {
                error!("{peer:?}: closing connection on malformed frame: {e}");
                break;
            }
        };
        let reply = match msg {
            WireMessage::Fetch => shared.state.read().expect("server lock poisoned").snapshot_message(),
            WireMessage::Push { entries } => {
                let mut state = shared.state.write().expect("server lock poisoned");
                match state.apply_push(SparseDelta { entries }) {
                    Ok(()) => WireMessage::Ack { applied: true },
                    Err(e) => {
                        warn!("{peer:?}: rejected push: {e}");
                        WireMessage::Ack { applied: false }
                    }
                }
            }
            other => {
                error!("{peer:?}: unexpected message with tag {}", other.tag());
                break;
            }
        };
        if let Err(e) = write_message(&mut writer, &reply) {
            debug!("{peer:?}: write failed: {e}");
            break;
        }
    }
}
