//! Live bridge: a paced simulation thread that broadcasts snapshots, and a
//! WebSocket front end that funnels pilot input into the simulation's
//! FIFO.

use std::collections::{BTreeMap, VecDeque};
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use canal_core::controller::{Buttons, InputFrameEvent};
use canal_core::simulation::Simulation;
use futures_util::stream::SplitSink;
use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use tokio::sync::{broadcast, mpsc as tmpsc, watch};
use tower_http::services::ServeDir;

use crate::protocol::{
    decode_client, ClientMessage, ErrorCode, InputKind, InputReceipt, Role, ServerMessage, Snapshot, WireError,
    MAX_MESSAGE_BYTES, PROTOCOL_VERSION,
};

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    /// Snapshot broadcast rate; the simulation itself runs at `1/dt`.
    pub hz: f64,
    pub ui_dir: PathBuf,
    /// Snapshots buffered per client before the oldest are dropped.
    pub queue_capacity: usize,
    pub heartbeat: Duration,
    pub client_timeout: Duration,
    pub max_rejects_per_s: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            hz: 30.0,
            ui_dir: PathBuf::from("ui"),
            queue_capacity: 16,
            heartbeat: Duration::from_secs(5),
            client_timeout: Duration::from_secs(15),
            max_rejects_per_s: 10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum QueuedKind {
    Stick(f64, f64),
    Button(Buttons),
    /// Pilot left: neutralize the held stick.
    Release,
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    kind: QueuedKind,
    id: Option<u64>,
    received_tick: u64,
}

struct ClientEntry {
    helloed: bool,
    wants_pilot: bool,
    tx: tmpsc::UnboundedSender<ServerMessage>,
}

#[derive(Default)]
struct Hub {
    next_id: u64,
    clients: BTreeMap<u64, ClientEntry>,
    pilot: Option<u64>,
}

struct Shared {
    inputs: Mutex<mpsc::Sender<Queued>>,
    snapshots: broadcast::Sender<Arc<str>>,
    hub: Mutex<Hub>,
    tick: Arc<AtomicU64>,
    digest: String,
    canal_text: String,
    cfg: BridgeConfig,
    dt: f64,
    shutdown: watch::Receiver<bool>,
    stats: Arc<LoopStats>,
}

/// Counters exposed by a running loop.
#[derive(Debug, Default)]
pub struct LoopStats {
    pub ticks: AtomicU64,
    pub snapshots: AtomicU64,
    /// Ticks that started more than one period late.
    pub overruns: AtomicU64,
    /// Snapshots skipped for clients that could not keep up.
    pub dropped: AtomicU64,
}

#[allow(clippy::too_many_arguments)]
fn spawn_loop(
    mut sim: Simulation,
    cfg: &BridgeConfig,
    digest: String,
    rx: mpsc::Receiver<Queued>,
    snapshots: broadcast::Sender<Arc<str>>,
    tick: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    stats: Arc<LoopStats>,
) -> thread::JoinHandle<()> {
    let dt = sim.dt();
    let rate = 1.0 / dt;
    let hz = cfg.hz.min(rate);
    thread::Builder::new()
        .name("sim-loop".into())
        .spawn(move || {
            let period = Duration::from_secs_f64(dt);
            let start = Instant::now();
            let mut pending: VecDeque<Queued> = VecDeque::new();
            let mut stick = (0.0, 0.0);
            let mut last_input: Option<InputReceipt> = None;
            let mut seq = 0u64;
            let mut emitted = 0u64;
            while !stop.load(Ordering::Relaxed) {
                pending.extend(rx.try_iter());
                let applying = sim.ticks() + 1;
                let mut buttons = Buttons::NONE;
                // One press of each button per tick; repeats wait for the
                // next tick so that toggles pressed twice cancel.
                while let Some(q) = pending.front().copied() {
                    match q.kind {
                        QueuedKind::Stick(u, v) => stick = (u, v),
                        QueuedKind::Release => stick = (0.0, 0.0),
                        QueuedKind::Button(b) => {
                            let overlap = (b.start && buttons.start)
                                || (b.stop && buttons.stop)
                                || (b.toggle_direction && buttons.toggle_direction)
                                || (b.toggle_gripper && buttons.toggle_gripper);
                            if overlap {
                                break;
                            }
                            buttons = buttons.merge(b);
                        }
                    }
                    if let Some(id) = q.id {
                        last_input = Some(InputReceipt {
                            id,
                            received_tick: q.received_tick,
                            applied_tick: applying,
                        });
                    }
                    pending.pop_front();
                }
                let rec = match sim.step(&InputFrameEvent { stick, buttons }) {
                    Ok(r) => r,
                    Err(e) => {
                        warn!("simulation step failed: {e}");
                        break;
                    }
                };
                tick.store(rec.tick, Ordering::Release);
                stats.ticks.fetch_add(1, Ordering::Relaxed);
                let due = (rec.tick as f64 * hz / rate + 1e-9).floor() as u64;
                if due > emitted {
                    emitted = due;
                    seq += 1;
                    let snap = Snapshot::from_record(&rec, seq, &digest, last_input);
                    let text: Arc<str> = ServerMessage::Snapshot(snap).encode().into();
                    // No receivers is fine; lagging receivers lose the oldest.
                    let _ = snapshots.send(text);
                    stats.snapshots.fetch_add(1, Ordering::Relaxed);
                }
                let deadline = start + period.mul_f64(rec.tick as f64);
                let now = Instant::now();
                if deadline > now {
                    thread::sleep(deadline - now);
                } else if now - deadline > period {
                    stats.overruns.fetch_add(1, Ordering::Relaxed);
                }
            }
        })
        .expect("spawn simulation thread")
}

/// A running bridge.
pub struct Bridge {
    pub stats: Arc<LoopStats>,
    pub addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    shutdown_tx: watch::Sender<bool>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
    sim_thread: Option<thread::JoinHandle<()>>,
}

impl Bridge {
    /// Starts the loop and the HTTP/WebSocket server on `listener`.
    pub fn start(
        listener: tokio::net::TcpListener,
        sim: Simulation,
        canal_text: String,
        digest: String,
        cfg: BridgeConfig,
    ) -> std::io::Result<Bridge> {
        let addr = listener.local_addr()?;
        let (tx, rx) = mpsc::channel();
        let (snap_tx, _) = broadcast::channel(cfg.queue_capacity.max(1));
        let tick = Arc::new(AtomicU64::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(LoopStats::default());
        let (shutdown_tx, shutdown_rx) = watch::channel(false);
        let dt = sim.dt();
        let sim_thread = spawn_loop(
            sim,
            &cfg,
            digest.clone(),
            rx,
            snap_tx.clone(),
            tick.clone(),
            stop.clone(),
            stats.clone(),
        );
        let shared = Arc::new(Shared {
            inputs: Mutex::new(tx),
            snapshots: snap_tx,
            hub: Mutex::new(Hub::default()),
            tick,
            digest,
            canal_text,
            dt,
            shutdown: shutdown_rx.clone(),
            cfg: cfg.clone(),
            stats: stats.clone(),
        });
        let app = Router::new()
            .route("/ws", get(ws_handler))
            .route("/canal", get(canal_index))
            .route("/canal/{digest}", get(canal_by_digest))
            .nest_service("/ui", ServeDir::new(&cfg.ui_dir).append_index_html_on_directories(true))
            .with_state(shared);
        let mut rx = shutdown_rx;
        let server = tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async move {
                    let _ = rx.wait_for(|&v| v).await;
                })
                .await
        });
        info!("bridge listening on {addr}");
        Ok(Bridge {
            stats,
            addr,
            stop,
            shutdown_tx,
            server,
            sim_thread: Some(sim_thread),
        })
    }

    /// Signals shutdown, closes client connections and joins the loop.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        let _ = self.shutdown_tx.send(true);
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.sim_thread.take() {
            let _ = tokio::task::spawn_blocking(move || h.join()).await;
        }
        match tokio::time::timeout(Duration::from_secs(5), &mut self.server).await {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => Err(std::io::Error::other(e)),
            Err(_) => {
                self.server.abort();
                Ok(())
            }
        }
    }
}

/// Runs until `signal` resolves.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    sim: Simulation,
    canal_text: String,
    digest: String,
    cfg: BridgeConfig,
    signal: impl Future<Output = ()>,
) -> std::io::Result<()> {
    let bridge = Bridge::start(listener, sim, canal_text, digest, cfg)?;
    signal.await;
    info!("shutting down");
    bridge.shutdown().await
}

async fn canal_index(State(shared): State<Arc<Shared>>) -> Response {
    let body = serde_json::json!({ "digest": shared.digest, "url": format!("/canal/{}", shared.digest) });
    ([(header::CONTENT_TYPE, "application/json")], body.to_string()).into_response()
}

async fn canal_by_digest(State(shared): State<Arc<Shared>>, UrlPath(digest): UrlPath<String>) -> Response {
    if digest == shared.digest {
        ([(header::CONTENT_TYPE, "application/json")], shared.canal_text.clone()).into_response()
    } else {
        (StatusCode::NOT_FOUND, "unknown canal digest").into_response()
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    // Oversized frames are answered with a structured error, so accept a
    // little more than the protocol limit at the transport level.
    ws.max_message_size(MAX_MESSAGE_BYTES * 16)
        .on_upgrade(move |socket| client_session(socket, shared))
}

fn register(shared: &Shared) -> (u64, tmpsc::UnboundedReceiver<ServerMessage>) {
    let (tx, rx) = tmpsc::unbounded_channel();
    let mut hub = shared.hub.lock().unwrap();
    hub.next_id += 1;
    let id = hub.next_id;
    hub.clients.insert(
        id,
        ClientEntry {
            helloed: false,
            wants_pilot: false,
            tx,
        },
    );
    (id, rx)
}

fn hello(shared: &Shared, id: u64, wants: Role) -> Role {
    let mut hub = shared.hub.lock().unwrap();
    if let Some(c) = hub.clients.get_mut(&id) {
        c.helloed = true;
        c.wants_pilot = wants == Role::Pilot;
    }
    if hub.pilot == Some(id) {
        return Role::Pilot;
    }
    if wants == Role::Pilot && hub.pilot.is_none() {
        hub.pilot = Some(id);
        Role::Pilot
    } else {
        Role::Observer
    }
}

fn unregister(shared: &Shared, id: u64) {
    let mut hub = shared.hub.lock().unwrap();
    hub.clients.remove(&id);
    if hub.pilot == Some(id) {
        hub.pilot = None;
        let _ = shared.inputs.lock().unwrap().send(Queued {
            kind: QueuedKind::Release,
            id: None,
            received_tick: shared.tick.load(Ordering::Acquire),
        });
        // Hand off to the earliest remaining client that asked to pilot,
        // else the earliest remaining client.
        let next = hub
            .clients
            .iter()
            .find(|(_, c)| c.helloed && c.wants_pilot)
            .or_else(|| hub.clients.iter().find(|(_, c)| c.helloed))
            .map(|(&k, _)| k);
        if let Some(k) = next {
            hub.pilot = Some(k);
            let _ = hub.clients[&k].tx.send(ServerMessage::Role { role: Role::Pilot });
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Handled {
    Reply(ServerMessage),
    Reject(WireError),
}

fn handle_text(shared: &Shared, id: u64, helloed: &mut bool, bytes: &[u8]) -> Handled {
    let msg = match decode_client(bytes) {
        Ok(m) => m,
        Err(e) => return Handled::Reject(e),
    };
    match msg {
        ClientMessage::Hello { role } => {
            *helloed = true;
            let granted = hello(shared, id, role);
            Handled::Reply(ServerMessage::Welcome {
                v: PROTOCOL_VERSION,
                client_id: id,
                role: granted,
                canal: shared.digest.clone(),
                hz: shared.cfg.hz,
                dt: shared.dt,
            })
        }
        ClientMessage::Input(input) => {
            if !*helloed {
                return Handled::Reject(WireError {
                    code: ErrorCode::HandshakeRequired,
                    message: "send {\"type\":\"hello\"} first".into(),
                });
            }
            if shared.hub.lock().unwrap().pilot != Some(id) {
                return Handled::Reject(WireError {
                    code: ErrorCode::NotPilot,
                    message: "only the pilot may send input".into(),
                });
            }
            let received_tick = shared.tick.load(Ordering::Acquire);
            let kind = match input.kind {
                InputKind::Stick { u, v } => QueuedKind::Stick(u, v),
                InputKind::Button(b) => QueuedKind::Button(b),
            };
            let _ = shared.inputs.lock().unwrap().send(Queued {
                kind,
                id: input.id,
                received_tick,
            });
            Handled::Reply(ServerMessage::Ack {
                id: input.id,
                clamped: input.clamped,
                received_tick,
            })
        }
    }
}

const CLOSE_LIMIT: Duration = Duration::from_secs(1);

async fn send_within(sink: &mut SplitSink<WebSocket, Message>, msg: Message, limit: Duration) -> bool {
    matches!(tokio::time::timeout(limit, sink.send(msg)).await, Ok(Ok(())))
}

async fn client_session(socket: WebSocket, shared: Arc<Shared>) {
    let (id, mut direct) = register(&shared);
    debug!("client {id} connected");
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = shared.snapshots.subscribe();
    let mut shutdown = shared.shutdown.clone();
    let mut heartbeat = tokio::time::interval(shared.cfg.heartbeat);
    heartbeat.tick().await;
    let mut last_seen = Instant::now();
    let mut rejects: VecDeque<Instant> = VecDeque::new();
    let mut helloed = false;
    let mut dropped = 0u64;
    // A client that stops reading blocks its sends; give up after the
    // idle timeout instead of holding the session forever.
    let limit = shared.cfg.client_timeout;
    if *shutdown.borrow() {
        unregister(&shared, id);
        return;
    }

    loop {
        tokio::select! {
            incoming = stream.next() => {
                let Some(Ok(msg)) = incoming else { break };
                last_seen = Instant::now();
                let bytes = match msg {
                    Message::Text(t) => t.as_str().as_bytes().to_vec(),
                    Message::Binary(b) => b.to_vec(),
                    Message::Close(_) => break,
                    Message::Ping(_) | Message::Pong(_) => continue,
                };
                let reply = match handle_text(&shared, id, &mut helloed, &bytes) {
                    Handled::Reply(m) => m,
                    Handled::Reject(e) => {
                        let now = Instant::now();
                        rejects.push_back(now);
                        while rejects.front().is_some_and(|&t| now - t > Duration::from_secs(1)) {
                            rejects.pop_front();
                        }
                        if rejects.len() > shared.cfg.max_rejects_per_s {
                            let m = ServerMessage::Error {
                                code: ErrorCode::RateLimited,
                                message: format!("more than {} rejected messages per second", shared.cfg.max_rejects_per_s),
                            };
                            let _ = send_within(&mut sink, Message::Text(m.encode().into()), CLOSE_LIMIT).await;
                            let _ = send_within(&mut sink, Message::Close(None), CLOSE_LIMIT).await;
                            break;
                        }
                        e.reply()
                    }
                };
                if !send_within(&mut sink, Message::Text(reply.encode().into()), limit).await {
                    break;
                }
            }
            snap = snapshots.recv() => match snap {
                Ok(text) => {
                    if helloed && !send_within(&mut sink, Message::Text(text.as_ref().into()), limit).await {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    dropped += n;
                    shared.stats.dropped.fetch_add(n, Ordering::Relaxed);
                    debug!("client {id} lagging; dropped {n} snapshots ({dropped} total)");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(m) = direct.recv() => {
                if !send_within(&mut sink, Message::Text(m.encode().into()), limit).await {
                    break;
                }
            }
            _ = heartbeat.tick() => {
                if last_seen.elapsed() > shared.cfg.client_timeout {
                    debug!("client {id} timed out");
                    break;
                }
                if !send_within(&mut sink, Message::Ping(Vec::new().into()), limit).await {
                    break;
                }
            }
            _ = shutdown.changed() => {
                let _ = send_within(&mut sink, Message::Close(None), CLOSE_LIMIT).await;
                break;
            }
        }
    }
    unregister(&shared, id);
    debug!("client {id} disconnected");
}
