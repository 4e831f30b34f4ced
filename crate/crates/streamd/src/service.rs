//! The streaming service: one owner task runs [`handle`] over inputs from
//! the printer endpoint (TCP, NDJSON), operators (WebSocket, one JSON
//! message per text frame) and a ticker.

use crate::protocol::{Message, Phase};
use crate::session::{handle, Effect, Event, Input, OperatorId, SessionConfig, SessionState};
use futures_util::{SinkExt, StreamExt};
use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message as WsMessage;

/// STATUS cadence while a print is active.
pub const TICK: Duration = Duration::from_millis(500);

/// Operator id used for the program loaded at startup.
const SERVICE_OPERATOR: OperatorId = 0;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("initial program rejected: {0}")]
    Program(String),
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub endpoint: SocketAddr,
    pub session: SessionConfig,
    /// CPL text loaded before any operator connects.
    pub program: Option<String>,
    pub tick: Duration,
}

enum OwnerMsg {
    Input(Event),
    Register { id: OperatorId, tx: mpsc::UnboundedSender<String> },
}

pub struct Service {
    operator_addr: SocketAddr,
    owner: mpsc::UnboundedSender<OwnerMsg>,
    local_seq: AtomicU64,
    phase: watch::Receiver<Phase>,
    tasks: Vec<JoinHandle<()>>,
}

/// A LOAD argument naming an existing file is replaced by that file's text.
pub fn resolve_program(arg: &str) -> Result<String, String> {
    if arg.contains('\n') {
        return Ok(arg.to_string());
    }
    let path = Path::new(arg.trim());
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
    } else {
        Ok(arg.to_string())
    }
}

impl Service {
    /// Binds the operator listener, connects to the endpoint and starts the
    /// session owner.
    pub async fn start(config: ServiceConfig) -> Result<Service, ServiceError> {
        let listener = TcpListener::bind(config.listen).await?;
        let operator_addr = listener.local_addr()?;
        let endpoint = TcpStream::connect(config.endpoint).await?;
        endpoint.set_nodelay(true)?;
        let (ep_rd, mut ep_wr) = endpoint.into_split();

        let (owner_tx, mut owner_rx) = mpsc::unbounded_channel::<OwnerMsg>();
        let (ep_tx, mut ep_out) = mpsc::unbounded_channel::<String>();
        let (phase_tx, phase_rx) = watch::channel(Phase::Idle);

        let mut state = SessionState::new(config.session.clone());
        let clock = Instant::now();
        if let Some(text) = &config.program {
            let (s, fx) = handle(
                state,
                Input {
                    now: 0.0,
                    event: Event::Control {
                        from: SERVICE_OPERATOR,
                        msg: Message::Load { seq: 1, program: text.clone() },
                    },
                },
            );
            if let Some(reason) = fx.iter().find_map(|e| match e {
                Effect::Reply { msg: Message::Error { reason, .. }, .. } => Some(reason.clone()),
                _ => None,
            }) {
                return Err(ServiceError::Program(reason));
            }
            state = s;
            let _ = phase_tx.send(state.phase());
        }

        let mut tasks = Vec::new();

        tasks.push(tokio::spawn(async move {
            while let Some(line) = ep_out.recv().await {
                if ep_wr.write_all(line.as_bytes()).await.is_err() || ep_wr.write_all(b"\n").await.is_err() {
                    break;
                }
            }
        }));

        let tx = owner_tx.clone();
        tasks.push(tokio::spawn(async move {
            let mut lines = BufReader::new(ep_rd).lines();
            loop {
                match lines.next_line().await {
                    Ok(Some(text)) => match Message::from_line(&text) {
                        Ok(Message::Ack { idx, .. }) => {
                            let _ = tx.send(OwnerMsg::Input(Event::EndpointAck { idx }));
                        }
                        _ => log::warn!("endpoint sent unexpected line {text:?}"),
                    },
                    _ => {
                        let _ = tx.send(OwnerMsg::Input(Event::EndpointLost));
                        break;
                    }
                }
            }
        }));

        let tx = owner_tx.clone();
        let tick = config.tick;
        tasks.push(tokio::spawn(async move {
            let mut iv = tokio::time::interval(tick);
            loop {
                iv.tick().await;
                if tx.send(OwnerMsg::Input(Event::Tick)).is_err() {
                    break;
                }
            }
        }));

        let tx = owner_tx.clone();
        tasks.push(tokio::spawn(async move {
            let mut next_id: OperatorId = SERVICE_OPERATOR + 1;
            while let Ok((stream, peer)) = listener.accept().await {
                let id = next_id;
                next_id += 1;
                tokio::spawn(operator(stream, peer, id, tx.clone()));
            }
        }));

        tasks.push(tokio::spawn(async move {
            let mut operators: BTreeMap<OperatorId, mpsc::UnboundedSender<String>> = BTreeMap::new();
            while let Some(m) = owner_rx.recv().await {
                let event = match m {
                    OwnerMsg::Register { id, tx } => {
                        operators.insert(id, tx);
                        Event::OperatorJoined { id }
                    }
                    OwnerMsg::Input(Event::Control {
                        from,
                        msg: Message::Load { seq, program },
                    }) => match resolve_program(&program) {
                        Ok(program) => Event::Control {
                            from,
                            msg: Message::Load { seq, program },
                        },
                        Err(reason) => Event::Malformed { from, reason },
                    },
                    OwnerMsg::Input(e) => e,
                };
                if let Event::OperatorLeft { id } = event {
                    operators.remove(&id);
                }
                let now = clock.elapsed().as_secs_f64();
                let (s, fx) = handle(state, Input { now, event });
                state = s;
                for e in fx {
                    match e {
                        Effect::Endpoint { msg, .. } => {
                            let _ = ep_tx.send(msg.to_line());
                        }
                        Effect::Broadcast(msg) => {
                            let line = msg.to_line();
                            operators.retain(|_, tx| tx.send(line.clone()).is_ok());
                        }
                        Effect::Reply { to, msg } => {
                            if let Some(tx) = operators.get(&to) {
                                let _ = tx.send(msg.to_line());
                            }
                        }
                    }
                }
                phase_tx.send_if_modified(|p| {
                    let changed = *p != state.phase();
                    *p = state.phase();
                    changed
                });
            }
        }));

        Ok(Service {
            operator_addr,
            owner: owner_tx,
            local_seq: AtomicU64::new(1),
            phase: phase_rx,
            tasks,
        })
    }

    pub fn operator_addr(&self) -> SocketAddr {
        self.operator_addr
    }

    /// Submits a control message on the service's own behalf; `make`
    /// receives the next local sequence number.
    pub fn control(&self, make: impl FnOnce(u64) -> Message) {
        let seq = self.local_seq.fetch_add(1, Ordering::Relaxed) + 1;
        let _ = self.owner.send(OwnerMsg::Input(Event::Control {
            from: SERVICE_OPERATOR,
            msg: make(seq),
        }));
    }

    pub fn phase(&self) -> Phase {
        *self.phase.borrow()
    }

    /// Resolves once the session reaches done or faulted.
    pub async fn finished(&self) -> Phase {
        let mut rx = self.phase.clone();
        let p = rx
            .wait_for(|p| matches!(p, Phase::Done | Phase::Faulted))
            .await
            .map(|p| *p)
            .unwrap_or(Phase::Faulted);
        p
    }

    pub fn shutdown(&self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}

async fn operator(stream: TcpStream, peer: SocketAddr, id: OperatorId, owner: mpsc::UnboundedSender<OwnerMsg>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("operator handshake from {peer} failed: {e}");
            return;
        }
    };
    log::info!("operator {id} connected from {peer}");
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    if owner.send(OwnerMsg::Register { id, tx }).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(line) = rx.recv().await {
            if sink.send(WsMessage::text(line)).await.is_err() {
                break;
            }
        }
    });
    while let Some(frame) = source.next().await {
        let text = match frame {
            Ok(WsMessage::Text(t)) => t.to_string(),
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let event = match Message::from_line(line) {
                Ok(msg) => Event::Control { from: id, msg },
                Err(e) => Event::Malformed {
                    from: id,
                    reason: e.to_string(),
                },
            };
            if owner.send(OwnerMsg::Input(event)).is_err() {
                break;
            }
        }
    }
    log::info!("operator {id} disconnected");
    let _ = owner.send(OwnerMsg::Input(Event::OperatorLeft { id }));
    writer.abort();
}
