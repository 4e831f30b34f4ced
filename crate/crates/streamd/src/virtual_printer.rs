//! An in-process printer endpoint. It executes CMD lines in order, records
//! them, and acknowledges each one.

use crate::protocol::Message;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

#[derive(Clone, Debug, Default)]
pub struct PrinterConfig {
    /// Execution time charged to every MOVE.
    pub move_delay: Duration,
    /// Close the connection after executing this many lines.
    pub disconnect_after: Option<usize>,
}

pub struct VirtualPrinter {
    addr: SocketAddr,
    received: Arc<Mutex<Vec<String>>>,
    task: JoinHandle<()>,
}

impl VirtualPrinter {
    /// Listens on `addr` and serves the first connection.
    pub async fn bind(addr: SocketAddr, config: PrinterConfig) -> std::io::Result<VirtualPrinter> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let received = Arc::new(Mutex::new(Vec::new()));
        let sink = received.clone();
        let task = tokio::spawn(async move {
            let Ok((stream, peer)) = listener.accept().await else { return };
            log::info!("virtual printer connected to {peer}");
            let (rd, mut wr) = stream.into_split();
            let mut lines = BufReader::new(rd).lines();
            let mut seq = 0u64;
            let mut executed = 0usize;
            while let Ok(Some(text)) = lines.next_line().await {
                let Ok(Message::Cmd { idx, line, .. }) = Message::from_line(&text) else {
                    log::warn!("virtual printer ignored {text:?}");
                    continue;
                };
                if line.starts_with("MOVE") && !config.move_delay.is_zero() {
                    tokio::time::sleep(config.move_delay).await;
                }
                sink.lock().expect("printer log").push(line);
                executed += 1;
                seq += 1;
                let ack = Message::Ack { seq, idx }.to_line() + "\n";
                if wr.write_all(ack.as_bytes()).await.is_err() {
                    break;
                }
                if config.disconnect_after.is_some_and(|n| executed >= n) {
                    break;
                }
            }
        });
        Ok(VirtualPrinter { addr, received, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Every line executed so far, in order.
    pub fn received(&self) -> Vec<String> {
        self.received.lock().expect("printer log").clone()
    }

    pub fn shutdown(&self) {
        self.task.abort();
    }
}

impl Drop for VirtualPrinter {
    fn drop(&mut self) {
        self.task.abort();
    }
}
