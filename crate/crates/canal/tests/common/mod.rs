#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use canal::bridge::{Bridge, BridgeConfig};
use canal::formats::load_canal;
use canal_core::geometry::Vec3;
use canal_core::input_mapping::UserFrame;
use canal_core::simulation::{SimConfig, Simulation, WorldObject};
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn samples() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

pub fn sample(name: &str) -> PathBuf {
    samples().join(name)
}

pub async fn start_bridge(cfg: BridgeConfig) -> Bridge {
    start_bridge_with(cfg, Vec::new()).await
}

pub async fn start_bridge_with(cfg: BridgeConfig, objects: Vec<WorldObject>) -> Bridge {
    let loaded = load_canal(&sample("straight.canal.json")).unwrap();
    let user = UserFrame::facing(Vec3::new(0.9, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)).unwrap();
    let sim = Simulation::new(loaded.canal.clone(), user, objects, SimConfig::default()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    Bridge::start(listener, sim, loaded.file.encode(), loaded.digest, cfg).unwrap()
}

pub async fn connect(bridge: &Bridge) -> Ws {
    let url = format!("ws://{}/ws", bridge.addr);
    tokio_tungstenite::connect_async(url).await.unwrap().0
}

pub async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.to_string().into())).await.unwrap();
}

/// Next JSON text frame, skipping control frames.
pub async fn next_json(ws: &mut Ws) -> Option<Value> {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
}

/// Next frame whose `type` equals `kind`.
pub async fn next_of(ws: &mut Ws, kind: &str) -> Option<Value> {
    loop {
        let v = next_json(ws).await?;
        if v["type"] == kind {
            return Some(v);
        }
    }
}

pub async fn hello(ws: &mut Ws, role: &str) -> Value {
    send(ws, &format!(r#"{{"type":"hello","role":"{role}"}}"#)).await;
    next_of(ws, "welcome").await.unwrap()
}
