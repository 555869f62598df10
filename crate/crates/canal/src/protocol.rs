//! Wire messages exchanged with live clients. One JSON object per text
//! frame; see `docs/protocol.md`.

use canal_core::controller::{Buttons, Direction, Gripper};
use canal_core::simulation::TickRecord;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::formats::parse_button;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_MESSAGE_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub a_x: [f64; 3],
    pub a_y: [f64; 3],
    pub d_x: f64,
    pub d_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: String,
    pub position: [f64; 3],
    pub state: String,
}

/// Bookkeeping for the most recent client input applied by the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputReceipt {
    pub id: u64,
    pub received_tick: u64,
    pub applied_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub v: u32,
    pub seq: u64,
    pub tick: u64,
    pub t: f64,
    pub pose: [f64; 3],
    pub orient: [f64; 4],
    pub s: usize,
    pub rho: f64,
    pub phi: f64,
    pub mode: String,
    pub direction: i32,
    pub gripper: String,
    pub overshoot: f64,
    pub shrink_left: u32,
    pub stick: [f64; 2],
    pub disk_class: Option<String>,
    pub axes: Option<Axes>,
    pub objects: Vec<ObjectView>,
    pub canal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_input: Option<InputReceipt>,
}

impl Snapshot {
    pub fn from_record(rec: &TickRecord, seq: u64, digest: &str, last_input: Option<InputReceipt>) -> Self {
        let st = &rec.state;
        Snapshot {
            v: PROTOCOL_VERSION,
            seq,
            tick: rec.tick,
            t: rec.t,
            pose: rec.pose.to_array(),
            orient: rec.orient.to_array(),
            s: st.s,
            rho: st.rho,
            phi: st.phi,
            mode: st.mode.label().to_string(),
            direction: match st.direction {
                Direction::Forward => 1,
                Direction::Backward => -1,
            },
            gripper: match st.gripper {
                Gripper::Open => "open",
                Gripper::Closed => "closed",
            }
            .to_string(),
            overshoot: st.overshoot,
            shrink_left: st.shrink_left,
            stick: [rec.stick.0, rec.stick.1],
            disk_class: rec.mapping.map(|m| m.class.label().to_string()),
            axes: rec.mapping.map(|m| Axes {
                a_x: m.a_x.to_array(),
                a_y: m.a_y.to_array(),
                d_x: m.d_x,
                d_y: m.d_y,
            }),
            objects: rec
                .objects
                .iter()
                .map(|o| ObjectView {
                    id: o.id.clone(),
                    position: o.position.to_array(),
                    state: o.state.label().to_string(),
                })
                .collect(),
            canal: digest.to_string(),
            last_input,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Pilot,
    Observer,
}

/// Everything the server sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Welcome {
        v: u32,
        client_id: u64,
        role: Role,
        canal: String,
        hz: f64,
        dt: f64,
    },
    Role {
        role: Role,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<u64>,
        clamped: bool,
        received_tick: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }

    pub fn decode(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn encode_snapshot(s: &Snapshot) -> String {
    ServerMessage::Snapshot(s.clone()).encode()
}

pub fn decode_snapshot(text: &str) -> Option<Snapshot> {
    match ServerMessage::decode(text) {
        Ok(ServerMessage::Snapshot(s)) => Some(s),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    TooLarge,
    Malformed,
    HandshakeRequired,
    NotPilot,
    RateLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireError {
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    fn malformed(message: impl Into<String>) -> Self {
        WireError {
            code: ErrorCode::Malformed,
            message: message.into(),
        }
    }

    pub fn reply(&self) -> ServerMessage {
        ServerMessage::Error {
            code: self.code,
            message: self.message.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    Stick { u: f64, v: f64 },
    Button(Buttons),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireInput {
    pub kind: InputKind,
    pub client_t: Option<f64>,
    pub id: Option<u64>,
    /// Set when a stick value was clamped into `[-1, 1]`.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Hello { role: Role },
    Input(WireInput),
}

fn take_number(obj: &mut Map<String, Value>, key: &str) -> Result<Option<f64>, WireError> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n
            .as_f64()
            .map(Some)
            .ok_or_else(|| WireError::malformed(format!("{key}: not representable"))),
        Some(_) => Err(WireError::malformed(format!("{key}: expected a number"))),
    }
}

fn take_id(obj: &mut Map<String, Value>) -> Result<Option<u64>, WireError> {
    match obj.remove("id") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| WireError::malformed("id: expected a non-negative integer")),
    }
}

fn no_extra(obj: &Map<String, Value>) -> Result<(), WireError> {
    match obj.keys().next() {
        Some(k) => Err(WireError::malformed(format!("unexpected field {k:?}"))),
        None => Ok(()),
    }
}

/// Parses and validates one client message.
pub fn decode_client(bytes: &[u8]) -> Result<ClientMessage, WireError> {
    if bytes.len() > MAX_MESSAGE_BYTES {
        return Err(WireError {
            code: ErrorCode::TooLarge,
            message: format!("message of {} bytes exceeds {MAX_MESSAGE_BYTES}", bytes.len()),
        });
    }
    let value: Value = serde_json::from_slice(bytes).map_err(|e| WireError::malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(WireError::malformed("expected a JSON object"));
    };
    if let Some(t) = obj.remove("type") {
        if t != "hello" {
            return Err(WireError::malformed(format!("unknown message type {t}")));
        }
        let role = match obj.remove("role") {
            None => Role::Observer,
            Some(r) if r == "pilot" => Role::Pilot,
            Some(r) if r == "observer" => Role::Observer,
            Some(r) => return Err(WireError::malformed(format!("unknown role {r}"))),
        };
        no_extra(&obj)?;
        return Ok(ClientMessage::Hello { role });
    }
    decode_fields(obj).map(ClientMessage::Input)
}

/// Parses a `kind: stick|button` input message.
pub fn decode_input(bytes: &[u8]) -> Result<WireInput, WireError> {
    match decode_client(bytes)? {
        ClientMessage::Input(i) => Ok(i),
        ClientMessage::Hello { .. } => Err(WireError::malformed("expected an input message")),
    }
}

fn decode_fields(mut obj: Map<String, Value>) -> Result<WireInput, WireError> {
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(WireError::malformed("kind: expected a string")),
        None => return Err(WireError::malformed("missing field \"kind\"")),
    };
    let client_t = take_number(&mut obj, "client_t")?;
    let id = take_id(&mut obj)?;
    let (kind, clamped) = match kind.as_str() {
        "stick" => {
            let u = take_number(&mut obj, "u")?;
            let v = take_number(&mut obj, "v")?;
            if u.is_none() && v.is_none() {
                return Err(WireError::malformed("stick needs at least one of u, v"));
            }
            let (u, v) = (u.unwrap_or(0.0), v.unwrap_or(0.0));
            let (cu, cv) = (u.clamp(-1.0, 1.0), v.clamp(-1.0, 1.0));
            (InputKind::Stick { u: cu, v: cv }, cu != u || cv != v)
        }
        "button" => {
            let name = match obj.remove("button") {
                Some(Value::String(b)) => b,
                _ => return Err(WireError::malformed("button: expected a button name")),
            };
            let b = parse_button(&name).ok_or_else(|| WireError::malformed(format!("unknown button {name:?}")))?;
            (InputKind::Button(b), false)
        }
        other => return Err(WireError::malformed(format!("unknown kind {other:?}"))),
    };
    no_extra(&obj)?;
    Ok(WireInput {
        kind,
        client_t,
        id,
        clamped,
    })
}

/// Encodes an input the way a client would.
pub fn encode_input(input: &WireInput) -> String {
    let mut obj = Map::new();
    match input.kind {
        InputKind::Stick { u, v } => {
            obj.insert("kind".into(), "stick".into());
            obj.insert("u".into(), u.into());
            obj.insert("v".into(), v.into());
        }
        InputKind::Button(b) => {
            obj.insert("kind".into(), "button".into());
            let name = crate::formats::button_names(b).first().copied().unwrap_or("start");
            obj.insert("button".into(), name.into());
        }
    }
    if let Some(t) = input.client_t {
        obj.insert("client_t".into(), t.into());
    }
    if let Some(id) = input.id {
        obj.insert("id".into(), id.into());
    }
    Value::Object(obj).to_string()
}
