//! Length-prefixed JSON frames.
//!
//! A frame is a 4-byte big-endian body length followed by a UTF-8 JSON
//! object `{kind, agent_id, correlation_id, payload}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{FederationError, OptimizationRequest, OptimizationResponse};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    OptRequest,
    OptResponse,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::OptRequest => "opt_request",
            MessageKind::OptResponse => "opt_response",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "opt_request" => Some(MessageKind::OptRequest),
            "opt_response" => Some(MessageKind::OptResponse),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Request(OptimizationRequest),
    Response(OptimizationResponse),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub agent_id: u32,
    pub correlation_id: u64,
    pub payload: Payload,
}

impl Envelope {
    pub fn request(agent_id: u32, correlation_id: u64, req: OptimizationRequest) -> Self {
        Self {
            agent_id,
            correlation_id,
            payload: Payload::Request(req),
        }
    }

    pub fn response(agent_id: u32, correlation_id: u64, resp: OptimizationResponse) -> Self {
        Self {
            agent_id,
            correlation_id,
            payload: Payload::Response(resp),
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::Request(_) => MessageKind::OptRequest,
            Payload::Response(_) => MessageKind::OptResponse,
        }
    }

    fn genes(&self) -> impl Iterator<Item = f64> + '_ {
        let (main, extra): (&[f64], Vec<&[f64]>) = match &self.payload {
            Payload::Request(r) => (&r.genome, r.peers.iter().map(|p| p.genome.as_slice()).collect()),
            Payload::Response(r) => (&r.genome, Vec::new()),
        };
        main.iter().copied().chain(extra.into_iter().flatten().copied())
    }
}

#[derive(Serialize)]
struct WireOut<'a, P> {
    kind: &'static str,
    agent_id: u32,
    correlation_id: u64,
    payload: &'a P,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    kind: String,
    agent_id: u32,
    correlation_id: u64,
    payload: Value,
}

pub const HEADER_LEN: usize = 4;

pub fn encode(env: &Envelope) -> Result<Vec<u8>, FederationError> {
    if env.genes().any(|v| !v.is_finite()) {
        return Err(FederationError::NonFinite);
    }
    let body = match &env.payload {
        Payload::Request(r) => serde_json::to_vec(&WireOut {
            kind: env.kind().as_str(),
            agent_id: env.agent_id,
            correlation_id: env.correlation_id,
            payload: r,
        }),
        Payload::Response(r) => serde_json::to_vec(&WireOut {
            kind: env.kind().as_str(),
            agent_id: env.agent_id,
            correlation_id: env.correlation_id,
            payload: r,
        }),
    }
    .map_err(|e| FederationError::Json(e.to_string()))?;
    let len = u32::try_from(body.len()).map_err(|_| FederationError::Oversized(body.len()))?;
    let mut frame = Vec::with_capacity(HEADER_LEN + body.len());
    frame.extend_from_slice(&len.to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Decodes exactly one frame; trailing bytes are a length mismatch.
pub fn decode(frame: &[u8]) -> Result<Envelope, FederationError> {
    if frame.len() < HEADER_LEN {
        return Err(FederationError::Truncated {
            declared: None,
            available: frame.len(),
        });
    }
    let declared = u32::from_be_bytes(frame[..HEADER_LEN].try_into().expect("four bytes")) as usize;
    let body = &frame[HEADER_LEN..];
    if declared > body.len() {
        return Err(FederationError::Truncated {
            declared: Some(declared),
            available: body.len(),
        });
    }
    if declared < body.len() {
        return Err(FederationError::LengthMismatch {
            declared,
            actual: body.len(),
        });
    }
    let wire: WireIn = serde_json::from_slice(body).map_err(|e| FederationError::Json(e.to_string()))?;
    let kind = MessageKind::parse(&wire.kind).ok_or_else(|| FederationError::UnknownKind(wire.kind.clone()))?;
    reject_non_numeric_genes(&wire.payload)?;
    let payload = match kind {
        MessageKind::OptRequest => Payload::Request(from_payload(wire.payload)?),
        MessageKind::OptResponse => Payload::Response(from_payload(wire.payload)?),
    };
    let env = Envelope {
        agent_id: wire.agent_id,
        correlation_id: wire.correlation_id,
        payload,
    };
    if env.genes().any(|v| !v.is_finite()) {
        return Err(FederationError::NonFinite);
    }
    Ok(env)
}

fn from_payload<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, FederationError> {
    serde_path_to_error::deserialize(v).map_err(|e| FederationError::Json(format!("payload.{}: {}", e.path(), e.inner())))
}

/// Genes arrive as JSON numbers only; `null`, `"NaN"` and friends are
/// non-finite values in disguise.
fn reject_non_numeric_genes(payload: &Value) -> Result<(), FederationError> {
    let all_numbers = |v: &Value| match v {
        Value::Array(items) => items.iter().all(Value::is_number),
        _ => true,
    };
    let mut arrays = vec![payload.get("genome")];
    if let Some(Value::Array(peers)) = payload.get("peers") {
        arrays.extend(peers.iter().map(|p| p.get("genome")));
    }
    if arrays.into_iter().flatten().all(all_numbers) {
        Ok(())
    } else {
        Err(FederationError::NonFinite)
    }
}

/// Splits a byte stream into frames, leaving any partial tail in place.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn next_frame(&mut self) -> Option<Vec<u8>> {
        if self.buf.len() < HEADER_LEN {
            return None;
        }
        let len = u32::from_be_bytes(self.buf[..HEADER_LEN].try_into().expect("four bytes")) as usize;
        if self.buf.len() < HEADER_LEN + len {
            return None;
        }
        Some(self.buf.drain(..HEADER_LEN + len).collect())
    }
}
