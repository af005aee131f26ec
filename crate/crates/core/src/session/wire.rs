//! Frames and their JSON form. Field order is fixed so output is byte-stable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CommitPayload, ConcreteSuite, ConfirmPayload, Mac};
use crate::group::{Element, Scalar};

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed frame json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad field `{field}`: {value}")]
    Field { field: &'static str, value: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Commit,
    Confirm,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Body {
    Commit(CommitPayload<ConcreteSuite>),
    Confirm(ConfirmPayload<ConcreteSuite>),
}

/// A payload with its routing metadata.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub src: Mac,
    pub dst: Mac,
    pub body: Body,
}

#[derive(Serialize, Deserialize)]
struct WireCommit {
    kind: FrameKind,
    group: String,
    scalar: Option<String>,
    element: Option<String>,
    pid: Option<String>,
    token: Option<String>,
    status: u16,
}

#[derive(Serialize, Deserialize)]
struct WireConfirm {
    kind: FrameKind,
    sc: u16,
    confirm: String,
}

#[derive(Serialize)]
struct WireFrame<'a> {
    src: Mac,
    dst: Mac,
    frame: &'a serde_json::Value,
}

impl Body {
    pub fn kind(&self) -> FrameKind {
        match self {
            Body::Commit(_) => FrameKind::Commit,
            Body::Confirm(_) => FrameKind::Confirm,
        }
    }

    pub fn as_commit(&self) -> Option<&CommitPayload<ConcreteSuite>> {
        match self {
            Body::Commit(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_confirm(&self) -> Option<&ConfirmPayload<ConcreteSuite>> {
        match self {
            Body::Confirm(c) => Some(c),
            _ => None,
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        match self {
            Body::Commit(c) => serde_json::to_value(WireCommit {
                kind: FrameKind::Commit,
                group: c.group.clone(),
                scalar: c.scalar.map(|s| s.value().to_string()),
                element: c.element.map(|e| e.value().to_string()),
                pid: c.password_id.clone(),
                token: c.token.as_ref().map(hex::encode),
                status: c.status,
            }),
            Body::Confirm(c) => serde_json::to_value(WireConfirm {
                kind: FrameKind::Confirm,
                sc: c.send_confirm,
                confirm: hex::encode(c.confirm),
            }),
        }
        .expect("frame serialises")
    }

    pub fn to_json(&self) -> String {
        self.to_value().to_string()
    }

    pub fn from_json(s: &str) -> Result<Body, WireError> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("kind").and_then(|k| k.as_str()) {
            Some("confirm") => {
                let w: WireConfirm = serde_json::from_value(v)?;
                let bytes = hex::decode(&w.confirm)
                    .ok()
                    .and_then(|b| <[u8; 32]>::try_from(b).ok())
                    .ok_or(WireError::Field { field: "confirm", value: w.confirm.clone() })?;
                Ok(Body::Confirm(ConfirmPayload { send_confirm: w.sc, confirm: bytes }))
            }
            _ => {
                let w: WireCommit = serde_json::from_value(v)?;
                let num = |field: &'static str, s: &Option<String>| -> Result<Option<u64>, WireError> {
                    s.as_ref()
                        .map(|v| v.parse::<u64>().map_err(|_| WireError::Field { field, value: v.clone() }))
                        .transpose()
                };
                let token = w
                    .token
                    .as_ref()
                    .map(|t| hex::decode(t).map_err(|_| WireError::Field { field: "token", value: t.clone() }))
                    .transpose()?;
                Ok(Body::Commit(CommitPayload {
                    group: w.group.clone(),
                    scalar: num("scalar", &w.scalar)?.map(Scalar::from_raw),
                    element: num("element", &w.element)?.map(Element::from_raw),
                    password_id: w.pid,
                    token,
                    status: w.status,
                }))
            }
        }
    }
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        self.body.kind()
    }

    /// `{"src":..,"dst":..,"frame":{..}}`
    pub fn to_value(&self) -> serde_json::Value {
        let frame = self.body.to_value();
        serde_json::to_value(WireFrame { src: self.src, dst: self.dst, frame: &frame }).expect("frame serialises")
    }
}
