//! Line-delimited JSON records exchanged with segmentation workers.
//!
//! A session opens with a [`Hello`] from the client answered by a
//! [`HelloReply`]; then each [`Request`] line is answered by one
//! [`Response`] line with the same `id`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{Mask, MaskSet, Run};
use crate::space::ParamValue;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub client: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloReply {
    pub protocol: u32,
    pub worker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    /// PNG bytes, base64 encoded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_b64: Option<String>,
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    /// `[row, start, length]` triples.
    pub runs: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default)]
    pub masks: Vec<WireMask>,
    #[serde(default)]
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WireMask {
    pub fn from_mask(m: &Mask) -> Self {
        WireMask {
            runs: m.runs().iter().map(|r| [r.row, r.start, r.len]).collect(),
        }
    }
}

impl Response {
    pub fn failure(id: u64, message: impl Into<String>) -> Self {
        Response {
            id,
            masks: Vec::new(),
            elapsed_ms: 0,
            error: Some(message.into()),
        }
    }

    /// Masks validated against the image dims. Out-of-bounds or empty
    /// masks are protocol errors.
    pub fn mask_set(&self, width: u32, height: u32) -> Result<MaskSet> {
        if let Some(e) = &self.error {
            return Err(Error::Protocol(format!("worker reported: {e}")));
        }
        let masks = self
            .masks
            .iter()
            .enumerate()
            .map(|(i, w)| {
                Mask::from_runs(width, height, w.runs.iter().map(|r| Run::new(r[0], r[1], r[2])))
                    .map_err(|e| Error::Protocol(format!("mask {i} of response {}: {e}", self.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        MaskSet::new(width, height, masks)
    }
}

/// One record as a single line, without the trailing newline.
pub fn encode<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("protocol records serialize")
}

pub fn decode<'a, T: Deserialize<'a>>(line: &'a str) -> Result<T> {
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(format!("malformed record: {e}")))
}
