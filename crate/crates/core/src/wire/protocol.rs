//! Message types of the line-delimited JSON oracle protocol.
//!
//! ```text
//! server → {"proto":"iqa-oracle/1","beta1":0.0,"beta2":10.0}
//! client → {"id":1,"h":H,"w":W,"c":C,"data_b64":"<base64 of LE f32, row-major>"}
//! server → {"id":1,"score":4.2}   or   {"id":1,"error":"..."}
//! ```

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{decode_f32_le, encode_f32_le, ImageTensor, Shape};
use crate::oracle::ScoreBounds;
use crate::scalar::Scalar;

pub const PROTOCOL: &str = "iqa-oracle/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub proto: String,
    pub beta1: f64,
    pub beta2: f64,
}

impl Handshake {
    pub fn new<T: Scalar>(bounds: &ScoreBounds<T>) -> Self {
        Handshake {
            proto: PROTOCOL.to_string(),
            beta1: bounds.beta1().as_f64(),
            beta2: bounds.beta2().as_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub id: u64,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data_b64: String,
}

impl OracleRequest {
    pub fn from_image<T: Scalar>(id: u64, img: &ImageTensor<T>) -> Self {
        let shape = img.shape();
        OracleRequest {
            id,
            h: shape.height,
            w: shape.width,
            c: shape.channels,
            data_b64: STANDARD.encode(encode_f32_le(img.data())),
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.h, self.w, self.c)
    }

    pub fn to_image<T: Scalar>(&self) -> Result<ImageTensor<T>> {
        let shape = self.shape();
        let bytes = STANDARD
            .decode(self.data_b64.as_bytes())
            .map_err(|e| Error::Protocol(format!("bad base64 payload: {e}")))?;
        let expected = shape
            .len()
            .checked_mul(4)
            .ok_or_else(|| Error::Protocol("shape overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Protocol(format!(
                "payload has {} bytes, shape {shape} needs {expected}",
                bytes.len()
            )));
        }
        ImageTensor::new(shape, decode_f32_le(&bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleResponse {
    Score { id: u64, score: f64 },
    Error { id: u64, error: String },
}

impl OracleResponse {
    pub fn id(&self) -> u64 {
        match self {
            OracleResponse::Score { id, .. } | OracleResponse::Error { id, .. } => *id,
        }
    }

    /// Parses one response line, requiring exactly one of `score` / `error`
    /// and a finite score.
    pub fn parse(line: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Protocol("response is not a JSON object".into()))?;
        let id = obj
            .get("id")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Protocol("response lacks an integer id".into()))?;
        match (obj.get("score"), obj.get("error")) {
            (Some(score), None) => {
                let score = score
                    .as_f64()
                    .filter(|s| s.is_finite())
                    .ok_or_else(|| Error::Protocol(format!("non-finite score {score}")))?;
                Ok(OracleResponse::Score { id, score })
            }
            (None, Some(error)) => Ok(OracleResponse::Error {
                id,
                error: error.as_str().unwrap_or_default().to_string(),
            }),
            _ => Err(Error::Protocol(
                "response needs exactly one of `score` and `error`".into(),
            )),
        }
    }

    pub fn to_line(&self) -> String {
        match self {
            OracleResponse::Score { score, .. } if !score.is_finite() => {
                // JSON has no representation for these
                serde_json::json!({"id": self.id(), "error": format!("scorer produced {score}")})
                    .to_string()
            }
            _ => serde_json::to_string(self).expect("response serializes"),
        }
    }
}
