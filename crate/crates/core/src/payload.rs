//! Keyed payload framing for model and developer signatures.
//!
//! Layout: `header[3] || E(len) || E(body) || tag[2]` where `body` is
//! `len(model) || model || developer`, `E` XORs a key-derived stream and the
//! header depends on the key only, so a partial carrier can still be checked.

use crate::key::WatermarkKey;
use thiserror::Error;

pub const HEADER_LEN: usize = 3;
pub const TAG_LEN: usize = 2;
pub const DEFAULT_MAX_PAYLOAD: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("model and developer signatures must be non-empty")]
    EmptySignature,
    #[error("encoded payload is {len} bytes, above the {max}-byte limit")]
    TooLarge { len: usize, max: usize },
    #[error("payload framing check failed: {0}")]
    BadFraming(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Payload {
    pub model: String,
    pub developer: String,
    pub encoded: Vec<u8>,
}

impl Payload {
    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }
}

pub fn header(key: &WatermarkKey) -> [u8; HEADER_LEN] {
    let h = key.prf(&[b"payload/header"]);
    [h[0], h[1], h[2]]
}

fn tag(key: &WatermarkKey, framed: &[u8]) -> [u8; TAG_LEN] {
    let t = key.prf(&[b"payload/tag", framed]);
    [t[0], t[1]]
}

pub fn encode_payload(model: &str, developer: &str, key: &WatermarkKey, max_len: usize) -> Result<Payload, PayloadError> {
    if model.is_empty() || developer.is_empty() {
        return Err(PayloadError::EmptySignature);
    }
    let body_len = 1 + model.len() + developer.len();
    let total = HEADER_LEN + 1 + body_len + TAG_LEN;
    if model.len() > 255 || body_len > 255 || total > max_len {
        return Err(PayloadError::TooLarge { len: total, max: max_len });
    }
    let mut plain = Vec::with_capacity(1 + body_len);
    plain.push(body_len as u8);
    plain.push(model.len() as u8);
    plain.extend_from_slice(model.as_bytes());
    plain.extend_from_slice(developer.as_bytes());
    let ks = key.stream(b"payload/stream", plain.len());
    let mut out = header(key).to_vec();
    out.extend(plain.iter().zip(&ks).map(|(p, k)| p ^ k));
    let t = tag(key, &out);
    out.extend_from_slice(&t);
    Ok(Payload {
        model: model.to_string(),
        developer: developer.to_string(),
        encoded: out,
    })
}

pub fn decode_payload(bytes: &[u8], key: &WatermarkKey) -> Result<(String, String), PayloadError> {
    let bad = |m: &str| Err(PayloadError::BadFraming(m.to_string()));
    if bytes.len() < HEADER_LEN + 1 + TAG_LEN {
        return bad("too short");
    }
    if bytes[..HEADER_LEN] != header(key) {
        return bad("header mismatch");
    }
    let ks = key.stream(b"payload/stream", bytes.len());
    let body_len = (bytes[HEADER_LEN] ^ ks[0]) as usize;
    let total = HEADER_LEN + 1 + body_len + TAG_LEN;
    if bytes.len() < total {
        return bad("truncated");
    }
    let framed = &bytes[..total - TAG_LEN];
    if bytes[total - TAG_LEN..total] != tag(key, framed) {
        return bad("tag mismatch");
    }
    let body: Vec<u8> = framed[HEADER_LEN + 1..]
        .iter()
        .zip(&ks[1..])
        .map(|(c, k)| c ^ k)
        .collect();
    let mlen = body[0] as usize;
    if 1 + mlen > body.len() {
        return bad("model length out of range");
    }
    let model = String::from_utf8(body[1..1 + mlen].to_vec()).map_err(|_| PayloadError::BadFraming("model not utf-8".into()))?;
    let dev = String::from_utf8(body[1 + mlen..].to_vec()).map_err(|_| PayloadError::BadFraming("developer not utf-8".into()))?;
    Ok((model, dev))
}

/// Number of leading bytes of `prefix` that match the key's header, and
/// whether the whole frame validates (only possible when `prefix` is complete).
pub fn check_prefix(prefix: &[u8], key: &WatermarkKey) -> (usize, bool) {
    let h = header(key);
    let matched = prefix.iter().zip(h.iter()).take_while(|(a, b)| a == b).count();
    let full = matched == HEADER_LEN && decode_payload(prefix, key).is_ok();
    (matched, full)
}

/// Key whose header starts with `first_byte`, found by scanning seeds upward
/// from `start`. Used to build the 8'hA5 golden fixture.
pub fn fixture_key_with_first_byte(first_byte: u8, start: u64) -> (u64, WatermarkKey) {
    (start..)
        .map(|s| (s, WatermarkKey::from_seed(s)))
        .find(|(_, k)| header(k)[0] == first_byte)
        .expect("seed space is unbounded")
}
