//! Watermark keys and the keyed derivations every rule draws from.

use hmac::{Hmac, KeyInit, Mac};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

type HmacSha256 = Hmac<Sha256>;

pub const SECRET_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("key file must hold {expected} hex characters, found {found}")]
    BadLength { expected: usize, found: usize },
    #[error("key file is not valid hex: {0}")]
    BadHex(String),
}

#[derive(Clone, PartialEq, Eq)]
pub struct WatermarkKey {
    secret: [u8; SECRET_LEN],
    id: String,
}

impl fmt::Debug for WatermarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WatermarkKey").field("id", &self.id).finish_non_exhaustive()
    }
}

impl WatermarkKey {
    pub fn generate() -> WatermarkKey {
        let mut secret = [0u8; SECRET_LEN];
        rand::rngs::OsRng.fill_bytes(&mut secret);
        WatermarkKey::from_secret(secret)
    }

    /// Deterministic key for tests, fixtures and wrong-key sweeps.
    pub fn from_seed(seed: u64) -> WatermarkKey {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut secret = [0u8; SECRET_LEN];
        rng.fill_bytes(&mut secret);
        WatermarkKey::from_secret(secret)
    }

    pub fn from_secret(secret: [u8; SECRET_LEN]) -> WatermarkKey {
        let mut h = Sha256::new();
        h.update(b"rtlmark/key-id");
        h.update(secret);
        let id = hex::encode(&h.finalize()[..4]);
        WatermarkKey { secret, id }
    }

    pub fn from_hex(text: &str) -> Result<WatermarkKey, KeyError> {
        let t = text.trim();
        if t.len() != SECRET_LEN * 2 {
            return Err(KeyError::BadLength {
                expected: SECRET_LEN * 2,
                found: t.len(),
            });
        }
        let bytes = hex::decode(t).map_err(|e| KeyError::BadHex(e.to_string()))?;
        let mut secret = [0u8; SECRET_LEN];
        secret.copy_from_slice(&bytes);
        Ok(WatermarkKey::from_secret(secret))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.secret)
    }

    /// Short public label; safe to write into manifests.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// HMAC-SHA256 over length-prefixed parts.
    pub fn prf(&self, parts: &[&[u8]]) -> [u8; 32] {
        let mut mac = <HmacSha256 as KeyInit>::new_from_slice(&self.secret).expect("hmac accepts any key length");
        for p in parts {
            mac.update(&(p.len() as u32).to_be_bytes());
            mac.update(p);
        }
        let out = mac.finalize().into_bytes();
        let mut r = [0u8; 32];
        r.copy_from_slice(&out);
        r
    }

    /// `n` pseudorandom bytes for `label` (counter-mode PRF).
    pub fn stream(&self, label: &[u8], n: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(n);
        let mut ctr = 0u32;
        while out.len() < n {
            out.extend_from_slice(&self.prf(&[label, &ctr.to_be_bytes()]));
            ctr += 1;
        }
        out.truncate(n);
        out
    }

    pub fn params(&self, module: &str, rule: &str) -> KeyedParams {
        KeyedParams {
            key: self.clone(),
            module: module.to_string(),
            rule: rule.to_string(),
        }
    }
}

/// Rule parameters derived from (key, module, rule). Each purpose gets an
/// independent generator, so the order of queries never matters.
#[derive(Clone, Debug)]
pub struct KeyedParams {
    key: WatermarkKey,
    module: String,
    rule: String,
}

const SUFFIX_HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
const SUFFIX_TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

/// Entropy of [`KeyedParams::suffix`] in bits: log2(26 * 36^4).
pub fn suffix_bits() -> f64 {
    (26f64).log2() + 4.0 * (36f64).log2()
}

impl KeyedParams {
    pub fn rng(&self, purpose: &str) -> ChaCha20Rng {
        let seed = self
            .key
            .prf(&[self.module.as_bytes(), self.rule.as_bytes(), purpose.as_bytes()]);
        ChaCha20Rng::from_seed(seed)
    }

    /// Identifier suffix such as `_qk3v9`.
    pub fn suffix(&self) -> String {
        let mut rng = self.rng("suffix");
        let mut s = String::from("_");
        s.push(SUFFIX_HEAD[rng.gen_range(0..SUFFIX_HEAD.len())] as char);
        for _ in 0..4 {
            s.push(SUFFIX_TAIL[rng.gen_range(0..SUFFIX_TAIL.len())] as char);
        }
        s
    }

    /// Uniform permutation of `0..n`.
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut rng = self.rng(&format!("perm/{n}"));
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(&mut rng);
        v
    }

    /// Uniform choice in `0..n`.
    pub fn choice(&self, purpose: &str, n: usize) -> usize {
        self.rng(purpose).gen_range(0..n)
    }

    pub fn bit(&self, purpose: &str) -> bool {
        self.rng(purpose).gen::<bool>()
    }

    pub fn bytes(&self, purpose: &str, n: usize) -> Vec<u8> {
        let mut rng = self.rng(purpose);
        let mut v = vec![0u8; n];
        rng.fill_bytes(&mut v);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip_and_id() {
        let k = WatermarkKey::from_seed(7);
        let back = WatermarkKey::from_hex(&k.to_hex()).unwrap();
        assert_eq!(k, back);
        assert_eq!(k.id().len(), 8);
        assert_ne!(k.id(), WatermarkKey::from_seed(8).id());
        assert!(!format!("{k:?}").contains(&k.to_hex()));
    }

    #[test]
    fn rejects_bad_key_text() {
        assert!(matches!(WatermarkKey::from_hex("abcd"), Err(KeyError::BadLength { .. })));
        assert!(matches!(WatermarkKey::from_hex(&"zz".repeat(32)), Err(KeyError::BadHex(_))));
    }

    #[test]
    fn hmac_matches_rfc4231_case_2() {
        // Test case 2 of RFC 4231 uses a 4-byte key; check the primitive directly.
        let mut mac = <HmacSha256 as KeyInit>::new_from_slice(b"Jefe").unwrap();
        mac.update(b"what do ya want for nothing?");
        let out = mac.finalize().into_bytes();
        assert_eq!(
            hex::encode(out),
            "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
        );
    }

    #[test]
    fn params_depend_on_module_and_rule() {
        let k = WatermarkKey::from_seed(1);
        let a = k.params("fsm", "T6").suffix();
        assert_eq!(a, k.params("fsm", "T6").suffix());
        assert_ne!(a, k.params("fsm2", "T6").suffix());
        assert_ne!(a, k.params("fsm", "T2").suffix());
        assert_eq!(a.len(), 6);
        assert!(a[1..2].chars().all(|c| c.is_ascii_lowercase()));
    }

    #[test]
    fn permutation_is_a_permutation() {
        let p = WatermarkKey::from_seed(3).params("m", "T1").permutation(9);
        let mut s = p.clone();
        s.sort();
        assert_eq!(s, (0..9).collect::<Vec<_>>());
    }
}
