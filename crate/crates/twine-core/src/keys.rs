//! Signature suites and the compact JWS envelope used in pulse signatures.
//!
//! The signed payload is always the SHA3-512 hash of the canonical
//! serialization of a record's non-signature fields, carried as the JWS
//! payload segment. RS256 (RSA PKCS#1 v1.5 with SHA-256, 4096-bit modulus
//! by default) is the primary suite; ES256 (ECDSA P-256) is also accepted.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rsa::signature::SignatureEncoding;
use rsa::traits::PublicKeyParts;
use sha3::{Digest, Sha3_512};

use crate::cbor::{canonical_serialize, Value};
use crate::error::{Result, TwineError};

/// Supported signature algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureAlg {
    Rs256,
    Es256,
}

impl SignatureAlg {
    pub fn name(self) -> &'static str {
        match self {
            SignatureAlg::Rs256 => "RS256",
            SignatureAlg::Es256 => "ES256",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "RS256" => Ok(SignatureAlg::Rs256),
            "ES256" => Ok(SignatureAlg::Es256),
            other => Err(TwineError::SigningFailure(format!(
                "unknown signature algorithm {other}"
            ))),
        }
    }
}

/// A private signing key for one of the supported suites.
#[derive(Clone)]
pub enum SigningKey {
    Rs256(rsa::RsaPrivateKey),
    Es256(p256::ecdsa::SigningKey),
}

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SigningKey({})", self.alg().name())
    }
}

impl SigningKey {
    /// Generate a fresh RS256 key. The default modulus size is 4096 bits.
    pub fn generate_rs256<R: rand::CryptoRng + rand::RngCore>(
        rng: &mut R,
        bits: usize,
    ) -> Result<Self> {
        let key = rsa::RsaPrivateKey::new(rng, bits)
            .map_err(|e| TwineError::SigningFailure(e.to_string()))?;
        Ok(SigningKey::Rs256(key))
    }

    pub fn generate_es256<R: rand::CryptoRng + rand::RngCore>(rng: &mut R) -> Self {
        let mut scalar = [0u8; 32];
        loop {
            rng.fill_bytes(&mut scalar);
            if let Ok(key) = p256::ecdsa::SigningKey::from_bytes(&scalar.into()) {
                return SigningKey::Es256(key);
            }
        }
    }

    pub fn alg(&self) -> SignatureAlg {
        match self {
            SigningKey::Rs256(_) => SignatureAlg::Rs256,
            SigningKey::Es256(_) => SignatureAlg::Es256,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        match self {
            SigningKey::Rs256(k) => PublicKey::Rs256(k.to_public_key()),
            SigningKey::Es256(k) => PublicKey::Es256(*k.verifying_key()),
        }
    }

    fn sign_raw(&self, message: &[u8]) -> Result<Vec<u8>> {
        match self {
            SigningKey::Rs256(k) => {
                use rsa::pkcs1v15::SigningKey as RsaSigner;
                use rsa::signature::Signer;
                let signer = RsaSigner::<sha2::Sha256>::new(k.clone());
                let sig = signer
                    .try_sign(message)
                    .map_err(|e| TwineError::SigningFailure(e.to_string()))?;
                Ok(sig.to_bytes().to_vec())
            }
            SigningKey::Es256(k) => {
                use p256::ecdsa::signature::Signer;
                let sig: p256::ecdsa::Signature = k
                    .try_sign(message)
                    .map_err(|e| TwineError::SigningFailure(e.to_string()))?;
                Ok(sig.to_bytes().to_vec())
            }
        }
    }
}

/// A public verification key, convertible to and from its record form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicKey {
    Rs256(rsa::RsaPublicKey),
    Es256(p256::ecdsa::VerifyingKey),
}

impl PublicKey {
    pub fn alg(&self) -> SignatureAlg {
        match self {
            PublicKey::Rs256(_) => SignatureAlg::Rs256,
            PublicKey::Es256(_) => SignatureAlg::Es256,
        }
    }

    /// Record form stored in chain metadata (JWK-style fields, byte-string
    /// key material).
    pub fn to_value(&self) -> Value {
        match self {
            PublicKey::Rs256(k) => Value::map([
                ("alg", Value::text("RS256")),
                ("kty", Value::text("RSA")),
                ("n", Value::bytes(k.n().to_bytes_be())),
                ("e", Value::bytes(k.e().to_bytes_be())),
            ]),
            PublicKey::Es256(k) => {
                let point = k.to_sec1_point(false);
                let raw = point.as_bytes();
                Value::map([
                    ("alg", Value::text("ES256")),
                    ("kty", Value::text("EC")),
                    ("crv", Value::text("P-256")),
                    ("x", Value::bytes(raw[1..33].to_vec())),
                    ("y", Value::bytes(raw[33..65].to_vec())),
                ])
            }
        }
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let alg = v
            .get("alg")
            .and_then(Value::as_text)
            .ok_or(TwineError::BadField("key.alg"))?;
        match SignatureAlg::from_name(alg)? {
            SignatureAlg::Rs256 => {
                let n = v
                    .get("n")
                    .and_then(Value::as_bytes)
                    .ok_or(TwineError::BadField("key.n"))?;
                let e = v
                    .get("e")
                    .and_then(Value::as_bytes)
                    .ok_or(TwineError::BadField("key.e"))?;
                let key = rsa::RsaPublicKey::new(
                    rsa::BigUint::from_bytes_be(n),
                    rsa::BigUint::from_bytes_be(e),
                )
                .map_err(|e| TwineError::SigningFailure(e.to_string()))?;
                Ok(PublicKey::Rs256(key))
            }
            SignatureAlg::Es256 => {
                let x = v
                    .get("x")
                    .and_then(Value::as_bytes)
                    .ok_or(TwineError::BadField("key.x"))?;
                let y = v
                    .get("y")
                    .and_then(Value::as_bytes)
                    .ok_or(TwineError::BadField("key.y"))?;
                let mut sec1 = Vec::with_capacity(65);
                sec1.push(0x04);
                sec1.extend_from_slice(x);
                sec1.extend_from_slice(y);
                let key = p256::ecdsa::VerifyingKey::from_sec1_bytes(&sec1)
                    .map_err(|e| TwineError::SigningFailure(e.to_string()))?;
                Ok(PublicKey::Es256(key))
            }
        }
    }

    fn verify_raw(&self, message: &[u8], signature: &[u8]) -> bool {
        match self {
            PublicKey::Rs256(k) => {
                use rsa::pkcs1v15::{Signature, VerifyingKey};
                use rsa::signature::Verifier;
                let Ok(sig) = Signature::try_from(signature) else {
                    return false;
                };
                VerifyingKey::<sha2::Sha256>::new(k.clone())
                    .verify(message, &sig)
                    .is_ok()
            }
            PublicKey::Es256(k) => {
                use p256::ecdsa::signature::Verifier;
                let Ok(sig) = p256::ecdsa::Signature::from_slice(signature) else {
                    return false;
                };
                k.verify(message, &sig).is_ok()
            }
        }
    }
}

/// Hash a record's non-signature serialization for signing.
pub fn signing_digest(content: &Value) -> Result<[u8; 64]> {
    let bytes = canonical_serialize(content)?;
    Ok(Sha3_512::digest(&bytes).into())
}

/// Produce a compact JWS over a 64-byte content digest.
pub fn sign_digest(key: &SigningKey, digest: &[u8; 64]) -> Result<String> {
    let header = format!("{{\"alg\":\"{}\"}}", key.alg().name());
    let signing_input = format!(
        "{}.{}",
        URL_SAFE_NO_PAD.encode(header.as_bytes()),
        URL_SAFE_NO_PAD.encode(digest)
    );
    let sig = key.sign_raw(signing_input.as_bytes())?;
    Ok(format!("{signing_input}.{}", URL_SAFE_NO_PAD.encode(sig)))
}

/// Verify a compact JWS against the expected content digest and key.
///
/// Returns false (never panics or errors) on any malformed input.
pub fn verify_digest(key: &PublicKey, jws: &str, digest: &[u8; 64]) -> bool {
    let mut parts = jws.split('.');
    let (Some(h), Some(p), Some(s), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let Ok(header) = URL_SAFE_NO_PAD.decode(h) else {
        return false;
    };
    let expected_header = format!("{{\"alg\":\"{}\"}}", key.alg().name());
    if header != expected_header.as_bytes() {
        return false;
    }
    let Ok(payload) = URL_SAFE_NO_PAD.decode(p) else {
        return false;
    };
    if payload != digest {
        return false;
    }
    let Ok(sig) = URL_SAFE_NO_PAD.decode(s) else {
        return false;
    };
    key.verify_raw(format!("{h}.{p}").as_bytes(), &sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn es_key() -> SigningKey {
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        SigningKey::generate_es256(&mut rng)
    }

    #[test]
    fn jws_roundtrip_es256() {
        let key = es_key();
        let digest = [7u8; 64];
        let jws = sign_digest(&key, &digest).unwrap();
        assert!(verify_digest(&key.public_key(), &jws, &digest));
        let mut wrong = digest;
        wrong[0] ^= 1;
        assert!(!verify_digest(&key.public_key(), &jws, &wrong));
    }

    #[test]
    fn jws_roundtrip_rs256() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let key = SigningKey::generate_rs256(&mut rng, 2048).unwrap();
        let digest = [3u8; 64];
        let jws = sign_digest(&key, &digest).unwrap();
        assert!(verify_digest(&key.public_key(), &jws, &digest));
        // tampered signature bytes
        let mut chars: Vec<char> = jws.chars().collect();
        let last = chars.len() - 1;
        chars[last] = if chars[last] == 'A' { 'B' } else { 'A' };
        let tampered: String = chars.into_iter().collect();
        assert!(!verify_digest(&key.public_key(), &tampered, &digest));
    }

    #[test]
    fn key_record_roundtrip() {
        let key = es_key().public_key();
        let v = key.to_value();
        assert_eq!(PublicKey::from_value(&v).unwrap(), key);
    }
}
