//! Content identifiers: self-describing hash references to canonical bytes.

use sha3::{Digest, Sha3_512};

use crate::error::{Result, TwineError};

/// Multicodec code for the canonical serialization profile (dag-cbor).
pub const CODEC_DAG_CBOR: u64 = 0x71;
/// Multihash code for SHA3-512.
pub const HASH_SHA3_512: u64 = 0x14;

/// Registered serialization identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Codec {
    DagCbor,
}

impl Codec {
    pub fn code(self) -> u64 {
        match self {
            Codec::DagCbor => CODEC_DAG_CBOR,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        match code {
            CODEC_DAG_CBOR => Ok(Codec::DagCbor),
            other => Err(TwineError::BadCid(format!("unknown codec {other:#x}"))),
        }
    }
}

/// Registered hash identifiers. SHA3-512 is mandatory; the enum leaves room
/// for additions without changing the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HashAlg {
    Sha3_512,
}

impl HashAlg {
    pub fn code(self) -> u64 {
        match self {
            HashAlg::Sha3_512 => HASH_SHA3_512,
        }
    }

    pub fn digest_len(self) -> usize {
        match self {
            HashAlg::Sha3_512 => 64,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        match code {
            HASH_SHA3_512 => Ok(HashAlg::Sha3_512),
            other => Err(TwineError::UnsupportedAlgorithm(other)),
        }
    }

    pub fn digest(self, bytes: &[u8]) -> Vec<u8> {
        match self {
            HashAlg::Sha3_512 => Sha3_512::digest(bytes).to_vec(),
        }
    }
}

/// A content identifier: version, codec, hash algorithm and digest.
///
/// The text rendering is multibase base32-lowercase without padding,
/// prefixed with `b`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cid {
    version: u8,
    codec: u64,
    hash_alg: u64,
    digest: Vec<u8>,
}

impl Cid {
    pub fn new(codec: Codec, hash_alg: HashAlg, digest: Vec<u8>) -> Result<Self> {
        if digest.len() != hash_alg.digest_len() {
            return Err(TwineError::BadCid(format!(
                "digest length {} does not match algorithm output {}",
                digest.len(),
                hash_alg.digest_len()
            )));
        }
        Ok(Cid {
            version: 1,
            codec: codec.code(),
            hash_alg: hash_alg.code(),
            digest,
        })
    }

    pub fn digest(&self) -> &[u8] {
        &self.digest
    }

    pub fn hash_alg(&self) -> Result<HashAlg> {
        HashAlg::from_code(self.hash_alg)
    }

    pub fn codec(&self) -> Result<Codec> {
        Codec::from_code(self.codec)
    }

    /// Binary form: varint(version) varint(codec) varint(hash) varint(len) digest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.digest.len());
        put_varint(self.version as u64, &mut out);
        put_varint(self.codec, &mut out);
        put_varint(self.hash_alg, &mut out);
        put_varint(self.digest.len() as u64, &mut out);
        out.extend_from_slice(&self.digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let version = get_varint(bytes, &mut pos)?;
        if version != 1 {
            return Err(TwineError::BadCid(format!("unsupported version {version}")));
        }
        let codec = get_varint(bytes, &mut pos)?;
        Codec::from_code(codec)?;
        let hash_alg = get_varint(bytes, &mut pos)?;
        let alg = HashAlg::from_code(hash_alg)?;
        let len = get_varint(bytes, &mut pos)? as usize;
        if len != alg.digest_len() {
            return Err(TwineError::BadCid(format!(
                "digest length {len} does not match algorithm"
            )));
        }
        if bytes.len() != pos + len {
            return Err(TwineError::BadCid("trailing or missing digest bytes".into()));
        }
        Ok(Cid {
            version: 1,
            codec,
            hash_alg,
            digest: bytes[pos..].to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(2 + self.digest.len() * 2);
        s.push('b');
        base32_lower_nopad(&self.to_bytes(), &mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rest = text
            .strip_prefix('b')
            .ok_or_else(|| TwineError::BadCid("missing multibase prefix 'b'".into()))?;
        let bytes = base32_decode(rest)?;
        Cid::from_bytes(&bytes)
    }
}

impl std::fmt::Display for Cid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl std::fmt::Debug for Cid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cid({})", self.to_text())
    }
}

impl std::str::FromStr for Cid {
    type Err = TwineError;

    fn from_str(s: &str) -> Result<Self> {
        Cid::from_text(s)
    }
}

/// Derive the CID of a byte string.
pub fn compute_cid(bytes: &[u8], hash_alg: HashAlg, codec: Codec) -> Result<Cid> {
    if bytes.is_empty() {
        return Err(TwineError::BadCid("refusing to address empty bytes".into()));
    }
    Cid::new(codec, hash_alg, hash_alg.digest(bytes))
}

/// Shorthand for the mandatory profile: SHA3-512 over dag-cbor bytes.
pub fn default_cid(bytes: &[u8]) -> Result<Cid> {
    compute_cid(bytes, HashAlg::Sha3_512, Codec::DagCbor)
}

fn put_varint(mut v: u64, out: &mut Vec<u8>) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn get_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| TwineError::BadCid("truncated varint".into()))?;
        *pos += 1;
        if shift >= 64 {
            return Err(TwineError::BadCid("varint overflow".into()));
        }
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

const BASE32_ALPHABET: &[u8; 32] = b"abcdefghijklmnopqrstuvwxyz234567";

fn base32_lower_nopad(bytes: &[u8], out: &mut String) {
    let mut acc = 0u64;
    let mut nbits = 0u32;
    for &b in bytes {
        acc = (acc << 8) | b as u64;
        nbits += 8;
        while nbits >= 5 {
            nbits -= 5;
            out.push(BASE32_ALPHABET[((acc >> nbits) & 0x1f) as usize] as char);
        }
    }
    if nbits > 0 {
        out.push(BASE32_ALPHABET[((acc << (5 - nbits)) & 0x1f) as usize] as char);
    }
}

fn base32_decode(text: &str) -> Result<Vec<u8>> {
    let mut acc = 0u64;
    let mut nbits = 0u32;
    let mut out = Vec::with_capacity(text.len() * 5 / 8);
    for c in text.bytes() {
        let v = match c {
            b'a'..=b'z' => c - b'a',
            b'2'..=b'7' => c - b'2' + 26,
            _ => return Err(TwineError::BadCid(format!("invalid base32 char {c:#x}"))),
        };
        acc = (acc << 5) | v as u64;
        nbits += 5;
        if nbits >= 8 {
            nbits -= 8;
            out.push((acc >> nbits) as u8);
        }
    }
    if acc & ((1 << nbits) - 1) != 0 {
        return Err(TwineError::BadCid("nonzero base32 padding bits".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = default_cid(b"hello").unwrap();
        let b = default_cid(b"hello").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn text_form_matches_published_shape() {
        // Same (version, codec, hash) triple as the published example CID
        // "bafyriqa5k2d3...": prefix and overall length must agree.
        let example = "bafyriqa5k2d3t3r774geicueaed2wc2fosjwqeexfhwbptfgq7rcn5m\
                       wucnhfeuxu2nxbrch3rl6yqjlozhuswo5ln3xwjm35iftt3tpqlcgs";
        let cid = default_cid(b"anything").unwrap();
        let text = cid.to_text();
        assert!(text.starts_with("bafyriq"));
        assert_eq!(text.len(), example.len());
        // and the published example itself parses under the same profile
        let parsed = Cid::from_text(example).unwrap();
        assert_eq!(parsed.hash_alg().unwrap(), HashAlg::Sha3_512);
        assert_eq!(parsed.codec().unwrap(), Codec::DagCbor);
        assert_eq!(parsed.to_text(), example);
    }

    #[test]
    fn binary_roundtrip() {
        let cid = default_cid(b"roundtrip").unwrap();
        assert_eq!(Cid::from_bytes(&cid.to_bytes()).unwrap(), cid);
        assert_eq!(Cid::from_text(&cid.to_text()).unwrap(), cid);
    }

    #[test]
    fn single_bit_flips_change_digest() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let base: Vec<u8> = (0..128).map(|_| rng.gen()).collect();
        let reference = default_cid(&base).unwrap();
        for _ in 0..100 {
            let mut flipped = base.clone();
            let bit = rng.gen_range(0..flipped.len() * 8);
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(default_cid(&flipped).unwrap(), reference);
        }
    }

    #[test]
    fn empty_bytes_rejected() {
        assert!(compute_cid(b"", HashAlg::Sha3_512, Codec::DagCbor).is_err());
    }
}
