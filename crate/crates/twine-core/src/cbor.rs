//! Deterministic CBOR profile used for all hashed content.
//!
//! The profile is a strict subset of CBOR chosen so that structurally equal
//! values always serialize to identical bytes:
//!
//! - definite-length headers only, minimally encoded;
//! - map keys are text, unique, and ordered by byte length then by raw byte
//!   comparison;
//! - integers, byte strings, text, lists, maps, booleans and null only —
//!   floating-point values and non-text map keys are rejected;
//! - CIDs are encoded as tag 42 wrapping a byte string whose first byte is
//!   0x00 followed by the binary CID.
//!
//! The bytes produced here are the interchange format: they are what gets
//! hashed, signed, stored and served.

use std::collections::BTreeMap;

use crate::cid::Cid;
use crate::error::{Result, TwineError};

const CID_TAG: u64 = 42;

/// Map key ordered canonically: shorter keys first, ties broken bytewise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapKey(pub String);

impl Ord for MapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let (a, b) = (self.0.as_bytes(), other.0.as_bytes());
        a.len().cmp(&b.len()).then_with(|| a.cmp(b))
    }
}

impl PartialOrd for MapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Into<String>> From<S> for MapKey {
    fn from(s: S) -> Self {
        MapKey(s.into())
    }
}

/// A structured record admissible under the canonical profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i128),
    Bytes(Vec<u8>),
    Text(String),
    List(Vec<Value>),
    Map(BTreeMap<MapKey, Value>),
    Cid(Cid),
}

impl Value {
    pub fn map<K: Into<MapKey>, I: IntoIterator<Item = (K, Value)>>(entries: I) -> Value {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn list<I: IntoIterator<Item = Value>>(items: I) -> Value {
        Value::List(items.into_iter().collect())
    }

    pub fn text<S: Into<String>>(s: S) -> Value {
        Value::Text(s.into())
    }

    pub fn bytes<B: Into<Vec<u8>>>(b: B) -> Value {
        Value::Bytes(b.into())
    }

    pub fn int<N: Into<i128>>(n: N) -> Value {
        Value::Int(n.into())
    }

    /// Fetch a map entry by key; `None` for non-maps or missing keys.
    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(m) => m.get(&MapKey(key.to_string())),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i128> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            Value::Int(n) => u64::try_from(*n).ok(),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_cid(&self) -> Option<&Cid> {
        match self {
            Value::Cid(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

/// Serialize a value under the canonical profile.
///
/// Two structurally equal values always produce identical bytes.
pub fn canonical_serialize(value: &Value) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    encode(value, &mut out)?;
    Ok(out)
}

fn header(major: u8, arg: u64, out: &mut Vec<u8>) {
    let m = major << 5;
    match arg {
        0..=23 => out.push(m | arg as u8),
        24..=0xff => {
            out.push(m | 24);
            out.push(arg as u8);
        }
        0x100..=0xffff => {
            out.push(m | 25);
            out.extend_from_slice(&(arg as u16).to_be_bytes());
        }
        0x1_0000..=0xffff_ffff => {
            out.push(m | 26);
            out.extend_from_slice(&(arg as u32).to_be_bytes());
        }
        _ => {
            out.push(m | 27);
            out.extend_from_slice(&arg.to_be_bytes());
        }
    }
}

fn encode(value: &Value, out: &mut Vec<u8>) -> Result<()> {
    match value {
        Value::Int(n) => {
            if *n >= 0 {
                let u = u64::try_from(*n)
                    .map_err(|_| TwineError::UnsupportedValue(format!("integer {n} too large")))?;
                header(0, u, out);
            } else {
                let u = u64::try_from(-1 - *n).map_err(|_| {
                    TwineError::UnsupportedValue(format!("integer {n} too small"))
                })?;
                header(1, u, out);
            }
        }
        Value::Bytes(b) => {
            header(2, b.len() as u64, out);
            out.extend_from_slice(b);
        }
        Value::Text(s) => {
            header(3, s.len() as u64, out);
            out.extend_from_slice(s.as_bytes());
        }
        Value::List(items) => {
            header(4, items.len() as u64, out);
            for item in items {
                encode(item, out)?;
            }
        }
        Value::Map(m) => {
            // BTreeMap iteration already follows the canonical key order.
            header(5, m.len() as u64, out);
            for (k, v) in m {
                header(3, k.0.len() as u64, out);
                out.extend_from_slice(k.0.as_bytes());
                encode(v, out)?;
            }
        }
        Value::Cid(cid) => {
            header(6, CID_TAG, out);
            let binary = cid.to_bytes();
            header(2, (binary.len() + 1) as u64, out);
            out.push(0x00);
            out.extend_from_slice(&binary);
        }
        Value::Bool(b) => out.push(if *b { 0xf5 } else { 0xf4 }),
        Value::Null => out.push(0xf6),
    }
    Ok(())
}

/// Parse canonical bytes back into a value.
///
/// Rejects floats, indefinite lengths, non-text map keys and trailing bytes.
pub fn canonical_parse(bytes: &[u8]) -> Result<Value> {
    let mut d = Decoder { bytes, pos: 0 };
    let v = d.value()?;
    if d.pos != bytes.len() {
        return Err(TwineError::Malformed {
            offset: d.pos,
            reason: "trailing bytes".into(),
        });
    }
    Ok(v)
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn err<T>(&self, reason: &str) -> Result<T> {
        Err(TwineError::Malformed {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn byte(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| TwineError::Malformed {
                offset: self.pos,
                reason: "unexpected end of input".into(),
            })?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return self.err("unexpected end of input");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn head(&mut self) -> Result<(u8, u64)> {
        let b = self.byte()?;
        let major = b >> 5;
        let info = b & 0x1f;
        let arg = match info {
            0..=23 => info as u64,
            24 => self.byte()? as u64,
            25 => u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
            26 => u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
            27 => u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
            31 => return self.err("indefinite lengths are not canonical"),
            _ => return self.err("reserved additional-info value"),
        };
        Ok((major, arg))
    }

    fn value(&mut self) -> Result<Value> {
        let (major, arg) = self.head()?;
        match major {
            0 => Ok(Value::Int(arg as i128)),
            1 => Ok(Value::Int(-1 - arg as i128)),
            2 => Ok(Value::Bytes(self.take(arg as usize)?.to_vec())),
            3 => {
                let raw = self.take(arg as usize)?;
                let s = std::str::from_utf8(raw).map_err(|_| TwineError::Malformed {
                    offset: self.pos,
                    reason: "invalid UTF-8 in text string".into(),
                })?;
                Ok(Value::Text(s.to_string()))
            }
            4 => {
                let mut items = Vec::with_capacity((arg as usize).min(1 << 16));
                for _ in 0..arg {
                    items.push(self.value()?);
                }
                Ok(Value::List(items))
            }
            5 => {
                let mut m = BTreeMap::new();
                for _ in 0..arg {
                    let (kmajor, klen) = self.head()?;
                    if kmajor != 3 {
                        return Err(TwineError::UnsupportedValue(
                            "map keys must be text".into(),
                        ));
                    }
                    let raw = self.take(klen as usize)?;
                    let key = std::str::from_utf8(raw)
                        .map_err(|_| TwineError::Malformed {
                            offset: self.pos,
                            reason: "invalid UTF-8 in map key".into(),
                        })?
                        .to_string();
                    let v = self.value()?;
                    if m.insert(MapKey(key), v).is_some() {
                        return self.err("duplicate map key");
                    }
                }
                Ok(Value::Map(m))
            }
            6 => {
                if arg != CID_TAG {
                    return self.err("unsupported tag");
                }
                let (bmajor, blen) = self.head()?;
                if bmajor != 2 {
                    return self.err("CID tag must wrap a byte string");
                }
                let raw = self.take(blen as usize)?;
                if raw.first() != Some(&0x00) {
                    return self.err("CID byte string must start with 0x00");
                }
                let cid = Cid::from_bytes(&raw[1..])?;
                Ok(Value::Cid(cid))
            }
            7 => match arg {
                20 => Ok(Value::Bool(false)),
                21 => Ok(Value::Bool(true)),
                22 => Ok(Value::Null),
                _ => Err(TwineError::UnsupportedValue(
                    "floating-point and simple values are not part of the profile".into(),
                )),
            },
            _ => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_map_single_byte() {
        let bytes = canonical_serialize(&Value::map::<&str, _>([])).unwrap();
        assert_eq!(bytes, vec![0xa0]);
    }

    #[test]
    fn insertion_order_is_irrelevant() {
        let forward = Value::map([("a", Value::int(1)), ("b", Value::int(2))]);
        let reverse = Value::map([("b", Value::int(2)), ("a", Value::int(1))]);
        assert_eq!(
            canonical_serialize(&forward).unwrap(),
            canonical_serialize(&reverse).unwrap()
        );
    }

    #[test]
    fn key_order_is_length_then_bytes() {
        let v = Value::map([
            ("bb", Value::int(1)),
            ("a", Value::int(2)),
            ("ab", Value::int(3)),
        ]);
        let bytes = canonical_serialize(&v).unwrap();
        // "a" (len 1) before "ab" before "bb"
        let expected: Vec<u8> = vec![
            0xa3, 0x61, b'a', 0x02, 0x62, b'a', b'b', 0x03, 0x62, b'b', b'b', 0x01,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn negative_ints_roundtrip() {
        for n in [-1i128, -24, -25, -256, -65536, i64::MIN as i128] {
            let bytes = canonical_serialize(&Value::Int(n)).unwrap();
            assert_eq!(canonical_parse(&bytes).unwrap(), Value::Int(n));
        }
    }

    #[test]
    fn floats_rejected_on_parse() {
        // 0xfb = double-precision float header
        let bytes = [0xfb, 0x3f, 0xf0, 0, 0, 0, 0, 0, 0];
        assert!(matches!(
            canonical_parse(&bytes),
            Err(TwineError::UnsupportedValue(_))
        ));
    }

    #[test]
    fn non_text_map_key_rejected() {
        // {1: 2}
        let bytes = [0xa1, 0x01, 0x02];
        assert!(matches!(
            canonical_parse(&bytes),
            Err(TwineError::UnsupportedValue(_))
        ));
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            (-(1i128 << 64)..(1i128 << 64)).prop_map(Value::Int),
            proptest::collection::vec(any::<u8>(), 0..24).prop_map(Value::Bytes),
            "[a-z0-9]{0,12}".prop_map(Value::Text),
        ];
        leaf.prop_recursive(3, 24, 6, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..6).prop_map(Value::List),
                proptest::collection::btree_map("[a-z]{1,6}".prop_map(MapKey), inner, 0..6)
                    .prop_map(Value::Map),
            ]
        })
    }

    proptest! {
        #[test]
        fn roundtrip_is_identity(v in arb_value()) {
            let bytes = canonical_serialize(&v).unwrap();
            let parsed = canonical_parse(&bytes).unwrap();
            prop_assert_eq!(&parsed, &v);
            let again = canonical_serialize(&parsed).unwrap();
            prop_assert_eq!(again, bytes);
        }
    }
}
