//! Chain metadata and pulse records: construction, serialization, and
//! content verification.

use crate::cbor::{canonical_parse, canonical_serialize, Value};
use crate::cid::{default_cid, Cid};
use crate::error::{Result, TwineError};
use crate::keys::{sign_digest, signing_digest, verify_digest, PublicKey, SigningKey};
use crate::resolver::Resolver;

/// Schema string stamped on records produced by this crate.
pub const TWINE_SPECIFICATION: &str = "twine/1.0.x";

/// Metadata record describing a chain: who owns it, which key signs it,
/// and how pulse links are laid out.
#[derive(Debug, Clone)]
pub struct ChainMetadata {
    pub key: PublicKey,
    pub links_radix: u64,
    pub meta: Value,
    pub source: String,
    pub specification: String,
    pub signature: String,
}

impl ChainMetadata {
    fn content_value(&self) -> Value {
        Value::map([
            ("key", self.key.to_value()),
            ("links_radix", Value::int(self.links_radix as i128)),
            ("meta", self.meta.clone()),
            ("source", Value::text(&self.source)),
            ("specification", Value::text(&self.specification)),
        ])
    }

    pub fn to_value(&self) -> Value {
        let Value::Map(mut m) = self.content_value() else {
            unreachable!()
        };
        m.insert("signature".into(), Value::text(&self.signature));
        Value::Map(m)
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        canonical_serialize(&self.to_value())
    }

    pub fn cid(&self) -> Result<Cid> {
        default_cid(&self.canonical_bytes()?)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        Ok(ChainMetadata {
            key: PublicKey::from_value(v.get("key").ok_or(TwineError::BadField("key"))?)?,
            links_radix: v
                .get("links_radix")
                .and_then(Value::as_u64)
                .ok_or(TwineError::BadField("links_radix"))?,
            meta: v.get("meta").cloned().ok_or(TwineError::BadField("meta"))?,
            source: v
                .get("source")
                .and_then(Value::as_text)
                .ok_or(TwineError::BadField("source"))?
                .to_string(),
            specification: v
                .get("specification")
                .and_then(Value::as_text)
                .ok_or(TwineError::BadField("specification"))?
                .to_string(),
            signature: v
                .get("signature")
                .and_then(Value::as_text)
                .ok_or(TwineError::BadField("signature"))?
                .to_string(),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_value(&canonical_parse(bytes)?)
    }

    /// Check the self-signature over the non-signature fields.
    pub fn verify_signature(&self) -> Result<bool> {
        let digest = signing_digest(&self.content_value())?;
        Ok(verify_digest(&self.key, &self.signature, &digest))
    }
}

/// Create and sign a new chain's metadata record.
pub fn build_chain(
    signing_key: &SigningKey,
    source: &str,
    meta: Value,
    links_radix: u64,
) -> Result<(ChainMetadata, Cid)> {
    if links_radix < 2 {
        return Err(TwineError::InvalidRadix(links_radix));
    }
    let mut chain = ChainMetadata {
        key: signing_key.public_key(),
        links_radix,
        meta,
        source: source.to_string(),
        specification: TWINE_SPECIFICATION.to_string(),
        signature: String::new(),
    };
    let digest = signing_digest(&chain.content_value())?;
    chain.signature = sign_digest(signing_key, &digest)?;
    let cid = chain.cid()?;
    Ok((chain, cid))
}

/// A cross-chain hash link: the target chain's metadata CID and one of its
/// pulse CIDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mixin {
    pub chain: Cid,
    pub pulse: Cid,
}

impl Mixin {
    fn to_value(&self) -> Value {
        Value::list([Value::Cid(self.chain.clone()), Value::Cid(self.pulse.clone())])
    }

    fn from_value(v: &Value) -> Result<Self> {
        let items = v.as_list().ok_or(TwineError::BadField("mixin"))?;
        if items.len() != 2 {
            return Err(TwineError::BadField("mixin"));
        }
        Ok(Mixin {
            chain: items[0].as_cid().ok_or(TwineError::BadField("mixin.chain"))?.clone(),
            pulse: items[1].as_cid().ok_or(TwineError::BadField("mixin.pulse"))?.clone(),
        })
    }
}

/// A signed, content-addressed ledger record.
#[derive(Debug, Clone)]
pub struct Pulse {
    pub chain: Cid,
    pub index: u64,
    pub links: Vec<Cid>,
    pub mixins: Vec<Mixin>,
    pub payload: Value,
    pub specification: String,
    pub signature: String,
}

impl Pulse {
    fn content_value(&self) -> Value {
        Value::map([
            ("chain", Value::Cid(self.chain.clone())),
            ("index", Value::int(self.index as i128)),
            (
                "links",
                Value::list(self.links.iter().cloned().map(Value::Cid)),
            ),
            (
                "mixins",
                Value::list(self.mixins.iter().map(Mixin::to_value)),
            ),
            ("payload", self.payload.clone()),
            ("specification", Value::text(&self.specification)),
        ])
    }

    pub fn to_value(&self) -> Value {
        let Value::Map(mut m) = self.content_value() else {
            unreachable!()
        };
        m.insert("signature".into(), Value::text(&self.signature));
        Value::Map(m)
    }

    /// The interchange bytes: exactly what is hashed for the pulse CID.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        canonical_serialize(&self.to_value())
    }

    pub fn cid(&self) -> Result<Cid> {
        default_cid(&self.canonical_bytes()?)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let links = v
            .get("links")
            .and_then(Value::as_list)
            .ok_or(TwineError::BadField("links"))?
            .iter()
            .map(|l| l.as_cid().cloned().ok_or(TwineError::BadField("links")))
            .collect::<Result<Vec<_>>>()?;
        let mixins = v
            .get("mixins")
            .and_then(Value::as_list)
            .ok_or(TwineError::BadField("mixins"))?
            .iter()
            .map(Mixin::from_value)
            .collect::<Result<Vec<_>>>()?;
        Ok(Pulse {
            chain: v
                .get("chain")
                .and_then(Value::as_cid)
                .ok_or(TwineError::BadField("chain"))?
                .clone(),
            index: v
                .get("index")
                .and_then(Value::as_u64)
                .ok_or(TwineError::BadField("index"))?,
            links,
            mixins,
            payload: v
                .get("payload")
                .cloned()
                .ok_or(TwineError::BadField("payload"))?,
            specification: v
                .get("specification")
                .and_then(Value::as_text)
                .ok_or(TwineError::BadField("specification"))?
                .to_string(),
            signature: v
                .get("signature")
                .and_then(Value::as_text)
                .ok_or(TwineError::BadField("signature"))?
                .to_string(),
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_value(&canonical_parse(bytes)?)
    }
}

/// Same-chain link targets for a pulse at `index` under `radix`:
/// the previous pulse, plus one skip target `index - radix^j` for every
/// j >= 1 with radix^j <= index and index divisible by radix^j.
pub fn link_indices(radix: u64, index: u64) -> Vec<u64> {
    if index == 0 {
        return Vec::new();
    }
    let mut out = vec![index - 1];
    let mut step = radix;
    loop {
        if step > index {
            break;
        }
        if index % step == 0 {
            out.push(index - step);
        }
        match step.checked_mul(radix) {
            Some(next) => step = next,
            None => break,
        }
    }
    out
}

fn fetch_pulse(resolver: &dyn Resolver, cid: &Cid) -> Result<Pulse> {
    let bytes = resolver.fetch_required(cid)?;
    Pulse::from_bytes(&bytes)
}

/// Walk backwards along same-chain links from `start` to the pulse at
/// `target` index, taking the largest available jump at each step.
pub fn resolve_index(
    resolver: &dyn Resolver,
    start: &Pulse,
    target: u64,
) -> Result<(Pulse, Cid)> {
    if target > start.index {
        return Err(TwineError::ResolverMiss(format!(
            "index {target} is ahead of pulse {}",
            start.index
        )));
    }
    if target == start.index {
        let cid = start.cid()?;
        return Ok((start.clone(), cid));
    }
    let mut cur = start.clone();
    loop {
        // Pick the link landing closest to (but not before) the target.
        let mut best: Option<(u64, &Cid)> = None;
        for link in &cur.links {
            let p = fetch_pulse(resolver, link)?;
            if p.index >= target {
                match best {
                    Some((idx, _)) if idx <= p.index => {}
                    _ => best = Some((p.index, link)),
                }
            }
        }
        let (_, cid) = best.ok_or_else(|| {
            TwineError::ResolverMiss(format!("no link path from {} to {target}", cur.index))
        })?;
        let cid = cid.clone();
        let p = fetch_pulse(resolver, &cid)?;
        if p.index == target {
            return Ok((p, cid));
        }
        cur = p;
    }
}

/// Build and sign the next pulse on a chain.
///
/// `prev` must be the current head (absent only for the genesis pulse).
/// The resolver supplies earlier same-chain pulses needed for skip links.
#[allow(clippy::too_many_arguments)]
pub fn build_pulse(
    chain_meta: &ChainMetadata,
    prev: Option<&Pulse>,
    resolver: &dyn Resolver,
    mixins: Vec<Mixin>,
    payload: Value,
    specification: &str,
    signing_key: &SigningKey,
) -> Result<(Pulse, Cid)> {
    let chain_cid = chain_meta.cid()?;
    let (index, links) = match prev {
        None => (0, Vec::new()),
        Some(prev) => {
            if prev.chain != chain_cid {
                return Err(TwineError::HeadMismatch);
            }
            let index = prev.index + 1;
            let targets = link_indices(chain_meta.links_radix, index);
            let mut links = vec![prev.cid()?];
            for &t in &targets[1..] {
                let (_, cid) = resolve_index(resolver, prev, t)?;
                links.push(cid);
            }
            (index, links)
        }
    };
    let mut pulse = Pulse {
        chain: chain_cid,
        index,
        links,
        mixins,
        payload,
        specification: specification.to_string(),
        signature: String::new(),
    };
    let digest = signing_digest(&pulse.content_value())?;
    pulse.signature = sign_digest(signing_key, &digest)?;
    let cid = pulse.cid()?;
    Ok((pulse, cid))
}

/// Outcome of checking one pulse against its chain and stored neighbors.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub cid_ok: bool,
    pub signature_ok: bool,
    pub link_ok: bool,
    pub index_ok: bool,
    pub details: Vec<String>,
}

impl VerificationReport {
    pub fn is_valid(&self) -> bool {
        self.cid_ok && self.signature_ok && self.link_ok && self.index_ok
    }

    fn failed(reason: String) -> Self {
        VerificationReport {
            cid_ok: false,
            signature_ok: false,
            link_ok: false,
            index_ok: false,
            details: vec![reason],
        }
    }
}

/// Verify a stored pulse: content address, signature, link structure and
/// index monotonicity. Content failures are reported in flags; only
/// resolver infrastructure failures surface as `Err`.
pub fn verify_pulse(
    bytes: &[u8],
    expected_cid: &Cid,
    chain_meta: &ChainMetadata,
    resolver: &dyn Resolver,
) -> Result<VerificationReport> {
    let pulse = match Pulse::from_bytes(bytes) {
        Ok(p) => p,
        Err(e) => return Ok(VerificationReport::failed(format!("unparseable pulse: {e}"))),
    };
    let mut details = Vec::new();

    let cid_ok = match default_cid(bytes) {
        Ok(c) => {
            let ok = &c == expected_cid;
            if !ok {
                details.push("recomputed CID does not match".to_string());
            }
            ok
        }
        Err(e) => {
            details.push(format!("cannot hash bytes: {e}"));
            false
        }
    };

    let signature_ok = match signing_digest(&pulse.content_value()) {
        Ok(digest) => {
            let ok = verify_digest(&chain_meta.key, &pulse.signature, &digest);
            if !ok {
                details.push("signature does not verify under chain key".to_string());
            }
            ok
        }
        Err(e) => {
            details.push(format!("cannot serialize content: {e}"));
            false
        }
    };

    let chain_cid = chain_meta.cid()?;
    let mut link_ok = true;
    if pulse.chain != chain_cid {
        link_ok = false;
        details.push("pulse chain field does not reference this chain".to_string());
    }

    let expected_targets = link_indices(chain_meta.links_radix, pulse.index);
    if pulse.links.len() != expected_targets.len() {
        link_ok = false;
        details.push(format!(
            "expected {} links for index {}, found {}",
            expected_targets.len(),
            pulse.index,
            pulse.links.len()
        ));
    }
    let mut index_ok = true;
    for (slot, (link, &target)) in pulse.links.iter().zip(&expected_targets).enumerate() {
        match resolver.fetch(link) {
            Err(e) => return Err(e),
            Ok(None) => {
                link_ok = false;
                details.push(format!("link {slot} does not resolve"));
            }
            Ok(Some(linked_bytes)) => {
                // Cid integrity of the linked record.
                match default_cid(&linked_bytes) {
                    Ok(c) if &c == link => {}
                    _ => {
                        link_ok = false;
                        details.push(format!("link {slot} bytes do not match its CID"));
                        continue;
                    }
                }
                match Pulse::from_bytes(&linked_bytes) {
                    Ok(linked) => {
                        if linked.chain != pulse.chain {
                            link_ok = false;
                            details.push(format!("link {slot} crosses chains"));
                        }
                        if linked.index != target {
                            link_ok = false;
                            details.push(format!(
                                "link {slot} resolves to index {} (expected {})",
                                linked.index, target
                            ));
                        }
                        if slot == 0 && linked.index + 1 != pulse.index {
                            index_ok = false;
                            details.push("index is not predecessor + 1".to_string());
                        }
                    }
                    Err(e) => {
                        link_ok = false;
                        details.push(format!("link {slot} is not a pulse: {e}"));
                    }
                }
            }
        }
    }
    if pulse.index == 0 && !pulse.links.is_empty() {
        index_ok = false;
        details.push("genesis pulse must have no links".to_string());
    }

    // Mixins: resolvability and content-address integrity only; targets are
    // a per-chain policy question, not a data-model one.
    for (i, mixin) in pulse.mixins.iter().enumerate() {
        match resolver.fetch(&mixin.pulse) {
            Err(e) => return Err(e),
            Ok(None) => {
                link_ok = false;
                details.push(format!("mixin {i} does not resolve"));
            }
            Ok(Some(b)) => match default_cid(&b) {
                Ok(c) if c == mixin.pulse => {}
                _ => {
                    link_ok = false;
                    details.push(format!("mixin {i} bytes do not match its CID"));
                }
            },
        }
    }

    Ok(VerificationReport {
        cid_ok,
        signature_ok,
        link_ok,
        index_ok,
        details,
    })
}

/// Verify a chain metadata record: content address and self-signature.
pub fn verify_chain(bytes: &[u8], expected_cid: &Cid) -> Result<VerificationReport> {
    let chain = match ChainMetadata::from_bytes(bytes) {
        Ok(c) => c,
        Err(e) => return Ok(VerificationReport::failed(format!("unparseable chain: {e}"))),
    };
    let mut details = Vec::new();
    let cid_ok = match default_cid(bytes) {
        Ok(c) => {
            let ok = &c == expected_cid;
            if !ok {
                details.push("recomputed CID does not match".to_string());
            }
            ok
        }
        Err(_) => false,
    };
    let signature_ok = chain.verify_signature().unwrap_or(false);
    if !signature_ok {
        details.push("chain self-signature does not verify".to_string());
    }
    let link_ok = chain.links_radix >= 2;
    if !link_ok {
        details.push("links_radix below 2".to_string());
    }
    Ok(VerificationReport {
        cid_ok,
        signature_ok,
        link_ok,
        index_ok: true,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolver::MemoryResolver;
    use rand::SeedableRng;

    fn key() -> SigningKey {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        SigningKey::generate_es256(&mut rng)
    }

    fn chain(key: &SigningKey) -> (ChainMetadata, Cid) {
        build_chain(key, "test:unit", Value::map::<&str, _>([]), 10).unwrap()
    }

    #[test]
    fn link_indices_follow_radix_rule() {
        assert_eq!(link_indices(10, 0), Vec::<u64>::new());
        assert_eq!(link_indices(10, 7), vec![6]);
        assert_eq!(link_indices(10, 10), vec![9, 0]);
        assert_eq!(link_indices(10, 100), vec![99, 90, 0]);
        assert_eq!(link_indices(2, 8), vec![7, 6, 4, 0]);
    }

    #[test]
    fn chain_roundtrip_and_tamper() {
        let k = key();
        let (meta, cid) = chain(&k);
        assert!(meta.verify_signature().unwrap());
        let bytes = meta.canonical_bytes().unwrap();
        let report = verify_chain(&bytes, &cid).unwrap();
        assert!(report.is_valid(), "{:?}", report.details);

        let mut tampered = meta.clone();
        tampered.source = "test:forged".to_string();
        assert!(!tampered.verify_signature().unwrap());
    }

    #[test]
    fn distinct_keys_distinct_cids() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let k1 = SigningKey::generate_es256(&mut rng);
        let k2 = SigningKey::generate_es256(&mut rng);
        let (_, c1) = build_chain(&k1, "same", Value::Null, 10).unwrap();
        let (_, c2) = build_chain(&k2, "same", Value::Null, 10).unwrap();
        assert_ne!(c1, c2);
    }

    #[test]
    fn invalid_radix_rejected() {
        let k = key();
        assert!(matches!(
            build_chain(&k, "test", Value::Null, 1),
            Err(TwineError::InvalidRadix(1))
        ));
    }

    fn grow(
        n: u64,
        meta: &ChainMetadata,
        k: &SigningKey,
        resolver: &MemoryResolver,
    ) -> Vec<(Pulse, Cid)> {
        let mut out: Vec<(Pulse, Cid)> = Vec::new();
        for i in 0..n {
            let prev = out.last().map(|(p, _)| p);
            let (pulse, cid) = build_pulse(
                meta,
                prev,
                resolver,
                vec![],
                Value::map([("i", Value::int(i as i128))]),
                TWINE_SPECIFICATION,
                k,
            )
            .unwrap();
            resolver.insert(cid.clone(), pulse.canonical_bytes().unwrap());
            out.push((pulse, cid));
        }
        out
    }

    #[test]
    fn skip_links_populated_and_verified() {
        let k = key();
        let (meta, _) = chain(&k);
        let resolver = MemoryResolver::new();
        let pulses = grow(12, &meta, &k, &resolver);

        assert!(pulses[0].0.links.is_empty());
        assert_eq!(pulses[7].0.links, vec![pulses[6].1.clone()]);
        assert_eq!(
            pulses[10].0.links,
            vec![pulses[9].1.clone(), pulses[0].1.clone()]
        );

        for (pulse, cid) in &pulses {
            let bytes = pulse.canonical_bytes().unwrap();
            let report = verify_pulse(&bytes, cid, &meta, &resolver).unwrap();
            assert!(report.is_valid(), "index {}: {:?}", pulse.index, report.details);
        }
    }

    #[test]
    fn payload_mutation_detected() {
        let k = key();
        let (meta, _) = chain(&k);
        let resolver = MemoryResolver::new();
        let pulses = grow(3, &meta, &k, &resolver);

        let mut mutated = pulses[2].0.clone();
        mutated.payload = Value::text("forged");
        let bytes = mutated.canonical_bytes().unwrap();
        let report = verify_pulse(&bytes, &pulses[2].1, &meta, &resolver).unwrap();
        assert!(!report.cid_ok);
        assert!(!report.signature_ok);
    }

    #[test]
    fn repointed_link_detected() {
        let k = key();
        let (meta, _) = chain(&k);
        let resolver = MemoryResolver::new();
        let pulses = grow(4, &meta, &k, &resolver);

        // links[0] repointed to index - 2: signature is re-made so only the
        // link/index checks can catch it.
        let mut forged = pulses[3].0.clone();
        forged.links[0] = pulses[1].1.clone();
        let digest = signing_digest(&forged.content_value()).unwrap();
        forged.signature = sign_digest(&k, &digest).unwrap();
        let cid = forged.cid().unwrap();
        let bytes = forged.canonical_bytes().unwrap();
        let report = verify_pulse(&bytes, &cid, &meta, &resolver).unwrap();
        assert!(!report.link_ok);
        assert!(!report.index_ok);
    }

    #[test]
    fn head_mismatch_across_chains() {
        let k = key();
        let (meta_a, _) = build_chain(&k, "a", Value::Null, 10).unwrap();
        let (meta_b, _) = build_chain(&k, "b", Value::Null, 10).unwrap();
        let resolver = MemoryResolver::new();
        let pulses = grow(1, &meta_a, &k, &resolver);
        let err = build_pulse(
            &meta_b,
            Some(&pulses[0].0),
            &resolver,
            vec![],
            Value::Null,
            TWINE_SPECIFICATION,
            &k,
        );
        assert!(matches!(err, Err(TwineError::HeadMismatch)));
    }
}
