//! Core data structures and verification logic for the Twine hash graph.
//!
//! A *chain* is a sequence of signed, content-addressed *pulses* owned by a
//! single authority. Pulses link backwards to earlier pulses on the same
//! chain and mix in pulses from other chains, so the union of all chains
//! forms a directed acyclic graph (the *tapestry*) on which the relative
//! order of any two connected records can be proven from hashes alone.
//!
//! Everything in this crate is pure given a [`Resolver`]: no I/O, no clocks,
//! no global state.

pub mod cbor;
pub mod cid;
pub mod error;
pub mod graph;
pub mod keys;
pub mod record;
pub mod resolver;

pub use cbor::Value;
pub use cid::{Cid, HashAlg, Codec};
pub use error::TwineError;
pub use graph::{prove_order, verify_order_proof, OrderProof, ProofDirection};
pub use keys::{PublicKey, SignatureAlg, SigningKey};
pub use record::{
    build_chain, build_pulse, verify_chain, verify_pulse, ChainMetadata, Mixin, Pulse,
    VerificationReport, TWINE_SPECIFICATION,
};
pub use resolver::{MemoryResolver, Resolver};
