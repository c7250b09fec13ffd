//! Isomorphism-invariant graph hashing.
//!
//! Every node starts from the hash of its block signature. For as many
//! rounds as there are vertices, each node is re-hashed from the sorted
//! hashes of its in-neighbors, its own hash, and the sorted hashes of its
//! out-neighbors. The digest of the whole graph is the hash of the sorted
//! final node hashes. SHA-256 throughout.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnn::graph::{ComputationalGraph, FlatGraph, GraphLimits};
use crate::error::Result;

/// 256-bit graph digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphDigest(pub [u8; 32]);

impl GraphDigest {
    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s)
            .map_err(|e| crate::error::Error::Parameter(format!("bad digest hex: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| crate::error::Error::Parameter("digest must be 32 bytes".into()))?;
        Ok(GraphDigest(arr))
    }
}

impl fmt::Display for GraphDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for GraphDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphDigest({})", self.to_hex())
    }
}

impl Serialize for GraphDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GraphDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GraphDigest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

fn sha(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// Hash a flattened labeled DAG. Invariant under vertex relabeling.
pub fn hash_flat(g: &FlatGraph) -> GraphDigest {
    let n = g.vertex_count();
    let mut hashes: Vec<[u8; 32]> = g.labels.iter().map(|l| sha(l)).collect();
    for _ in 0..n {
        let mut next = Vec::with_capacity(n);
        for v in 0..n {
            let mut ins: Vec<[u8; 32]> =
                g.in_neighbors(v).iter().map(|&w| hashes[w]).collect();
            let mut outs: Vec<[u8; 32]> =
                g.out_neighbors(v).iter().map(|&w| hashes[w]).collect();
            ins.sort_unstable();
            outs.sort_unstable();
            let mut buf = Vec::with_capacity((ins.len() + outs.len() + 1) * 32 + 2);
            for h in &ins {
                buf.extend_from_slice(h);
            }
            buf.push(b'|');
            buf.extend_from_slice(&hashes[v]);
            buf.push(b'|');
            for h in &outs {
                buf.extend_from_slice(h);
            }
            next.push(sha(&buf));
        }
        hashes = next;
    }
    hashes.sort_unstable();
    let mut buf = Vec::with_capacity(n * 32);
    for h in &hashes {
        buf.extend_from_slice(h);
    }
    GraphDigest(sha(&buf))
}

/// Validate `g` and hash its flattened form.
pub fn graph_hash(g: &ComputationalGraph, limits: &GraphLimits) -> Result<GraphDigest> {
    g.validate(limits)?;
    Ok(hash_flat(&g.flatten()))
}
