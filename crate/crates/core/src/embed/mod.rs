//! Dense graph embeddings trained so Euclidean distances reproduce pairwise
//! graph edit distances (multidimensional-scaling style stress minimization).

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::ged::{ged, GedCostTable, GedOptions};
use crate::cnn::graph::ComputationalGraph;
use crate::cnn::hash::GraphDigest;
use crate::error::{Error, Result};

/// Trained table of digest -> d-dimensional embedding.
///
/// `BTreeMap` keeps entries in digest order, which is also the declared
/// tie-break order for nearest lookups.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub d: usize,
    pub entries: BTreeMap<GraphDigest, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Embedding lookup; unknown digests are an error.
    pub fn embed(&self, digest: GraphDigest) -> Result<&[f64]> {
        self.entries
            .get(&digest)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Lookup(format!("no embedding for digest {digest}")))
    }

    /// Nearest table entry to an arbitrary vector; ties resolve to the
    /// lexicographically smaller digest (iteration order of the map).
    pub fn nearest_valid(&self, x: &[f64]) -> Result<(GraphDigest, f64)> {
        if self.entries.is_empty() {
            return Err(Error::Lookup("embedding table is empty".into()));
        }
        let mut best: Option<(GraphDigest, f64)> = None;
        for (digest, e) in &self.entries {
            let dist = crate::cnn::neighbors::euclidean(x, e);
            match best {
                Some((_, bd)) if dist >= bd => {}
                _ => best = Some((*digest, dist)),
            }
        }
        Ok(best.unwrap())
    }

    /// Entries sorted by distance to `x`, nearest first, digest tie-break.
    pub fn ranked_by_distance(&self, x: &[f64]) -> Vec<(GraphDigest, f64)> {
        let mut all: Vec<(GraphDigest, f64)> = self
            .entries
            .iter()
            .map(|(d, e)| (*d, crate::cnn::neighbors::euclidean(x, e)))
            .collect();
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        all
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Gradient-descent recipe for the embedding table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub step: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Fraction of pairs held out from training, used for generalization
    /// checks; 0 trains on every pair.
    pub holdout_fraction: f64,
    pub ged_options: GedOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            step: 1e-2,
            momentum: 0.9,
            epochs: 2000,
            holdout_fraction: 0.0,
            ged_options: GedOptions::default(),
        }
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub table: EmbeddingTable,
    /// Final mean squared distance error over the trained pairs.
    pub stress: f64,
    /// Per-epoch loss curve (stress on trained pairs).
    pub loss_curve: Vec<f64>,
    /// (i, j, target GED, embedded distance) for held-out pairs.
    pub holdout: Vec<(usize, usize, f64, f64)>,
    pub mean_ged: f64,
}

/// Train embeddings for `graphs` so that pairwise Euclidean distances match
/// pairwise GEDs. Deterministic under `seed`.
pub fn train_embeddings(
    graphs: &[(GraphDigest, ComputationalGraph)],
    costs: &GedCostTable,
    d: usize,
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainReport> {
    let n = graphs.len();
    if d < 1 {
        return Err(Error::Parameter("embedding dimension must be >= 1".into()));
    }
    if n < 2 {
        return Err(Error::Parameter(
            "need at least two graphs to train embeddings".into(),
        ));
    }

    // All pairwise targets.
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let target = ged(&graphs[i].1, &graphs[j].1, costs, &opts.ged_options);
            pairs.push((i, j, target));
        }
    }
    let mean_ged = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Holdout split.
    let holdout_count = (pairs.len() as f64 * opts.holdout_fraction).round() as usize;
    let mut indices: Vec<usize> = (0..pairs.len()).collect();
    for i in (1..indices.len()).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let holdout_idx: Vec<usize> = indices[..holdout_count.min(pairs.len().saturating_sub(1))].to_vec();
    let mut is_holdout = vec![false; pairs.len()];
    for &i in &holdout_idx {
        is_holdout[i] = true;
    }
    let train_pairs: Vec<(usize, usize, f64)> = pairs
        .iter()
        .enumerate()
        .filter(|(i, _)| !is_holdout[*i])
        .map(|(_, p)| *p)
        .collect();

    // Init uniform in [-0.1, 0.1].
    let mut emb: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-0.1..0.1)).collect())
        .collect();
    let mut velocity = vec![vec![0.0; d]; n];

    let p = train_pairs.len().max(1) as f64;
    let mut loss_curve = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        let mut grads = vec![vec![0.0; d]; n];
        let mut loss = 0.0;
        for &(i, j, target) in &train_pairs {
            let mut dist2 = 0.0;
            for k in 0..d {
                let diff = emb[i][k] - emb[j][k];
                dist2 += diff * diff;
            }
            let dist = dist2.sqrt().max(1e-12);
            let err = dist - target;
            loss += err * err;
            let coeff = 2.0 * err / dist / p;
            for k in 0..d {
                let diff = emb[i][k] - emb[j][k];
                grads[i][k] += coeff * diff;
                grads[j][k] -= coeff * diff;
            }
        }
        loss_curve.push(loss / p);
        for i in 0..n {
            for k in 0..d {
                velocity[i][k] = opts.momentum * velocity[i][k] - opts.step * grads[i][k];
                emb[i][k] += velocity[i][k];
            }
        }
    }

    // Final stress on trained pairs.
    let stress = {
        let mut loss = 0.0;
        for &(i, j, target) in &train_pairs {
            let dist = crate::cnn::neighbors::euclidean(&emb[i], &emb[j]);
            loss += (dist - target) * (dist - target);
        }
        loss / p
    };

    let holdout = holdout_idx
        .iter()
        .map(|&pi| {
            let (i, j, target) = pairs[pi];
            let dist = crate::cnn::neighbors::euclidean(&emb[i], &emb[j]);
            (i, j, target, dist)
        })
        .collect();

    let entries = graphs
        .iter()
        .zip(emb)
        .map(|((digest, _), e)| (*digest, e))
        .collect();
    Ok(TrainReport {
        table: EmbeddingTable { d, entries },
        stress,
        loss_curve,
        holdout,
        mean_ged,
    })
}

/// Stress-vs-dimension sweep; returns (d, stress) points for knee-picking.
pub fn stress_sweep(
    graphs: &[(GraphDigest, ComputationalGraph)],
    costs: &GedCostTable,
    dims: &[usize],
    opts: &TrainOptions,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    dims.iter()
        .map(|&d| train_embeddings(graphs, costs, d, opts, seed).map(|r| (d, r.stress)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::block::{BlockCatalog, CatalogConfig};
    use crate::cnn::fixtures;
    use crate::cnn::graph::GraphLimits;
    use crate::cnn::hash::graph_hash;

    fn two_graph_set() -> (Vec<(GraphDigest, ComputationalGraph)>, GedCostTable) {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let limits = GraphLimits::default();
        let g1 = fixtures::toy_lenet(&cat);
        let g2 = fixtures::toy_conv_net(&cat, 32, 2);
        let d1 = graph_hash(&g1, &limits).unwrap();
        let d2 = graph_hash(&g2, &limits).unwrap();
        (vec![(d1, g1), (d2, g2)], GedCostTable::new(cat.len()))
    }

    #[test]
    fn two_points_embed_exactly() {
        let (graphs, costs) = two_graph_set();
        let target = ged(
            &graphs[0].1,
            &graphs[1].1,
            &costs,
            &GedOptions::default(),
        );
        let report = train_embeddings(&graphs, &costs, 4, &TrainOptions::default(), 1).unwrap();
        let e1 = report.table.embed(graphs[0].0).unwrap();
        let e2 = report.table.embed(graphs[1].0).unwrap();
        let dist = crate::cnn::neighbors::euclidean(e1, e2);
        assert!(
            (dist - target).abs() < 1e-3,
            "distance {dist} vs ged {target}"
        );
    }

    #[test]
    fn parameter_errors() {
        let (graphs, costs) = two_graph_set();
        assert!(train_embeddings(&graphs, &costs, 0, &TrainOptions::default(), 1).is_err());
        assert!(
            train_embeddings(&graphs[..1], &costs, 4, &TrainOptions::default(), 1).is_err()
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let (graphs, costs) = two_graph_set();
        let opts = TrainOptions {
            epochs: 50,
            ..TrainOptions::default()
        };
        let r1 = train_embeddings(&graphs, &costs, 4, &opts, 7).unwrap();
        let r2 = train_embeddings(&graphs, &costs, 4, &opts, 7).unwrap();
        assert_eq!(
            r1.table.embed(graphs[0].0).unwrap(),
            r2.table.embed(graphs[0].0).unwrap()
        );
    }

    #[test]
    fn nearest_valid_self_and_tiebreak() {
        let mut entries = BTreeMap::new();
        let da = GraphDigest([1u8; 32]);
        let db = GraphDigest([2u8; 32]);
        entries.insert(db, vec![1.0, 0.0]);
        entries.insert(da, vec![-1.0, 0.0]);
        let table = EmbeddingTable { d: 2, entries };
        // equidistant point: lexicographically smaller digest wins
        let (hit, _) = table.nearest_valid(&[0.0, 0.0]).unwrap();
        assert_eq!(hit, da);
        // a nudge toward db flips it
        let (hit, _) = table.nearest_valid(&[0.01, 0.0]).unwrap();
        assert_eq!(hit, db);
        // self-nearest
        let (hit, d0) = table.nearest_valid(&[1.0, 0.0]).unwrap();
        assert_eq!(hit, db);
        assert_eq!(d0, 0.0);
    }

    #[test]
    fn unknown_digest_errors() {
        let table = EmbeddingTable {
            d: 2,
            entries: BTreeMap::new(),
        };
        assert!(table.embed(GraphDigest([9u8; 32])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let (graphs, costs) = two_graph_set();
        let opts = TrainOptions {
            epochs: 10,
            ..TrainOptions::default()
        };
        let r = train_embeddings(&graphs, &costs, 3, &opts, 5).unwrap();
        let s = r.table.to_json().unwrap();
        let back = EmbeddingTable::from_json(&s).unwrap();
        assert_eq!(back.d, 3);
        assert_eq!(back.entries.len(), 2);
    }
}
