//! Biased overlap and neighbor ranking for weight transfer.

use crate::cnn::graph::ComputationalGraph;
use crate::cnn::hash::GraphDigest;
use crate::embed::EmbeddingTable;
use crate::error::Result;

/// Fraction of leading modules (from the input onward) shared exactly by
/// `q` and `n`, counting stops at the first mismatch regardless of later
/// agreement. Normalized by the module count of `q`.
pub fn biased_overlap_fraction(q: &ComputationalGraph, n: &ComputationalGraph) -> f64 {
    let mut count = 0usize;
    for (a, b) in q.modules.iter().zip(n.modules.iter()) {
        if a == b {
            count += 1;
        } else {
            break;
        }
    }
    count as f64 / q.modules.len() as f64
}

/// Nearest neighbors of `q` in embedding space, nearest first.
///
/// Returns at most `k` entries; `truncated` flags a pool smaller than `k`.
#[derive(Debug, Clone)]
pub struct NeighborList {
    pub entries: Vec<(GraphDigest, f64)>,
    pub truncated: bool,
}

pub fn neighbors(
    q: GraphDigest,
    pool: &[GraphDigest],
    k: usize,
    table: &EmbeddingTable,
) -> Result<NeighborList> {
    let qe = table.embed(q)?;
    let mut entries: Vec<(GraphDigest, f64)> = Vec::with_capacity(pool.len());
    for &d in pool {
        let e = table.embed(d)?;
        entries.push((d, euclidean(&qe, e)));
    }
    entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let truncated = entries.len() < k;
    entries.truncate(k);
    Ok(NeighborList { entries, truncated })
}

/// Rank transfer candidates: higher biased overlap first, ties broken by
/// embedding distance (then digest for full determinism).
pub fn rank_for_weight_transfer(
    q: &ComputationalGraph,
    candidates: &[(GraphDigest, ComputationalGraph, f64)],
) -> Vec<(GraphDigest, f64, f64)> {
    let mut ranked: Vec<(GraphDigest, f64, f64)> = candidates
        .iter()
        .map(|(d, g, dist)| (*d, biased_overlap_fraction(q, g), *dist))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.2.partial_cmp(&b.2).unwrap())
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::block::{BlockCatalog, CatalogConfig};
    use crate::cnn::fixtures;

    #[test]
    fn full_overlap_is_one() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        assert_eq!(biased_overlap_fraction(&g, &g), 1.0);
    }

    #[test]
    fn first_module_mismatch_is_zero() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let q = fixtures::toy_conv_net(&cat, 8, 2);
        let mut n = q.clone();
        n.modules[0] = fixtures::toy_conv_net(&cat, 16, 1).modules[0].clone();
        // later modules still equal, but counting stopped at module 0
        assert_eq!(biased_overlap_fraction(&q, &n), 0.0);
    }

    #[test]
    fn partial_overlap_counts_leading_modules() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let q = fixtures::toy_conv_net(&cat, 8, 3); // 3 conv + head = 4 modules
        let mut n = q.clone();
        n.modules[3] = fixtures::toy_lenet(&cat).modules[2].clone();
        assert_eq!(biased_overlap_fraction(&q, &n), 0.75);
    }

    #[test]
    fn overlap_monotone_under_earlier_perturbation() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let q = fixtures::toy_conv_net(&cat, 8, 3);
        let other = fixtures::toy_conv_net(&cat, 64, 1).modules[0].clone();
        let mut late = q.clone();
        late.modules[2] = other.clone();
        let mut early = q.clone();
        early.modules[0] = other;
        assert!(biased_overlap_fraction(&q, &early) <= biased_overlap_fraction(&q, &late));
    }

    #[test]
    fn tie_broken_by_distance() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let q = fixtures::toy_conv_net(&cat, 8, 2);
        let n1 = {
            let mut n = q.clone();
            n.modules[1] = fixtures::toy_conv_net(&cat, 16, 1).modules[0].clone();
            n
        };
        let n2 = {
            let mut n = q.clone();
            n.modules[1] = fixtures::toy_conv_net(&cat, 32, 1).modules[0].clone();
            n
        };
        // equal overlap (first module matches, second differs): 1/3 each
        let d1 = GraphDigest([1u8; 32]);
        let d2 = GraphDigest([2u8; 32]);
        let ranked = rank_for_weight_transfer(
            &q,
            &[(d2, n2, 2.0), (d1, n1, 1.0)],
        );
        assert_eq!(ranked[0].0, d1);
        assert!((ranked[0].1 - ranked[1].1).abs() < 1e-12);
    }
}
