//! Streaming enumeration of the CNN design space.
//!
//! Modules are DAGs over topologically ordered vertices (input first, output
//! last, edges only forward), so every isomorphism class appears; duplicates
//! from relabeling collapse by digest when callers dedupe. Graphs are built
//! as stacks of identical modules plus a sequential head.

use serde::{Deserialize, Serialize};

use crate::cnn::block::{BlockCatalog, CatalogConfig, OpBlock};
use crate::cnn::graph::{ComputationalGraph, GraphLimits, GraphModule, ModuleRole};
use crate::cnn::hash::{graph_hash, GraphDigest};
use crate::error::Result;
use std::collections::BTreeSet;

/// Full configuration of the CNN design space.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CnnSpaceConfig {
    pub catalog: CatalogConfig,
    pub limits: GraphLimits,
    /// Stack sizes per hierarchy level, coarse to fine.
    pub stack_schedule: Vec<usize>,
}

impl CnnSpaceConfig {
    pub fn desk_default() -> Self {
        CnnSpaceConfig {
            catalog: CatalogConfig::default(),
            limits: GraphLimits::default(),
            stack_schedule: vec![4, 2, 1],
        }
    }

    pub fn stack_size_at(&self, level: usize) -> usize {
        let sched = if self.stack_schedule.is_empty() {
            &[4, 2, 1][..]
        } else {
            &self.stack_schedule[..]
        };
        *sched.get(level).unwrap_or(sched.last().unwrap())
    }
}

/// The instantiated space: catalog plus limits.
#[derive(Debug, Clone)]
pub struct CnnSpace {
    pub config: CnnSpaceConfig,
    pub catalog: BlockCatalog,
}

impl CnnSpace {
    pub fn new(config: CnnSpaceConfig) -> Self {
        let catalog = BlockCatalog::build(&config.catalog);
        CnnSpace { config, catalog }
    }

    /// All valid convolutional modules with at most `max_vertices` vertices,
    /// in deterministic order, raw (relabel duplicates included).
    pub fn enumerate_modules_raw(&self, max_vertices: usize) -> Vec<GraphModule> {
        let cap = max_vertices.min(self.config.limits.conv_module_vertices);
        let interior = self.catalog.conv_eligible();
        let mut out = Vec::new();
        for v in 2..=cap {
            let k = v - 2; // interior vertex count
            if k > 0 && interior.is_empty() {
                break;
            }
            let mut assign = vec![0usize; k];
            loop {
                let blocks: Vec<OpBlock> = std::iter::once(self.catalog.input())
                    .chain(assign.iter().map(|&i| interior[i].clone()))
                    .chain(std::iter::once(self.catalog.output()))
                    .collect();
                self.push_edge_variants(&blocks, &mut out);
                // mixed-radix increment over interior block choices
                let mut i = 0;
                loop {
                    if k == 0 || i == k {
                        break;
                    }
                    assign[i] += 1;
                    if assign[i] < interior.len() {
                        break;
                    }
                    assign[i] = 0;
                    i += 1;
                }
                if k == 0 || i == k {
                    break;
                }
            }
        }
        out
    }

    fn push_edge_variants(&self, blocks: &[OpBlock], out: &mut Vec<GraphModule>) {
        let n = blocks.len();
        let mut candidate_edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                candidate_edges.push((a, b));
            }
        }
        let subsets = 1u32 << candidate_edges.len();
        for mask in 0..subsets {
            let edges: Vec<(usize, usize)> = candidate_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            if edges.len() > self.config.limits.conv_module_edges {
                continue;
            }
            let m = GraphModule::new(blocks.to_vec(), edges);
            if m.validate(ModuleRole::Conv, &self.config.limits).is_ok() {
                out.push(m);
            }
        }
    }

    /// Deduplicated modules (one representative per isomorphism class,
    /// chosen by smallest digest order of first appearance).
    pub fn enumerate_modules(&self, max_vertices: usize) -> Vec<GraphModule> {
        let raw = self.enumerate_modules_raw(max_vertices);
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in raw {
            let probe = ComputationalGraph::new(
                vec![m.clone(), self.minimal_head()],
                1,
            );
            let digest = graph_hash(&probe, &self.config.limits).expect("enumerated module valid");
            if seen.insert(digest) {
                out.push(m);
            }
        }
        out
    }

    /// Sequential head modules up to the head vertex cap, raw enumeration
    /// capped at `limit` for tractability.
    pub fn enumerate_heads(&self, max_vertices: usize, limit: usize) -> Vec<GraphModule> {
        let cap = max_vertices.min(self.config.limits.head_vertices);
        let choices = self.catalog.head_eligible();
        let mut out = Vec::new();
        for v in 2..=cap {
            let k = v - 2;
            if k > 0 && choices.is_empty() {
                break;
            }
            let mut assign = vec![0usize; k];
            loop {
                if out.len() >= limit {
                    return out;
                }
                let interior: Vec<OpBlock> = assign.iter().map(|&i| choices[i].clone()).collect();
                let m = GraphModule::sequential(self.catalog.input(), interior, self.catalog.output());
                if m.validate(ModuleRole::Head, &self.config.limits).is_ok() {
                    out.push(m);
                }
                let mut i = 0;
                loop {
                    if k == 0 || i == k {
                        break;
                    }
                    assign[i] += 1;
                    if assign[i] < choices.len() {
                        break;
                    }
                    assign[i] = 0;
                    i += 1;
                }
                if k == 0 || i == k {
                    break;
                }
            }
        }
        out
    }

    fn minimal_head(&self) -> GraphModule {
        GraphModule::sequential(self.catalog.input(), Vec::new(), self.catalog.output())
    }

    /// Enumerate whole graphs at a hierarchy level (deduplicated by digest),
    /// stopping at `limit`. Order: stack count ascending, then module
    /// choices in mixed-radix order, then head choice.
    pub fn enumerate_graphs(&self, level: usize, limit: usize) -> Result<Vec<(GraphDigest, ComputationalGraph)>> {
        let s = self.config.stack_size_at(level);
        let modules = self.enumerate_modules(self.config.limits.conv_module_vertices);
        let heads = self.enumerate_heads(self.config.limits.head_vertices, 64);
        if modules.is_empty() || heads.is_empty() {
            return Ok(Vec::new());
        }
        let max_stacks = self.config.limits.depth_cap / s;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for stacks in 1..=max_stacks.max(1) {
            let mut digits = vec![0usize; stacks];
            'combos: loop {
                for head in &heads {
                    if out.len() >= limit {
                        return Ok(out);
                    }
                    let mut mods = Vec::with_capacity(stacks * s + 1);
                    for &d in &digits {
                        for _ in 0..s {
                            mods.push(modules[d].clone());
                        }
                    }
                    mods.push(head.clone());
                    let g = ComputationalGraph::new(mods, s);
                    let digest = graph_hash(&g, &self.config.limits)?;
                    if seen.insert(digest) {
                        out.push((digest, g));
                    }
                }
                let mut i = 0;
                loop {
                    if i == stacks {
                        break 'combos;
                    }
                    digits[i] += 1;
                    if digits[i] < modules.len() {
                        break;
                    }
                    digits[i] = 0;
                    i += 1;
                }
            }
        }
        Ok(out)
    }
}
