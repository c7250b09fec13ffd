//! Weighted graph edit distance between computational graphs.
//!
//! Node insertion/deletion cost grows with the block's complexity index;
//! substitution cost grows with the index difference; edge edits cost a
//! small epsilon. Per-module distances use exact search up to a size
//! threshold and beam search above it. Graph-level distance decomposes over
//! the serial module list: modules are compared depth by depth and unmatched
//! tail modules pay their full insertion cost.

use serde::{Deserialize, Serialize};

use crate::cnn::graph::{ComputationalGraph, GraphModule};

pub const DEFAULT_EDGE_COST: f64 = 1e-9;

/// Node/edge edit weights derived from complexity indices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GedCostTable {
    /// Size of the block catalog the indices come from.
    pub total_blocks: usize,
    /// Cost of inserting or deleting one edge.
    pub edge_cost: f64,
}

impl GedCostTable {
    pub fn new(total_blocks: usize) -> Self {
        GedCostTable {
            total_blocks: total_blocks.max(1),
            edge_cost: DEFAULT_EDGE_COST,
        }
    }

    pub fn insertion(&self, complexity_index: usize) -> f64 {
        1.0 + complexity_index as f64 / self.total_blocks as f64
    }

    pub fn deletion(&self, complexity_index: usize) -> f64 {
        self.insertion(complexity_index)
    }

    pub fn substitution(&self, a: usize, b: usize) -> f64 {
        (a as f64 - b as f64).abs() / self.total_blocks as f64
    }
}

/// Search controls for the per-module edit-distance computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GedOptions {
    /// Largest module (vertex count) solved exactly.
    pub exact_threshold: usize,
    /// Beam width used above the exact threshold.
    pub beam_width: usize,
}

impl Default for GedOptions {
    fn default() -> Self {
        GedOptions {
            exact_threshold: 6,
            beam_width: 64,
        }
    }
}

struct ModuleView<'a> {
    idx: Vec<usize>,
    edges: &'a [(usize, usize)],
}

impl<'a> ModuleView<'a> {
    fn new(m: &'a GraphModule) -> Self {
        ModuleView {
            idx: m.blocks.iter().map(|b| b.complexity_index).collect(),
            edges: &m.edges,
        }
    }

    fn n(&self) -> usize {
        self.idx.len()
    }

    fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b))
    }
}

/// Full insertion cost of a module: every node plus every edge.
pub fn module_insert_cost(m: &GraphModule, costs: &GedCostTable) -> f64 {
    m.blocks
        .iter()
        .map(|b| costs.insertion(b.complexity_index))
        .sum::<f64>()
        + m.edges.len() as f64 * costs.edge_cost
}

/// Exact minimum-cost edit distance between two modules via branch-and-bound
/// over injective node mappings.
pub fn module_ged_exact(m1: &GraphModule, m2: &GraphModule, costs: &GedCostTable) -> f64 {
    let a = ModuleView::new(m1);
    let b = ModuleView::new(m2);
    // Upper bound: delete everything, insert everything.
    let mut best = module_insert_cost(m1, costs) + module_insert_cost(m2, costs);
    let mut assignment: Vec<Option<usize>> = vec![None; a.n()];
    let mut used = vec![false; b.n()];
    search(&a, &b, costs, 0, 0.0, &mut assignment, &mut used, &mut best);
    best
}

#[allow(clippy::too_many_arguments)]
fn search(
    a: &ModuleView,
    b: &ModuleView,
    costs: &GedCostTable,
    v: usize,
    partial: f64,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut f64,
) {
    if partial >= *best {
        return;
    }
    if v == a.n() {
        let total = partial + completion_cost(a, b, costs, assignment, used);
        if total < *best {
            *best = total;
        }
        return;
    }
    // Try mapping v to each unused vertex of b.
    for w in 0..b.n() {
        if used[w] {
            continue;
        }
        let delta = costs.substitution(a.idx[v], b.idx[w]) + edge_delta(a, b, assignment, v, w, costs);
        assignment[v] = Some(w);
        used[w] = true;
        search(a, b, costs, v + 1, partial + delta, assignment, used, best);
        assignment[v] = None;
        used[w] = false;
    }
    // Or delete v (its incident edges to already-decided vertices die too).
    let delta = costs.deletion(a.idx[v]) + deletion_edge_delta(a, assignment, v, costs);
    assignment[v] = None;
    search(a, b, costs, v + 1, partial + delta, assignment, used, best);
}

/// Edge cost incurred by deciding `v -> w`, counting only edges whose other
/// endpoint is already decided.
fn edge_delta(
    a: &ModuleView,
    b: &ModuleView,
    assignment: &[Option<usize>],
    v: usize,
    w: usize,
    costs: &GedCostTable,
) -> f64 {
    let mut cost = 0.0;
    for u in 0..v {
        match assignment[u] {
            Some(x) => {
                // both mapped: each direction either matches or costs a
                // delete plus an insert
                for (p, q, r, s) in [(u, v, x, w), (v, u, w, x)] {
                    let e1 = a.has_edge(p, q);
                    let e2 = b.has_edge(r, s);
                    if e1 != e2 {
                        cost += costs.edge_cost;
                    }
                }
            }
            None => {
                // u was deleted: a-side edges to v are deletions
                if a.has_edge(u, v) {
                    cost += costs.edge_cost;
                }
                if a.has_edge(v, u) {
                    cost += costs.edge_cost;
                }
            }
        }
    }
    cost
}

fn deletion_edge_delta(
    a: &ModuleView,
    assignment: &[Option<usize>],
    v: usize,
    costs: &GedCostTable,
) -> f64 {
    // All a-side edges between v and previously decided vertices are deleted
    // (whether those vertices were mapped or deleted).
    let mut cost = 0.0;
    for u in 0..v {
        let _ = assignment; // decided either way
        if a.has_edge(u, v) {
            cost += costs.edge_cost;
        }
        if a.has_edge(v, u) {
            cost += costs.edge_cost;
        }
    }
    cost
}

/// Cost of inserting every unmatched b-vertex and every b-edge not already
/// matched by the assignment.
fn completion_cost(
    a: &ModuleView,
    b: &ModuleView,
    costs: &GedCostTable,
    assignment: &[Option<usize>],
    used: &[bool],
) -> f64 {
    let mut cost = 0.0;
    for w in 0..b.n() {
        if !used[w] {
            cost += costs.insertion(b.idx[w]);
        }
    }
    // b-edges with at least one unmatched endpoint, or whose preimage edge
    // is absent, are insertions not yet charged by edge_delta.
    let mut preimage = vec![None; b.n()];
    for (v, m) in assignment.iter().enumerate() {
        if let Some(w) = m {
            preimage[*w] = Some(v);
        }
    }
    for &(x, y) in b.edges {
        match (preimage[x], preimage[y]) {
            (Some(_), Some(_)) => {} // charged in edge_delta
            _ => cost += costs.edge_cost,
        }
    }
    cost
}

/// Beam-search upper bound on the module edit distance: assignments are
/// built vertex by vertex keeping the `beam_width` cheapest partial states.
pub fn module_ged_beam(
    m1: &GraphModule,
    m2: &GraphModule,
    costs: &GedCostTable,
    beam_width: usize,
) -> f64 {
    #[derive(Clone)]
    struct State {
        assignment: Vec<Option<usize>>,
        used: Vec<bool>,
        cost: f64,
    }
    let a = ModuleView::new(m1);
    let b = ModuleView::new(m2);
    let mut beam = vec![State {
        assignment: Vec::new(),
        used: vec![false; b.n()],
        cost: 0.0,
    }];
    for v in 0..a.n() {
        let mut next = Vec::new();
        for st in &beam {
            for w in 0..b.n() {
                if st.used[w] {
                    continue;
                }
                let delta = costs.substitution(a.idx[v], b.idx[w])
                    + edge_delta(&a, &b, &st.assignment, v, w, costs);
                let mut s = st.clone();
                s.assignment.push(Some(w));
                s.used[w] = true;
                s.cost += delta;
                next.push(s);
            }
            let delta = costs.deletion(a.idx[v]) + deletion_edge_delta(&a, &st.assignment, v, costs);
            let mut s = st.clone();
            s.assignment.push(None);
            s.cost += delta;
            next.push(s);
        }
        next.sort_by(|p, q| p.cost.partial_cmp(&q.cost).unwrap());
        next.truncate(beam_width.max(1));
        beam = next;
    }
    beam.iter()
        .map(|st| st.cost + completion_cost(&a, &b, costs, &st.assignment, &st.used))
        .fold(f64::INFINITY, f64::min)
}

/// Module edit distance: exact below the size threshold, beam search above.
pub fn module_ged(
    m1: &GraphModule,
    m2: &GraphModule,
    costs: &GedCostTable,
    opts: &GedOptions,
) -> f64 {
    if m1 == m2 {
        return 0.0;
    }
    if m1.vertex_count().max(m2.vertex_count()) <= opts.exact_threshold {
        module_ged_exact(m1, m2, costs)
    } else {
        module_ged_beam(m1, m2, costs, opts.beam_width)
    }
}

/// Graph-level edit distance over the serial module lists: sum of per-depth
/// module distances plus the insertion cost of unmatched tail modules.
pub fn ged(
    g1: &ComputationalGraph,
    g2: &ComputationalGraph,
    costs: &GedCostTable,
    opts: &GedOptions,
) -> f64 {
    let common = g1.modules.len().min(g2.modules.len());
    let mut total = 0.0;
    for d in 0..common {
        total += module_ged(&g1.modules[d], &g2.modules[d], costs, opts);
    }
    for m in &g1.modules[common..] {
        total += module_insert_cost(m, costs);
    }
    for m in &g2.modules[common..] {
        total += module_insert_cost(m, costs);
    }
    total
}
