//! Computational graphs: modules of interconnected blocks, stacked serially.

use serde::{Deserialize, Serialize};

use crate::cnn::block::OpBlock;
use crate::error::{Error, Result};

/// Structural limits a graph must respect. Defaults follow the desk-scale
/// space; the caps are configuration, not constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphLimits {
    /// Max vertices in a convolutional module, input/output included.
    pub conv_module_vertices: usize,
    /// Max edges in a convolutional module.
    pub conv_module_edges: usize,
    /// Max vertices in the head module (sequential only).
    pub head_vertices: usize,
    /// Max convolutional modules in a graph (head excluded).
    pub depth_cap: usize,
}

impl Default for GraphLimits {
    fn default() -> Self {
        GraphLimits {
            conv_module_vertices: 5,
            conv_module_edges: 8,
            head_vertices: 8,
            depth_cap: 12,
        }
    }
}

/// A module: a small DAG of blocks with exactly one input and one output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphModule {
    pub blocks: Vec<OpBlock>,
    pub edges: Vec<(usize, usize)>,
}

/// Role a module plays inside a graph; limits differ per role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleRole {
    Conv,
    Head,
}

impl GraphModule {
    pub fn new(blocks: Vec<OpBlock>, edges: Vec<(usize, usize)>) -> Self {
        GraphModule { blocks, edges }
    }

    /// A purely sequential module: input, the given interior blocks, output,
    /// chained in order.
    pub fn sequential(input: OpBlock, interior: Vec<OpBlock>, output: OpBlock) -> Self {
        let mut blocks = vec![input];
        blocks.extend(interior);
        blocks.push(output);
        let edges = (0..blocks.len() - 1).map(|i| (i, i + 1)).collect();
        GraphModule { blocks, edges }
    }

    pub fn vertex_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn validate(&self, role: ModuleRole, limits: &GraphLimits) -> Result<()> {
        let n = self.blocks.len();
        if n < 2 {
            return Err(Error::Validation(
                "module needs at least input and output blocks".into(),
            ));
        }
        let inputs = self.blocks.iter().filter(|b| b.is_input()).count();
        let outputs = self.blocks.iter().filter(|b| b.is_output()).count();
        if inputs != 1 || outputs != 1 {
            return Err(Error::Validation(format!(
                "module must have exactly one input and one output block (got {inputs}/{outputs})"
            )));
        }
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a},{b}) references a missing vertex"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-loop on vertex {a}")));
            }
        }
        if self.has_cycle() {
            return Err(Error::Validation("module graph contains a cycle".into()));
        }
        self.check_connectivity()?;
        match role {
            ModuleRole::Conv => {
                if n > limits.conv_module_vertices {
                    return Err(Error::Validation(format!(
                        "conv module has {n} vertices, cap is {}",
                        limits.conv_module_vertices
                    )));
                }
                if self.edges.len() > limits.conv_module_edges {
                    return Err(Error::Validation(format!(
                        "conv module has {} edges, cap is {}",
                        self.edges.len(),
                        limits.conv_module_edges
                    )));
                }
            }
            ModuleRole::Head => {
                if n > limits.head_vertices {
                    return Err(Error::Validation(format!(
                        "head module has {n} vertices, cap is {}",
                        limits.head_vertices
                    )));
                }
                if !self.is_sequential() {
                    return Err(Error::Validation(
                        "head module edges must be purely sequential".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn has_cycle(&self) -> bool {
        // Kahn's algorithm; leftover vertices mean a cycle.
        let n = self.blocks.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &(a, b) in &self.edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        queue.push(b);
                    }
                }
            }
        }
        seen != n
    }

    /// Every vertex must lie on some input-to-output path.
    fn check_connectivity(&self) -> Result<()> {
        let n = self.blocks.len();
        let input = self.blocks.iter().position(|b| b.is_input()).unwrap();
        let output = self.blocks.iter().position(|b| b.is_output()).unwrap();
        let mut fwd = vec![false; n];
        let mut stack = vec![input];
        while let Some(v) = stack.pop() {
            if fwd[v] {
                continue;
            }
            fwd[v] = true;
            for &(a, b) in &self.edges {
                if a == v && !fwd[b] {
                    stack.push(b);
                }
            }
        }
        let mut bwd = vec![false; n];
        stack = vec![output];
        while let Some(v) = stack.pop() {
            if bwd[v] {
                continue;
            }
            bwd[v] = true;
            for &(a, b) in &self.edges {
                if b == v && !bwd[a] {
                    stack.push(a);
                }
            }
        }
        for v in 0..n {
            if !fwd[v] || !bwd[v] {
                return Err(Error::Validation(format!(
                    "vertex {v} is not on an input-to-output path"
                )));
            }
        }
        Ok(())
    }

    fn is_sequential(&self) -> bool {
        let n = self.blocks.len();
        if self.edges.len() != n - 1 {
            return false;
        }
        let mut expected: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let mut got = self.edges.clone();
        expected.sort_unstable();
        got.sort_unstable();
        expected == got
    }

    /// Topological order of vertex indices (stable: ready vertices are taken
    /// in index order).
    pub fn topo_order(&self) -> Vec<usize> {
        let n = self.blocks.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        ready.sort_unstable();
        while !ready.is_empty() {
            let v = ready.remove(0);
            order.push(v);
            for &(a, b) in &self.edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        let pos = ready.binary_search(&b).unwrap_or_else(|p| p);
                        ready.insert(pos, b);
                    }
                }
            }
        }
        order
    }
}

/// A CNN as an ordered, serially connected list of modules. The final module
/// is the head; the preceding modules are grouped into stacks of
/// `stack_size` identical modules.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComputationalGraph {
    pub modules: Vec<GraphModule>,
    pub stack_size: usize,
}

impl ComputationalGraph {
    pub fn new(modules: Vec<GraphModule>, stack_size: usize) -> Self {
        ComputationalGraph {
            modules,
            stack_size,
        }
    }

    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    /// Convolutional modules (everything except the head).
    pub fn conv_modules(&self) -> &[GraphModule] {
        &self.modules[..self.modules.len().saturating_sub(1)]
    }

    pub fn head(&self) -> Option<&GraphModule> {
        self.modules.last()
    }

    pub fn validate(&self, limits: &GraphLimits) -> Result<()> {
        if self.modules.is_empty() {
            return Err(Error::Validation("graph has no modules".into()));
        }
        if self.stack_size == 0 {
            return Err(Error::Validation("stack_size must be positive".into()));
        }
        let conv_count = self.modules.len() - 1;
        if conv_count > limits.depth_cap {
            return Err(Error::Validation(format!(
                "graph has {conv_count} conv modules, depth cap is {}",
                limits.depth_cap
            )));
        }
        if conv_count % self.stack_size != 0 {
            return Err(Error::Validation(format!(
                "{conv_count} conv modules do not divide into stacks of {}",
                self.stack_size
            )));
        }
        for (i, m) in self.conv_modules().iter().enumerate() {
            m.validate(ModuleRole::Conv, limits).map_err(|e| {
                Error::Validation(format!("conv module {i}: {e}"))
            })?;
        }
        self.modules
            .last()
            .unwrap()
            .validate(ModuleRole::Head, limits)
            .map_err(|e| Error::Validation(format!("head module: {e}")))?;
        // Modules within one stack must be identical.
        for stack in self.conv_modules().chunks(self.stack_size) {
            if stack.iter().any(|m| m != &stack[0]) {
                return Err(Error::Validation(
                    "modules within one stack must be identical".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of stacks (head excluded).
    pub fn stack_count(&self) -> usize {
        (self.modules.len() - 1) / self.stack_size
    }

    /// Representative module of each stack, in depth order.
    pub fn stack_modules(&self) -> Vec<&GraphModule> {
        self.conv_modules()
            .chunks(self.stack_size)
            .map(|c| &c[0])
            .collect()
    }

    /// Flatten the serial module list into one labeled DAG: module i's
    /// output block gains an edge to module i+1's input block.
    pub fn flatten(&self) -> FlatGraph {
        let mut labels: Vec<Vec<u8>> = Vec::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut offset = 0;
        let mut prev_output: Option<usize> = None;
        for m in &self.modules {
            for b in &m.blocks {
                labels.push(b.signature_bytes());
            }
            for &(a, b) in &m.edges {
                edges.push((offset + a, offset + b));
            }
            let input = offset + m.blocks.iter().position(|b| b.is_input()).unwrap();
            let output = offset + m.blocks.iter().position(|b| b.is_output()).unwrap();
            if let Some(p) = prev_output {
                edges.push((p, input));
            }
            prev_output = Some(output);
            offset += m.blocks.len();
        }
        FlatGraph { labels, edges }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// A flattened, label-annotated DAG used by hashing and isomorphism checks.
#[derive(Debug, Clone)]
pub struct FlatGraph {
    pub labels: Vec<Vec<u8>>,
    pub edges: Vec<(usize, usize)>,
}

impl FlatGraph {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn in_neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, b)| b == v)
            .map(|&(a, _)| a)
            .collect()
    }

    pub fn out_neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(a, _)| a == v)
            .map(|&(_, b)| b)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::block::{BlockCatalog, BlockKind, CatalogConfig, OpBlock};

    fn catalog() -> BlockCatalog {
        BlockCatalog::build(&CatalogConfig::default())
    }

    fn conv_module(cat: &BlockCatalog, channels: u32) -> GraphModule {
        let conv = cat
            .find(BlockKind::Conv, |b| {
                b.param("channels") == Some(channels) && b.param("kernel") == Some(3)
            })
            .unwrap();
        GraphModule::sequential(cat.input(), vec![conv], cat.output())
    }

    fn head_module(cat: &BlockCatalog) -> GraphModule {
        let flat = cat.find(BlockKind::Flatten, |_| true).unwrap();
        let dense = cat
            .find(BlockKind::Dense, |b| b.param("hidden-units") == Some(10))
            .unwrap();
        GraphModule::sequential(cat.input(), vec![flat, dense], cat.output())
    }

    #[test]
    fn valid_graph_passes() {
        let cat = catalog();
        let g = ComputationalGraph::new(
            vec![conv_module(&cat, 8), conv_module(&cat, 8), head_module(&cat)],
            2,
        );
        g.validate(&GraphLimits::default()).unwrap();
        assert_eq!(g.stack_count(), 1);
    }

    #[test]
    fn mixed_stack_rejected() {
        let cat = catalog();
        let g = ComputationalGraph::new(
            vec![conv_module(&cat, 8), conv_module(&cat, 16), head_module(&cat)],
            2,
        );
        assert!(g.validate(&GraphLimits::default()).is_err());
    }

    #[test]
    fn cycle_rejected() {
        let cat = catalog();
        let mut m = conv_module(&cat, 8);
        m.edges.push((2, 1));
        assert!(m.validate(ModuleRole::Conv, &GraphLimits::default()).is_err());
    }

    #[test]
    fn nonsequential_head_rejected() {
        let cat = catalog();
        let mut h = head_module(&cat);
        h.edges.push((0, 2));
        assert!(h.validate(ModuleRole::Head, &GraphLimits::default()).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cat = catalog();
        let g = ComputationalGraph::new(vec![conv_module(&cat, 32), head_module(&cat)], 1);
        let s = g.to_json().unwrap();
        let back = ComputationalGraph::from_json(&s).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn flatten_counts() {
        let cat = catalog();
        let g = ComputationalGraph::new(vec![conv_module(&cat, 8), head_module(&cat)], 1);
        let f = g.flatten();
        assert_eq!(f.vertex_count(), 3 + 4);
        // intra-module edges plus one serial connection
        assert_eq!(f.edges.len(), 2 + 3 + 1);
    }
}
