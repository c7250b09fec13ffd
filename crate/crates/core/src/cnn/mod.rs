//! The CNN design space: operation blocks, computational graphs, hashing,
//! edit distance, crossover, and neighbor ranking.

pub mod block;
pub mod crossover;
pub mod enumerate;
pub mod fixtures;
pub mod ged;
pub mod graph;
pub mod hash;
pub mod neighbors;

pub use block::{Activation, BlockCatalog, BlockKind, CatalogConfig, OpBlock};
pub use crossover::{crossover, CrossoverSpace};
pub use enumerate::{CnnSpace, CnnSpaceConfig};
pub use ged::{ged, module_ged, GedCostTable, GedOptions};
pub use graph::{ComputationalGraph, FlatGraph, GraphLimits, GraphModule, ModuleRole};
pub use hash::{graph_hash, hash_flat, GraphDigest};
pub use neighbors::{biased_overlap_fraction, neighbors, rank_for_weight_transfer, NeighborList};
