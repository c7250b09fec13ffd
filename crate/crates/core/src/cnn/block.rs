//! Operation blocks and the complexity-sorted block catalog.
//!
//! A block is the atomic unit of a computational graph: a convolution of a
//! given shape, a pooling step, a dense layer, and so on. The catalog
//! enumerates every permissible block for a given space configuration and
//! sorts them by an estimated compute cost; the resulting ordinal position
//! (`complexity_index`) drives the graph-edit-distance node costs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kinds of operation blocks supported by the CNN design space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Conv,
    Dwconv,
    Conv3d,
    TransposedConv,
    Maxpool,
    Avgpool,
    ChannelShuffle,
    Dropout,
    Upsample,
    Flatten,
    GlobalAvgPool,
    Dense,
    Input,
    Output,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BlockKind::Conv => "conv",
            BlockKind::Dwconv => "dwconv",
            BlockKind::Conv3d => "conv3d",
            BlockKind::TransposedConv => "transposed-conv",
            BlockKind::Maxpool => "maxpool",
            BlockKind::Avgpool => "avgpool",
            BlockKind::ChannelShuffle => "channel-shuffle",
            BlockKind::Dropout => "dropout",
            BlockKind::Upsample => "upsample",
            BlockKind::Flatten => "flatten",
            BlockKind::GlobalAvgPool => "global-avg-pool",
            BlockKind::Dense => "dense",
            BlockKind::Input => "input",
            BlockKind::Output => "output",
        };
        f.write_str(s)
    }
}

/// Activation applied after the block (convolutions carry batch-norm +
/// activation as part of the block).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    None,
    Relu,
    Silu,
}

/// Integer attribute keys. Stored sorted so serialization and hashing are
/// canonical.
pub mod param {
    pub const KERNEL: &str = "kernel";
    pub const CHANNELS: &str = "channels";
    pub const GROUPS: &str = "groups";
    pub const PADDING: &str = "padding";
    pub const STRIDE: &str = "stride";
    pub const PROBABILITY_PERCENT: &str = "probability-percent";
    pub const TARGET_SIZE: &str = "target-size";
    pub const HIDDEN_UNITS: &str = "hidden-units";
}

/// One operation block.
///
/// `complexity_index` is the block's ordinal position in the catalog's
/// complexity-sorted list; it is assigned by [`BlockCatalog`] and carried on
/// the block so edit-distance costs do not need a live catalog.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpBlock {
    pub kind: BlockKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, u32>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub complexity_index: usize,
}

impl OpBlock {
    pub fn new(kind: BlockKind) -> Self {
        OpBlock {
            kind,
            params: BTreeMap::new(),
            activation: Activation::None,
            complexity_index: 0,
        }
    }

    pub fn with_param(mut self, key: &str, value: u32) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_activation(mut self, act: Activation) -> Self {
        self.activation = act;
        self
    }

    pub fn param(&self, key: &str) -> Option<u32> {
        self.params.get(key).copied()
    }

    /// Identity of a block for isomorphism purposes: kind, params, and
    /// activation. The complexity index is derived data and excluded.
    pub fn signature(&self) -> BlockSignature {
        BlockSignature {
            kind: self.kind,
            params: self.params.clone(),
            activation: self.activation,
        }
    }

    /// Canonical byte string of the signature, used as the node label for
    /// hashing and isomorphism checks.
    pub fn signature_bytes(&self) -> Vec<u8> {
        let mut s = format!("{}|{:?}", self.kind, self.activation);
        for (k, v) in &self.params {
            s.push_str(&format!("|{}={}", k, v));
        }
        s.into_bytes()
    }

    pub fn is_input(&self) -> bool {
        self.kind == BlockKind::Input
    }

    pub fn is_output(&self) -> bool {
        self.kind == BlockKind::Output
    }
}

/// Hashable identity of a block (kind + params + activation).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockSignature {
    pub kind: BlockKind,
    pub params: BTreeMap<String, u32>,
    pub activation: Activation,
}

/// Permissible parameter sets for the block catalog. Defaults give the
/// desk-scale space; every set is configurable so much larger spaces remain
/// expressible.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogConfig {
    pub conv_kernels: Vec<u32>,
    pub conv_channels: Vec<u32>,
    pub conv_activations: Vec<Activation>,
    pub dwconv_kernels: Vec<u32>,
    pub dwconv_channels: Vec<u32>,
    pub pool_kernels: Vec<u32>,
    pub pool_strides: Vec<u32>,
    pub pool_paddings: Vec<u32>,
    pub shuffle_groups: Vec<u32>,
    pub dropout_percents: Vec<u32>,
    pub upsample_sizes: Vec<u32>,
    pub dense_hidden_units: Vec<u32>,
    /// Output-layer width of the final classifier dense block.
    pub num_classes: u32,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            conv_kernels: vec![1, 3, 5],
            conv_channels: vec![8, 16, 32, 64],
            conv_activations: vec![Activation::Relu, Activation::Silu],
            dwconv_kernels: vec![3, 5],
            dwconv_channels: vec![8, 16, 32, 64],
            pool_kernels: vec![3],
            pool_strides: vec![2],
            pool_paddings: vec![1],
            shuffle_groups: vec![2, 4],
            dropout_percents: vec![10, 50],
            upsample_sizes: vec![64],
            dense_hidden_units: vec![84, 120],
            num_classes: 10,
        }
    }
}

/// The complexity-sorted list of every permissible block.
#[derive(Debug, Clone)]
pub struct BlockCatalog {
    blocks: Vec<OpBlock>,
    index: BTreeMap<BlockSignature, usize>,
}

impl BlockCatalog {
    /// Enumerate all blocks for `cfg`, sort by estimated compute cost
    /// (ties broken by signature so the order is total), and assign
    /// complexity indices.
    pub fn build(cfg: &CatalogConfig) -> Self {
        let mut blocks = Vec::new();
        blocks.push(OpBlock::new(BlockKind::Input));
        blocks.push(OpBlock::new(BlockKind::Output));
        blocks.push(OpBlock::new(BlockKind::Flatten));
        blocks.push(OpBlock::new(BlockKind::GlobalAvgPool));
        for &p in &cfg.dropout_percents {
            blocks.push(OpBlock::new(BlockKind::Dropout).with_param(param::PROBABILITY_PERCENT, p));
        }
        for &g in &cfg.shuffle_groups {
            blocks.push(OpBlock::new(BlockKind::ChannelShuffle).with_param(param::GROUPS, g));
        }
        for &t in &cfg.upsample_sizes {
            blocks.push(OpBlock::new(BlockKind::Upsample).with_param(param::TARGET_SIZE, t));
        }
        for kind in [BlockKind::Maxpool, BlockKind::Avgpool] {
            for &k in &cfg.pool_kernels {
                for &s in &cfg.pool_strides {
                    for &p in &cfg.pool_paddings {
                        blocks.push(
                            OpBlock::new(kind)
                                .with_param(param::KERNEL, k)
                                .with_param(param::STRIDE, s)
                                .with_param(param::PADDING, p),
                        );
                    }
                }
            }
        }
        for &k in &cfg.conv_kernels {
            for &c in &cfg.conv_channels {
                for &a in &cfg.conv_activations {
                    blocks.push(
                        OpBlock::new(BlockKind::Conv)
                            .with_param(param::KERNEL, k)
                            .with_param(param::CHANNELS, c)
                            .with_param(param::STRIDE, 1)
                            .with_param(param::PADDING, k / 2)
                            .with_activation(a),
                    );
                }
            }
        }
        for &k in &cfg.dwconv_kernels {
            for &c in &cfg.dwconv_channels {
                blocks.push(
                    OpBlock::new(BlockKind::Dwconv)
                        .with_param(param::KERNEL, k)
                        .with_param(param::CHANNELS, c)
                        .with_param(param::STRIDE, 1)
                        .with_param(param::PADDING, k / 2)
                        .with_activation(Activation::Relu),
                );
            }
        }
        let mut hidden = cfg.dense_hidden_units.clone();
        hidden.push(cfg.num_classes);
        hidden.sort_unstable();
        hidden.dedup();
        for h in hidden {
            blocks.push(
                OpBlock::new(BlockKind::Dense)
                    .with_param(param::HIDDEN_UNITS, h)
                    .with_activation(Activation::Relu),
            );
        }

        Self::from_blocks(blocks)
    }

    /// Build a catalog from an explicit block list (used by tests that want
    /// tiny spaces). Blocks are sorted by complexity and re-indexed.
    pub fn from_blocks(mut blocks: Vec<OpBlock>) -> Self {
        blocks.sort_by(|a, b| {
            complexity_score(a)
                .partial_cmp(&complexity_score(b))
                .unwrap()
                .then_with(|| a.signature_bytes().cmp(&b.signature_bytes()))
        });
        blocks.dedup_by(|a, b| a.signature() == b.signature());
        let mut index = BTreeMap::new();
        for (i, b) in blocks.iter_mut().enumerate() {
            b.complexity_index = i;
            index.insert(b.signature(), i);
        }
        BlockCatalog { blocks, index }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[OpBlock] {
        &self.blocks
    }

    /// Index of a block in the complexity-sorted order.
    pub fn complexity_index(&self, block: &OpBlock) -> Option<usize> {
        self.index.get(&block.signature()).copied()
    }

    /// Fetch a catalog block by kind and predicate; convenient for fixtures.
    pub fn find<F: Fn(&OpBlock) -> bool>(&self, kind: BlockKind, pred: F) -> Result<OpBlock> {
        self.blocks
            .iter()
            .find(|b| b.kind == kind && pred(b))
            .cloned()
            .ok_or_else(|| Error::Lookup(format!("no catalog block of kind {kind}")))
    }

    pub fn input(&self) -> OpBlock {
        self.blocks.iter().find(|b| b.is_input()).cloned().unwrap()
    }

    pub fn output(&self) -> OpBlock {
        self.blocks.iter().find(|b| b.is_output()).cloned().unwrap()
    }

    /// Blocks eligible inside convolutional modules.
    pub fn conv_eligible(&self) -> Vec<OpBlock> {
        self.blocks
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BlockKind::Conv
                        | BlockKind::Dwconv
                        | BlockKind::Conv3d
                        | BlockKind::TransposedConv
                        | BlockKind::Maxpool
                        | BlockKind::Avgpool
                        | BlockKind::ChannelShuffle
                        | BlockKind::Dropout
                        | BlockKind::Upsample
                )
            })
            .cloned()
            .collect()
    }

    /// Blocks eligible inside the sequential head module.
    pub fn head_eligible(&self) -> Vec<OpBlock> {
        self.blocks
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BlockKind::Flatten
                        | BlockKind::GlobalAvgPool
                        | BlockKind::Dense
                        | BlockKind::Dropout
                )
            })
            .cloned()
            .collect()
    }
}

/// Rough per-block compute cost on a nominal 32x32 feature map. Only the
/// resulting order matters; ties fall back to the signature ordering.
fn complexity_score(b: &OpBlock) -> f64 {
    const SPATIAL: f64 = 32.0 * 32.0;
    let k = b.param(param::KERNEL).unwrap_or(1) as f64;
    let c = b.param(param::CHANNELS).unwrap_or(1) as f64;
    let stride = b.param(param::STRIDE).unwrap_or(1).max(1) as f64;
    match b.kind {
        BlockKind::Input | BlockKind::Output => 0.0,
        BlockKind::Flatten => 1.0,
        BlockKind::Dropout => 2.0,
        BlockKind::ChannelShuffle => 4.0 * b.param(param::GROUPS).unwrap_or(1) as f64,
        BlockKind::GlobalAvgPool => SPATIAL,
        BlockKind::Maxpool | BlockKind::Avgpool => k * k * SPATIAL / (stride * stride),
        BlockKind::Upsample => {
            let t = b.param(param::TARGET_SIZE).unwrap_or(32) as f64;
            t * t
        }
        BlockKind::Dense => 256.0 * b.param(param::HIDDEN_UNITS).unwrap_or(1) as f64,
        BlockKind::Dwconv => k * k * c * SPATIAL / (stride * stride) / c.max(1.0),
        BlockKind::Conv => k * k * c * SPATIAL / (stride * stride),
        BlockKind::TransposedConv => k * k * c * SPATIAL * stride * stride,
        BlockKind::Conv3d => k * k * k * c * SPATIAL,
    }
}
