//! Mapping computational graphs onto hardware layers.
//!
//! Blocks are walked in topological order with lightweight shape
//! propagation (channels and spatial extent only; no tensor execution).
//! Convolutions and dense layers become MAC layers described by the seven
//! unrollable dimensions; pooling, shuffle, and upsampling become
//! element-wise layers; dropout and flatten are free at inference.

use serde::{Deserialize, Serialize};

use crate::cnn::block::{BlockKind, OpBlock};
use crate::cnn::graph::ComputationalGraph;
use crate::error::{Error, Result};

/// Simulation-time knobs that are properties of the workload, not of the
/// accelerator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub input_channels: u64,
    pub input_hw: u64,
    /// Default activation/weight sparsity applied to every MAC layer.
    pub sparsity_act: f64,
    pub sparsity_wgt: f64,
    /// Toggle for the sparsity-aware binary-mask scheme.
    pub sparsity_enabled: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            input_channels: 3,
            input_hw: 32,
            sparsity_act: 0.4,
            sparsity_wgt: 0.5,
            sparsity_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Convolution or dense: runs on the MAC array.
    Mac,
    /// Streams through PE ALUs (pooling, shuffle, upsampling, global pool).
    Elementwise,
}

/// One hardware-visible layer. Batch is a property of the accelerator and
/// is applied by the engine; all counts here are per input sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerShape {
    pub kind: LayerKind,
    pub label: String,
    /// Input feature channels (per group for grouped convolutions).
    pub n_if: u64,
    /// Input spatial extent.
    pub n_ix: u64,
    pub n_iy: u64,
    /// Output channels.
    pub n_of: u64,
    /// Kernel extent.
    pub n_kx: u64,
    pub n_ky: u64,
    /// Output spatial extent (output-stationary tiling unrolls over these).
    pub out_x: u64,
    pub out_y: u64,
    pub stride: u32,
    pub padding: u32,
    pub sparsity_act: f64,
    pub sparsity_wgt: f64,
    /// Elementwise op count per sample (zero for MAC layers).
    pub elems: u64,
}

impl LayerShape {
    /// Analytic multiply-accumulate count per input sample, dense.
    pub fn macs(&self) -> u64 {
        if self.kind != LayerKind::Mac {
            return 0;
        }
        self.n_of * self.out_x * self.out_y * self.n_if * self.n_kx * self.n_ky
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// channels, height, width
    Spatial(u64, u64, u64),
    /// flattened feature vector
    Vector(u64),
}

impl Shape {
    fn features(self) -> u64 {
        match self {
            Shape::Spatial(c, h, w) => c * h * w,
            Shape::Vector(f) => f,
        }
    }
}

fn out_extent(input: u64, kernel: u64, stride: u64, padding: u64) -> u64 {
    let padded = input + 2 * padding;
    if padded < kernel {
        return 1;
    }
    ((padded - kernel) / stride + 1).max(1)
}

/// Extract the hardware layer list of a graph.
pub fn extract_layers(g: &ComputationalGraph, opts: &SimOptions) -> Result<Vec<LayerShape>> {
    let mut layers = Vec::new();
    let mut state = Shape::Spatial(opts.input_channels, opts.input_hw, opts.input_hw);
    for module in &g.modules {
        let order = module.topo_order();
        // per-vertex output shapes within this module
        let mut shapes: Vec<Option<Shape>> = vec![None; module.blocks.len()];
        for v in order {
            let block = &module.blocks[v];
            let inputs: Vec<Shape> = module
                .edges
                .iter()
                .filter(|&&(_, b)| b == v)
                .map(|&(a, _)| shapes[a].expect("topological order"))
                .collect();
            let in_shape = if block.is_input() {
                state
            } else if inputs.len() == 1 {
                inputs[0]
            } else if inputs.is_empty() {
                state
            } else {
                merge_shapes(&inputs)
            };
            let (layer, out_shape) = map_block(block, in_shape, opts)?;
            if let Some(l) = layer {
                layers.push(l);
            }
            shapes[v] = Some(out_shape);
        }
        let out_vertex = module.blocks.iter().position(|b| b.is_output()).unwrap();
        state = shapes[out_vertex].expect("output shape resolved");
    }
    Ok(layers)
}

/// Joins concatenate along channels; spatial extents align to the largest.
fn merge_shapes(inputs: &[Shape]) -> Shape {
    let mut all_spatial = true;
    for s in inputs {
        if matches!(s, Shape::Vector(_)) {
            all_spatial = false;
        }
    }
    if all_spatial {
        let mut c = 0;
        let mut h = 0;
        let mut w = 0;
        for s in inputs {
            if let Shape::Spatial(ci, hi, wi) = s {
                c += ci;
                h = h.max(*hi);
                w = w.max(*wi);
            }
        }
        Shape::Spatial(c, h, w)
    } else {
        Shape::Vector(inputs.iter().map(|s| s.features()).sum())
    }
}

fn map_block(
    block: &OpBlock,
    input: Shape,
    opts: &SimOptions,
) -> Result<(Option<LayerShape>, Shape)> {
    let label = String::from_utf8_lossy(&block.signature_bytes()).into_owned();
    match block.kind {
        BlockKind::Input | BlockKind::Output | BlockKind::Dropout => Ok((None, input)),
        BlockKind::Flatten => Ok((None, Shape::Vector(input.features()))),
        BlockKind::Conv3d | BlockKind::TransposedConv => Err(Error::Unmappable(format!(
            "no hardware mapping for block '{label}'"
        ))),
        BlockKind::Conv | BlockKind::Dwconv => {
            let (c, h, w) = match input {
                Shape::Spatial(c, h, w) => (c, h, w),
                Shape::Vector(_) => {
                    return Err(Error::Unmappable(format!(
                        "convolution '{label}' after flatten"
                    )))
                }
            };
            let k = block.param("kernel").unwrap_or(1) as u64;
            let stride = block.param("stride").unwrap_or(1).max(1);
            let padding = block.param("padding").unwrap_or(0);
            let n_of = block.param("channels").unwrap_or(c as u32) as u64;
            let ox = out_extent(h, k, stride as u64, padding as u64);
            let oy = out_extent(w, k, stride as u64, padding as u64);
            // depth-wise: one input channel per output channel
            let n_if = if block.kind == BlockKind::Dwconv { 1 } else { c };
            let layer = LayerShape {
                kind: LayerKind::Mac,
                label,
                n_if,
                n_ix: h,
                n_iy: w,
                n_of,
                n_kx: k,
                n_ky: k,
                out_x: ox,
                out_y: oy,
                stride,
                padding,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: opts.sparsity_wgt,
                elems: 0,
            };
            Ok((Some(layer), Shape::Spatial(n_of, ox, oy)))
        }
        BlockKind::Dense => {
            let f = input.features();
            let units = block.param("hidden-units").unwrap_or(1) as u64;
            let layer = LayerShape {
                kind: LayerKind::Mac,
                label,
                n_if: f,
                n_ix: 1,
                n_iy: 1,
                n_of: units,
                n_kx: 1,
                n_ky: 1,
                out_x: 1,
                out_y: 1,
                stride: 1,
                padding: 0,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: opts.sparsity_wgt,
                elems: 0,
            };
            Ok((Some(layer), Shape::Vector(units)))
        }
        BlockKind::Maxpool | BlockKind::Avgpool => {
            let (c, h, w) = match input {
                Shape::Spatial(c, h, w) => (c, h, w),
                Shape::Vector(_) => {
                    return Err(Error::Unmappable(format!("pooling '{label}' after flatten")))
                }
            };
            let k = block.param("kernel").unwrap_or(2) as u64;
            let stride = block.param("stride").unwrap_or(2).max(1);
            let padding = block.param("padding").unwrap_or(0);
            let ox = out_extent(h, k, stride as u64, padding as u64);
            let oy = out_extent(w, k, stride as u64, padding as u64);
            let layer = LayerShape {
                kind: LayerKind::Elementwise,
                label,
                n_if: c,
                n_ix: h,
                n_iy: w,
                n_of: c,
                n_kx: k,
                n_ky: k,
                out_x: ox,
                out_y: oy,
                stride,
                padding,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: 0.0,
                elems: c * ox * oy * k * k,
            };
            Ok((Some(layer), Shape::Spatial(c, ox, oy)))
        }
        BlockKind::GlobalAvgPool => {
            let (c, h, w) = match input {
                Shape::Spatial(c, h, w) => (c, h, w),
                Shape::Vector(f) => (f, 1, 1),
            };
            let layer = LayerShape {
                kind: LayerKind::Elementwise,
                label,
                n_if: c,
                n_ix: h,
                n_iy: w,
                n_of: c,
                n_kx: 1,
                n_ky: 1,
                out_x: 1,
                out_y: 1,
                stride: 1,
                padding: 0,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: 0.0,
                elems: c * h * w,
            };
            Ok((Some(layer), Shape::Vector(c)))
        }
        BlockKind::ChannelShuffle => {
            let (c, h, w) = match input {
                Shape::Spatial(c, h, w) => (c, h, w),
                Shape::Vector(_) => {
                    return Err(Error::Unmappable(format!("shuffle '{label}' after flatten")))
                }
            };
            let layer = LayerShape {
                kind: LayerKind::Elementwise,
                label,
                n_if: c,
                n_ix: h,
                n_iy: w,
                n_of: c,
                n_kx: 1,
                n_ky: 1,
                out_x: h,
                out_y: w,
                stride: 1,
                padding: 0,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: 0.0,
                elems: c * h * w,
            };
            Ok((Some(layer), Shape::Spatial(c, h, w)))
        }
        BlockKind::Upsample => {
            let (c, h, w) = match input {
                Shape::Spatial(c, h, w) => (c, h, w),
                Shape::Vector(_) => {
                    return Err(Error::Unmappable(format!("upsample '{label}' after flatten")))
                }
            };
            let t = block.param("target-size").unwrap_or(h as u32) as u64;
            let layer = LayerShape {
                kind: LayerKind::Elementwise,
                label,
                n_if: c,
                n_ix: h,
                n_iy: w,
                n_of: c,
                n_kx: 1,
                n_ky: 1,
                out_x: t,
                out_y: t,
                stride: 1,
                padding: 0,
                sparsity_act: opts.sparsity_act,
                sparsity_wgt: 0.0,
                elems: c * t * t,
            };
            Ok((Some(layer), Shape::Spatial(c, t, t)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::block::{BlockCatalog, CatalogConfig, OpBlock};
    use crate::cnn::fixtures;
    use crate::cnn::graph::{ComputationalGraph, GraphModule};

    #[test]
    fn lenet_layer_list() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        let layers = extract_layers(&g, &SimOptions::default()).unwrap();
        // conv, pool, conv, pool, dense x3
        assert_eq!(layers.len(), 7);
        assert_eq!(layers[0].kind, LayerKind::Mac);
        assert_eq!(layers[0].n_if, 3);
        assert_eq!(layers[0].n_of, 8);
        assert_eq!(layers[0].out_x, 32); // 5x5 stride 1 pad 2 keeps extent
        assert_eq!(layers[1].kind, LayerKind::Elementwise);
        assert_eq!(layers[2].n_if, 8);
        // flatten feeds first dense: 16 channels at 8x8
        assert_eq!(layers[4].n_if, 16 * 8 * 8);
        assert_eq!(layers[6].n_of, 10);
    }

    #[test]
    fn unsupported_block_named_in_error() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let mut g = fixtures::toy_conv_net(&cat, 8, 1);
        let bad = OpBlock::new(crate::cnn::block::BlockKind::Conv3d).with_param("kernel", 3);
        g.modules[0] = GraphModule::sequential(cat.input(), vec![bad], cat.output());
        let err = extract_layers(&g, &SimOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("conv3d"), "error should name the block: {msg}");
    }

    #[test]
    fn branch_join_concatenates_channels() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let conv8 = cat
            .find(crate::cnn::block::BlockKind::Conv, |b| {
                b.param("channels") == Some(8) && b.param("kernel") == Some(3)
            })
            .unwrap();
        let conv16 = cat
            .find(crate::cnn::block::BlockKind::Conv, |b| {
                b.param("channels") == Some(16) && b.param("kernel") == Some(3)
            })
            .unwrap();
        let m = GraphModule::new(
            vec![cat.input(), conv8, conv16, cat.output()],
            vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        );
        let head = fixtures::toy_lenet(&cat).modules[2].clone();
        let g = ComputationalGraph::new(vec![m, head], 1);
        let layers = extract_layers(&g, &SimOptions::default()).unwrap();
        // first dense sees 8+16 channels at full extent
        let dense = layers.iter().find(|l| l.label.contains("dense")).unwrap();
        assert_eq!(dense.n_if, 24 * 32 * 32);
    }

    #[test]
    fn dwconv_uses_single_channel_group() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let dw = cat
            .find(crate::cnn::block::BlockKind::Dwconv, |b| {
                b.param("channels") == Some(16)
            })
            .unwrap();
        let m = GraphModule::sequential(cat.input(), vec![dw], cat.output());
        let head = fixtures::toy_lenet(&cat).modules[2].clone();
        let g = ComputationalGraph::new(vec![m, head], 1);
        let layers = extract_layers(&g, &SimOptions::default()).unwrap();
        assert_eq!(layers[0].n_if, 1);
        assert_eq!(layers[0].n_of, 16);
    }
}
