//! Small ready-made graphs used by the CLI, docs, and tests.

use crate::cnn::block::{BlockCatalog, BlockKind, OpBlock};
use crate::cnn::graph::{ComputationalGraph, GraphModule};

fn conv(cat: &BlockCatalog, kernel: u32, channels: u32) -> OpBlock {
    cat.find(BlockKind::Conv, |b| {
        b.param("kernel") == Some(kernel) && b.param("channels") == Some(channels)
    })
    .expect("catalog lacks requested conv block")
}

fn dense(cat: &BlockCatalog, units: u32) -> OpBlock {
    cat.find(BlockKind::Dense, |b| b.param("hidden-units") == Some(units))
        .expect("catalog lacks requested dense block")
}

/// A LeNet-shaped graph: two conv+pool modules and a dense head.
pub fn toy_lenet(cat: &BlockCatalog) -> ComputationalGraph {
    let pool = cat.find(BlockKind::Maxpool, |_| true).unwrap();
    let m1 = GraphModule::sequential(
        cat.input(),
        vec![conv(cat, 5, 8), pool.clone()],
        cat.output(),
    );
    let m2 = GraphModule::sequential(cat.input(), vec![conv(cat, 5, 16), pool], cat.output());
    let head = GraphModule::sequential(
        cat.input(),
        vec![
            cat.find(BlockKind::Flatten, |_| true).unwrap(),
            dense(cat, 120),
            dense(cat, 84),
            dense(cat, 10),
        ],
        cat.output(),
    );
    ComputationalGraph::new(vec![m1, m2, head], 1)
}

/// `stacks` identical 3x3-conv modules followed by a global-average-pool head.
pub fn toy_conv_net(cat: &BlockCatalog, channels: u32, stacks: usize) -> ComputationalGraph {
    let m = GraphModule::sequential(cat.input(), vec![conv(cat, 3, channels)], cat.output());
    let head = GraphModule::sequential(
        cat.input(),
        vec![
            cat.find(BlockKind::GlobalAvgPool, |_| true).unwrap(),
            dense(cat, 10),
        ],
        cat.output(),
    );
    let mut modules = vec![m; stacks];
    modules.push(head);
    ComputationalGraph::new(modules, 1)
}
