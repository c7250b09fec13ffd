//! Analytic per-tile cost model under the output-stationary dataflow.
//!
//! Per MAC layer, the seven loop dimensions are tiled by the config's
//! parallelism parameters; the dense tile product gives MAC cycles, scaled
//! down by the effectual-computation fraction when the binary-mask sparsity
//! scheme is on. Memory traffic follows from compressed data volumes and
//! buffer refetch factors; latency, dynamic energy, leakage energy, and area
//! come from the constants file.

use serde::{Deserialize, Serialize};

use crate::accel::space::AcceleratorConfig;
use crate::cnn::graph::ComputationalGraph;
use crate::error::{Error, Result};
use crate::sim::constants::CostConstants;
use crate::sim::layers::{extract_layers, LayerKind, LayerShape, SimOptions};

/// Hardware-side performance of one CNN/accelerator pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwPerf {
    pub latency_ms: f64,
    pub area_mm2: f64,
    pub e_dyn_mj: f64,
    pub e_leak_mj: f64,
    /// Total MAC operations executed after sparsity skipping.
    pub macs_executed: f64,
    /// MAC-array cycles (tile passes) summed over layers, sparsity-scaled.
    pub mac_cycles: f64,
    /// All compute cycles including pipeline fill and element-wise work.
    pub compute_cycles: f64,
    /// Main-memory traffic in bytes.
    pub mem_traffic_bytes: f64,
}

impl HwPerf {
    pub fn csv_header() -> &'static str {
        "latency_ms,area_mm2,e_dyn_mJ,e_leak_mJ"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9},{:.6},{:.9},{:.9}",
            self.latency_ms, self.area_mm2, self.e_dyn_mj, self.e_leak_mj
        )
    }
}

/// Per-layer cost breakdown, exposed for the orderings tests and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCost {
    pub label: String,
    pub mac_cycles: f64,
    pub fill_cycles: f64,
    pub elementwise_cycles: f64,
    pub mem_bytes: f64,
    pub macs_executed: f64,
}

fn ceil_div(n: u64, d: u64) -> u64 {
    n.div_ceil(d.max(1))
}

/// Chip area of a configuration in mm^2.
pub fn area(c: &AcceleratorConfig, k: &CostConstants) -> f64 {
    let pes = c.pe_count() as f64;
    let macs = pes * c.mac_units_per_pe() as f64;
    let mults = macs * c.multipliers_per_mac() as f64;
    k.ctrl_area_mm2
        + pes * k.pe_area_mm2
        + macs * k.mac_area_mm2
        + mults * k.mult_area_mm2
        + c.act_buf_mb as f64 * k.act_buf.area_mm2_per_mb
        + c.wgt_buf_mb as f64 * k.wgt_buf.area_mm2_per_mb
        + c.mask_buf_mb as f64 * k.mask_buf.area_mm2_per_mb
        + k.mem(c.mem_type).ctrl_area_mm2
}

/// Total leakage power in mW.
pub fn leakage_mw(c: &AcceleratorConfig, k: &CostConstants) -> f64 {
    let pes = c.pe_count() as f64;
    let macs = pes * c.mac_units_per_pe() as f64;
    let mults = macs * c.multipliers_per_mac() as f64;
    k.ctrl_leak_mw
        + pes * k.pe_leak_mw
        + macs * k.mac_leak_mw
        + mults * k.mult_leak_mw
        + c.act_buf_mb as f64 * k.act_buf.leak_mw_per_mb
        + c.wgt_buf_mb as f64 * k.wgt_buf.leak_mw_per_mb
        + c.mask_buf_mb as f64 * k.mask_buf.leak_mw_per_mb
        + k.mem(c.mem_type).ctrl_leak_mw
}

/// Cost of one layer on `c`. Public mainly for tests and the CLI's
/// per-layer report.
pub fn layer_cost(
    layer: &LayerShape,
    c: &AcceleratorConfig,
    k: &CostConstants,
    sparsity_enabled: bool,
) -> Result<(LayerCost, f64)> {
    let bytes = k.bytes_per_element();
    let batch = c.batch as u64;
    let act_buf_bytes = c.act_buf_mb as f64 * 1024.0 * 1024.0;
    let wgt_buf_bytes = c.wgt_buf_mb as f64 * 1024.0 * 1024.0;
    let mask_buf_bytes = c.mask_buf_mb as f64 * 1024.0 * 1024.0;

    match layer.kind {
        LayerKind::Mac => {
            let eff = if sparsity_enabled {
                (1.0 - layer.sparsity_act) * (1.0 - layer.sparsity_wgt)
            } else {
                1.0
            };
            let t_ib = ceil_div(batch, c.p_ib as u64);
            let t_if = ceil_div(layer.n_if, c.p_if as u64);
            let t_ix = ceil_div(layer.out_x, c.p_ix as u64);
            let t_iy = ceil_div(layer.out_y, c.p_iy as u64);
            let t_of = ceil_div(layer.n_of, c.p_of as u64);
            let t_kx = ceil_div(layer.n_kx, c.p_kx as u64);
            let t_ky = ceil_div(layer.n_ky, c.p_ky as u64);
            let tile_product =
                (t_ib * t_if * t_ix * t_iy * t_of * t_kx * t_ky) as f64;
            let mac_cycles = tile_product * eff;
            let fill = (k.pipeline_depth(c.multipliers_per_mac()) - 1) as f64;

            let lanes = (c.p_ib as u64
                * c.p_if as u64
                * c.p_ix as u64
                * c.p_iy as u64
                * c.p_of as u64
                * c.p_kx as u64
                * c.p_ky as u64) as f64;
            let macs_executed = tile_product * lanes * eff;

            // Working-set sanity: one tile of weights / activations must fit.
            let min_wgt_tile = (c.p_of as u64 * c.p_if as u64 * c.p_kx as u64 * c.p_ky as u64)
                as f64
                * bytes;
            if min_wgt_tile > wgt_buf_bytes {
                return Err(Error::Capacity(format!(
                    "weight tile of {min_wgt_tile:.0} B exceeds weight buffer for layer '{}'",
                    layer.label
                )));
            }
            let min_act_tile = (c.p_ib as u64 * c.p_if as u64 * c.p_ix as u64 * c.p_iy as u64)
                as f64
                * bytes;
            if min_act_tile > act_buf_bytes {
                return Err(Error::Capacity(format!(
                    "activation tile of {min_act_tile:.0} B exceeds activation buffer for layer '{}'",
                    layer.label
                )));
            }

            let act_elems = (batch * layer.n_if * layer.n_ix * layer.n_iy) as f64;
            let wgt_elems = (layer.n_of * layer.n_if * layer.n_kx * layer.n_ky) as f64;
            let out_elems = (batch * layer.n_of * layer.out_x * layer.out_y) as f64;
            let (act_scale, wgt_scale, mask_bytes) = if sparsity_enabled {
                (
                    1.0 - layer.sparsity_act,
                    1.0 - layer.sparsity_wgt,
                    (act_elems + wgt_elems) / 8.0,
                )
            } else {
                (1.0, 1.0, 0.0)
            };
            let act_bytes = act_elems * bytes * act_scale;
            let wgt_bytes = wgt_elems * bytes * wgt_scale;
            let out_bytes = out_elems * bytes * act_scale;

            // Spills: data larger than its buffer is re-fetched once per
            // cycling tile group, capped by that group count.
            let act_refetch =
                ((act_bytes / act_buf_bytes).ceil().max(1.0)).min(t_of as f64);
            let wgt_refetch = ((wgt_bytes / wgt_buf_bytes).ceil().max(1.0))
                .min((t_ib * t_ix * t_iy) as f64);
            let mask_refetch = if mask_bytes > 0.0 {
                ((mask_bytes / mask_buf_bytes).ceil().max(1.0)).min(t_of as f64)
            } else {
                0.0
            };

            let mem_bytes =
                act_bytes * act_refetch + wgt_bytes * wgt_refetch + out_bytes + mask_bytes * mask_refetch;

            // batch-norm + activation on every output element
            let bn_ops = out_elems * 2.0;

            let buf_pj = act_bytes
                * act_refetch
                * (k.act_buf.read_pj_per_byte + k.act_buf.write_pj_per_byte)
                + out_bytes * k.act_buf.write_pj_per_byte
                + wgt_bytes
                    * wgt_refetch
                    * (k.wgt_buf.read_pj_per_byte + k.wgt_buf.write_pj_per_byte)
                + mask_bytes * (k.mask_buf.read_pj_per_byte + k.mask_buf.write_pj_per_byte);
            let dyn_pj = macs_executed * k.e_mac_pj
                + bn_ops * k.e_alu_pj
                + buf_pj
                + mem_bytes * k.mem(c.mem_type).e_pj_per_byte;

            Ok((
                LayerCost {
                    label: layer.label.clone(),
                    mac_cycles,
                    fill_cycles: fill,
                    elementwise_cycles: 0.0,
                    mem_bytes,
                    macs_executed,
                },
                dyn_pj,
            ))
        }
        LayerKind::Elementwise => {
            let total_ops = (layer.elems * batch) as f64;
            let cycles = (total_ops / c.pe_count() as f64).ceil();
            let moved = total_ops * bytes;
            let buf_pj = moved * (k.act_buf.read_pj_per_byte + k.act_buf.write_pj_per_byte);
            let dyn_pj = total_ops * k.e_alu_pj + buf_pj;
            Ok((
                LayerCost {
                    label: layer.label.clone(),
                    mac_cycles: 0.0,
                    fill_cycles: 0.0,
                    elementwise_cycles: cycles,
                    mem_bytes: 0.0,
                    macs_executed: 0.0,
                },
                dyn_pj,
            ))
        }
    }
}

/// Simulate a CNN on an accelerator config with the given constants.
/// Deterministic: identical inputs give bit-identical outputs.
pub fn simulate(
    cnn: &ComputationalGraph,
    c: &AcceleratorConfig,
    k: &CostConstants,
    opts: &SimOptions,
) -> Result<HwPerf> {
    let layers = extract_layers(cnn, opts)?;
    simulate_layers(&layers, c, k, opts.sparsity_enabled)
}

/// Simulate a pre-extracted layer list.
pub fn simulate_layers(
    layers: &[LayerShape],
    c: &AcceleratorConfig,
    k: &CostConstants,
    sparsity_enabled: bool,
) -> Result<HwPerf> {
    let mut mac_cycles = 0.0;
    let mut compute_cycles = 0.0;
    let mut mem_bytes = 0.0;
    let mut dyn_pj = 0.0;
    let mut macs = 0.0;
    for layer in layers {
        let (cost, pj) = layer_cost(layer, c, k, sparsity_enabled)?;
        mac_cycles += cost.mac_cycles;
        compute_cycles += cost.mac_cycles + cost.fill_cycles + cost.elementwise_cycles;
        mem_bytes += cost.mem_bytes;
        macs += cost.macs_executed;
        dyn_pj += pj;
    }
    let bw_bytes_per_s =
        k.mem(c.mem_type).bw_gbps_per_channel * 1e9 * c.mem_config.channels as f64;
    let latency_s = compute_cycles / k.clock_hz + mem_bytes / bw_bytes_per_s;
    let leak_mw = leakage_mw(c, k);
    Ok(HwPerf {
        latency_ms: latency_s * 1e3,
        area_mm2: area(c, k),
        e_dyn_mj: dyn_pj * 1e-9,
        e_leak_mj: leak_mw * latency_s,
        macs_executed: macs,
        mac_cycles,
        compute_cycles,
        mem_traffic_bytes: mem_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::presets::preset;
    use crate::accel::space::{AccelSpace, MemConfig, MemType};
    use crate::cnn::block::{BlockCatalog, CatalogConfig};
    use crate::cnn::fixtures;
    use crate::sim::layers::LayerKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_by_one_layer(n: u64, p: &AcceleratorConfig) -> LayerShape {
        LayerShape {
            kind: LayerKind::Mac,
            label: "test-conv".into(),
            n_if: p.p_if as u64,
            n_ix: p.p_ix as u64,
            n_iy: p.p_iy as u64,
            n_of: n,
            n_kx: p.p_kx as u64,
            n_ky: p.p_ky as u64,
            out_x: p.p_ix as u64,
            out_y: p.p_iy as u64,
            stride: 1,
            padding: 0,
            sparsity_act: 0.0,
            sparsity_wgt: 0.0,
            elems: 0,
        }
    }

    fn fixed_config() -> AcceleratorConfig {
        AcceleratorConfig {
            p_ib: 1,
            p_if: 16,
            p_ix: 4,
            p_iy: 4,
            p_of: 2,
            p_kx: 3,
            p_ky: 3,
            batch: 1,
            act_buf_mb: 4,
            wgt_buf_mb: 4,
            mask_buf_mb: 2,
            mem_type: MemType::Rram,
            mem_config: MemConfig::new(16, 2, 2),
        }
    }

    #[test]
    fn single_tile_costs_pipeline_constant() {
        let k = CostConstants::shipped();
        let c = fixed_config();
        let layer = one_by_one_layer(c.p_of as u64, &c);
        let (cost, _) = layer_cost(&layer, &c, &k, false).unwrap();
        assert_eq!(cost.mac_cycles, 1.0);
        let total = cost.mac_cycles + cost.fill_cycles;
        assert_eq!(total, k.pipeline_depth(c.multipliers_per_mac()) as f64);
    }

    #[test]
    fn weight_sparsity_halves_mac_cycles_and_moves_masks() {
        let k = CostConstants::shipped();
        let c = fixed_config();
        let mut layer = one_by_one_layer(c.p_of as u64, &c);
        layer.sparsity_act = 0.0;
        layer.sparsity_wgt = 0.5;
        let (dense, _) = layer_cost(&layer, &c, &k, false).unwrap();
        let (sparse, _) = layer_cost(&layer, &c, &k, true).unwrap();
        assert!((sparse.mac_cycles - 0.5 * dense.mac_cycles).abs() < 1e-12);
        assert!(sparse.mem_bytes > 0.0);
        // mask traffic present only in the sparse run
        let mask_bytes = ((layer.n_if * layer.n_ix * layer.n_iy
            + layer.n_of * layer.n_if * layer.n_kx * layer.n_ky) as f64)
            / 8.0;
        assert!(sparse.mem_bytes >= mask_bytes);
    }

    #[test]
    fn doubling_n_of_doubles_mac_cycles_area_fixed() {
        let k = CostConstants::shipped();
        let c = fixed_config();
        let l1 = one_by_one_layer(c.p_of as u64, &c);
        let l2 = one_by_one_layer(2 * c.p_of as u64, &c);
        let (c1, _) = layer_cost(&l1, &c, &k, false).unwrap();
        let (c2, _) = layer_cost(&l2, &c, &k, false).unwrap();
        assert_eq!(c2.mac_cycles, 2.0 * c1.mac_cycles);
        assert_eq!(area(&c, &k), area(&c, &k));
    }

    #[test]
    fn doubling_p_of_halves_mac_cycles() {
        let k = CostConstants::shipped();
        let mut c = fixed_config();
        c.p_of = 2;
        let layer = one_by_one_layer(8, &c); // divisible by 2 and 4
        let (slow, _) = layer_cost(&layer, &c, &k, false).unwrap();
        c.p_of = 4;
        let (fast, _) = layer_cost(&layer, &c, &k, false).unwrap();
        assert_eq!(fast.mac_cycles * 2.0, slow.mac_cycles);
    }

    #[test]
    fn area_is_linear_in_buffer_size() {
        let k = CostConstants::shipped();
        let mut c = fixed_config();
        c.act_buf_mb = 1;
        let a1 = area(&c, &k);
        c.act_buf_mb = 24;
        let a24 = area(&c, &k);
        assert!((a24 - a1 - 23.0 * k.act_buf.area_mm2_per_mb).abs() < 1e-9);
    }

    #[test]
    fn spring_area_near_reported() {
        let k = CostConstants::shipped();
        let p = preset("spring").unwrap();
        let a = area(&p.config, &k);
        assert!(
            a < 2.0 * p.reported_area_mm2 && a > p.reported_area_mm2 / 2.0,
            "area {a} vs reported {}",
            p.reported_area_mm2
        );
    }

    #[test]
    fn simulate_is_deterministic() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        let k = CostConstants::shipped();
        let c = preset("spring").unwrap().config;
        let a = simulate(&g, &c, &k, &SimOptions::default()).unwrap();
        let b = simulate(&g, &c, &k, &SimOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.latency_ms > 0.0 && a.area_mm2 > 0.0);
    }

    #[test]
    fn more_parallelism_never_more_mac_cycles() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        let k = CostConstants::shipped();
        let space = AccelSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut c = space.sample(&mut rng);
            c.batch = 1;
            let base = simulate(&g, &c, &k, &SimOptions::default()).unwrap();
            let mut faster = c;
            faster.p_of = space.p_of.iter().copied().max().unwrap();
            let perf = simulate(&g, &faster, &k, &SimOptions::default()).unwrap();
            assert!(perf.mac_cycles <= base.mac_cycles + 1e-9);
        }
    }

    #[test]
    fn bigger_buffers_never_more_traffic() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        let k = CostConstants::shipped();
        let mut c = fixed_config();
        c.batch = 512; // force spills
        c.act_buf_mb = 1;
        c.wgt_buf_mb = 1;
        let small = simulate(&g, &c, &k, &SimOptions::default()).unwrap();
        c.act_buf_mb = 24;
        c.wgt_buf_mb = 24;
        let big = simulate(&g, &c, &k, &SimOptions::default()).unwrap();
        assert!(big.mem_traffic_bytes <= small.mem_traffic_bytes);
    }

    #[test]
    fn macs_conserved_within_tile_rounding() {
        let cat = BlockCatalog::build(&CatalogConfig::default());
        let g = fixtures::toy_lenet(&cat);
        let opts = SimOptions {
            sparsity_enabled: false,
            ..SimOptions::default()
        };
        let layers = extract_layers(&g, &opts).unwrap();
        let k = CostConstants::shipped();
        let c = fixed_config();
        let perf = simulate_layers(&layers, &c, &k, false).unwrap();
        let analytic: f64 = layers.iter().map(|l| l.macs() as f64).sum();
        // padded tiles can only add work, bounded by the lane product
        assert!(perf.macs_executed >= analytic);
        let lanes = (c.p_ib * c.p_if * c.p_ix * c.p_iy * c.p_of * c.p_kx * c.p_ky) as f64;
        let max_pad: f64 = layers
            .iter()
            .filter(|l| l.kind == LayerKind::Mac)
            .map(|l| {
                let dims = [
                    (1u64, c.p_ib as u64),
                    (l.n_if, c.p_if as u64),
                    (l.out_x, c.p_ix as u64),
                    (l.out_y, c.p_iy as u64),
                    (l.n_of, c.p_of as u64),
                    (l.n_kx, c.p_kx as u64),
                    (l.n_ky, c.p_ky as u64),
                ];
                dims.iter()
                    .map(|&(n, p)| (ceil_div(n, p) * p) as f64)
                    .product::<f64>()
            })
            .sum();
        assert!(perf.macs_executed <= max_pad + 1e-6);
        assert!(max_pad <= analytic * lanes); // sanity on the bound itself
    }
}
