//! Cycle-level analytic accelerator cost model.

pub mod constants;
pub mod engine;
pub mod fixed_point;
pub mod layers;

pub use constants::{BufferCosts, CostConstants, MemCosts};
pub use engine::{area, layer_cost, leakage_mw, simulate, simulate_layers, HwPerf, LayerCost};
pub use fixed_point::{stochastic_round, FixedPointSpec, Quantizer};
pub use layers::{extract_layers, LayerKind, LayerShape, SimOptions};
