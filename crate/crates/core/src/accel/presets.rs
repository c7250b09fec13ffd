//! Named accelerator presets: published designs mapped to the nearest
//! in-space configs, annotated with their reported technology node, clock,
//! and headline figures.

use serde::{Deserialize, Serialize};

use crate::accel::space::AcceleratorConfig;
use crate::error::{Error, Result};

const PRESETS_JSON: &str = include_str!("../../data/accel_presets.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub tech_node_nm: u32,
    pub clock_mhz: u32,
    pub reported_area_mm2: f64,
    pub reported_pes: u64,
    pub reported_macs_per_pe: u64,
    pub reported_multipliers_per_mac: u64,
    pub config: AcceleratorConfig,
}

#[derive(Deserialize)]
struct PresetFile {
    presets: Vec<Preset>,
}

/// All shipped presets, in file order.
pub fn presets() -> Vec<Preset> {
    let file: PresetFile = serde_json::from_str(PRESETS_JSON).expect("embedded presets parse");
    file.presets
}

/// Case-insensitive lookup by preset name.
pub fn preset(name: &str) -> Result<Preset> {
    let lname = name.to_ascii_lowercase();
    presets()
        .into_iter()
        .find(|p| p.name == lname)
        .ok_or_else(|| {
            let known: Vec<String> = presets().into_iter().map(|p| p.name).collect();
            Error::Lookup(format!("unknown preset '{name}'; known: {known:?}"))
        })
}
