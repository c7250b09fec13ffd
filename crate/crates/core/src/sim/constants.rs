//! Per-structure energy, latency, and area constants for the analytic cost
//! model. The shipped defaults are a calibration fixture: tuned once so that
//! the SPRING-like preset lands near its reported area, then frozen.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::accel::space::MemType;
use crate::error::{Error, Result};
use crate::sim::fixed_point::FixedPointSpec;

const DEFAULT_CONSTANTS_JSON: &str = include_str!("../../data/cost_constants.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferCosts {
    pub read_pj_per_byte: f64,
    pub write_pj_per_byte: f64,
    pub leak_mw_per_mb: f64,
    pub area_mm2_per_mb: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemCosts {
    pub bw_gbps_per_channel: f64,
    pub e_pj_per_byte: f64,
    pub ctrl_area_mm2: f64,
    pub ctrl_leak_mw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostConstants {
    pub version: String,
    pub clock_hz: f64,
    pub fixed_point: FixedPointSpec,
    /// Adder-tree pipeline stages beyond ceil(log2(multipliers)).
    pub pipeline_extra_stages: u32,
    pub e_mac_pj: f64,
    pub e_alu_pj: f64,
    pub act_buf: BufferCosts,
    pub wgt_buf: BufferCosts,
    pub mask_buf: BufferCosts,
    pub pe_area_mm2: f64,
    pub pe_leak_mw: f64,
    pub mac_area_mm2: f64,
    pub mac_leak_mw: f64,
    pub mult_area_mm2: f64,
    pub mult_leak_mw: f64,
    pub ctrl_area_mm2: f64,
    pub ctrl_leak_mw: f64,
    pub rram: MemCosts,
    pub dram: MemCosts,
    pub hbm: MemCosts,
}

impl CostConstants {
    pub fn mem(&self, t: MemType) -> &MemCosts {
        match t {
            MemType::Rram => &self.rram,
            MemType::Dram => &self.dram,
            MemType::Hbm => &self.hbm,
        }
    }

    pub fn bytes_per_element(&self) -> f64 {
        self.fixed_point.bytes_per_element()
    }

    /// Depth of the MAC pipeline for a unit with `multipliers` multipliers.
    pub fn pipeline_depth(&self, multipliers: u64) -> u64 {
        let tree = (multipliers.max(1) as f64).log2().ceil() as u64;
        tree + self.pipeline_extra_stages as u64
    }

    /// Canonical checksum of the constants payload.
    pub fn checksum(&self) -> String {
        let payload = serde_json::to_string(self).expect("constants serialize");
        let mut h = Sha256::new();
        h.update(payload.as_bytes());
        hex::encode(h.finalize())
    }

    /// Shipped default constants (checksum-verified).
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_CONSTANTS_JSON).expect("embedded constants valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ConstantsFile = serde_json::from_str(s)?;
        let actual = file.constants.checksum();
        if actual != file.checksum {
            return Err(Error::Validation(format!(
                "cost constants checksum mismatch: file says {}, payload hashes to {}",
                file.checksum, actual
            )));
        }
        file.constants.validate()?;
        Ok(file.constants)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ConstantsFile {
            constants: self.clone(),
            checksum: self.checksum(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    fn validate(&self) -> Result<()> {
        let nonneg = [
            self.clock_hz,
            self.e_mac_pj,
            self.e_alu_pj,
            self.pe_area_mm2,
            self.pe_leak_mw,
            self.mac_area_mm2,
            self.mac_leak_mw,
            self.mult_area_mm2,
            self.mult_leak_mw,
            self.ctrl_area_mm2,
            self.ctrl_leak_mw,
        ];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "cost constants must be finite and non-negative".into(),
            ));
        }
        if self.clock_hz <= 0.0 {
            return Err(Error::Validation("clock_hz must be positive".into()));
        }
        for m in [&self.rram, &self.dram, &self.hbm] {
            if m.bw_gbps_per_channel <= 0.0 {
                return Err(Error::Validation("memory bandwidth must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ConstantsFile {
    constants: CostConstants,
    checksum: String,
}
